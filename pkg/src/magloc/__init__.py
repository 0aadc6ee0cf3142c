"""Location-type inference from magnetometer traces.

Library layout:

- ``core``        labeled traces, segmentation, dataset validation
- ``distances``   DTW, Euclidean, cosine, Bhattacharyya, GCC-PHAT kernels
- ``spectral``    DFT, inverse, one-sided power spectra
- ``features``    statistical descriptors, combination, standardization
- ``shapelets``   dictionary discovery and the shapelet transform
- ``learners``    native kNN / random forest / gradient boosting / 1-NN matcher
- ``siamese``     contrastive 1-D conv embedding with audited gradients
- ``evaluation``  the three leave-one-group-out protocols and reports
- ``synth``       seeded planted-motif trace generator (dataset surrogate)
- ``io``          CSV ingestion and JSON persistence
- ``cli``         command-line surface (synth / ingest / train / evaluate / report)
"""

__version__ = "0.1.0"

from .core import Dataset, Observation, Sample, Segment, magnitude, segment, validate_dataset

__all__ = [
    "Dataset",
    "Observation",
    "Sample",
    "Segment",
    "magnitude",
    "segment",
    "validate_dataset",
    "__version__",
]
