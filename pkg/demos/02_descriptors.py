"""Statistical descriptors of magnetometer segments, time and frequency views.

Run: python3 demos/02_descriptors.py
"""

import numpy as np

from magloc.core import segment
from magloc.features import DescriptorConfig, extract_descriptors
from magloc.synth import default_spec, generate

dataset = generate(default_spec(seed=1))
cfg = DescriptorConfig()  # 15-sample sub-windows, both domain views

print("one descriptor vector per one-minute segment, first observation per class")
first_by_class = {}
for obs in dataset.observations:
    first_by_class.setdefault(obs.location_type, obs)

names_shown = False
for label, obs in sorted(first_by_class.items()):
    seg = segment(obs, 60)[0]
    fv = extract_descriptors(seg, cfg)
    if not names_shown:
        short = [n.removeprefix("time_")[:12] for n in fv.schema[:8]]
        print(f"{'class':8s}" + "".join(f"{n:>13s}" for n in short))
        names_shown = True
    print(f"{label:8s}" + "".join(f"{v:13.3f}" for v in fv.values[:8]))

print()
print("The frequency view applies the same eight formulas to the segment's")
print("one-sided power sequence; both views concatenate into one vector:")
seg = segment(dataset.observations[0], 60)[0]
fv = extract_descriptors(seg, cfg)
for name, value in zip(fv.schema, fv.values):
    print(f"  {name:28s} {value:14.5f}")
