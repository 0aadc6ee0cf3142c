"""Train the contrastive embedding network and inspect the space it learns.

Run: python3 demos/05_siamese_embedding.py
"""

import numpy as np

from magloc.core import segment
from magloc.siamese import NetworkConfig, embed_classify, embed_many, train_siamese
from magloc.synth import default_spec, generate

dataset = generate(default_spec(seed=2))
series, labels = [], []
for obs in dataset.observations:
    for seg in segment(obs, 60)[:4]:
        series.append(seg.series)
        labels.append(obs.location_type)

config = NetworkConfig(
    conv_layers=2, epochs=10, pairs_per_epoch=256, batch_size=32,
    learning_rate=2e-3, seed=0,
)
print(f"training on {len(series)} segments, {len(set(labels))} classes, "
      f"{config.conv_layers} conv layers x {config.filters} filters")
net = train_siamese(series, labels, config)
print("epoch losses:", " ".join(f"{v:.3f}" for v in net.history))

emb = embed_many(net, series)
labels_arr = np.array(labels)
same, diff = [], []
for i in range(0, len(series), 7):
    for j in range(i + 1, len(series), 11):
        d = float(np.sqrt(np.sum((emb[i] - emb[j]) ** 2)))
        (same if labels_arr[i] == labels_arr[j] else diff).append(d)
print(f"mean same-class embedding distance:      {np.mean(same):.3f}")
print(f"mean different-class embedding distance: {np.mean(diff):.3f}")

held = generate(default_spec(seed=99))
queries, truths = [], []
for obs in held.observations[::5]:
    queries.append(segment(obs, 60)[5].series)
    truths.append(obs.location_type)
correct = sum(
    embed_classify(net, series, labels, q, k=1)[0] == t
    for q, t in zip(queries, truths)
)
print(f"1-NN in embedding space on unseen traces: {correct}/{len(queries)} correct")
