"""Reference values for tests/reference_oracles.rs, computed with numpy and
scipy from seeded inputs that are stored alongside the expected outputs.

Run from this directory:
    python3 numeric_reference.py ../../../../data/mini50 > ../fixtures/numeric_reference.json
"""
import json
import sys

import numpy as np
from scipy.spatial.distance import cosine, euclidean

rng = np.random.default_rng(20240611)
out = {}

# distances
pairs = []
for _ in range(100):
    u, v = rng.normal(size=8), rng.normal(size=8)
    pairs.append({"u": u.tolist(), "v": v.tolist(), "euclidean": euclidean(u, v), "cosine": cosine(u, v)})
out["distances"] = pairs

# prototype of a 7-sense word under a fixed encoder
n_in, n_hidden, n_out = 4, 5, 3
w1, b1 = rng.normal(size=(n_hidden, n_in)) * 0.5, rng.normal(size=n_hidden) * 0.1
w2, b2 = rng.normal(size=(n_out, n_hidden)) * 0.5, rng.normal(size=n_out) * 0.1
senses = rng.normal(size=(7, n_in))
encoded = (w2 @ np.tanh(w1 @ senses.T + b1[:, None]) + b2[:, None]).T
out["prototype"] = {
    "dims": [n_in, n_hidden, n_out],
    "w1": w1.ravel().tolist(),
    "b1": b1.tolist(),
    "w2": w2.ravel().tolist(),
    "b2": b2.tolist(),
    "senses": senses.tolist(),
    "mean": encoded.mean(axis=0).tolist(),
}

# kernel weights for hand-set distances
d = np.arange(5.0)
out["kernel_weights"] = {"distances": d.tolist(), "h_m": 1.0, "weights": (np.exp(-d) / np.exp(-d).sum()).tolist()}

# neighborhood over a 20-word vocabulary
words = [f"w{i:02d}" for i in range(20)]
vectors = rng.normal(size=(20, 5))
order = sorted(range(1, 20), key=lambda i: (cosine(vectors[0], vectors[i]), words[i]))
out["neighborhood"] = {
    "words": words,
    "vectors": vectors.tolist(),
    "query": words[0],
    "expected": [words[0]] + [words[i] for i in order],
}

# groundtruth ranks: 20 items over a shared option table, some with exact ties
table = {f"o{i}": rng.integers(-3, 4, size=3).astype(float).tolist() for i in range(12)}
items = []
for k in range(20):
    ids = rng.choice(sorted(table), size=5, replace=False).tolist()
    pred = rng.integers(-3, 4, size=3).astype(float)
    dist = {i: euclidean(pred, table[i]) for i in ids}
    gt = ids[0]
    # exhaustive sort, negatives first on equal distance
    ranked = sorted(ids, key=lambda i: (dist[i], i == gt))
    items.append({"prediction": pred.tolist(), "groundtruth": gt, "negatives": ids[1:], "rank": ranked.index(gt) + 1})
out["ranks"] = {"table": table, "items": items}

# triplet enumeration on the bundled 50-entry corpus
data = sys.argv[1]
inventory = {}
for line in open(f"{data}/inventory.jsonl"):
    s = json.loads(line)
    inventory.setdefault(s["word"], []).append(s["sense_id"])
anchors = {}
for line in open(f"{data}/glosses.jsonl"):
    e = json.loads(line)
    if e["split"] == "train":
        anchors[e["definition_id"]] = e["word"]
pairs = sorted([a, p] for a, w in anchors.items() for p in inventory[w])
out["triplets"] = {
    "anchor_positive_pairs": pairs,
    "forbidden_negatives": {a: sorted(inventory[w]) for a, w in anchors.items()},
    "pool_size": sum(len(v) for v in inventory.values()),
}

json.dump(out, sys.stdout, indent=1)
sys.stdout.write("\n")
