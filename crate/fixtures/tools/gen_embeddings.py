"""Regenerates fixtures/embeddings.txt: 50-d vectors where words of one
concept group sit close together and unrelated words are near-orthogonal."""
import numpy as np

DIM = 50
GROUPS = [
    ["medicine", "medicines", "drug", "drugs", "medication", "medications"],
    ["treat", "treats", "cure", "cures", "treated"],
    ["manifestations", "symptoms", "signs"],
    ["diseases", "disease", "conditions", "illnesses"],
    ["risk"],
    ["factors", "causes"],
    ["genes", "gene"],
    ["associated", "linked", "related"],
    ["side", "adverse"],
    ["effects", "reactions"],
    ["present", "presenting", "show"],
    ["which"], ["what"], ["can"], ["are"], ["is"], ["the"], ["of"],
    ["for"], ["with"], ["does"], ["?"], ["a"],
]

rng = np.random.default_rng(20240301)
rows = []
for group in GROUPS:
    base = rng.normal(size=DIM)
    for word in group:
        rows.append((word, base + 0.25 * rng.normal(size=DIM)))

with open("embeddings.txt", "w") as f:
    f.write(f"{len(rows)} {DIM}\n")
    for word, vec in rows:
        f.write(word + " " + " ".join(f"{x:.5f}" for x in vec) + "\n")
