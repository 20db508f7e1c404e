"""Writes threshold_pairs.csv: 183 labeled keyword/score pairs whose plausible
share above c = 0.9, 0.8, 0.7, 0.6 is 100%, 100%, 100%, 96%.

Bands (score ranges are half-open from below, matching the strict S > c):
  (0.9, 1.0]  20 pairs, all plausible
  (0.8, 0.9]  30 pairs, all plausible (one exactly at 0.9)
  (0.7, 0.8]  25 pairs, all plausible (one exactly at 0.8)
  (0.6, 0.7]  25 pairs, 21 plausible (an implausible one exactly at 0.7)
  [0.0, 0.6]  83 pairs, mixed (one exactly at 0.6)
"""
import csv
import random
from pathlib import Path

NOUNS = ["bear", "porridge", "chair", "bed", "cottage", "arrow", "boat", "giraffe", "tide", "jade", "bird",
         "knight", "castle", "lantern", "river", "drum", "kite", "fox", "sword", "teapot", "garden path",
         "mask", "shell", "horse", "crown"]


def band(rng, low, high, count, plausible, pinned=()):
    rows = [(score, label) for score, label in pinned]
    while len(rows) < count:
        score = round(rng.uniform(low, high), 3)
        if low < score <= high:
            rows.append((score, None))
    labels = [label for _, label in rows if label is not None]
    free = [i for i, (_, label) in enumerate(rows) if label is None]
    remaining_plausible = plausible - labels.count("plausible")
    rng.shuffle(free)
    out = list(rows)
    for n, i in enumerate(free):
        out[i] = (rows[i][0], "plausible" if n < remaining_plausible else "implausible")
    return out


def main():
    rng = random.Random(183)
    rows = []
    rows += band(rng, 0.9, 1.0, 20, 20)
    rows += band(rng, 0.8, 0.9, 30, 30, pinned=[(0.9, "plausible")])
    rows += band(rng, 0.7, 0.8, 25, 25, pinned=[(0.8, "plausible")])
    rows += band(rng, 0.6, 0.7, 25, 21, pinned=[(0.7, "implausible")])
    rows += band(rng, -0.001, 0.6, 83, 38, pinned=[(0.6, "plausible")])
    rng.shuffle(rows)
    out = Path(__file__).with_name("threshold_pairs.csv")
    with out.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["keyword", "score", "label"])
        for i, (score, label) in enumerate(rows):
            w.writerow([f"{NOUNS[i % len(NOUNS)]} {i}", f"{score:.3f}", label])


if __name__ == "__main__":
    main()
