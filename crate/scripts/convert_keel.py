#!/usr/bin/env python3
"""Convert the KEEL copies of the UCI benchmark sets into libsvm text files.

Usage: convert_keel.py <keel_ds wheel> <output dir>

The wheel is the `keel-ds` package from PyPI (`pip download --no-deps keel-ds`).
Values are written unscaled; ckrbf scales to [0,1] on load.
"""
import random
import sys
import zipfile
from pathlib import Path

# (keel name, output name, raw label -> {-1,+1})
SETS = [
    ("australian", "australian", {"0": -1, "1": 1}),
    ("wisconsin", "breast-cancer", {"2": -1, "4": 1}),
    ("pima", "diabetes", {"tested_negative": -1, "tested_positive": 1}),
    ("heart", "heart", {"1": -1, "2": 1}),
    ("bupa", "liver-disorders", {"1": -1, "2": 1}),
    ("splice", "splice", {"EI": -1, "IE": -1, "N": 1}),
]

NUCLEOTIDE = {"A": 1.0, "C": 2.0, "G": 3.0, "T": 4.0}
SPLICE_SAMPLES = 1000


def parse(text):
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        fields = [f.strip() for f in line.split(",")]
        rows.append((fields[:-1], fields[-1]))
    return rows


def to_float(v):
    if v in NUCLEOTIDE:
        return NUCLEOTIDE[v]
    try:
        return float(v)
    except ValueError:
        # ambiguous splice codes (D, N, S, R)
        return 0.0


def fmt(v):
    return repr(v) if v != int(v) else str(int(v))


def main():
    wheel, out = sys.argv[1], Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    z = zipfile.ZipFile(wheel)
    for keel, name, labels in SETS:
        rows = parse(z.read(f"keel_ds/data/balanced/raw/{keel}.dat").decode())
        if name == "splice":
            rng = random.Random(0)
            by_class = {}
            for r in rows:
                by_class.setdefault(labels[r[1]], []).append(r)
            picked = []
            for lab in sorted(by_class):
                group = by_class[lab]
                take = round(SPLICE_SAMPLES * len(group) / len(rows))
                picked.extend(rng.sample(group, take))
            rows = sorted(picked, key=lambda r: rows.index(r))
        with open(out / f"{name}.libsvm", "w") as f:
            for feats, lab in rows:
                vals = [to_float(v) for v in feats]
                cols = " ".join(f"{i + 1}:{fmt(v)}" for i, v in enumerate(vals))
                f.write(f"{labels[lab]:+d} {cols}\n")
        print(name, len(rows), len(rows[0][0]))


if __name__ == "__main__":
    main()
