#!/usr/bin/env python3
"""Regenerate the bundled synthetic 1H-NMR peak-list corpus (corpus/nmr/*.peaks).

Each compound is a set of multiplets (singlet .. quartet) placed on a 0-10 ppm
window, written as fractional positions of that window. `sterol` and
`terpene_ketone` share most of their aliphatic multiplets so that the pair has
a strong normalized scalar product once rendered.

Usage: tools/make_nmr_corpus.py [out_dir]
"""

import pathlib
import sys

import numpy as np

PPM_WINDOW = 10.0
J_PPM = 0.0175  # ~7 Hz at 400 MHz

# name: list of (ppm region lo, ppm region hi, number of multiplets)
COMPOUNDS = {
    "acetaminophen": [(2.0, 2.2, 1), (6.6, 7.5, 3), (9.0, 9.8, 1)],
    "alanine": [(1.3, 1.6, 1), (3.6, 3.9, 1)],
    "benzyl_alcohol": [(4.4, 4.7, 1), (7.1, 7.5, 4)],
    "caffeine": [(3.2, 4.1, 3), (7.4, 7.9, 1)],
    "citric_acid": [(2.6, 3.0, 2)],
    "disaccharide": [(3.1, 4.2, 12), (4.3, 5.3, 3)],
    "ethyl_acetate": [(1.1, 1.3, 1), (1.9, 2.1, 1), (4.0, 4.2, 1)],
    "glycerol": [(3.3, 3.8, 3)],
    "ibuprofen": [(0.8, 1.0, 1), (1.4, 1.9, 2), (2.4, 2.5, 1), (3.6, 3.8, 1), (7.0, 7.3, 2)],
    "limonene": [(1.5, 2.3, 6), (4.6, 4.8, 1), (5.3, 5.5, 1)],
    "nicotinamide": [(7.4, 9.1, 4)],
    "sterol": [(0.6, 2.5, 16), (3.4, 3.6, 1), (5.3, 5.4, 1)],
    "terpene_ketone": [],  # derived from sterol below
    "toluene": [(2.3, 2.4, 1), (7.0, 7.3, 3)],
    "vanillin": [(3.8, 4.0, 1), (6.9, 7.5, 3), (9.7, 9.9, 1)],
}


def multiplet(rng, center):
    order = int(rng.choice([1, 2, 3, 4], p=[0.3, 0.35, 0.2, 0.15]))
    weights = {1: [1], 2: [1, 1], 3: [1, 2, 1], 4: [1, 3, 3, 1]}[order]
    base = float(rng.uniform(0.5, 3.0))
    offsets = (np.arange(order) - (order - 1) / 2.0) * J_PPM
    return [(center + o, base * w) for o, w in zip(offsets, weights)]


def build(rng, regions):
    peaks = []
    for lo, hi, count in regions:
        for center in rng.uniform(lo, hi, size=count):
            peaks.extend(multiplet(rng, float(center)))
    return peaks


def main():
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "corpus/nmr")
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20131108)
    lists = {}
    for name, regions in COMPOUNDS.items():
        if regions:
            lists[name] = build(rng, regions)
    # Shares the sterol's aliphatic envelope with jittered positions and
    # reweighted amplitudes, plus its own carbonyl-adjacent multiplets.
    shared = [(p + rng.normal(0, 0.002), a * rng.uniform(0.6, 1.4)) for p, a in lists["sterol"] if p < 2.5]
    keep = rng.random(len(shared)) < 0.8
    lists["terpene_ketone"] = [pk for pk, k in zip(shared, keep) if k] + build(rng, [(2.0, 2.4, 2)])

    for name, peaks in sorted(lists.items()):
        peaks.sort()
        with open(out / f"{name}.peaks", "w") as f:
            f.write(f"# synthetic 1H peak list: {name}\n")
            f.write("# position as a fraction of a 0-10 ppm window, relative amplitude\n")
            f.write("# units: fraction\n")
            for ppm, amp in peaks:
                f.write(f"{ppm / PPM_WINDOW:.6f}\t{amp:.4f}\n")


if __name__ == "__main__":
    main()
