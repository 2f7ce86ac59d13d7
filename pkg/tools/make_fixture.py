#!/usr/bin/env python3
"""Regenerate the bundled synthetic craniometric fixture.

The original measurements this project replicates are not redistributable
here, so the bundled dataset is synthetic: 13 skulls by 27 variables with
the same observation names, group structure and per-observation missing
counts as the historical table (2, 4, 11, 16, 0, 13, 6, 5, 15, 15, 0, 18,
0 missing cells, 105 in total = 29.9%).  Values are drawn around
group-level base values so the groups actually cluster, a handful of
cells are written as lo-hi ranges, and six core variables are never
masked so every pair of skulls shares observed variables.

Run from the repository root:  python tools/make_fixture.py
"""

from __future__ import annotations

import random
from pathlib import Path

OUT_DIR = Path(__file__).resolve().parent.parent / "data"
SEED = 1909

# name, kind, (neanderthalensis, sapiens, erectus) base, noise sd
VARIABLES = [
    ("glabella_occipital_length", "plain", (201.0, 186.0, 183.0), 4.0),
    ("max_cranial_breadth", "plain", (147.0, 139.0, 131.0), 3.0),
    ("basion_bregma_height", "plain", (124.0, 134.0, 114.0), 3.0),
    ("min_frontal_breadth", "plain", (106.0, 97.0, 89.0), 3.0),
    ("bizygomatic_breadth", "plain", (141.0, 132.0, 136.0), 3.0),
    ("basion_nasion_length", "plain", (106.0, 99.0, 98.0), 2.5),
    ("upper_facial_height", "plain", (76.0, 70.0, 72.0), 2.5),
    ("orbital_height", "plain", (34.0, 33.0, 31.0), 1.5),
    ("orbital_breadth", "plain", (44.0, 40.0, 41.0), 1.5),
    ("nasal_height", "plain", (56.0, 51.0, 49.0), 2.0),
    ("nasal_breadth", "plain", (29.0, 24.0, 27.0), 1.5),
    ("palate_length", "plain", (57.0, 52.0, 54.0), 2.0),
    ("palate_breadth", "plain", (42.0, 37.0, 39.0), 2.0),
    ("foramen_magnum_length", "plain", (38.0, 35.0, 34.0), 1.5),
    ("mastoid_height", "plain", (26.0, 31.0, 27.0), 2.0),
    ("glabella_projection", "plain", (7.5, 4.0, 6.5), 0.8),
    ("browridge_thickness", "plain", (11.0, 6.0, 10.0), 1.0),
    ("occipital_chord", "plain", (98.0, 95.0, 88.0), 3.0),
    ("frontal_chord", "plain", (108.0, 112.0, 100.0), 3.0),
    ("parietal_chord", "plain", (112.0, 117.0, 104.0), 3.0),
    ("frontal_angle", "angle_degrees", (54.0, 63.0, 52.0), 2.0),
    ("occipital_angle", "angle_degrees", (112.0, 118.0, 107.0), 3.0),
    ("cephalic_index", "ratio:max_cranial_breadth,glabella_occipital_length", None, 0.0),
    ("height_length_index", "ratio:basion_bregma_height,glabella_occipital_length", None, 0.0),
    ("nasal_index", "ratio:nasal_breadth,nasal_height", None, 0.0),
    ("orbital_index", "ratio:orbital_height,orbital_breadth", None, 0.0),
    ("cranial_capacity", "plain", (1500.0, 1420.0, 940.0), 45.0),
]

# label, group, missing cell count, blend toward the other group cluster
SKULLS = [
    ("Spy I", "neanderthalensis", 2, 0.0),
    ("Spy II", "neanderthalensis", 4, 0.05),
    ("Krapina C", "neanderthalensis", 11, 0.0),
    ("Krapina D", "neanderthalensis", 16, 0.1),
    ("Neandertal", "neanderthalensis", 0, 0.0),
    ("Gibraltar", "neanderthalensis", 13, 0.1),
    ("Pithecanthropus", "erectus", 6, 0.0),
    ("Kannstatt", "sapiens", 5, 0.3),
    ("Galey Hill", "sapiens", 15, 0.0),
    ("Brunn", "sapiens", 15, 0.1),
    ("Brüx", "sapiens", 0, 0.0),
    ("Egisheim", "sapiens", 18, 0.05),
    ("Nowosiółka", "sapiens", 0, 0.35),
]

GROUP_COLUMN = {"neanderthalensis": 0, "sapiens": 1, "erectus": 2}
OTHER = {"neanderthalensis": 1, "sapiens": 0, "erectus": 0}

# always observed, so every pair of skulls overlaps even at 18 missing cells
CORE = {0, 1, 2, 20, 22, 26}

# (label, variable index, half width) cells stored as ranges
INTERVALS = [
    ("Spy II", 3, 2.0),
    ("Krapina C", 6, 1.5),
    ("Gibraltar", 12, 2.0),
    ("Kannstatt", 18, 2.5),
    ("Brunn", 4, 2.0),
]


def generate() -> tuple[str, str]:
    rng = random.Random(SEED)
    names = [name for name, *_ in VARIABLES]

    raw: dict[str, list[float]] = {}
    for label, group, _count, blend in SKULLS:
        row: list[float] = []
        for name, kind, bases, sd in VARIABLES:
            if kind.startswith("ratio:"):
                row.append(0.0)  # filled from components below
                continue
            own = bases[GROUP_COLUMN[group]]
            other = bases[OTHER[group]]
            base = own * (1 - blend) + other * blend
            row.append(base + rng.gauss(0.0, sd))
        for j, (name, kind, _bases, _sd) in enumerate(VARIABLES):
            if kind.startswith("ratio:"):
                num, den = kind.split(":", 1)[1].split(",")
                row[j] = 100.0 * row[names.index(num)] / row[names.index(den)]
        raw[label] = [round(v, 1) for v in row]

    masked: dict[str, set[int]] = {}
    eligible = [j for j in range(len(VARIABLES)) if j not in CORE]
    for label, _group, count, _blend in SKULLS:
        masked[label] = set(rng.sample(eligible, count))

    interval_cells = {(lbl, j): hw for lbl, j, hw in INTERVALS}

    lines = ["label," + ",".join(names)]
    for label, *_ in SKULLS:
        cells = []
        for j, value in enumerate(raw[label]):
            if j in masked[label]:
                cells.append("")
            elif (label, j) in interval_cells:
                hw = interval_cells[(label, j)]
                cells.append(f"{round(value - hw, 1)}-{round(value + hw, 1)}")
            else:
                cells.append(str(value))
        lines.append(f"{label}," + ",".join(cells))
    csv_text = "\n".join(lines) + "\n"

    meta = ["# Synthetic fixture metadata; regenerate with tools/make_fixture.py", ""]
    for name, kind, _bases, _sd in VARIABLES:
        if kind == "plain":
            continue
        meta.append(f"[variables.{name}]")
        if kind.startswith("ratio:"):
            comps = kind.split(":", 1)[1].split(",")
            meta.append('kind = "ratio"')
            meta.append("components = [" + ", ".join(f'"{c}"' for c in comps) + "]")
        else:
            meta.append(f'kind = "{kind}"')
        meta.append("")
    meta.append("[groups]")
    for label, group, *_ in SKULLS:
        meta.append(f'"{label}" = "{group}"')
    meta.extend(["", "[focal]", 'label = "Nowosiółka"', ""])
    meta.append("[representatives]")
    meta.append('neanderthalensis = "Neandertal"')
    meta.append('sapiens = "Brüx"')
    meta_text = "\n".join(meta) + "\n"
    return csv_text, meta_text


def main() -> None:
    OUT_DIR.mkdir(exist_ok=True)
    csv_text, meta_text = generate()
    (OUT_DIR / "synthetic_skulls.csv").write_text(csv_text, encoding="utf-8")
    (OUT_DIR / "synthetic_skulls_meta.toml").write_text(meta_text, encoding="utf-8")
    print(f"wrote {OUT_DIR / 'synthetic_skulls.csv'}")
    print(f"wrote {OUT_DIR / 'synthetic_skulls_meta.toml'}")


if __name__ == "__main__":
    main()
