"""Write synthetic stand-in inputs for the experiment drivers.

Produces a gray-level texture (PGM and CSV) and a forest-plot pair of
point CSVs (soil samples with Al/Ca/P, trees with dbh).

    python scripts/make_inputs.py --out data/ --size 512
"""

import argparse
from pathlib import Path

import numpy as np

from codisp import io
from codisp.experiments import synthetic_forest_plot, synthetic_texture


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data")
    ap.add_argument("--size", type=int, default=512)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trees", type=int, default=3000)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    tex = synthetic_texture(args.size, args.size, seed=args.seed)
    io.write_grid_csv(out / "texture.csv", tex)
    gray = np.clip(np.floor(128 + 40 * tex.values + 0.5), 0, 255)
    io.write_pgm_array(out / "texture.pgm", gray, 255)

    soil, trees = synthetic_forest_plot(seed=args.seed, n_trees=args.trees)
    io.write_points_csv(out / "soil.csv", soil)
    io.write_points_csv(out / "trees.csv", trees)
    for p in sorted(out.iterdir()):
        print(p)


if __name__ == "__main__":
    main()
