"""Run every experiment driver through the CLI on the synthetic inputs.

Each driver writes maps, a summary and a manifest into its own folder
under ``--out``; a final table prints the per-map summary means.

    python scripts/make_inputs.py --out data
    python scripts/run_experiments.py --data data --out runs [--quick]
"""

import argparse
import csv
import sys
import time
from pathlib import Path

from codisp.cli import main as codisp


def drivers(data: Path, quick: bool):
    lag = ["--max-lag-x", "8", "--max-lag-y", "8"] if quick else ["--max-lag-x", "24", "--max-lag-y", "24"]
    tex = str(data / "texture.pgm")
    yield "saltpepper", ["exp-saltpepper", "--input", tex, "--delta", "0.05", "0.10", "0.25",
                         "--tau2", "1", "5", "10", *lag]
    yield "saltpepper_classic", ["exp-saltpepper", "--input", tex, "--mode", "classic",
                                 "--delta", "0.05", "0.10", "0.25", *lag]
    yield "grf", ["exp-grf", "--rows", "64" if quick else "128", "--cols", "64" if quick else "128",
                  "--a1", "0.1", "--a2", "0.1", "--delta", "0.05", "0.15", "0.25", *lag]
    yield "missing", ["exp-missing", "--input", tex, "--block-size", "15", "30", "60",
                      "--proportion", "2e-5", "4e-5", "8e-5", *lag]
    gaps = ["8", "16", "32"] if quick else ["32", "64", "96"]
    yield "gap", ["exp-gap", "--input", tex, "--gap-size", *gaps, *lag]
    yield "thinning", ["exp-thinning", "--soil", str(data / "soil.csv"), "--trees", str(data / "trees.csv"),
                       "--elements", "Al", "Ca", "P", "--boxcox-lambda", "1", "0.5", "1",
                       "--family", "wave", "exponential", "exponential", "--lag-spacing", "25",
                       "--keep", "1", "0.9", "0.8", "--max-lag-x", "8", "--max-lag-y", "8"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", default="data")
    ap.add_argument("--out", default="runs")
    ap.add_argument("--workers", default="1")
    ap.add_argument("--quick", action="store_true", help="small windows for a fast smoke run")
    args = ap.parse_args()
    data, out = Path(args.data), Path(args.out)
    for name, argv in drivers(data, args.quick):
        t0 = time.perf_counter()
        rc = codisp(argv + ["--out", str(out / name), "--workers", args.workers])
        print(f"[{name}] exit {rc}, {time.perf_counter() - t0:.1f} s")
        if rc != 0:
            sys.exit(rc)
        with open(out / name / "summary.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                keys = list(row)[1 : list(row).index("mean_codisp")]
                label = " ".join(f"{k}={row[k]}" for k in keys)
                print(f"    {label:40s} mean={float(row['mean_codisp']):+.4f}")


if __name__ == "__main__":
    main()
