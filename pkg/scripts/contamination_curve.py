"""Seed-averaged mean codispersion against contamination level.

Sweeps delta for a smooth Matérn texture under replacement noise and
prints one line per (delta, max lag) so the effect of the lag window on
the mean can be compared directly.

    python scripts/contamination_curve.py --size 256 --seeds 5
"""

import argparse

import numpy as np

from codisp.codispersion import CodispConfig
from codisp.experiments import run_saltpepper, synthetic_texture
from codisp.grid import build_lag_window


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--tau2", type=float, default=10.0)
    ap.add_argument("--deltas", type=float, nargs="+", default=[0.01, 0.05, 0.10, 0.15, 0.25])
    ap.add_argument("--max-lags", type=int, nargs="+", default=[8, 16, 32])
    ap.add_argument("--a", type=float, default=1 / 40, help="inverse range of the texture")
    args = ap.parse_args()

    textures = [synthetic_texture(args.size, args.size, seed=s, a=args.a) for s in range(args.seeds)]
    print(f"{'max_lag':>7} " + " ".join(f"d={d:<6g}" for d in args.deltas))
    for L in args.max_lags:
        w = build_lag_window(L, L)
        means = np.mean(
            [[r.cmap.mean() for r in run_saltpepper(t, args.deltas, [args.tau2], w, CodispConfig(), seed=s)]
             for s, t in enumerate(textures)],
            axis=0,
        )
        print(f"{L:7d} " + " ".join(f"{m:<8.4f}" for m in means))


if __name__ == "__main__":
    main()
