"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 input-format error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import math
import sys
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from . import io
from .codispersion import CodispConfig, codisp_map
from .errors import CodispError, InputFormatError, NumericalError
from .experiments import (
    ElementSetup,
    run_gap,
    run_grf,
    run_missing,
    run_saltpepper,
    run_thinning,
)
from .grid import build_lag_window, default_max_lag
from .kriging import FAMILIES, TransformSpec, VariogramSpec
from .randomfield import MaternParams

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4



def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


class _Outputs:
    """Tracks files written in an output directory; removes them on failure."""

    def __init__(self, out: Path):
        self.out = out
        self.files: list[Path] = []

    def add(self, *paths):
        self.files.extend(Path(p) for p in paths)

    def path(self, name: str) -> Path:
        return self.out / name

    def cleanup(self):
        for p in self.files:
            p.unlink(missing_ok=True)


def _window_for(shape, args):
    default = default_max_lag(*shape)
    mx = args.max_lag_x if args.max_lag_x is not None else default
    my = args.max_lag_y if args.max_lag_y is not None else default
    args.max_lag_x, args.max_lag_y = mx, my
    return build_lag_window(mx, my)


def _config(args) -> CodispConfig:
    return CodispConfig(min_pairs=args.min_pairs, denom_epsilon=args.denom_epsilon)


def _digest_inputs(paths) -> dict:
    digests = {}
    for p in paths:
        if p is None:
            continue
        p = Path(p)
        digests[str(p)] = io.sha256_file(p)
        mp = io.mask_path(p)
        if p.suffix.lower() == ".pgm" and mp.exists():
            digests[str(mp)] = io.sha256_file(mp)
    return digests


def _fmt_cell(v):
    if isinstance(v, float):
        return "NA" if math.isnan(v) else repr(v)
    return str(v)


def _write_results(outs: _Outputs, experiment: str, results) -> None:
    rows = []
    for res in results:
        base = res.name
        p = outs.path(f"map_{base}.csv")
        io.write_map_csv(p, res.cmap)
        outs.add(p)
        outs.add(*io.write_map_pgm(outs.path(f"map_{base}.pgm"), res.cmap))
        for label, grid in res.grids.items():
            p = outs.path(f"{label}_{base}.csv")
            io.write_grid_csv(p, grid)
            outs.add(p)
        rows.append({"experiment": experiment, **res.summary(), **res.info})
    fields = []
    for r in rows:
        fields.extend(k for k in r if k not in fields)
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", restval="")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt_cell(v) for k, v in r.items()})
    p = outs.path("summary.csv")
    io._atomic_write(p, buf.getvalue().encode())
    outs.add(p)


def _manifest_params(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func",)}


# --- experiment commands -----------------------------------------------------


def cmd_saltpepper(args, outs):
    ref = io.read_grid(args.input)
    window = _window_for(ref.shape, args)
    results = run_saltpepper(
        ref, args.delta, args.tau2, window, _config(args), seed=args.seed, mode=args.mode,
        low=args.low, high=args.high, reps=args.reps, workers=args.workers,
    )
    _write_results(outs, "saltpepper", results)
    return [args.input]


def cmd_grf(args, outs):
    params = MaternParams(
        nu1=args.nu1, nu2=args.nu2, a1=args.a1, a2=args.a2, a12=args.a12,
        sigma1_sq=args.sigma1_sq, sigma2_sq=args.sigma2_sq, rho12=args.rho12, mu1=args.mu1, mu2=args.mu2,
    )
    window = _window_for((args.rows, args.cols), args)
    results = run_grf(
        args.rows, args.cols, params, args.delta, args.tau2, window, _config(args),
        seed=args.seed, method=args.method, workers=args.workers,
    )
    _write_results(outs, "grf", results)
    return []


def cmd_missing(args, outs):
    ref = io.read_grid(args.input)
    window = _window_for(ref.shape, args)
    results = run_missing(
        ref, args.block_size, args.proportion, window, _config(args), seed=args.seed, workers=args.workers
    )
    _write_results(outs, "missing", results)
    return [args.input]


def cmd_gap(args, outs):
    ref = io.read_grid(args.input)
    window = _window_for(ref.shape, args)
    results = run_gap(
        ref, args.gap_size, window, _config(args), seed=args.seed, anchor=args.anchor, K=args.block_k,
        workers=args.workers,
    )
    _write_results(outs, "gap", results)
    return [args.input]


def _per_element(values, n, name, cast):
    if values is None:
        return [None] * n
    if len(values) == 1:
        return [cast(values[0])] * n
    if len(values) != n:
        raise CodispError(f"--{name} needs 1 or {n} values, got {len(values)}")
    return [cast(v) for v in values]


def _nugget(v):
    return None if v in (None, "free") else float(v)


def cmd_thinning(args, outs):
    filters = dict(f.split("=", 1) for f in args.tree_filter or [])
    soil = io.read_points_csv(args.soil, args.elements)
    trees = io.read_points_csv(args.trees, [args.tree_mark], filters=filters)
    n = len(args.elements)
    lams = _per_element(args.boxcox_lambda or [1.0], n, "boxcox-lambda", float)
    fams = _per_element(args.family, n, "family", str)
    nugs = _per_element(args.nugget, n, "nugget", _nugget)
    elements = [
        ElementSetup(
            el, TransformSpec(lams[i], args.detrend),
            VariogramSpec(fams[i], nugs[i], args.bin_width, args.max_dist),
        )
        for i, el in enumerate(args.elements)
    ]
    if args.lag_spacing is None:
        x0, x1, y0, y1 = trees.extent
        args.lag_spacing = max(min(x1 - x0, y1 - y0) / 20.0, 1e-12)
    args.max_lag_x = args.max_lag_x or 8
    args.max_lag_y = args.max_lag_y or 8
    window = build_lag_window(args.max_lag_x, args.max_lag_y)
    results = run_thinning(
        soil, trees, elements, args.keep, window, _config(args), args.lag_spacing,
        tree_mark=args.tree_mark, seed=args.seed, workers=args.workers,
    )
    _write_results(outs, "thinning", results)
    return [args.soil, args.trees]


def _run_experiment(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outs = _Outputs(out)
    t0 = time.perf_counter()
    try:
        inputs = args.func(args, outs)
        manifest = {
            "command": sys.argv if args.argv is None else args.argv,
            "experiment": args.command,
            "seeds": [args.seed],
            "parameters": _manifest_params(args),
            "inputs": _digest_inputs(inputs),
            "outputs": sorted(p.name for p in outs.files) + ["manifest.json"],
            "wall_clock_seconds": time.perf_counter() - t0,
            "version": _version(),
        }
        io.write_json(outs.path("manifest.json"), manifest)
    except BaseException:
        outs.cleanup()
        raise
    return 0


# --- utility commands --------------------------------------------------------


def cmd_map(args) -> int:
    X = io.read_grid(args.x)
    Y = io.read_grid(args.y)
    window = _window_for(X.shape, args)
    cmap = codisp_map(X, Y, window, _config(args), workers=args.workers)
    io.write_map_csv(args.out_csv, cmap)
    if args.out_pgm:
        io.write_map_pgm(args.out_pgm, cmap)
    print(f"mean={cmap.mean():.6f} min={cmap.min():.6f} max={cmap.max():.6f} defined={cmap.defined_fraction:.4f}")
    return 0


def cmd_render(args) -> int:
    io.write_map_pgm(args.out, io.read_map_csv(args.map_csv))
    return 0


def cmd_gray(args) -> int:
    rgb = io.read_color_image(args.input)
    gray = io.luminance(rgb)
    maxval = 255 if gray.max(initial=0) <= 255 else 65535
    io.write_pgm_array(args.output, gray, maxval)
    return 0


def cmd_rerun(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    params = dict(manifest["parameters"])
    params["out"] = args.out
    if args.workers is not None:
        params["workers"] = args.workers
    params["argv"] = ["rerun", str(args.manifest), "--out", str(args.out)]
    parser = build_parser()
    ns = parser.parse_args([params["command"], "--out", str(args.out)] + _required_stub(params))
    for k, v in params.items():
        setattr(ns, k, v)
    return _run_experiment(ns)


def _required_stub(params) -> list[str]:
    """Minimal argv satisfying required flags; real values are set afterwards."""
    stub = []
    for flag in ("input", "soil", "trees"):
        if params.get(flag) is not None:
            stub += [f"--{flag}", str(params[flag])]
    if params.get("elements"):
        stub += ["--elements", *params["elements"]]
    return stub


# --- parser ------------------------------------------------------------------


def _common(p, grid=True):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1, help="parallel parameter combinations")
    p.add_argument("--max-lag-x", type=int, default=None, help="default: min(rows, cols) // 4" if grid else "default: 8")
    p.add_argument("--max-lag-y", type=int, default=None)
    p.add_argument("--min-pairs", type=int, default=30)
    p.add_argument("--denom-epsilon", type=float, default=1e-12)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="codisp", description="Codispersion maps under contamination.")
    parser.add_argument("--version", action="version", version=_version())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exp-saltpepper", help="reference image vs salt-and-pepper versions")
    p.add_argument("--input", required=True, help="PGM or CSV grid")
    p.add_argument("--delta", type=float, nargs="+", default=[0.05, 0.10, 0.25])
    p.add_argument("--tau2", type=float, nargs="+", default=[1.0, 5.0, 10.0])
    p.add_argument("--mode", choices=["mixture", "classic"], default="mixture")
    p.add_argument("--low", type=float, default=0.0)
    p.add_argument("--high", type=float, default=255.0)
    p.add_argument("--reps", type=int, default=1)
    _common(p)
    p.set_defaults(func=cmd_saltpepper)

    p = sub.add_parser("exp-grf", help="bivariate Matérn pair, contaminated second field")
    p.add_argument("--rows", type=int, default=64)
    p.add_argument("--cols", type=int, default=64)
    p.add_argument("--nu1", type=float, default=0.5)
    p.add_argument("--nu2", type=float, default=0.5)
    p.add_argument("--a1", type=float, default=0.1)
    p.add_argument("--a2", type=float, default=0.1)
    p.add_argument("--a12", type=float, default=None)
    p.add_argument("--sigma1-sq", type=float, default=1.0)
    p.add_argument("--sigma2-sq", type=float, default=1.0)
    p.add_argument("--rho12", type=float, default=0.8)
    p.add_argument("--mu1", type=float, default=0.5)
    p.add_argument("--mu2", type=float, default=0.5)
    p.add_argument("--method", choices=["mixing", "cholesky"], default="mixing")
    p.add_argument("--delta", type=float, nargs="+", default=[0.05, 0.15, 0.25])
    p.add_argument("--tau2", type=float, nargs="+", default=[10.0])
    _common(p)
    p.set_defaults(func=cmd_grf)

    p = sub.add_parser("exp-missing", help="reference image vs randomly placed missing blocks")
    p.add_argument("--input", required=True)
    p.add_argument("--block-size", type=int, nargs="+", default=[15, 30, 60])
    p.add_argument("--proportion", type=float, nargs="+", default=[2e-6, 4e-6, 8e-6])
    _common(p)
    p.set_defaults(func=cmd_missing)

    p = sub.add_parser("exp-gap", help="cut one gap, impute it, map reference vs imputed")
    p.add_argument("--input", required=True)
    p.add_argument("--gap-size", type=int, nargs="+", default=[50, 100, 200])
    p.add_argument("--anchor", choices=["center", "random"], default="center")
    p.add_argument("--block-k", type=int, default=None, help="border block size K (default: gap + 1)")
    _common(p)
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("exp-thinning", help="tree marks vs kriged soil from full or thinned samples")
    p.add_argument("--soil", required=True, help="CSV with x,y and element columns")
    p.add_argument("--trees", required=True, help="CSV with x,y and the tree mark column")
    p.add_argument("--elements", nargs="+", required=True)
    p.add_argument("--keep", type=float, nargs="+", default=[1.0, 0.9, 0.8])
    p.add_argument("--boxcox-lambda", nargs="+", default=None, help="one value or one per element")
    p.add_argument("--family", nargs="+", choices=FAMILIES, default=["exponential"])
    p.add_argument("--nugget", nargs="+", default=None, help="'free' or a fixed value, per element")
    p.add_argument("--detrend", choices=["none", "poly2"], default="poly2")
    p.add_argument("--bin-width", type=float, default=None)
    p.add_argument("--max-dist", type=float, default=None)
    p.add_argument("--tree-mark", default="dbh")
    p.add_argument("--tree-filter", nargs="+", default=None, metavar="COL=VALUE")
    p.add_argument("--lag-spacing", type=float, default=None)
    _common(p, grid=False)
    p.set_defaults(func=cmd_thinning)

    p = sub.add_parser("map", help="codispersion map between two grids")
    p.add_argument("x")
    p.add_argument("y")
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-pgm", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--max-lag-x", type=int, default=None)
    p.add_argument("--max-lag-y", type=int, default=None)
    p.add_argument("--min-pairs", type=int, default=30)
    p.add_argument("--denom-epsilon", type=float, default=1e-12)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("render-map", help="render a map CSV as a 16-bit PGM")
    p.add_argument("map_csv")
    p.add_argument("out")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("gray", help="convert a color image (PPM, or any Pillow format) to PGM")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_gray)

    p = sub.add_parser("rerun", help="repeat an experiment from its manifest.json")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_rerun)
    return parser


EXPERIMENTS = {"exp-saltpepper", "exp-grf", "exp-missing", "exp-gap", "exp-thinning"}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = None if argv is None else ["codisp", *argv]
    try:
        if args.command in EXPERIMENTS:
            return _run_experiment(args)
        return args.func(args)
    except (InputFormatError, FileNotFoundError, IsADirectoryError) as err:
        print(f"codisp: input error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as err:
        print(f"codisp: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CodispError, ValueError) as err:
        print(f"codisp: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
