import json

import numpy as np
import pytest

from codisp import io
from codisp.cli import main
from codisp.experiments import synthetic_forest_plot, synthetic_texture
from codisp.grid import Grid


@pytest.fixture(scope="module")
def inputs(tmp_path_factory):
    d = tmp_path_factory.mktemp("inputs")
    tex = synthetic_texture(64, 64, seed=1)
    io.write_grid_csv(d / "tex.csv", tex)
    io.write_pgm_array(d / "tex.pgm", np.clip(np.round(128 + 40 * tex.values), 0, 255), 255)
    soil, trees = synthetic_forest_plot(0, n_trees=300)
    io.write_points_csv(d / "soil.csv", soil)
    io.write_points_csv(d / "trees.csv", trees)
    return d


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "manifest.json"}


def test_saltpepper_outputs_and_manifest(inputs, tmp_path):
    out = tmp_path / "sp"
    rc = main(["exp-saltpepper", "--input", str(inputs / "tex.pgm"), "--delta", "0.05", "0.25",
               "--tau2", "10", "--max-lag-x", "4", "--max-lag-y", "3", "--out", str(out)])
    assert rc == 0
    names = sorted(p.name for p in out.iterdir())
    assert "summary.csv" in names and "manifest.json" in names
    assert "map_delta0.05_tau210.csv" in names and "map_delta0.25_tau210.mask.pgm" in names
    man = json.loads((out / "manifest.json").read_text())
    assert man["experiment"] == "exp-saltpepper"
    assert man["parameters"]["max_lag_x"] == 4 and man["parameters"]["delta"] == [0.05, 0.25]
    assert man["inputs"][str(inputs / "tex.pgm")] == io.sha256_file(inputs / "tex.pgm")
    assert set(man["outputs"]) == set(names)
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[0].startswith("experiment,delta,tau2,mean_codisp")
    assert len(summary) == 3


def test_default_max_lag_is_recorded(inputs, tmp_path):
    out = tmp_path / "m"
    assert main(["exp-missing", "--input", str(inputs / "tex.csv"), "--block-size", "4",
                 "--proportion", "0.01", "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["parameters"]["max_lag_x"] == 16 == man["parameters"]["max_lag_y"]


@pytest.mark.parametrize(
    "argv",
    [
        ["exp-gap", "--gap-size", "6", "10"],
        ["exp-grf", "--rows", "24", "--cols", "24", "--delta", "0.1", "0.2"],
        ["exp-saltpepper", "--mode", "classic", "--delta", "0.1", "--reps", "2"],
    ],
)
def test_rerun_is_byte_identical(inputs, tmp_path, argv):
    args = list(argv)
    if argv[0] != "exp-grf":
        args += ["--input", str(inputs / "tex.csv")]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--max-lag-x", "5", "--max-lag-y", "5", "--out", str(a), "--workers", "1"]) == 0
    assert main(["rerun", str(a / "manifest.json"), "--out", str(b), "--workers", "3"]) == 0
    assert _files(a) == _files(b)
    pa = json.loads((a / "manifest.json").read_text())["parameters"]
    pb = json.loads((b / "manifest.json").read_text())["parameters"]
    for k in ("out", "workers", "argv"):
        pa.pop(k), pb.pop(k)
    assert pa == pb


def test_thinning_cli(inputs, tmp_path):
    out = tmp_path / "t"
    rc = main(["exp-thinning", "--soil", str(inputs / "soil.csv"), "--trees", str(inputs / "trees.csv"),
               "--elements", "Al", "P", "--keep", "1", "0.8", "--lag-spacing", "60",
               "--max-lag-x", "4", "--max-lag-y", "4", "--min-pairs", "10", "--out", str(out)])
    assert rc == 0
    rows = (out / "summary.csv").read_text().splitlines()
    assert len(rows) == 5 and "family" in rows[0]


def test_exit_codes(inputs, tmp_path):
    assert main(["exp-gap", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "x")]) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3\n")
    assert main(["exp-gap", "--input", str(bad), "--out", str(tmp_path / "x")]) == 3
    # gap too large for the imputation neighbourhood
    assert main(["exp-gap", "--input", str(inputs / "tex.csv"), "--gap-size", "40",
                 "--out", str(tmp_path / "x")]) == 2
    with pytest.raises(SystemExit) as e:
        main(["exp-gap", "--bogus"])
    assert e.value.code == 2


def test_numerical_failure_exit_code(tmp_path):
    # constant soil values give a flat variogram that cannot be fitted
    from codisp.grid import MarkedPointSet

    rng = np.random.default_rng(0)
    xy = rng.uniform(0, 100, (60, 2))
    io.write_points_csv(tmp_path / "soil.csv", MarkedPointSet(xy, {"Al": np.full(60, 5.0)}))
    io.write_points_csv(tmp_path / "trees.csv", MarkedPointSet(xy, {"dbh": rng.uniform(1, 2, 60)}))
    out = tmp_path / "o"
    rc = main(["exp-thinning", "--soil", str(tmp_path / "soil.csv"), "--trees", str(tmp_path / "trees.csv"),
               "--elements", "Al", "--detrend", "none", "--out", str(out)])
    assert rc == 4
    assert list(out.iterdir()) == []


def test_failure_removes_partial_outputs(inputs, tmp_path):
    out = tmp_path / "p"
    # the second gap size fails after the first one's files would be written
    rc = main(["exp-gap", "--input", str(inputs / "tex.csv"), "--gap-size", "6", "40", "--out", str(out)])
    assert rc == 2
    assert list(out.iterdir()) == []


def test_map_render_and_gray(inputs, tmp_path):
    rc = main(["map", str(inputs / "tex.csv"), str(inputs / "tex.pgm"), "--out-csv", str(tmp_path / "m.csv"),
               "--out-pgm", str(tmp_path / "m.pgm"), "--max-lag-x", "3", "--max-lag-y", "3"])
    assert rc == 0
    m = io.read_map_csv(tmp_path / "m.csv")
    assert m.mean() > 0.95  # 8-bit quantisation of the texture
    assert main(["render-map", str(tmp_path / "m.csv"), str(tmp_path / "r.pgm")]) == 0
    assert (tmp_path / "r.pgm").read_bytes() == (tmp_path / "m.pgm").read_bytes()
    rgb = np.zeros((3, 4, 3), dtype=np.uint8)
    rgb[..., 1] = 200
    (tmp_path / "c.ppm").write_bytes(b"P6\n4 3\n255\n" + rgb.tobytes())
    assert main(["gray", str(tmp_path / "c.ppm"), str(tmp_path / "g.pgm")]) == 0
    g = io.read_pgm(tmp_path / "g.pgm")
    assert g == Grid.from_array(np.full((3, 4), 143.0))
