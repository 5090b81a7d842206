"""File formats: PGM images, CSV grids, point CSVs, map CSVs and manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import re
from pathlib import Path

import numpy as np

from .errors import (
    MalformedHeader,
    MissingColumn,
    NonNumeric,
    RaggedRows,
    UnparsableToken,
    ValueOutOfRange,
)
from .grid import CodispMap, Grid, LagWindow, MarkedPointSet, build_lag_window

NA = "NA"
MAP_GRAY_MAX = 65535
MAP_GRAY_UNDEFINED = 32768


# --- PGM ---------------------------------------------------------------------


def mask_path(path) -> Path:
    """Sidecar mask for ``name.pgm`` is ``name.mask.pgm``."""
    path = Path(path)
    return path.with_name(path.stem + ".mask" + path.suffix)


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _header(data: bytes):
    pos = 0
    tokens = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise MalformedHeader("PGM header is truncated")
        tokens.append(m.group(1))
        pos = m.end()
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise MalformedHeader(f"not a PGM file (magic {magic!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise MalformedHeader("non-integer PGM header field") from None
    if width < 1 or height < 1 or not 1 <= maxval <= 65535:
        raise MalformedHeader(f"bad PGM dimensions or maxval: {width}x{height}, {maxval}")
    return magic, width, height, maxval, pos


def read_pgm_array(path) -> tuple[np.ndarray, int]:
    """Raw integer pixels and maxval of a P2 or P5 file."""
    data = Path(path).read_bytes()
    magic, width, height, maxval, pos = _header(data)
    n = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates header and raster
        raster = data[pos + 1 :]
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        if len(raster) < n * dtype.itemsize:
            raise MalformedHeader("PGM raster is truncated")
        arr = np.frombuffer(raster, dtype=dtype, count=n).astype(np.int64)
    else:
        toks = data[pos:].split()
        if len(toks) < n:
            raise MalformedHeader("PGM raster is truncated")
        try:
            arr = np.array([int(t) for t in toks[:n]], dtype=np.int64)
        except ValueError:
            raise MalformedHeader("non-integer P2 pixel") from None
    if arr.max(initial=0) > maxval:
        raise ValueOutOfRange(f"pixel exceeds maxval {maxval}")
    return arr.reshape(height, width), maxval


def read_pgm(path, use_mask: bool = True) -> Grid:
    """Read a PGM as a Grid; a sibling ``.mask.pgm`` marks missing cells (0)."""
    arr, _ = read_pgm_array(path)
    mask = np.ones(arr.shape, dtype=bool)
    mp = mask_path(path)
    if use_mask and mp.exists():
        m, _ = read_pgm_array(mp)
        if m.shape != arr.shape:
            raise MalformedHeader("mask image shape does not match")
        mask = m > 0
    return Grid(arr.astype(np.float64), mask)


def _encode_pgm(arr: np.ndarray, maxval: int, binary: bool) -> bytes:
    h, w = arr.shape
    if binary:
        dtype = ">u2" if maxval > 255 else "u1"
        return b"P5\n%d %d\n%d\n" % (w, h, maxval) + arr.astype(dtype).tobytes()
    lines = [" ".join(str(int(v)) for v in row) for row in arr]
    return ("P2\n%d %d\n%d\n" % (w, h, maxval) + "\n".join(lines) + "\n").encode()


def write_pgm_array(path, arr, maxval: int | None = None, binary: bool = True) -> None:
    arr = np.asarray(arr)
    if maxval is None:
        maxval = 255 if arr.max(initial=0) <= 255 else 65535
    if not 1 <= maxval <= 65535:
        raise ValueOutOfRange("maxval must lie in [1, 65535]")
    if np.any(arr != np.round(arr)) or arr.min(initial=0) < 0 or arr.max(initial=0) > maxval:
        raise ValueOutOfRange(f"PGM pixels must be integers in [0, {maxval}]")
    _atomic_write(path, _encode_pgm(arr.astype(np.int64), maxval, binary))


def write_pgm(path, g: Grid, maxval: int | None = None, binary: bool = True) -> list[Path]:
    """Write `g`; masked grids also get a ``.mask.pgm`` sidecar.

    Returns the list of files written.
    """
    write_pgm_array(path, g.values, maxval, binary)
    written = [Path(path)]
    if not g.fully_observed:
        write_pgm_array(mask_path(path), g.mask.astype(np.int64) * 255, 255, binary)
        written.append(mask_path(path))
    return written


def luminance(rgb: np.ndarray) -> np.ndarray:
    """Gray levels ``0.2126 R + 0.7152 G + 0.0722 B`` rounded half up."""
    rgb = np.asarray(rgb, dtype=np.float64)
    y = 0.2126 * rgb[..., 0] + 0.7152 * rgb[..., 1] + 0.0722 * rgb[..., 2]
    return np.floor(y + 0.5).astype(np.int64)


def read_color_image(path) -> np.ndarray:
    """RGB array from a PPM (P3/P6) file, or any format Pillow can open."""
    data = Path(path).read_bytes()
    if data[:2] in (b"P3", b"P6"):
        pos = 0
        tokens = []
        for _ in range(4):
            m = _TOKEN.match(data, pos)
            if m is None:
                raise MalformedHeader("PPM header is truncated")
            tokens.append(m.group(1))
            pos = m.end()
        w, h, maxval = (int(t) for t in tokens[1:])
        n = w * h * 3
        if tokens[0] == b"P6":
            dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
            raw = data[pos + 1 :]
            if len(raw) < n * dtype.itemsize:
                raise MalformedHeader("PPM raster is truncated")
            arr = np.frombuffer(raw, dtype=dtype, count=n)
        else:
            toks = data[pos:].split()
            if len(toks) < n:
                raise MalformedHeader("PPM raster is truncated")
            arr = np.array([int(t) for t in toks[:n]])
        return arr.reshape(h, w, 3).astype(np.int64)
    try:
        from PIL import Image
    except ImportError:
        raise MalformedHeader("only PPM input is supported without Pillow installed") from None
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB")).astype(np.int64)


# --- CSV grids ---------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def write_grid_csv(path, g: Grid) -> None:
    lines = []
    for vals, obs in zip(g.values, g.mask):
        lines.append(",".join(_fmt(v) if o else NA for v, o in zip(vals, obs)))
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


def read_grid_csv(path) -> Grid:
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        rows.append((lineno, [t.strip() for t in line.split(",")]))
    if not rows:
        raise RaggedRows("empty grid file")
    width = len(rows[0][1])
    values = np.zeros((len(rows), width))
    mask = np.ones((len(rows), width), dtype=bool)
    for i, (lineno, toks) in enumerate(rows):
        if len(toks) != width:
            raise RaggedRows(f"line {lineno} has {len(toks)} fields, expected {width}")
        for j, t in enumerate(toks):
            if t == NA:
                mask[i, j] = False
                continue
            try:
                v = float(t)
            except ValueError:
                raise UnparsableToken(f"line {lineno}: cannot parse {t!r}") from None
            if not np.isfinite(v):
                raise UnparsableToken(f"line {lineno}: non-finite value {t!r}")
            values[i, j] = v
    return Grid(values, mask)


def read_grid(path) -> Grid:
    """Dispatch on extension: ``.pgm`` or CSV."""
    return read_pgm(path) if Path(path).suffix.lower() == ".pgm" else read_grid_csv(path)


# --- point CSVs --------------------------------------------------------------


def read_points_csv(path, marks=None, filters: dict | None = None, extent=None) -> MarkedPointSet:
    """Points from a headed CSV with ``x`` and ``y`` columns.

    Parameters
    ----------
    marks : list of str, optional
        Mark columns to load; defaults to every column besides x, y and the
        filter columns.
    filters : dict, optional
        ``{column: value}`` string-equality filters applied before parsing,
        e.g. ``{"sp": "Poulsenia armata"}``.
    """
    filters = filters or {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        reader.fieldnames = header
        needed = ["x", "y"] + list(marks or []) + list(filters)
        for col in needed:
            if col not in header:
                raise MissingColumn(f"column {col!r} not in {header}")
        if marks is None:
            marks = [h for h in header if h not in ("x", "y") and h not in filters]
        xs, ys, cols = [], [], {m: [] for m in marks}
        for lineno, row in enumerate(reader, 2):
            if any((row.get(k) or "").strip() != str(v) for k, v in filters.items()):
                continue
            try:
                xs.append(float(row["x"]))
                ys.append(float(row["y"]))
                for m in marks:
                    cols[m].append(float(row[m]))
            except (TypeError, ValueError):
                raise NonNumeric(f"line {lineno}: non-numeric coordinate or mark") from None
    return MarkedPointSet(np.column_stack([xs, ys]) if xs else np.zeros((0, 2)), cols, extent)


def write_points_csv(path, P: MarkedPointSet, marks=None) -> None:
    marks = list(P.marks) if marks is None else list(marks)
    lines = [",".join(["x", "y"] + marks)]
    for i in range(len(P)):
        lines.append(",".join(_fmt(v) for v in [P.x[i], P.y[i]] + [P.marks[m][i] for m in marks]))
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


# --- codispersion maps -------------------------------------------------------


def write_map_csv(path, cmap: CodispMap) -> None:
    """Long format: ``h1,h2,codispersion,pairs`` in window order."""
    lines = ["h1,h2,codispersion,pairs"]
    for (h1, h2), v, n in zip(cmap.window.lags, cmap.values, cmap.pair_counts):
        lines.append(f"{int(h1)},{int(h2)},{_fmt(v) if np.isfinite(v) else NA},{int(n)}")
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


def read_map_csv(path) -> CodispMap:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    lags = np.array([[int(r["h1"]), int(r["h2"])] for r in rows], dtype=np.int64)
    vals = np.array([np.nan if r["codispersion"] == NA else float(r["codispersion"]) for r in rows])
    pairs = np.array([int(r["pairs"]) for r in rows], dtype=np.int64)
    window = build_lag_window(int(np.abs(lags[:, 0]).max()), int(lags[:, 1].max()))
    if not np.array_equal(window.lags, lags):
        raise MalformedHeader("map CSV lags do not form a half-plane window")
    return CodispMap(window, vals, pairs)


def map_to_gray(cmap: CodispMap) -> tuple[np.ndarray, np.ndarray]:
    """16-bit rendering: [-1, 1] -> [0, 65535]; undefined cells -> 32768."""
    img, defined = cmap.to_image()
    gray = np.full(img.shape, MAP_GRAY_UNDEFINED, dtype=np.int64)
    gray[defined] = np.floor((img[defined] + 1.0) / 2.0 * MAP_GRAY_MAX + 0.5).astype(np.int64)
    return gray, defined


def write_map_pgm(path, cmap: CodispMap) -> list[Path]:
    gray, defined = map_to_gray(cmap)
    write_pgm_array(path, gray, MAP_GRAY_MAX)
    write_pgm_array(mask_path(path), defined.astype(np.int64) * 255, 255)
    return [Path(path), mask_path(path)]


# --- misc --------------------------------------------------------------------


def _atomic_write(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path, obj) -> None:
    _atomic_write(path, (json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n").encode("utf-8"))
