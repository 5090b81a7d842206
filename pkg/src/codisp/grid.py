"""Lattice, point-set and lag-window containers.

All containers are immutable: arrays are copied on construction and
flagged read-only, so they can be shared between worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import AllMissing, InvalidWindow, UnknownMark


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """A rows x cols lattice of reals with an observation mask.

    ``mask`` is True where a cell is observed. Missing cells are stored
    as 0 and are never read by any statistic.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"grid values must be a non-empty 2D array, got shape {values.shape}")
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != values.shape:
            raise ValueError(f"mask shape {mask.shape} != values shape {values.shape}")
        if not np.all(np.isfinite(values[mask])):
            raise ValueError("observed cells must be finite")
        values = np.where(mask, values, 0.0)
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))

    @classmethod
    def from_array(cls, values, mask=None) -> "Grid":
        """Build a grid; non-finite entries are treated as missing."""
        values = np.asarray(values, dtype=np.float64)
        finite = np.isfinite(values)
        if mask is None:
            mask = finite
        else:
            mask = np.asarray(mask, dtype=bool) & finite
        return cls(np.where(finite, values, 0.0), mask)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_observed(self) -> int:
        return int(self.mask.sum())

    @property
    def fully_observed(self) -> bool:
        return bool(self.mask.all())

    def to_nan_array(self) -> np.ndarray:
        """Values as a float array with NaN at missing cells."""
        return np.where(self.mask, self.values, np.nan)

    def with_values(self, values) -> "Grid":
        return Grid(values, self.mask)

    def with_mask(self, mask) -> "Grid":
        return Grid(self.values, mask)

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def masked_mean(g: Grid) -> float:
    """Arithmetic mean over observed cells."""
    if g.n_observed == 0:
        raise AllMissing("grid has no observed cells")
    return float(g.values[g.mask].mean())


@dataclass(frozen=True, eq=False)
class MarkedPointSet:
    """Planar points carrying one or more named real-valued marks.

    Parameters
    ----------
    xy : (n, 2) array
        Point coordinates.
    marks : mapping of name -> (n,) array
    extent : (xmin, xmax, ymin, ymax), optional
        Declared bounding rectangle; defaults to the bounding box of `xy`.
    """

    xy: np.ndarray
    marks: Mapping[str, np.ndarray]
    extent: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        xy = np.asarray(self.xy, dtype=np.float64).reshape(-1, 2)
        if not np.all(np.isfinite(xy)):
            raise ValueError("point coordinates must be finite")
        marks = {}
        for name, col in self.marks.items():
            col = np.asarray(col, dtype=np.float64).reshape(-1)
            if col.shape[0] != xy.shape[0]:
                raise ValueError(f"mark {name!r} has {col.shape[0]} values for {xy.shape[0]} points")
            if not np.all(np.isfinite(col)):
                raise ValueError(f"mark {name!r} has missing or non-finite values")
            marks[name] = _frozen(col)
        extent = self.extent
        if extent is None:
            if len(xy):
                extent = (xy[:, 0].min(), xy[:, 0].max(), xy[:, 1].min(), xy[:, 1].max())
            else:
                extent = (0.0, 0.0, 0.0, 0.0)
        extent = tuple(float(e) for e in extent)
        if len(xy):
            inside = (
                (xy[:, 0] >= extent[0]) & (xy[:, 0] <= extent[1])
                & (xy[:, 1] >= extent[2]) & (xy[:, 1] <= extent[3])
            )
            if not inside.all():
                raise ValueError("points fall outside the declared extent")
        object.__setattr__(self, "xy", _frozen(xy))
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "extent", extent)

    def __len__(self):
        return self.xy.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.xy[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.xy[:, 1]

    def mark(self, name: str) -> np.ndarray:
        try:
            return self.marks[name]
        except KeyError:
            raise UnknownMark(f"no mark named {name!r}; have {sorted(self.marks)}") from None

    def subset(self, index) -> "MarkedPointSet":
        index = np.asarray(index)
        return MarkedPointSet(
            self.xy[index], {k: v[index] for k, v in self.marks.items()}, self.extent
        )

    def with_marks(self, **marks) -> "MarkedPointSet":
        merged = dict(self.marks)
        merged.update(marks)
        return MarkedPointSet(self.xy, merged, self.extent)


@dataclass(frozen=True)
class LagWindow:
    """Half-plane window of integer lags ``(h1, h2)``.

    ``h1`` is the column (x) offset and ``h2`` the row (y) offset. Only
    ``h2 >= 0`` is kept, and on the ``h2 == 0`` row only ``h1 > 0``, since
    the increment estimator is symmetric under ``h -> -h``.
    """

    max_lag_x: int
    max_lag_y: int
    lags: np.ndarray = field(repr=False, compare=False)

    def __len__(self):
        return self.lags.shape[0]

    def __iter__(self):
        return (tuple(int(v) for v in h) for h in self.lags)

    @property
    def image_shape(self) -> tuple[int, int]:
        """Shape of the raster used to render a map over this window."""
        return (self.max_lag_y + 1, 2 * self.max_lag_x + 1)


def build_lag_window(max_lag_x: int, max_lag_y: int) -> LagWindow:
    if int(max_lag_x) != max_lag_x or int(max_lag_y) != max_lag_y:
        raise InvalidWindow("lag bounds must be integers")
    max_lag_x, max_lag_y = int(max_lag_x), int(max_lag_y)
    if max_lag_x < 1 or max_lag_y < 1:
        raise InvalidWindow(f"lag bounds must be >= 1, got ({max_lag_x}, {max_lag_y})")
    lags = [(h1, 0) for h1 in range(1, max_lag_x + 1)]
    for h2 in range(1, max_lag_y + 1):
        lags.extend((h1, h2) for h1 in range(-max_lag_x, max_lag_x + 1))
    return LagWindow(max_lag_x, max_lag_y, _frozen(np.array(lags, dtype=np.int64)))


def default_max_lag(rows: int, cols: int) -> int:
    return max(1, min(rows, cols) // 4)


@dataclass(frozen=True, eq=False)
class CodispMap:
    """Codispersion value and pair count at every lag of a window.

    Undefined lags hold NaN in `values`.
    """

    window: LagWindow
    values: np.ndarray
    pair_counts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(np.asarray(self.values, dtype=np.float64)))
        object.__setattr__(self, "pair_counts", _frozen(np.asarray(self.pair_counts, dtype=np.int64)))
        n = len(self.window)
        if self.values.shape != (n,) or self.pair_counts.shape != (n,):
            raise ValueError("map arrays must have one entry per lag")

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def defined_fraction(self) -> float:
        return float(self.defined.mean()) if len(self.values) else 0.0

    def mean(self) -> float:
        d = self.values[self.defined]
        return float(d.mean()) if d.size else float("nan")

    def min(self) -> float:
        d = self.values[self.defined]
        return float(d.min()) if d.size else float("nan")

    def max(self) -> float:
        d = self.values[self.defined]
        return float(d.max()) if d.size else float("nan")

    def value_at(self, h1: int, h2: int) -> float:
        hit = np.flatnonzero((self.window.lags[:, 0] == h1) & (self.window.lags[:, 1] == h2))
        if hit.size == 0:
            raise KeyError((h1, h2))
        return float(self.values[hit[0]])

    def to_image(self) -> tuple[np.ndarray, np.ndarray]:
        """Raster with h2 decreasing downwards and h1 increasing rightwards.

        Returns ``(values, defined_mask)``; cells outside the window or
        undefined are NaN / False.
        """
        ny, nx = self.window.image_shape
        img = np.full((ny, nx), np.nan)
        lags = self.window.lags
        img[self.window.max_lag_y - lags[:, 1], lags[:, 0] + self.window.max_lag_x] = self.values
        return img, np.isfinite(img)
