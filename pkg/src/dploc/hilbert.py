"""Hilbert-curve map between a quantized rectangle and the unit interval.

The curve orientation is fixed: at order 1 the cells (0,0), (0,1), (1,1),
(1,0) are visited in index order 0..3, and higher orders follow the usual
rotate/reflect recursion. Both directions snap to cell centers, so a
round trip through ``hilbert_inverse(hilbert_forward(pt))`` is exact on
cell centers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DomainError",
    "Rect",
    "HilbertConfig",
    "UNIT_SQUARE",
    "xy_to_index",
    "index_to_xy",
    "hilbert_forward",
    "hilbert_inverse",
    "inverse_unit",
    "map_dataset",
    "inverse_map",
]

DEFAULT_ORDER = 10
_RESCALE_TOL = 1e-12


class DomainError(ValueError):
    """A point or value lies outside the domain it must live in."""


@dataclass(frozen=True)
class Rect:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        vals = (self.xmin, self.ymin, self.xmax, self.ymax)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite rectangle bounds {vals}")
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError(f"rectangle must have positive width and height, got {vals}")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_list(self) -> list[float]:
        return [self.xmin, self.ymin, self.xmax, self.ymax]

    @classmethod
    def from_list(cls, vals) -> "Rect":
        xmin, ymin, xmax, ymax = (float(v) for v in vals)
        return cls(xmin, ymin, xmax, ymax)

    def contains(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (x >= self.xmin) & (x <= self.xmax) & (y >= self.ymin) & (y <= self.ymax)

    def to_unit(self, points) -> np.ndarray:
        """Affinely rescale raw ``(n, 2)`` coordinates into the unit square."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        out = np.empty_like(pts)
        out[:, 0] = (pts[:, 0] - self.xmin) / self.width
        out[:, 1] = (pts[:, 1] - self.ymin) / self.height
        return out

    def from_unit(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        out = np.empty_like(pts)
        out[:, 0] = self.xmin + pts[:, 0] * self.width
        out[:, 1] = self.ymin + pts[:, 1] * self.height
        return out


UNIT_SQUARE = Rect(0.0, 0.0, 1.0, 1.0)


@dataclass(frozen=True)
class HilbertConfig:
    """Curve order ``p`` (a ``2**p x 2**p`` grid) and the raw-coordinate domain.

    Cell-center values ``(h + 0.5) / 4**p`` are distinct floats only for
    ``p <= 26``; larger orders are accepted but collapse neighbouring cells.
    """

    order: int = DEFAULT_ORDER
    domain: Rect = field(default=UNIT_SQUARE)

    def __post_init__(self):
        if not isinstance(self.order, (int, np.integer)) or not 1 <= self.order <= 31:
            raise ValueError(f"Hilbert order must be an integer in [1, 31], got {self.order!r}")

    @property
    def side(self) -> int:
        return 1 << self.order

    @property
    def ncells(self) -> int:
        return 1 << (2 * self.order)


def xy_to_index(ix, iy, order: int) -> np.ndarray:
    """Hilbert index of integer grid cells (vectorized)."""
    x = np.array(ix, dtype=np.int64, copy=True)
    y = np.array(iy, dtype=np.int64, copy=True)
    n = np.int64(1) << order
    d = np.zeros(np.broadcast(x, y).shape, dtype=np.int64)
    s = n >> 1
    while s > 0:
        rx = ((x & s) > 0).astype(np.int64)
        ry = ((y & s) > 0).astype(np.int64)
        d += s * s * ((3 * rx) ^ ry)
        # rotate the quadrant so the sub-curve has the canonical orientation
        flip = (ry == 0) & (rx == 1)
        x = np.where(flip, n - 1 - x, x)
        y = np.where(flip, n - 1 - y, y)
        swap = ry == 0
        x, y = np.where(swap, y, x), np.where(swap, x, y)
        s >>= 1
    return d


def index_to_xy(index, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer grid cell of Hilbert indices (vectorized inverse of ``xy_to_index``)."""
    t = np.array(index, dtype=np.int64, copy=True)
    x = np.zeros_like(t)
    y = np.zeros_like(t)
    n = np.int64(1) << order
    s = np.int64(1)
    while s < n:
        rx = 1 & (t // 2)
        ry = 1 & (t ^ rx)
        swap = ry == 0
        flip = swap & (rx == 1)
        x = np.where(flip, s - 1 - x, x)
        y = np.where(flip, s - 1 - y, y)
        x, y = np.where(swap, y, x), np.where(swap, x, y)
        x = x + s * rx
        y = y + s * ry
        t = t // 4
        s <<= 1
    return x, y


def _unit_to_cells(unit_pts: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    side = 1 << order
    cells = np.floor(unit_pts * side).astype(np.int64)
    # the closed upper edge belongs to the last cell
    np.clip(cells, 0, side - 1, out=cells)
    return cells[:, 0], cells[:, 1]


def _check_unit(unit_pts: np.ndarray, tol: float = 0.0) -> None:
    if not np.all(np.isfinite(unit_pts)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(unit_pts), axis=1))[0])
        raise DomainError(f"non-finite coordinate at row {bad}: {unit_pts[bad].tolist()}")
    outside = np.any((unit_pts < -tol) | (unit_pts > 1.0 + tol), axis=1)
    if np.any(outside):
        bad = int(np.flatnonzero(outside)[0])
        raise DomainError(f"point {bad} at {unit_pts[bad].tolist()} (unit coords) lies outside the domain")


def hilbert_forward(pt, cfg: HilbertConfig) -> float:
    """Curve value in [0, 1) of the cell center containing a unit-square point."""
    unit = np.asarray(pt, dtype=float).reshape(1, 2)
    _check_unit(unit)
    ix, iy = _unit_to_cells(unit, cfg.order)
    h = int(xy_to_index(ix, iy, cfg.order)[0])
    return (h + 0.5) / cfg.ncells


def hilbert_inverse(v: float, cfg: HilbertConfig) -> tuple[float, float]:
    """Unit-square center of the cell holding curve position ``v``."""
    v = float(v)
    if not (0.0 <= v < 1.0):
        raise DomainError(f"curve position must lie in [0, 1), got {v}")
    x, y = inverse_unit(np.array([v]), cfg.order)
    return float(x[0]), float(y[0])


def inverse_unit(values, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized inverse into unit-square cell centers. Values equal to 1 map to the last cell."""
    vals = np.asarray(values, dtype=float)
    ncells = 1 << (2 * order)
    idx = np.floor(vals * ncells).astype(np.int64)
    np.clip(idx, 0, ncells - 1, out=idx)
    ix, iy = index_to_xy(idx, order)
    side = float(1 << order)
    return (ix + 0.5) / side, (iy + 0.5) / side


def map_dataset(points, cfg: HilbertConfig) -> np.ndarray:
    """Map raw points (rows of x, y in ``cfg.domain``) to curve values.

    Output order follows input order; duplicates stay duplicates.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return np.empty(0)
    pts = pts.reshape(-1, 2)
    unit = cfg.domain.to_unit(pts)
    try:
        # rescaling may push points on the domain edge a few ulps outside
        _check_unit(unit, tol=_RESCALE_TOL)
    except DomainError as exc:
        raise DomainError(f"{exc}; raw point {pts[_first_bad(unit)].tolist()} not in {cfg.domain.as_list()}") from None
    ix, iy = _unit_to_cells(unit, cfg.order)
    return (xy_to_index(ix, iy, cfg.order) + 0.5) / cfg.ncells


def _first_bad(unit: np.ndarray) -> int:
    bad = ~np.all(np.isfinite(unit) & (unit >= -_RESCALE_TOL) & (unit <= 1.0 + _RESCALE_TOL), axis=1)
    return int(np.flatnonzero(bad)[0])


def inverse_map(values, cfg: HilbertConfig) -> np.ndarray:
    """Curve values back to raw-domain cell centers, shape ``(n, 2)``."""
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        return np.empty((0, 2))
    x, y = inverse_unit(vals, cfg.order)
    return cfg.domain.from_unit(np.column_stack([x, y]))
