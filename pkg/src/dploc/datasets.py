"""CSV input/output and synthetic dataset generators.

Point files carry a header of ``x,y`` or ``lat,lon`` (either order, case
insensitive); one-dimensional files carry ``value``. Lines starting with
``#`` are provenance comments and are skipped on read.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .hilbert import UNIT_SQUARE, HilbertConfig, Rect

__all__ = [
    "Dataset",
    "WORLD",
    "read_dataset",
    "write_points",
    "write_values",
    "equally_spaced",
    "repeating_single_value",
    "clustered_2d",
    "uniform_2d",
    "median_dataset",
]

WORLD = Rect(-180.0, -90.0, 180.0, 90.0)

_LAT = ("lat", "latitude")
_LON = ("lon", "lng", "long", "longitude")


@dataclass
class Dataset:
    kind: str  # "xy", "latlon" or "value"
    points: Optional[np.ndarray] = None  # (n, 2) as (x, y); lat/lon stored as (lon, lat)
    values: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.points) if self.points is not None else len(self.values)

    def default_config(self, order: Optional[int] = None) -> HilbertConfig:
        domain = WORLD if self.kind == "latlon" else UNIT_SQUARE
        return HilbertConfig(order, domain) if order is not None else HilbertConfig(domain=domain)


def _data_lines(path):
    with open(path, newline="") as fh:
        for line in fh:
            if line.strip() and not line.lstrip().startswith("#"):
                yield line


def read_dataset(path) -> Dataset:
    """Read a point or value CSV, detecting the schema from its header."""
    reader = csv.reader(_data_lines(path))
    try:
        header = [h.strip().lower() for h in next(reader)]
    except StopIteration:
        raise ValueError(f"{path}: empty file") from None
    rows = [r for r in reader if r]

    def column(names):
        for i, h in enumerate(header):
            if h in names:
                return i
        return None

    def floats(idx):
        try:
            return np.array([float(r[idx]) for r in rows], dtype=float)
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path}: bad numeric field ({exc})") from None

    ix, iy = column(("x",)), column(("y",))
    if ix is not None and iy is not None:
        return Dataset("xy", points=np.column_stack([floats(ix), floats(iy)]).reshape(-1, 2))
    ilat, ilon = column(_LAT), column(_LON)
    if ilat is not None and ilon is not None:
        return Dataset("latlon", points=np.column_stack([floats(ilon), floats(ilat)]).reshape(-1, 2))
    iv = column(("value", "v"))
    if iv is not None:
        return Dataset("value", values=floats(iv))
    raise ValueError(f"{path}: header {header} has neither x,y nor lat,lon nor value columns")


def _provenance(meta: Optional[dict]) -> str:
    if not meta:
        return ""
    return "# " + " ".join(f"{k}={meta[k]}" for k in sorted(meta)) + "\n"


def write_points(path, points, meta: Optional[dict] = None, header=("x", "y")) -> None:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    buf = io.StringIO()
    buf.write(_provenance(meta))
    buf.write(",".join(header) + "\n")
    for x, y in pts.tolist():
        buf.write(f"{x!r},{y!r}\n")
    Path(path).write_text(buf.getvalue())


def write_values(path, values, meta: Optional[dict] = None) -> None:
    buf = io.StringIO()
    buf.write(_provenance(meta))
    buf.write("value\n")
    for v in np.asarray(values, dtype=float).ravel().tolist():
        buf.write(f"{v!r}\n")
    Path(path).write_text(buf.getvalue())


# ---------------------------------------------------------------------------
# generators


def equally_spaced(n: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, int(n)) if n > 1 else np.array([0.5])


def repeating_single_value(n: int, value: float = 0.5) -> np.ndarray:
    return np.full(int(n), float(value))


# (weight, center, std) of the blobs in clustered_2d
CLUSTERS = ((0.6, (0.30, 0.35), 0.05), (0.4, (0.70, 0.65), 0.08))


def clustered_2d(n: int, rng) -> np.ndarray:
    """Two isotropic Gaussian blobs in the unit square, see ``CLUSTERS``.

    Draws falling outside the square are redrawn, so every point is inside.
    """
    n = int(n)
    weights = np.array([c[0] for c in CLUSTERS])
    which = rng.choice(len(CLUSTERS), size=n, p=weights / weights.sum())
    out = np.empty((n, 2))
    for i, (_, center, std) in enumerate(CLUSTERS):
        idx = np.flatnonzero(which == i)
        pts = np.empty((0, 2))
        while len(pts) < idx.size:
            draw = rng.normal(center, std, size=(idx.size, 2))
            draw = draw[np.all((draw >= 0.0) & (draw <= 1.0), axis=1)]
            pts = np.vstack([pts, draw])
        out[idx] = pts[: idx.size]
    return out


def uniform_2d(n: int, rng) -> np.ndarray:
    return rng.random((int(n), 2))


def median_dataset(local_sensitivity: float, rng, n_exp: int = 66, n_ones: int = 63, max_tries: int = 10_000):
    """Sorted 1D dataset of exponential draws below a block of ones, with a prescribed
    local sensitivity of the median.

    The ``n_exp`` exponential draws are scaled so the largest sits at 1 and
    the one at the median rank sits at ``1 - local_sensitivity``; draws are
    repeated until the gap below the median is no larger than that, so the
    local sensitivity is exactly the requested value. Requires
    ``n_exp == n_ones + 3`` so the median falls on the second-largest draw.
    """
    ls = float(local_sensitivity)
    if not 0.0 < ls < 1.0:
        raise ValueError("local sensitivity must lie in (0, 1)")
    if n_exp != n_ones + 3:
        raise ValueError("median must fall on the second-largest exponential draw")
    for _ in range(max_tries):
        e = np.sort(rng.exponential(size=n_exp))
        low = e[:-1] * (1.0 - ls) / e[-2]
        if low[-1] - low[-2] <= ls:
            return np.concatenate([low, np.ones(n_ones + 1)])
    raise RuntimeError(f"could not construct a dataset with local sensitivity {ls}")
