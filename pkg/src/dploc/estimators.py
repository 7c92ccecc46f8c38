"""Analytics a consumer can run on a reconstructed release."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .hilbert import HilbertConfig, Rect, index_to_xy, xy_to_index
from .isotonic import reconstruct
from .mechanism import Release

__all__ = [
    "DensityEstimate",
    "density_from_values",
    "density_grid",
    "range_count",
    "median_from_release",
    "diffuse_for_viz",
]


@dataclass(frozen=True)
class DensityEstimate:
    """Piecewise-constant density on [0, 1]."""

    breakpoints: np.ndarray  # strictly increasing, from 0 to 1
    densities: np.ndarray  # one per interval
    cell_masses: Optional[np.ndarray] = None  # exact masses, kept when widths are tiny

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def masses(self) -> np.ndarray:
        if self.cell_masses is not None:
            return self.cell_masses
        return self.densities * self.widths

    def cdf(self, x) -> np.ndarray:
        """Cumulative mass; exactly 0 at 0 and exactly 1 at 1."""
        cum = np.concatenate([[0.0], np.cumsum(self.masses)])
        cum[-1] = 1.0
        return np.interp(x, self.breakpoints, cum)

    def mass_between(self, lo, hi) -> np.ndarray:
        return self.cdf(hi) - self.cdf(lo)


def density_from_values(values) -> DensityEstimate:
    """Histogram whose bins are the 1D Voronoi cells of the distinct values.

    A distinct value with multiplicity ``c`` spreads mass ``c / n`` evenly
    over its cell, which runs halfway to each neighbouring distinct value
    (and to 0 or 1 at the ends).
    """
    vals = np.asarray(values, dtype=float).ravel()
    if vals.size == 0:
        raise ValueError("density estimate needs at least one value")
    if vals.min() < 0.0 or vals.max() > 1.0:
        raise ValueError("values must lie in [0, 1]")
    distinct, counts = np.unique(vals, return_counts=True)
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    # adjacent floats can share a midpoint; their cells then merge
    bps = np.unique(np.concatenate([[0.0], mids, [1.0]]))
    cell = np.clip(np.searchsorted(bps, distinct, side="right") - 1, 0, bps.size - 2)
    mass = np.bincount(cell, weights=counts, minlength=bps.size - 1) / vals.size
    with np.errstate(over="ignore"):
        dens = mass / np.diff(bps)  # may overflow for subnormal gaps
    return DensityEstimate(bps, dens, mass)


def density_grid(density: DensityEstimate, order: int) -> np.ndarray:
    """Average density over every cell of the ``2**order`` grid, indexed ``[iy, ix]``.

    A cell's share of the curve has length ``4**-order``, the same as its
    area in the unit square, so this is also a 2D density on the square.
    """
    ncells = 1 << (2 * order)
    side = 1 << order
    edges = density.cdf(np.arange(ncells + 1) / ncells)
    per_index = np.diff(edges) * ncells
    ix, iy = index_to_xy(np.arange(ncells), order)
    grid = np.empty((side, side))
    grid[iy, ix] = per_index
    return grid


def _query_unit(query: Rect, cfg: HilbertConfig):
    d = cfg.domain
    x0 = (max(query.xmin, d.xmin) - d.xmin) / d.width
    x1 = (min(query.xmax, d.xmax) - d.xmin) / d.width
    y0 = (max(query.ymin, d.ymin) - d.ymin) / d.height
    y1 = (min(query.ymax, d.ymax) - d.ymin) / d.height
    return x0, y0, x1, y1


def _axis_overlap(lo: float, hi: float, side: int):
    first = int(math.floor(lo * side))
    last = min(int(math.ceil(hi * side)) - 1, side - 1)
    cells = np.arange(first, last + 1)
    frac = (np.minimum(hi, (cells + 1) / side) - np.maximum(lo, cells / side)) * side
    keep = frac > 0
    return cells[keep], np.clip(frac[keep], 0.0, 1.0)


def range_count(
    values, query: Rect, cfg: HilbertConfig, n: Optional[int] = None, *, density: Optional[DensityEstimate] = None
) -> float:
    """Estimated number of points inside ``query`` (raw-domain coordinates).

    The Voronoi density of the 1D values is integrated over the curve
    interval of every grid cell the query touches; partly covered cells
    contribute in proportion to their covered area. Fully covered cells
    are merged into runs of consecutive curve indices before integrating,
    so the whole domain integrates to exactly 1. Pass ``density`` to reuse
    an estimate across a batch of queries.
    """
    vals = np.asarray(values, dtype=float)
    n = vals.size if n is None else int(n)
    x0, y0, x1, y1 = _query_unit(query, cfg)
    if not (x1 > x0 and y1 > y0):
        return 0.0
    side, ncells = cfg.side, cfg.ncells
    xs, fx = _axis_overlap(x0, x1, side)
    ys, fy = _axis_overlap(y0, y1, side)
    if xs.size == 0 or ys.size == 0:
        return 0.0
    if density is None:
        density = density_from_values(vals)

    gx, gy = np.meshgrid(xs, ys)
    frac = np.outer(fy, fx).ravel()
    idx = xy_to_index(gx.ravel(), gy.ravel(), cfg.order)
    full = frac >= 1.0

    full_idx = np.sort(idx[full])
    parts = []
    if full_idx.size:
        breaks = np.flatnonzero(np.diff(full_idx) != 1) + 1
        starts = full_idx[np.concatenate([[0], breaks])]
        ends = full_idx[np.concatenate([breaks - 1, [full_idx.size - 1]])] + 1
        parts.extend(density.mass_between(starts / ncells, ends / ncells).tolist())
    if np.any(~full):
        order = np.argsort(idx[~full], kind="stable")
        pidx = idx[~full][order]
        pfrac = frac[~full][order]
        parts.extend((pfrac * density.mass_between(pidx / ncells, (pidx + 1) / ncells)).tolist())
    return n * math.fsum(parts)


def median_from_release(release: Release, *, clamp: bool = True):
    """Lower-middle element of the reconstruction, as a curve value and a point."""
    rec = reconstruct(release, clamp=clamp)
    i = (release.n + 1) // 2 - 1
    value = float(rec.values[i])
    point = None if rec.points is None else rec.points[i].copy()
    return value, point


def diffuse_for_viz(points, rng, max_radius: float) -> np.ndarray:
    """Spread each stack of coincident points uniformly over a small disc.

    The disc radius is half the distance to the nearest other distinct
    location, capped at ``max_radius`` (typically one grid cell). For
    plotting only; the output carries no statistical meaning.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    out = pts.copy()
    if len(pts) == 0:
        return out
    uniq, inverse, counts = np.unique(pts, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    if len(uniq) > 1:
        dist, _ = cKDTree(uniq).query(uniq, k=2)
        radius = np.minimum(dist[:, 1] / 2.0, max_radius)
    else:
        radius = np.array([max_radius])
    for g in np.flatnonzero(counts > 1):
        members = np.flatnonzero(inverse == g)
        r = radius[g] * np.sqrt(rng.random(members.size))
        theta = 2.0 * np.pi * rng.random(members.size)
        out[members, 0] = uniq[g, 0] + r * np.cos(theta)
        out[members, 1] = uniq[g, 1] + r * np.sin(theta)
    return out
