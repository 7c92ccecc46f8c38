"""Comparison mechanisms: equi-width histogram, Haar-wavelet histogram, and
the smooth-sensitivity median."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._meta import run_metadata
from .hilbert import UNIT_SQUARE, DomainError, Rect
from .mechanism import as_generator, laplace_noise, laplace_sample

__all__ = [
    "NoisyHistogram2D",
    "NoisyWaveletTransform",
    "SmoothSensitivityResult",
    "histogram_counts",
    "equiwidth_publish",
    "equiwidth_range_count",
    "haar2d",
    "ihaar2d",
    "wavelet_publish",
    "wavelet_range_count",
    "local_sensitivity_median",
    "smooth_sensitivity",
    "smooth_sensitivity_median",
]


def histogram_counts(points, bins: int, domain: Rect = UNIT_SQUARE) -> np.ndarray:
    """Exact ``bins x bins`` counts indexed ``[iy, ix]``; the upper domain edges are closed."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    unit = domain.to_unit(pts)
    bad = ~np.all((unit >= -1e-12) & (unit <= 1.0 + 1e-12), axis=1)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise DomainError(f"point {i} at {pts[i].tolist()} lies outside {domain.as_list()}")
    cells = np.clip(np.floor(unit * bins).astype(np.int64), 0, bins - 1)
    counts = np.zeros((bins, bins))
    np.add.at(counts, (cells[:, 1], cells[:, 0]), 1.0)
    return counts


def _overlap_weights(query: Rect, domain: Rect, bins: int) -> np.ndarray:
    """Covered fraction of every bin, indexed ``[iy, ix]``."""
    edges = np.arange(bins + 1) / bins
    x0 = (max(query.xmin, domain.xmin) - domain.xmin) / domain.width
    x1 = (min(query.xmax, domain.xmax) - domain.xmin) / domain.width
    y0 = (max(query.ymin, domain.ymin) - domain.ymin) / domain.height
    y1 = (min(query.ymax, domain.ymax) - domain.ymin) / domain.height
    fx = np.clip((np.minimum(x1, edges[1:]) - np.maximum(x0, edges[:-1])) * bins, 0.0, 1.0)
    fy = np.clip((np.minimum(y1, edges[1:]) - np.maximum(y0, edges[:-1])) * bins, 0.0, 1.0)
    return np.outer(fy, fx)


def _covers(query: Rect, domain: Rect) -> bool:
    return (
        query.xmin <= domain.xmin and query.ymin <= domain.ymin
        and query.xmax >= domain.xmax and query.ymax >= domain.ymax
    )


def _to_doc(kind, obj, arrays: dict) -> str:
    doc = {"kind": kind, "epsilon": obj.epsilon, "n": obj.n, "domain_rect": obj.domain.as_list(), "meta": obj.meta}
    doc.update({k: np.asarray(v).tolist() for k, v in arrays.items()})
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# equi-width histogram


@dataclass
class NoisyHistogram2D:
    counts: np.ndarray  # (bins, bins), [iy, ix]
    epsilon: float
    n: int  # dataset size, public under the replacement neighbourhood
    domain: Rect = UNIT_SQUARE
    meta: dict = field(default_factory=dict)

    @property
    def bins(self) -> int:
        return self.counts.shape[0]

    def to_json(self) -> str:
        return _to_doc("equiwidth_histogram", self, {"counts": self.counts})

    @classmethod
    def from_json(cls, text: str) -> "NoisyHistogram2D":
        d = json.loads(text)
        return cls(np.asarray(d["counts"], dtype=float), d["epsilon"], d["n"], Rect.from_list(d["domain_rect"]), d.get("meta", {}))

    def save(self, path):
        Path(path).write_text(self.to_json())


def equiwidth_publish(points, bins: int, epsilon: float, rng=None, *, domain: Rect = UNIT_SQUARE, noise: bool = True):
    """Equi-width histogram with ``Lap(2/epsilon)`` on every count.

    Moving one point changes two counts by one each, hence scale 2/epsilon.
    """
    if bins < 1:
        raise ValueError("need at least one bin per axis")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    counts = histogram_counts(points, bins, domain)
    n = int(round(counts.sum()))
    if noise:
        counts = counts + laplace_noise(2.0 / epsilon, counts.shape, as_generator(rng))
    meta = run_metadata({"bins": bins, "epsilon": epsilon, "noise": noise}, rng if isinstance(rng, int) else None)
    return NoisyHistogram2D(counts, float(epsilon), n, domain, meta)


def equiwidth_range_count(hist: NoisyHistogram2D, query: Rect, *, known_n: bool = True) -> float:
    """Sum of bin counts weighted by the covered fraction of each bin.

    With ``known_n`` the counts are first shifted uniformly so they total
    the public size ``n``, and a query covering the domain returns ``n``.
    """
    counts = hist.counts
    if known_n:
        if _covers(query, hist.domain):
            return float(hist.n)
        counts = counts + (hist.n - counts.sum()) / counts.size
    w = _overlap_weights(query, hist.domain, hist.bins)
    return float(math.fsum((w * counts).ravel().tolist()))


# ---------------------------------------------------------------------------
# Haar wavelet


def haar2d(counts) -> np.ndarray:
    """Nonstandard 2D Haar decomposition of a ``2**q`` square count grid.

    Each 2x2 group of child totals ``a b / c d`` (rows are y) becomes its
    total and three details ``(a+b-c-d)/4``, ``(a-b+c-d)/4``,
    ``(a-b-c+d)/4``; totals recurse. Details of an ``s x s`` level sit in
    the three off-diagonal ``s/2`` blocks of the packed layout and the grand
    total in ``[0, 0]``. One unit of count moves at most three details per
    level, by 1/4 each.
    """
    a = np.asarray(counts, dtype=float)
    m = a.shape[0]
    if a.shape != (m, m) or m & (m - 1):
        raise ValueError("Haar transform needs a square grid with power-of-two side")
    out = np.zeros_like(a)
    s = m
    while s > 1:
        h = s // 2
        tl, tr, bl, br = a[0::2, 0::2], a[0::2, 1::2], a[1::2, 0::2], a[1::2, 1::2]
        out[h:s, 0:h] = (tl + tr - bl - br) / 4.0
        out[0:h, h:s] = (tl - tr + bl - br) / 4.0
        out[h:s, h:s] = (tl - tr - bl + br) / 4.0
        a = tl + tr + bl + br
        s = h
    out[0, 0] = a[0, 0]
    return out


def _haar_levels(coeffs) -> list[np.ndarray]:
    """Node totals at every level, coarsest (1x1) first."""
    c = np.asarray(coeffs, dtype=float)
    m = c.shape[0]
    levels = [c[0:1, 0:1].copy()]
    s = 1
    while s < m:
        t = levels[-1]
        hd = c[s:2 * s, 0:s]
        vd = c[0:s, s:2 * s]
        dd = c[s:2 * s, s:2 * s]
        nxt = np.empty((2 * s, 2 * s))
        q = t / 4.0
        nxt[0::2, 0::2] = q + hd + vd + dd
        nxt[0::2, 1::2] = q + hd - vd - dd
        nxt[1::2, 0::2] = q - hd + vd - dd
        nxt[1::2, 1::2] = q - hd - vd + dd
        levels.append(nxt)
        s *= 2
    return levels


def ihaar2d(coeffs) -> np.ndarray:
    return _haar_levels(coeffs)[-1]


@dataclass
class NoisyWaveletTransform:
    coeffs: np.ndarray  # packed (2**q, 2**q), DC at [0, 0]
    epsilon: float
    n: int
    noise_scale: float
    domain: Rect = UNIT_SQUARE
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._levels = None

    @property
    def q(self) -> int:
        return int(self.coeffs.shape[0]).bit_length() - 1

    @property
    def levels(self) -> list[np.ndarray]:
        if self._levels is None:
            self._levels = _haar_levels(self.coeffs)
        return self._levels

    def histogram(self) -> np.ndarray:
        return self.levels[-1]

    def to_json(self) -> str:
        return _to_doc("haar_wavelet", self, {"coeffs": self.coeffs, "noise_scale": self.noise_scale})


def wavelet_publish(points, q: int, epsilon: float, rng=None, *, domain: Rect = UNIT_SQUARE, noise: bool = True):
    """Haar coefficients of a ``2**q`` square histogram with uniform Laplace noise.

    Every detail coefficient gets ``Lap(2(q+1)/epsilon)``; moving one point
    changes the details by at most ``1.5 q`` in L1, so this scale is a
    conservative bound. The DC coefficient is set to the public size ``n``.
    """
    if not 0 <= q <= 10:
        raise ValueError("wavelet depth q must lie in [0, 10]")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    counts = histogram_counts(points, 1 << q, domain)
    n = int(round(counts.sum()))
    coeffs = haar2d(counts)
    scale = 2.0 * (q + 1) / epsilon
    if noise:
        coeffs = coeffs + laplace_noise(scale, coeffs.shape, as_generator(rng))
    coeffs[0, 0] = float(n)
    meta = run_metadata({"q": q, "epsilon": epsilon, "noise": noise}, rng if isinstance(rng, int) else None)
    meta["weighting"] = "uniform"
    return NoisyWaveletTransform(coeffs, float(epsilon), n, scale, domain, meta)


def wavelet_range_count(w: NoisyWaveletTransform, query: Rect) -> float:
    """Range count from the coefficient pyramid.

    Descends from the root, taking whole node totals where the query covers
    a node and recursing where it only partly does; partly covered leaves
    contribute their covered fraction. A query covering the domain returns
    the DC coefficient.
    """
    d = w.domain
    x0 = (max(query.xmin, d.xmin) - d.xmin) / d.width
    x1 = (min(query.xmax, d.xmax) - d.xmin) / d.width
    y0 = (max(query.ymin, d.ymin) - d.ymin) / d.height
    y1 = (min(query.ymax, d.ymax) - d.ymin) / d.height
    if not (x1 > x0 and y1 > y0):
        return 0.0
    levels = w.levels
    leaf = len(levels) - 1
    parts: list[float] = []

    def visit(j: int, iy: int, ix: int):
        s = 1 << j
        cx0, cx1, cy0, cy1 = ix / s, (ix + 1) / s, iy / s, (iy + 1) / s
        ox = min(x1, cx1) - max(x0, cx0)
        oy = min(y1, cy1) - max(y0, cy0)
        if ox <= 0 or oy <= 0:
            return
        if x0 <= cx0 and cx1 <= x1 and y0 <= cy0 and cy1 <= y1:
            parts.append(float(levels[j][iy, ix]))
        elif j == leaf:
            parts.append(ox * oy * s * s * float(levels[j][iy, ix]))
        else:
            for dy in (0, 1):
                for dx in (0, 1):
                    visit(j + 1, 2 * iy + dy, 2 * ix + dx)

    visit(0, 0, 0)
    return math.fsum(parts)


# ---------------------------------------------------------------------------
# smooth-sensitivity median


def _check_median_input(values) -> np.ndarray:
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 3:
        raise ValueError("median sensitivity needs at least three values")
    if np.any(np.diff(x) < 0):
        raise ValueError("values must be sorted")
    return x


def _padded(x: np.ndarray) -> tuple[np.ndarray, int]:
    """``x`` with n zeros before and n ones after, so ranks outside 1..n clamp."""
    n = x.size
    return np.concatenate([np.zeros(n + 1), x, np.ones(n + 1)]), n + 1


def local_sensitivity_median(values) -> float:
    """Largest gap next to the (lower) median of sorted data."""
    x = _check_median_input(values)
    m = (x.size + 1) // 2 - 1
    left = x[m] - x[m - 1]
    right = x[m + 1] - x[m] if m + 1 < x.size else 1.0 - x[m]
    return float(max(left, right))


def smooth_sensitivity(values, epsilon: float) -> float:
    """``max_t exp(-epsilon t) * max_{0<=j<=t+1} (x[m+j] - x[m+j-t-1])``.

    Ranks are 1-based with ``m`` the lower median; out-of-range ranks read
    as 0 below and 1 above. Quadratic in the dataset size.
    """
    x = _check_median_input(values)
    n = x.size
    xp, off = _padded(x)
    m = (n + 1) // 2
    best = 0.0
    for t in range(n + 1):
        j = np.arange(t + 2)
        hi = xp[off + m + j - 1]
        lo = xp[off + m + j - t - 2]
        best = max(best, math.exp(-epsilon * t) * float(np.max(hi - lo)))
    return best


@dataclass(frozen=True)
class SmoothSensitivityResult:
    smooth_sensitivity: float
    local_sensitivity: float
    median: float
    noisy_median: float
    epsilon: float


def smooth_sensitivity_median(values, epsilon: float, rng=None, *, noise: bool = True) -> SmoothSensitivityResult:
    """Median plus ``Lap(2 S / epsilon)`` where ``S`` is the smooth sensitivity.

    Laplace noise scaled by a smooth bound is the usual practical choice;
    a strict pure epsilon-DP guarantee would need a heavier-tailed
    distribution.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    x = _check_median_input(values)
    s = smooth_sensitivity(x, epsilon)
    med = float(x[(x.size + 1) // 2 - 1])
    noisy = med
    if noise and s > 0:
        noisy = med + laplace_sample(2.0 * s / epsilon, as_generator(rng))
    return SmoothSensitivityResult(s, local_sensitivity_median(x), med, noisy, float(epsilon))
