"""Isotonic regression and the consumer-side reconstruction of a release."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .hilbert import inverse_map
from .mechanism import Release

__all__ = ["MonotoneFit", "Reconstruction", "isotonic_l2", "isotonic_l1", "reconstruct"]


@dataclass(frozen=True)
class MonotoneFit:
    values: np.ndarray
    pool_bounds: np.ndarray  # offsets of the constant pools, length pools + 1

    @property
    def pools(self) -> int:
        return len(self.pool_bounds) - 1


def isotonic_l2(a, weights=None) -> MonotoneFit:
    """Least-squares nondecreasing fit by pool-adjacent-violators, O(n).

    Parameters
    ----------
    a : sequence of float
        Observations; any finite reals.
    weights : sequence of float, optional
        Positive weights of the squared residuals (default all ones).

    Returns
    -------
    MonotoneFit
        The unique minimizer of ``sum(w * (x - a)**2)`` under
        ``x[0] <= x[1] <= ...``, with the pool layout.
    """
    ys = np.asarray(a, dtype=float).ravel()
    if ys.size == 0:
        raise ValueError("isotonic regression needs at least one value")
    ws = np.ones_like(ys) if weights is None else np.asarray(weights, dtype=float).ravel()
    if ws.shape != ys.shape or np.any(ws <= 0):
        raise ValueError("weights must be positive and match the data length")

    means: list[float] = []
    wsum: list[float] = []
    counts: list[int] = []
    for y, w in zip(ys.tolist(), ws.tolist()):
        c = 1
        while means and means[-1] > y:
            pm = means.pop()
            pw = wsum.pop()
            y = (pm * pw + y * w) / (pw + w)
            w += pw
            c += counts.pop()
        means.append(y)
        wsum.append(w)
        counts.append(c)

    bounds = np.concatenate([[0], np.cumsum(counts)])
    return MonotoneFit(np.repeat(np.asarray(means), counts), bounds)


def _lower_median(sorted_vals: list) -> float:
    return sorted_vals[(len(sorted_vals) - 1) // 2]


def isotonic_l1(a) -> np.ndarray:
    """Least-absolute-deviation nondecreasing fit.

    Pools adjacent violators and represents each pool by the lower median of
    its members. The L1 minimizer is not unique in general; this picks the
    lower-median solution. Pools are merged as sorted runs, which is linear
    per merge, so the worst case is quadratic.
    """
    ys = np.asarray(a, dtype=float).ravel()
    if ys.size == 0:
        raise ValueError("isotonic regression needs at least one value")
    pools: list[list] = []
    meds: list[float] = []
    for y in ys.tolist():
        block = [y]
        med = y
        while meds and meds[-1] > med:
            meds.pop()
            block = sorted(pools.pop() + block)  # timsort merges the two runs linearly
            med = _lower_median(block)
        pools.append(block)
        meds.append(med)
    return np.repeat(np.asarray(meds), [len(p) for p in pools])


@dataclass(frozen=True)
class Reconstruction:
    values: np.ndarray  # length-n nondecreasing 1D sequence
    points: Optional[np.ndarray]  # (n, 2) in the raw domain, None for 1D releases
    group_values: np.ndarray  # fitted value per block


def reconstruct(release: Release, *, clamp: bool = True) -> Reconstruction:
    """Turn a release back into a pointset.

    Block sums become block means, a size-weighted L2 isotonic fit removes
    the order violations the noise introduced, and each block is expanded
    back to its member count. With ``clamp`` the fit is clipped to [0, 1]
    first, which can only move it closer to any dataset inside the unit
    interval.
    """
    sizes = release.partition.sizes
    means = release.noisy_sums / sizes
    fitted = isotonic_l2(means, weights=sizes).values
    if clamp:
        fitted = np.clip(fitted, 0.0, 1.0)
    values = np.repeat(fitted, sizes)
    points = None if release.hilbert is None else inverse_map(values, release.hilbert)
    return Reconstruction(values, points, fitted)
