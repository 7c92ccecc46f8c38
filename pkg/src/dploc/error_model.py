"""Error model for choosing the group size.

The expected normalized error of publishing with group size ``k`` is
approximated by the sum of two terms: the generalization error of
replacing each block by its mean (about ``k / (4n)``) and the Laplace
error of an ungrouped release of ``n / k`` points at privacy level
``k * epsilon``. The second term is read from a Monte-Carlo table.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from ._meta import run_metadata
from .hilbert import HilbertConfig, map_dataset
from .isotonic import isotonic_l2
from .mechanism import GroupPartition, as_generator, grouped_sums, laplace_noise, sort_sequence

__all__ = [
    "DatasetFamily",
    "REPEATING",
    "EQUALLY_SPACED",
    "ErrorTable",
    "ExtrapolationWarning",
    "downsample",
    "upsample",
    "gen_error",
    "emd_1d",
    "emd_sfc",
    "release_error",
    "estimate_err",
    "estimate_err1",
    "build_error_table",
    "predict_err",
    "candidate_group_sizes",
    "choose_group_size",
    "default_table",
]

log = logging.getLogger(__name__)

DEFAULT_TRIALS = 500


class ExtrapolationWarning(UserWarning):
    """A table lookup fell outside the tabulated range and was clamped."""


# ---------------------------------------------------------------------------
# down/up sampling and the two distances


def downsample(seq, k: int) -> np.ndarray:
    """Means of consecutive blocks of ``k``; a short last block is averaged over its own size."""
    arr = np.asarray(seq, dtype=float).ravel()
    if int(k) <= 0:
        raise ValueError(f"group size must be positive, got {k}")
    if arr.size == 0:
        raise ValueError("cannot downsample an empty sequence")
    k = min(int(k), arr.size)
    part = GroupPartition.equal_depth(arr.size, k)
    return grouped_sums(arr, part) / part.sizes


def upsample(seq, k: int, n: int) -> np.ndarray:
    """Repeat each value over its block to rebuild a length-``n`` sequence."""
    arr = np.asarray(seq, dtype=float).ravel()
    k, n = int(k), int(n)
    if k <= 0 or n <= 0:
        raise ValueError("group size and length must be positive")
    if arr.size != -(-n // k):
        raise ValueError(f"{arr.size} blocks of size {k} cannot rebuild {n} elements")
    return np.repeat(arr, k)[:n]


def gen_error(seq, k: int) -> float:
    """Normalized L1 loss of representing each block of the sorted ``seq`` by its mean."""
    arr = np.asarray(seq, dtype=float).ravel()
    n = arr.size
    return float(np.abs(arr - upsample(downsample(arr, k), min(int(k), n), n)).sum() / n)


def emd_1d(a, b) -> float:
    """Earth mover's distance of two equal-size multisets on the line."""
    x = np.sort(np.asarray(a, dtype=float).ravel())
    y = np.sort(np.asarray(b, dtype=float).ravel())
    if x.size != y.size:
        raise ValueError(f"EMD needs equal sizes, got {x.size} and {y.size}")
    return float(np.abs(x - y).sum())


def emd_sfc(p, q, cfg: HilbertConfig) -> float:
    """Approximate 2D EMD by the 1D EMD of the curve images."""
    p = np.asarray(p, dtype=float).reshape(-1, 2)
    q = np.asarray(q, dtype=float).reshape(-1, 2)
    if len(p) != len(q):
        raise ValueError(f"EMD needs equal sizes, got {len(p)} and {len(q)}")
    return emd_1d(map_dataset(p, cfg), map_dataset(q, cfg))


# ---------------------------------------------------------------------------
# dataset families


@dataclass(frozen=True)
class DatasetFamily:
    """A recipe for 1D test datasets of arbitrary size in [0, 1]."""

    kind: str
    pool: Optional[tuple] = None  # source values for "file" families
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("repeating", "equally-spaced", "file"):
            raise ValueError(f"unknown dataset family {self.kind!r}")
        if self.kind == "file" and not self.pool:
            raise ValueError("a file family needs a nonempty value pool")

    @property
    def name(self) -> str:
        return self.label or self.kind

    def generate(self, n: int, rng=None) -> np.ndarray:
        """A sorted dataset of ``n`` values; file families subsample without replacement."""
        n = int(n)
        if n < 1:
            raise ValueError("dataset size must be positive")
        if self.kind == "repeating":
            return np.full(n, 0.5)
        if self.kind == "equally-spaced":
            return np.linspace(0.0, 1.0, n) if n > 1 else np.array([0.5])
        pool = np.asarray(self.pool, dtype=float)
        if n > pool.size:
            raise ValueError(f"family {self.name} has only {pool.size} values, asked for {n}")
        pick = as_generator(rng).choice(pool.size, size=n, replace=False)
        return np.sort(pool[pick])

    @classmethod
    def from_values(cls, values, label: str = "file") -> "DatasetFamily":
        return cls("file", tuple(float(v) for v in sort_sequence(values)), label)

    @classmethod
    def from_file(cls, path, cfg: Optional[HilbertConfig] = None) -> "DatasetFamily":
        from .datasets import read_dataset

        data = read_dataset(path)
        values = data.values if data.values is not None else map_dataset(data.points, cfg or data.default_config())
        return cls.from_values(values, label=Path(path).stem)


REPEATING = DatasetFamily("repeating")
EQUALLY_SPACED = DatasetFamily("equally-spaced")


# ---------------------------------------------------------------------------
# Monte-Carlo error of the mechanism


def release_error(seq, k: int, epsilon: float, rng, *, clamp: bool = False, return_fit: bool = False):
    """Normalized EMD between a sorted dataset and one noisy grouped reconstruction of it.

    Runs publish and reconstruct on the 1D sequence directly: block sums,
    ``Lap(1/epsilon)`` per block, size-weighted L2 isotonic fit of the
    block means, upsampling.
    """
    arr = np.asarray(seq, dtype=float)
    part = GroupPartition.equal_depth(arr.size, k)
    sizes = part.sizes
    noisy = grouped_sums(arr, part) + laplace_noise(1.0 / epsilon, part.m, rng)
    fit = isotonic_l2(noisy / sizes, weights=sizes).values
    if clamp:
        fit = np.clip(fit, 0.0, 1.0)
    rebuilt = np.repeat(fit, sizes)
    err = float(np.abs(arr - rebuilt).sum() / arr.size)
    return (err, rebuilt) if return_fit else err


def estimate_err(seq, k: int, epsilon: float, trials: int, rng, *, clamp: bool = False) -> tuple[float, float]:
    """Mean and standard error of :func:`release_error` over ``trials`` noise draws."""
    if trials < 1:
        raise ValueError("need at least one trial")
    gen = as_generator(rng)
    errs = np.array([release_error(seq, k, epsilon, gen, clamp=clamp) for _ in range(trials)])
    se = float(errs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("nan")
    return float(errs.mean()), se


def estimate_err1(
    family: DatasetFamily, n: int, epsilon: float, trials: int = DEFAULT_TRIALS, rng=None, *, clamp: bool = False
) -> float:
    """Expected normalized error of an ungrouped release of a family dataset."""
    gen = as_generator(rng)
    seq = family.generate(n, gen)
    return estimate_err(seq, 1, epsilon, trials, gen, clamp=clamp)[0]


# ---------------------------------------------------------------------------
# the lookup table


@dataclass
class ErrorTable:
    """Tabulated ungrouped error ``Err1(n, eps)`` for one dataset family.

    Lookups interpolate linearly in log-log space along ``n``. Along
    ``eps`` an exact grid match is used when present; otherwise the
    nearest row is rescaled by the ratio of epsilons.
    """

    family: str
    n_grid: np.ndarray
    eps_grid: np.ndarray
    values: np.ndarray  # shape (len(eps_grid), len(n_grid))
    trials: int
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.n_grid = np.asarray(self.n_grid, dtype=float)
        self.eps_grid = np.asarray(self.eps_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float).reshape(self.eps_grid.size, self.n_grid.size)
        if np.any(np.diff(self.n_grid) <= 0) or np.any(np.diff(self.eps_grid) <= 0):
            raise ValueError("table grids must be strictly increasing")
        if not np.all(self.values > 0):
            raise ValueError("tabulated errors must be strictly positive")

    def lookup(self, n: float, epsilon: float) -> tuple[float, bool]:
        """``(Err1, in_range)``; out-of-range ``n`` is clamped to the nearest grid end."""
        in_range = bool(self.n_grid[0] <= n <= self.n_grid[-1])
        row = int(np.argmin(np.abs(np.log(self.eps_grid) - math.log(epsilon))))
        logv = np.interp(math.log(n), np.log(self.n_grid), np.log(self.values[row]))
        value = math.exp(logv)
        if not math.isclose(self.eps_grid[row], epsilon, rel_tol=1e-12):
            value *= self.eps_grid[row] / epsilon
        return value, in_range

    def err1(self, n: float, epsilon: float) -> float:
        value, in_range = self.lookup(n, epsilon)
        if not in_range:
            warnings.warn(
                f"n={n:g} outside table range [{self.n_grid[0]:g}, {self.n_grid[-1]:g}], clamped",
                ExtrapolationWarning,
                stacklevel=2,
            )
        return value

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "n_grid": [int(v) if float(v).is_integer() else float(v) for v in self.n_grid],
            "eps_grid": [float(v) for v in self.eps_grid],
            "values": [[float(v) for v in row] for row in self.values],
            "trials": int(self.trials),
            "seed": self.seed,
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ErrorTable":
        try:
            return cls(
                family=str(doc["family"]),
                n_grid=doc["n_grid"],
                eps_grid=doc["eps_grid"],
                values=doc["values"],
                trials=int(doc["trials"]),
                seed=doc.get("seed"),
                meta=dict(doc.get("meta", {})),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed error table: {exc!r}") from None

    @classmethod
    def from_json(cls, text: str) -> "ErrorTable":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "ErrorTable":
        return cls.from_json(Path(path).read_text())


def _cell_seed(seed: int, family_idx: int, eps_idx: int, n_idx: int) -> np.random.SeedSequence:
    # one independent stream per cell keeps the table independent of evaluation order
    return np.random.SeedSequence([int(seed), family_idx, eps_idx, n_idx])


def build_error_table(
    families: Iterable[DatasetFamily],
    n_grid: Sequence[int],
    eps_grid: Sequence[float],
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    *,
    progress=None,
) -> dict[str, ErrorTable]:
    """Monte-Carlo ``Err1`` tables, one per family, keyed by family name."""
    n_grid = sorted(int(n) for n in n_grid)
    eps_grid = sorted(float(e) for e in eps_grid)
    if not n_grid or not eps_grid:
        raise ValueError("table grids must be nonempty")
    tables = {}
    for fi, family in enumerate(families):
        values = np.empty((len(eps_grid), len(n_grid)))
        for ei, eps in enumerate(eps_grid):
            for ni, n in enumerate(n_grid):
                gen = np.random.default_rng(_cell_seed(seed, fi, ei, ni))
                values[ei, ni] = estimate_err1(family, n, eps, trials, gen)
                if progress is not None:
                    progress(family.name, n, eps, values[ei, ni])
        config = {"family": family.name, "n_grid": n_grid, "eps_grid": eps_grid, "trials": trials}
        tables[family.name] = ErrorTable(family.name, n_grid, eps_grid, values, trials, seed, run_metadata(config, seed))
    return tables


@lru_cache(maxsize=1)
def default_table() -> ErrorTable:
    """The shipped table for the repeating single-value family at epsilon = 1."""
    text = resources.files("dploc").joinpath("data/err1_repeating.json").read_text()
    return ErrorTable.from_json(text)


# ---------------------------------------------------------------------------
# group-size selection


def predict_err(n: int, epsilon: float, k: int, table: Optional[ErrorTable] = None) -> float:
    """Predicted expected normalized error ``k/(4n) + Err1(n/k, k*epsilon)``."""
    table = table if table is not None else default_table()
    n, k = int(n), int(k)
    if not 1 <= k <= n:
        raise ValueError(f"group size must lie in [1, {n}], got {k}")
    return k / (4.0 * n) + table.err1(n / k, k * epsilon)


def candidate_group_sizes(n: int) -> np.ndarray:
    """Every k up to 100 plus a log-spaced sweep up to n/2."""
    top = max(1, n // 2)
    small = np.arange(1, min(100, top) + 1)
    if top <= 100:
        return small
    big = np.unique(np.round(np.geomspace(100, top, 200)).astype(np.int64))
    return np.union1d(small, big)


def choose_group_size(n: int, epsilon: float, table: Optional[ErrorTable] = None) -> int:
    """The group size minimizing :func:`predict_err`; ties go to the smallest k."""
    table = table if table is not None else default_table()
    n = int(n)
    if n < 2:
        return 1
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ExtrapolationWarning)

        def best_of(ks):
            errs = [predict_err(n, epsilon, int(k), table) for k in ks]
            i = int(np.argmin(errs))  # first minimum is the smallest k
            return int(ks[i])

        cands = candidate_group_sizes(n)
        k0 = best_of(cands)
        # refine between the neighbouring candidates of the coarse optimum
        i = int(np.searchsorted(cands, k0))
        lo = int(cands[max(i - 1, 0)])
        hi = int(cands[min(i + 1, cands.size - 1)])
        k = best_of(np.arange(lo, hi + 1))
    if caught:
        log.warning("group-size search for n=%d left the table range; lookups were clamped", n)
    return k
