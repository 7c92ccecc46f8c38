"""Publisher side: sort, group into equal-depth blocks, add Laplace noise.

Sorting a multiset of values from [0, 1] has L1 sensitivity 1 under the
replacement neighbourhood, and so does any grouped-sum of the sorted
sequence. Adding ``Lap(1/epsilon)`` to each block sum is therefore
epsilon-differentially private regardless of the block layout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ._meta import run_metadata
from .hilbert import DomainError, HilbertConfig, Rect, map_dataset

__all__ = [
    "AUTO",
    "GroupPartition",
    "Release",
    "sort_sequence",
    "group_sums",
    "grouped_sums",
    "laplace_sample",
    "laplace_noise",
    "pad_to_size",
    "publish",
    "publish_values",
    "publish_with_private_size",
    "as_generator",
]

AUTO = "auto"
DEFAULT_SIZE_BUDGET_SPLIT = 0.1

RngLike = Union[np.random.Generator, int, None]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _seed_of(rng: RngLike):
    return int(rng) if isinstance(rng, (int, np.integer)) else None


# ---------------------------------------------------------------------------
# sorting and grouping


def sort_sequence(values) -> np.ndarray:
    """Sorted copy of a nonempty multiset of values from the unit interval."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("cannot sort an empty dataset")
    if not np.all(np.isfinite(arr)):
        raise DomainError("non-finite value in dataset")
    if arr.min() < 0.0 or arr.max() > 1.0:
        bad = int(np.flatnonzero((arr < 0.0) | (arr > 1.0))[0])
        raise DomainError(f"value {arr[bad]!r} at position {bad} is outside [0, 1]")
    return np.sort(arr, kind="stable")


@dataclass(frozen=True)
class GroupPartition:
    """Consecutive index blocks ``[bounds[i], bounds[i+1])`` covering ``0..n-1``."""

    bounds: tuple

    def __post_init__(self):
        b = self.bounds
        if len(b) < 2 or b[0] != 0 or any(b[i + 1] <= b[i] for i in range(len(b) - 1)):
            raise ValueError(f"invalid block boundaries {b!r}")

    @classmethod
    def equal_depth(cls, n: int, k: int) -> "GroupPartition":
        """Blocks of ``k`` elements; the last block holds the remainder when ``k`` does not divide ``n``."""
        n, k = int(n), int(k)
        if k <= 0:
            raise ValueError(f"group size must be positive, got {k}")
        if k > n:
            raise ValueError(f"group size {k} exceeds dataset size {n}")
        return cls(tuple(range(0, n, k)) + (n,))

    @property
    def n(self) -> int:
        return self.bounds[-1]

    @property
    def m(self) -> int:
        return len(self.bounds) - 1

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(np.asarray(self.bounds, dtype=np.int64))

    @property
    def tail_size(self) -> int:
        return self.bounds[-1] - self.bounds[-2]

    def blocks(self) -> list[range]:
        return [range(self.bounds[i], self.bounds[i + 1]) for i in range(self.m)]


def grouped_sums(seq, partition: GroupPartition) -> np.ndarray:
    """Block sums of an already sorted sequence over an arbitrary partition."""
    arr = np.asarray(seq, dtype=float)
    if arr.size != partition.n:
        raise ValueError(f"partition covers {partition.n} indices but sequence has {arr.size}")
    return np.add.reduceat(arr, np.asarray(partition.bounds[:-1], dtype=np.intp))


def group_sums(seq, k: int) -> tuple[np.ndarray, GroupPartition]:
    partition = GroupPartition.equal_depth(len(seq), k)
    return grouped_sums(seq, partition), partition


# ---------------------------------------------------------------------------
# Laplace noise


def laplace_noise(scale: float, size, rng: RngLike) -> np.ndarray:
    """I.i.d. Laplace(0, scale) draws by inverse CDF."""
    if not (scale > 0 and math.isfinite(scale)):
        raise ValueError(f"Laplace scale must be positive and finite, got {scale}")
    gen = as_generator(rng)
    u = gen.random(size) - 0.5
    # u == -0.5 has probability 2**-53 and would give an infinite draw
    u = np.where(u == -0.5, 0.0, u)
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def laplace_sample(scale: float, rng: RngLike) -> float:
    return float(laplace_noise(scale, None, rng))


def _laplace_at(u: float, scale: float) -> float:
    """Inverse CDF evaluated at a given ``u`` in (-1/2, 1/2); exposed for tests."""
    return -scale * math.copysign(1.0, u) * math.log1p(-2.0 * abs(u)) if u != 0 else 0.0


# ---------------------------------------------------------------------------
# the published artifact


@dataclass
class Release:
    """Noisy block sums plus everything a consumer needs to reconstruct.

    ``hilbert`` is ``None`` for releases of one-dimensional data that were
    already in [0, 1] and skipped the curve map.
    """

    noisy_sums: np.ndarray
    group_size: int
    tail_size: int
    epsilon: float
    hilbert: Optional[HilbertConfig] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.noisy_sums = np.asarray(self.noisy_sums, dtype=float).ravel()
        if self.noisy_sums.size < 1:
            raise ValueError("a release holds at least one block")
        if self.group_size < 1 or not 1 <= self.tail_size <= self.group_size:
            raise ValueError(f"inconsistent group_size={self.group_size}, tail_size={self.tail_size}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def m(self) -> int:
        return int(self.noisy_sums.size)

    @property
    def n(self) -> int:
        return (self.m - 1) * self.group_size + self.tail_size

    @property
    def partition(self) -> GroupPartition:
        return GroupPartition.equal_depth(self.n, self.group_size)

    def to_dict(self) -> dict:
        return {
            "epsilon": float(self.epsilon),
            "group_size": int(self.group_size),
            "tail_size": int(self.tail_size),
            "hilbert_order": None if self.hilbert is None else int(self.hilbert.order),
            "domain_rect": None if self.hilbert is None else self.hilbert.domain.as_list(),
            "noisy_sums": [float(v) for v in self.noisy_sums],
            "meta": self.meta,
        }

    def to_json(self) -> str:
        # float repr is the shortest string that round-trips exactly
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "Release":
        try:
            order = doc["hilbert_order"]
            hilbert = None
            if order is not None:
                hilbert = HilbertConfig(int(order), Rect.from_list(doc["domain_rect"]))
            return cls(
                noisy_sums=np.asarray(doc["noisy_sums"], dtype=float),
                group_size=int(doc["group_size"]),
                tail_size=int(doc["tail_size"]),
                epsilon=float(doc["epsilon"]),
                hilbert=hilbert,
                meta=dict(doc.get("meta", {})),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed release document: {exc!r}") from None

    @classmethod
    def from_json(cls, text: str) -> "Release":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError(f"release is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ValueError("release document must be a JSON object")
        return cls.from_dict(doc)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "Release":
        return cls.from_json(Path(path).read_text())


# ---------------------------------------------------------------------------
# publishing


def _resolve_group_size(k, n: int, epsilon: float, table) -> int:
    if isinstance(k, str):
        if k.lower() != AUTO:
            raise ValueError(f"group size must be a positive integer or 'auto', got {k!r}")
        from .error_model import choose_group_size, default_table

        return choose_group_size(n, epsilon, table if table is not None else default_table())
    k = int(k)
    if k < 1 or k > n:
        raise ValueError(f"group size must lie in [1, {n}], got {k}")
    return k


def publish_values(
    values,
    epsilon: float,
    k=AUTO,
    rng: RngLike = None,
    *,
    hilbert: Optional[HilbertConfig] = None,
    noise: bool = True,
    table=None,
    presorted: bool = False,
) -> Release:
    """Publish a multiset of unit-interval values (already mapped to 1D).

    ``noise=False`` is a test hook that publishes the exact block sums.
    """
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise ValueError(f"epsilon must be positive and finite, got {epsilon}")
    seq = np.asarray(values, dtype=float) if presorted else sort_sequence(values)
    n = seq.size
    group = _resolve_group_size(k, n, epsilon, table)
    sums, partition = group_sums(seq, group)
    if noise:
        sums = sums + laplace_noise(1.0 / epsilon, sums.size, as_generator(rng))
    config = {
        "epsilon": float(epsilon),
        "k": str(k),
        "order": None if hilbert is None else hilbert.order,
        "domain": None if hilbert is None else hilbert.domain.as_list(),
        "noise": bool(noise),
    }
    meta = run_metadata(config, _seed_of(rng))
    meta["noise"] = bool(noise)
    return Release(sums, group, partition.tail_size, float(epsilon), hilbert, meta)


def publish(
    points,
    epsilon: float,
    k=AUTO,
    cfg: Optional[HilbertConfig] = None,
    rng: RngLike = None,
    *,
    noise: bool = True,
    table=None,
) -> Release:
    """Map 2D points onto the Hilbert curve and publish their noisy grouped sums."""
    cfg = cfg or HilbertConfig()
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise ValueError("cannot publish an empty pointset")
    values = map_dataset(pts, cfg)
    return publish_values(values, epsilon, k, rng, hilbert=cfg, noise=noise, table=table)


def pad_to_size(seq, target: int) -> np.ndarray:
    """Deterministically resize a sorted sequence to ``target`` elements.

    Growing prepends zeros; shrinking drops the smallest elements.
    """
    arr = np.asarray(seq, dtype=float)
    target = int(target)
    if target < 1:
        raise ValueError(f"target size must be at least 1, got {target}")
    n = arr.size
    if target > n:
        return np.concatenate([np.zeros(target - n), arr])
    return arr[n - target:].copy()


def publish_with_private_size(
    points,
    epsilon_total: float,
    budget_split: float = DEFAULT_SIZE_BUDGET_SPLIT,
    k=AUTO,
    cfg: Optional[HilbertConfig] = None,
    rng: RngLike = None,
    *,
    noise: bool = True,
    table=None,
) -> tuple[int, Release]:
    """Spend ``budget_split * epsilon_total`` on a noisy size, the rest on the release.

    Returns the published size and the release of the padded sequence.
    """
    if not 0.0 < budget_split < 1.0:
        raise ValueError(f"budget split must lie strictly between 0 and 1, got {budget_split}")
    if not (epsilon_total > 0 and math.isfinite(epsilon_total)):
        raise ValueError(f"epsilon must be positive and finite, got {epsilon_total}")
    cfg = cfg or HilbertConfig()
    gen = as_generator(rng)
    eps_size = budget_split * epsilon_total
    eps_data = epsilon_total - eps_size
    values = sort_sequence(map_dataset(points, cfg))
    n = values.size
    noisy_n = n + (laplace_sample(1.0 / eps_size, gen) if noise else 0.0)
    noisy_n = max(1, int(round(noisy_n)))
    padded = pad_to_size(values, noisy_n)
    release = publish_values(
        padded, eps_data, k, gen, hilbert=cfg, noise=noise, table=table, presorted=True
    )
    release.meta.update(
        run_metadata({"epsilon_total": epsilon_total, "split": budget_split, "k": str(k)}, _seed_of(rng))
    )
    release.meta.update({"noisy_size": noisy_n, "size_epsilon": eps_size, "noise": bool(noise)})
    return noisy_n, release
