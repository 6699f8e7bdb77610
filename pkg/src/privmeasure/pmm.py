"""Private measure mechanism on a binary hierarchical partition.

Pipeline: true counts per cell -> discrete Laplace noise per level, clamped
at zero -> top-down consistency -> ``m_theta`` copies of each leaf center.
Counts live in one integer array per level, indexed by the integer value of
the cell's bit string.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dlaplace import DiscreteLaplace
from .partition import BinaryPartition, check_points

POLICIES = ("uniform", "proportional")


class EmptySynthetic(RuntimeError):
    """The consistent root count is zero, so there is nothing to emit."""


@dataclass
class CountTree:
    levels: list[np.ndarray]
    kind: str = "true"
    # pre-clamp noise per level; only set on noisy trees
    noise: list[np.ndarray] | None = None

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def root(self) -> int:
        return int(self.levels[0][0])

    @property
    def leaves(self) -> np.ndarray:
        return self.levels[-1]

    def is_consistent(self) -> bool:
        return all(
            np.array_equal(self.levels[j], self.levels[j + 1][0::2] + self.levels[j + 1][1::2])
            for j in range(self.depth)
        )

    def equals(self, other: "CountTree") -> bool:
        return len(self.levels) == len(other.levels) and all(
            np.array_equal(a, b) for a, b in zip(self.levels, other.levels)
        )


@dataclass(frozen=True)
class NoiseSchedule:
    sigmas: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        if not self.sigmas:
            raise ValueError("a noise schedule needs at least one level")
        if not all(s > 0 and math.isfinite(s) for s in self.sigmas):
            raise ValueError(f"noise magnitudes must be positive and finite: {self.sigmas}")

    @property
    def depth(self) -> int:
        return len(self.sigmas) - 1

    @property
    def budget(self) -> float:
        return math.fsum(1.0 / s for s in self.sigmas)

    @classmethod
    def constant(cls, sigma: float, depth: int) -> "NoiseSchedule":
        return cls((sigma,) * (depth + 1))


def optimal_schedule(deltas, eps: float) -> NoiseSchedule:
    """Noise magnitudes minimizing the accuracy bound at privacy budget ``eps``.

    ``deltas`` is ``[Delta_{-1}, ..., Delta_{r-1}]``; level ``j`` gets
    ``S / (eps * sqrt(Delta_{j-1}))`` with ``S = sum_j sqrt(Delta_{j-1})``.
    """
    if not eps > 0:
        raise ValueError(f"privacy budget must be positive, got {eps!r}")
    roots = [math.sqrt(float(x)) for x in deltas]
    if not roots or min(roots) <= 0:
        raise ValueError("all Delta values must be positive")
    S = math.fsum(roots)
    return NoiseSchedule(tuple(S / (eps * q) for q in roots))


def schedule_for(partition: BinaryPartition, eps: float) -> NoiseSchedule:
    return optimal_schedule(partition.delta_levels()[:-1], eps)


def choose_depth(eps: float, n: int, d: int) -> int:
    """Partition depth ``log2(eps n)`` (minus one for ``d = 1``), rounded to nearest."""
    en = eps * n
    if not en > 1:
        raise ValueError(
            f"eps * n = {en:g} must exceed 1 for a useful partition depth (eps={eps}, n={n})"
        )
    r = math.floor(math.log2(en) + 0.5)
    if d == 1:
        r -= 1
    return max(0, r)


def accuracy_bound(schedule: NoiseSchedule, partition: BinaryPartition, n: int) -> float:
    """Expected-W1 upper bound ``(2 sqrt 2 / n) sum_j sigma_j Delta_{j-1} + delta``."""
    deltas = partition.delta_levels()[:-1]
    total = math.fsum(s * dl for s, dl in zip(schedule.sigmas, deltas))
    return 2.0 * math.sqrt(2.0) / n * total + partition.resolution


def true_counts(data, partition: BinaryPartition) -> CountTree:
    x = check_points(data, partition.dim) if len(np.asarray(data)) else np.zeros((0, partition.dim))
    leaves = np.bincount(partition.locate_many(x), minlength=partition.n_leaves).astype(np.int64)
    levels = [leaves]
    for _ in range(partition.depth):
        child = levels[0]
        levels.insert(0, child[0::2] + child[1::2])
    return CountTree(levels, "true")


def add_noise(tree: CountTree, schedule: NoiseSchedule, rng: np.random.Generator) -> CountTree:
    """Add ``Lap_Z(sigma_j)`` noise at level ``j`` and clamp at zero.

    Noise is drawn level by level, cells in index order, so a seed fixes the
    whole tree.
    """
    if schedule.depth != tree.depth:
        raise ValueError(
            f"schedule has {len(schedule.sigmas)} levels, tree has {tree.depth + 1}"
        )
    noisy, noise = [], []
    for counts, sigma in zip(tree.levels, schedule.sigmas):
        lam = DiscreteLaplace(sigma).sample(rng, size=len(counts)).astype(np.int64)
        noise.append(lam)
        noisy.append(np.maximum(counts + lam, 0))
    return CountTree(noisy, "noisy", noise)


def flux(a, b) -> int:
    """Incomparability of two points of ``Z_+^2`` under the product order."""
    a0, a1 = (int(v) for v in a)
    b0, b1 = (int(v) for v in b)
    if min(a0, a1, b0, b1) < 0:
        raise ValueError(f"flux is defined on nonnegative pairs, got {a} and {b}")
    if (a0 <= b0 and a1 <= b1) or (a0 >= b0 and a1 >= b1):
        return 0
    return min(abs(a0 - b0), abs(a1 - b1))


def comparable(a, b) -> bool:
    return (a[0] <= b[0] and a[1] <= b[1]) or (a[0] >= b[0] and a[1] >= b[1])


def _feasible_interval(a0: np.ndarray, a1: np.ndarray, m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First coordinates ``x`` with ``(x, m - x)`` comparable to ``(a0, a1)``."""
    surplus = a0 + a1 >= m
    lo = np.where(surplus, np.maximum(0, m - a1), a0)
    hi = np.where(surplus, np.minimum(m, a0), m - a1)
    return lo, hi


def transform_pairs(a0, a1, m, policy: str = "uniform") -> np.ndarray:
    """First child count after moving ``(a0, a1)`` onto the line ``x + y = m``.

    ``uniform`` takes the Euclidean-closest comparable lattice point,
    ``proportional`` the lattice point closest to the ray through the
    origin and ``(a0, a1)``.  Ties go to the larger first coordinate.
    """
    a0 = np.asarray(a0, dtype=np.int64)
    a1 = np.asarray(a1, dtype=np.int64)
    m = np.asarray(m, dtype=np.int64)
    lo, hi = _feasible_interval(a0, a1, m)
    if policy == "uniform":
        x = (a0 - a1 + m + 1) // 2
    elif policy == "proportional":
        s = a0 + a1
        safe = np.where(s > 0, s, 1)
        x = np.where(s > 0, (2 * m * a0 + safe) // (2 * safe), (m + 1) // 2)
    else:
        raise ValueError(f"unknown consistency policy {policy!r}; choose from {POLICIES}")
    return np.clip(x, lo, hi)


def enforce_consistency(tree: CountTree, policy: str = "uniform") -> CountTree:
    """Top-down pass making every parent equal the sum of its two children."""
    levels = [np.asarray(tree.levels[0], dtype=np.int64).copy()]
    if levels[0][0] < 0:
        raise ValueError("root count must be nonnegative")
    for j in range(tree.depth):
        parent = levels[j]
        child = tree.levels[j + 1]
        x = transform_pairs(child[0::2], child[1::2], parent, policy)
        out = np.empty(2 * len(parent), dtype=np.int64)
        out[0::2] = x
        out[1::2] = parent - x
        levels.append(out)
    return CountTree(levels, "consistent")


@dataclass
class PMMResult:
    points: np.ndarray
    partition: BinaryPartition
    schedule: NoiseSchedule
    policy: str
    true: CountTree
    noisy: CountTree
    consistent: CountTree = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.points)


def synthesize(partition: BinaryPartition, consistent: CountTree) -> np.ndarray:
    """``m_theta`` copies of each leaf center, leaves in index order."""
    return np.repeat(partition.centers(), consistent.leaves, axis=0)


def run_pmm(
    data,
    eps: float,
    rng: np.random.Generator,
    policy: str = "uniform",
    depth: int | None = None,
    schedule: NoiseSchedule | None = None,
) -> PMMResult:
    x = np.asarray(data, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if len(x) == 0:
        raise ValueError("input dataset is empty")
    if not eps > 0:
        raise ValueError(f"privacy budget must be positive, got {eps!r}")
    if policy not in POLICIES:
        raise ValueError(f"unknown consistency policy {policy!r}; choose from {POLICIES}")
    n, d = x.shape
    if depth is None:
        depth = schedule.depth if schedule is not None else choose_depth(eps, n, d)
    partition = BinaryPartition(d, depth)
    if schedule is None:
        schedule = schedule_for(partition, eps)
    truth = true_counts(x, partition)
    noisy = add_noise(truth, schedule, rng)
    consistent = enforce_consistency(noisy, policy)
    if consistent.root == 0:
        raise EmptySynthetic("noise drove the root count to zero; no synthetic points")
    return PMMResult(synthesize(partition, consistent), partition, schedule, policy, truth, noisy, consistent)
