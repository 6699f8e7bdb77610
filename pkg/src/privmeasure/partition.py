"""Binary hierarchical partition of the unit cube under the sup-norm.

Level ``j`` cells are obtained from level ``j - 1`` cells by halving
coordinate ``j mod d``.  A cell is addressed by its bit string ``theta``;
the integer value of ``theta`` (first bit most significant) is its position
in the level's count array, so the children of cell ``i`` at level ``j`` are
``2i`` and ``2i + 1`` at level ``j + 1``.

Cells are half-open ``[lo, hi)`` except that the upper face of the domain is
closed, so every point of ``[0, 1]^d`` has exactly one leaf.  Nothing is
stored per cell: geometry is recomputed from the index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_DEPTH = 62


@dataclass(frozen=True)
class CellIndex:
    bits: str = ""

    def __post_init__(self) -> None:
        if any(b not in "01" for b in self.bits):
            raise ValueError(f"cell index must be a binary string, got {self.bits!r}")

    @property
    def level(self) -> int:
        return len(self.bits)

    @property
    def index(self) -> int:
        return int(self.bits, 2) if self.bits else 0

    @classmethod
    def from_index(cls, level: int, index: int) -> "CellIndex":
        if level == 0:
            return cls("")
        if not 0 <= index < 2**level:
            raise ValueError(f"index {index} out of range for level {level}")
        return cls(format(index, f"0{level}b"))

    def child(self, bit: int) -> "CellIndex":
        return CellIndex(self.bits + str(int(bit)))

    def __str__(self) -> str:
        return self.bits


def check_points(points, d: int | None = None) -> np.ndarray:
    """Return ``points`` as an ``(n, d)`` float array inside ``[0, 1]^d``."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1) if d in (None, 1) else x.reshape(1, -1)
    if x.ndim != 2:
        raise ValueError(f"expected an (n, d) array of points, got shape {x.shape}")
    if d is not None and x.shape[0] and x.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got {x.shape[1]}")
    if x.size and not np.all((x >= 0.0) & (x <= 1.0)):
        bad = np.argwhere(~((x >= 0.0) & (x <= 1.0)))[0]
        raise ValueError(
            f"point {bad[0]} has coordinate {bad[1]} = {x[bad[0], bad[1]]!r} outside [0, 1]"
        )
    return x


@dataclass(frozen=True)
class BinaryPartition:
    """Canonical depth-``depth`` partition of ``[0, 1]^dim`` by cyclic halving."""

    dim: int
    depth: int

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dim}")
        if self.depth < 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")
        if self.depth > MAX_DEPTH:
            raise ValueError(f"depth {self.depth} exceeds the supported maximum {MAX_DEPTH}")

    @property
    def n_leaves(self) -> int:
        return 2**self.depth

    def splits(self, level: int) -> np.ndarray:
        """Number of halvings of each axis among the first ``level`` levels."""
        c = np.arange(self.dim)
        return (level - c + self.dim - 1) // self.dim

    def diam(self, level: int) -> float:
        return 2.0 ** -(level // self.dim)

    @property
    def resolution(self) -> float:
        return self.diam(self.depth)

    def delta(self, level: int) -> float:
        """Sum of the diameters of the level's cells; ``level=-1`` maps to the root."""
        if level < 0:
            return self.diam(0)
        return 2.0**level * self.diam(level)

    def delta_levels(self) -> list[float]:
        """``[Delta_{-1}, Delta_0, ..., Delta_depth]``."""
        return [self.delta(j) for j in range(-1, self.depth + 1)]

    def _axis_indices(self, level: int, index) -> np.ndarray:
        index = np.asarray(index, dtype=np.int64)
        out = np.zeros(index.shape + (self.dim,), dtype=np.int64)
        for t in range(level):
            bit = (index >> (level - 1 - t)) & 1
            out[..., t % self.dim] = (out[..., t % self.dim] << 1) | bit
        return out

    def box(self, theta: CellIndex) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper corners of the cell ``theta``."""
        self._check_theta(theta)
        side = 2.0 ** -self.splits(theta.level).astype(np.float64)
        lo = self._axis_indices(theta.level, theta.index) * side
        return lo, lo + side

    def representative(self, theta: CellIndex) -> np.ndarray:
        lo, hi = self.box(theta)
        return (lo + hi) / 2.0

    def centers(self, level: int | None = None, index=None) -> np.ndarray:
        """Centers of the given cells (default: all leaves, in index order)."""
        level = self.depth if level is None else level
        if index is None:
            index = np.arange(2**level, dtype=np.int64)
        side = 2.0 ** -self.splits(level).astype(np.float64)
        return (self._axis_indices(level, index) + 0.5) * side

    def locate_many(self, points) -> np.ndarray:
        """Leaf index of every row of ``points``."""
        x = check_points(points, self.dim)
        s = self.splits(self.depth)
        per_axis = np.empty(x.shape, dtype=np.int64)
        for c in range(self.dim):
            k = 2 ** int(s[c])
            per_axis[:, c] = np.minimum((x[:, c] * k).astype(np.int64), k - 1)
        idx = np.zeros(x.shape[0], dtype=np.int64)
        for t in range(self.depth):
            c, u = t % self.dim, t // self.dim
            bit = (per_axis[:, c] >> (int(s[c]) - 1 - u)) & 1
            idx = (idx << 1) | bit
        return idx

    def locate(self, point) -> CellIndex:
        x = np.asarray(point, dtype=np.float64).reshape(1, -1)
        return CellIndex.from_index(self.depth, int(self.locate_many(x)[0]))

    def contains(self, theta: CellIndex, point) -> bool:
        """Membership under the half-open convention with a closed upper domain face."""
        lo, hi = self.box(theta)
        x = np.asarray(point, dtype=np.float64)
        upper_ok = (x < hi) | ((hi == 1.0) & (x <= 1.0))
        return bool(np.all((x >= lo) & upper_ok))

    def _check_theta(self, theta: CellIndex) -> None:
        if theta.level > self.depth:
            raise ValueError(f"cell {theta} is deeper than the partition depth {self.depth}")


def build(d: int, r: int) -> BinaryPartition:
    return BinaryPartition(d, r)
