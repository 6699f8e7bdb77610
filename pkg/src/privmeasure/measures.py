"""Finitely supported (signed) measures on the unit cube."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class DiscreteSignedMeasure:
    """Weights (possibly negative) on distinct support points.

    ``unit`` is set when every weight is an integer multiple of it, e.g.
    ``1/n`` for a perturbed count vector; integer-flow solvers use it.
    """

    points: np.ndarray
    weights: np.ndarray
    unit: float | None = None

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim == 1:
            self.points = self.points.reshape(-1, 1)
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if len(self.points) != len(self.weights):
            raise ValueError(
                f"{len(self.points)} support points but {len(self.weights)} weights"
            )
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def is_probability(self, tol: float = 1e-9) -> bool:
        return bool(np.all(self.weights >= -tol) and abs(self.mass - 1.0) <= tol)

    def integer_weights(self) -> np.ndarray:
        """Weights divided by ``unit``, as integers."""
        if self.unit is None:
            raise ValueError("measure has no integer unit")
        scaled = self.weights / self.unit
        ints = np.rint(scaled)
        if not np.allclose(scaled, ints, rtol=0, atol=1e-6):
            raise ValueError("weights are not integer multiples of the unit")
        return ints.astype(np.int64)

    def with_weights(self, weights, unit: float | None = None) -> "DiscreteSignedMeasure":
        return DiscreteSignedMeasure(self.points, weights, unit)


def empirical(points) -> DiscreteSignedMeasure:
    """Empirical probability measure, duplicates merged."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if len(x) == 0:
        raise ValueError("empirical measure of an empty dataset")
    support, counts = np.unique(x, axis=0, return_counts=True)
    return DiscreteSignedMeasure(support, counts / len(x), unit=1.0 / len(x))


def from_counts(points, counts) -> DiscreteSignedMeasure:
    """Probability measure proportional to nonnegative integer ``counts``."""
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if total <= 0:
        raise ValueError("counts must have a positive total")
    return DiscreteSignedMeasure(points, counts / total, unit=1.0 / total)
