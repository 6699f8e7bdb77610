"""Exact privacy audits on tiny instances.

Both mechanisms release a vector of integer counts ``z_c = n_c + lambda_c``
with independent discrete Laplace noise per cell ``c``; whatever the
mechanism does with ``z`` afterwards is post-processing.  The
pmf of ``z`` factorizes over cells, so for a window that is a product of
per-cell intervals the maximum of the log-ratio over all vectors in the
window is the sum of the per-cell maxima.  ``brute_force_max`` enumerates
the vectors directly and is used to cross-check that identity.

Datasets are multisets of anchor points.  ``adjacency="add-remove"`` pairs a
dataset with every dataset obtained by adding or removing one point;
``"replace"`` swaps one point for another anchor.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .dlaplace import DiscreteLaplace
from .partition import BinaryPartition
from .pmm import NoiseSchedule, optimal_schedule, true_counts
from .psmm import build_grid

COVERAGE = 1e-6
ADJACENCY = ("add-remove", "replace")


class WindowTooSmall(ValueError):
    pass


@dataclass
class AuditReport:
    mechanism: str
    eps: float
    window: int
    adjacency: str
    max_log_ratio: float
    worst_pair: tuple
    pairs: int
    sigmas: list[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_log_ratio <= self.eps + 1e-9

    def to_dict(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "eps": self.eps,
            "window": self.window,
            "adjacency": self.adjacency,
            "max_log_ratio": self.max_log_ratio,
            "worst_pair": [list(map(int, x)) for x in self.worst_pair],
            "pairs": self.pairs,
            "sigmas": self.sigmas,
            "result": "PASS" if self.passed else "FAIL",
        }


def check_window(sigmas, window: int) -> None:
    """Each tail beyond ``+-window`` must carry at most ``COVERAGE`` mass."""
    if window < 1:
        raise WindowTooSmall(f"window must be at least 1, got {window}")
    for s in sigmas:
        tail = DiscreteLaplace(s).tail(window)
        if tail > COVERAGE:
            need = math.ceil(-s * math.log(COVERAGE * (1 + math.exp(-1 / s)))) - 1
            raise WindowTooSmall(
                f"window {window} leaves tail mass {tail:.3g} for sigma={s:g}; use a window of at least {need}"
            )


def multisets(n_anchors: int, size: int) -> list[tuple[int, ...]]:
    """Anchor multiplicities of every multiset of the given size."""
    out = []
    for combo in itertools.combinations_with_replacement(range(n_anchors), size):
        out.append(tuple(np.bincount(combo, minlength=n_anchors).tolist()) if size else (0,) * n_anchors)
    return out


def neighbours(counts: tuple[int, ...], adjacency: str) -> list[tuple[int, ...]]:
    c = list(counts)
    out = set()
    if adjacency == "add-remove":
        for i in range(len(c)):
            out.add(tuple(c[:i] + [c[i] + 1] + c[i + 1 :]))
            if c[i] > 0:
                out.add(tuple(c[:i] + [c[i] - 1] + c[i + 1 :]))
    elif adjacency == "replace":
        for i in range(len(c)):
            for j in range(len(c)):
                if i != j and c[i] > 0:
                    e = c.copy()
                    e[i] -= 1
                    e[j] += 1
                    out.add(tuple(e))
    else:
        raise ValueError(f"unknown adjacency {adjacency!r}; choose from {ADJACENCY}")
    return sorted(out)


def _cell_max(n: int, m: int, sigma: float, window: int) -> float:
    """Max over ``z`` in ``n +- window`` of ``log pmf(z - n) - log pmf(z - m)``."""
    lap = DiscreteLaplace(sigma)
    z = np.arange(n - window, n + window + 1)
    return float(np.max(lap.logpmf(z - n) - lap.logpmf(z - m)))


def max_log_ratio(counts_a, counts_b, sigmas, window: int) -> float:
    """Factorized maximum over the product window around ``counts_a``."""
    return math.fsum(
        _cell_max(int(a), int(b), s, window) for a, b, s in zip(counts_a, counts_b, sigmas)
    )


def brute_force_max(counts_a, counts_b, sigmas, window: int) -> float:
    """Same quantity by enumerating every noisy vector; tiny windows only."""
    a = np.asarray(counts_a, dtype=np.int64)
    b = np.asarray(counts_b, dtype=np.int64)
    if (2 * window + 1) ** len(a) > 5_000_000:
        raise ValueError("window too large for brute-force enumeration")
    offsets = np.array(list(itertools.product(range(-window, window + 1), repeat=len(a))))
    z = a + offsets
    total = np.zeros(len(z))
    for c, s in enumerate(sigmas):
        lap = DiscreteLaplace(s)
        total += lap.logpmf(z[:, c] - a[c]) - lap.logpmf(z[:, c] - b[c])
    return float(total.max())


def _run(mechanism, eps, window, adjacency, datasets, cell_counts, sigmas) -> AuditReport:
    check_window(sigmas, window)
    best, worst, pairs = -math.inf, ((), ()), 0
    for x in datasets:
        cx = cell_counts(x)
        for y in neighbours(x, adjacency):
            v = max_log_ratio(cx, cell_counts(y), sigmas, window)
            pairs += 1
            if v > best:
                best, worst = v, (x, y)
    return AuditReport(mechanism, eps, window, adjacency, best, worst, pairs, list(map(float, sigmas)))


def audit_pmm(
    eps: float = 1.0,
    window: int = 40,
    depth: int = 2,
    n: int = 3,
    n_anchors: int = 3,
    schedule: NoiseSchedule | None = None,
    adjacency: str = "add-remove",
) -> AuditReport:
    """PMM in ``d = 1``: datasets of ``n`` points on ``n_anchors`` equispaced anchors."""
    if not eps > 0:
        raise ValueError(f"privacy budget must be positive, got {eps!r}")
    part = BinaryPartition(1, depth)
    if schedule is None:
        schedule = optimal_schedule(part.delta_levels()[:-1], eps)
    if schedule.depth != depth:
        raise ValueError(f"schedule depth {schedule.depth} does not match partition depth {depth}")
    anchors = build_grid(1, n_anchors).anchors()
    sigmas = np.concatenate([np.full(2**j, s) for j, s in enumerate(schedule.sigmas)])

    def cell_counts(mult):
        pts = np.repeat(anchors, mult, axis=0)
        return np.concatenate(true_counts(pts, part).levels)

    return _run("pmm", eps, window, adjacency, multisets(n_anchors, n), cell_counts, sigmas)


def audit_psmm(eps: float = 1.0, window: int = 40, m: int = 3, n: int = 2, adjacency: str = "add-remove") -> AuditReport:
    """PSMM on ``m`` cells in ``d = 1`` with datasets of ``n`` points on the anchors."""
    if not eps > 0:
        raise ValueError(f"privacy budget must be positive, got {eps!r}")
    sigmas = np.full(m, 1.0 / eps)
    return _run("psmm", eps, window, adjacency, multisets(m, n), np.asarray, sigmas)


def broken_schedule(eps: float = 1.0, depth: int = 2, level: int = 1) -> NoiseSchedule:
    """The optimal schedule with one level's noise halved."""
    s = list(optimal_schedule(BinaryPartition(1, depth).delta_levels()[:-1], eps).sigmas)
    s[level] /= 2
    return NoiseSchedule(tuple(s))
