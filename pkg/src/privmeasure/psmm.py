"""Private signed measure mechanism on a uniform grid.

Counts per grid cell are perturbed with ``Lap_Z(1/eps)`` noise, giving a
signed measure on the cell centers.  It is projected onto the closest
probability measure in bounded-Lipschitz distance (a linear program), and
the projection is rounded to a multiset with a fixed number of points.

Projection program, over flows ``u_ij, u'_ij`` between anchors, discarded
mass ``v_i`` and output weights ``tau_i`` (all nonnegative)::

    min  sum_{i != j} rho_ij (u_ij + u'_ij) + 2 sum_i v_i
    s.t. sum_j (u_ij - u_ji) - sum_j (u'_ij - u'_ji) + v_i + tau_i >= nu_i
         sum_i tau_i = 1

Its optimum equals ``d_BL(nu, tau) + nu(Omega) - 1``.  For measures on a
grid the pairwise flows can be restricted to king-move neighbours without
changing the optimum, which turns the program into an integer min-cost flow
when the weights are multiples of ``1/n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import lp
from .dlaplace import DiscreteLaplace
from .measures import DiscreteSignedMeasure
from .metrics import grid_lattice, sup_distances
from .partition import check_points

MAX_CELLS = 2**26
_LP_MAX_SUPPORT = 40


@dataclass(frozen=True)
class CellGrid:
    """``k^d`` congruent cubes of side ``1/k``; cells and anchors in C order."""

    dim: int
    k: int

    @property
    def m(self) -> int:
        return self.k**self.dim

    @property
    def diam(self) -> float:
        return 1.0 / self.k

    def anchors(self) -> np.ndarray:
        return grid_lattice(self.k, self.dim).node_coords()

    def locate(self, points) -> np.ndarray:
        x = check_points(points, self.dim)
        g = np.minimum((x * self.k).astype(np.int64), self.k - 1)
        strides = self.k ** np.arange(self.dim - 1, -1, -1, dtype=np.int64)
        return g @ strides

    def counts(self, points) -> np.ndarray:
        return np.bincount(self.locate(points), minlength=self.m).astype(np.int64)


def build_grid(d: int, target_m: int) -> CellGrid:
    """Smallest ``k`` with ``k^d >= target_m``."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if target_m < 1:
        raise ValueError(f"target cell count must be >= 1, got {target_m}")
    k = max(1, math.ceil(target_m ** (1.0 / d)))
    while k > 1 and (k - 1) ** d >= target_m:
        k -= 1
    while k**d < target_m:
        k += 1
    if k**d > MAX_CELLS:
        raise ValueError(f"grid with {k}^{d} cells exceeds the memory guard of {MAX_CELLS}")
    return CellGrid(d, k)


def perturb_counts(data, grid: CellGrid, eps: float, rng: np.random.Generator, noise=None) -> DiscreteSignedMeasure:
    """Signed measure with weight ``(n_i + lambda_i) / n`` at each anchor.

    ``noise`` overrides the random draw (used to exercise fixed outcomes).
    """
    if not eps > 0:
        raise ValueError(f"privacy budget must be positive, got {eps!r}")
    x = check_points(data, grid.dim)
    n = len(x)
    if n == 0:
        raise ValueError("input dataset is empty")
    counts = grid.counts(x)
    if noise is None:
        noise = DiscreteLaplace(1.0 / eps).sample(rng, size=grid.m)
    noise = np.asarray(noise, dtype=np.int64)
    if noise.shape != counts.shape:
        raise ValueError(f"need {grid.m} noise values, got {noise.shape}")
    return DiscreteSignedMeasure(grid.anchors(), (counts + noise) / n, unit=1.0 / n)


@dataclass
class Projection:
    measure: DiscreteSignedMeasure
    # d_BL between the input and the returned probability measure
    distance: float
    method: str


def projection_program(nu: DiscreteSignedMeasure) -> lp.LinearProgram:
    """The dense projection program; variables ``[u, u', v, tau]``."""
    m = nu.size
    rho = sup_distances(nu.points, nu.points)
    pairs = [(i, j) for i in range(m) for j in range(m) if i != j]
    P = len(pairs)
    n_var = 2 * P + 2 * m
    rows, cols, vals = [], [], []
    for p, (i, j) in enumerate(pairs):
        rows += [i, j, i, j]
        cols += [p, p, P + p, P + p]
        vals += [1.0, -1.0, -1.0, 1.0]
    for i in range(m):
        rows += [i, i, m]
        cols += [2 * P + i, 2 * P + m + i, 2 * P + m + i]
        vals += [1.0, 1.0, 1.0]
    c = np.zeros(n_var)
    c[:P] = [rho[i, j] for i, j in pairs]
    c[P : 2 * P] = c[:P]
    c[2 * P : 2 * P + m] = 2.0
    b = np.concatenate([nu.weights, [1.0]])
    return lp.LinearProgram.from_triplets(c, rows, cols, vals, b, [lp.GE] * m + [lp.EQ])


def _project_lp(nu: DiscreteSignedMeasure, method: str) -> tuple[np.ndarray, float]:
    program = projection_program(nu)
    res = lp.solve(program, method=method)
    if not res.optimal:
        raise lp.LPError(f"projection program ended with status {res.status}", {"iterations": res.iterations})
    m = nu.size
    tau = np.maximum(res.x[-m:], 0.0)
    return tau, res.objective - (nu.mass - 1.0)


def _project_flow(nu: DiscreteSignedMeasure, grid: CellGrid) -> tuple[np.ndarray, float]:
    b = nu.integer_weights()
    N = int(round(1.0 / nu.unit))
    m, k = grid.m, grid.k
    lattice = grid_lattice(k, grid.dim)
    # nodes: anchors 0..m-1, source S, output T, discard D
    S, T, D = m, m + 1, m + 2
    kt, kh = lattice.king_arcs()
    idx = np.arange(m)
    tails = np.concatenate([kt, np.full(m, S), idx, idx, [S]])
    heads = np.concatenate([kh, idx, np.full(m, T), np.full(m, D), [D]])
    costs = np.concatenate(
        [np.ones(len(kt)), np.zeros(m), np.zeros(m), np.full(m, 2 * k), [0]]
    ).astype(np.int64)
    B = int(np.abs(b).sum()) + N
    supplies = np.concatenate([b, [B, -N, N - int(b.sum()) - B]]).astype(np.int64)
    res = lp.min_cost_flow(tails, heads, costs, supplies)
    to_output = res.flow[len(kt) + m : len(kt) + 2 * m]
    tau = to_output / N
    objective = res.cost / (k * N)
    return tau, objective - (nu.mass - 1.0)


def project_to_probability(nu: DiscreteSignedMeasure, grid: CellGrid | None = None, method: str = "auto") -> Projection:
    """Closest probability measure to ``nu`` in d_BL, on the same support.

    ``method`` is ``"lp"`` (dense simplex on the full program), ``"highs"``
    (same program, HiGHS), ``"flow"`` (integer flow on the grid's king
    graph; needs ``grid`` and integer-multiple weights) or ``"auto"``.
    """
    if method == "auto":
        if grid is not None and nu.unit is not None and nu.size == grid.m:
            method = "flow"
        elif nu.size <= _LP_MAX_SUPPORT:
            method = "lp"
        else:
            method = "highs"
    if method == "flow":
        if grid is None:
            raise ValueError("flow projection needs the cell grid")
        if nu.size != grid.m:
            raise ValueError(f"measure has {nu.size} atoms but the grid has {grid.m} cells")
        tau, dist = _project_flow(nu, grid)
    elif method in ("lp", "highs"):
        tau, dist = _project_lp(nu, "simplex" if method == "lp" else "highs")
    else:
        raise ValueError(f"unknown projection method {method!r}")
    return Projection(nu.with_weights(tau), max(dist, 0.0), method)


def apportion(tau, q: int) -> np.ndarray:
    """Largest-remainder integer counts summing to ``q``; ties to the lower index."""
    if q < 1:
        raise ValueError(f"denominator must be >= 1, got {q}")
    w = np.maximum(np.asarray(tau, dtype=np.float64), 0.0)
    if w.sum() <= 0:
        raise ValueError("cannot apportion a zero measure")
    w = w / w.sum()
    exact = w * q
    counts = np.floor(exact).astype(np.int64)
    short = q - int(counts.sum())
    if short > 0:
        order = np.argsort(-(exact - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def rationalize(tau: DiscreteSignedMeasure, q: int) -> np.ndarray:
    """``count_i`` copies of each support point, ``sum count_i = q``."""
    return np.repeat(tau.points, apportion(tau.weights, q), axis=0)


@dataclass
class PSMMResult:
    points: np.ndarray
    grid: CellGrid
    signed: DiscreteSignedMeasure
    projection: Projection
    counts: np.ndarray
    q: int

    @property
    def size(self) -> int:
        return len(self.points)


def output_size(m: int) -> int:
    return max(10 * m, 10**4)


def run_psmm(data, eps: float, rng: np.random.Generator, q: int | None = None, method: str = "auto") -> PSMMResult:
    x = np.asarray(data, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if len(x) == 0:
        raise ValueError("input dataset is empty")
    if not eps > 0:
        raise ValueError(f"privacy budget must be positive, got {eps!r}")
    n, d = x.shape
    grid = build_grid(d, math.ceil(eps * n))
    nu = perturb_counts(x, grid, eps, rng)
    proj = project_to_probability(nu, grid, method)
    q = output_size(grid.m) if q is None else q
    counts = apportion(proj.measure.weights, q)
    return PSMMResult(np.repeat(grid.anchors(), counts, axis=0), grid, nu, proj, counts, q)
