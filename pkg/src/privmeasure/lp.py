"""Linear programming: a dense two-phase simplex and a network-flow backend.

``solve`` minimizes ``c @ x`` subject to per-row relations ``A x (<=|>=|=) b``
and ``x >= 0``.  The default method is a dense tableau simplex with Bland's
anti-cycling rule, which is deterministic and returns exact vertices; it is
meant for the small programs used as test oracles and for the projection of
small signed measures.  Larger programs can be routed to HiGHS through
``method="highs"``.

``min_cost_flow`` solves integer transshipment problems (the projection of
integer-count measures on a grid) with OR-tools.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-10

LE, GE, EQ = "<=", ">=", "="
_RELATIONS = {LE, GE, EQ}


class LPError(RuntimeError):
    """Raised when the solver cannot finish (iteration cap, numerical trouble)."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class LinearProgram:
    """``min c @ x`` s.t. ``A[i] @ x  relations[i]  b[i]``, ``x >= 0``."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    relations: list[str]

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=np.float64).reshape(-1)
        self.A = np.asarray(self.A, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if self.A.ndim != 2:
            self.A = self.A.reshape(len(self.b), len(self.c))
        m, n = self.A.shape
        if n != len(self.c) or m != len(self.b):
            raise ValueError(
                f"inconsistent dimensions: A is {self.A.shape}, c has {len(self.c)}, b has {len(self.b)}"
            )
        if isinstance(self.relations, str):
            self.relations = [self.relations] * m
        self.relations = list(self.relations)
        if len(self.relations) != m or not set(self.relations) <= _RELATIONS:
            raise ValueError(f"need one relation from {_RELATIONS} per row")
        for name, arr in (("c", self.c), ("A", self.A), ("b", self.b)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")

    @classmethod
    def from_triplets(cls, c, rows, cols, vals, b, relations) -> "LinearProgram":
        c = np.asarray(c, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        A = np.zeros((len(b), len(c)))
        np.add.at(A, (np.asarray(rows), np.asarray(cols)), np.asarray(vals, dtype=np.float64))
        return cls(c, A, b, relations)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def residuals(self, x) -> np.ndarray:
        """Signed constraint violations (positive means violated)."""
        ax = self.A @ np.asarray(x, dtype=np.float64)
        out = np.empty_like(ax)
        for i, rel in enumerate(self.relations):
            if rel == LE:
                out[i] = ax[i] - self.b[i]
            elif rel == GE:
                out[i] = self.b[i] - ax[i]
            else:
                out[i] = abs(ax[i] - self.b[i])
        return out


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: float | None
    iterations: int = 0
    basis: list[int] = field(default_factory=list)
    pivots: list[tuple[int, int]] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    def __init__(self, T: np.ndarray, basis: list[int], tol: float, record: list):
        self.T = T
        self.basis = basis
        self.tol = tol
        self.record = record

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row] /= T[row, col]
        factor = T[:, col].copy()
        factor[row] = 0.0
        T -= np.outer(factor, T[row])
        T[:, col] = 0.0
        T[row, col] = 1.0
        self.basis[row] = col
        self.record.append((row, col))

    def run(self, allowed: np.ndarray, max_iter: int, counter: list[int]) -> str:
        """Bland-rule iterations on the objective held in the last row."""
        T, m = self.T, len(self.basis)
        while True:
            reduced = T[m, :-1]
            candidates = np.flatnonzero((reduced < -self.tol) & allowed)
            if candidates.size == 0:
                return "optimal"
            if counter[0] >= max_iter:
                raise LPError(
                    f"simplex iteration cap {max_iter} exceeded",
                    {"basis": list(self.basis), "iterations": counter[0]},
                )
            col = int(candidates[0])
            column = T[:m, col]
            pos = column > PIVOT_TOL
            if not pos.any():
                return "unbounded"
            ratios = np.full(m, np.inf)
            ratios[pos] = T[:m, -1][pos] / column[pos]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + self.tol * max(1.0, abs(best)))
            row = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(row, col)
            counter[0] += 1


def _simplex(lp: LinearProgram, tol: float, max_iter: int | None) -> LPResult:
    A = lp.A.copy()
    b = lp.b.copy()
    rel = list(lp.relations)
    m, n = A.shape
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1.0
            b[i] *= -1.0
            rel[i] = {LE: GE, GE: LE, EQ: EQ}[rel[i]]

    n_slack = sum(r != EQ for r in rel)
    n_art = sum(r != LE for r in rel)
    N = n + n_slack + n_art
    T = np.zeros((m + 1, N + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    basis = [0] * m
    art_cols = []
    s = n
    a = n + n_slack
    for i, r in enumerate(rel):
        if r == LE:
            T[i, s] = 1.0
            basis[i] = s
            s += 1
        elif r == GE:
            T[i, s] = -1.0
            s += 1
            T[i, a] = 1.0
            basis[i] = a
            art_cols.append(a)
            a += 1
        else:
            T[i, a] = 1.0
            basis[i] = a
            art_cols.append(a)
            a += 1

    if max_iter is None:
        max_iter = 50 * (m + N) + 1000
    counter = [0]
    record: list[tuple[int, int]] = []
    tab = _Tableau(T, basis, tol, record)
    is_art = np.zeros(N, dtype=bool)
    is_art[art_cols] = True

    if art_cols:
        # phase 1: minimize the sum of artificials
        T[m, :] = 0.0
        T[m, art_cols] = 1.0
        for i in range(m):
            if is_art[basis[i]]:
                T[m] -= T[i]
        tab.run(np.ones(N, dtype=bool), max_iter, counter)
        infeasibility = -T[m, -1]
        scale = max(1.0, float(np.abs(b).max(initial=0.0)))
        if infeasibility > tol * scale * 10:
            return LPResult("infeasible", None, None, counter[0], list(basis), record)
        # drive remaining artificials out of the basis
        keep = []
        for i in range(m):
            if is_art[basis[i]]:
                row = T[i, :N].copy()
                row[is_art] = 0.0
                nz = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if nz.size:
                    tab.pivot(i, int(nz[0]))
                    keep.append(i)
                # otherwise the row is redundant and dropped below
            else:
                keep.append(i)
        if len(keep) < m:
            T = np.vstack([T[keep], T[m:]])
            basis = [basis[i] for i in keep]
            tab.T, tab.basis = T, basis
            m = len(basis)

    # phase 2
    T[m, :] = 0.0
    T[m, :n] = lp.c
    for i in range(m):
        cb = T[m, basis[i]]
        if cb != 0.0:
            T[m] -= cb * T[i]
    status = tab.run(~is_art, max_iter, counter)
    if status == "unbounded":
        return LPResult("unbounded", None, None, counter[0], list(basis), record)
    x = np.zeros(N)
    for i, j in enumerate(basis):
        x[j] = T[i, -1]
    x = np.maximum(x[:n], 0.0)
    return LPResult("optimal", x, float(lp.c @ x), counter[0], list(basis), record)


def _highs(lp: LinearProgram) -> LPResult:
    from scipy.optimize import linprog

    rel = np.asarray(lp.relations)
    le, ge, eq = rel == LE, rel == GE, rel == EQ
    A_ub = np.vstack([lp.A[le], -lp.A[ge]])
    b_ub = np.concatenate([lp.b[le], -lp.b[ge]])
    res = linprog(
        lp.c,
        A_ub=A_ub if len(b_ub) else None,
        b_ub=b_ub if len(b_ub) else None,
        A_eq=lp.A[eq] if eq.any() else None,
        b_eq=lp.b[eq] if eq.any() else None,
        bounds=(0, None),
        method="highs",
    )
    if res.status == 0:
        return LPResult("optimal", res.x, float(res.fun), int(res.nit))
    if res.status == 2:
        return LPResult("infeasible", None, None, int(res.nit))
    if res.status == 3:
        return LPResult("unbounded", None, None, int(res.nit))
    raise LPError(f"HiGHS failed: {res.message}", {"status": res.status})


def solve(
    lp: LinearProgram,
    tol: float = 1e-9,
    max_iter: int | None = None,
    method: str = "simplex",
) -> LPResult:
    """Solve ``lp``; ``method`` is ``"simplex"`` (default) or ``"highs"``."""
    if method == "simplex":
        return _simplex(lp, tol, max_iter)
    if method == "highs":
        return _highs(lp)
    raise ValueError(f"unknown LP method {method!r}")


def dual(lp: LinearProgram) -> LinearProgram:
    """Dual of a minimization program, written again as a minimization.

    Row relations ``>=``/``<=``/``=`` give dual variables of sign ``>=0`` /
    ``<=0`` / free; these are split into nonnegative parts.  At optimality the
    returned program's objective is minus the primal optimum.
    """
    m, n = lp.shape
    cols, signs = [], []
    for i, rel in enumerate(lp.relations):
        if rel == GE:
            cols.append(i), signs.append(1.0)
        elif rel == LE:
            cols.append(i), signs.append(-1.0)
        else:
            cols.extend([i, i]), signs.extend([1.0, -1.0])
    signs = np.asarray(signs)
    At = lp.A[cols].T * signs  # n x k
    bt = lp.b[cols] * signs
    # max bt @ y  s.t.  At y <= c, y >= 0   ==   min -bt @ y
    return LinearProgram(-bt, At, lp.c, [LE] * n)


@dataclass
class FlowResult:
    flow: np.ndarray
    cost: int


def min_cost_flow(tails, heads, costs, supplies, capacities=None) -> FlowResult:
    """Integer min-cost transshipment.

    ``supplies[v] > 0`` is a source, ``< 0`` a sink; the supplies must sum to
    zero.  Arcs without a capacity are effectively uncapacitated.
    """
    from ortools.graph.python import min_cost_flow as _mcf

    tails = np.asarray(tails, dtype=np.int64)
    heads = np.asarray(heads, dtype=np.int64)
    costs = np.asarray(costs, dtype=np.int64)
    supplies = np.asarray(supplies, dtype=np.int64)
    if supplies.sum() != 0:
        raise ValueError(f"supplies must balance, got net {int(supplies.sum())}")
    if capacities is None:
        capacities = np.full(len(tails), int(np.abs(supplies).sum()) // 2 + 1, dtype=np.int64)
    solver = _mcf.SimpleMinCostFlow()
    arcs = solver.add_arcs_with_capacity_and_unit_cost(tails, heads, np.asarray(capacities, dtype=np.int64), costs)
    solver.set_nodes_supplies(np.arange(len(supplies)), supplies)
    status = solver.solve()
    if status != solver.OPTIMAL:
        raise LPError(f"min-cost flow failed with status {status}", {"arcs": len(tails)})
    return FlowResult(solver.flows(arcs), int(solver.optimal_cost()))
