"""Exact W1 and bounded-Lipschitz distances between discrete measures.

The ground metric is the sup-norm on ``[0, 1]^d`` throughout, and the
domain diameter is 1.

Small problems are solved as dense linear programs.  Large ones go through
``w1_grid_snapped``: both point sets are moved to the centers of a fine
uniform grid, where sup-norm distances are integers in cell units, and the
transport between the two count vectors is solved exactly by network
simplex on a sparse arc set whose optimality is certified by duality.

``Lattice`` describes a uniform grid of nodes and its king-move graph
(unit steps along any combination of axes), on which the sup-norm distance
between nodes is the hop count; the projection step of the signed measure
mechanism runs its flow on that graph.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import lp
from .measures import DiscreteSignedMeasure

MAX_LP_SUPPORT = 2000
# finest snapping grid: 2**MAX_SNAP_BITS cells per axis
MAX_SNAP_BITS = 24
# simplex for at most this many transport variables, HiGHS above
_SIMPLEX_VARS = 900
# sinks per spatial block in the optimality check
_BLOCK = 32


def sup_distances(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a[:, None, :] - b[None, :, :]).max(axis=2)


def _as_measure(mu) -> DiscreteSignedMeasure:
    if isinstance(mu, DiscreteSignedMeasure):
        return mu
    points, weights = mu
    return DiscreteSignedMeasure(points, weights)


def _require_probability(mu: DiscreteSignedMeasure, name: str) -> None:
    if not mu.is_probability(1e-9):
        raise ValueError(f"{name} is not a probability measure (mass {mu.mass!r})")


def w1_1d(mu, nu) -> float:
    """W1 on the line as the integral of ``|F_mu - F_nu|``."""
    mu, nu = _as_measure(mu), _as_measure(nu)
    _require_probability(mu, "mu")
    _require_probability(nu, "nu")
    if mu.dim != 1 or nu.dim != 1:
        raise ValueError("w1_1d needs one-dimensional measures")
    x = np.concatenate([mu.points[:, 0], nu.points[:, 0]])
    w = np.concatenate([mu.weights, -nu.weights])
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    cdf_gap = np.cumsum(w)[:-1]
    return float(np.sum(np.abs(cdf_gap) * np.diff(x)))


def w1_lp(mu, nu, method: str = "auto") -> float:
    """W1 as the optimal transport linear program over couplings."""
    mu, nu = _as_measure(mu), _as_measure(nu)
    _require_probability(mu, "mu")
    _require_probability(nu, "nu")
    k1, k2 = mu.size, nu.size
    if k1 + k2 > MAX_LP_SUPPORT:
        raise ValueError(
            f"combined support {k1 + k2} exceeds {MAX_LP_SUPPORT}; use w1_grid_snapped"
        )
    cost = sup_distances(mu.points, nu.points).reshape(-1)
    A = np.zeros((k1 + k2, k1 * k2))
    for a in range(k1):
        A[a, a * k2 : (a + 1) * k2] = 1.0
    for b in range(k2):
        A[k1 + b, b::k2] = 1.0
    rhs = np.concatenate([mu.weights, nu.weights])
    program = lp.LinearProgram(cost, A, rhs, [lp.EQ] * (k1 + k2))
    if method == "auto":
        method = "simplex" if k1 * k2 <= _SIMPLEX_VARS else "highs"
    res = lp.solve(program, method=method)
    if not res.optimal:
        raise lp.LPError(f"transport program ended with status {res.status}")
    return res.objective


def d_bl_program(mu: DiscreteSignedMeasure, nu: DiscreteSignedMeasure) -> tuple[lp.LinearProgram, float]:
    """Maximization over test-function values, as ``min`` over ``g = f + 1``.

    Returns the program and the constant to subtract from ``-objective``.
    """
    diff = mu.weights - nu.weights
    m = len(diff)
    rho = sup_distances(mu.points, mu.points)
    rows, cols, vals, rhs = [], [], [], []
    r = 0
    for i in range(m):
        for j in range(m):
            if i != j:
                rows += [r, r]
                cols += [i, j]
                vals += [1.0, -1.0]
                rhs.append(rho[i, j])
                r += 1
    for i in range(m):
        rows.append(r)
        cols.append(i)
        vals.append(1.0)
        rhs.append(2.0)
        r += 1
    program = lp.LinearProgram.from_triplets(-diff, rows, cols, vals, rhs, [lp.LE] * r)
    return program, float(diff.sum())


def d_bl(mu, nu, method: str = "simplex") -> float:
    """Bounded-Lipschitz distance between signed measures on a common support."""
    mu, nu = _as_measure(mu), _as_measure(nu)
    if mu.points.shape != nu.points.shape or not np.allclose(mu.points, nu.points, rtol=0, atol=1e-12):
        raise ValueError("d_bl needs both measures on the same support, in the same order")
    program, shift = d_bl_program(mu, nu)
    res = lp.solve(program, method=method)
    if not res.optimal:
        raise lp.LPError(f"bounded-Lipschitz program ended with status {res.status}")
    return max(0.0, -res.objective - shift)


@dataclass(frozen=True)
class Lattice:
    """Nodes ``origin + g * spacing`` for ``g`` in ``{0..size-1}^dim``."""

    dim: int
    size: int
    spacing: float
    origin: float

    @property
    def n_nodes(self) -> int:
        return self.size**self.dim

    def node_coords(self, flat=None) -> np.ndarray:
        if flat is None:
            flat = np.arange(self.n_nodes)
        g = np.array(np.unravel_index(np.asarray(flat), (self.size,) * self.dim)).T
        return self.origin + g * self.spacing

    def nearest(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Flat and per-axis index of the nearest node of each point."""
        x = np.asarray(points, dtype=np.float64)
        g = np.rint((x - self.origin) / self.spacing).astype(np.int64)
        np.clip(g, 0, self.size - 1, out=g)
        return self._flat(g), g

    def exact_nodes(self, points, tol: float = 1e-9) -> np.ndarray:
        flat, g = self.nearest(points)
        off = np.abs(np.asarray(points) - (self.origin + g * self.spacing)).max(initial=0.0)
        if off > tol * self.spacing:
            raise ValueError("points do not lie on the lattice")
        return flat

    def _flat(self, g: np.ndarray) -> np.ndarray:
        strides = self.size ** np.arange(self.dim - 1, -1, -1, dtype=np.int64)
        return g @ strides

    def king_arcs(self) -> tuple[np.ndarray, np.ndarray]:
        g = np.array(np.unravel_index(np.arange(self.n_nodes), (self.size,) * self.dim)).T
        tails, heads = [], []
        for off in itertools.product((-1, 0, 1), repeat=self.dim):
            if not any(off):
                continue
            nb = g + np.asarray(off)
            ok = np.all((nb >= 0) & (nb < self.size), axis=1)
            tails.append(np.flatnonzero(ok))
            heads.append(self._flat(nb[ok]))
        return np.concatenate(tails), np.concatenate(heads)


def grid_lattice(k: int, d: int) -> Lattice:
    """Centers of the uniform ``k^d`` grid."""
    return Lattice(d, k, 1.0 / k, 0.5 / k)


def _balanced_supplies(counts_a: np.ndarray, counts_b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scale two count vectors to the common total ``lcm(|a|, |b|)``."""
    na, nb = int(counts_a.sum()), int(counts_b.sum())
    if na <= 0 or nb <= 0:
        raise ValueError("both measures need positive total counts")
    L = na * nb // math.gcd(na, nb)
    return counts_a * (L // na), counts_b * (L // nb)


def _violated_pairs(src, snk, u, v, per_source: int, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Pairs with negative reduced cost ``c_ij - u_i - v_j``, a few per source.

    Sinks are grouped into spatial blocks of about ``_BLOCK`` points.  Every
    cost from source ``i`` into block ``B`` is at least the distance from
    ``i`` to the block's bounding box, so the block can only hold a
    violation for ``i`` if that distance is below ``u_i + max_B v``.
    """
    d = snk.shape[1]
    lo = snk.min(axis=0)
    span = snk.max(axis=0) - lo + 1
    side = max(1, math.ceil((float(np.prod(span.astype(np.float64))) * _BLOCK / len(snk)) ** (1.0 / d)))
    cell = (snk - lo) // side
    key = np.ravel_multi_index(cell.T, tuple(span // side + 1))
    order = np.argsort(key, kind="stable")
    _, starts = np.unique(key[order], return_index=True)
    bounds = np.append(starts, len(order))
    out_i, out_j, out_r = [], [], []
    for b in range(len(starts)):
        js = order[bounds[b] : bounds[b + 1]]
        pts = snk[js]
        gap = np.maximum(np.maximum(pts.min(axis=0) - src, src - pts.max(axis=0)), 0).max(axis=1)
        cand = np.flatnonzero(gap < u + v[js].max() - tol)
        if cand.size == 0:
            continue
        red = np.abs(src[cand][:, None, :] - pts[None, :, :]).max(axis=2) - u[cand][:, None] - v[js][None, :]
        ii, jj = np.nonzero(red < -tol)
        out_i.append(cand[ii])
        out_j.append(js[jj])
        out_r.append(red[ii, jj])
    if not out_i:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    fi, fj, red = np.concatenate(out_i), np.concatenate(out_j), np.concatenate(out_r)
    order = np.lexsort((red, fi))
    fi, fj = fi[order], fj[order]
    keep = np.arange(len(fi)) - np.searchsorted(fi, fi) < per_source
    return fi[keep], fj[keep]


def _pot():
    """POT, without probing for the deep-learning backends it never needs here."""
    for key in ("TENSORFLOW", "PYTORCH", "JAX", "CUPY"):
        os.environ.setdefault(f"POT_BACKEND_DISABLE_{key}", "1")
    import ot

    return ot


def _nearest_arcs(tree, queries, rows, k, flip: bool) -> tuple[np.ndarray, np.ndarray]:
    """Arcs from ``queries[rows]`` to their ``k[rows]`` nearest tree points."""
    I, J = [], []
    for kk in np.unique(k[rows]):
        sel = rows[k[rows] == kk]
        _, near = tree.query(queries[sel], k=int(kk), p=np.inf)
        near = np.asarray(near).reshape(-1)
        I.append(np.repeat(sel, kk))
        J.append(near)
    I = np.concatenate(I) if I else np.zeros(0, np.int64)
    J = np.concatenate(J) if J else np.zeros(0, np.int64)
    return (J, I) if flip else (I, J)


def grid_transport(coords, supply, neighbours: int = 8, tol: float = 1e-9) -> int:
    """Exact minimum transport cost between integer grid points, sup-norm cost.

    ``supply[i] > 0`` is mass leaving ``coords[i]``, ``< 0`` mass arriving;
    the supplies must balance.  The transport is solved by network simplex
    on arcs between nearby sources and sinks, plus a hub whose detour is
    dearer than any direct arc so that every restricted problem is feasible.
    While the hub carries flow, the neighbourhoods of the nodes using it are
    doubled.  After that the dual potentials are checked against every
    source/sink pair; pairs with negative reduced cost are added and the
    problem solved again.  When no pair violates, the restricted optimum is
    the optimum of the complete problem.
    """
    ot = _pot()
    from scipy.spatial import cKDTree

    coords = np.asarray(coords, dtype=np.int64)
    supply = np.asarray(supply, dtype=np.int64)
    if supply.sum() != 0:
        raise ValueError("supplies must balance")
    S, T = np.flatnonzero(supply > 0), np.flatnonzero(supply < 0)
    if S.size == 0:
        return 0
    src, snk = coords[S], coords[T]
    nS, nT = len(S), len(T)
    total = int(supply[S].sum())
    # normalized masses; the hub (last row and column) carries ``total`` more
    a = np.append(supply[S], total) / (2.0 * total)
    b = np.append(-supply[T], total) / (2.0 * total)
    detour = float(np.ptp(coords, axis=0).max() // 2 + 1)
    hub_i = np.concatenate([np.arange(nS), np.full(nT, nS), [nS]])
    hub_j = np.concatenate([np.full(nS, nT), np.arange(nT), [nT]])
    hub_c = np.concatenate([np.full(nS + nT, detour), [0.0]])

    snk_tree, src_tree = cKDTree(snk), cKDTree(src)
    k_src = np.full(nS, min(neighbours, nT))
    # each sink links to about twice as many nearby sources as its demand needs
    k_snk = np.minimum(nS, np.ceil(-2 * supply[T] / supply[S].mean()).astype(np.int64) + neighbours)
    I1, J1 = _nearest_arcs(snk_tree, src, np.arange(nS), k_src, flip=False)
    J2, I2 = _nearest_arcs(src_tree, snk, np.arange(nT), k_snk, flip=False)
    I, J = np.concatenate([I1, I2]), np.concatenate([J1, J2])
    while True:
        key = np.unique(I * nT + J)
        I, J = key // nT, key % nT
        cost = np.abs(src[I] - snk[J]).max(axis=1).astype(np.float64)
        M = sparse.coo_matrix(
            (np.concatenate([cost, hub_c]), (np.concatenate([I, hub_i]), np.concatenate([J, hub_j]))),
            shape=(nS + 1, nT + 1),
        )
        plan, log = ot.emd(a, b, M, numItermax=10**9, log=True)
        if log["warning"] is not None:
            raise lp.LPError(f"network simplex did not finish: {log['warning']}")
        plan = sparse.coo_matrix(plan)
        used = plan.data > 0
        via_src = np.unique(plan.row[used & (plan.col == nT) & (plan.row < nS)])
        via_snk = np.unique(plan.col[used & (plan.row == nS) & (plan.col < nT)])
        if via_src.size or via_snk.size:
            k_src[via_src] = np.minimum(2 * k_src[via_src], nT)
            k_snk[via_snk] = np.minimum(2 * k_snk[via_snk], nS)
            I1, J1 = _nearest_arcs(snk_tree, src, via_src, k_src, flip=False)
            J2, I2 = _nearest_arcs(src_tree, snk, via_snk, k_snk, flip=False)
            I, J = np.concatenate([I, I1, I2]), np.concatenate([J, J1, J2])
            continue
        vi, vj = _violated_pairs(src, snk, log["u"][:nS], log["v"][:nT], neighbours, tol)
        if vi.size == 0:
            return int(round(log["cost"] * 2 * total))
        I, J = np.concatenate([I, vi]), np.concatenate([J, vj])


@dataclass(frozen=True)
class SnappedW1:
    value: float
    error_bound: float
    cell_diam: float


def snap(points, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Flat grid-cell index and sup-norm displacement to the cell center."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    g = np.minimum((x * k).astype(np.int64), k - 1)
    disp = np.abs(x - (g + 0.5) / k).max(axis=1)
    strides = k ** np.arange(x.shape[1] - 1, -1, -1, dtype=np.int64)
    return g @ strides, disp


def w1_grid_snapped(data, synth, snap_depth: int) -> SnappedW1:
    """W1 after snapping both point sets to a uniform grid.

    The grid has ``2**ceil(snap_depth / d)`` cells per axis.  Snapping moves
    each point to its cell center, so the exact W1 differs from the snapped
    value by at most the sum of the two mean displacements, which is what
    ``error_bound`` reports (never more than one cell diameter).
    """
    a = np.asarray(data, dtype=np.float64)
    b = np.asarray(synth, dtype=np.float64)
    if a.ndim == 1:
        a, b = a.reshape(-1, 1), b.reshape(-1, 1)
    if a.shape[1] != b.shape[1]:
        raise ValueError("datasets have different dimensions")
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both datasets must be nonempty")
    d = a.shape[1]
    if snap_depth < 0 or -(-snap_depth // d) > MAX_SNAP_BITS:
        raise ValueError(f"snap depth {snap_depth} is outside 0..{MAX_SNAP_BITS * d} for d={d}")
    k = 2 ** (-(-snap_depth // d))
    ia, da = snap(a, k)
    ib, db = snap(b, k)
    cells, inv = np.unique(np.concatenate([ia, ib]), return_inverse=True)
    ca = np.bincount(inv[: len(ia)], minlength=len(cells))
    cb = np.bincount(inv[len(ia) :], minlength=len(cells))
    sa, sb = _balanced_supplies(ca, cb)
    coords = np.array(np.unravel_index(cells, (k,) * d)).T
    value = grid_transport(coords, sa - sb) / (k * int(sa.sum()))
    return SnappedW1(value, float(da.mean() + db.mean()), 1.0 / k)
