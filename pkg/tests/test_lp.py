import itertools

import numpy as np
import pytest

from privmeasure import lp


def _random_lp(rng, m, n):
    A = rng.integers(-3, 4, size=(m, n)).astype(float)
    x0 = rng.random(n) * 2
    rel = [rng.choice([lp.LE, lp.GE, lp.EQ], p=[0.5, 0.3, 0.2]) for _ in range(m)]
    slack = rng.random(m)
    b = A @ x0 + np.array([s if r == lp.LE else (-s if r == lp.GE else 0.0) for r, s in zip(rel, slack)])
    c = rng.random(n) + 0.1  # positive costs keep the program bounded over x >= 0
    return lp.LinearProgram(c, A, b, rel)


def _vertex_enumeration(program):
    """Best basic feasible point: every choice of n tight constraints among rows and bounds."""
    m, n = program.shape
    rows = [program.A[i] for i in range(m)] + list(np.eye(n))
    rhs = list(program.b) + [0.0] * n
    best = np.inf
    for subset in itertools.combinations(range(m + n), n):
        M = np.array([rows[i] for i in subset])
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, np.array([rhs[i] for i in subset]))
        if np.all(x >= -1e-9) and np.all(program.residuals(x) <= 1e-9):
            best = min(best, float(program.c @ x))
    return best


def test_single_bound():
    res = lp.solve(lp.LinearProgram([1.0], [[1.0]], [3.0], [lp.GE]))
    assert res.optimal and res.x[0] == pytest.approx(3) and res.objective == pytest.approx(3)


def test_one_cell_projection_program():
    from privmeasure.measures import DiscreteSignedMeasure
    from privmeasure.psmm import projection_program

    res = lp.solve(projection_program(DiscreteSignedMeasure([[0.5]], [1.2])))
    assert res.optimal
    assert res.objective == pytest.approx(0.4, abs=1e-12)
    assert res.x[-1] == pytest.approx(1.0, abs=1e-12)
    assert res.x[-2] == pytest.approx(0.2, abs=1e-12)


def test_matches_vertex_enumeration():
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 60:
        m, n = int(rng.integers(1, 6)), int(rng.integers(1, 7))
        program = _random_lp(rng, m, n)
        res = lp.solve(program)
        assert res.status == "optimal"
        assert np.all(res.x >= -1e-9) and np.all(program.residuals(res.x) <= 1e-9)
        assert res.objective == pytest.approx(_vertex_enumeration(program), abs=1e-8)
        checked += 1


def test_strong_duality():
    rng = np.random.default_rng(4)
    for _ in range(40):
        program = _random_lp(rng, int(rng.integers(1, 6)), int(rng.integers(1, 8)))
        primal = lp.solve(program)
        d = lp.solve(lp.dual(program))
        assert d.status == "optimal"
        assert primal.objective == pytest.approx(-d.objective, abs=1e-8)


def test_highs_agrees():
    rng = np.random.default_rng(8)
    for _ in range(20):
        program = _random_lp(rng, 4, 6)
        assert lp.solve(program).objective == pytest.approx(lp.solve(program, method="highs").objective, abs=1e-8)


def test_infeasible_and_unbounded():
    assert lp.solve(lp.LinearProgram([1.0], [[1.0], [1.0]], [1.0, 2.0], [lp.LE, lp.GE])).status == "infeasible"
    assert lp.solve(lp.LinearProgram([-1.0], [[1.0]], [1.0], [lp.GE])).status == "unbounded"


def test_deterministic_pivots():
    program = _random_lp(np.random.default_rng(1), 5, 7)
    a, b = lp.solve(program), lp.solve(program)
    assert a.pivots == b.pivots and np.array_equal(a.x, b.x)


def test_iteration_cap_reports_diagnostics():
    program = _random_lp(np.random.default_rng(2), 5, 7)
    with pytest.raises(lp.LPError) as info:
        lp.solve(program, max_iter=1)
    assert info.value.diagnostics


def test_rejects_malformed():
    with pytest.raises(ValueError):
        lp.LinearProgram([1.0, 2.0], [[1.0]], [1.0], [lp.LE])
    with pytest.raises(ValueError):
        lp.LinearProgram([np.inf], [[1.0]], [1.0], [lp.LE])
    with pytest.raises(ValueError):
        lp.LinearProgram([1.0], [[1.0]], [1.0], ["<>"])
    with pytest.raises(ValueError):
        lp.solve(lp.LinearProgram([1.0], [[1.0]], [1.0], [lp.LE]), method="magic")


def test_min_cost_flow():
    # two sources, two sinks, one crossing arc is cheaper
    res = lp.min_cost_flow([0, 0, 1, 1], [2, 3, 2, 3], [1, 4, 2, 1], [3, 2, -3, -2])
    assert res.cost == 3 * 1 + 2 * 1
    with pytest.raises(ValueError):
        lp.min_cost_flow([0], [1], [1], [1, 0])
