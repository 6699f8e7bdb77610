"""Acceptance criteria AC1 to AC13.

Each test prints one ``ACn PASS|FAIL`` line (also collected into the
terminal summary by ``conftest.py``) and then asserts the same verdict.
Run with ``pytest tests/test_acceptance.py -v``; the three rate sweeps
(AC9 to AC11) dominate the running time.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
from scipy.spatial import HalfspaceIntersection

from privmeasure import audit, bench
from privmeasure.dlaplace import DiscreteLaplace
from privmeasure.measures import DiscreteSignedMeasure
from privmeasure.metrics import d_bl, sup_distances, w1_lp
from privmeasure.partition import BinaryPartition
from privmeasure.pmm import CountTree, EmptySynthetic, enforce_consistency, flux, run_pmm
from privmeasure.psmm import project_to_probability

SEED = 20241018


def test_ac01_pmm_exact_audit(acceptance):
    t0 = time.perf_counter()
    rep = audit.audit_pmm(eps=1.0, window=40, depth=2, n=3, n_anchors=3)
    elapsed = time.perf_counter() - t0
    ok = rep.max_log_ratio <= 1 + 1e-9 and elapsed < 60 and rep.sigmas[:3] == [3.0, 3.0, 3.0]
    assert acceptance(
        "AC1", ok, f"max log-ratio {rep.max_log_ratio:.12f} over {rep.pairs} adjacent pairs, {elapsed:.2f}s"
    )


def test_ac02_psmm_exact_audit(acceptance):
    rep = audit.audit_psmm(eps=1.0, window=40, m=3, n=2)
    ok = rep.max_log_ratio <= 1 + 1e-9
    assert acceptance("AC2", ok, f"max log-ratio {rep.max_log_ratio:.12f} over {rep.pairs} adjacent pairs")


def _comparable(a0, a1, b0, b1):
    return ((a0 <= b0) & (a1 <= b1)) | ((a0 >= b0) & (a1 >= b1))


def test_ac03_consistency_fuzz(acceptance):
    rng = np.random.default_rng(SEED)
    violations = nodes = 0
    for _ in range(10_000):
        depth = int(rng.integers(0, 11))
        levels = [rng.integers(0, 10_001, size=2**j) for j in range(depth + 1)]
        noisy = CountTree(levels, "noisy")
        for policy in ("uniform", "proportional"):
            out = enforce_consistency(noisy, policy)
            for j in range(depth):
                parent, child = out.levels[j], out.levels[j + 1]
                c0, c1 = child[0::2], child[1::2]
                n0, n1 = levels[j + 1][0::2], levels[j + 1][1::2]
                bad = (c0 + c1 != parent) | (c0 < 0) | (c1 < 0) | ~_comparable(c0, c1, n0, n1)
                violations += int(bad.sum())
                nodes += len(parent)
            violations += int(out.levels[0][0] != levels[0][0])
    ok = violations == 0
    assert acceptance("AC3", ok, f"{violations} violations across {nodes} internal nodes, 10^4 trees x 2 policies")


def test_ac04_flux_oracle(acceptance):
    grid = np.array([(x, y) for x in range(41) for y in range(41)])
    mism = 0
    for b0 in range(13):
        for b1 in range(13):
            comp = grid[_comparable(grid[:, 0], grid[:, 1], b0, b1)]
            for a0 in range(13):
                for a1 in range(13):
                    brute = int(np.abs(comp - (a0, a1)).max(axis=1).min())
                    mism += int(flux((a0, a1), (b0, b1)) != brute)
    worked = flux((1, 9), (6, 7))
    ok = mism == 0 and worked == 2
    assert acceptance("AC4", ok, f"{mism} mismatches over 13^4 pairs; flux((1,9),(6,7)) = {worked}")


def _flux_vec(a0, a1, b0, b1):
    return np.where(_comparable(a0, a1, b0, b1), 0, np.minimum(np.abs(a0 - b0), np.abs(a1 - b1)))


def test_ac05_flux_noise_bound(acceptance):
    rng = np.random.default_rng(SEED + 5)
    true_viol = literal = nodes = runs = 0
    while runs < 1000:
        d = int(rng.integers(1, 4))
        n = int(rng.integers(20, 2001))
        eps = float(rng.choice([0.25, 0.5, 1.0, 2.0]))
        policy = ("uniform", "proportional")[runs % 2]
        x = rng.random((n, d))
        try:
            res = run_pmm(x, eps, rng, policy=policy)
        except EmptySynthetic:
            continue
        runs += 1
        for j in range(res.partition.depth):
            lam = res.noisy.noise[j + 1]
            bound = np.maximum(np.abs(lam[0::2]), np.abs(lam[1::2]))
            m0, m1 = res.consistent.levels[j + 1][0::2], res.consistent.levels[j + 1][1::2]
            t0, t1 = res.true.levels[j + 1][0::2], res.true.levels[j + 1][1::2]
            z0, z1 = res.noisy.levels[j + 1][0::2], res.noisy.levels[j + 1][1::2]
            true_viol += int((_flux_vec(t0, t1, m0, m1) > bound).sum())
            literal += int((_flux_vec(z0, z1, m0, m1) > bound).sum())
            nodes += len(m0)
    ok = true_viol == 0 and literal == 0
    assert acceptance(
        "AC5",
        ok,
        f"{true_viol} violations with true child counts, {literal} with noisy ones, {nodes} nodes in {runs} runs",
    )


def test_ac06_discrete_laplace(acceptance):
    sigmas = (0.25, 0.5, 1.0, 2.0, 8.0)
    mass_ok = True
    for s in sigmas:
        w = math.ceil(60 * s)
        total = math.fsum(DiscreteLaplace(s).pmf(np.arange(-w, w + 1)))
        mass_ok &= abs(total - 1) <= 1e-10
    var_ok = all(DiscreteLaplace(s).variance() < 2 * s * s for s in sigmas + (0.1, 4.0, 32.0, 1000.0))
    details = []
    emp_ok = True
    rng = np.random.default_rng(SEED + 6)
    for s in (0.5, 1.0, 3.0):
        lap = DiscreteLaplace(s)
        x = lap.sample(rng, size=10**6).astype(np.float64)
        p = lap.p
        v = 2 * p / (1 - p) ** 2
        z = np.arange(-math.ceil(80 * s), math.ceil(80 * s) + 1)
        m4 = math.fsum(z.astype(float) ** 4 * lap.pmf(z))
        se = math.sqrt((m4 - v * v) / len(x))
        zscore = (x.var() - v) / se
        emp_ok &= abs(zscore) <= 3
        details.append(f"sigma={s}: z={zscore:+.2f}")
    ok = mass_ok and var_ok and emp_ok
    assert acceptance("AC6", ok, f"mass ok={mass_ok}, variance<2sigma^2 ok={var_ok}, " + ", ".join(details))


def test_ac07_dbl_equals_w1(acceptance):
    rng = np.random.default_rng(SEED + 7)
    worst = 0.0
    for i in range(200):
        d = 1 + i % 3
        ka, kb = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        pts = rng.random((ka + kb, d))
        wa = np.concatenate([rng.dirichlet(np.ones(ka)), np.zeros(kb)])
        wb = np.concatenate([np.zeros(ka), rng.dirichlet(np.ones(kb))])
        mu, nu = DiscreteSignedMeasure(pts, wa), DiscreteSignedMeasure(pts, wb)
        exact = w1_lp(DiscreteSignedMeasure(pts[:ka], wa[:ka]), DiscreteSignedMeasure(pts[ka:], wb[ka:]))
        worst = max(worst, abs(d_bl(mu, nu) - exact))
    ok = worst <= 1e-6
    assert acceptance("AC7", ok, f"max |d_bl - w1_lp| = {worst:.2e} over 200 pairs, d in 1..3, support <= 12")


def _test_function_vertices(points):
    """Vertices of {f : |f_i - f_j| <= rho_ij, |f_i| <= 1}, the d_BL test-function polytope."""
    m = len(points)
    rho = sup_distances(points, points)
    rows = []
    for i in range(m):
        for j in range(m):
            if i != j:
                a = np.zeros(m)
                a[i], a[j] = 1.0, -1.0
                rows.append(np.append(a, -rho[i, j]))
        e = np.zeros(m)
        e[i] = 1.0
        rows.append(np.append(e, -1.0))
        rows.append(np.append(-e, -1.0))
    if m == 1:
        return np.array([[1.0], [-1.0]])
    hs = HalfspaceIntersection(np.array(rows), np.zeros(m))
    return hs.intersections


def test_ac08_projection_optimality(acceptance):
    rng = np.random.default_rng(SEED + 8)
    worst = math.inf
    cross = 0.0
    for _ in range(50):
        m = int(rng.integers(1, 7))
        d = int(rng.integers(1, 4))
        pts = rng.random((m, d))
        nu = DiscreteSignedMeasure(pts, rng.normal(1 / m, 0.4, size=m))
        proj = project_to_probability(nu, method="lp")
        tau = proj.measure.weights
        best = d_bl(nu, proj.measure)
        F = _test_function_vertices(pts)
        # the maximum of a linear function over the polytope sits at a vertex
        cross = max(cross, abs(float(np.max(F @ (nu.weights - tau))) - best))
        probes = np.concatenate(
            [
                rng.dirichlet(np.ones(m), size=5000),
                rng.dirichlet(np.full(m, 0.2), size=2500),
                np.abs(tau + rng.normal(0, 1e-3, size=(2500, m))),
            ]
        )
        probes /= probes.sum(axis=1, keepdims=True)
        values = np.max((nu.weights[None, :] - probes) @ F.T, axis=1)
        worst = min(worst, float(np.min(values - best)))
    ok = worst >= -1e-8 and cross <= 1e-8
    assert acceptance(
        "AC8",
        ok,
        f"min d_BL(nu,tau') - d_BL(nu,proj) = {worst:.3e} over 50 x 10^4 probes; vertex oracle gap {cross:.1e}",
    )


def _sweep(mechanism, d, exponents, trials):
    m = bench.ExperimentManifest(mechanism, d, 1.0, [2**e for e in exponents], trials=trials, seed=SEED)
    t0 = time.perf_counter()
    report = bench.rate(m)
    return report, time.perf_counter() - t0


def test_ac09_pmm_rate_d1(acceptance):
    report, elapsed = _sweep("pmm", 1, range(8, 15), 50)
    spread = report.d1_ratio_spread()
    ok = spread <= 4 and elapsed < 600
    ratios = ", ".join(f"{r['d1_ratio']:.3f}" for r in report.rows)
    assert acceptance("AC9", ok, f"W1*eps*n/log2^2(eps*n) spread {spread:.2f} ({ratios}), {elapsed:.0f}s")


def test_ac10_pmm_rate_d2(acceptance):
    report, elapsed = _sweep("pmm", 2, range(8, 15), 30)
    ok = -0.65 <= report.slope <= -0.35 and elapsed < 1800
    lo, hi = report.slope_ci
    assert acceptance("AC10", ok, f"slope {report.slope:.3f} (95% CI {lo:.3f}..{hi:.3f}), {elapsed:.0f}s")


def test_ac11_psmm_rate_d3(acceptance):
    report, elapsed = _sweep("psmm", 3, range(8, 14), 20)
    ok = -0.47 <= report.slope <= -0.20 and elapsed < 1800
    lo, hi = report.slope_ci
    assert acceptance("AC11", ok, f"slope {report.slope:.3f} (95% CI {lo:.3f}..{hi:.3f}), {elapsed:.0f}s")


def test_ac12_runtime_scaling(acceptance):
    rng = np.random.default_rng(SEED + 12)
    medians = []
    for e in range(14, 19):
        x = rng.random((2**e, 2))
        times = []
        for rep in range(9):
            t0 = time.perf_counter()
            run_pmm(x, 1.0, np.random.default_rng(rep))
            times.append(time.perf_counter() - t0)
        medians.append(float(np.median(times)))
    ratios = [b / a for a, b in zip(medians, medians[1:])]
    ok = max(ratios) <= 2.8
    assert acceptance("AC12", ok, "doubling ratios " + ", ".join(f"{r:.2f}" for r in ratios))


def _cli(args, cwd):
    env = dict(os.environ)
    env.pop("PRIVMEASURE_SEED", None)
    return subprocess.run([sys.executable, "-m", "privmeasure.cli", *args], cwd=cwd, env=env, capture_output=True)


def test_ac13_determinism(acceptance, tmp_path):
    runs = [
        ["generate", "--mechanism", "pmm", "--dim", "2", "--n", "3000", "--eps", "1", "--seed", "7", "--output", "pmm.csv"],
        ["generate", "--mechanism", "psmm", "--dim", "2", "--n", "800", "--eps", "1", "--seed", "7", "--output", "psmm.csv"],
        ["rate", "--mechanism", "pmm", "--dim", "2", "--eps", "1", "--n", "128", "256", "512", "1024",
         "--trials", "3", "--seed", "7", "--output", "rate"],
        ["audit", "--mechanism", "pmm", "--output", "audit.json"],
    ]
    dirs = [tmp_path / "first", tmp_path / "second"]
    for d in dirs:
        d.mkdir()
        for args in runs:
            assert _cli(args, d).returncode == 0
    names = sorted(p.name for p in dirs[0].iterdir())
    same = names == sorted(p.name for p in dirs[1].iterdir()) and all(
        (dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes() for f in names
    )
    assert acceptance("AC13", same, f"{len(names)} output files byte-identical across two invocations: {', '.join(names)}")
