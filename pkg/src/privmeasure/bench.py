"""Accuracy sweeps: run a mechanism many times and fit the W1 decay rate."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .measures import empirical
from .metrics import w1_1d, w1_grid_snapped
from .pmm import POLICIES, EmptySynthetic, accuracy_bound, run_pmm
from .psmm import run_psmm

MECHANISMS = ("pmm", "psmm")
# a sweep is abandoned once more than this share of the trials at one n fail
MAX_FAILURE_RATE = 0.2


class SweepAborted(RuntimeError):
    pass


@dataclass
class ExperimentManifest:
    mechanism: str
    dim: int
    eps: float
    n: list[int]
    trials: int = 1
    seed: int = 0
    policy: str = "uniform"
    depth: int | None = None
    snap_depth: int | None = None
    output: str | None = None

    def __post_init__(self) -> None:
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}; choose from {MECHANISMS}")
        if isinstance(self.n, int):
            self.n = [self.n]
        self.n = [int(v) for v in self.n]
        self.dim, self.trials, self.seed = int(self.dim), int(self.trials), int(self.seed)
        self.eps = float(self.eps)
        if self.dim < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dim}")
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise ValueError(f"privacy budget must be positive and finite, got {self.eps!r}")
        if not self.n or min(self.n) < 1:
            raise ValueError(f"dataset sizes must be >= 1, got {self.n}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown consistency policy {self.policy!r}; choose from {POLICIES}")
        if self.depth is not None and self.depth < 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")
        if self.snap_depth is not None and self.snap_depth < 0:
            raise ValueError(f"snap depth must be >= 0, got {self.snap_depth}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentManifest":
        names = cls.__dataclass_fields__.keys()
        return cls(**{k: v for k, v in raw.items() if k in names})


def trial_streams(seed: int, n: int, trial: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for the source data and the mechanism noise."""
    ss = np.random.SeedSequence(seed, spawn_key=(n, trial))
    data_ss, mech_ss = ss.spawn(2)
    return np.random.default_rng(data_ss), np.random.default_rng(mech_ss)


def source_data(rng: np.random.Generator, n: int, d: int, pool: np.ndarray | None = None) -> np.ndarray:
    """``n`` uniform points, or ``n`` rows drawn from ``pool`` when one is given."""
    if pool is None:
        return rng.random((n, d))
    idx = rng.choice(len(pool), size=n, replace=n > len(pool))
    return pool[idx]


def run_mechanism(manifest: ExperimentManifest, data: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, dict]:
    """One release; returns the synthetic points and the parameters that produced them."""
    n, d = data.shape
    if manifest.mechanism == "pmm":
        res = run_pmm(data, manifest.eps, rng, policy=manifest.policy, depth=manifest.depth)
        meta = {
            "depth": res.partition.depth,
            "schedule": list(res.schedule.sigmas),
            "policy": res.policy,
            "theory_bound": accuracy_bound(res.schedule, res.partition, n),
        }
    else:
        res = run_psmm(data, manifest.eps, rng)
        meta = {
            "depth": d * math.ceil(math.log2(res.grid.k)) if res.grid.k > 1 else 0,
            "k": res.grid.k,
            "m": res.grid.m,
            "q": res.q,
            "projection_distance": res.projection.distance,
            # the general bound involves a supremum over datasets; not computable
            "theory_bound": None,
        }
    return res.points, meta


def evaluate(data: np.ndarray, synth: np.ndarray, snap_depth: int) -> tuple[float, float]:
    """W1 and the error bound of the method used (zero for the exact 1-D formula)."""
    if data.shape[1] == 1:
        return w1_1d(empirical(data), empirical(synth)), 0.0
    s = w1_grid_snapped(data, synth, snap_depth)
    return s.value, s.error_bound


@dataclass
class TrialResult:
    n: int
    trial: int
    w1: float | None = None
    snap_bound: float | None = None
    theory_bound: float | None = None
    synthetic_size: int | None = None
    failure: str | None = None

    @property
    def corrected(self) -> float | None:
        return None if self.w1 is None else self.w1 - self.snap_bound


def run_trial(manifest: ExperimentManifest, n: int, trial: int, pool: np.ndarray | None = None) -> TrialResult:
    data_rng, mech_rng = trial_streams(manifest.seed, n, trial)
    data = source_data(data_rng, n, manifest.dim, pool)
    try:
        synth, meta = run_mechanism(manifest, data, mech_rng)
    except EmptySynthetic as exc:
        return TrialResult(n, trial, failure=str(exc))
    snap_depth = manifest.snap_depth if manifest.snap_depth is not None else meta["depth"] + 4
    w1, bound = evaluate(data, synth, snap_depth)
    return TrialResult(n, trial, w1, bound, meta["theory_bound"], len(synth))


def _run_trial_args(args):
    return run_trial(*args)


@dataclass
class RateReport:
    mechanism: str
    dim: int
    eps: float
    rows: list[dict]
    slope: float
    slope_ci: tuple[float, float]
    intercept: float
    trials: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "dim": self.dim,
            "eps": self.eps,
            "slope": self.slope,
            "slope_ci": list(self.slope_ci),
            "intercept": self.intercept,
            "per_n": self.rows,
            "trials": self.trials,
        }

    def table(self) -> tuple[list[str], list[list]]:
        header = [
            "n", "eps_n", "mean_w1", "stderr_w1", "mean_raw_w1",
            "mean_snap_bound", "completed", "failures", "d1_ratio",
        ]
        return header, [[r[h] for h in header] for r in self.rows]

    def d1_ratio_spread(self) -> float:
        vals = [r["d1_ratio"] for r in self.rows]
        return max(vals) / min(vals)


def fit_slope(x, y, level: float = 0.95) -> tuple[float, float, tuple[float, float]]:
    """OLS slope, intercept and a two-sided t confidence interval for the slope."""
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    fit = stats.linregress(x, y)
    if len(x) > 2:
        half = stats.t.ppf(0.5 + level / 2, len(x) - 2) * fit.stderr
    else:
        half = math.inf
    return float(fit.slope), float(fit.intercept), (float(fit.slope - half), float(fit.slope + half))


def summarize(manifest: ExperimentManifest, results: list[TrialResult]) -> RateReport:
    rows, xs, ys = [], [], []
    for n in manifest.n:
        mine = [r for r in results if r.n == n]
        ok = [r for r in mine if r.failure is None]
        failed = len(mine) - len(ok)
        if failed > MAX_FAILURE_RATE * len(mine):
            raise SweepAborted(f"{failed} of {len(mine)} trials at n={n} produced no synthetic data")
        vals = np.array([r.corrected for r in ok])
        mean = float(vals.mean())
        stderr = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        en = manifest.eps * n
        if mean <= 0:
            raise ValueError(f"mean W1 at n={n} is not positive after removing the snapping error; use a finer snap depth")
        rows.append(
            {
                "n": n,
                "eps_n": en,
                "mean_w1": mean,
                "stderr_w1": stderr,
                "mean_raw_w1": float(np.mean([r.w1 for r in ok])),
                "mean_snap_bound": float(np.mean([r.snap_bound for r in ok])),
                "completed": len(ok),
                "failures": failed,
                "d1_ratio": mean * en / math.log2(en) ** 2 if en > 1 else None,
            }
        )
        xs.append(math.log2(en))
        ys.append(math.log2(mean))
    slope, intercept, ci = fit_slope(xs, ys)
    return RateReport(
        manifest.mechanism,
        manifest.dim,
        manifest.eps,
        rows,
        slope,
        ci,
        intercept,
        [asdict(r) for r in results],
    )


def rate(manifest: ExperimentManifest, pool: np.ndarray | None = None, workers: int | None = None) -> RateReport:
    """Sweep every ``n`` of the manifest and fit ``log2 W1`` against ``log2(eps n)``.

    Trials run in a process pool when ``workers > 1``; the report lists them
    by ``n`` and trial index whatever the completion order.
    """
    if len(set(manifest.n)) < 4:
        raise ValueError(f"a rate fit needs at least 4 distinct n values, got {sorted(set(manifest.n))}")
    if pool is not None and pool.shape[1] != manifest.dim:
        raise ValueError(f"input data has {pool.shape[1]} columns but dim is {manifest.dim}")
    jobs = [(manifest, n, t, pool) for n in manifest.n for t in range(manifest.trials)]
    workers = workers if workers is not None else (os.cpu_count() or 1)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_trial_args, jobs))
    else:
        results = [run_trial(*job) for job in jobs]
    return summarize(manifest, results)
