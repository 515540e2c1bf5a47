"""Monte Carlo learning curves over sequential trials."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import binom, norm

from . import _pl, kernel
from .config import ScenarioConfig
from .equilibrium import Solution, maximal_learning_prob, solve
from .errors import ConfigError
from .netform import has_infinite_observations
from .signals import SignalStructure

Z95 = float(norm.ppf(0.975))
CSV_HEADER = ("n", "estimate", "lo", "hi", "cond_estimate", "obs_freq")


def wilson(k, n, z: float = Z95):
    """Wilson score interval; arrays welcome.  Zero trials give the whole unit interval."""
    k = np.asarray(k, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    safe = np.maximum(n, 1.0)
    p = k / safe
    den = 1.0 + z * z / safe
    mid = (p + z * z / (2 * safe)) / den
    half = z * np.sqrt(p * (1 - p) / safe + z * z / (4 * safe * safe)) / den
    lo = np.where(n > 0, np.clip(mid - half, 0.0, 1.0), 0.0)
    hi = np.where(n > 0, np.clip(mid + half, 0.0, 1.0), 1.0)
    # guard against rounding pushing the estimate outside its interval
    lo = np.minimum(lo, p)
    hi = np.maximum(hi, p)
    return lo, hi


@dataclass(frozen=True)
class LearningCurve:
    trials: int
    seed: int
    counts: np.ndarray  # (N, 5) correct, observed, correct&observed, bench, correct&bench
    backend: str = "python"
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.counts.shape[0]

    @property
    def n(self) -> np.ndarray:
        return np.arange(1, self.N + 1)

    @property
    def estimate(self) -> np.ndarray:
        return self.counts[:, 0] / self.trials

    @property
    def interval(self):
        return wilson(self.counts[:, 0], self.trials)

    @property
    def obs_freq(self) -> np.ndarray:
        return self.counts[:, 1] / self.trials

    @property
    def cond_estimate(self) -> np.ndarray:
        obs = self.counts[:, 1]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(obs > 0, self.counts[:, 2] / np.maximum(obs, 1), np.nan)

    @property
    def cond_interval(self):
        return wilson(self.counts[:, 2], self.counts[:, 1])

    @property
    def bench_estimate(self) -> np.ndarray:
        """Accuracy among agents whose signal fell in the benchmark observation band |s| < s*."""
        b = self.counts[:, 3]
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(b > 0, self.counts[:, 4] / np.maximum(b, 1), np.nan)

    @property
    def bench_interval(self):
        return wilson(self.counts[:, 4], self.counts[:, 3])

    def last_decile(self) -> slice:
        return slice(self.N - max(1, self.N // 10), self.N)

    def last_decile_mean(self) -> float:
        return float(np.mean(self.estimate[self.last_decile()]))

    def to_csv(self) -> str:
        lo, hi = self.interval
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        cond = self.cond_estimate
        for i in range(self.N):
            w.writerow([
                i + 1, _fmt(self.estimate[i]), _fmt(lo[i]), _fmt(hi[i]),
                "" if math.isnan(cond[i]) else _fmt(cond[i]), _fmt(self.obs_freq[i]),
            ])
        return buf.getvalue()


def _fmt(x: float) -> str:
    # repr of a python float never uses locale separators
    return repr(round(float(x), 10))


@dataclass(frozen=True)
class TrialTrace:
    theta: int
    signals: np.ndarray
    observed: tuple[tuple[int, ...], ...]
    observed_actions: tuple[tuple[int, ...], ...]
    actions: np.ndarray
    paid: np.ndarray

    @property
    def correct(self) -> np.ndarray:
        return self.actions == self.theta


def _bench_cut(config: ScenarioConfig) -> float:
    regime = config.structure.classify(config.cost.base)
    return float(regime.s_star) if regime.strong else 1.0


def _solution(config: ScenarioConfig, solution: Optional[Solution]) -> Solution:
    if solution is None:
        return solve(config)
    if solution.N < config.N:
        raise ConfigError("cutoff table is shorter than the horizon")
    return solution


def run_trial(config: ScenarioConfig, solution: Optional[Solution] = None, trial: int = 0,
              backend: Optional[str] = None) -> TrialTrace:
    """Replay trial number ``trial`` of the stream keyed by ``config.seed``."""
    sol = _solution(config, solution)
    p = kernel.pack(sol, _bench_cut(config))
    theta, acts, ms, sig = kernel.run_recorded(p, config.seed, trial, backend)
    N = config.N
    acts, ms, sig = acts[:N].astype(np.int64), ms[:N], sig[:N]
    observed: list[tuple[int, ...]] = []
    for i in range(N):
        n = i + 1
        m = int(ms[i])
        if m == 0:
            observed.append(())
        elif sol.kind == "prefix":
            observed.append(tuple(range(1, m + 1)))
        elif sol.kind == "line":
            observed.append((int(sol.sources[i]),))
        else:
            # the chain: n-1 plus whatever n-1 had revealed to her
            observed.append((n - 1,) + observed[n - 2])
    obs_acts = tuple(tuple(int(acts[j - 1]) for j in o) for o in observed)
    if sol.kind == "chain":
        paid = np.array([config.cost(1) if m > 0 else 0.0 for m in ms])
    else:
        paid = np.array([config.cost(int(m)) for m in ms])
    return TrialTrace(theta, sig.copy(), tuple(observed), obs_acts, acts, paid)


def learning_curve(config: ScenarioConfig, solution: Optional[Solution] = None, threads: int = 1,
                   backend: Optional[str] = None) -> LearningCurve:
    """Estimate per-agent accuracy over ``config.T`` trials.  Thread count never changes the result."""
    sol = _solution(config, solution)
    p = kernel.pack(sol, _bench_cut(config))
    name = kernel.backend_name(backend)
    counts = kernel.run_counts(p, config.T, config.seed, threads, name)[: config.N]
    return LearningCurve(config.T, config.seed, counts, name, {"engine": sol.notes.get("engine", sol.kind)})


# --------------------------------------------------------------------------
# observation-first timing


def y_of_m(structure: SignalStructure, m: int) -> float:
    """Accuracy with own signal plus m independent signal-only actions."""
    if m < 0:
        raise ConfigError("m must be non-negative")
    d = structure.density
    p = float(structure.cdf(0, 0.0))  # each action is correct with this probability
    q = 1.0 - p
    if m == 0 or q == 0.0 or p == q:
        return p if m == 0 or p == q else 1.0
    k = np.arange(m + 1)
    lam = (2 * k - m) * math.log(p / q)  # llr of seeing k ones
    t = _pl.threshold(d, lam)
    # theta=0: correct below t; theta=1: correct above t
    v0 = binom.pmf(k, m, q) * _pl.cdf(d, 0, t)
    v1 = binom.pmf(k, m, p) * _pl.sf(d, 1, t)
    return float(0.5 * (np.sum(v0) + np.sum(v1)))


def observation_first_feasible(config: ScenarioConfig) -> Optional[int]:
    """Smallest agent index at which paying to observe is worthwhile ex ante, or None."""
    if config.timing != "observation_first":
        raise ConfigError("feasibility check needs observation_first timing")
    base = float(config.structure.cdf(0, 0.0))
    cache: dict[int, float] = {}
    for n in range(1, config.N + 1):
        k = config.capacity(n)
        for m in config.cost.candidates(k):
            if m not in cache:
                cache[m] = y_of_m(config.structure, m)
            if cache[m] - base >= config.cost(m):
                return n
    return None


# --------------------------------------------------------------------------
# learning benchmarks against a curve


@dataclass(frozen=True)
class EpsilonReport:
    passed: bool
    bound: float
    last_decile_min: float
    ci_width: float
    curve: LearningCurve


def epsilon_maximal_check(config: ScenarioConfig, epsilon: Optional[float] = None,
                          curve: Optional[LearningCurve] = None, threads: int = 1) -> EpsilonReport:
    """Is the last-decile minimum of the curve at least (1 - eps) P*(c) minus the CI width there?"""
    if not config.stochastic:
        raise ConfigError("epsilon check needs a stochastic block (epsilon and M)")
    eps = config.epsilon if epsilon is None else epsilon
    curve = curve or learning_curve(config, threads=threads)
    bound = (1.0 - eps) * maximal_learning_prob(config.structure, config.cost.base)
    sl = curve.last_decile()
    est = curve.estimate[sl]
    lo, hi = curve.interval
    i = int(np.argmin(est))
    width = float(hi[sl][i] - lo[sl][i])
    low = float(est[i])
    return EpsilonReport(low >= bound - width, bound, low, width, curve)


@dataclass(frozen=True)
class MaximalFlag:
    status: str  # "within tolerance" or "failed (...)"
    target: float
    observed: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.status == "within tolerance"

    def __str__(self) -> str:
        return f"maximal: {self.status}"


def maximal_flag(config: ScenarioConfig, curve: LearningCurve, tolerance: float = 0.02) -> MaximalFlag:
    """Compare the last-decile accuracy with P*(c(1)).

    Convergence to the target is slow (square-root growth reaches only about
    20 observations by agent 400), hence the loose default tolerance.
    """
    target = maximal_learning_prob(config.structure, config.cost.base)
    got = curve.last_decile_mean()
    lo, hi = curve.interval
    sl = curve.last_decile()
    slack = tolerance + float(np.max(hi[sl] - lo[sl]))
    if got >= target - slack:
        status = "within tolerance"
    elif not has_infinite_observations(config.capacity):
        status = "failed (finite observations)"
    else:
        status = "failed (below target)"
    return MaximalFlag(status, target, got, slack)


def monotone_within_ci(curve: LearningCurve) -> bool:
    """No later estimate sits significantly below an earlier one (Wilson bounds overlap)."""
    lo, hi = curve.interval
    run_max_lo = np.maximum.accumulate(lo)
    return bool(np.all(hi >= run_max_lo))
