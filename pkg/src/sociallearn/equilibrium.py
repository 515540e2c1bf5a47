"""Equilibrium cutoffs and exact learning probabilities.

Three engines cover the supported scenarios:

* the line engine: every observer sees one earlier agent, so the observed
  information is a single action whose accuracy is known from the recursion;
* the prefix engine: observers see agents 1..m; the joint law of the first
  ``lmax`` actions is enumerated exactly (2**lmax histories);
* forward dynamics: the law of a Markov log-likelihood ratio (the public
  log-odds when everybody sees the whole past, or the chain revealed by
  diffusion on the line) is propagated atom by atom, falling back to a fixed
  grid when the atom count explodes.

Cutoffs are produced in one forward pass.  Agent n only ever looks at
agents before n, so her best response depends only on rules already fixed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _pl
from ._rules import AgentRule, Branch, action_probs, choose_regions
from .beliefs import LLRDist, StrategyProfile
from .config import CostModel, ScenarioConfig
from .errors import ConfigError, GridOverflowError, RegimeError, SizeError, UnsupportedPolicyError
from .netform import ImmediateOne, Policy
from .signals import LinearUnbounded, SignalStructure, Strength, bisect

EXACT_PREFIX_LIMIT = 20
FIXED_POINT_TOL = 1e-12


# --------------------------------------------------------------------------
# benchmarks


def maximal_learning_prob(structure: SignalStructure, c: float) -> float:
    """P*(c): accuracy of an agent who pays c to learn the state whenever it is worth it."""
    regime = structure.classify(c)
    if not regime.strong:
        return 1.0
    if structure.symmetric:
        return float(structure.cdf(0, regime.s_star))
    return 0.5 * float(structure.cdf(0, regime.s_star)) + 0.5 * (1.0 - float(structure.cdf(1, regime.s_lower_star)))


def herding_delta(structure: SignalStructure) -> float:
    if not structure.bounded:
        raise RegimeError("herding bound needs bounded private beliefs")
    lo, hi = structure.beta_lower, structure.beta_upper
    return lo * (1 - hi) / (-lo + hi + 2 * lo * (1 - hi))


def herding_bound(structure: SignalStructure) -> float:
    """max(Delta, 1 - Delta): ceiling on limit accuracy with bounded beliefs and free observation."""
    d = herding_delta(structure)
    return max(d, 1.0 - d)


@dataclass(frozen=True)
class WelfareReport:
    strength_a: float
    strength_b: float
    limit_a: float
    limit_b: float
    flag: bool

    @property
    def ordering(self) -> str:
        if self.limit_a > self.limit_b:
            return "A"
        if self.limit_b > self.limit_a:
            return "B"
        return "equal"


def strength(structure: SignalStructure, c: float) -> float:
    """Probability mass (under state 0) of signals strong enough to skip observation."""
    regime = structure.classify(c)
    if not regime.strong:
        return 0.0
    return float(structure.cdf(0, -regime.s_star) + 1.0 - structure.cdf(0, regime.s_star))


def welfare_compare(a: SignalStructure, b: SignalStructure, c: float, c_b: Optional[float] = None) -> WelfareReport:
    """Compare limit accuracy F0(s*) under infinite observations.

    The flag marks pairs where the structure with strictly higher strength
    has the strictly lower limit.
    """
    c_b = c if c_b is None else c_b
    for s, cc in ((a, c), (b, c_b)):
        if not s.classify(cc).strong:
            raise RegimeError("welfare comparison needs strong beliefs for both structures")
    sa, sb = strength(a, c), strength(b, c_b)
    la, lb = maximal_learning_prob(a, c), maximal_learning_prob(b, c_b)
    flag = (sa > sb and la < lb) or (sb > sa and lb < la)
    return WelfareReport(sa, sb, la, lb, flag)


# --------------------------------------------------------------------------
# shared per-agent machinery


class _Info:
    """An LLR distribution with its per-atom thresholds cached."""

    __slots__ = ("dist", "tau")

    def __init__(self, dist: LLRDist, d: _pl.PLDensity):
        self.dist = dist
        self.tau = _pl.threshold(d, dist.lam)


@dataclass
class AgentStats:
    correct0: float  # P(correct | theta = 0)
    correct1: float
    observe: float
    correct_obs: float  # P(correct and observe)

    @property
    def correct(self) -> float:
        return 0.5 * (self.correct0 + self.correct1)


def agent_stats(d: _pl.PLDensity, rule: AgentRule, info_of_m: Callable[[int], _Info]) -> AgentStats:
    c = [0.0, 0.0]
    obs = 0.0
    cobs = 0.0
    for br in rule.branches:
        for lo, hi, m in br.regions():
            for state in (0, 1):
                if m == 0:
                    right = float(_pl.mass(d, state, lo, hi) if state else _pl.mass(d, state, -hi, -lo))
                else:
                    inf = info_of_m(m)
                    dist = inf.dist
                    tp = np.clip(inf.tau, lo, hi)
                    tn = np.clip(inf.tau, -hi, -lo)
                    if state:
                        mass = _pl.mass(d, 1, tp, hi) + _pl.mass(d, 1, tn, -lo)
                        right = float(np.dot(dist.p1, mass))
                    else:
                        mass = _pl.mass(d, 0, lo, tp) + _pl.mass(d, 0, -hi, tn)
                        right = float(np.dot(dist.p0, mass))
                    pr = float(_pl.mass(d, state, lo, hi) + _pl.mass(d, state, -hi, -lo))
                    obs += 0.5 * br.weight * pr
                    cobs += 0.5 * br.weight * right
                c[state] += br.weight * right
    return AgentStats(c[0], c[1], obs, cobs)


def build_rule(
    structure: SignalStructure,
    cost: CostModel,
    timing: str,
    caps: list[tuple[float, int]],
    info_of_m: Callable[[int], _Info],
) -> AgentRule:
    """Best response for one agent.  ``caps`` lists (branch weight, capacity)."""
    branches = []
    for w, k in caps:
        if w <= 0:
            continue
        if k <= 0:
            his, ms = (1.0,), (0,)
        elif timing == "signal_first":
            cands = []
            for m in cost.candidates(k):
                dist = info_of_m(m).dist
                cands.append((m, cost(m), lambda s, dist=dist: dist.gain(structure, s)))
            his, ms = choose_regions(cands)
        else:
            best_m, best = 0, 0.0
            for m in cost.candidates(k):
                v = info_of_m(m).dist.ex_ante_gain(structure) - cost(m)
                if v >= best:
                    best_m, best = m, v
            his, ms = (1.0,), (best_m,)
        branches.append(Branch(float(w), his, ms))
    return AgentRule(tuple(branches))


def _caps(config: ScenarioConfig, n: int) -> list[tuple[float, int]]:
    k = config.capacity(n)
    if not config.stochastic:
        return [(1.0, k)]
    eps = config.epsilon
    return [(eps, min(config.M, k)), (1.0 - eps, k)]


# --------------------------------------------------------------------------
# forward dynamics on a log-likelihood ratio


@dataclass(frozen=True)
class GridSpec:
    """Fallback discretization for log-odds distributions."""

    bins: int = 2001
    width: float = 30.0
    max_atoms: int = 4096
    overflow_tol: float = 1e-12

    def __post_init__(self):
        if self.bins < 2:
            raise ConfigError(f"log-odds grid needs at least 2 bins, got {self.bins}")
        if not self.width > 0:
            raise ConfigError("log-odds grid width must be positive")
        if self.max_atoms < self.bins:
            raise ConfigError("max_atoms must be at least the number of bins")


def _compact(lam, p0, p1, grid: GridSpec) -> tuple[LLRDist, bool]:
    dist = LLRDist.from_atoms(lam, p0, p1)
    if dist.size <= grid.max_atoms:
        return dist, False
    lam, p0, p1 = dist.lam, dist.p0, dist.p1
    out = np.abs(lam) > grid.width
    spill = 0.5 * float(np.sum(p0[out]) + np.sum(p1[out]))
    if spill > grid.overflow_tol:
        raise GridOverflowError(
            f"{spill:.3g} probability mass beyond +-{grid.width} log-odds "
            f"(extreme atom {lam[np.argmax(np.abs(lam))]:.3g}); widen the grid"
        )
    x = np.clip(lam, -grid.width, grid.width)
    h = 2.0 * grid.width / (grid.bins - 1)
    pos = (x + grid.width) / h
    idx = np.clip(np.floor(pos).astype(np.int64), 0, grid.bins - 2)
    w = pos - idx
    nodes = np.linspace(-grid.width, grid.width, grid.bins)
    b0 = np.bincount(idx, (1 - w) * p0, grid.bins) + np.bincount(idx + 1, w * p0, grid.bins)
    b1 = np.bincount(idx, (1 - w) * p1, grid.bins) + np.bincount(idx + 1, w * p1, grid.bins)
    return LLRDist.from_atoms(nodes, b0, b1), True


def _transition(d, rule: AgentRule, info: _Info, part: str):
    """New atoms after one more action is revealed, restricted to ``part``."""
    dist = info.dist
    lam = dist.lam
    q = {}
    for state in (0, 1):
        q[state] = action_probs(d, rule, lambda m: lam, state, part)
    atoms = []
    for a in (1, 0):
        qa0 = np.broadcast_to(np.asarray(q[0][1 - a], dtype=np.float64), lam.shape)
        qa1 = np.broadcast_to(np.asarray(q[1][1 - a], dtype=np.float64), lam.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            inc = np.log(qa1) - np.log(qa0)
        atoms.append((inc, dist.p0 * qa0, dist.p1 * qa1))
    return atoms


@dataclass
class PublicDynamics:
    cutoffs: np.ndarray
    correct: np.ndarray
    observe: np.ndarray
    correct_obs: np.ndarray
    cascade: np.ndarray
    atoms: np.ndarray
    binned: bool
    rules: list = field(default_factory=list)

    @property
    def limit(self) -> float:
        return float(self.correct[-1])


def public_belief_dynamics(
    structure: SignalStructure,
    c: float | CostModel,
    N: int,
    grid: GridSpec | None = None,
    timing: str = "signal_first",
) -> PublicDynamics:
    """Law of the public log-odds when every observer sees the whole past."""
    grid = GridSpec() if grid is None else grid
    cost = c if isinstance(c, CostModel) else CostModel.flat(c)
    d = structure.density
    info = _Info(LLRDist.point(), d)
    cut, cor, obs, cobs, casc, natoms = [], [], [], [], [], []
    rules = []
    binned_any = False
    for n in range(1, N + 1):
        k = n - 1
        if any(m != k for m in cost.candidates(k)):
            raise UnsupportedPolicyError("public dynamics need one observation size (the whole past)")
        rule = build_rule(structure, cost, timing, [(1.0, k)], lambda m: info)
        st = agent_stats(d, rule, lambda m: info)
        rules.append(rule)
        cut.append(rule.cutoff)
        cor.append(st.correct)
        obs.append(st.observe)
        cobs.append(st.correct_obs)
        edge = np.abs(info.tau) >= 1.0
        casc.append(0.5 * float(np.sum(info.dist.p0[edge]) + np.sum(info.dist.p1[edge])))
        natoms.append(info.dist.size)
        new = _transition(d, rule, info, "all")
        lam = np.concatenate([info.dist.lam + inc for inc, _, _ in new])
        p0 = np.concatenate([a for _, a, _ in new])
        p1 = np.concatenate([b for _, _, b in new])
        dist, binned = _compact(lam, p0, p1, grid)
        binned_any |= binned
        info = _Info(dist, d)
    return PublicDynamics(
        np.array(cut), np.array(cor), np.array(obs), np.array(cobs), np.array(casc), np.array(natoms), binned_any, rules
    )


# --------------------------------------------------------------------------
# line network


@dataclass(frozen=True)
class LineEquilibrium:
    cutoffs: np.ndarray
    correct: np.ndarray
    limit_cutoff: float
    limit_prob: float
    converged_at: Optional[int]

    @property
    def horizon(self) -> int:
        return self.correct.size


def line_limit(structure: SignalStructure, c: float) -> tuple[float, float]:
    """Stationary cutoff and accuracy on the line.

    At the fixed point P = F0(-s) / (F0(-s) + F1(-s)) and the agent at the
    cutoff is indifferent: gain(s; P) = c.  Solved by bisection on s.
    """
    if not (0.0 <= c < 0.5):
        raise ConfigError(f"cost must lie in [0, 1/2), got {c}")
    if not structure.symmetric:
        raise UnsupportedPolicyError("line limit needs a symmetric structure")
    if c == 0.0:
        return 1.0, 1.0 if not structure.bounded else _line_limit_bounded_free(structure)

    def fixed_p(s):
        a = float(structure.cdf(0, -s))
        b = float(structure.cdf(1, -s))
        return a / (a + b)

    def h(s):
        return float(LLRDist.line(fixed_p(s)).gain(structure, s)) - c

    if h(0.0) < 0:
        return 0.0, float(structure.cdf(0, 0.0))
    top = 1.0 - 1e-15
    if h(top) >= 0:
        return 1.0, fixed_p(top)
    s = bisect(h, 0.0, 1.0)
    return s, fixed_p(s)


def _line_limit_bounded_free(structure):
    eq = line_cutoff_recursion(structure, 0.0, 5000, with_limit=False)
    return float(eq.correct[-1])


def _solve_line(config: ScenarioConfig):
    structure = config.structure
    if not structure.symmetric:
        raise UnsupportedPolicyError("line solver needs a symmetric structure")
    d = structure.density
    N = config.N
    q0 = np.zeros(N + 1)
    q1 = np.zeros(N + 1)
    rules, sources, llr0, llr1, stats = [], np.zeros(N + 1, np.int64), np.zeros(N + 1), np.zeros(N + 1), []
    if config.policy is Policy.MOST_INFORMATIVE:
        big = [n for n in range(1, N + 1) if config.capacity(n) > 1]
        if big:
            raise UnsupportedPolicyError("most-informative selection is only supported with capacity one")
    for n in range(1, N + 1):
        k = config.capacity(n)
        if k == 0:
            rule = AgentRule.silent()
            st = agent_stats(d, rule, None)
        else:
            if config.policy is Policy.MOST_INFORMATIVE:
                acc = 0.5 * (q0[1:n] + q1[1:n])
                src = int(np.flatnonzero(acc == acc.max())[-1]) + 1
            else:
                src = n - 1
            a0, a1 = q0[src], q1[src]
            lam0 = _log_ratio(1 - a1, a0)
            lam1 = _log_ratio(a1, 1 - a0)
            dist = LLRDist.from_atoms([lam0, lam1], [a0, 1 - a0], [1 - a1, a1], merge=False)
            info = _Info(dist, d)
            rule = build_rule(structure, config.cost, config.timing, [(1.0, 1)], lambda m: info)
            st = agent_stats(d, rule, lambda m: info)
            sources[n], llr0[n], llr1[n] = src, lam0, lam1
        q0[n], q1[n] = st.correct0, st.correct1
        rules.append(rule)
        stats.append(st)
    return rules, sources[1:], llr0[1:], llr1[1:], stats


def _log_ratio(a, b):
    if a <= 0:
        return -math.inf
    if b <= 0:
        return math.inf
    return math.log(a) - math.log(b)


def line_cutoff_recursion(structure: SignalStructure, c: float, N: int, with_limit: bool = True) -> LineEquilibrium:
    """Cutoffs s*_n and accuracies p_n on the line (immediate predecessor)."""
    cfg = ScenarioConfig(structure=structure, cost=CostModel.flat(c), capacity=ImmediateOne(),
                         policy=Policy.IMMEDIATE, N=N)
    rules, _, _, _, stats = _solve_line(cfg)
    p = np.array([s.correct for s in stats])
    cut = np.array([r.cutoff for r in rules])
    conv = None
    steps = np.flatnonzero(np.abs(np.diff(p)) < FIXED_POINT_TOL)
    if steps.size:
        conv = int(steps[0]) + 1
    if with_limit:
        s_hat, p_hat = line_limit(structure, c)
    else:
        s_hat, p_hat = float(cut[-1]), float(p[-1])
    return LineEquilibrium(cut, p, s_hat, p_hat, conv)


def line_limit_candidates(c: float) -> dict:
    """Both limit values in circulation for the linear family on the line."""
    s_hat, p_hat = line_limit(LinearUnbounded(), c)
    return {
        "fixed_point": p_hat,
        "closed_form_1_minus_4c2": 1.0 - 4.0 * c * c,
        "limit_cutoff": s_hat,
        "closed_form_cutoff_1_minus_4c": 1.0 - 4.0 * c,
        "adopted": "fixed_point",
    }


# --------------------------------------------------------------------------
# scenario solution


@dataclass
class Solution:
    """Rules for every agent plus exact per-agent learning statistics.

    ``kind`` selects how an observation is turned into a log-likelihood ratio:
    ``"line"`` (one source action, ratios ``llr0``/``llr1``), ``"chain"`` (the
    chain revealed under diffusion) or ``"prefix"`` (the first m actions).
    """

    config: ScenarioConfig
    kind: str
    rules: list
    correct: np.ndarray
    observe: np.ndarray
    correct_obs: np.ndarray
    sources: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    llr0: np.ndarray = field(default_factory=lambda: np.zeros(0))
    llr1: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lmax: int = 0
    exact: bool = True
    cascade: Optional[np.ndarray] = None
    notes: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.rules)

    @property
    def cutoffs(self) -> np.ndarray:
        return np.array([r.cutoff for r in self.rules])

    @property
    def cond_correct(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.observe > 0, self.correct_obs / np.maximum(self.observe, 1e-300), np.nan)

    def profile(self) -> StrategyProfile:
        if self.kind == "line":
            return StrategyProfile(tuple(self.rules), "line", tuple(int(s) for s in self.sources))
        if self.kind == "prefix":
            return StrategyProfile(tuple(self.rules), "prefix")
        raise UnsupportedPolicyError("diffusion chains have no prefix profile")

    def cutoffs_below_s_star(self) -> bool:
        """Every observation cutoff sits below the strong-belief cutoff s*."""
        regime = self.config.structure.classify(self.config.cost.base)
        if not regime.strong:
            return True
        return bool(np.all(self.cutoffs < regime.s_star))


def solve(config: ScenarioConfig, grid: GridSpec | None = None, exact_limit: int = EXACT_PREFIX_LIMIT) -> Solution:
    """Policy-conditional equilibrium for a scenario (the one selected by its policy and tie-breaks)."""
    if config.policy in (Policy.IMMEDIATE, Policy.MOST_INFORMATIVE):
        if config.diffusion:
            if config.policy is not Policy.IMMEDIATE:
                raise UnsupportedPolicyError("diffusion is only supported with the immediate-predecessor policy")
            return _solve_chain(config, grid or GridSpec())
        rules, src, l0, l1, stats = _solve_line(config)
        return Solution(
            config, "line", rules, *_stack(stats), sources=src, llr0=l0, llr1=l1,
            notes={"engine": "line"},
        )
    if config.policy not in (Policy.FIRST_K, Policy.FULL_SET):
        raise UnsupportedPolicyError(f"unsupported policy {config.policy}")
    caps = [config.capacity(n) for n in range(1, config.N + 1)]
    lmax = max(caps)
    notes = {}
    if config.diffusion:
        notes["diffusion"] = "no effect: prefix observers already see every revealed action"
    if lmax <= exact_limit:
        sol = _solve_prefix(config, lmax)
        sol.notes.update(notes)
        return sol
    full = all(k == n - 1 for n, k in enumerate(caps, start=1)) and not config.stochastic
    if full:
        pd = public_belief_dynamics(config.structure, config.cost, config.N, grid, config.timing)
        notes.update(engine="public_dynamics", binned=pd.binned)
        return Solution(
            config, "prefix", pd.rules, pd.correct, pd.observe, pd.correct_obs, lmax=config.N - 1,
            exact=not pd.binned, cascade=pd.cascade, notes=notes,
        )
    raise SizeError(
        f"observed prefixes reach {lmax} agents; exact enumeration is limited to {exact_limit} "
        "(full-history scenarios use public dynamics instead)"
    )


def _stack(stats):
    return (
        np.array([s.correct for s in stats]),
        np.array([s.observe for s in stats]),
        np.array([s.correct_obs for s in stats]),
    )


def _solve_prefix(config: ScenarioConfig, lmax: int) -> Solution:
    structure = config.structure
    d = structure.density
    l0 = [np.zeros(1)]
    l1 = [np.zeros(1)]
    cache: dict[int, _Info] = {}

    def info_of_m(m: int) -> _Info:
        if m not in cache:
            with np.errstate(invalid="ignore"):
                lam = l1[m] - l0[m]
            cache[m] = _Info(LLRDist.from_atoms(np.nan_to_num(lam, nan=0.0), np.exp(l0[m]), np.exp(l1[m])), d)
        return cache[m]

    rules, stats = [], []
    for n in range(1, config.N + 1):
        rule = build_rule(structure, config.cost, config.timing, _caps(config, n), info_of_m)
        rules.append(rule)
        stats.append(agent_stats(d, rule, info_of_m))
        if n <= lmax:
            idx = np.arange(l0[-1].size)

            def lam_of_m(m, idx=idx):
                with np.errstate(invalid="ignore"):
                    lam = l1[m] - l0[m]
                return np.nan_to_num(lam, nan=0.0)[idx & ((1 << m) - 1)]

            nxt = []
            for state, tab in ((0, l0[-1]), (1, l1[-1])):
                p1, p0 = action_probs(d, rule, lam_of_m, state)
                p1 = np.broadcast_to(p1, tab.shape)
                p0 = np.broadcast_to(p0, tab.shape)
                with np.errstate(divide="ignore"):
                    nxt.append(np.concatenate((tab + np.log(p0), tab + np.log(p1))))
            l0.append(np.nan_to_num(nxt[0], nan=-np.inf))
            l1.append(np.nan_to_num(nxt[1], nan=-np.inf))
    return Solution(
        config, "prefix", rules, *_stack(stats), lmax=lmax, notes={"engine": "prefix_enumeration"},
    )


def _solve_chain(config: ScenarioConfig, grid: GridSpec) -> Solution:
    structure = config.structure
    d = structure.density
    info = _Info(LLRDist.point(), d)
    rules, stats = [], []
    binned_any = False
    for n in range(1, config.N + 1):
        k = config.capacity(n)
        rule = build_rule(structure, config.cost, config.timing, [(1.0, min(k, 1))], lambda m: info)
        rules.append(rule)
        stats.append(agent_stats(d, rule, lambda m: info))
        obs = _transition(d, rule, info, "obs")
        non = _transition(d, rule, info, "non")
        lam = np.concatenate([info.dist.lam + inc for inc, _, _ in obs] + [inc for inc, _, _ in non])
        p0 = np.concatenate([a for _, a, _ in obs] + [a for _, a, _ in non])
        p1 = np.concatenate([b for _, _, b in obs] + [b for _, _, b in non])
        dist, binned = _compact(lam, p0, p1, grid)
        binned_any |= binned
        info = _Info(dist, d)
    return Solution(
        config, "chain", rules, *_stack(stats), exact=not binned_any,
        notes={"engine": "diffusion_chain", "binned": binned_any},
    )
