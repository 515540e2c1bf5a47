"""Bayesian updating from a private signal plus observed actions.

Everything here is expressed in log-likelihood ratios ``log P(.|1)/P(.|0)``
and converted to probabilities only where a comparison is made.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _pl
from ._rules import AgentRule, action_probs
from .errors import DomainError, RegimeError, UnsupportedPolicyError
from .signals import SignalStructure


@dataclass(frozen=True)
class ActionHistory:
    agents: tuple[int, ...]
    actions: tuple[int, ...]

    def __post_init__(self):
        if len(self.agents) != len(self.actions):
            raise DomainError("agents and actions differ in length")
        if any(b <= a for a, b in zip(self.agents, self.agents[1:])):
            raise DomainError("agent indices must be strictly increasing")
        if any(a < 1 for a in self.agents):
            raise DomainError("agent indices start at 1")
        if any(x not in (0, 1) for x in self.actions):
            raise DomainError("actions must be 0 or 1")

    @classmethod
    def of(cls, pairs) -> "ActionHistory":
        pairs = list(pairs)
        return cls(tuple(int(n) for n, _ in pairs), tuple(int(a) for _, a in pairs))

    @classmethod
    def prefix(cls, actions) -> "ActionHistory":
        actions = tuple(int(a) for a in actions)
        return cls(tuple(range(1, len(actions) + 1)), actions)

    def __len__(self):
        return len(self.agents)

    @property
    def is_prefix(self) -> bool:
        return self.agents == tuple(range(1, len(self.agents) + 1))


@dataclass(frozen=True)
class PosteriorBelief:
    r: float

    @property
    def log_odds(self) -> float:
        if self.r <= 0:
            return -math.inf
        if self.r >= 1:
            return math.inf
        return math.log(self.r) - math.log1p(-self.r)


@dataclass(frozen=True)
class StrategyProfile:
    """Decision rules of agents 1..N plus where each agent looks.

    ``kind == "prefix"``: an agent observing m actions sees agents 1..m.
    ``kind == "line"``: an observing agent sees the single agent
    ``sources[n-1]`` (the immediate predecessor on the line).
    """

    rules: tuple[AgentRule, ...]
    kind: str = "prefix"
    sources: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("prefix", "line"):
            raise UnsupportedPolicyError(f"unknown profile kind {self.kind!r}")
        if self.kind == "line" and len(self.sources) != len(self.rules):
            raise ValueError("line profile needs one source per agent")
        for n, rule in enumerate(self.rules, start=1):
            if self.kind == "prefix" and rule.max_m > n - 1:
                raise ValueError(f"agent {n} observes beyond her predecessors")
            if self.kind == "line" and rule.observes and not (1 <= self.sources[n - 1] < n):
                raise ValueError(f"agent {n} has no valid source")

    @classmethod
    def line(cls, cutoffs) -> "StrategyProfile":
        """Immediate-predecessor profile; ``cutoffs[0]`` belongs to agent 1."""
        rules = []
        for n, s in enumerate(cutoffs, start=1):
            rules.append(AgentRule.cutoff_rule(s, 1) if n > 1 else AgentRule.silent())
        return cls(tuple(rules), "line", tuple(range(0, len(rules))))

    @classmethod
    def first_k(cls, cutoffs, sizes) -> "StrategyProfile":
        rules = tuple(
            AgentRule.cutoff_rule(s, min(int(k), n - 1)) for n, (s, k) in enumerate(zip(cutoffs, sizes), start=1)
        )
        return cls(rules, "prefix")

    @property
    def horizon(self) -> int:
        return len(self.rules)

    @property
    def cutoffs(self) -> np.ndarray:
        return np.array([r.cutoff for r in self.rules])

    def line_correctness(self, structure: SignalStructure) -> np.ndarray:
        """P(a_n = theta) for a line profile, assuming a symmetric structure."""
        if self.kind != "line":
            raise UnsupportedPolicyError("line_correctness needs a line profile")
        d = structure.density
        p = np.zeros(self.horizon + 1)
        for n, rule in enumerate(self.rules, start=1):
            if rule.observes:
                q = p[self.sources[n - 1]]
                ell = _logit(q)
                # theta = 0: source correct (plays 0) w.p. q
                _, c0 = action_probs(d, rule, lambda m: np.array([-ell, ell]), 0)
                p[n] = q * c0[0] + (1 - q) * c0[1]
            else:
                _, c0 = action_probs(d, rule, lambda m: 0.0, 0)
                p[n] = float(c0)
        return p[1:]


def _logit(p: float) -> float:
    if p <= 0:
        return -math.inf
    if p >= 1:
        return math.inf
    return math.log(p) - math.log1p(-p)


def _require_prefix(history: ActionHistory, profile: StrategyProfile):
    if not history.is_prefix:
        raise UnsupportedPolicyError("likelihoods are only defined for prefix histories 1..k")
    if len(history) > profile.horizon:
        raise DomainError("history longer than the strategy profile")


def log_likelihoods(profile: StrategyProfile, structure: SignalStructure, history: ActionHistory):
    """(log P(h|0), log P(h|1)) by the sequential factorization."""
    _require_prefix(history, profile)
    d = structure.density
    l0 = [0.0]
    l1 = [0.0]
    if profile.kind == "line":
        p = profile.line_correctness(structure)
    for j, a in enumerate(history.actions, start=1):
        rule = profile.rules[j - 1]
        if profile.kind == "prefix":
            def lam(m):
                return l1[m] - l0[m]
        else:
            src = profile.sources[j - 1]
            if rule.observes:
                sign = 1.0 if history.actions[src - 1] == 1 else -1.0
                ell = sign * _logit(p[src - 1])
            else:
                ell = 0.0

            def lam(m, ell=ell):
                return ell
        q = []
        for state in (0, 1):
            p1, p0 = action_probs(d, rule, lam, state)
            q.append(float(p1 if a == 1 else p0))
        l0.append(l0[-1] + (math.log(q[0]) if q[0] > 0 else -math.inf))
        l1.append(l1[-1] + (math.log(q[1]) if q[1] > 0 else -math.inf))
    return l0[-1], l1[-1]


def prefix_log_likelihoods(profile: StrategyProfile, structure: SignalStructure, k: int):
    """Log-likelihood tables over all 2**k prefix histories of a prefix profile.

    Entry ``i`` encodes the history with agent j's action in bit j-1.
    Returns ``(log P(h|0), log P(h|1))`` as arrays.
    """
    if profile.kind != "prefix":
        raise UnsupportedPolicyError("history tables need a prefix profile")
    if not 0 <= k <= profile.horizon:
        raise DomainError("k must lie between 0 and the profile horizon")
    d = structure.density
    tabs = ([np.zeros(1)], [np.zeros(1)])
    for j in range(1, k + 1):
        rule = profile.rules[j - 1]
        idx = np.arange(tabs[0][-1].size)

        def lam(m, idx=idx):
            with np.errstate(invalid="ignore"):
                v = tabs[1][m] - tabs[0][m]
            return np.nan_to_num(v, nan=0.0)[idx & ((1 << m) - 1)]

        for state in (0, 1):
            p1, p0 = action_probs(d, rule, lam, state)
            cur = tabs[state][-1]
            with np.errstate(divide="ignore"):
                tabs[state].append(np.concatenate((cur + np.log(np.broadcast_to(p0, cur.shape)),
                                                   cur + np.log(np.broadcast_to(p1, cur.shape)))))
    return tabs[0][-1], tabs[1][-1]


def history_likelihood(profile: StrategyProfile, structure: SignalStructure, history: ActionHistory, state: int) -> float:
    l0, l1 = log_likelihoods(profile, structure, history)
    return math.exp(l1 if state else l0)


def history_llr(profile: StrategyProfile, structure: SignalStructure, history: ActionHistory) -> float:
    l0, l1 = log_likelihoods(profile, structure, history)
    if l0 == l1 == -math.inf:
        raise DomainError("history has probability zero in both states")
    return l1 - l0


def posterior(profile: StrategyProfile, structure: SignalStructure, s: float, history: ActionHistory) -> PosteriorBelief:
    own = structure.llr(structure._check_open(s))
    lam = history_llr(profile, structure, history) if len(history) else 0.0
    x = float(own + lam)
    if math.isnan(x):
        raise DomainError("signal and history are contradictory")
    return PosteriorBelief(1.0 / (1.0 + math.exp(-x)) if x > -700 else 0.0)


def threshold_signal(profile: StrategyProfile, structure: SignalStructure, history: ActionHistory) -> float:
    """Signal at which the posterior is exactly 1/2; +-1 marks a cascade."""
    lam = history_llr(profile, structure, history) if len(history) else 0.0
    return float(structure.threshold(lam))


@dataclass(frozen=True)
class LLRDist:
    """Distribution of an observed log-likelihood ratio under each state.

    Atoms are sorted by value; ``c0``/``c1`` are cumulative masses with a
    leading zero so that ``c0[k]`` is the mass of the first k atoms.
    """

    lam: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    c0: np.ndarray
    c1: np.ndarray

    @classmethod
    def from_atoms(cls, lam, p0, p1, merge: bool = True) -> "LLRDist":
        lam = np.asarray(lam, dtype=np.float64).ravel()
        p0 = np.asarray(p0, dtype=np.float64).ravel()
        p1 = np.asarray(p1, dtype=np.float64).ravel()
        keep = (p0 > 0) | (p1 > 0)
        lam, p0, p1 = lam[keep], p0[keep], p1[keep]
        order = np.argsort(lam, kind="stable")
        lam, p0, p1 = lam[order], p0[order], p1[order]
        if merge and lam.size > 1:
            new = np.concatenate(([True], lam[1:] != lam[:-1]))
            idx = np.cumsum(new) - 1
            lam = lam[new]
            p0 = np.bincount(idx, weights=p0)
            p1 = np.bincount(idx, weights=p1)
        c0 = np.concatenate(([0.0], np.cumsum(p0)))
        c1 = np.concatenate(([0.0], np.cumsum(p1)))
        return cls(lam, p0, p1, c0, c1)

    @classmethod
    def line(cls, p: float) -> "LLRDist":
        """A single symmetric action that is correct with probability p."""
        ell = _logit(p)
        return cls.from_atoms([-ell, ell], [p, 1 - p], [1 - p, p])

    @classmethod
    def point(cls) -> "LLRDist":
        return cls.from_atoms([0.0], [1.0], [1.0])

    @property
    def size(self) -> int:
        return self.lam.size

    def gain(self, structure: SignalStructure, s):
        """Expected gain from observing, for signals s >= 0 (reflected for s < 0)."""
        d = structure.density
        s = np.abs(np.asarray(s, dtype=np.float64))
        f0 = _pl.pdf(d, 0, s)
        f1 = _pl.pdf(d, 1, s)
        b0 = f0 / (f0 + f1)
        b1 = f1 / (f0 + f1)
        with np.errstate(divide="ignore"):
            own = np.log(f1) - np.log(f0)
        k = np.searchsorted(self.lam, -own, side="right")
        g = b0 * self.c0[k] - b1 * self.c1[k]
        return np.maximum(g, 0.0)

    def ex_ante_gain(self, structure: SignalStructure) -> float:
        """Value of observing before the signal is drawn, relative to F0(0)."""
        d = structure.density
        t = _pl.threshold(d, self.lam)
        with_obs = 0.5 * (np.sum(self.p0 * _pl.cdf(d, 0, t)) + np.sum(self.p1 * _pl.sf(d, 1, t)))
        without = 0.5 * (float(_pl.cdf(d, 0, 0.0)) + float(_pl.sf(d, 1, 0.0)))
        return float(with_obs - without)

    def cutoff(self, structure: SignalStructure, c: float) -> float:
        """sup{s >= 0 : gain(s) >= c}; 1 at zero cost, 0 when nobody observes."""
        from ._rules import _single_cutoff

        his, ms = _single_cutoff(1, c, lambda s: self.gain(structure, s))
        return his[0] if ms[0] == 1 else 0.0

    def correct_prob(self) -> float:
        """Accuracy of acting on this information alone (ties to action 0)."""
        return 0.5 * (float(np.sum(self.p0[self.lam <= 0])) + float(np.sum(self.p1[self.lam > 0])))


def observation_gain(structure: SignalStructure, s, dist: LLRDist):
    """Expected improvement in the probability of a correct action from observing.

    ``dist`` describes the log-likelihood ratio the observed neighbourhood
    will reveal under each state.  Valid for s >= 0; negative s is reflected,
    which is exact for symmetric structures and neighbourhood laws.
    """
    out = dist.gain(structure, s)
    return float(out) if np.ndim(out) == 0 else out


def contraction_steps(r: float, r_hat: float, structure: SignalStructure, c: float) -> int:
    """Number of consecutive 0 actions that push a posterior r below r_hat.

    Uses the geometric worst-case factor q = 1/(r + (1-r) F0(s*)/F1(s*)),
    with s* the strong-belief cutoff at cost c.
    """
    if not (0.0 < r_hat < r < 1.0):
        raise DomainError("need 0 < r_hat < r < 1")
    regime = structure.classify(c)
    if not regime.strong:
        raise RegimeError("contraction count needs strong private beliefs")
    ratio = structure.cdf(0, regime.s_star) / structure.cdf(1, regime.s_star)
    q = 1.0 / (r + (1.0 - r) * ratio)
    if not q < 1.0:
        raise RegimeError("no contraction at this cost")
    m = max(1, math.ceil(math.log(r_hat / r) / math.log(q)))
    while m > 1 and r * q ** (m - 1) <= r_hat:
        m -= 1
    while r * q**m > r_hat:
        m += 1
    return m
