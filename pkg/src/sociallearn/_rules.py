"""Per-agent decision rules in region form, and their action probabilities.

An agent's behaviour is a mixture of branches.  Inside a branch the absolute
signal |s| is cut into consecutive intervals ``[lo, hi)`` starting at 0; each
interval carries the size ``m`` of the observed neighbourhood (``m = 0`` means
no observation).  A plain cutoff strategy is one branch with regions
``[(s_n, K), (1, 0)]``.  Mixtures arise only in the stochastic-block variant.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _pl

SCAN_POINTS = 4097


@dataclass(frozen=True)
class Branch:
    weight: float
    his: tuple[float, ...]
    ms: tuple[int, ...]

    def __post_init__(self):
        if len(self.his) != len(self.ms) or not self.his:
            raise ValueError("branch needs matching, non-empty region lists")
        if self.his[-1] != 1.0:
            raise ValueError("last region must end at 1")

    def regions(self):
        lo = 0.0
        for hi, m in zip(self.his, self.ms):
            if hi > lo:
                yield lo, hi, m
            lo = hi

    @property
    def cutoff(self) -> float:
        """Upper end of the observing part (regions are observing then not)."""
        out = 0.0
        for lo, hi, m in self.regions():
            if m > 0:
                out = hi
        return out


@dataclass(frozen=True)
class AgentRule:
    branches: tuple[Branch, ...]

    @classmethod
    def cutoff_rule(cls, cutoff: float, m: int) -> "AgentRule":
        cutoff = float(min(max(cutoff, 0.0), 1.0))
        if m <= 0 or cutoff <= 0.0:
            return cls((Branch(1.0, (1.0,), (0,)),))
        if cutoff >= 1.0:
            return cls((Branch(1.0, (1.0,), (m,)),))
        return cls((Branch(1.0, (cutoff, 1.0), (m, 0)),))

    @classmethod
    def silent(cls) -> "AgentRule":
        return cls((Branch(1.0, (1.0,), (0,)),))

    @property
    def cutoff(self) -> float:
        return max(b.cutoff for b in self.branches)

    @property
    def max_m(self) -> int:
        return max(max(b.ms) for b in self.branches)

    @property
    def observes(self) -> bool:
        return self.max_m > 0


def region_masses(d: _pl.PLDensity, lo: float, hi: float, m: int, tau, state: int):
    """P(|s| in [lo, hi), action=1) and the same for action 0, given threshold tau.

    With ``m == 0`` the agent follows her own signal (ties to action 0) and
    ``tau`` is ignored.
    """
    if m == 0:
        m1 = _pl.mass(d, state, lo, hi)
        m0 = _pl.mass(d, state, -hi, -lo)
        return m1, m0
    tau = np.asarray(tau, dtype=np.float64)
    tp = np.clip(tau, lo, hi)
    tn = np.clip(tau, -hi, -lo)
    m1 = _pl.mass(d, state, tp, hi) + _pl.mass(d, state, tn, -lo)
    m0 = _pl.mass(d, state, lo, tp) + _pl.mass(d, state, -hi, tn)
    return m1, m0


def action_probs(d: _pl.PLDensity, rule: AgentRule, lam_of_m, state: int, part: str = "all"):
    """P(a=1), P(a=0) under ``state`` for an agent following ``rule``.

    ``lam_of_m(m)`` returns the array of observed log-likelihood ratios for a
    neighbourhood of size m (all arrays broadcast together).  ``part`` picks
    the joint event with observing ("obs") or not observing ("non").
    """
    p1 = 0.0
    p0 = 0.0
    for br in rule.branches:
        for lo, hi, m in br.regions():
            if (part == "obs" and m == 0) or (part == "non" and m > 0):
                continue
            tau = _pl.threshold(d, lam_of_m(m)) if m > 0 else 0.0
            a1, a0 = region_masses(d, lo, hi, m, tau, state)
            p1 = p1 + br.weight * a1
            p0 = p0 + br.weight * a0
    return p1, p0


def observe_prob(d: _pl.PLDensity, rule: AgentRule, state: int) -> float:
    out = 0.0
    for br in rule.branches:
        for lo, hi, m in br.regions():
            if m > 0:
                out += br.weight * float(_pl.mass(d, state, lo, hi) + _pl.mass(d, state, -hi, -lo))
    return out


def choose_regions(candidates, scan_points: int = SCAN_POINTS):
    """Regions maximising net value over |s| in [0, 1).

    ``candidates`` is a list of ``(m, cost, gain_fn)`` with vectorised
    ``gain_fn(s)``.  Not observing has net value 0.  Ties favour the larger m,
    so exact indifference leads to observation.
    """
    cands = sorted(candidates, key=lambda t: t[0])
    if not cands:
        return (1.0,), (0,)
    if len(cands) == 1:
        m, cost, g = cands[0]
        return _single_cutoff(m, cost, g)

    ms = np.array([0] + [c[0] for c in cands])

    def best(s):
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        vals = np.vstack([np.zeros_like(s)] + [c[2](s) - c[1] for c in cands])
        # argmax over reversed rows gives ties to the larger m
        idx = vals.shape[0] - 1 - np.argmax(vals[::-1], axis=0)
        return ms[idx]

    grid = np.linspace(0.0, 1.0, scan_points)
    grid[-1] = np.nextafter(1.0, 0.0)
    choice = best(grid)
    his: list[float] = []
    mlist: list[int] = []
    for i in range(1, grid.size):
        if choice[i] != choice[i - 1]:
            a, b = grid[i - 1], grid[i]
            left = choice[i - 1]
            for _ in range(200):
                if b - a <= 1e-12:
                    break
                mid = 0.5 * (a + b)
                if best(mid)[0] == left:
                    a = mid
                else:
                    b = mid
            his.append(0.5 * (a + b))
            mlist.append(int(left))
    his.append(1.0)
    mlist.append(int(choice[-1]))
    return _merge(his, mlist)


def _single_cutoff(m, cost, g):
    if cost <= 0:
        return (1.0,), (m,)
    g0 = float(np.atleast_1d(g(np.array([0.0])))[0])
    if g0 < cost:
        return (1.0,), (0,)
    top = np.nextafter(1.0, 0.0)
    if float(np.atleast_1d(g(np.array([top])))[0]) >= cost:
        return (1.0,), (m,)
    a, b = 0.0, 1.0
    for _ in range(200):
        if b - a <= 1e-12:
            break
        mid = 0.5 * (a + b)
        if float(np.atleast_1d(g(np.array([mid])))[0]) >= cost:
            a = mid
        else:
            b = mid
    s = 0.5 * (a + b)
    if s <= 1e-12:
        # indifferent only at s = 0: an empty observation region
        return (1.0,), (0,)
    return (s, 1.0), (m, 0)


def _merge(his, ms):
    oh: list[float] = []
    om: list[int] = []
    for h, m in zip(his, ms):
        if om and om[-1] == m:
            oh[-1] = h
        else:
            oh.append(h)
            om.append(m)
    return tuple(oh), tuple(om)
