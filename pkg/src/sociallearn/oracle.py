"""Brute-force reference solver for small instances.

Kept deliberately independent of the production engines: it stores the full
joint law of all action histories, marginalises onto each observer's set by
summation, finds thresholds and cutoffs by its own bisections, and integrates
signal densities with composite Simpson quadrature instead of closed-form
CDFs.  Only ``pdf`` of the structure is shared.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SizeError, UnsupportedPolicyError
from .netform import CapacityStructure, ImmediateOne, Policy
from .signals import SignalStructure

MAX_AGENTS = 12
MAX_PANELS = 4096


@dataclass(frozen=True)
class OracleResult:
    correct: np.ndarray
    cutoffs: np.ndarray
    observe: np.ndarray


def _density(structure: SignalStructure, state: int, x):
    d = structure.density
    return np.interp(x, d.grid, d.f1 if state else d.f0)


def _simpson(structure, state, a, b, panels):
    """Integral of f_state over [a, b] (vectorised over a, b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    hi = np.maximum(b, a)
    h = (hi - a) / panels
    k = np.arange(panels + 1)
    w = np.where((k == 0) | (k == panels), 1.0, np.where(k % 2 == 1, 4.0, 2.0))
    x = a[..., None] + h[..., None] * k
    return (h / 3.0) * np.sum(w * _density(structure, state, x), axis=-1)


def _bisect_vec(fn, lo, hi, iters=200, tol=1e-13):
    """Vectorised bisection for increasing fn; lo/hi arrays."""
    lo = np.array(lo, dtype=np.float64)
    hi = np.array(hi, dtype=np.float64)
    for _ in range(iters):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        up = fn(mid) > 0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    return 0.5 * (lo + hi)


def _observed_set(policy: Policy, cap: CapacityStructure, n: int) -> list[int]:
    k = cap(n)
    if k == 0:
        return []
    if policy is Policy.IMMEDIATE:
        return [n - 1]
    if policy in (Policy.FIRST_K, Policy.FULL_SET):
        return list(range(1, k + 1))
    raise UnsupportedPolicyError(f"oracle does not support {policy}")


def brute_force_oracle(
    structure: SignalStructure,
    c: float,
    n: int,
    policy: Policy = Policy.IMMEDIATE,
    capacity: CapacityStructure | None = None,
    panels: int = 512,
    timing: str = "signal_first",
) -> OracleResult:
    """Exact per-agent accuracy for agents 1..n by full history enumeration."""
    if n > MAX_AGENTS:
        raise SizeError(f"oracle handles at most {MAX_AGENTS} agents")
    if panels > MAX_PANELS or panels < 2 or panels % 2:
        raise SizeError("panel count must be even and at most 4096")
    cap = ImmediateOne() if capacity is None else capacity
    joint = [np.ones(1), np.ones(1)]  # P(h | theta) over histories of agents 1..k
    correct, cutoffs, observe = [], [], []
    for k in range(n):
        agent = k + 1
        obs = _observed_set(policy, cap, agent)
        hist = np.arange(joint[0].size)
        if obs:
            g = np.zeros_like(hist)
            for pos, j in enumerate(obs):
                g |= ((hist >> (j - 1)) & 1) << pos
            pg = [np.bincount(g, weights=joint[t], minlength=1 << len(obs)) for t in (0, 1)]

            ng = pg[0].size

            def excess(s, pg=pg):
                # positive means the posterior favours action 1
                return _density(structure, 1, s) * pg[1] - _density(structure, 0, s) * pg[0]

            at_lo = excess(-np.ones(ng))
            at_hi = excess(np.ones(ng))
            t = _bisect_vec(excess, -np.ones(ng), np.ones(ng))
            t = np.where(at_lo > 0, -1.0, np.where(at_hi <= 0, 1.0, t))

            def gain(s, pg=pg):
                f0 = _density(structure, 0, s)
                f1 = _density(structure, 1, s)
                b0, b1 = f0 / (f0 + f1), f1 / (f0 + f1)
                return float(np.sum(np.maximum(b1 * pg[1], b0 * pg[0])) - max(b0, b1))

            if timing == "signal_first":
                if c <= 0:
                    cut = 1.0
                elif gain(0.0) < c:
                    cut = 0.0
                else:
                    a, b = 0.0, 1.0
                    for _ in range(200):
                        if b - a <= 1e-13:
                            break
                        mid = 0.5 * (a + b)
                        if gain(mid) >= c:
                            a = mid
                        else:
                            b = mid
                    cut = 0.5 * (a + b) if 0.5 * (a + b) > 1e-12 else 0.0
                    if gain(1.0 - 1e-15) >= c:
                        cut = 1.0
            else:
                with_obs = 0.5 * (
                    np.sum(pg[0] * _simpson(structure, 0, -np.ones(ng), t, panels))
                    + np.sum(pg[1] * _simpson(structure, 1, t, np.ones(ng), panels))
                )
                cut = 1.0 if with_obs - _baseline(structure, panels) >= c else 0.0
            tg = t[g]
        else:
            cut = 0.0
            tg = np.zeros(hist.size)
        cutoffs.append(cut)
        new = []
        acc = 0.0
        obs_p = 0.0
        for state in (0, 1):
            # action 1 inside the observation band when s > t, outside when s > 0
            band_lo = np.clip(tg, -cut, cut)
            p1 = _simpson(structure, state, band_lo, np.full(hist.size, cut), panels)
            p1 = p1 + _simpson(structure, state, np.array(max(cut, 0.0)), np.array(1.0), panels)
            p1 = np.clip(p1, 0.0, 1.0)
            p0 = 1.0 - p1
            jt = joint[state]
            acc += 0.5 * float(np.sum(jt * (p1 if state else p0)))
            obs_p += 0.5 * float(_simpson(structure, state, np.array(-cut), np.array(cut), panels))
            new.append(np.concatenate((jt * p0, jt * p1)))
        joint = new
        correct.append(acc)
        observe.append(obs_p)
    return OracleResult(np.array(correct), np.array(cutoffs), np.array(observe))


def _baseline(structure, panels):
    """Accuracy from one's own signal alone."""
    return 0.5 * float(
        _simpson(structure, 0, np.array(-1.0), np.array(0.0), panels)
        + _simpson(structure, 1, np.array(0.0), np.array(1.0), panels)
    )
