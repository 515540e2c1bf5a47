"""Pure numpy trial kernel.  Vectorised over the trials of one block.

Mirrors ``_kernel.pyx`` exactly: same inputs, same uniforms, same counters.
"""
from __future__ import annotations

import numpy as np

from . import _pl

KIND_LINE = 0
KIND_CHAIN = 1
KIND_PREFIX = 2

# counter columns
C_CORRECT, C_OBS, C_CORRECT_OBS, C_BENCH, C_CORRECT_BENCH = range(5)
NCOUNT = 5


def run_block(kind, n_agents, u, dens, agent_ptr, br_weight, br_ptr, reg_hi, reg_m,
              sources, llr0, llr1, lmax, bench_cut, counts, rec_act=None, rec_m=None, rec_sig=None):
    d = _pl.PLDensity(*dens)
    T = u.shape[0]
    theta = (u[:, 0] >= 0.5).astype(np.int64)
    is1 = theta == 1
    actions = np.zeros((T, n_agents), dtype=np.int8) if kind == KIND_LINE or rec_act is not None else None
    L = np.zeros((T, lmax + 1)) if kind == KIND_PREFIX else None
    D = np.zeros(T)
    for n in range(1, n_agents + 1):
        ub = u[:, 2 * n - 1]
        us = u[:, 2 * n]
        b0, b1 = agent_ptr[n - 1], agent_ptr[n]
        # branch choice
        cum = 0.0
        br = np.full(T, b1 - 1, dtype=np.int64)
        chosen = np.zeros(T, dtype=bool)
        for b in range(b0, b1 - 1):
            cum += br_weight[b]
            hit = (~chosen) & (ub < cum)
            br[hit] = b
            chosen |= hit
        s = np.where(is1, _pl.ppf(d, 1, us), _pl.ppf(d, 0, us))
        a = np.abs(s)
        m = np.zeros(T, dtype=np.int64)
        for b in range(b0, b1):
            sel = br == b
            if not sel.any():
                continue
            his = reg_hi[br_ptr[b]:br_ptr[b + 1]]
            ms = reg_m[br_ptr[b]:br_ptr[b + 1]]
            idx = np.minimum(np.searchsorted(his, a[sel], side="right"), his.size - 1)
            m[sel] = ms[idx]
        obs = m > 0
        lam = _observed_llr(kind, n, m, L, D, actions, sources, llr0, llr1)
        tau = np.where(obs, _pl.threshold(d, lam), 0.0)
        act = (s > tau).astype(np.int8)
        correct = act == theta
        bench = a < bench_cut
        counts[n - 1, C_CORRECT] += int(np.count_nonzero(correct))
        counts[n - 1, C_OBS] += int(np.count_nonzero(obs))
        counts[n - 1, C_CORRECT_OBS] += int(np.count_nonzero(correct & obs))
        counts[n - 1, C_BENCH] += int(np.count_nonzero(bench))
        counts[n - 1, C_CORRECT_BENCH] += int(np.count_nonzero(correct & bench))
        if actions is not None:
            actions[:, n - 1] = act
        if rec_act is not None:
            rec_act[:, n - 1] = act
            rec_m[:, n - 1] = m
            rec_sig[:, n - 1] = s
        # state for later agents
        if kind == KIND_PREFIX and n <= lmax:
            q = [_action_prob(d, n, act, L, agent_ptr, br_weight, br_ptr, reg_hi, reg_m, st, "all") for st in (0, 1)]
            with np.errstate(divide="ignore", invalid="ignore"):
                inc = np.log(q[1]) - np.log(q[0])
            L[:, n] = _clamp(L[:, n - 1] + inc)
        elif kind == KIND_CHAIN:
            Dm = np.broadcast_to(D[:, None], (T, 1))
            qo = [_action_prob(d, n, act, Dm, agent_ptr, br_weight, br_ptr, reg_hi, reg_m, st, "obs", chain=True) for st in (0, 1)]
            qn = [_action_prob(d, n, act, Dm, agent_ptr, br_weight, br_ptr, reg_hi, reg_m, st, "non", chain=True) for st in (0, 1)]
            with np.errstate(divide="ignore", invalid="ignore"):
                inc_o = np.log(qo[1]) - np.log(qo[0])
                inc_n = np.log(qn[1]) - np.log(qn[0])
            D = _clamp(np.where(obs, D + inc_o, inc_n))


def _clamp(x):
    return np.clip(np.nan_to_num(x, nan=0.0), -745.0, 745.0)


def _observed_llr(kind, n, m, L, D, actions, sources, llr0, llr1):
    if kind == KIND_PREFIX:
        return L[np.arange(m.size), m]
    if kind == KIND_CHAIN:
        return D
    src = sources[n - 1]
    if src <= 0:
        return np.zeros(m.size)
    return np.where(actions[:, src - 1] == 1, llr1[n - 1], llr0[n - 1])


def _action_prob(d, n, act, L, agent_ptr, br_weight, br_ptr, reg_hi, reg_m, state, part, chain=False):
    """P(realised action [and observation part] | history, state) for agent n."""
    T = act.shape[0]
    out = np.zeros(T)
    want1 = act == 1
    for b in range(agent_ptr[n - 1], agent_ptr[n]):
        w = br_weight[b]
        lo = 0.0
        for r in range(br_ptr[b], br_ptr[b + 1]):
            hi = reg_hi[r]
            m = reg_m[r]
            if hi <= lo or (part == "obs" and m == 0) or (part == "non" and m > 0):
                lo = max(lo, hi)
                continue
            if m == 0:
                p1 = _pl.mass(d, state, lo, hi)
                p0 = _pl.mass(d, state, -hi, -lo)
            else:
                lam = L[:, 0] if chain else L[:, m]
                tau = _pl.threshold(d, lam)
                tp = np.clip(tau, lo, hi)
                tn = np.clip(tau, -hi, -lo)
                p1 = _pl.mass(d, state, tp, hi) + _pl.mass(d, state, tn, -lo)
                p0 = _pl.mass(d, state, lo, tp) + _pl.mass(d, state, -hi, tn)
            out = out + w * np.where(want1, p1, p0)
            lo = hi
    return out
