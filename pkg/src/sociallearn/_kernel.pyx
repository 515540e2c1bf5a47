# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled trial kernel.  One trial at a time, no Python objects in the loop.

Semantics match ``_kernel_py.run_block`` exactly.
"""
from libc.math cimport log, exp, sqrt, fabs, isnan
from libc.stdlib cimport malloc, free

import numpy as np

DEF KIND_LINE = 0
DEF KIND_CHAIN = 1
DEF KIND_PREFIX = 2
DEF PART_ALL = 0
DEF PART_OBS = 1
DEF PART_NON = 2


cdef struct Dens:
    const double* g
    const double* f0
    const double* f1
    const double* c0
    const double* c1
    const double* s0
    const double* s1
    const double* ll
    Py_ssize_t nseg


cdef inline Py_ssize_t _seg(const Dens* d, double x) noexcept nogil:
    # index j with g[j] <= x < g[j+1], clipped to [0, nseg-1]
    cdef Py_ssize_t lo = 0, hi = d.nseg + 1, mid
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if d.g[mid] <= x:
            lo = mid
        else:
            hi = mid
    if lo > d.nseg - 1:
        lo = d.nseg - 1
    return lo


cdef inline double _clip(double x, double a, double b) noexcept nogil:
    return a if x < a else (b if x > b else x)


cdef double _cdf(const Dens* d, int st, double x) noexcept nogil:
    cdef const double* f = d.f1 if st else d.f0
    cdef const double* c = d.c1 if st else d.c0
    x = _clip(x, -1.0, 1.0)
    cdef Py_ssize_t j = _seg(d, x)
    cdef double slope = (f[j + 1] - f[j]) / (d.g[j + 1] - d.g[j])
    cdef double dx = x - d.g[j]
    return c[j] + dx * (f[j] + 0.5 * slope * dx)


cdef double _sf(const Dens* d, int st, double x) noexcept nogil:
    cdef const double* f = d.f1 if st else d.f0
    cdef const double* s = d.s1 if st else d.s0
    x = _clip(x, -1.0, 1.0)
    cdef Py_ssize_t j = _seg(d, x)
    cdef double slope = (f[j + 1] - f[j]) / (d.g[j + 1] - d.g[j])
    cdef double dx = d.g[j + 1] - x
    return s[j + 1] + dx * (f[j + 1] - 0.5 * slope * dx)


cdef double _mass(const Dens* d, int st, double a, double b) noexcept nogil:
    if not (b > a):
        return 0.0
    cdef double out
    if a >= 0.0:
        out = _sf(d, st, a) - _sf(d, st, b)
    else:
        out = _cdf(d, st, b) - _cdf(d, st, a)
    return out if out > 0.0 else 0.0


cdef double _ppf(const Dens* d, int st, double u) noexcept nogil:
    cdef const double* f = d.f1 if st else d.f0
    cdef const double* c = d.c1 if st else d.c0
    cdef const double* s = d.s1 if st else d.s0
    cdef Py_ssize_t lo, hi, mid, j
    cdef double slope, r, disc, denom, x, v
    if u <= 0.5:
        # last j with c[j] <= u
        lo = -1
        hi = d.nseg + 1
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if c[mid] <= u:
                lo = mid
            else:
                hi = mid
        j = _iclip(lo, 0, d.nseg - 1)
        slope = (f[j + 1] - f[j]) / (d.g[j + 1] - d.g[j])
        r = u - c[j]
        if r < 0.0:
            r = 0.0
        disc = f[j] * f[j] + 2.0 * slope * r
        disc = sqrt(disc) if disc > 0.0 else 0.0
        denom = f[j] + disc
        x = d.g[j] + (2.0 * r / denom if denom > 0.0 else 0.0)
    else:
        v = 1.0 - u
        # first index with -s[i] >= -v, i.e. s[i] <= v; minus one
        lo = -1
        hi = d.nseg + 1
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if s[mid] > v:
                lo = mid
            else:
                hi = mid
        j = _iclip(hi - 1, 0, d.nseg - 1)
        slope = (f[j + 1] - f[j]) / (d.g[j + 1] - d.g[j])
        r = v - s[j + 1]
        if r < 0.0:
            r = 0.0
        disc = f[j + 1] * f[j + 1] - 2.0 * slope * r
        disc = sqrt(disc) if disc > 0.0 else 0.0
        denom = f[j + 1] + disc
        x = d.g[j + 1] - (2.0 * r / denom if denom > 0.0 else 0.0)
    return _clip(x, -1.0, 1.0)


cdef inline Py_ssize_t _iclip(Py_ssize_t j, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    return a if j < a else (b if j > b else j)


cdef double _threshold(const Dens* d, double lam) noexcept nogil:
    cdef double target = -lam
    cdef const double* ll = d.ll
    if target <= ll[0]:
        return -1.0
    if target >= ll[d.nseg]:
        return 1.0
    # last j with ll[j] <= target
    cdef Py_ssize_t lo = -1, hi = d.nseg + 1, mid
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if ll[mid] <= target:
            lo = mid
        else:
            hi = mid
    cdef Py_ssize_t j = _iclip(lo, 0, d.nseg - 1)
    cdef double r = exp(target)
    cdef double num = r * d.f0[j] - d.f1[j]
    cdef double den = (d.f1[j + 1] - d.f1[j]) - r * (d.f0[j + 1] - d.f0[j])
    cdef double alpha = num / den if den > 0.0 else 0.0
    if isnan(alpha):
        alpha = 0.0
    alpha = _clip(alpha, 0.0, 1.0)
    return d.g[j] + alpha * (d.g[j + 1] - d.g[j])


cdef inline double _clampllr(double x) noexcept nogil:
    if isnan(x):
        return 0.0
    return _clip(x, -745.0, 745.0)


cdef double _action_prob(const Dens* d, Py_ssize_t n, int act, const double* L, bint chain,
                         const long long[::1] agent_ptr, const double[::1] br_weight,
                         const long long[::1] br_ptr, const double[::1] reg_hi,
                         const long long[::1] reg_m, int state, int part) noexcept nogil:
    cdef double out = 0.0, lo, hi, w, p1, p0, tau, tp, tn
    cdef long long m
    cdef Py_ssize_t b, r
    for b in range(agent_ptr[n - 1], agent_ptr[n]):
        w = br_weight[b]
        lo = 0.0
        for r in range(br_ptr[b], br_ptr[b + 1]):
            hi = reg_hi[r]
            m = reg_m[r]
            if hi <= lo or (part == PART_OBS and m == 0) or (part == PART_NON and m > 0):
                if hi > lo:
                    lo = hi
                continue
            if m == 0:
                p1 = _mass(d, state, lo, hi)
                p0 = _mass(d, state, -hi, -lo)
            else:
                tau = _threshold(d, L[0] if chain else L[m])
                tp = _clip(tau, lo, hi)
                tn = _clip(tau, -hi, -lo)
                p1 = _mass(d, state, tp, hi) + _mass(d, state, tn, -lo)
                p0 = _mass(d, state, lo, tp) + _mass(d, state, -hi, tn)
            out += w * (p1 if act == 1 else p0)
            lo = hi
    return out


def run_block(int kind, Py_ssize_t n_agents, const double[:, ::1] u, dens,
              const long long[::1] agent_ptr, const double[::1] br_weight,
              const long long[::1] br_ptr, const double[::1] reg_hi, const long long[::1] reg_m,
              const long long[::1] sources, const double[::1] llr0, const double[::1] llr1,
              Py_ssize_t lmax, double bench_cut, long long[:, ::1] counts,
              rec_act=None, rec_m=None, rec_sig=None):
    cdef const double[::1] g = dens[0]
    cdef const double[::1] f0 = dens[1]
    cdef const double[::1] f1 = dens[2]
    cdef const double[::1] c0 = dens[3]
    cdef const double[::1] c1 = dens[4]
    cdef const double[::1] s0 = dens[5]
    cdef const double[::1] s1 = dens[6]
    cdef const double[::1] ll = dens[7]
    cdef Dens d
    d.g = &g[0]
    d.f0 = &f0[0]
    d.f1 = &f1[0]
    d.c0 = &c0[0]
    d.c1 = &c1[0]
    d.s0 = &s0[0]
    d.s1 = &s1[0]
    d.ll = &ll[0]
    d.nseg = g.shape[0] - 1

    cdef bint record = rec_act is not None
    cdef signed char[:, ::1] ra
    cdef long long[:, ::1] rm
    cdef double[:, ::1] rs
    if record:
        ra = rec_act
        rm = rec_m
        rs = rec_sig

    cdef Py_ssize_t T = u.shape[0]
    cdef Py_ssize_t t, n, b, b0, b1, r, r0, r1, src
    cdef int theta, act
    cdef long long m
    cdef double s, a, cum, ub, lam, tau, q0, q1, D, Dn
    cdef double* L = <double*> malloc((lmax + 1) * sizeof(double))
    cdef signed char* acts = <signed char*> malloc((n_agents + 1) * sizeof(signed char))
    if L == NULL or acts == NULL:
        free(L)
        free(acts)
        raise MemoryError()
    try:
        with nogil:
            for t in range(T):
                theta = 1 if u[t, 0] >= 0.5 else 0
                D = 0.0
                for r in range(lmax + 1):
                    L[r] = 0.0
                for n in range(1, n_agents + 1):
                    ub = u[t, 2 * n - 1]
                    b0 = agent_ptr[n - 1]
                    b1 = agent_ptr[n]
                    b = b1 - 1
                    cum = 0.0
                    for r in range(b0, b1 - 1):
                        cum += br_weight[r]
                        if ub < cum:
                            b = r
                            break
                    s = _ppf(&d, theta, u[t, 2 * n])
                    a = fabs(s)
                    # region lookup: first region with a < hi, else the last one
                    r0 = br_ptr[b]
                    r1 = br_ptr[b + 1]
                    m = reg_m[r1 - 1]
                    for r in range(r0, r1):
                        if a < reg_hi[r]:
                            m = reg_m[r]
                            break
                    if m > 0:
                        if kind == KIND_PREFIX:
                            lam = L[m]
                        elif kind == KIND_CHAIN:
                            lam = D
                        else:
                            src = sources[n - 1]
                            if src <= 0:
                                lam = 0.0
                            else:
                                lam = llr1[n - 1] if acts[src] == 1 else llr0[n - 1]
                        tau = _threshold(&d, lam)
                    else:
                        tau = 0.0
                    act = 1 if s > tau else 0
                    acts[n] = <signed char> act
                    counts[n - 1, 0] += act == theta
                    counts[n - 1, 1] += m > 0
                    counts[n - 1, 2] += (act == theta) and (m > 0)
                    counts[n - 1, 3] += a < bench_cut
                    counts[n - 1, 4] += (act == theta) and (a < bench_cut)
                    if record:
                        ra[t, n - 1] = <signed char> act
                        rm[t, n - 1] = m
                        rs[t, n - 1] = s
                    if kind == KIND_PREFIX and n <= lmax:
                        q0 = _action_prob(&d, n, act, L, False, agent_ptr, br_weight, br_ptr, reg_hi, reg_m, 0, PART_ALL)
                        q1 = _action_prob(&d, n, act, L, False, agent_ptr, br_weight, br_ptr, reg_hi, reg_m, 1, PART_ALL)
                        L[n] = _clampllr(L[n - 1] + (log(q1) - log(q0)))
                    elif kind == KIND_CHAIN:
                        if m > 0:
                            q0 = _action_prob(&d, n, act, &D, True, agent_ptr, br_weight, br_ptr, reg_hi, reg_m, 0, PART_OBS)
                            q1 = _action_prob(&d, n, act, &D, True, agent_ptr, br_weight, br_ptr, reg_hi, reg_m, 1, PART_OBS)
                            Dn = D + (log(q1) - log(q0))
                        else:
                            q0 = _action_prob(&d, n, act, &D, True, agent_ptr, br_weight, br_ptr, reg_hi, reg_m, 0, PART_NON)
                            q1 = _action_prob(&d, n, act, &D, True, agent_ptr, br_weight, br_ptr, reg_hi, reg_m, 1, PART_NON)
                            Dn = log(q1) - log(q0)
                        D = _clampllr(Dn)
    finally:
        free(L)
        free(acts)
