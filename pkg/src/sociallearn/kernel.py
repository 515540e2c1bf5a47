"""Trial kernel backend selection and block-parallel Monte Carlo driver.

The compiled extension is used when it imports; otherwise the numpy
implementation runs.  Set ``SOCIALLEARN_KERNEL=python`` to force the fallback.
Both consume the same packed arrays and the same uniforms, so they agree.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernel_py
from .equilibrium import Solution

try:  # pragma: no cover - depends on build
    from . import _kernel as _kernel_c
except ImportError:  # pragma: no cover
    _kernel_c = None

BLOCK = 2048
NCOUNT = _kernel_py.NCOUNT
_KINDS = {"line": _kernel_py.KIND_LINE, "chain": _kernel_py.KIND_CHAIN, "prefix": _kernel_py.KIND_PREFIX}


def compiled_available() -> bool:
    return _kernel_c is not None


def backend_name(requested: str | None = None) -> str:
    want = (requested or os.environ.get("SOCIALLEARN_KERNEL", "auto")).lower()
    if want not in ("auto", "python", "cython"):
        raise ValueError(f"unknown kernel backend {want!r}")
    if want == "python":
        return "python"
    if want == "cython" and _kernel_c is None:
        raise ImportError("compiled kernel is not built")
    return "cython" if _kernel_c is not None else "python"


def _module(name: str):
    return _kernel_c if name == "cython" else _kernel_py


@dataclass(frozen=True)
class Packed:
    kind: int
    n_agents: int
    dens: tuple
    agent_ptr: np.ndarray
    br_weight: np.ndarray
    br_ptr: np.ndarray
    reg_hi: np.ndarray
    reg_m: np.ndarray
    sources: np.ndarray
    llr0: np.ndarray
    llr1: np.ndarray
    lmax: int
    bench_cut: float


def pack(sol: Solution, bench_cut: float = 0.0) -> Packed:
    agent_ptr = [0]
    weights, br_ptr, his, ms = [], [0], [], []
    for rule in sol.rules:
        for br in rule.branches:
            weights.append(br.weight)
            his.extend(br.his)
            ms.extend(br.ms)
            br_ptr.append(len(his))
        agent_ptr.append(len(weights))
    n = sol.N
    sources = np.zeros(n, np.int64)
    llr0 = np.zeros(n)
    llr1 = np.zeros(n)
    if sol.kind == "line":
        sources[:] = sol.sources
        llr0[:] = np.nan_to_num(sol.llr0, nan=0.0, posinf=745.0, neginf=-745.0)
        llr1[:] = np.nan_to_num(sol.llr1, nan=0.0, posinf=745.0, neginf=-745.0)
    lmax = sol.lmax if sol.kind == "prefix" else 0
    i64 = lambda a: np.ascontiguousarray(a, dtype=np.int64)
    f64 = lambda a: np.ascontiguousarray(a, dtype=np.float64)
    return Packed(
        _KINDS[sol.kind], n, tuple(f64(a) for a in sol.config.structure.density.kernel_arrays()),
        i64(agent_ptr), f64(weights), i64(br_ptr), f64(his), i64(ms),
        sources, llr0, llr1, int(lmax), float(bench_cut),
    )


def block_uniforms(seed: int, block: int, rows: int, n_agents: int) -> np.ndarray:
    """Uniforms in (0, 1) for one block: column 0 draws the state, then (branch, signal) per agent."""
    gen = np.random.Generator(np.random.Philox(key=np.array([seed, block], dtype=np.uint64)))
    u = gen.random((rows, 1 + 2 * n_agents))
    u += 2.0**-54
    return u


def _call(mod, p: Packed, u, counts, rec=None):
    ra, rm, rs = rec if rec is not None else (None, None, None)
    mod.run_block(
        p.kind, p.n_agents, u, p.dens, p.agent_ptr, p.br_weight, p.br_ptr, p.reg_hi, p.reg_m,
        p.sources, p.llr0, p.llr1, p.lmax, p.bench_cut, counts, ra, rm, rs,
    )


def run_counts(p: Packed, trials: int, seed: int, threads: int = 1, backend: str | None = None) -> np.ndarray:
    """Integer counters (N x 5) summed over ``trials`` trials; identical for any thread count."""
    mod = _module(backend_name(backend))
    nblocks = -(-trials // BLOCK)

    def one(b: int) -> np.ndarray:
        rows = min(BLOCK, trials - b * BLOCK)
        counts = np.zeros((p.n_agents, NCOUNT), dtype=np.int64)
        _call(mod, p, block_uniforms(seed, b, rows, p.n_agents), counts)
        return counts

    total = np.zeros((p.n_agents, NCOUNT), dtype=np.int64)
    if threads <= 1 or nblocks == 1:
        for b in range(nblocks):
            total += one(b)
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            for c in ex.map(one, range(nblocks)):
                total += c
    return total


def run_recorded(p: Packed, seed: int, trial: int, backend: str | None = None):
    """Replay one trial and return (theta, actions, observed sizes, signals)."""
    mod = _module(backend_name(backend))
    b, row = divmod(trial, BLOCK)
    u = block_uniforms(seed, b, row + 1, p.n_agents)[row:row + 1].copy()
    counts = np.zeros((p.n_agents, NCOUNT), dtype=np.int64)
    ra = np.zeros((1, p.n_agents), dtype=np.int8)
    rm = np.zeros((1, p.n_agents), dtype=np.int64)
    rs = np.zeros((1, p.n_agents), dtype=np.float64)
    _call(mod, p, u, counts, (ra, rm, rs))
    return int(u[0, 0] >= 0.5), ra[0], rm[0], rs[0]
