#!/usr/bin/env python3
"""Compiled vs numpy trial kernel throughput.

Usage:
    python benchmarks/bench_kernel.py [--trials 20000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from sociallearn import kernel
from sociallearn.config import CostModel, ScenarioConfig
from sociallearn.equilibrium import solve
from sociallearn.netform import FullHistory, Policy, SqrtGrowth
from sociallearn.signals import BoundedLinear

SCENARIOS = {
    "line c=0.1 N=300": ScenarioConfig(cost=CostModel.flat(0.1), N=300),
    "firstk sqrt c=0.1 N=400": ScenarioConfig(cost=CostModel.flat(0.1), capacity=SqrtGrowth(), policy=Policy.FIRST_K, N=400),
    "diffusion chain c=0.1 N=300": ScenarioConfig(cost=CostModel.flat(0.1), diffusion=True, N=300),
    "full history bounded N=200": ScenarioConfig(structure=BoundedLinear(0.5), cost=CostModel.flat(0.0),
                                                 capacity=FullHistory(), policy=Policy.FIRST_K, N=200),
}


def best_time(p, trials, backend, repeat):
    out = []
    counts = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        counts = kernel.run_counts(p, trials, seed=1, backend=backend)
        out.append(time.perf_counter() - t0)
    return min(out), counts


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not kernel.compiled_available():
        raise SystemExit("compiled kernel not built; run pip install -e . --no-build-isolation")
    print(f"{'scenario':32s} {'numpy s':>9s} {'cython s':>9s} {'speedup':>8s}  same counts")
    for name, cfg in SCENARIOS.items():
        p = kernel.pack(solve(cfg))
        tp, cp = best_time(p, args.trials, "python", args.repeat)
        tc, cc = best_time(p, args.trials, "cython", args.repeat)
        print(f"{name:32s} {tp:9.3f} {tc:9.3f} {tp / tc:8.1f}x  {np.array_equal(cp, cc)}")


if __name__ == "__main__":
    main()
