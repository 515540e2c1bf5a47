"""Self-check suites run by ``sociallearn verify``."""
from __future__ import annotations

import hashlib
import itertools
from dataclasses import asdict, dataclass

import numpy as np

from . import kernel
from .beliefs import ActionHistory, StrategyProfile, contraction_steps, history_likelihood, posterior
from .config import CostModel, ScenarioConfig
from .equilibrium import line_limit, maximal_learning_prob, solve
from .netform import Policy, SqrtGrowth
from .oracle import brute_force_oracle
from .signals import BoundedLinear, LinearUnbounded, Tabulated
from .simulate import learning_curve, y_of_m

SUITES = ("signals", "beliefs", "equilibrium", "simulate")


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    detail: str


def _families():
    g = np.linspace(-1.0, 1.0, 9)
    f1 = 1.0 + 0.6 * g + 0.1 * g**3
    tab = Tabulated(g, f1[::-1], f1)
    return {"linear": LinearUnbounded(), "bounded:0.5": BoundedLinear(0.5), "tabulated": tab}


def check_signals():
    out = []
    u = np.linspace(0.001, 0.999, 499)
    for name, s in _families().items():
        rep = s.validate()
        out.append(Check("signals", f"{name} positivity/mlrp/symmetry", rep.ok, str(rep.first_violation or "")))
        err = max(float(np.max(np.abs(s.cdf(st, s.ppf(st, u)) - u))) for st in (0, 1))
        out.append(Check("signals", f"{name} quantile round trip", err < 1e-10, f"max error {err:.2e}"))
    return out


def check_beliefs():
    out = []
    s = LinearUnbounded()
    prof = StrategyProfile.first_k([0.0, 0.3, 0.5, 0.6, 0.7], [0, 1, 2, 3, 4])
    for state in (0, 1):
        tot = sum(history_likelihood(prof, s, ActionHistory.prefix(h), state)
                  for h in itertools.product((0, 1), repeat=5))
        out.append(Check("beliefs", f"history likelihoods sum to one (state {state})", abs(tot - 1) < 1e-12, f"{tot:.15f}"))
    r = posterior(StrategyProfile.line([0.0]), s, 0.5, ActionHistory.prefix([])).r
    out.append(Check("beliefs", "own-signal posterior", abs(r - 0.75) < 1e-12, f"{r}"))
    m = contraction_steps(0.9, 0.5, s, 0.1)
    out.append(Check("beliefs", "contraction count is finite and positive", m >= 1, f"{m}"))
    return out


def check_equilibrium():
    out = []
    for c in (0.05, 0.1, 0.2):
        s_hat, _ = line_limit(LinearUnbounded(), c)
        out.append(Check("equilibrium", f"line limit cutoff at c={c}", abs(s_hat - (1 - 4 * c)) < 1e-8, f"{s_hat}"))
    for c in (0.1, 0.3):
        p = maximal_learning_prob(LinearUnbounded(), c)
        out.append(Check("equilibrium", f"maximal target at c={c}", abs(p - (1 - c * c)) < 1e-10, f"{p}"))
    for c, (pol, cap) in itertools.product((0.0, 0.05, 0.1, 0.2), ((Policy.IMMEDIATE, None), (Policy.FIRST_K, SqrtGrowth()))):
        cfg = ScenarioConfig(cost=CostModel.flat(c), policy=pol, N=8, **({"capacity": cap} if cap else {}))
        sol = solve(cfg)
        orc = brute_force_oracle(cfg.structure, c, 8, pol, cap)
        err = float(np.max(np.abs(sol.correct - orc.correct)))
        out.append(Check("equilibrium", f"oracle agreement {pol.value} c={c}", err < 1e-6, f"max error {err:.2e}"))
    return out


def _digest(curve) -> str:
    return hashlib.sha256(curve.to_csv().encode()).hexdigest()


def check_simulate():
    out = []
    y1 = y_of_m(LinearUnbounded(), 1)
    out.append(Check("simulate", "Y(1) for the linear family", abs(y1 - 0.8125) < 1e-10, f"{y1}"))
    cfg = ScenarioConfig(cost=CostModel.flat(0.1), capacity=SqrtGrowth(), policy=Policy.FIRST_K, N=40, T=6000, seed=11)
    sol = solve(cfg)
    h1 = _digest(learning_curve(cfg, sol, threads=1))
    h8 = _digest(learning_curve(cfg, sol, threads=8))
    out.append(Check("simulate", "identical curves with 1 and 8 workers", h1 == h8, h1[:16]))
    if kernel.compiled_available():
        hp = _digest(learning_curve(cfg, sol, backend="python"))
        out.append(Check("simulate", "compiled and numpy kernels agree", hp == h1, hp[:16]))
    return out


_RUNNERS = {"signals": check_signals, "beliefs": check_beliefs, "equilibrium": check_equilibrium, "simulate": check_simulate}


def run_suite(name: str) -> list[Check]:
    if name == "all":
        return [c for s in SUITES for c in _RUNNERS[s]()]
    return _RUNNERS[name]()


def report(checks: list[Check]) -> dict:
    return {
        "passed": all(c.passed for c in checks),
        "n_checks": len(checks),
        "n_failed": sum(not c.passed for c in checks),
        "checks": [asdict(c) for c in checks],
    }
