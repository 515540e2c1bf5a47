"""Command-line front end: ``solve``, ``simulate``, ``sweep`` and ``verify``.

Exit codes: 0 success, 1 failed check, 2 bad input, 3 regime error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernel
from .config import CostModel, ScenarioConfig, load_config
from .equilibrium import (
    herding_bound,
    line_limit,
    line_limit_candidates,
    maximal_learning_prob,
    solve,
)
from .errors import ConfigError, DomainError, GridOverflowError, RegimeError, SocialLearnError
from .netform import Policy
from .signals import BoundedLinear, LinearUnbounded
from .simulate import learning_curve, maximal_flag, monotone_within_ci

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_REGIME = 0, 1, 2, 3
SWEEP_OUTPUTS = ("asymptotic", "maximal", "equilibrium", "herding_bound")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def _num(x) -> Optional[float]:
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else x


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _summary_sink(out: Optional[str], summary: dict):
    # CSV goes to --out (or stdout); its summary lands next to it (or on stderr)
    text = _json(summary)
    if out:
        with open(out + ".summary.json", "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stderr.write(text)


def _load(args) -> ScenarioConfig:
    cfg = load_config(args.config)
    kw = {}
    if getattr(args, "seed", None) is not None:
        kw["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        kw["T"] = args.trials
    return cfg.replace(**kw) if kw else cfg


def _is_line(cfg: ScenarioConfig) -> bool:
    return cfg.policy is Policy.IMMEDIATE and cfg.structure.symmetric


def _limit_block(cfg: ScenarioConfig) -> dict:
    c = cfg.cost.base
    block: dict = {"cost": c, "maximal": maximal_learning_prob(cfg.structure, c)}
    regime = cfg.structure.classify(c)
    block["beliefs"] = regime.strength.value
    if regime.strong:
        block["s_star"] = regime.s_star
    if cfg.structure.bounded:
        block["herding_bound"] = herding_bound(cfg.structure)
    if _is_line(cfg) and cfg.timing == "signal_first" and cfg.cost.is_flat:
        s_hat, p_hat = line_limit(cfg.structure, c)
        block["line_limit_cutoff"] = s_hat
        block["line_limit_prob"] = p_hat
        if cfg.structure == LinearUnbounded():
            cand = line_limit_candidates(c)
            block["limit_discrepancy"] = {
                "equation_system_fixed_point": {"value": cand["fixed_point"], "provenance": "fixed point of the stationary line equations"},
                "printed_closed_form": {"value": cand["closed_form_1_minus_4c2"], "provenance": "printed closed form 1-4c^2"},
                "cutoff_closed_form_1_minus_4c": cand["closed_form_cutoff_1_minus_4c"],
                "adopted": cand["adopted"],
            }
    return block


# --------------------------------------------------------------------------
# solve


def cmd_solve(args) -> int:
    cfg = _load(args)
    sol = solve(cfg)
    limit = _limit_block(cfg)
    summary = {
        "command": "solve",
        "seed": cfg.seed,
        "config": cfg.to_text(),
        "engine": sol.notes.get("engine", sol.kind),
        "exact": sol.exact,
        "limit": limit,
        "final_prob": float(sol.correct[-1]),
        "cutoffs_below_s_star": sol.cutoffs_below_s_star(),
    }
    if sol.cascade is not None:
        summary["cascade_mass_final"] = float(sol.cascade[-1])
    if args.format == "json":
        summary["rows"] = [
            {"n": i + 1, "cutoff": float(sol.cutoffs[i]), "prob": float(sol.correct[i]), "obs_prob": float(sol.observe[i])}
            for i in range(sol.N)
        ]
        _emit(_json(summary), args.out)
    else:
        buf = io.StringIO()
        buf.write(f"# sociallearn solve seed={cfg.seed}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("n", "cutoff", "prob", "obs_prob"))
        for i in range(sol.N):
            w.writerow((i + 1, repr(float(sol.cutoffs[i])), repr(float(sol.correct[i])), repr(float(sol.observe[i]))))
        _emit(buf.getvalue(), args.out)
        _summary_sink(args.out, summary)
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    cfg = _load(args)
    sol = solve(cfg)
    curve = learning_curve(cfg, sol, threads=args.threads)
    flag = maximal_flag(cfg, curve)
    lo, hi = curve.interval
    summary = {
        "command": "simulate",
        "seed": cfg.seed,
        "trials": cfg.T,
        "config": cfg.to_text(),
        "last_decile_mean": curve.last_decile_mean(),
        "final_estimate": float(curve.estimate[-1]),
        "final_interval": [float(lo[-1]), float(hi[-1])],
        "final_cond_estimate": _num(curve.cond_estimate[-1]),
        "final_obs_freq": float(curve.obs_freq[-1]),
        "exact_final_prob": float(sol.correct[-1]),
        "maximal": str(flag),
        "maximal_target": flag.target,
        "monotone_within_ci": monotone_within_ci(curve),
    }
    limit = _limit_block(cfg)
    summary["limit"] = limit
    disc = limit.get("limit_discrepancy")
    if disc:
        se = math.sqrt(max(curve.estimate[-1] * (1 - curve.estimate[-1]), 1e-300) / cfg.T)
        for key in ("equation_system_fixed_point", "printed_closed_form"):
            v = disc[key]["value"]
            z = (curve.estimate[-1] - v) / se
            disc[key]["z_final"] = float(z)
            disc[key]["excluded"] = bool(abs(z) > 10.0)
    if args.format == "json":
        summary["curve"] = {
            "n": curve.n.tolist(),
            "estimate": curve.estimate.tolist(),
            "lo": lo.tolist(),
            "hi": hi.tolist(),
            "cond_estimate": [_num(x) for x in curve.cond_estimate],
            "obs_freq": curve.obs_freq.tolist(),
        }
        _emit(_json(summary), args.out)
    else:
        _emit(f"# sociallearn simulate seed={cfg.seed} trials={cfg.T}\n" + curve.to_csv(), args.out)
        _summary_sink(args.out, summary)
    return EXIT_OK


# --------------------------------------------------------------------------
# sweep


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    lo: float
    hi: float
    steps: int
    template: ScenarioConfig
    outputs: tuple[str, ...] = SWEEP_OUTPUTS

    def __post_init__(self):
        if self.parameter not in ("cost", "lambda"):
            raise ConfigError("sweep parameter must be cost or lambda")
        if not self.lo < self.hi:
            raise ConfigError("sweep needs lo < hi")
        if self.steps < 2:
            raise ConfigError("sweep needs at least 2 steps")
        bad = set(self.outputs) - set(SWEEP_OUTPUTS)
        if bad:
            raise ConfigError(f"unknown sweep outputs {sorted(bad)}")

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.steps)


def _equilibrium_limit(cfg: ScenarioConfig) -> float:
    if _is_line(cfg) and cfg.timing == "signal_first" and cfg.cost.is_flat and not cfg.structure.bounded:
        return line_limit(cfg.structure, cfg.cost.base)[1]
    return float(solve(cfg).correct[-1])


def sweep_rows(spec: SweepSpec) -> list[dict]:
    rows = []
    for v in spec.values():
        v = float(v)
        if spec.parameter == "cost":
            cfg = spec.template.replace(cost=CostModel.flat(v))
        else:
            cfg = spec.template.replace(structure=LinearUnbounded() if v >= 1.0 else BoundedLinear(v))
        c = cfg.cost.base
        row = {"param": v}
        if "asymptotic" in spec.outputs:
            row["asymptotic"] = 1.0
        if "maximal" in spec.outputs:
            row["maximal"] = maximal_learning_prob(cfg.structure, c)
        if "equilibrium" in spec.outputs:
            row["equilibrium"] = _equilibrium_limit(cfg)
        if "herding_bound" in spec.outputs:
            row["herding_bound"] = herding_bound(cfg.structure) if cfg.structure.bounded else None
        rows.append(row)
    return rows


def sweep_diagnostics(spec: SweepSpec, rows: list[dict]) -> dict:
    out = {}
    tol = 1e-9
    if "maximal" in spec.outputs and spec.parameter == "cost":
        m = [r["maximal"] for r in rows]
        out["maximal_nonincreasing"] = all(b <= a + tol for a, b in zip(m, m[1:]))
    if "equilibrium" in spec.outputs and "maximal" in spec.outputs:
        out["equilibrium_le_maximal"] = all(r["equilibrium"] <= r["maximal"] + 1e-6 for r in rows)
    if "maximal" in spec.outputs and "asymptotic" in spec.outputs:
        out["maximal_le_asymptotic"] = all(r["maximal"] <= r["asymptotic"] + tol for r in rows)
    return out


def cmd_sweep(args) -> int:
    template = load_config(args.config) if args.config else ScenarioConfig()
    if args.horizon is not None:
        template = template.replace(N=args.horizon)
    outputs = tuple(x.strip() for x in args.outputs.split(",") if x.strip())
    spec = SweepSpec(args.param, args.lo, args.hi, args.steps, template, outputs)
    rows = sweep_rows(spec)
    diag = sweep_diagnostics(spec, rows)
    cols = ("param",) + SWEEP_OUTPUTS
    if args.format == "json":
        _emit(_json({"command": "sweep", "seed": template.seed, "parameter": spec.parameter, "rows": rows, "diagnostics": diag}), args.out)
        return EXIT_OK
    buf = io.StringIO()
    buf.write(f"# sociallearn sweep parameter={spec.parameter} seed={template.seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow(["" if r.get(k) is None else repr(round(float(r[k]), 12)) for k in cols])
    for k, v in diag.items():
        buf.write(f"# {k}={'true' if v else 'false'}\n")
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    from .verify import SUITES, report, run_suite

    if args.suite not in SUITES + ("all",):
        print(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES + ('all',))}", file=sys.stderr)
        return EXIT_INPUT
    rep = report(run_suite(args.suite))
    rep["suite"] = args.suite
    rep["kernel"] = kernel.backend_name()
    _emit(_json(rep), args.out)
    return EXIT_OK if rep["passed"] else EXIT_FAIL


# --------------------------------------------------------------------------


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sociallearn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="scenario file (key = value lines)")
        sp.add_argument("--out", help="output path (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("solve", help="equilibrium cutoffs and exact accuracy")
    common(sp)
    sp.add_argument("--seed", type=_u64)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("simulate", help="Monte Carlo learning curve")
    common(sp)
    sp.add_argument("--seed", type=_u64)
    # range checks on trials belong to the config, which reports exit code 2
    sp.add_argument("--trials", type=int)
    sp.add_argument("--threads", type=_positive, default=1)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="limit benchmarks across a parameter range")
    common(sp, config_required=False)
    sp.add_argument("--param", choices=("cost", "lambda"), default="cost")
    sp.add_argument("--lo", type=float, required=True)
    sp.add_argument("--hi", type=float, required=True)
    sp.add_argument("--steps", type=int, default=11)
    sp.add_argument("--horizon", type=_positive, default=None, help="agents used when the limit is taken from a finite solve")
    sp.add_argument("--outputs", default=",".join(SWEEP_OUTPUTS))
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("verify", help="run self-check suites")
    sp.add_argument("suite", nargs="?", default="all")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RegimeError, GridOverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SocialLearnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
