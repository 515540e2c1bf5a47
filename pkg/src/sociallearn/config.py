"""Scenario configuration and its flat ``key = value`` text form."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .netform import CapacityStructure, ImmediateOne, Policy, parse_capacity, parse_policy
from .signals import LinearUnbounded, SignalStructure, parse_structure


@dataclass(frozen=True)
class CostModel:
    """Cost c(m) of observing m agents.  ``values[i]`` is c(i + 1); the last value extends."""

    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ConfigError("cost model needs at least one value")
        for v in self.values:
            if not (math.isfinite(v) and 0.0 <= v < 0.5):
                raise ConfigError(f"costs must lie in [0, 1/2), got {v}")
        if any(b < a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError("cost schedule must be non-decreasing")

    @classmethod
    def flat(cls, c: float) -> "CostModel":
        return cls((float(c),))

    @property
    def is_flat(self) -> bool:
        return len(set(self.values)) == 1

    @property
    def base(self) -> float:
        """c(1), the price of the first observation."""
        return self.values[0]

    def __call__(self, m: int) -> float:
        if m <= 0:
            return 0.0
        return self.values[min(m, len(self.values)) - 1]

    def candidates(self, k: int) -> list[int]:
        """Largest m <= k at every distinct cost level; more observations at equal cost never hurt."""
        out: list[int] = []
        for m in range(1, k + 1):
            if m == k or self(m + 1) != self(m):
                out.append(m)
        return out

    def spec_string(self) -> str:
        if len(self.values) == 1:
            return repr(self.values[0])
        return "schedule:" + ",".join(repr(v) for v in self.values)


def parse_cost(text: str) -> CostModel:
    text = text.strip()
    head, sep, arg = text.partition(":")
    try:
        if sep and head.strip().lower() == "schedule":
            return CostModel(tuple(float(x) for x in arg.split(",") if x.strip()))
        if sep:
            raise ConfigError(f"unknown cost form {text!r}")
        return CostModel.flat(float(text))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad cost {text!r}") from exc


TIMINGS = ("signal_first", "observation_first")


@dataclass(frozen=True)
class ScenarioConfig:
    structure: SignalStructure = field(default_factory=LinearUnbounded)
    cost: CostModel = field(default_factory=lambda: CostModel.flat(0.1))
    capacity: CapacityStructure = field(default_factory=ImmediateOne)
    policy: Policy = Policy.IMMEDIATE
    timing: str = "signal_first"
    diffusion: bool = False
    epsilon: Optional[float] = None
    M: Optional[int] = None
    N: int = 100
    T: int = 10000
    seed: int = 0

    def __post_init__(self):
        if self.timing not in TIMINGS:
            raise ConfigError(f"timing must be one of {TIMINGS}")
        if self.N < 1:
            raise ConfigError("horizon N must be at least 1")
        if self.T < 1:
            raise ConfigError("trial count T must be at least 1")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if (self.epsilon is None) != (self.M is None):
            raise ConfigError("stochastic block needs both epsilon and M")
        if self.epsilon is not None:
            if not (0.0 < self.epsilon <= 1.0):
                raise ConfigError("epsilon must lie in (0, 1]")
            if self.M < 1:
                raise ConfigError("M must be at least 1")
            bad = [n for n in range(1, min(self.M, self.N) + 1) if self.capacity(n) > 0]
            if bad:
                raise ConfigError(f"agents 1..M must have zero capacity (agent {bad[0]} does not)")
            if self.policy not in (Policy.FIRST_K, Policy.FULL_SET):
                raise ConfigError("stochastic block needs a prefix (firstk) policy")

    @property
    def stochastic(self) -> bool:
        return self.epsilon is not None

    def replace(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw)

    def to_text(self) -> str:
        lines = [
            f"structure = {self.structure.spec_string()}",
            f"cost = {self.cost.spec_string()}",
            f"capacity = {self.capacity.spec_string()}",
            f"policy = {self.policy.value}",
            f"timing = {self.timing}",
            f"diffusion = {'true' if self.diffusion else 'false'}",
        ]
        if self.stochastic:
            lines += [f"epsilon = {self.epsilon!r}", f"M = {self.M}"]
        lines += [f"N = {self.N}", f"T = {self.T}", f"seed = {self.seed}"]
        return "\n".join(lines) + "\n"


_KEYS = {"structure", "cost", "capacity", "policy", "timing", "diffusion", "epsilon", "m", "n", "t", "seed"}


def parse_config(text: str, base_dir: Path | None = None) -> ScenarioConfig:
    kw: dict = {}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        lk = key.lower()
        if lk not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if lk in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(lk)
        try:
            if lk == "structure":
                kw["structure"] = parse_structure(value, base_dir)
            elif lk == "cost":
                kw["cost"] = parse_cost(value)
            elif lk == "capacity":
                kw["capacity"] = parse_capacity(value)
            elif lk == "policy":
                kw["policy"] = parse_policy(value)
            elif lk == "timing":
                kw["timing"] = value.lower().replace("-", "_")
            elif lk == "diffusion":
                v = value.lower()
                if v not in ("true", "false", "on", "off", "1", "0", "yes", "no"):
                    raise ConfigError(f"diffusion must be a boolean, got {value!r}")
                kw["diffusion"] = v in ("true", "on", "1", "yes")
            elif lk == "epsilon":
                kw["epsilon"] = float(value)
            elif lk == "m":
                kw["M"] = int(value)
            elif lk == "n":
                kw["N"] = int(value)
            elif lk == "t":
                kw["T"] = int(value)
            elif lk == "seed":
                kw["seed"] = int(value)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise ConfigError(f"line {lineno}: {exc}") from exc
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return ScenarioConfig(**kw)


def load_config(path: str | Path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    return parse_config(text, base_dir=p.parent)
