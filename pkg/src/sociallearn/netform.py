"""Capacity structures and neighbourhood-selection policies."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError


class CapacityStructure:
    """K(n): how many predecessors agent n may observe.  Always clamped to n-1."""

    def raw(self, n: int) -> int:
        raise NotImplementedError

    def __call__(self, n: int) -> int:
        if n < 1:
            raise ConfigError(f"agent index must be >= 1, got {n}")
        return int(min(max(self.raw(n), 0), n - 1))

    @property
    def infinite(self) -> bool:
        raise NotImplementedError

    def spec_string(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class FullHistory(CapacityStructure):
    def raw(self, n):
        return n - 1

    @property
    def infinite(self):
        return True

    def spec_string(self):
        return "full"


@dataclass(frozen=True)
class Constant(CapacityStructure):
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("constant capacity must be at least 1")

    def raw(self, n):
        return self.k

    @property
    def infinite(self):
        return False

    def spec_string(self):
        return f"const:{self.k}"


@dataclass(frozen=True)
class ImmediateOne(CapacityStructure):
    def raw(self, n):
        return 1

    @property
    def infinite(self):
        return False

    def spec_string(self):
        return "one"


@dataclass(frozen=True)
class SqrtGrowth(CapacityStructure):
    def raw(self, n):
        return math.isqrt(n - 1) + 1 if n > 1 else 0  # ceil(sqrt(n))

    @property
    def infinite(self):
        return True

    def spec_string(self):
        return "sqrt"


@dataclass(frozen=True)
class ZeroPrefix(CapacityStructure):
    m: int
    inner: CapacityStructure

    def __post_init__(self):
        if self.m < 0:
            raise ConfigError("zero-prefix length must be non-negative")

    def raw(self, n):
        return 0 if n <= self.m else self.inner(n)

    @property
    def infinite(self):
        return self.inner.infinite

    def spec_string(self):
        return f"zeroprefix:{self.m},{self.inner.spec_string()}"


@dataclass(frozen=True)
class Custom(CapacityStructure):
    fn: Callable[[int], int]
    declared_infinite: Optional[bool] = None

    def raw(self, n):
        return int(self.fn(n))

    @property
    def infinite(self):
        if self.declared_infinite is None:
            raise ConfigError("custom capacity needs a declared limit behaviour")
        return self.declared_infinite

    def spec_string(self):
        raise ConfigError("custom capacities have no config form")


def capacity(cs: CapacityStructure, n: int) -> int:
    return cs(n)


def has_infinite_observations(cs: CapacityStructure) -> bool:
    return cs.infinite


def parse_capacity(text: str) -> CapacityStructure:
    text = text.strip().lower()
    head, _, arg = text.partition(":")
    if head in ("full", "fullhistory") and not arg:
        return FullHistory()
    if head in ("one", "immediate") and not arg:
        return ImmediateOne()
    if head == "sqrt" and not arg:
        return SqrtGrowth()
    if head in ("const", "constant"):
        return Constant(_int(arg))
    if head == "zeroprefix":
        m, sep, inner = arg.partition(",")
        if not sep:
            raise ConfigError("zeroprefix needs the form zeroprefix:M,inner")
        return ZeroPrefix(_int(m), parse_capacity(inner))
    raise ConfigError(f"unknown capacity {text!r}")


def _int(v: str) -> int:
    try:
        return int(v.strip())
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {v!r}") from exc


class Policy(enum.Enum):
    IMMEDIATE = "line"
    FIRST_K = "firstk"
    FULL_SET = "full"
    MOST_INFORMATIVE = "most_informative"


_POLICY_ALIASES = {
    "line": Policy.IMMEDIATE,
    "immediate": Policy.IMMEDIATE,
    "firstk": Policy.FIRST_K,
    "full": Policy.FULL_SET,
    "fullset": Policy.FULL_SET,
    "most_informative": Policy.MOST_INFORMATIVE,
}


def parse_policy(text: str) -> Policy:
    try:
        return _POLICY_ALIASES[text.strip().lower()]
    except KeyError:
        raise ConfigError(f"unknown policy {text!r}") from None


def select_neighborhood(policy: Policy, n: int, k: int, estimates=None) -> tuple[int, ...]:
    """Agents observed by n, in the order the policy ranks them."""
    k = int(min(max(k, 0), n - 1))
    if k == 0:
        return ()
    if policy is Policy.IMMEDIATE:
        return (n - 1,)
    if policy in (Policy.FIRST_K, Policy.FULL_SET):
        # with full capacity k = n - 1, so both are the whole prefix
        return tuple(range(1, k + 1))
    if policy is Policy.MOST_INFORMATIVE:
        if estimates is None or len(estimates) < n - 1:
            raise ConfigError("most-informative selection needs an estimate for every predecessor")
        est = np.asarray(estimates[: n - 1], dtype=np.float64)
        # sort by estimate, ties to the later agent
        order = sorted(range(1, n), key=lambda j: (-est[j - 1], -j))
        return tuple(order[:k])
    raise ConfigError(f"unknown policy {policy!r}")


def expanding_observations_stat(max_observed, m: int) -> np.ndarray:
    """Per-agent share of observing trials whose largest observed index is below m.

    ``max_observed`` has shape (trials, agents) with 0 where the agent did not
    observe.  Agents nobody observed get NaN.
    """
    a = np.asarray(max_observed)
    if a.ndim != 2 or a.shape[0] == 0:
        raise ConfigError("need a non-empty (trials, agents) array")
    obs = a > 0
    hits = (obs & (a < m)).sum(axis=0)
    cnt = obs.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(cnt > 0, hits / np.maximum(cnt, 1), np.nan)
