"""Private-signal structures on (-1, 1) and their belief regimes.

Three families are provided:

* ``LinearUnbounded``: f0 = (1 - s)/2, f1 = (1 + s)/2.
* ``BoundedLinear(lam)``: f0 = (1 - lam*s)/2, f1 = (1 + lam*s)/2, private
  beliefs confined to [(1 - lam)/2, (1 + lam)/2].
* ``Tabulated``: densities given on a grid, linearly interpolated.

All three are piecewise linear in density, so every structure carries a
:class:`~sociallearn._pl.PLDensity` that the numeric engines share.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _pl
from .errors import ConfigError, DomainError

BISECT_TOL = 1e-12
BISECT_MAXITER = 200


def bisect(fn, lo: float, hi: float, tol: float = BISECT_TOL, maxiter: int = BISECT_MAXITER) -> float:
    """Root of a function with fn(lo) and fn(hi) of opposite sign (fn(lo) >= 0 side kept)."""
    flo = fn(lo)
    for _ in range(maxiter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if (fm >= 0) == (flo >= 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


class Strength(enum.Enum):
    STRONG = "strong"
    WEAK = "weak"
    NOT_APPLICABLE = "n/a"


@dataclass(frozen=True)
class BeliefRegime:
    bounded: bool
    beta_lower: float
    beta_upper: float
    strength: Strength
    s_star: float
    s_lower_star: float
    cost: float

    @property
    def strong(self) -> bool:
        return self.strength is Strength.STRONG


@dataclass(frozen=True)
class ValidationReport:
    positivity: bool
    mlrp: bool
    symmetry: bool
    first_violation: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.positivity and self.mlrp and self.symmetry


class SignalStructure:
    """Base class; subclasses only have to supply the density tables."""

    family = "abstract"
    symmetric = True

    def __init__(self, grid, f0, f1):
        self._pl = _pl.PLDensity.build(grid, f0, f1)

    @property
    def density(self) -> _pl.PLDensity:
        return self._pl

    # -- evaluation ---------------------------------------------------
    @staticmethod
    def _check_open(s):
        a = np.asarray(s, dtype=np.float64)
        if np.any(~(np.abs(a) < 1.0)):
            raise DomainError(f"signal outside open support (-1, 1): {s!r}")
        return a

    @staticmethod
    def _check_closed(s):
        a = np.asarray(s, dtype=np.float64)
        if np.any(~(np.abs(a) <= 1.0)):
            raise DomainError(f"signal outside [-1, 1]: {s!r}")
        return a

    @staticmethod
    def _state(state):
        if state not in (0, 1):
            raise DomainError(f"state must be 0 or 1, got {state!r}")
        return int(state)

    def pdf(self, state: int, s):
        return _scalar(_pl.pdf(self._pl, self._state(state), self._check_open(s)))

    def cdf(self, state: int, s):
        return _scalar(_pl.cdf(self._pl, self._state(state), self._check_closed(s)))

    def sf(self, state: int, s):
        return _scalar(_pl.sf(self._pl, self._state(state), self._check_closed(s)))

    def ppf(self, state: int, u):
        u = np.asarray(u, dtype=np.float64)
        if np.any(~((u > 0) & (u < 1))):
            raise DomainError("uniform draw must lie in (0, 1)")
        return _scalar(_pl.ppf(self._pl, self._state(state), u))

    sample_signal = ppf

    def llr(self, s):
        """log f1(s)/f0(s)."""
        return _scalar(_pl.llr(self._pl, self._check_closed(s)))

    def threshold(self, lam):
        """Signal at which own log-likelihood ratio equals -lam, clipped to [-1, 1]."""
        return _scalar(_pl.threshold(self._pl, lam))

    def private_belief(self, s):
        s = self._check_open(s)
        f0 = _pl.pdf(self._pl, 0, s)
        f1 = _pl.pdf(self._pl, 1, s)
        return _scalar(f1 / (f0 + f1))

    # -- belief bounds ------------------------------------------------
    @property
    def beta_upper(self) -> float:
        d = self._pl
        return float(d.f1[-1] / (d.f0[-1] + d.f1[-1]))

    @property
    def beta_lower(self) -> float:
        d = self._pl
        return float(d.f1[0] / (d.f0[0] + d.f1[0]))

    @property
    def bounded(self) -> bool:
        return not (self.beta_upper >= 1.0 and self.beta_lower <= 0.0)

    def classify(self, c: float) -> BeliefRegime:
        if not (0.0 <= c < 0.5):
            raise ConfigError(f"cost must lie in [0, 1/2), got {c}")
        bl, bu = self.beta_lower, self.beta_upper
        bounded = self.bounded
        if c == 0.0:
            strength = Strength.WEAK if bounded else Strength.NOT_APPLICABLE
            return BeliefRegime(bounded, bl, bu, strength, 1.0, -1.0, c)
        target = 1.0 - c
        if target > bu or (bounded and target == bu):
            return BeliefRegime(bounded, bl, bu, Strength.WEAK, 1.0, -1.0, c)

        s_star = self._solve_belief(target)
        if self.symmetric:
            s_low = -s_star
        else:
            s_low = bisect(lambda s: self._belief_closed(s) - c, -1.0, 0.0)
        return BeliefRegime(bounded, bl, bu, Strength.STRONG, s_star, s_low, c)

    def _solve_belief(self, target: float) -> float:
        return bisect(lambda s: self._belief_closed(s) - target, 0.0, 1.0)

    def _belief_closed(self, s: float) -> float:
        f0 = float(np.interp(s, self._pl.grid, self._pl.f0))
        f1 = float(np.interp(s, self._pl.grid, self._pl.f1))
        return f1 / (f0 + f1) if f0 + f1 > 0 else 0.5

    # -- checks -------------------------------------------------------
    def validate(self, grid_size: int = 1001) -> ValidationReport:
        if grid_size < 3:
            raise DomainError("grid_size must be at least 3")
        s = np.linspace(-1.0, 1.0, grid_size + 2)[1:-1]
        f0 = _pl.pdf(self._pl, 0, s)
        f1 = _pl.pdf(self._pl, 1, s)
        first = {}
        pos_bad = np.flatnonzero((f0 <= 0) | (f1 <= 0))
        if pos_bad.size:
            first["positivity"] = float(s[pos_bad[0]])
        ratio = np.log(f1) - np.log(f0) if not pos_bad.size else f1 / np.maximum(f0, 1e-300)
        mlrp_bad = np.flatnonzero(np.diff(ratio) <= 0)
        if mlrp_bad.size:
            first["mlrp"] = (float(s[mlrp_bad[0]]), float(s[mlrp_bad[0] + 1]))
        sym_bad = np.flatnonzero(np.abs(f1 - _pl.pdf(self._pl, 0, -s)) > 1e-12)
        if sym_bad.size:
            first["symmetry"] = float(s[sym_bad[0]])
        return ValidationReport(not pos_bad.size, not mlrp_bad.size, not sym_bad.size, first)

    # -- serialization -----------------------------------------------
    def to_text(self) -> str:
        raise NotImplementedError

    def spec_string(self) -> str:
        raise NotImplementedError

    def __eq__(self, other):
        if not isinstance(other, SignalStructure) or type(self) is not type(other):
            return NotImplemented
        a, b = self._pl, other._pl
        return all(np.array_equal(x, y) for x, y in zip(a.kernel_arrays(), b.kernel_arrays()))

    def __hash__(self):
        return hash((self.family, self._pl.grid.tobytes(), self._pl.f1.tobytes()))


class BoundedLinear(SignalStructure):
    family = "bounded"

    def __init__(self, lam: float):
        lam = float(lam)
        if not (0.0 < lam <= 1.0):
            raise ConfigError(f"BoundedLinear slope must lie in (0, 1], got {lam}")
        self.lam = lam
        super().__init__([-1.0, 1.0], [(1 + lam) / 2, (1 - lam) / 2], [(1 - lam) / 2, (1 + lam) / 2])

    def _solve_belief(self, target: float) -> float:
        # (1 + lam*s)/2 = target has a closed form
        return min(1.0, (2.0 * target - 1.0) / self.lam)

    def to_text(self) -> str:
        return f"family = bounded\nlambda = {self.lam!r}\n"

    def spec_string(self) -> str:
        return f"bounded:{self.lam!r}"

    def __repr__(self):
        return f"BoundedLinear({self.lam!r})"


class LinearUnbounded(BoundedLinear):
    family = "linear"

    def __init__(self):
        super().__init__(1.0)

    def to_text(self) -> str:
        return "family = linear\n"

    def spec_string(self) -> str:
        return "linear"

    def __repr__(self):
        return "LinearUnbounded()"


class Tabulated(SignalStructure):
    """Densities tabulated on a grid from -1 to 1 and normalized to unit mass."""

    family = "tabulated"

    def __init__(self, grid, f0_values, f1_values, path: str | None = None):
        super().__init__(grid, f0_values, f1_values)
        d = self._pl
        self.symmetric = bool(
            np.allclose(d.grid, -d.grid[::-1], rtol=0, atol=1e-15)
            and np.all(np.abs(d.f1 - d.f0[::-1]) <= 1e-12)
        )
        self.path = path

    def to_text(self) -> str:
        d = self._pl
        rows = "".join(f"{float(g)!r} {float(a)!r} {float(b)!r}\n" for g, a, b in zip(d.grid, d.f0, d.f1))
        return "family = tabulated\n" + rows

    def spec_string(self) -> str:
        if self.path is None:
            raise ConfigError("tabulated structure has no file path to reference")
        return f"tabulated:{self.path}"

    def __repr__(self):
        return f"Tabulated(<{self._pl.grid.size} points>)"


def _scalar(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a


def from_text(text: str, path: str | None = None) -> SignalStructure:
    """Parse a structure block.

    Either ``family = linear``, ``family = bounded`` plus ``lambda = x``, or
    ``family = tabulated`` followed by rows ``s f0 f1``.  A bare table without
    a family line is accepted as tabulated.
    """
    params: dict[str, str] = {}
    rows: list[list[float]] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            k, v = (p.strip() for p in line.split("=", 1))
            params[k.lower()] = v
            continue
        try:
            vals = [float(x) for x in line.replace(",", " ").split()]
        except ValueError as exc:
            raise ConfigError(f"bad table row: {raw!r}") from exc
        if len(vals) != 3:
            raise ConfigError(f"table rows need three numbers (s f0 f1): {raw!r}")
        rows.append(vals)
    family = params.get("family", "tabulated" if rows else "").lower()
    if family == "linear":
        return LinearUnbounded()
    if family == "bounded":
        if "lambda" not in params:
            raise ConfigError("bounded family needs a lambda parameter")
        return BoundedLinear(_float(params["lambda"]))
    if family == "tabulated":
        if len(rows) < 2:
            raise ConfigError("tabulated structure needs at least two rows")
        arr = np.array(rows)
        try:
            return Tabulated(arr[:, 0], arr[:, 1], arr[:, 2], path=path)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown signal family {family!r}")


def parse_structure(spec: str, base_dir: Path | None = None) -> SignalStructure:
    """Parse the short config form: ``linear``, ``bounded:0.5``, ``tabulated:path``."""
    spec = spec.strip()
    head, _, arg = spec.partition(":")
    head = head.strip().lower()
    if head == "linear" and not arg:
        return LinearUnbounded()
    if head == "bounded":
        return BoundedLinear(_float(arg))
    if head == "tabulated":
        p = Path(arg.strip())
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read tabulated structure {p}: {exc}") from exc
        return from_text(text, path=arg.strip())
    raise ConfigError(f"unknown structure {spec!r}")


def _float(v: str) -> float:
    try:
        x = float(v)
    except ValueError as exc:
        raise ConfigError(f"expected a number, got {v!r}") from exc
    if not math.isfinite(x):
        raise ConfigError(f"expected a finite number, got {v!r}")
    return x
