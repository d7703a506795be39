"""Death-probability sequences c(k) and regime classification.

A :class:`ThinningFamily` is an immutable value describing the sequence
``c(1), c(2), ...`` together with analytic metadata that cannot be recovered
from finitely many values: the limit ``rho = lim k c(k)``, the decay exponent
of ``k c(k)``, and (at criticality) the eventual sign of ``eta(k) = k c(k) - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Sequence

import numpy as np

from . import _kernels as K

NONNEGATIVE = "nonnegative"
BELOW_MINUS_RECIPROCAL = "below_minus_reciprocal"
UNKNOWN_SIGN = "unknown"
EVENTUAL_SIGNS = (NONNEGATIVE, BELOW_MINUS_RECIPROCAL, UNKNOWN_SIGN)

POSITIVE_RECURRENT = "positive_recurrent"
TRANSIENT = "transient"
RECURRENT = "recurrent"
UNCLASSIFIED = "unclassified"

DEFAULT_CAP = 0.9

_ETA_CODES = {
    "reciprocal_plus": K.ETA_RECIPROCAL_PLUS,
    "reciprocal_minus": K.ETA_RECIPROCAL_MINUS,
    "zero": K.ETA_ZERO,
    "tabulated": K.ETA_TABULATED,
}
_ETA_DEFAULT_SIGN = {
    "reciprocal_plus": NONNEGATIVE,
    "reciprocal_minus": BELOW_MINUS_RECIPROCAL,
    "zero": NONNEGATIVE,
    "tabulated": UNKNOWN_SIGN,
}
_KIND_CODES = {
    "power_law": K.POWER_LAW,
    "constant": K.CONSTANT,
    "rescaled": K.RESCALED,
    "critical": K.CRITICAL,
    "tabulated": K.TABULATED,
}


class FamilyError(ValueError):
    """Invalid family parameters or evaluation outside the family's domain."""


@dataclass(frozen=True)
class EtaSpec:
    """Perturbation ``eta`` of a critical family, ``c(k) = (1 + eta(k)) / k``."""

    form: str
    eventual_sign: str = UNKNOWN_SIGN
    values: Optional[tuple] = None

    def __post_init__(self):
        if self.form not in _ETA_CODES:
            raise FamilyError(f"unknown eta form {self.form!r}")
        if self.eventual_sign not in EVENTUAL_SIGNS:
            raise FamilyError(f"unknown eventual_sign {self.eventual_sign!r}")
        if self.form == "tabulated":
            if not self.values:
                raise FamilyError("tabulated eta needs values")
            if any(v <= -1.0 for v in self.values):
                raise FamilyError("eta(k) must exceed -1 so that c(k) > 0")


@dataclass(frozen=True)
class ThinningFamily:
    """The sequence c(k) in (0, 1) with its declared limit metadata.

    Build instances with the class-method constructors (:meth:`power_law`,
    :meth:`constant`, :meth:`rescaled`, :meth:`critical`, :meth:`tabulated`)
    or from a config record with :meth:`from_record`.
    """

    kind: str
    params: tuple
    declared_rho: Optional[float]
    tail_exponent: Optional[float] = None
    eventual_sign: str = UNKNOWN_SIGN
    table: Optional[tuple] = None
    eta_spec: Optional[EtaSpec] = None
    _encoded: Any = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        params = np.asarray(self.params, dtype=np.float64)
        table = np.asarray(self.table if self.table is not None else (), dtype=np.float64)
        object.__setattr__(self, "_encoded", (_KIND_CODES[self.kind], params, table))

    # -- constructors ---------------------------------------------------------

    @classmethod
    def power_law(cls, a: float) -> "ThinningFamily":
        """c(k) = 1/(k**a + 1); rho is +inf, 1 or 0 as a <, =, > 1."""
        a = float(a)
        if not a > 0:
            raise FamilyError("power_law needs a > 0")
        if a < 1:
            rho = math.inf
        elif a == 1:
            rho = 1.0
        else:
            rho = 0.0
        sign = BELOW_MINUS_RECIPROCAL if a == 1 else UNKNOWN_SIGN
        return cls("power_law", (a,), rho, tail_exponent=a - 1.0, eventual_sign=sign)

    @classmethod
    def constant(cls, c: float) -> "ThinningFamily":
        c = float(c)
        if not 0.0 < c < 1.0:
            raise FamilyError("constant family needs 0 < c < 1")
        return cls("constant", (c,), math.inf)

    @classmethod
    def rescaled(cls, rho: float, cap: float = DEFAULT_CAP) -> "ThinningFamily":
        """c(k) = min(cap, rho/k), so that k c(k) = rho for k >= rho/cap."""
        rho, cap = float(rho), float(cap)
        if not rho > 0:
            raise FamilyError("rescaled family needs rho > 0")
        if not 0.0 < cap < 1.0:
            raise FamilyError("rescaled family needs 0 < cap < 1")
        sign = NONNEGATIVE if rho == 1.0 else UNKNOWN_SIGN
        return cls("rescaled", (rho, cap), rho, tail_exponent=0.0, eventual_sign=sign)

    @classmethod
    def critical(cls, eta: "str | EtaSpec", cap: float = DEFAULT_CAP,
                 values: Optional[Sequence[float]] = None,
                 eventual_sign: Optional[str] = None) -> "ThinningFamily":
        """c(k) = min(cap, (1 + eta(k))/k) with eta -> 0, so rho = 1.

        The cap only touches finitely many k and keeps c(k) < 1 there.
        """
        if isinstance(eta, str):
            sign = eventual_sign or _ETA_DEFAULT_SIGN.get(eta, UNKNOWN_SIGN)
            eta = EtaSpec(eta, sign, tuple(float(v) for v in values) if values else None)
        cap = float(cap)
        if not 0.0 < cap < 1.0:
            raise FamilyError("critical family needs 0 < cap < 1")
        return cls("critical", (float(_ETA_CODES[eta.form]), cap), 1.0,
                   eventual_sign=eta.eventual_sign, table=eta.values, eta_spec=eta)

    @classmethod
    def tabulated(cls, values: Sequence[float], declared_rho: Optional[float] = None,
                  eventual_sign: str = UNKNOWN_SIGN,
                  tail_exponent: Optional[float] = None) -> "ThinningFamily":
        """Finite table c(1..n); limits must be declared by the caller."""
        values = tuple(float(v) for v in values)
        if not values:
            raise FamilyError("tabulated family needs at least one value")
        if not all(0.0 < v < 1.0 for v in values):
            raise FamilyError("tabulated values must lie in (0, 1)")
        if declared_rho is not None and declared_rho < 0:
            raise FamilyError("declared_rho must be nonnegative")
        if eventual_sign not in EVENTUAL_SIGNS:
            raise FamilyError(f"unknown eventual_sign {eventual_sign!r}")
        rho = None if declared_rho is None else float(declared_rho)
        return cls("tabulated", (), rho, tail_exponent=tail_exponent,
                   eventual_sign=eventual_sign, table=values)

    @classmethod
    def from_record(cls, record: dict) -> "ThinningFamily":
        """Build from a tagged record such as ``{"kind": "power_law", "a": 1.5}``."""
        rec = dict(record)
        kind = rec.pop("kind", None)
        if kind not in _KIND_CODES:
            raise FamilyError(f"unknown family kind {kind!r}")
        try:
            if kind == "power_law":
                family = cls.power_law(rec.pop("a"))
            elif kind == "constant":
                family = cls.constant(rec.pop("c"))
            elif kind == "rescaled":
                family = cls.rescaled(rec.pop("rho"), rec.pop("cap", DEFAULT_CAP))
            elif kind == "critical":
                family = cls.critical(rec.pop("eta"), rec.pop("cap", DEFAULT_CAP),
                                      rec.pop("values", None), rec.pop("eventual_sign", None))
            else:
                family = cls.tabulated(rec.pop("values"), rec.pop("declared_rho", None),
                                       rec.pop("eventual_sign", UNKNOWN_SIGN),
                                       rec.pop("tail_exponent", None))
        except KeyError as exc:
            raise FamilyError(f"family record missing field {exc}") from None
        if rec:
            raise FamilyError(f"unknown family fields: {sorted(rec)}")
        return family

    def to_record(self) -> dict:
        if self.kind == "power_law":
            return {"kind": "power_law", "a": self.params[0]}
        if self.kind == "constant":
            return {"kind": "constant", "c": self.params[0]}
        if self.kind == "rescaled":
            return {"kind": "rescaled", "rho": self.params[0], "cap": self.params[1]}
        if self.kind == "critical":
            rec = {"kind": "critical", "eta": self.eta_spec.form, "cap": self.params[1],
                   "eventual_sign": self.eventual_sign}
            if self.eta_spec.values:
                rec["values"] = list(self.eta_spec.values)
            return rec
        rec = {"kind": "tabulated", "values": list(self.table),
               "eventual_sign": self.eventual_sign}
        if self.declared_rho is not None:
            rec["declared_rho"] = self.declared_rho
        if self.tail_exponent is not None:
            rec["tail_exponent"] = self.tail_exponent
        return rec

    # -- evaluation -----------------------------------------------------------

    @property
    def encoded(self):
        """``(kind_code, params, table)`` triple consumed by the compiled kernels."""
        return self._encoded

    @property
    def max_k(self) -> Optional[int]:
        """Largest k at which c(k) is defined, or None when unbounded."""
        if self.kind == "tabulated" or (self.kind == "critical" and self.eta_spec.form == "tabulated"):
            return len(self.table)
        return None

    def c(self, k: int) -> float:
        k = int(k)
        if k < 1:
            raise FamilyError("c(k) is defined for k >= 1")
        if self.max_k is not None and k > self.max_k:
            raise FamilyError(f"k={k} outside tabulated range 1..{self.max_k}")
        value = K.c_value(*self._encoded, k)
        if not 0.0 < value < 1.0:
            raise FamilyError(f"c({k}) = {value} is not in (0, 1)")
        return value

    def c_array(self, ks) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        if ks.size and ks.min() < 1:
            raise FamilyError("c(k) is defined for k >= 1")
        if self.max_k is not None and ks.size and ks.max() > self.max_k:
            raise FamilyError(f"k outside tabulated range 1..{self.max_k}")
        out = K.c_array(*self._encoded, ks.ravel()).reshape(ks.shape)
        if out.size and not (np.all(out > 0.0) and np.all(out < 1.0)):
            raise FamilyError("family produced c(k) outside (0, 1)")
        return out

    def __call__(self, k: int) -> float:
        return self.c(k)


def eval_c(family: ThinningFamily, k: int) -> float:
    return family.c(k)


def rho_limit(family: ThinningFamily) -> Optional[float]:
    """lim k c(k) as declared; ``math.inf`` for +inf and None when unknown."""
    return family.declared_rho


def eta(family: ThinningFamily, k: int) -> float:
    """k c(k) - 1."""
    return k * family.c(k) - 1.0


def gamma0(family: ThinningFamily) -> Optional[int]:
    """Smallest integer gamma >= 0 with sum_k (k c(k))**(1+gamma) finite.

    Only defined from a declared positive tail exponent ``b`` (k c(k) ~ k**-b),
    in which case the series converges iff ``gamma > 1/b - 1``. Returns None
    ("undefined") otherwise, including every power law with a <= 1.
    """
    b = family.tail_exponent
    if b is None or not b > 0 or math.isinf(b):
        return None
    if family.kind == "power_law":
        # exact rational arithmetic on the float a, so a = (k+1)/k lands on k
        inv = 1 / (Fraction(family.params[0]) - 1)
    else:
        inv = 1 / Fraction(b)
    return max(0, math.floor(inv))


def gamma_threshold(family: ThinningFamily) -> Optional[float]:
    """Real-valued convergence threshold ``1/b - 1`` behind :func:`gamma0`."""
    b = family.tail_exponent
    if b is None or not b > 0:
        return None
    return 1.0 / b - 1.0


@dataclass(frozen=True)
class RegularityScan:
    sup_ratio: float
    bounded: bool
    ratios: np.ndarray = field(repr=False)


def regularity_sup(family: ThinningFamily, k_max: int) -> RegularityScan:
    """Scan c(k-1)/c(k) for 2 <= k <= k_max.

    ``bounded`` is a finite-range heuristic: the maximum over the second half of
    the scan does not exceed the maximum over the first half.
    """
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    if family.max_k is not None:
        k_max = min(k_max, family.max_k)
    cs = family.c_array(np.arange(1, k_max + 1))
    ratios = cs[:-1] / cs[1:]
    half = max(1, len(ratios) // 2)
    bounded = bool(ratios[half:].max(initial=0.0) <= ratios[:half].max())
    return RegularityScan(float(ratios.max()), bounded, ratios)


@dataclass(frozen=True)
class RegimeReport:
    regime: str
    rule: str
    speed: Optional[float] = None
    gamma0: Optional[int] = None
    gamma_threshold: Optional[float] = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "rule": self.rule,
            "speed": self.speed,
            "gamma0": self.gamma0,
            "gamma_threshold": self.gamma_threshold,
            "reason": self.reason,
        }


RULE_FOSTER = "rho>1: Foster drift with h(x)=x"
RULE_DOMINATION = "rho<1: domination by inflated-Poisson walk"
RULE_SUBMARTINGALE = "rho=1, eta eventually >= 0: 1/(N+x) submartingale"
RULE_SUPERMARTINGALE = "rho=1, eta <= -1/(1+x) eventually: 1/x supermartingale"
RULE_NONE = "none"


def classify(family: ThinningFamily) -> RegimeReport:
    """Regime of the chain from the declared rho and eventual sign of eta."""
    rho = family.declared_rho
    g0 = gamma0(family)
    thr = gamma_threshold(family)
    if rho is None:
        return RegimeReport(UNCLASSIFIED, RULE_NONE,
                            reason="no declared rho: limits are not computable from a finite table")
    if rho > 1:
        return RegimeReport(POSITIVE_RECURRENT, RULE_FOSTER)
    if rho < 1:
        return RegimeReport(TRANSIENT, RULE_DOMINATION, speed=1.0 - rho,
                            gamma0=g0, gamma_threshold=thr)
    if family.eventual_sign == NONNEGATIVE:
        return RegimeReport(RECURRENT, RULE_SUBMARTINGALE)
    if family.eventual_sign == BELOW_MINUS_RECIPROCAL:
        return RegimeReport(TRANSIENT, RULE_SUPERMARTINGALE, speed=0.0)
    return RegimeReport(UNCLASSIFIED, RULE_NONE,
                        reason="rho=1 with eta of unknown or mixed eventual sign")
