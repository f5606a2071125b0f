"""Separable invex regularizers and their scalar subdifferentials.

Every regularizer is a sum over coordinates of a scalar penalty ``r``:

===================  =========================================
kind                 r(w)
===================  =========================================
``lp``               (|w| + eps)**p,  0 < p < 1
``log``              log(1 + |w|)
``ratio``            |w| / (2 + 2|w|)
``sq``               w**2 / (1 + w**2)
``log_minus_ratio``  log(1 + |w|) - |w| / (2 + 2|w|)
``l1``               |w|  (convex baseline)
===================  =========================================
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InputError, ParameterError

__all__ = [
    "Kind",
    "Regularizer",
    "Interval",
    "min_epsilon",
    "penalty",
    "derivative",
    "evaluate",
    "subdiff_scalar",
    "weak_convexity",
]


class Kind(str, enum.Enum):
    LP = "lp"
    LOG = "log"
    RATIO = "ratio"
    SQ = "sq"
    LOG_MINUS_RATIO = "log_minus_ratio"
    L1 = "l1"


_ALIASES = {
    "logminusratio": Kind.LOG_MINUS_RATIO,
    "log-minus-ratio": Kind.LOG_MINUS_RATIO,
    "lmr": Kind.LOG_MINUS_RATIO,
}


def _as_kind(kind) -> Kind:
    if isinstance(kind, Kind):
        return kind
    key = str(kind).strip().lower()
    if key in _ALIASES:
        return _ALIASES[key]
    try:
        return Kind(key)
    except ValueError:
        raise ParameterError(f"unknown regularizer kind {kind!r}") from None


def min_epsilon(p: float) -> float:
    """Smallest admissible shift ``(p(1-p))**(1/(2-p))`` for the ``lp`` kind."""
    if not 0.0 < p < 1.0:
        raise ParameterError(f"p must lie in (0, 1), got {p}")
    return (p * (1.0 - p)) ** (1.0 / (2.0 - p))


class Interval(NamedTuple):
    lo: float
    hi: float

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= value <= self.hi + tol

    def distance(self, value: float) -> float:
        """Distance from ``value`` to the interval (0 if inside)."""
        return max(self.lo - value, value - self.hi, 0.0)


@dataclass(frozen=True)
class Regularizer:
    """Tagged descriptor of one regularizer kind.

    Only the ``lp`` kind carries parameters. Its ``epsilon`` defaults to
    ``min_epsilon(p)`` and is rejected if smaller.
    """

    kind: Kind
    p: float | None = None
    epsilon: float | None = None

    def __post_init__(self):
        kind = _as_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is Kind.LP:
            if self.p is None:
                raise ParameterError("the lp regularizer requires p")
            p = float(self.p)
            floor = min_epsilon(p)
            eps = floor if self.epsilon is None else float(self.epsilon)
            # relative slack so a floor value that went through a decimal
            # round trip is still accepted
            if not math.isfinite(eps) or eps < floor * (1.0 - 1e-12):
                raise ParameterError(
                    f"epsilon={eps} is below the admissible floor {floor:.12g} for p={p}"
                )
            object.__setattr__(self, "p", p)
            object.__setattr__(self, "epsilon", eps)
        elif self.p is not None or self.epsilon is not None:
            raise ParameterError(f"the {kind.value} regularizer takes no parameters")

    @classmethod
    def lp(cls, p: float, epsilon: float | None = None) -> "Regularizer":
        return cls(Kind.LP, p, epsilon)

    @classmethod
    def of(cls, kind, **params) -> "Regularizer":
        return cls(_as_kind(kind), **params)

    @property
    def label(self) -> str:
        if self.kind is Kind.LP:
            return f"lp{self.p:g}"
        return self.kind.value

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        if self.kind is Kind.LP:
            out["p"] = self.p
            out["epsilon"] = self.epsilon
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Regularizer":
        data = dict(data)
        kind = data.pop("kind")
        unknown = set(data) - {"p", "epsilon"}
        if unknown:
            raise ParameterError(f"unknown regularizer fields {sorted(unknown)}")
        return cls(_as_kind(kind), data.get("p"), data.get("epsilon"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Regularizer":
        return cls.from_dict(json.loads(text))

    def __call__(self, x) -> float:
        return evaluate(self, x)


def penalty(reg: Regularizer, w):
    """Elementwise scalar penalty ``r(w)``."""
    a = np.abs(np.asarray(w, dtype=float))
    kind = reg.kind
    if kind is Kind.LP:
        return (a + reg.epsilon) ** reg.p
    if kind is Kind.LOG:
        return np.log1p(a)
    if kind is Kind.RATIO:
        return a / (2.0 + 2.0 * a)
    if kind is Kind.SQ:
        return a * a / (1.0 + a * a)
    if kind is Kind.LOG_MINUS_RATIO:
        return np.log1p(a) - a / (2.0 + 2.0 * a)
    return a


def _magnitude_slope(reg: Regularizer, a):
    """r'(a) for a > 0, extended continuously to a = 0 from the right."""
    kind = reg.kind
    if kind is Kind.LP:
        return reg.p * (a + reg.epsilon) ** (reg.p - 1.0)
    if kind is Kind.LOG:
        return 1.0 / (1.0 + a)
    if kind is Kind.RATIO:
        return 0.5 / (1.0 + a) ** 2
    if kind is Kind.SQ:
        return 2.0 * a / (1.0 + a * a) ** 2
    if kind is Kind.LOG_MINUS_RATIO:
        return (2.0 * a + 1.0) / (2.0 * (1.0 + a) ** 2)
    return np.ones_like(a)


def derivative(reg: Regularizer, w):
    """Elementwise derivative of ``r`` for ``w != 0`` (0 where ``w == 0``)."""
    w = np.asarray(w, dtype=float)
    return np.sign(w) * _magnitude_slope(reg, np.abs(w))


def evaluate(reg: Regularizer, x) -> float:
    """Return ``g(x) = sum_i r(x[i])``."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InputError("regularizer input contains non-finite values")
    return float(np.sum(penalty(reg, x)))


def subdiff_scalar(reg: Regularizer, w: float) -> Interval:
    """Clarke subdifferential of the scalar penalty at ``w``.

    Degenerate away from zero. At zero it is the convex hull of the one-sided
    derivative limits, which is ``[0, 0]`` for the smooth ``sq`` kind.
    """
    w = float(w)
    if not math.isfinite(w):
        raise InputError(f"w must be finite, got {w}")
    if w != 0.0:
        d = float(derivative(reg, w))
        return Interval(d, d)
    slope = float(_magnitude_slope(reg, 0.0))
    return Interval(-slope, slope)


def weak_convexity(reg: Regularizer) -> float:
    """Upper bound on ``-r''`` away from zero (0 for the convex ``l1``)."""
    kind = reg.kind
    if kind is Kind.LP:
        return reg.p * (1.0 - reg.p) * reg.epsilon ** (reg.p - 2.0)
    if kind in (Kind.LOG, Kind.RATIO):
        return 1.0
    if kind is Kind.SQ:
        return 0.5
    if kind is Kind.LOG_MINUS_RATIO:
        return 4.0 / 27.0
    return 0.0
