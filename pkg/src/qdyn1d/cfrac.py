"""Continued fractions of rotation numbers and the Sturmian exponent.

Quadratic surds are expanded exactly with integer arithmetic (the periodic
PQa recurrence); decimal and float inputs are treated as the exact rational
they denote and expanded only as deep as their stated precision supports.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction

from .errors import RationalInput, ZeroCoupling

__all__ = [
    "Surd",
    "CFExpansion",
    "DensityEstimate",
    "SturmianExponent",
    "parse_omega",
    "cf_expand",
    "convergents",
    "bounded_density",
    "sturmian_alpha",
    "floor_surd",
]


def floor_surd(a: int, b: int, d: int, q: int) -> int:
    """Exact ``floor((a + b*sqrt(d)) / q)`` for integers, ``d`` not a square."""
    if q == 0:
        raise ZeroDivisionError("q must be nonzero")
    if q < 0:
        a, b, q = -a, -b, -q
    if b == 0:
        s = 0
    elif b > 0:
        s = math.isqrt(b * b * d)
    else:
        s = -math.isqrt(b * b * d) - 1
    return (a + s) // q


@dataclass(frozen=True)
class Surd:
    """The real number ``(p + sqrt(d)) / q`` with ``d`` a positive non-square."""

    p: int
    d: int
    q: int

    def __post_init__(self):
        if self.q == 0:
            raise ValueError("surd denominator must be nonzero")
        if self.d <= 0 or math.isqrt(self.d) ** 2 == self.d:
            raise RationalInput(f"sqrt({self.d}) is rational")

    def __float__(self):
        return (self.p + math.sqrt(self.d)) / self.q

    def floor_affine(self, n: int, theta: Fraction = Fraction(0)) -> int:
        """Exact ``floor(n*self + theta)`` for integer ``n`` and rational ``theta``."""
        u, v = theta.numerator, theta.denominator
        return floor_surd(v * n * self.p + u * self.q, v * n, self.d, self.q * v)

    @property
    def tag(self) -> str:
        return f"surd:{self.p},{self.d},{self.q}"


GOLDEN = Surd(-1, 5, 2)
SILVER = Surd(-1, 2, 1)

_TAGS = {"golden": GOLDEN, "silver": SILVER}


def parse_omega(value):
    """Turn a user-supplied rotation number into a ``Surd`` or ``Fraction``.

    Accepted: a ``Surd``; the tags ``"golden"``/``"silver"``; ``"surd:p,d,q"``;
    a decimal string; a float; a ``Fraction`` (always rational).
    Returns ``(omega, delta)`` where ``delta`` is the input uncertainty
    (0 for exact surds and fractions).
    """
    if isinstance(value, Surd):
        return value, 0.0
    if isinstance(value, (Fraction, int)):
        return Fraction(value), 0.0
    if isinstance(value, float):
        return Fraction(value), abs(value) * 2.0**-52
    if isinstance(value, str):
        s = value.strip().lower()
        if s in _TAGS:
            return _TAGS[s], 0.0
        if s.startswith("surd:"):
            p, d, q = (int(t) for t in s[5:].split(","))
            return Surd(p, d, q), 0.0
        dec = Decimal(s)
        exp = dec.as_tuple().exponent
        delta = 0.5 * 10.0 ** exp if exp < 0 else 0.0
        return Fraction(dec), delta
    raise TypeError(f"unsupported rotation number {value!r}")


@dataclass(frozen=True)
class CFExpansion:
    quotients: tuple
    exact: bool
    truncated: bool = False

    def __post_init__(self):
        if any(a < 1 for a in self.quotients):
            raise ValueError("partial quotients must be positive")

    @property
    def depth(self) -> int:
        return len(self.quotients)


def _expand_surd(w: Surd, depth: int) -> list:
    # PQa form x = (P + sqrt(D)) / Q with Q | D - P^2
    P, D, Q = w.p * abs(w.q), w.d * w.q * w.q, w.q * abs(w.q)
    out = []
    for i in range(depth + 1):
        a = floor_surd(P, 1, D, Q)
        if i > 0:
            out.append(a)
        P = a * Q - P
        Q = (D - P * P) // Q
    return out


def _expand_rational(x: Fraction, delta: float, depth: int):
    """Euclid on the exact rational ``x``; stop where ``delta`` blurs the quotients."""
    out = []
    p_prev, q_prev, p, q = 1, 0, 0, 1
    r = x
    while len(out) < depth:
        r = 1 / r
        a = math.floor(r)
        p_new, q_new = a * p + p_prev, a * q + q_prev
        if 2.0 * q_new * q_new * delta >= 1.0:
            # next quotient is below the input resolution
            if q * q * delta < 1e-4 and abs(float(x - Fraction(p, q))) <= 10 * delta:
                raise RationalInput(f"{float(x)!r} equals {p}/{q} within input precision")
            return out, True
        out.append(a)
        p_prev, q_prev, p, q = p, q, p_new, q_new
        r = r - a
        if r == 0:
            raise RationalInput(f"{x} is rational ({p}/{q})")
    return out, False


def cf_expand(omega, depth: int = 200) -> CFExpansion:
    """Partial quotients ``a_1..a_depth`` of ``omega`` in (0, 1)."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    w, delta = parse_omega(omega)
    if isinstance(w, Surd):
        if not 0.0 < float(w) < 1.0:
            raise ValueError("omega must lie in (0, 1)")
        return CFExpansion(tuple(_expand_surd(w, depth)), exact=True)
    if not 0 < w < 1:
        raise ValueError("omega must lie in (0, 1)")
    if delta == 0:
        raise RationalInput(f"{w} is rational")
    quotients, truncated = _expand_rational(w, delta, depth)
    if truncated:
        warnings.warn(
            f"precision exhausted after {len(quotients)} partial quotients", stacklevel=2
        )
    return CFExpansion(tuple(quotients), exact=False, truncated=truncated)


def convergents(exp: CFExpansion) -> list:
    """``[(p_0, q_0), (p_1, q_1), ...]`` with ``p_0/q_0 = 0/1`` and ``p_1/q_1 = 1/a_1``."""
    out = [(0, 1)]
    if exp.depth == 0:
        return out
    out.append((1, exp.quotients[0]))
    for a in exp.quotients[1:]:
        (p2, q2), (p1, q1) = out[-2], out[-1]
        out.append((a * p1 + p2, a * q1 + q2))
    return out


@dataclass(frozen=True)
class DensityEstimate:
    value: float
    averages: tuple = field(repr=False)


def bounded_density(exp: CFExpansion) -> DensityEstimate:
    """Finite-depth surrogate of ``limsup (1/n) sum_{k<=n} a_k``.

    The maximum of the running averages over ``n`` in ``[depth/2, depth]``.
    """
    if exp.depth < 10:
        raise ValueError("bounded_density needs depth >= 10")
    total = 0
    avgs = []
    for n, a in enumerate(exp.quotients, start=1):
        total += a
        avgs.append(Fraction(total, n))
    tail = avgs[(exp.depth + 1) // 2 - 1:]
    return DensityEstimate(float(max(tail)), tuple(float(x) for x in avgs))


@dataclass(frozen=True)
class SturmianExponent:
    d_hat: float
    c_lambda: float
    alpha: float
    D: float


def c_lambda(lam: float) -> float:
    return 2.0 + math.sqrt(8.0 + lam * lam)


def sturmian_alpha(lam: float, exp: CFExpansion, D: float = 1.0) -> SturmianExponent:
    """Transfer-matrix exponent ``D * d(omega) * log C_lambda``.

    ``D`` is an unspecified universal constant; callers supply it.
    """
    if lam == 0:
        raise ZeroCoupling("coupling must be nonzero")
    if D <= 0:
        raise ValueError("D must be positive")
    d_hat = bounded_density(exp).value
    c = c_lambda(lam)
    return SturmianExponent(d_hat, c, D * d_hat * math.log(c), D)
