"""Potential families for discrete Schrodinger operators and their block structure.

Families: substitution fixed points, Sturmian rotation sequences, the prime
and sparse two-valued potentials, and the hierarchical potential
``lambda * f(ord n)`` with ``f(m) = 1 + R + ... + R^(m-1)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cfrac import Surd, parse_omega
from .errors import (
    InvalidRule,
    NoKnownSpecialEnergy,
    NonPrefixRule,
    WindowTooLarge,
)

FAMILIES = ("substitution", "sturmian", "prime", "sparse", "hierarchical", "explicit")
GEOMETRIES = ("half", "whole")
MAX_WINDOW = 10**7

# two-sided substitution words are read off a long one-sided fixed point
# starting this many symbols in, so V(n) = u[WHOLE_LINE_CENTER + n]
WHOLE_LINE_CENTER = 2**20

# Named rules, each a map symbol -> image over {a, b}.
RULES = {
    "period_doubling": {"a": "ab", "b": "aa"},
    "fibonacci": {"a": "ab", "b": "a"},
    "thue_morse": {"a": "ab", "b": "ba"},
}


def odd_even_rule(k: int, l: int, odd: bool = True) -> dict:
    """``S(a) = a^(2k-1) b`` (or ``a^(2k) b``), ``S(b) = a^(2l)``."""
    return {"a": "a" * (2 * k - (1 if odd else 0)) + "b", "b": "a" * (2 * l)}


def generalized_fibonacci(m: int, n: int) -> dict:
    return {"a": "a" * m + "b" * n, "b": "a"}


def generalized_thue_morse(m: int, n: int) -> dict:
    return {"a": "a" * m + "b" * n, "b": "b" * n + "a" * m}


@dataclass(frozen=True)
class PotentialSpec:
    """A potential family with its parameters.

    ``params`` by family:
      substitution: ``rule`` (name or symbol->word map), ``seed`` (default "a")
      sturmian: ``omega`` (tag, ``surd:p,d,q``, decimal string or float), ``theta``
      sparse: ``gamma`` (integer >= 2)
      hierarchical: ``R`` (> 0), ``v0`` (value at the origin, default 0)
      explicit: ``start`` and ``values``
    Two-valued families use the levels ``a`` and ``b``; Sturmian and
    hierarchical use ``coupling``.
    """

    family: str
    params: dict = field(default_factory=dict)
    a: float = 0.0
    b: float = 1.0
    coupling: float = 1.0
    geometry: str = "half"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.family == "sparse":
            g = self.params.get("gamma", 2)
            if int(g) != g or g < 2:
                raise ValueError("sparse gamma must be an integer >= 2")
        if self.family == "hierarchical" and self.params.get("R", 1.0) <= 0:
            raise ValueError("hierarchical R must be positive")
        if self.family == "substitution":
            validate_rule(self.rule)

    @property
    def rule(self) -> dict:
        r = self.params.get("rule", "period_doubling")
        return RULES[r] if isinstance(r, str) else dict(r)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": self.params,
            "a": self.a,
            "b": self.b,
            "coupling": self.coupling,
            "geometry": self.geometry,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialSpec":
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "PotentialSpec":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class PotentialSamples:
    """Values ``V(n)`` for ``n = start, ..., start + len(values) - 1``."""

    start: int
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def stop(self) -> int:
        """Last site (inclusive)."""
        return self.start + len(self.values) - 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.start, self.stop + 1)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, n: int) -> float:
        if not self.start <= n <= self.stop:
            raise IndexError(f"site {n} outside [{self.start}, {self.stop}]")
        return float(self.values[n - self.start])

    def slice(self, lo: int, hi: int) -> np.ndarray:
        """Values on sites ``lo..hi`` inclusive."""
        if lo < self.start or hi > self.stop:
            raise IndexError(f"[{lo}, {hi}] outside [{self.start}, {self.stop}]")
        return self.values[lo - self.start: hi - self.start + 1]

    def __add__(self, other: "PotentialSamples") -> "PotentialSamples":
        if (self.start, len(self)) != (other.start, len(other)):
            raise ValueError("windows differ")
        return PotentialSamples(self.start, self.values + other.values, dict(self.meta))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "V"])
        for n, v in zip(self.sites, self.values):
            w.writerow([int(n), repr(float(v))])
        return buf.getvalue()


def validate_rule(rule: dict) -> None:
    if not rule:
        raise InvalidRule("empty rule")
    for s, img in rule.items():
        if not img:
            raise InvalidRule(f"image of {s!r} is empty")
        missing = set(img) - set(rule)
        if missing:
            raise InvalidRule(f"image of {s!r} uses undefined symbols {sorted(missing)}")


def subst_fixed_point(rule: dict, seed: str, length: int) -> str:
    """First ``length`` symbols of the one-sided fixed point ``lim S^k(seed)``."""
    if length < 1:
        raise ValueError("length must be >= 1")
    validate_rule(rule)
    if seed not in rule:
        raise InvalidRule(f"seed {seed!r} not in rule")
    if not rule[seed].startswith(seed):
        raise NonPrefixRule(f"S({seed}) = {rule[seed]!r} does not begin with {seed!r}")
    w = seed
    while len(w) < length:
        nxt = "".join(rule[c] for c in w)
        if nxt == w:
            # S(w) = w: the periodic word www... is itself a fixed point
            w = w * (length // len(w) + 1)
            break
        w = nxt
    return w[:length]


def primes_upto(n: int) -> np.ndarray:
    """Boolean mask ``is_prime[0..n]`` by the sieve of Eratosthenes."""
    mask = np.ones(max(n + 1, 2), dtype=bool)
    mask[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if mask[p]:
            mask[p * p:: p] = False
    return mask[: n + 1]


def ord2(n: int) -> int:
    """Number of factors 2 in ``n != 0``."""
    n = abs(n)
    return (n & -n).bit_length() - 1


def hierarchical_f(m: int, R: float) -> float:
    """``f(m) = sum_{k<m} R^k``."""
    if R == 1:
        return float(m)
    return (R**m - 1.0) / (R - 1.0)


def _rotation_floor(omega, theta: Fraction, n: int) -> int:
    if isinstance(omega, Surd):
        return omega.floor_affine(n, theta)
    return math.floor(n * omega + theta)


def sturmian_values(omega, theta, sites) -> np.ndarray:
    """``chi_[1-omega, 1)(n omega + theta mod 1)`` in exact arithmetic.

    Uses ``chi = floor((n+1) omega + theta) - floor(n omega + theta)``.
    """
    w, _ = parse_omega(omega)
    th = Fraction(theta)
    sites = list(sites)
    if not sites:
        return np.zeros(0)
    fl = [_rotation_floor(w, th, n) for n in range(sites[0], sites[-1] + 2)]
    return np.diff(np.asarray(fl, dtype=np.int64)).astype(float)


def realize(spec: PotentialSpec, window, max_window: int = MAX_WINDOW) -> PotentialSamples:
    """Sample ``V(n)`` on the inclusive integer window ``(lo, hi)``."""
    lo, hi = int(window[0]), int(window[1])
    if hi < lo:
        raise ValueError("empty window")
    size = hi - lo + 1
    if size > max_window:
        raise WindowTooLarge(f"window of {size} sites exceeds {max_window}")
    sites = np.arange(lo, hi + 1)
    meta = {"family": spec.family, "geometry": spec.geometry}
    p = spec.params
    fam = spec.family

    if fam == "sturmian":
        vals = spec.coupling * sturmian_values(p["omega"], p.get("theta", 0), sites)
    elif fam == "prime":
        is_p = primes_upto(max(hi, 2))
        vals = np.where((sites >= 2) & is_p[np.clip(sites, 0, None)], spec.b, spec.a)
    elif fam == "sparse":
        g = int(p.get("gamma", 2))
        hits = set()
        x = g
        while x <= hi:
            hits.add(x)
            x *= g
        vals = np.array([spec.b if n in hits else spec.a for n in sites], dtype=float)
    elif fam == "hierarchical":
        R = float(p.get("R", 1.0))
        v0 = float(p.get("v0", 0.0))
        fvals = {}
        vals = np.empty(size)
        for i, n in enumerate(sites):
            if n == 0:
                vals[i] = v0
                continue
            k = ord2(int(n))
            if k not in fvals:
                fvals[k] = spec.coupling * hierarchical_f(k, R)
            vals[i] = fvals[k]
        meta["v0"] = v0
    elif fam == "substitution":
        rule, seed = spec.rule, p.get("seed", "a")
        if spec.geometry == "whole" or lo < 1:
            if lo < -WHOLE_LINE_CENTER:
                raise WindowTooLarge("window reaches past the two-sided construction")
            off = WHOLE_LINE_CENTER
            meta["center"] = off
        else:
            off = -1
        word = subst_fixed_point(rule, seed, off + hi + 1)
        levels = {"a": spec.a, "b": spec.b}
        vals = np.array([levels[c] for c in word[off + lo: off + hi + 1]], dtype=float)
    elif fam == "explicit":
        start = int(p["start"])
        src = np.asarray(p["values"], dtype=float)
        if lo < start or hi > start + len(src) - 1:
            raise WindowTooLarge("window outside explicit values")
        vals = src[lo - start: hi - start + 1]
    else:  # pragma: no cover
        raise ValueError(fam)
    return PotentialSamples(lo, np.asarray(vals, dtype=float), meta)


def to_word(samples: PotentialSamples, a: float, b: float) -> str:
    """Map a two-valued sample sequence to a word over ``{a, b}``."""
    out = []
    for v in samples.values:
        if v == a:
            out.append("a")
        elif v == b:
            out.append("b")
        else:
            raise ValueError(f"value {v} is neither level")
    return "".join(out)


def _blocks(word: str, sym: str, start: int):
    """Maximal runs of ``sym`` in ``word[start:]`` bounded on both sides by another symbol.

    Yields ``(index, length)`` with 0-based index of the run start.
    """
    i, n = start, len(word)
    while i < n:
        if word[i] != sym:
            i += 1
            continue
        j = i
        while j < n and word[j] == sym:
            j += 1
        if i > start and j < n:
            yield i, j - i
        i = j


@dataclass(frozen=True)
class StructureResult:
    ok: bool
    first_violation: int | None = None

    def __bool__(self):
        return self.ok


def check_structure(word: str, condition: str, from_index: int = 1, k: int | None = None,
                    symbols: str = "ab") -> StructureResult:
    """Check one of the block conditions S1-S4 on ``word[from_index:]`` (1-based).

    ``symbols`` gives the roles ``(a, b)``; pass ``"ba"`` to swap them.
    Runs touching the start of the suffix or the end of the word are ignored.
    """
    sa, sb = symbols
    s = from_index - 1
    if s >= len(word):
        return StructureResult(True)
    cond = condition.upper()
    if cond == "S1":
        for i in range(s, len(word) - 1):
            if word[i] == sb and word[i + 1] == sb:
                return StructureResult(False, i + 1)
        return StructureResult(True)
    if cond in ("S2", "S3"):
        want = 1 if cond == "S2" else 0
        for i, run in _blocks(word, sa, s):
            if run % 2 != want:
                return StructureResult(False, i + 1)
        return StructureResult(True)
    if cond == "S4":
        if k is None or k < 3 or k % 2 == 0:
            raise ValueError("S4 needs an odd k >= 3")
        for i, run in _blocks(word, sb, s):
            if run % k:
                return StructureResult(False, i + 1)
        return StructureResult(True)
    raise ValueError(f"unknown condition {condition!r}")


def _two_valued_word(spec: PotentialSpec, length: int) -> str:
    samples = realize(PotentialSpec(spec.family, spec.params, spec.a, spec.b,
                                    spec.coupling, "half"), (1, length))
    return to_word(samples, spec.a, spec.b)


def _s4_period(word: str, sym: str, start: int):
    lengths = [run for _, run in _blocks(word, sym, start)]
    if not lengths:
        return None
    g = 0
    for r in lengths:
        g = math.gcd(g, r)
    return g if g >= 3 and g % 2 == 1 else None


def special_energies(spec: PotentialSpec, probe_length: int = 10**4):
    """Energies with power-law bounded transfer matrices, with growth class.

    Returns a list of ``(E0, growth)`` with growth in
    ``{"Bounded", "Linear", "Unbounded"}``; sorted by ``E0``.
    """
    from .transfer import monodromy_energies

    if spec.family not in ("substitution", "prime", "sparse"):
        raise NoKnownSpecialEnergy(f"{spec.family} is not a recognized two-valued family")
    if spec.a == spec.b:
        raise NoKnownSpecialEnergy("levels coincide")
    word = _two_valued_word(spec, probe_length)
    start = probe_length // 10 + 1
    levels = {"a": spec.a, "b": spec.b}

    def classify(gap):
        if math.isclose(gap, 2.0, rel_tol=0, abs_tol=1e-12):
            return "Linear"
        return "Bounded" if gap < 2 else "Unbounded"

    for sa, sb in ("ab", "ba"):
        a, b = levels[sa], levels[sb]
        if check_structure(word, "S1", start, symbols=sa + sb) and \
                check_structure(word, "S2", start, symbols=sa + sb):
            return [(a, "Linear")]
    for sa, sb in ("ab", "ba"):
        a, b = levels[sa], levels[sb]
        if check_structure(word, "S3", start, symbols=sa + sb):
            g = abs(a - b)
            return [] if g > 2 and not math.isclose(g, 2.0) else [(a, classify(g))]
    for sa, sb in ("ab", "ba"):
        a, b = levels[sa], levels[sb]
        k = _s4_period(word, sb, start)
        if k is not None:
            return [(e, classify(abs(a - e))) for e in monodromy_energies(b, k)]
    raise NoKnownSpecialEnergy("word satisfies none of S1+S2, S3, S4")
