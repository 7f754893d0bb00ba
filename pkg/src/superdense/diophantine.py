"""Continued fractions of slopes and the square-tiled superdensity prediction."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

from .errors import KTooLarge, ParseError, PrecisionExhausted
from .surface import TranslationSurface, is_square_tiled

DEFAULT_DEPTH = 30
DEFAULT_BOUND = 10

BADLY = "badly_approximable_evidence"
NOT_BADLY = "not_badly_approximable_evidence"
RATIONAL = "rational"
INCONCLUSIVE = "inconclusive"

SUPERDENSE = "superdense"
NOT_SUPERDENSE = "not_superdense"
OUT_OF_FAMILY = "out_of_family"


@dataclass(frozen=True)
class ContinuedFractionExpansion:
    a0: int
    partial_quotients: tuple[int, ...]
    exact_terminated: bool
    depth: int
    requested_depth: int = 0
    precision_exhausted: bool = False

    @property
    def terms(self) -> list[int]:
        return [self.a0, *self.partial_quotients]

    def convergents(self) -> list[tuple[int, int]]:
        """(p_k, q_k) for k = 0 .. depth."""
        out = []
        p0, q0, p1, q1 = 1, 0, self.a0, 1
        out.append((p1, q1))
        for a in self.partial_quotients:
            p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
            out.append((p1, q1))
        return out

    def value(self) -> Fraction:
        return from_quotients(self.terms)

    def to_json_dict(self) -> dict:
        return {"a0": self.a0, "partial_quotients": list(self.partial_quotients),
                "exact_terminated": self.exact_terminated, "depth": self.depth,
                "precision_exhausted": self.precision_exhausted}

    def __str__(self) -> str:
        tail = ", ".join(map(str, self.partial_quotients))
        return f"[{self.a0}; {tail}]" if tail else f"[{self.a0}]"


def from_quotients(terms) -> Fraction:
    """The rational [a0; a1, ..., an]."""
    terms = [int(a) for a in terms]
    if not terms:
        raise ValueError("need at least one term")
    if any(a < 1 for a in terms[1:]):
        raise ValueError("partial quotients must be positive")
    x = Fraction(terms[-1])
    for a in reversed(terms[:-1]):
        x = a + 1 / x
    return x


def _to_fraction(x) -> Fraction:
    if isinstance(x, mpmath.mpf):
        man, exp = x.man_exp
        return Fraction(int(man)) * Fraction(2) ** int(exp)
    return Fraction(x)


@dataclass(frozen=True)
class NamedConstant:
    """A real constant evaluated on demand at whatever precision an expansion needs."""

    name: str

    def at(self, dps: int) -> mpmath.mpf:
        with mpmath.workdps(dps):
            return +_NAMED[self.name]()

    def __float__(self) -> float:
        return float(self.at(30))

    def __str__(self) -> str:
        return self.name


def _bracket(x, depth: int = DEFAULT_DEPTH) -> tuple[Fraction, Fraction] | Fraction:
    """An exact value for rationals, otherwise an interval certainly containing x."""
    if isinstance(x, NamedConstant):
        dps = max(50, 3 * depth + 20)
        c = _to_fraction(x.at(dps))
        w = Fraction(1, 10 ** (dps - 5)) * max(1, abs(c))
        return c - w, c + w
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError("slope must be finite")
        c = Fraction(x)
        w = Fraction(math.ulp(x)) * 4 if x else Fraction(1, 2**1070)
        return c - w, c + w
    if isinstance(x, mpmath.mpf):
        c = _to_fraction(x)
        w = abs(c) * Fraction(2) ** (-(mpmath.mp.prec - 4)) or Fraction(2) ** (-mpmath.mp.prec)
        return c - w, c + w
    raise TypeError(f"cannot expand {type(x).__name__}")


def continued_fraction(x, depth: int = DEFAULT_DEPTH) -> ContinuedFractionExpansion:
    """Expand ``x`` to ``depth`` partial quotients.

    Rationals (int, Fraction, names like ``"355/113"``) are expanded exactly
    and may terminate early.  Floating inputs are expanded by running the
    Gauss map on both ends of an interval of a few ulps around the value and
    keeping only quotients the two ends agree on; when they stop agreeing
    before ``depth``, :class:`PrecisionExhausted` is raised with the reliable
    part attached as ``.expansion``.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    x = slope_value(x) if isinstance(x, str) else x
    b = _bracket(x, depth)
    if isinstance(b, Fraction):
        a0 = math.floor(b)
        r = b - a0
        qs = []
        while r and len(qs) < depth:
            r = 1 / r
            a = math.floor(r)
            qs.append(a)
            r -= a
        return ContinuedFractionExpansion(a0, tuple(qs), r == 0, len(qs), depth)
    lo, hi = b
    a0 = math.floor(lo)
    if math.floor(hi) != a0:
        raise PrecisionExhausted("integer part not determined", expansion=None)
    lo, hi = lo - a0, hi - a0
    qs = []
    while len(qs) < depth:
        if lo <= 0:
            break
        lo, hi = 1 / hi, 1 / lo
        a = math.floor(lo)
        if math.floor(hi) != a:
            break
        qs.append(a)
        lo, hi = lo - a, hi - a
    exp = ContinuedFractionExpansion(a0, tuple(qs), False, len(qs), depth, len(qs) < depth)
    if len(qs) < depth:
        raise PrecisionExhausted(f"only {len(qs)} of {depth} partial quotients are reliable", expansion=exp)
    return exp


def detect_period(quotients, min_repeats: int = 2) -> tuple[int, int] | None:
    """(preperiod, period) of the shortest eventually periodic pattern seen at least ``min_repeats`` times."""
    q = list(quotients)
    n = len(q)
    for period in range(1, n // min_repeats + 1):
        for pre in range(0, n - min_repeats * period + 1):
            if all(q[i] == q[i + period] for i in range(pre, n - period)):
                return pre, period
    return None


@dataclass(frozen=True)
class SlopeClass:
    verdict: str
    max_quotient_seen: int
    depth: int
    precision_exhausted: bool = False
    expansion: ContinuedFractionExpansion | None = field(default=None, compare=False)


def is_badly_approximable(x, depth: int = DEFAULT_DEPTH, quotient_bound: int = DEFAULT_BOUND) -> SlopeClass:
    """Bounded-depth evidence on whether ``x`` has bounded partial quotients.

    A quotient above the bound anywhere gives negative evidence.  Positive
    evidence needs every quotient up to the full depth within the bound; if
    precision runs out first the verdict is ``inconclusive``.
    """
    if depth < 10:
        raise ValueError("depth must be at least 10")
    try:
        exp = continued_fraction(x, depth)
    except PrecisionExhausted as e:
        exp = e.expansion
        if exp is None:
            return SlopeClass(INCONCLUSIVE, 0, 0, True, None)
    m = max(exp.partial_quotients, default=0)
    if exp.exact_terminated:
        verdict = RATIONAL
    elif m > quotient_bound:
        verdict = NOT_BADLY
    elif exp.precision_exhausted:
        verdict = INCONCLUSIVE
    else:
        verdict = BADLY
    return SlopeClass(verdict, m, exp.depth, exp.precision_exhausted, exp)


def liouville_number(k: int) -> Fraction:
    """Sum of 10^(-n!) for n = 1..k, exactly."""
    if not isinstance(k, int) or k < 1:
        raise ValueError("k must be a positive integer")
    if k > 5:
        raise KTooLarge(f"k = {k} exceeds 5")
    return sum((Fraction(1, 10 ** math.factorial(n)) for n in range(1, k + 1)), Fraction(0))


_NAMED = {
    "phi": lambda: (1 + mpmath.sqrt(5)) / 2,
    "golden": lambda: (1 + mpmath.sqrt(5)) / 2,
    "sqrt2": lambda: mpmath.sqrt(2),
    "sqrt3": lambda: mpmath.sqrt(3),
    "sqrt5": lambda: mpmath.sqrt(5),
    "e": lambda: mpmath.e,
    "pi": lambda: mpmath.pi,
}


def slope_value(text: str):
    """A slope given by name or literal.

    Recognised: ``phi``/``golden``, ``sqrt2``, ``sqrt3``, ``sqrt5``, ``e``,
    ``pi`` (as high precision mpf), ``liouville_k``, ``p/q`` and decimal
    literals (exact rationals), and ``cf:a0,a1,...`` for a finite continued
    fraction.
    """
    s = text.strip().lower()
    if s in _NAMED:
        return NamedConstant(s)
    m = re.fullmatch(r"liouville_(\d+)", s)
    if m:
        return liouville_number(int(m.group(1)))
    if s.startswith("cf:"):
        try:
            return from_quotients([int(t) for t in s[3:].split(",") if t.strip()])
        except ValueError as e:
            raise ParseError(f"bad continued fraction {text!r}: {e}") from None
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"unrecognised slope {text!r}") from None


def beck_chen_predict(surface: TranslationSurface, slope, depth: int = DEFAULT_DEPTH,
                      quotient_bound: int = DEFAULT_BOUND) -> str:
    """Predicted superdensity of the flow of the given slope on a square-tiled surface.

    On square-tiled surfaces the flow is superdense exactly when the slope is
    badly approximable; rational slopes give closed or saddle orbits.  Any
    other surface is out of family.
    """
    if not is_square_tiled(surface):
        return OUT_OF_FAMILY
    if isinstance(slope, str) and slope.strip().lower() in ("vertical", "inf", "infinity"):
        return NOT_SUPERDENSE
    if isinstance(slope, float) and math.isinf(slope):
        return NOT_SUPERDENSE
    c = is_badly_approximable(slope, depth, quotient_bound)
    if c.verdict == BADLY:
        return SUPERDENSE
    if c.verdict in (NOT_BADLY, RATIONAL):
        return NOT_SUPERDENSE
    return "inconclusive"


def slope_report(slope, depth: int = DEFAULT_DEPTH, quotient_bound: int = DEFAULT_BOUND) -> dict:
    c = is_badly_approximable(slope, depth, quotient_bound)
    return {"slope": str(slope), "expansion": c.expansion.terms if c.expansion else [],
            "verdict": c.verdict, "max_quotient": c.max_quotient_seen, "depth": c.depth}
