"""
Value Group Arithmetic
Exact values in a finitely generated group of reals spanned by rational multiples of square roots.

A weight basis fixes r generators q_i*sqrt(m_i) with distinct squarefree radicands, which
makes them linearly independent over the integers.  A Value is a rational coefficient vector
against that basis.  Comparison is exact: the sign of a rational combination of square roots
is decided by the usual recursive squaring, one prime at a time.  Lex-tagged bases order the
generators into rank levels compared lexicographically.
"""

import re
import sys
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache, total_ordering
from math import gcd, lcm
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from mpmath import iv
from sympy import Matrix, Rational, factorint, primefactors

sys.path.append(str(Path(__file__).parent.parent))

from utils.exceptions import BasisMismatch, NotInRationalSpan, ParseError, ValidationError


class Ordering(Enum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


_TOKEN = re.compile(
    r"^\s*(?:(?P<q>\d+(?:/\d+)?)\s*(?:\*\s*)?)?(?:sqrt\s*\(?\s*(?P<m>\d+)\s*\)?)?\s*$"
)


@lru_cache(maxsize=None)
def _is_squarefree(m: int) -> bool:
    return m >= 1 and all(e == 1 for e in factorint(m).values())


@lru_cache(maxsize=None)
def _primes_of(m: int) -> Tuple[int, ...]:
    return tuple(primefactors(m))


def _radical_product(a: Dict[int, Fraction], b: Dict[int, Fraction]) -> Dict[int, Fraction]:
    """Multiply two sums c*sqrt(m) keyed by squarefree m."""
    out: Dict[int, Fraction] = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            g = gcd(ma, mb)
            m = (ma // g) * (mb // g)
            out[m] = out.get(m, Fraction(0)) + ca * cb * g
    return {m: c for m, c in out.items() if c != 0}


def radical_sign(terms: Dict[int, Fraction]) -> int:
    """Exact sign of sum c_m*sqrt(m) over distinct squarefree m.

    Split off the largest prime p: S = A + sqrt(p)*B with A, B free of p.
    Equal signs decide; otherwise sign(S) = sign(A) * sign(A^2 - p*B^2).
    """
    terms = {m: Fraction(c) for m, c in terms.items() if c != 0}
    if not terms:
        return 0
    if len(terms) == 1:
        (c,) = terms.values()
        return 1 if c > 0 else -1
    primes = sorted({p for m in terms for p in _primes_of(m)})
    p = primes[-1]
    a_part = {m: c for m, c in terms.items() if m % p}
    b_part = {m // p: c for m, c in terms.items() if m % p == 0}
    sign_a = radical_sign(a_part)
    sign_b = radical_sign(b_part)
    if sign_b == 0:
        return sign_a
    if sign_a == 0 or sign_a == sign_b:
        return sign_b if sign_a == 0 else sign_a
    diff = _radical_product(a_part, a_part)
    for m, c in _radical_product(b_part, b_part).items():
        diff[m] = diff.get(m, Fraction(0)) - p * c
    return sign_a * radical_sign(diff)


@dataclass(frozen=True)
class WeightBasis:
    """Generators q*sqrt(m) of the value group, optionally split into lex levels."""

    generators: Tuple[Tuple[Fraction, int], ...]
    levels: Tuple[int, ...] = ()

    def __post_init__(self):
        gens = tuple((Fraction(q), int(m)) for q, m in self.generators)
        object.__setattr__(self, "generators", gens)
        levels = tuple(self.levels) if self.levels else (0,) * len(gens)
        object.__setattr__(self, "levels", levels)

        if not 1 <= len(gens) <= 3:
            raise ValidationError("A weight basis has between one and three generators",
                                  "rank", len(gens))
        if len(levels) != len(gens):
            raise ValidationError("Lex levels must tag every generator", "lex", levels)
        seen = set()
        for (q, m), level in zip(gens, levels):
            if q <= 0:
                raise ValidationError("Generators must be positive", "generator", q)
            if not _is_squarefree(m):
                raise ValidationError(f"Radicand {m} is not squarefree", "radicand", m)
            if (level, m) in seen:
                raise ValidationError(f"Radicand {m} repeated within a level", "radicand", m)
            seen.add((level, m))

    @property
    def rank(self) -> int:
        return len(self.generators)

    @property
    def is_lex(self) -> bool:
        return len(set(self.levels)) > 1

    def generator(self, index: int) -> "Value":
        coeffs = [Fraction(0)] * self.rank
        coeffs[index] = Fraction(1)
        return Value(tuple(coeffs), self)

    def zero(self) -> "Value":
        return Value((Fraction(0),) * self.rank, self)

    def value(self, coeffs: Iterable) -> "Value":
        return Value(tuple(Fraction(c) for c in coeffs), self)

    @classmethod
    def parse(cls, tokens: Sequence[str], lex: Optional[Sequence[Sequence[int]]] = None) -> "WeightBasis":
        """Build a basis from tokens such as "1", "sqrt2" or "3/2*sqrt5"."""
        gens = []
        for token in tokens:
            match = _TOKEN.match(token)
            if not match or (match.group("q") is None and match.group("m") is None):
                raise ParseError(token, "expected q, sqrtM or q*sqrtM")
            q = Fraction(match.group("q") or 1)
            m = int(match.group("m") or 1)
            gens.append((q, m))
        levels: Tuple[int, ...] = ()
        if lex:
            tags = [None] * len(gens)
            for level, members in enumerate(lex):
                for index in members:
                    if not 0 <= index < len(gens) or tags[index] is not None:
                        raise ParseError(str(lex), f"bad generator index {index}")
                    tags[index] = level
            if any(t is None for t in tags):
                raise ParseError(str(lex), "every generator needs a level")
            levels = tuple(tags)
        return cls(tuple(gens), levels)

    def to_text(self) -> str:
        parts = []
        for q, m in self.generators:
            base = f"sqrt{m}" if m != 1 else ""
            if not base:
                parts.append(str(q))
            elif q == 1:
                parts.append(base)
            else:
                parts.append(f"{q}*{base}")
        return "[" + ", ".join(f'"{p}"' for p in parts) + "]"


@total_ordering
@dataclass(frozen=True)
class Value:
    """A value sum(coeffs[i] * generator_i) of the group spanned by a WeightBasis."""

    coeffs: Tuple[Fraction, ...]
    basis: WeightBasis = field(compare=True)

    def _check(self, other: "Value"):
        if not isinstance(other, Value) or other.basis != self.basis:
            raise BasisMismatch()

    def __add__(self, other: "Value") -> "Value":
        self._check(other)
        return Value(tuple(a + b for a, b in zip(self.coeffs, other.coeffs)), self.basis)

    def __sub__(self, other: "Value") -> "Value":
        self._check(other)
        return Value(tuple(a - b for a, b in zip(self.coeffs, other.coeffs)), self.basis)

    def __neg__(self) -> "Value":
        return Value(tuple(-a for a in self.coeffs), self.basis)

    def __mul__(self, scalar) -> "Value":
        q = Fraction(scalar)
        return Value(tuple(q * a for a in self.coeffs), self.basis)

    __rmul__ = __mul__

    def __lt__(self, other: "Value") -> bool:
        return val_compare(self, other) is Ordering.LESS

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def sign(self) -> int:
        return val_sign(self)

    def is_rational_multiple_of_first(self) -> bool:
        return all(c == 0 for c in self.coeffs[1:])

    def to_text(self) -> str:
        pieces = []
        for coeff, (q, m), level in zip(self.coeffs, self.basis.generators, self.basis.levels):
            if coeff == 0:
                continue
            c = coeff * q
            tag = f"@L{level}" if self.basis.is_lex else ""
            pieces.append(f"{c}{tag}" if m == 1 else f"{c}*sqrt{m}{tag}")
        return " + ".join(pieces) if pieces else "0"

    def __str__(self):
        return self.to_text()


def val_sign(a: Value) -> int:
    """Exact sign of a value, level by level for lex bases."""
    for level in sorted(set(a.basis.levels)):
        terms: Dict[int, Fraction] = {}
        for coeff, (q, m), tag in zip(a.coeffs, a.basis.generators, a.basis.levels):
            if tag == level and coeff != 0:
                terms[m] = terms.get(m, Fraction(0)) + coeff * q
        sign = radical_sign(terms)
        if sign:
            return sign
    return 0


def val_compare(a: Value, b: Value) -> Ordering:
    if not isinstance(a, Value) or not isinstance(b, Value) or a.basis != b.basis:
        raise BasisMismatch()
    return Ordering(val_sign(a - b))


def val_add(a: Value, b: Value) -> Value:
    return a + b


def val_scale(q, a: Value) -> Value:
    return a * q


def val_min(values: Iterable[Value]) -> Value:
    return min(values)


def solve_contact(vy: Value, vx: Sequence[Value]) -> Tuple[int, Tuple[int, ...]]:
    """Smallest d > 0 and integer p with d*vy = sum p_i*vx_i and gcd(d, p) = 1."""
    for v in vx:
        vy._check(v)
    r = vy.basis.rank
    matrix = Matrix(r, len(vx), lambda i, k: Rational(vx[k].coeffs[i].numerator,
                                                      vx[k].coeffs[i].denominator))
    rhs = Matrix(r, 1, lambda i, _: Rational(vy.coeffs[i].numerator, vy.coeffs[i].denominator))
    try:
        solution, params = matrix.gauss_jordan_solve(rhs)
    except ValueError:
        raise NotInRationalSpan(vy)
    if params.shape[0]:
        raise NotInRationalSpan(vy, "Independent values do not form a basis")
    fractions = [Fraction(int(s.p), int(s.q)) for s in solution]
    d = 1
    for f in fractions:
        d = lcm(d, f.denominator)
    p = [int(f * d) for f in fractions]
    g = gcd(d, *p) if p else d
    return d // g, tuple(x // g for x in p)


def interval_enclosure(a: Value, dps: int = 64):
    """mpmath interval enclosing the real number a; lex bases use their first level."""
    first = min(a.basis.levels)
    old = iv.dps
    iv.dps = dps
    try:
        total = iv.mpf(0)
        for coeff, (q, m), level in zip(a.coeffs, a.basis.generators, a.basis.levels):
            if level != first or coeff == 0:
                continue
            c = coeff * q
            total += iv.mpf(c.numerator) / iv.mpf(c.denominator) * iv.sqrt(iv.mpf(m))
        return total
    finally:
        iv.dps = old


def interval_sign(a: Value, dps: int = 64) -> Optional[int]:
    """Sign from the interval enclosure, or None when the interval straddles zero."""
    box = interval_enclosure(a, dps)
    if box.a > 0:
        return 1
    if box.b < 0:
        return -1
    if box.a == 0 and box.b == 0:
        return 0
    return None


def parse_value(text: str, basis: WeightBasis) -> Value:
    """Parse a value written as a coefficient vector, e.g. "(1/2, 1)"."""
    body = text.strip().strip("()[]")
    try:
        coeffs = [Fraction(part.strip()) for part in body.split(",") if part.strip()]
    except ValueError as e:
        raise ParseError(text, str(e))
    if len(coeffs) != basis.rank:
        raise ParseError(text, f"expected {basis.rank} coefficients")
    return basis.value(coeffs)


def format_vector(value: Value) -> str:
    return "(" + ",".join(str(c) for c in value.coeffs) + ")"


def order_values(values: Iterable[Value]) -> List[Value]:
    return sorted(values)
