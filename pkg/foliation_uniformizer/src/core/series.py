"""
Truncated Series
Sparse multivariate series over the rationals with integer exponents (PolySeries) and
univariate series with value-group exponents (GenSeries), plus the substitutions used by
blow-ups, translations and ramifications.

PolySeries precision is a total-degree bound D: every term of total degree < D is exact and
terms of degree >= D are not stored.  D = None marks an exact polynomial.  Exponents may be
negative (Laurent intermediates); substitutions check the legal range explicitly.
"""

import sys
from fractions import Fraction
from math import comb
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from sympy import Add, Matrix, Symbol, expand, integer_nthroot
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

sys.path.append(str(Path(__file__).parent.parent))

from utils.exceptions import (
    InsufficientPrecision, NegativeExponent, NotAUnit, ParseError, PrecisionExhausted,
    ResidueNotRational, ValidationError, VariableMismatch, ZeroUpToPrecision,
)
from config.constants import DEFAULT_ORDER
from core.values import Value

Exponent = Tuple[int, ...]

_TRANSFORMS = standard_transformations + (convert_xor,)


def _min_opt(*bounds):
    finite = [b for b in bounds if b is not None]
    return min(finite) if finite else None


def generalized_binomial(k: int, j: int) -> Fraction:
    """C(k, j) for any integer k and j >= 0."""
    if k >= 0:
        return Fraction(comb(k, j)) if j <= k else Fraction(0)
    out = Fraction(1)
    for t in range(j):
        out = out * (k - t) / (t + 1)
    return out


class PolySeries:
    """Truncated sparse series in named variables with rational coefficients."""

    __slots__ = ("variables", "terms", "precision")

    def __init__(self, variables: Sequence[str], terms: Optional[Dict[Exponent, object]] = None,
                 precision: Optional[int] = None):
        self.variables = tuple(variables)
        self.precision = precision
        clean: Dict[Exponent, Fraction] = {}
        n = len(self.variables)
        for exp, coeff in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != n:
                raise ValidationError("Exponent length does not match variables", "exponent", exp)
            coeff = Fraction(coeff)
            if coeff == 0 or (precision is not None and sum(exp) >= precision):
                continue
            clean[exp] = clean.get(exp, Fraction(0)) + coeff
        self.terms = {e: c for e, c in clean.items() if c != 0}

    # Constructors

    @classmethod
    def zero(cls, variables: Sequence[str], precision: Optional[int] = None) -> "PolySeries":
        return cls(variables, {}, precision)

    @classmethod
    def constant(cls, variables: Sequence[str], value=1) -> "PolySeries":
        return cls(variables, {(0,) * len(variables): value})

    @classmethod
    def monomial(cls, variables: Sequence[str], exponent: Sequence[int], coeff=1) -> "PolySeries":
        return cls(variables, {tuple(exponent): coeff})

    @classmethod
    def variable(cls, variables: Sequence[str], name: str) -> "PolySeries":
        exp = [0] * len(variables)
        exp[list(variables).index(name)] = 1
        return cls(variables, {tuple(exp): 1})

    # Inspection

    @property
    def is_exact(self) -> bool:
        return self.precision is None

    def is_zero(self) -> bool:
        return not self.terms

    def is_exact_zero(self) -> bool:
        return not self.terms and self.precision is None

    def index(self, name: str) -> int:
        return self.variables.index(name)

    def coefficient(self, exponent: Sequence[int]) -> Fraction:
        return self.terms.get(tuple(exponent), Fraction(0))

    def constant_term(self) -> Fraction:
        return self.coefficient((0,) * len(self.variables))

    def order(self) -> Optional[int]:
        """Minimal total degree of a stored term, the precision for O(D), None for exact zero."""
        if self.terms:
            return min(sum(e) for e in self.terms)
        return self.precision

    def min_exponent(self, position: int) -> Optional[int]:
        if not self.terms:
            return None
        return min(e[position] for e in self.terms)

    def partial_order(self, positions: Iterable[int]) -> Optional[int]:
        positions = list(positions)
        if not self.terms:
            return None
        return min(sum(e[p] for p in positions) for e in self.terms)

    def lower_bounds(self) -> Tuple[int, ...]:
        if not self.terms:
            return (0,) * len(self.variables)
        return tuple(min(0, min(e[i] for e in self.terms)) for i in range(len(self.variables)))

    def monomial_gcd(self) -> Optional[Exponent]:
        if not self.terms:
            return None
        return tuple(min(e[i] for e in self.terms) for i in range(len(self.variables)))

    def is_polynomial(self) -> bool:
        return all(c >= 0 for e in self.terms for c in e)

    # Ring operations

    def _same(self, other: "PolySeries"):
        if not isinstance(other, PolySeries) or other.variables != self.variables:
            raise VariableMismatch(self.variables, getattr(other, "variables", other))

    def _coerce(self, other) -> "PolySeries":
        if isinstance(other, PolySeries):
            self._same(other)
            return other
        return PolySeries.constant(self.variables, other)

    def __add__(self, other) -> "PolySeries":
        other = self._coerce(other)
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, Fraction(0)) + c
        return PolySeries(self.variables, terms, _min_opt(self.precision, other.precision))

    __radd__ = __add__

    def __neg__(self) -> "PolySeries":
        return PolySeries(self.variables, {e: -c for e, c in self.terms.items()}, self.precision)

    def __sub__(self, other) -> "PolySeries":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "PolySeries":
        return self._coerce(other) - self

    def _low(self) -> int:
        low = self.order()
        return 0 if low is None else low

    def __mul__(self, other) -> "PolySeries":
        if not isinstance(other, PolySeries):
            q = Fraction(other)
            return PolySeries(self.variables, {e: q * c for e, c in self.terms.items()},
                              self.precision)
        self._same(other)
        if self.is_exact_zero() or other.is_exact_zero():
            return PolySeries.zero(self.variables)
        bounds = []
        if self.precision is not None:
            bounds.append(self.precision + other._low())
        if other.precision is not None:
            bounds.append(other.precision + self._low())
        precision = min(bounds) if bounds else None
        terms: Dict[Exponent, Fraction] = {}
        for ea, ca in self.terms.items():
            for eb, cb in other.terms.items():
                e = tuple(a + b for a, b in zip(ea, eb))
                if precision is not None and sum(e) >= precision:
                    continue
                terms[e] = terms.get(e, Fraction(0)) + ca * cb
        return PolySeries(self.variables, terms, precision)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "PolySeries":
        if k < 0:
            raise ValidationError("Use ps_invert_unit for negative powers", "exponent", k)
        result = PolySeries.constant(self.variables, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolySeries):
            return NotImplemented
        return (self.variables == other.variables and self.terms == other.terms
                and self.precision == other.precision)

    def __hash__(self):
        return hash((self.variables, frozenset(self.terms.items()), self.precision))

    def agrees_with(self, other: "PolySeries") -> bool:
        """Equality of all terms below both precisions."""
        self._same(other)
        bound = _min_opt(self.precision, other.precision)
        return self.truncate(bound).terms == other.truncate(bound).terms

    # Unary helpers

    def truncate(self, precision: Optional[int]) -> "PolySeries":
        return PolySeries(self.variables, self.terms, _min_opt(self.precision, precision))

    def with_precision(self, precision: Optional[int]) -> "PolySeries":
        """Mark as known below precision (used when a caller certifies exactness)."""
        return PolySeries(self.variables, self.terms, precision)

    def shift(self, exponent: Sequence[int]) -> "PolySeries":
        """Multiply by the Laurent monomial z^exponent."""
        exponent = tuple(exponent)
        precision = None if self.precision is None else self.precision + sum(exponent)
        return PolySeries(self.variables,
                          {tuple(a + b for a, b in zip(e, exponent)): c for e, c in self.terms.items()},
                          precision)

    def derivative(self, name: str) -> "PolySeries":
        i = self.index(name)
        terms = {}
        for e, c in self.terms.items():
            if e[i]:
                new = list(e)
                new[i] -= 1
                terms[tuple(new)] = c * e[i]
        precision = None if self.precision is None else self.precision - 1
        return PolySeries(self.variables, terms, precision)

    def set_zero(self, name: str) -> "PolySeries":
        """Restriction to the hyperplane name = 0; requires no negative exponent in name."""
        i = self.index(name)
        if any(e[i] < 0 for e in self.terms):
            raise NegativeExponent(f"Cannot restrict to {name} = 0 with negative exponents")
        return PolySeries(self.variables, {e: c for e, c in self.terms.items() if e[i] == 0},
                          self.precision)

    def split_by(self, name: str) -> Dict[int, "PolySeries"]:
        """Group terms by the exponent of name; each part keeps the full variable list."""
        i = self.index(name)
        parts: Dict[int, Dict[Exponent, Fraction]] = {}
        for e, c in self.terms.items():
            new = list(e)
            k = new[i]
            new[i] = 0
            parts.setdefault(k, {})[tuple(new)] = c
        return {k: PolySeries(self.variables, t, None if self.precision is None
                              else self.precision - k)
                for k, t in parts.items()}

    def reorder(self, variables: Sequence[str]) -> "PolySeries":
        """Re-express in another variable list containing all variables with nonzero exponents."""
        variables = tuple(variables)
        positions = {name: i for i, name in enumerate(variables)}
        terms = {}
        for e, c in self.terms.items():
            new = [0] * len(variables)
            for name, k in zip(self.variables, e):
                if k:
                    if name not in positions:
                        raise VariableMismatch(self.variables, variables)
                    new[positions[name]] = k
            terms[tuple(new)] = c
        return PolySeries(variables, terms, self.precision)

    def to_text(self) -> str:
        return ps_to_text(self)

    def __repr__(self):
        return f"PolySeries({self.to_text()})"

    __str__ = to_text


def ps_add(a: PolySeries, b: PolySeries) -> PolySeries:
    return a + b


def ps_mul(a: PolySeries, b: PolySeries) -> PolySeries:
    return a * b


def ps_invert_unit(u: PolySeries, precision: Optional[int] = None) -> PolySeries:
    """Inverse of a unit by the geometric series, exact below the resulting precision."""
    c0 = u.constant_term()
    if c0 == 0 or any(x < 0 for e in u.terms for x in e):
        raise NotAUnit(u.to_text())
    if u.is_exact and len(u.terms) == 1:
        return PolySeries.constant(u.variables, 1 / c0)
    bound = _min_opt(u.precision, precision)
    if bound is None:
        bound = DEFAULT_ORDER
    h = PolySeries.constant(u.variables, 1) - u * (1 / c0)
    h = h.truncate(bound)
    result = PolySeries.constant(u.variables, 1).truncate(bound)
    power = PolySeries.constant(u.variables, 1)
    for _ in range(1, bound + 1):
        power = (power * h).truncate(bound)
        if power.is_zero():
            break
        result = result + power
    return (result * (1 / c0)).with_precision(bound)


def ps_divide_exact(f: PolySeries, g: PolySeries, precision: Optional[int] = None) -> PolySeries:
    """f / g where g = monomial * unit; the monomial is the componentwise minimum of g."""
    gcd = g.monomial_gcd()
    if gcd is None:
        raise ZeroUpToPrecision("Division by zero series")
    unit = g.shift(tuple(-k for k in gcd))
    return f.shift(tuple(-k for k in gcd)) * ps_invert_unit(unit, precision)


# Text format

def _format_monomial(variables: Sequence[str], exp: Exponent) -> str:
    parts = []
    for name, k in zip(variables, exp):
        if k == 1:
            parts.append(name)
        elif k:
            parts.append(f"{name}^{k}" if k > 0 else f"{name}^({k})")
    return "*".join(parts)


def ps_to_text(f: PolySeries) -> str:
    """Print in graded-lex order, highest degree first, e.g. 3/2*x^2*w - y."""
    order = sorted(f.terms, key=lambda e: (sum(e), e), reverse=True)
    pieces: List[str] = []
    for e in order:
        c = f.terms[e]
        mono = _format_monomial(f.variables, e)
        mag = abs(c)
        if not mono:
            body = str(mag)
        elif mag == 1:
            body = mono
        else:
            body = f"{mag}*{mono}"
        if not pieces:
            pieces.append(body if c > 0 else f"-{body}")
        else:
            pieces.append(f"+ {body}" if c > 0 else f"- {body}")
    text = " ".join(pieces) if pieces else "0"
    if f.precision is not None:
        text += f" + O({f.precision})"
    return text


def ps_parse(text: str, variables: Sequence[str], precision: Optional[int] = None) -> PolySeries:
    """Parse a rational polynomial (Laurent monomials allowed) in the given variables."""
    symbols = {name: Symbol(name) for name in variables}
    try:
        expr = expand(parse_expr(text, local_dict=symbols, transformations=_TRANSFORMS))
    except Exception as e:
        raise ParseError(text, str(e))
    unknown = {str(s) for s in expr.free_symbols} - set(variables)
    if unknown:
        raise ParseError(text, f"unknown variables {sorted(unknown)}")
    terms: Dict[Exponent, Fraction] = {}
    for term in Add.make_args(expr):
        coeff, rest = term.as_coeff_Mul()
        if not coeff.is_Rational:
            raise ParseError(text, f"coefficient {coeff} is not rational")
        exp = [0] * len(variables)
        if rest != 1:
            for base, power in rest.as_powers_dict().items():
                if base not in symbols.values() or not power.is_Integer:
                    raise ParseError(text, f"unsupported factor {base}^{power}")
                exp[list(variables).index(str(base))] += int(power)
        key = tuple(exp)
        terms[key] = terms.get(key, Fraction(0)) + Fraction(int(coeff.p), int(coeff.q))
    return PolySeries(variables, terms, precision)


# Substitutions

def _matrix_row_sums(matrix: Sequence[Sequence[int]]) -> List[int]:
    return [sum(row) for row in matrix]


def subst_monomial(f: PolySeries, matrix: Sequence[Sequence[int]],
                   new_variables: Optional[Sequence[str]] = None,
                   meromorphic: Sequence[str] = (), check: bool = True) -> PolySeries:
    """Substitute old z_i = prod_k new_k^matrix[i][k]; exponents transform as e' = e*M."""
    new_variables = tuple(new_variables or f.variables)
    n_old, n_new = len(f.variables), len(new_variables)
    if len(matrix) != n_old or any(len(row) != n_new for row in matrix):
        raise ValidationError("Substitution matrix has the wrong shape", "matrix", matrix)
    floors = [(-1 if name in meromorphic else 0) for name in new_variables]
    terms: Dict[Exponent, Fraction] = {}
    for e, c in f.terms.items():
        image = tuple(sum(e[i] * matrix[i][k] for i in range(n_old)) for k in range(n_new))
        if check and any(x < lo for x, lo in zip(image, floors)):
            raise NegativeExponent(f"Term {e} leaves the legal range as {image}", image)
        terms[image] = terms.get(image, Fraction(0)) + c
    precision = None
    if f.precision is not None:
        sums = _matrix_row_sums(matrix)
        s_min = min(sums)
        if s_min <= 0:
            raise PrecisionExhausted("Chart does not raise degrees; truncation cannot be tracked",
                                     "subst_monomial")
        lows = f.lower_bounds()
        base = sum(l * s for l, s in zip(lows, sums))
        precision = base + s_min * (f.precision - sum(lows))
    return PolySeries(new_variables, terms, precision)


def subst_translation(f: PolySeries, var: str, m_exponents: Sequence[int], c,
                      mode: str = "mul", cap: Optional[int] = None) -> PolySeries:
    """Substitute var = m*(var' + c) (mode "mul") or var = var' + c*m (mode "add").

    m is a monomial in the other variables given by its exponent vector.  Negative powers
    of var expand by the generalized binomial series in mode "mul" (c != 0 required) and
    are rejected in mode "add".
    """
    c = Fraction(c)
    v = f.index(var)
    m = tuple(int(k) for k in m_exponents)
    if m[v] != 0:
        raise ValidationError("Translation monomial must not involve the translated variable",
                              "monomial", m)
    m_degree = sum(m)
    if mode == "mul" and c == 0:
        matrix = [[int(i == k) for k in range(len(m))] for i in range(len(m))]
        matrix[v] = [m[k] + (1 if k == v else 0) for k in range(len(m))]
        return subst_monomial(f, matrix, check=False)

    precision = f.precision
    if precision is not None:
        if m_degree < 1:
            raise InsufficientPrecision("Constant translation of a truncated series", precision)
        low_v = f.lower_bounds()[v]
        precision = precision + low_v * (m_degree - 1)
    needs_cap = mode == "mul" and any(e[v] < 0 for e in f.terms)
    if needs_cap and precision is None:
        precision = cap if cap is not None else DEFAULT_ORDER
    elif needs_cap and cap is not None:
        precision = min(precision, cap)

    terms: Dict[Exponent, Fraction] = {}

    def put(exp, coeff):
        if coeff == 0 or (precision is not None and sum(exp) >= precision):
            return
        terms[exp] = terms.get(exp, Fraction(0)) + coeff

    for e, coeff in f.terms.items():
        k = e[v]
        base = list(e)
        base[v] = 0
        if mode == "mul":
            # m^k * (v' + c)^k
            head = [b + k * mk for b, mk in zip(base, m)]
            if k >= 0:
                for j in range(k + 1):
                    exp = list(head)
                    exp[v] = j
                    put(tuple(exp), coeff * comb(k, j) * c ** (k - j))
            else:
                j = 0
                while True:
                    exp = list(head)
                    exp[v] = j
                    if precision is not None and sum(exp) >= precision:
                        break
                    put(tuple(exp), coeff * generalized_binomial(k, j) * c ** (k - j))
                    j += 1
        elif mode == "add":
            if k < 0:
                raise NegativeExponent(f"Additive translation of {var}^{k}", e)
            # (v' + c*m)^k
            for j in range(k + 1):
                exp = [b + (k - j) * mk for b, mk in zip(base, m)]
                exp[v] = j
                put(tuple(exp), coeff * comb(k, j) * c ** (k - j))
        else:
            raise ValidationError(f"Unknown translation mode {mode}", "mode", mode)
    return PolySeries(f.variables, terms, precision)


def ramify(f: PolySeries, var: str, d: int) -> PolySeries:
    """Substitute var = t^d keeping the slot name; exponents of var are multiplied by d."""
    if d < 1:
        raise ValidationError("Ramification degree must be positive", "degree", d)
    v = f.index(var)
    terms = {}
    for e, c in f.terms.items():
        new = list(e)
        new[v] *= d
        terms[tuple(new)] = c
    precision = f.precision
    if precision is not None:
        precision += (d - 1) * f.lower_bounds()[v]
    return PolySeries(f.variables, terms, precision)


class Substitution:
    """One coordinate substitution old -> new, shared by models, fields and arcs.

    kind "monomial": old z_i = prod_k z'_k^matrix[i][k].
    kind "translation": var = m*(var' + c) ("mul") or var = var' + c*m ("add").
    kind "ramify": var = var'^degree.
    """

    def __init__(self, kind: str, variables: Sequence[str], matrix=None, var: Optional[str] = None,
                 m_exponents: Optional[Sequence[int]] = None, c=0, mode: str = "mul",
                 degree: int = 1):
        self.kind = kind
        self.variables = tuple(variables)
        self.matrix = [list(row) for row in matrix] if matrix is not None else None
        self.var = var
        self.m_exponents = tuple(m_exponents) if m_exponents is not None else None
        self.c = Fraction(c)
        self.mode = mode
        self.degree = degree

    @classmethod
    def monomial(cls, variables, matrix) -> "Substitution":
        return cls("monomial", variables, matrix=matrix)

    @classmethod
    def translation(cls, variables, var, m_exponents, c, mode="mul") -> "Substitution":
        return cls("translation", variables, var=var, m_exponents=m_exponents, c=c, mode=mode)

    @classmethod
    def ramification(cls, variables, var, degree) -> "Substitution":
        return cls("ramify", variables, var=var, degree=degree)

    def inverse_matrix(self) -> List[List[int]]:
        inv = Matrix(self.matrix).inv()
        return [[int(inv[i, k]) for k in range(inv.cols)] for i in range(inv.rows)]

    def apply(self, f: PolySeries, cap: Optional[int] = None) -> PolySeries:
        if f.variables != self.variables:
            raise VariableMismatch(self.variables, f.variables)
        if self.kind == "monomial":
            return subst_monomial(f, self.matrix, check=False)
        if self.kind == "translation":
            return subst_translation(f, self.var, self.m_exponents, self.c, self.mode, cap)
        if self.kind == "ramify":
            return ramify(f, self.var, self.degree)
        raise ValidationError(f"Unknown substitution kind {self.kind}", "kind", self.kind)

    def image_of(self, name: str, cap: Optional[int] = None) -> PolySeries:
        """The old coordinate name written in the new coordinates."""
        return self.apply(PolySeries.variable(self.variables, name), cap)

    def __repr__(self):
        if self.kind == "monomial":
            return f"Substitution(monomial {self.matrix})"
        if self.kind == "translation":
            return f"Substitution({self.mode} {self.var} m={self.m_exponents} c={self.c})"
        return f"Substitution(ramify {self.var}^{self.degree})"


# Value-group exponent series

class GenSeries:
    """Series sum c_g T^g with exponents in a value group, exact below an optional precision."""

    __slots__ = ("terms", "precision", "basis")

    def __init__(self, basis, terms: Optional[Dict[Value, object]] = None,
                 precision: Optional[Value] = None):
        self.basis = basis
        self.precision = precision
        clean: Dict[Value, Fraction] = {}
        for g, c in (terms or {}).items():
            c = Fraction(c)
            if c == 0 or (precision is not None and not g < precision):
                continue
            clean[g] = clean.get(g, Fraction(0)) + c
        self.terms = {g: c for g, c in clean.items() if c != 0}

    @classmethod
    def monomial(cls, basis, exponent: Value, coeff=1) -> "GenSeries":
        return cls(basis, {exponent: coeff})

    @classmethod
    def constant(cls, basis, coeff=1) -> "GenSeries":
        return cls(basis, {basis.zero(): coeff})

    @classmethod
    def zero(cls, basis, precision: Optional[Value] = None) -> "GenSeries":
        return cls(basis, {}, precision)

    def is_zero(self) -> bool:
        return not self.terms

    def is_exact_zero(self) -> bool:
        return not self.terms and self.precision is None

    def support(self) -> List[Value]:
        return sorted(self.terms)

    def _low(self) -> Value:
        if self.terms:
            return min(self.terms)
        return self.precision if self.precision is not None else self.basis.zero()

    def __add__(self, other) -> "GenSeries":
        if not isinstance(other, GenSeries):
            other = GenSeries.constant(self.basis, other)
        terms = dict(self.terms)
        for g, c in other.terms.items():
            terms[g] = terms.get(g, Fraction(0)) + c
        return GenSeries(self.basis, terms, _min_opt(self.precision, other.precision))

    __radd__ = __add__

    def __neg__(self) -> "GenSeries":
        return GenSeries(self.basis, {g: -c for g, c in self.terms.items()}, self.precision)

    def __sub__(self, other) -> "GenSeries":
        if not isinstance(other, GenSeries):
            other = GenSeries.constant(self.basis, other)
        return self + (-other)

    def __mul__(self, other) -> "GenSeries":
        if not isinstance(other, GenSeries):
            q = Fraction(other)
            return GenSeries(self.basis, {g: q * c for g, c in self.terms.items()}, self.precision)
        if self.is_exact_zero() or other.is_exact_zero():
            return GenSeries.zero(self.basis)
        bounds = []
        if self.precision is not None:
            bounds.append(self.precision + other._low())
        if other.precision is not None:
            bounds.append(other.precision + self._low())
        precision = min(bounds) if bounds else None
        terms: Dict[Value, Fraction] = {}
        for ga, ca in self.terms.items():
            for gb, cb in other.terms.items():
                g = ga + gb
                if precision is not None and not g < precision:
                    continue
                terms[g] = terms.get(g, Fraction(0)) + ca * cb
        return GenSeries(self.basis, terms, precision)

    __rmul__ = __mul__

    def shift(self, exponent: Value) -> "GenSeries":
        precision = None if self.precision is None else self.precision + exponent
        return GenSeries(self.basis, {g + exponent: c for g, c in self.terms.items()}, precision)

    def truncate(self, bound: Optional[Value]) -> "GenSeries":
        return GenSeries(self.basis, self.terms, _min_opt(self.precision, bound))

    def leading(self) -> Tuple[Value, Fraction]:
        return gs_leading(self)

    def _unit_part(self) -> Tuple[Value, Fraction, "GenSeries"]:
        v0, c0 = self.leading()
        h = GenSeries(self.basis, {g - v0: c / c0 for g, c in self.terms.items() if g != v0},
                      None if self.precision is None else self.precision - v0)
        return v0, c0, h

    def _series_in(self, h: "GenSeries", coefficient, relative: Optional[Value]) -> "GenSeries":
        """sum_k coefficient(k) h^k for h of positive order, exact below relative."""
        if h.is_exact_zero():
            return GenSeries.constant(self.basis, 1)
        result = GenSeries.constant(self.basis, 1).truncate(relative)
        if relative is None:
            raise InsufficientPrecision("A precision bound is required for an infinite expansion")
        power = GenSeries.constant(self.basis, 1)
        k = 0
        while True:
            k += 1
            power = (power * h).truncate(relative)
            if power.is_zero():
                break
            result = result + power * coefficient(k)
        return result

    def __pow__(self, k: int) -> "GenSeries":
        if k < 0:
            raise ValidationError("Use inverse for negative powers", "exponent", k)
        result = GenSeries.constant(self.basis, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def inverse(self, relative_precision: Optional[Value] = None) -> "GenSeries":
        """1/f via leading-term normalization and a geometric series."""
        v0, c0, h = self._unit_part()
        relative = _min_opt(h.precision, relative_precision)
        unit = self._series_in(h, lambda k: (-1) ** k, relative)
        return (unit * (1 / c0)).shift(-v0)

    def power(self, k: int, relative_precision: Optional[Value] = None) -> "GenSeries":
        if k >= 0:
            return self ** k
        return self.inverse(relative_precision) ** (-k)

    def to_text(self, scale: Optional[Value] = None, name: str = "T") -> str:
        pieces = []
        for g in self.support():
            c = self.terms[g]
            ratio = value_ratio(g, scale) if scale is not None else None
            expo = str(ratio) if ratio is not None else f"[{g.to_text()}]"
            pieces.append(f"{c}*{name}^{expo}")
        text = " + ".join(pieces) if pieces else "0"
        if self.precision is not None:
            text += f" + O({name}^[{self.precision.to_text()}])"
        return text

    def __repr__(self):
        return f"GenSeries({self.to_text()})"


def value_ratio(g: Value, scale: Value) -> Optional[Fraction]:
    """g / scale when g is a rational multiple of the nonzero value scale."""
    ratio = None
    for a, b in zip(g.coeffs, scale.coeffs):
        if b == 0:
            if a != 0:
                return None
            continue
        if ratio is None:
            ratio = a / b
        elif a != ratio * b:
            return None
    return ratio


def gs_leading(f: GenSeries) -> Tuple[Value, Fraction]:
    if not f.terms:
        if f.precision is None:
            raise ZeroUpToPrecision()
        raise InsufficientPrecision(bound=f.precision.to_text())
    g = min(f.terms)
    return g, f.terms[g]


def gs_truncate(f: GenSeries, bound: Value) -> GenSeries:
    return f.truncate(bound)


def rational_root(c: Fraction, d: int) -> Fraction:
    """Exact d-th root of a rational, ResidueNotRational when it does not exist."""
    c = Fraction(c)
    if c < 0 and d % 2 == 0:
        raise ResidueNotRational(f"Even root of negative residue {c}", c)
    sign = -1 if c < 0 else 1
    num, num_exact = integer_nthroot(abs(c.numerator), d)
    den, den_exact = integer_nthroot(c.denominator, d)
    if not (num_exact and den_exact):
        raise ResidueNotRational(f"Residue {c} has no rational {d}-th root", c)
    return sign * Fraction(int(num), int(den))


def gs_root(f: GenSeries, d: int, relative_precision: Optional[Value] = None) -> GenSeries:
    """The d-th root with positive-real branch fixed by the rational root of the residue."""
    v0, c0, h = f._unit_part()
    root = rational_root(c0, d)
    exponent = Fraction(1, d)

    def coefficient(k):
        out = Fraction(1)
        for t in range(k):
            out = out * (exponent - t) / (t + 1)
        return out

    relative = _min_opt(h.precision, relative_precision)
    unit = f._series_in(h, coefficient, relative)
    return (unit * root).shift(v0 * exponent)
