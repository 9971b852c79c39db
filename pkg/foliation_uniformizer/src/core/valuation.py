"""
Arc Valuation
Realizes a zero-dimensional valuation on a local model through a center arc.

Every coordinate carries an image: a GenSeries in one formal variable T whose exponents are
values.  Independent variables map to monomials T^nu(x_i); dependent variables map to
Puiseux-like arcs.  The value of an element is the leading exponent of its image.
"""

import sys
from fractions import Fraction
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

from sympy import Add, Symbol, expand
from sympy.parsing.sympy_parser import parse_expr

sys.path.append(str(Path(__file__).parent.parent))

from utils.exceptions import (
    InsufficientPrecision, NotValueZero, ParseError, ValidationError, VariableMismatch,
)
from utils.logger import get_logger
from core.values import Value, WeightBasis
from core.series import (
    GenSeries, PolySeries, Substitution, _TRANSFORMS, _min_opt, gs_leading, gs_root,
)

logger = get_logger("valuation")


class ArcValuation:
    """Images of the model coordinates along the center arc, exact below a value cap."""

    def __init__(self, basis: WeightBasis, names: Sequence[str], rank: int,
                 images: Dict[str, GenSeries], precision: Optional[Value] = None):
        self.basis = basis
        self.names = tuple(names)
        self.rank = rank
        self.precision = precision
        missing = [name for name in self.names if name not in images]
        if missing:
            raise ValidationError(f"Arc images missing for {missing}", "arc", missing)
        self.images = {name: images[name] for name in self.names}

    @classmethod
    def initial(cls, basis: WeightBasis, names: Sequence[str], rank: int,
                arcs: Optional[Dict[str, GenSeries]] = None,
                precision: Optional[Value] = None) -> "ArcValuation":
        """Independent x_i get the i-th generator; dependents take the given arcs."""
        names = tuple(names)
        if rank != basis.rank:
            raise ValidationError("Rank must equal the number of generators", "rank", rank)
        arcs = dict(arcs or {})
        images: Dict[str, GenSeries] = {}
        for i, name in enumerate(names[:rank]):
            images[name] = GenSeries.monomial(basis, basis.generator(i))
        for name in names[rank:]:
            if name not in arcs:
                raise ValidationError(f"No arc given for dependent variable {name}", "arc", name)
            arc = arcs[name].truncate(precision)
            if arc.is_zero():
                # the dependent lies on the arc: infinite value
                images[name] = arc
                continue
            lead, _ = gs_leading(arc)
            if lead.sign() <= 0:
                raise ValidationError(f"Arc of {name} must have positive value", "arc", name)
            images[name] = arc
        return cls(basis, names, rank, images, precision)

    # Evaluation

    def coordinate_value(self, name: str) -> Optional[Value]:
        """Value of a coordinate, None when its image vanishes along the arc."""
        image = self.images[name]
        if image.is_zero():
            return None
        return gs_leading(image)[0]

    def values(self) -> Dict[str, Optional[Value]]:
        return {name: self.coordinate_value(name) for name in self.names}

    def image(self, f: PolySeries) -> GenSeries:
        """f(x, phi(x)) as a GenSeries, exact below the tracked bound."""
        if f.variables != self.names:
            raise VariableMismatch(self.names, f.variables)
        if f.is_exact_zero():
            return GenSeries.zero(self.basis)

        values = {name: self.coordinate_value(name) for name in self.names}
        bound = self.precision
        if f.precision is not None:
            finite = [v for v in values.values() if v is not None]
            lows = f.lower_bounds()
            base = self.basis.zero()
            for name, low in zip(self.names, lows):
                if low and values[name] is not None:
                    base = base + values[name] * low
            degree_bound = base + min(finite) * (f.precision - sum(lows))
            bound = _min_opt(bound, degree_bound)

        term_values = []
        for exp in f.terms:
            if any(k and values[name] is None for name, k in zip(self.names, exp)):
                continue
            total = self.basis.zero()
            for name, k in zip(self.names, exp):
                if k:
                    total = total + values[name] * k
            term_values.append(total)
        relative = None
        if bound is not None and term_values:
            relative = bound - min(term_values)

        cache: Dict[Tuple[str, int], GenSeries] = {}
        result = GenSeries.zero(self.basis, bound)
        for exp, coeff in f.terms.items():
            term = GenSeries.constant(self.basis, coeff)
            vanishes = False
            for name, k in zip(self.names, exp):
                if not k:
                    continue
                if values[name] is None:
                    if k < 0:
                        raise InsufficientPrecision(f"Negative power of {name}, which vanishes on the arc")
                    vanishes = True
                    break
                key = (name, k)
                if key not in cache:
                    cache[key] = self.images[name].power(k, relative)
                term = term * cache[key]
            if not vanishes:
                result = result + term.truncate(bound)
        return result.truncate(bound)

    def value_of(self, f: PolySeries) -> Value:
        return gs_leading(self.image(f))[0]

    def leading(self, f: PolySeries) -> Tuple[Value, Fraction]:
        return gs_leading(self.image(f))

    def residue_constant(self, f: PolySeries) -> Fraction:
        value, coeff = gs_leading(self.image(f))
        if not value.is_zero():
            raise NotValueZero(value.to_text())
        return coeff

    # Recentering

    def _relative(self, name: str) -> Optional[Value]:
        if self.precision is None:
            return None
        value = self.coordinate_value(name)
        return self.precision - value if value is not None else self.precision

    def _monomial_image(self, exponents: Sequence[int]) -> GenSeries:
        term = GenSeries.constant(self.basis, 1)
        for name, k in zip(self.names, exponents):
            if k:
                term = term * self.images[name].power(k, self._relative(name))
        return term

    def pushforward(self, sub: Substitution) -> "ArcValuation":
        """Images of the new coordinates after an old-to-new substitution."""
        if sub.variables != self.names:
            raise VariableMismatch(self.names, sub.variables)
        images = dict(self.images)
        if sub.kind == "monomial":
            inverse = sub.inverse_matrix()
            for k, name in enumerate(self.names):
                row = inverse[k]
                if all(row[i] == (1 if i == k else 0) for i in range(len(row))):
                    continue
                images[name] = self._monomial_image(row).truncate(self.precision)
        elif sub.kind == "translation":
            var = sub.var
            m = self._monomial_image(sub.m_exponents)
            if sub.mode == "mul":
                relative = self._relative(var)
                images[var] = (self.images[var] * m.inverse(relative) - sub.c).truncate(self.precision)
            else:
                images[var] = (self.images[var] - m * sub.c).truncate(self.precision)
        elif sub.kind == "ramify":
            images[sub.var] = gs_root(self.images[sub.var], sub.degree, self._relative(sub.var))
        else:
            raise ValidationError(f"Unknown substitution kind {sub.kind}", "kind", sub.kind)
        logger.debug(f"Arc pushed forward along {sub!r}")
        return ArcValuation(self.basis, self.names, self.rank, images, self.precision)

    def with_precision(self, precision: Optional[Value]) -> "ArcValuation":
        images = {name: image.truncate(precision) for name, image in self.images.items()}
        return ArcValuation(self.basis, self.names, self.rank, images, precision)

    def describe(self, scale: Optional[Value] = None) -> Dict[str, str]:
        scale = scale or self.basis.generator(0)
        return {name: self.images[name].to_text(scale) for name in self.names}


def parse_arc(text: str, basis: WeightBasis, independents: Sequence[str],
              precision: Optional[Value] = None) -> GenSeries:
    """Parse an arc such as "x^(3/2) + 2*x^(7/4)" into a GenSeries over the basis."""
    symbols = {name: Symbol(name) for name in independents}
    try:
        expr = expand(parse_expr(text, local_dict=symbols, transformations=_TRANSFORMS))
    except Exception as e:
        raise ParseError(text, str(e))
    terms: Dict[Value, Fraction] = {}
    for term in Add.make_args(expr):
        coeff, rest = term.as_coeff_Mul()
        if not coeff.is_Rational:
            raise ParseError(text, f"coefficient {coeff} is not rational")
        value = arc_monomial_value(rest, basis, independents, text)
        terms[value] = terms.get(value, Fraction(0)) + Fraction(int(coeff.p), int(coeff.q))
    return GenSeries(basis, terms, precision)


def arc_monomial_value(expr, basis: WeightBasis, independents: Sequence[str], text: str) -> Value:
    coeffs = [Fraction(0)] * basis.rank
    if expr != 1:
        for base, power in expr.as_powers_dict().items():
            name = str(base)
            if name not in independents or not power.is_Rational:
                raise ParseError(text, f"unsupported factor {base}^{power}")
            coeffs[list(independents).index(name)] += Fraction(int(power.p), int(power.q))
    return basis.value(coeffs)


def parse_arc_precision(text: str, basis: WeightBasis, independents: Sequence[str]) -> Value:
    """A precision written as a monomial, e.g. "x^5", read as its value."""
    symbols = {name: Symbol(name) for name in independents}
    try:
        expr = parse_expr(text, local_dict=symbols, transformations=_TRANSFORMS)
    except Exception as e:
        raise ParseError(text, str(e))
    coeff, rest = expr.as_coeff_Mul()
    return arc_monomial_value(rest, basis, independents, text)
