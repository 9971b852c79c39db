"""
Logarithmic Vector Fields
A field z^offset * factor * sum G_i * D_i where D_i is z_i*d/dz_i on log slots and d/dz_i on
plain slots.  Transforms act on the generator sum G_i D_i and carry the multiplier along: its
monomial part stays in the offset, a non-monomial leftover of a translation goes to factor.
"""

import sys
from fractions import Fraction
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

from sympy import Matrix, Rational, zeros

sys.path.append(str(Path(__file__).parent.parent))

from utils.exceptions import (
    ApplicationError, FieldError, ValidationError, VariableMismatch, ZeroField,
)
from utils.logger import get_logger
from config.constants import FRAME_LOG, FRAME_PLAIN
from core.series import PolySeries, Substitution, ps_invert_unit

logger = get_logger("foliation")

FLAG_NON_MONOMIAL_FACTOR = "non_monomial_common_factor"


class LogVectorField:
    """Vector field in a mixed logarithmic frame with a monomial offset."""

    def __init__(self, names: Sequence[str], frame: Sequence[str],
                 coefficients: Sequence[PolySeries], offset: Optional[Sequence[int]] = None,
                 flags: Iterable[str] = (), factor: Optional[PolySeries] = None):
        self.names = tuple(names)
        self.frame = tuple(frame)
        self.coefficients = tuple(coefficients)
        self.offset = tuple(offset) if offset is not None else (0,) * len(self.names)
        self.flags: FrozenSet[str] = frozenset(flags)
        self.factor = factor
        if len(self.frame) != len(self.names) or len(self.coefficients) != len(self.names):
            raise ValidationError("Frame and coefficients must cover every coordinate",
                                  "frame", self.frame)
        for mode in self.frame:
            if mode not in (FRAME_LOG, FRAME_PLAIN):
                raise ValidationError(f"Unknown frame mode {mode}", "frame", mode)
        for coeff in self.coefficients:
            if coeff.variables != self.names:
                raise VariableMismatch(self.names, coeff.variables)

    @classmethod
    def engine_frame(cls, names: Sequence[str], rank: int) -> Tuple[str, ...]:
        """Log on independents, plain on dependents."""
        return tuple(FRAME_LOG if i < rank else FRAME_PLAIN for i in range(len(names)))

    @classmethod
    def from_actions(cls, names: Sequence[str], frame: Sequence[str],
                     actions: Sequence[PolySeries], normalize: bool = True) -> "LogVectorField":
        """Build from the derivatives xi(z_i), dividing log slots by z_i."""
        names = tuple(names)
        coefficients = []
        for i, (mode, action) in enumerate(zip(frame, actions)):
            if mode == FRAME_LOG:
                shift = [0] * len(names)
                shift[i] = -1
                action = action.shift(shift)
            coefficients.append(action)
        field = cls(names, frame, coefficients)
        return normalize_generator(field) if normalize else field

    def coefficient(self, name: str) -> PolySeries:
        return self.coefficients[self.names.index(name)]

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coefficients)

    def generator(self) -> "LogVectorField":
        return LogVectorField(self.names, self.frame, self.coefficients, None, self.flags)

    def actions(self, include_offset: bool = False) -> List[PolySeries]:
        """xi(z_i) for each coordinate, of the generator unless include_offset."""
        out = []
        for i, (mode, coeff) in enumerate(zip(self.frame, self.coefficients)):
            if mode == FRAME_LOG:
                shift = [0] * len(self.names)
                shift[i] = 1
                coeff = coeff.shift(shift)
            if include_offset:
                if any(self.offset):
                    coeff = coeff.shift(self.offset)
                if self.factor is not None:
                    coeff = coeff * self.factor
            out.append(coeff)
        return out

    def apply(self, g: PolySeries) -> PolySeries:
        """The derivation applied to g, offset included."""
        if g.variables != self.names:
            raise VariableMismatch(self.names, g.variables)
        result = PolySeries.zero(self.names)
        for name, action in zip(self.names, self.actions(include_offset=True)):
            derivative = g.derivative(name)
            if derivative.is_exact_zero() or action.is_exact_zero():
                continue
            result = result + action * derivative
        return result

    def with_flags(self, *flags: str) -> "LogVectorField":
        return LogVectorField(self.names, self.frame, self.coefficients, self.offset,
                              self.flags | set(flags), self.factor)

    def to_text(self) -> str:
        parts = []
        for name, mode, coeff in zip(self.names, self.frame, self.coefficients):
            if coeff.is_zero():
                continue
            base = f"{name}*d/d{name}" if mode == FRAME_LOG else f"d/d{name}"
            parts.append(f"({coeff.to_text()}) {base}")
        body = " + ".join(parts) if parts else "0"
        if self.factor is not None:
            body = f"({self.factor.to_text()}) * [{body}]"
        if any(self.offset):
            body = f"z^{self.offset} * [{body}]"
        return body

    def __repr__(self):
        return f"LogVectorField({self.to_text()})"


def _proportional(a: PolySeries, b: PolySeries) -> bool:
    if set(a.terms) != set(b.terms):
        return False
    first = next(iter(a.terms))
    ratio = b.terms[first] / a.terms[first]
    return all(b.terms[e] == ratio * c for e, c in a.terms.items())


def normalize_generator(field: LogVectorField) -> LogVectorField:
    """Move the monomial content of the coefficients into the offset."""
    nonzero = [c for c in field.coefficients if not c.is_zero()]
    if not nonzero:
        raise ZeroField()
    n = len(field.names)
    gcd = [min(c.min_exponent(k) for c in nonzero) for k in range(n)]
    stripped = tuple(-k for k in gcd)
    coefficients = [c.shift(stripped) for c in field.coefficients]
    offset = tuple(a + b for a, b in zip(field.offset, gcd))
    flags = set(field.flags)

    reduced = [c for c in coefficients if not c.is_zero()]
    ref = reduced[0]
    if (len(ref.terms) >= 2 and ref.constant_term() == 0
            and all(_proportional(ref, c) for c in reduced[1:])):
        flags.add(FLAG_NON_MONOMIAL_FACTOR)
        logger.warning(f"Coefficients share the non-monomial factor {ref.to_text()}; "
                       f"left undivided")
    return LogVectorField(field.names, field.frame, coefficients, offset, flags, field.factor)


def _divide_by_image(action: PolySeries, exponent: Sequence[int]) -> PolySeries:
    return action.shift(tuple(-k for k in exponent))


def transform(field: LogVectorField, sub: Union[Substitution, "TransformRecord"],
              normalize: bool = True, cap: Optional[int] = None) -> LogVectorField:
    """Express the generator in the new coordinates of a substitution (chain rule)."""
    if not isinstance(sub, Substitution):
        sub = sub.substitution(field.names)
    if sub.variables != field.names:
        raise VariableMismatch(field.names, sub.variables)
    names = field.names
    n = len(names)
    try:
        images = [sub.apply(a, cap) for a in field.actions()]
    except ApplicationError:
        raise
    except Exception as e:
        raise FieldError(f"Failed to transform field along {sub!r}: {e}")

    def unit(k: int) -> List[int]:
        e = [0] * n
        e[k] = 1
        return e

    new_actions: List[PolySeries]
    if sub.kind == "monomial":
        inverse = sub.inverse_matrix()
        logs = [_divide_by_image(images[i], sub.matrix[i]) for i in range(n)]
        new_actions = []
        for k in range(n):
            row = inverse[k]
            if all(row[i] == (1 if i == k else 0) for i in range(n)):
                new_actions.append(images[k])
                continue
            total = PolySeries.zero(names)
            for i in range(n):
                if row[i]:
                    total = total + logs[i] * row[i]
            new_actions.append(total.shift(unit(k)))
    elif sub.kind == "translation":
        v = names.index(sub.var)
        a = sub.m_exponents
        new_actions = list(images)
        if sub.mode == "mul":
            drift = PolySeries.zero(names)
            for s in range(n):
                if a[s]:
                    drift = drift + _divide_by_image(images[s], unit(s)) * a[s]
            shifted = PolySeries.variable(names, sub.var) + sub.c
            new_actions[v] = images[v].shift(tuple(-k for k in a)) - shifted * drift
        else:
            correction = PolySeries.zero(names)
            for s in range(n):
                if a[s]:
                    exp = [a[t] - (1 if t == s else 0) for t in range(n)]
                    correction = correction + images[s].shift(exp) * a[s]
            new_actions[v] = images[v] - correction * sub.c
    elif sub.kind == "ramify":
        v = names.index(sub.var)
        new_actions = list(images)
        exp = [0] * n
        exp[v] = 1 - sub.degree
        new_actions[v] = images[v].shift(exp) * Fraction(1, sub.degree)
    else:
        raise ValidationError(f"Unknown substitution kind {sub.kind}", "kind", sub.kind)

    result = LogVectorField.from_actions(names, field.frame, new_actions, normalize=False)
    offset, factor = _offset_image(field, sub, cap)
    result = LogVectorField(names, field.frame, result.coefficients, offset, field.flags, factor)
    return normalize_generator(result) if normalize else result


def _offset_image(field: LogVectorField, sub: Substitution,
                  cap: Optional[int]) -> Tuple[Tuple[int, ...], Optional[PolySeries]]:
    """z^offset * factor after sub, split into a monomial offset and the leftover factor."""
    factor = None if field.factor is None else sub.apply(field.factor, cap)
    if sub.kind != "translation":
        return push_monomial(field.offset, sub), factor
    names = field.names
    v = names.index(sub.var)
    power = field.offset[v]
    if not power or (sub.mode == "mul" and sub.c == 0):
        return push_monomial(field.offset, sub), factor
    if sub.mode == "mul":
        offset = push_monomial(field.offset, sub)
        unit = PolySeries.variable(names, sub.var) + sub.c
        leftover = unit ** power if power > 0 else ps_invert_unit(unit ** -power, cap)
    else:
        if power < 0:
            raise FieldError(f"z^{field.offset} is not a monomial times a unit after {sub!r}")
        image = sub.apply(PolySeries.variable(names, sub.var) ** power, cap)
        gcd = image.monomial_gcd()
        leftover = image.shift(tuple(-k for k in gcd))
        offset = tuple(gcd[t] + (0 if t == v else field.offset[t]) for t in range(len(names)))
    return offset, leftover if factor is None else factor * leftover


def transform_along(field: LogVectorField, records: Sequence, normalize: bool = True,
                    cap: Optional[int] = None) -> LogVectorField:
    """Transform through a record sequence, normalizing only at the end."""
    current = field
    for record in records:
        current = transform(current, record, normalize=False, cap=cap)
    return normalize_generator(current) if normalize else current


def linear_part(field: LogVectorField) -> Matrix:
    """L[i, k] = coefficient of z_k in xi(z_i), for the generator."""
    n = len(field.names)
    matrix = zeros(n, n)
    for i, action in enumerate(field.actions()):
        for k in range(n):
            exp = [0] * n
            exp[k] = 1
            c = action.coefficient(exp)
            if c:
                matrix[i, k] = Rational(c.numerator, c.denominator)
    return matrix


def is_nonsingular(field: LogVectorField, include_offset: bool = False) -> bool:
    """Some derivative xi(z_i) is a unit; the offset counts only when asked for."""
    return any(action.constant_term() != 0 for action in field.actions(include_offset))


def is_elementary(field: LogVectorField) -> bool:
    """Nonsingular, or a linear part that is not nilpotent (trace of some power nonzero)."""
    if is_nonsingular(field):
        return True
    matrix = linear_part(field)
    power = matrix
    for _ in range(len(field.names)):
        if power.trace() != 0:
            return True
        power = power * matrix
    return False


def is_log_elementary_adapted(field: LogVectorField, log_set: Iterable[str]) -> bool:
    """Some coefficient against the frame with log factors on log_set has degree <= 1."""
    log_set = set(log_set)
    n = len(field.names)
    coefficients = []
    for i, (name, action) in enumerate(zip(field.names, field.actions())):
        if name in log_set:
            exp = [0] * n
            exp[i] = -1
            action = action.shift(exp)
        if any(k < 0 for e in action.terms for k in e):
            return False
        coefficients.append(action)
    nonzero = [c for c in coefficients if not c.is_zero()]
    if not nonzero:
        return False
    gcd = tuple(-min(c.min_exponent(k) for c in nonzero) for k in range(n))
    return any(sum(e) <= 1 for c in nonzero for e in c.shift(gcd).terms)


def log_eigenvalues(field: LogVectorField, x: str, y: str) -> Tuple[Fraction, Fraction]:
    """(lambda, mu): constant of the x*d/dx coefficient and d(xi(y))/dy at the origin."""
    n = len(field.names)
    lam = field.coefficient(x).constant_term() if field.frame[field.names.index(x)] == FRAME_LOG \
        else Fraction(0)
    action = field.actions()[field.names.index(y)]
    exp = [0] * n
    exp[field.names.index(y)] = 1
    return lam, action.coefficient(exp)


def field_from_coefficients(names: Sequence[str], frame: Sequence[str],
                            coefficients: Dict[str, PolySeries],
                            normalize: bool = True) -> LogVectorField:
    ordered = [coefficients.get(name, PolySeries.zero(names)) for name in names]
    field = LogVectorField(names, frame, ordered)
    return normalize_generator(field) if normalize else field


def reframe(field: LogVectorField, frame: Sequence[str], normalize: bool = True) -> LogVectorField:
    """The same generator read against another frame."""
    return LogVectorField.from_actions(field.names, frame, field.actions(), normalize)


def push_monomial(exponent: Sequence[int], sub: Substitution) -> Tuple[int, ...]:
    """Exponent of the monomial part of z^exponent after a substitution; units are dropped."""
    e = list(exponent)
    n = len(e)
    if sub.kind == "monomial":
        return tuple(sum(e[i] * sub.matrix[i][k] for i in range(n)) for k in range(n))
    v = sub.variables.index(sub.var) if sub.var is not None else None
    if sub.kind == "ramify":
        e[v] *= sub.degree
        return tuple(e)
    if sub.kind == "translation":
        if not e[v]:
            return tuple(e)
        if sub.mode == "mul":
            power = e[v]
            for t, a in enumerate(sub.m_exponents):
                e[t] += power * a
            e[v] = power if sub.c == 0 else 0
            return tuple(e)
        raise FieldError(f"z^{tuple(exponent)} is not a monomial times a unit after {sub!r}")
    raise ValidationError(f"Unknown substitution kind {sub.kind}", "kind", sub.kind)


def transform_tracking(field: LogVectorField, records: Sequence,
                       cap: Optional[int] = None) -> Tuple[LogVectorField, Tuple[int, ...]]:
    """Normalize after every record and return the accumulated monomial factor.

    The unnormalized transform equals z^shift * generator up to a unit.
    """
    current = field.generator()
    shift = (0,) * len(field.names)
    for record in records:
        sub = record if isinstance(record, Substitution) else record.substitution(field.names)
        shift = push_monomial(shift, sub)
        current = transform(current.generator(), sub, normalize=True, cap=cap)
        shift = tuple(a + b for a, b in zip(shift, current.offset))
    return current, shift
