"""
Rank-One Engine
Reduction in dimension three along a valuation of rational rank one. Coordinates are (x, w, y)
with x independent; the field is written against x*d/dx, d/dw, d/dy and cut into levels by
the power of y. A level s is the planar piece a*x*d/dx + b*d/dw + c*y*d/dy multiplied by y^s,
with a, b, c series in (x, w).

The driver x-prepares, completely prepares with w-packages, then dispatches on the critical
segment: a y-package (case C), a dominant Tchirnhausen change (case A), or the recessive
preparation loop followed by its final step (case B).
"""

import sys
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

sys.path.append(str(Path(__file__).parent.parent))

from utils.exceptions import (
    BudgetExceeded, InsufficientPrecision, InvariantViolation, MaximalContactDetected,
    PrecisionError, ShapeViolation, StepBudgetExceeded, ValidationError, ZeroField,
)
from utils.logger import LoggerMixin, get_logger
from config.constants import (
    FRAME_LOG, FRAME_PLAIN, VERDICT_EXHAUSTED, VERDICT_LOG_ELEMENTARY, VERDICT_MAXIMAL_CONTACT,
)
from config.settings import EngineSettings
from core.values import Value
from core.series import PolySeries, ps_invert_unit
from core.model import (
    LocalModel, TransformRecord, contact_data, coord_change,
    etale_puiseux_package, package_records,
)
from core.foliation import (
    LogVectorField, is_log_elementary_adapted, normalize_generator, transform, transform_along,
    transform_tracking,
)
from core.npp import (
    field_difference, initial_part, level_decomposition, maximal_contact_witness,
    monomial_abscissa,
)
from core.timeline import Timeline, Verdict

logger = get_logger("rankone")

DOMINANT = "dominant"
RECESSIVE = "recessive"
UNPREPARED = "unprepared"

CASE_A = "A"
CASE_B = "B"
CASE_C = "C"


def rank_one_coordinates(model: LocalModel) -> Tuple[str, str, str]:
    """(x, w, y): the independent, then the two dependents in order."""
    if len(model.names) != 3 or model.rank != 1:
        raise ValidationError("Rank-one reduction needs coordinates (x, w, y) with x independent",
                              "names", model.names)
    return model.independents[0], model.dependents[0], model.dependents[1]


def _unit_vector(n: int, position: int, k: int = 1) -> Tuple[int, ...]:
    return tuple(k if i == position else 0 for i in range(n))


def _refute(exact: bool, message: str, invariant: str, witness: Dict[str, object]):
    """A failed law: a violation on exact data, a precision shortfall on truncated data."""
    if not exact:
        raise InsufficientPrecision(f"{message} on truncated coefficients", witness)
    raise InvariantViolation(message, invariant, witness)


# Levels and planar invariants

@dataclass(frozen=True)
class TwoVarLevel:
    """Level s of the field: coefficients of x*d/dx, d/dw and y*d/dy, free of y."""

    s: int
    a: PolySeries
    b: PolySeries
    c: PolySeries

    @property
    def components(self) -> Tuple[PolySeries, PolySeries, PolySeries]:
        return self.a, self.b, self.c

    def is_zero(self) -> bool:
        return all(f.is_zero() for f in self.components)

    @property
    def is_exact(self) -> bool:
        return all(f.is_exact for f in self.components)

    def x_order(self, xi: int) -> Optional[int]:
        orders = [f.min_exponent(xi) for f in self.components if not f.is_zero()]
        return min(orders) if orders else None


def levels_of(field: LogVectorField, model: LocalModel,
              y: Optional[str] = None) -> Dict[int, TwoVarLevel]:
    """Levels by powers of y (the last dependent unless given); w is the other dependent.

    A component of level s cut from a coefficient known below total degree P is known below
    P - e, e the power of y the level strips from that slot.
    """
    x, w, last = rank_one_coordinates(model)
    y = y or last
    w = w if w != y else last
    slots = [field.names.index(name) for name in (x, w, y)]
    expected = (FRAME_LOG, FRAME_PLAIN, FRAME_PLAIN)
    if tuple(field.frame[k] for k in slots) != expected:
        raise ValidationError("Rank-one levels need x*d/dx, d/dw, d/dy", "frame", field.frame)
    precisions = [field.coefficients[slot].precision for slot in slots]
    levels = {}
    for s, monomials in level_decomposition(field, y).items():
        parts: List[Dict[Tuple[int, ...], Fraction]] = [{}, {}, {}]
        for exp, vector in monomials.items():
            for k, slot in enumerate(slots):
                if vector[slot]:
                    parts[k][exp] = vector[slot]
        stripped = (s, s, s + 1)
        levels[s] = TwoVarLevel(s, *(
            PolySeries(field.names, terms, None if p is None else p - e)
            for terms, p, e in zip(parts, precisions, stripped)))
    return levels


def function_lambda(f: PolySeries, model: LocalModel) -> Optional[Value]:
    """min over the terms x^i w^t of nu(x^i w^t); None for f = 0."""
    _, _, y = rank_one_coordinates(model)
    if f.is_zero():
        return None
    return min(monomial_abscissa(model, exp, (y,)) for exp in f.terms)


def function_alpha(f: PolySeries, model: LocalModel) -> Optional[Value]:
    x, _, _ = rank_one_coordinates(model)
    if f.is_zero():
        return None
    return model.value(x) * f.min_exponent(model.names.index(x))


def level_lambda(level: TwoVarLevel, model: LocalModel) -> Value:
    """lambda of a*x*d/dx + b*d/dw + c*y*d/dy; d/dw weighs -nu(w)."""
    _, w, _ = rank_one_coordinates(model)
    nu_w = model.value(w)
    candidates = []
    for k, f in enumerate(level.components):
        value = function_lambda(f, model)
        if value is not None:
            candidates.append(value - nu_w if k == 1 else value)
    if not candidates:
        raise ZeroField("Level is zero")
    return min(candidates)


def level_alpha(level: TwoVarLevel, model: LocalModel) -> Value:
    x, _, _ = rank_one_coordinates(model)
    order = level.x_order(model.names.index(x))
    if order is None:
        raise ZeroField("Level is zero")
    return model.value(x) * order


def two_var_invariants(level: TwoVarLevel, model: LocalModel) -> Tuple[Value, Value, Value]:
    """(lambda, alpha, Lambda = lambda - alpha) of a nonzero level against (x, w)."""
    _, w, _ = rank_one_coordinates(model)
    lam = level_lambda(level, model)
    alpha = level_alpha(level, model)
    big = lam - alpha
    if big < -model.value(w):
        _refute(level.is_exact, "Lambda below -nu(w)", "lambda_bound",
                {"level": level.s, "Lambda": big, "nu_w": model.value(w)})
    return lam, alpha, big


def classify_level(level: TwoVarLevel, model: LocalModel) -> str:
    """Dominant if b/x^q is a unit, recessive if c/x^q is, q the x-order of the level."""
    xi = model.names.index(model.independents[0])
    q = level.x_order(xi)
    if q is None:
        return UNPREPARED
    origin = _unit_vector(len(model.names), xi, q)
    if level.b.coefficient(origin) != 0:
        return DOMINANT
    if level.c.coefficient(origin) != 0:
        return RECESSIVE
    return UNPREPARED


@dataclass(frozen=True)
class StrongForm:
    """x^rho * U * theta + x^tau * V * y*d/dy with U(0, w) = lam and V(0, w) = mu."""

    rho: Optional[int]
    tau: Optional[int]
    lam: Fraction
    mu: Fraction

    @property
    def character(self) -> str:
        if self.tau is None or (self.rho is not None and self.rho < self.tau):
            return DOMINANT
        return RECESSIVE

    def is_stable_recessive(self, nu_x: Value, nu_w: Value) -> bool:
        """Recessive and kept recessive by every w-package: nu(x^(rho - tau)) > nu(w)."""
        if self.character != RECESSIVE:
            return False
        return self.rho is None or nu_w < nu_x * (self.rho - self.tau)


def _strong_part(f: PolySeries, xi: int) -> Tuple[bool, Optional[int], Fraction]:
    """(ok, k, c) with f = x^k * (c + x*g), c a nonzero constant; (True, None, 0) for f = 0."""
    if f.is_zero():
        return True, None, Fraction(0)
    k = f.min_exponent(xi)
    bottom = [e for e in f.terms if e[xi] == k]
    if len(bottom) != 1 or any(v for i, v in enumerate(bottom[0]) if i != xi):
        return False, None, Fraction(0)
    return True, k, f.terms[bottom[0]]


def strong_form(level: TwoVarLevel, model: LocalModel) -> Optional[StrongForm]:
    """The strongly prepared shape of a level, None when the level does not have it."""
    xi = model.names.index(model.independents[0])
    ok_b, rho, lam = _strong_part(level.b, xi)
    ok_c, tau, mu = _strong_part(level.c, xi)
    if not (ok_b and ok_c) or rho == tau:
        return None
    if not level.a.is_zero():
        if rho is None or level.a.min_exponent(xi) < rho + 1:
            return None
    return StrongForm(rho, tau, lam, mu)


def x_preparation(field: LogVectorField, model: LocalModel) -> Optional[Tuple[Fraction, int]]:
    """(lam, m) when the x*d/dx coefficient is exactly lam * x^m."""
    x, _, _ = rank_one_coordinates(model)
    xi = model.names.index(x)
    h = field.coefficient(x)
    if len(h.terms) != 1:
        return None
    (exp, c), = h.terms.items()
    if any(k for i, k in enumerate(exp) if i != xi):
        return None
    return c, exp[xi]


# Supports and preparation states

@dataclass(frozen=True)
class RankOneSupport:
    """Level abscissas alpha_s and the main and critical data read from them."""

    alphas: Dict[int, Value]
    alpha: Value
    h: int
    nu_y: Value
    delta: Value
    critical: Tuple[int, ...]
    chi: int

    def snapshot(self) -> Dict[str, object]:
        return {"h": self.h, "chi": self.chi, "delta": self.delta}


def rank_one_support(field: LogVectorField, model: LocalModel,
                     levels: Optional[Dict[int, TwoVarLevel]] = None) -> RankOneSupport:
    _, _, y = rank_one_coordinates(model)
    levels = levels if levels is not None else levels_of(field, model)
    alphas = {s: level_alpha(level, model) for s, level in levels.items() if not level.is_zero()}
    if not alphas:
        raise ZeroField()
    alpha = min(alphas.values())
    h = min(s for s, a in alphas.items() if a == alpha)
    nu_y = model.value(y)
    if nu_y is None:
        raise MaximalContactDetected(y)
    heights = {s: a + nu_y * s for s, a in alphas.items()}
    delta = min(heights.values())
    critical = tuple(sorted(s for s, v in heights.items() if v == delta))
    chi = max(critical)
    if chi > h:
        raise InvariantViolation("Critical height above main height", "chi_below_h",
                                 {"chi": chi, "h": h})
    return RankOneSupport(alphas, alpha, h, nu_y, delta, critical, chi)


@dataclass
class PreparationState:
    """Preparation flags of a field; each flag implies the weaker ones before it."""

    support: RankOneSupport
    characters: Dict[int, str]
    forms: Dict[int, StrongForm]
    x_prepared: bool
    log_elementary: bool = False

    @property
    def h(self) -> int:
        return self.support.h

    @property
    def chi(self) -> int:
        return self.support.chi

    @property
    def delta(self) -> Value:
        return self.support.delta

    @property
    def main_vertex_prepared(self) -> bool:
        return self.characters.get(self.h) == DOMINANT

    @property
    def strongly_main_vertex_prepared(self) -> bool:
        form = self.forms.get(self.h)
        return self.main_vertex_prepared and form is not None and form.character == DOMINANT

    @property
    def segment_character(self) -> Optional[str]:
        """The common character of the critical levels, None if mixed or not strong."""
        characters = set()
        for s in self.support.critical:
            form = self.forms.get(s)
            if form is None:
                return None
            characters.add(form.character)
        return characters.pop() if len(characters) == 1 else None

    @property
    def completely_prepared(self) -> bool:
        if not (self.x_prepared and self.strongly_main_vertex_prepared):
            return False
        if any(s not in self.forms for s in self.support.alphas if s < self.h):
            return False
        return self.segment_character is not None

    def snapshot(self) -> Dict[str, object]:
        data = dict(self.support.snapshot())
        data["prepared"] = ("complete" if self.completely_prepared else
                            "strong" if self.strongly_main_vertex_prepared else
                            "main" if self.main_vertex_prepared else "none")
        return data


def preparation_state(field: LogVectorField, model: LocalModel) -> PreparationState:
    x, _, _ = rank_one_coordinates(model)
    levels = levels_of(field, model)
    support = rank_one_support(field, model, levels)
    characters = {}
    forms = {}
    for s, level in levels.items():
        if level.is_zero():
            continue
        characters[s] = classify_level(level, model)
        form = strong_form(level, model)
        if form is not None:
            forms[s] = form
    return PreparationState(support, characters, forms,
                            x_preparation(field, model) is not None,
                            is_log_elementary_adapted(field, (x,)))


# Critical segment

@dataclass(frozen=True)
class CriticalData:
    """Crit = lam * x^q * P(x, y) against d/dw (dominant) or d/dy (recessive)."""

    character: str
    chi: int
    lam: Fraction
    q: int
    coefficients: Dict[int, Tuple[Fraction, int]]
    degree: int
    tchirnhausen: bool
    subleading: Optional[int]

    def polynomial(self, names: Sequence[str], x: str, y: str) -> PolySeries:
        xi, yi = list(names).index(x), list(names).index(y)
        terms = {}
        for power, (c, e) in self.coefficients.items():
            exp = [0] * len(names)
            exp[xi], exp[yi] = e, power
            terms[tuple(exp)] = c
        return PolySeries(names, terms)

    def root_order(self, residue: Fraction) -> int:
        """Order at y = 0 of P(1, y + residue)."""
        expanded: Dict[int, Fraction] = {}
        for power, (c, _) in self.coefficients.items():
            for j in range(power + 1):
                expanded[j] = expanded.get(j, Fraction(0)) + c * comb(power, j) * residue ** (power - j)
        nonzero = [j for j, c in expanded.items() if c != 0]
        if not nonzero:
            raise InvariantViolation("Critical polynomial vanishes at x = 1", "critical_polynomial")
        return min(nonzero)


def critical_data(field: LogVectorField, model: LocalModel, state: PreparationState) -> CriticalData:
    """Read lam, q and P off a completely prepared field and check Crit has that shape."""
    if not state.completely_prepared:
        raise ShapeViolation("Critical data needs a completely prepared field", state.snapshot())
    x, w, y = rank_one_coordinates(model)
    nu_x, nu_y = model.value(x), model.value(y)
    character = state.segment_character
    dominant = character == DOMINANT
    chi = state.chi

    def read(s: int) -> Tuple[Fraction, int]:
        form = state.forms[s]
        return (form.lam, form.rho) if dominant else (form.mu, form.tau)

    lam, q = read(chi)
    coefficients = {}
    for s in state.support.critical:
        c, e = read(s)
        if nu_x * (e - q) + nu_y * s != nu_y * chi:
            raise InvariantViolation("Critical polynomial is not homogeneous", "critical_homogeneous",
                                     {"level": s, "exponent": e})
        coefficients[s if dominant else s + 1] = (c / lam, e - q)
    degree = chi if dominant else chi + 1
    tchirnhausen = (degree - 1) not in coefficients
    subleading = None if tchirnhausen else coefficients[degree - 1][1]
    data = CriticalData(character, chi, lam, q, coefficients, degree, tchirnhausen, subleading)

    crit = initial_part(field, model, state.delta, y=y, skip=(w,))
    slot = field.names.index(w if dominant else y)
    xi = field.names.index(x)
    expected = data.polynomial(field.names, x, y).shift(_unit_vector(len(field.names), xi, q)) * lam
    for k, coeff in enumerate(crit.coefficients):
        target = expected if k == slot else PolySeries.zero(field.names)
        if not (coeff - target).is_zero():
            raise ShapeViolation("Critical part is not lam * x^q * P", {
                "component": field.names[k], "found": coeff.to_text(), "expected": target.to_text()})
    return data


def case_classify(state: PreparationState, critical: CriticalData) -> str:
    h, chi = state.h, critical.chi
    if critical.tchirnhausen:
        return CASE_C
    if critical.character == DOMINANT:
        return CASE_C if chi < h else CASE_A
    if chi < h - 1:
        return CASE_C
    if chi == h - 1:
        return CASE_B
    raise InvariantViolation("Recessive critical segment reaches the main height", "recessive_chi",
                             {"chi": chi, "h": h})


# Transport of functions through w-packages

def transported_function(f: PolySeries, records: Sequence[TransformRecord]) -> PolySeries:
    for record in records:
        f = record.substitution(f.variables).apply(f)
    return f


def package_lambda_identity(f: PolySeries, before: LocalModel, after: LocalModel) -> Tuple[Value, Value]:
    """(lambda(f; x, w), alpha of f in the package's coordinates); equal after a w-package."""
    moved = transported_function(f, package_records(before, after))
    return function_lambda(f, before), function_alpha(moved, after)


# Recessive preparation data

@dataclass(frozen=True)
class RecessiveStep:
    """y changes by x^p times a series in w while nu(y) stays at least gamma0."""

    h: int
    q: int
    p: Optional[int]
    epsilon: Value
    gamma0: Value


def recessive_step_shapes(levels: Dict[int, TwoVarLevel], model: LocalModel,
                          step: RecessiveStep) -> List[str]:
    """Shapes of levels h, h-1, h-2 a recessive step needs; a list of problems."""
    x, _, _ = rank_one_coordinates(model)
    xi = model.names.index(x)
    n = len(model.names)
    errors = []

    def at_least(f: PolySeries, k: int) -> bool:
        return f.is_zero() or f.min_exponent(xi) >= k

    top = levels.get(step.h)
    if top is None or top.b.coefficient((0,) * n) == 0:
        errors.append(f"level {step.h}: d/dw coefficient is not a unit")
    elif not (at_least(top.a, 1) and at_least(top.c, 1)):
        errors.append(f"level {step.h}: x*d/dx and y*d/dy coefficients not divisible by x")

    middle = levels.get(step.h - 1)
    if middle is None or middle.c.is_zero() or middle.c.min_exponent(xi) != step.q \
            or middle.c.coefficient(_unit_vector(n, xi, step.q)) == 0:
        errors.append(f"level {step.h - 1}: y*d/dy coefficient is not x^{step.q} times a unit")
    elif not (at_least(middle.a, step.q + 1) and at_least(middle.b, step.q + 1)):
        errors.append(f"level {step.h - 1}: x*d/dx and d/dw coefficients not divisible by "
                      f"x^{step.q + 1}")

    low = levels.get(step.h - 2)
    if low is not None:
        if step.p is None and not low.c.is_zero():
            errors.append(f"level {step.h - 2}: y*d/dy coefficient should vanish")
        elif step.p is not None and not at_least(low.c, step.q + step.p):
            errors.append(f"level {step.h - 2}: y*d/dy coefficient not divisible by "
                          f"x^{step.q + step.p}")
    if step.gamma0 <= step.epsilon:
        errors.append("gamma0 does not exceed epsilon")
    return errors


# Driver

class RankOneDriver(LoggerMixin):
    """Dimension three, rational rank one: preparation and the A/B/C case machine."""

    phase_name = "rankone"

    def __init__(self, settings: Optional[EngineSettings] = None,
                 timeline: Optional[Timeline] = None, max_steps: Optional[int] = None):
        self.settings = settings or EngineSettings()
        self.timeline = timeline or Timeline(self.settings.include_snapshots)
        self.max_steps = max_steps or self.settings.driver_steps
        self.budget = self.settings.rankone_steps
        self.spent = 0
        self.packages = 0
        self.heights: List[int] = []
        self.cases: List[str] = []
        self.x_data: Optional[Tuple[Fraction, int]] = None
        self._field: Optional[LogVectorField] = None
        self._model: Optional[LocalModel] = None

    def _advance(self, field: LogVectorField, model: LocalModel) -> Tuple[LogVectorField, LocalModel]:
        self._field, self._model = field, model
        self.timeline.follow(model)
        return field, model

    def _spend(self, name: str):
        self.spent += 1
        if self.spent > self.budget:
            raise StepBudgetExceeded(name, self.budget)

    def value_cap(self, model: LocalModel) -> Value:
        return model.basis.generator(0) * self.settings.value_cap_factor

    def _check_contact(self, model: LocalModel):
        cap = self.value_cap(model)
        for name in model.dependents:
            value = model.value(name)
            if value is None or cap < value:
                raise MaximalContactDetected(name)

    # Preparation

    def _package(self, field: LogVectorField, model: LocalModel, target: str):
        self._spend(target)
        after = etale_puiseux_package(model, target, self.settings.package_step_factor)
        field = transform_along(field, package_records(model, after))
        self.packages += 1
        return self._advance(field, after)

    def x_prepare(self, field: LogVectorField, model: LocalModel) -> Tuple[LogVectorField, LocalModel]:
        """Bring the x*d/dx coefficient to lam * x^m, lam a nonzero constant.

        Dividing by the unit keeps the field up to that unit, which moves into field.factor.
        """
        x, w, y = rank_one_coordinates(model)
        xi = model.names.index(x)
        while True:
            self._check_contact(model)
            h = field.coefficient(x)
            if h.is_zero():
                if not h.is_exact:
                    raise InsufficientPrecision("x*d/dx coefficient vanishes below its precision",
                                                h.precision)
                raise ValidationError("x is a first integral of the field", "field",
                                      field.to_text())
            m = h.min_exponent(xi)
            unit = h.shift(_unit_vector(len(model.names), xi, -m))
            lam = unit.constant_term()
            if lam != 0 and len(unit.terms) == 1:
                self.x_data = (lam, m)
                self.logger.debug(f"x-prepared: lam={lam} m={m}")
                return field, model
            if lam != 0:
                normalized = unit * (1 / lam)
                inverse = ps_invert_unit(normalized, self.settings.unit_inverse_order)
                factor = normalized if field.factor is None else field.factor * normalized
                field = LogVectorField(field.names, field.frame,
                                       [coeff * inverse for coeff in field.coefficients],
                                       field.offset, field.flags, factor)
                field, model = self._advance(field, model)
                continue
            target = w if not unit.set_zero(x).set_zero(y).is_zero() else y
            field, model = self._package(field, model, target)

    def w_package(self, field: LogVectorField, model: LocalModel) -> Tuple[LogVectorField, LocalModel]:
        """One etale w-package with the per-level abscissa laws checked on the raw transform.

        A law refuted by a level that is only known up to a precision bound is reported as
        InsufficientPrecision; on exact levels it is an InvariantViolation.
        """
        x, w, _ = rank_one_coordinates(model)
        nu_x, nu_w = model.value(x), model.value(w)
        self._spend(w)
        before = {s: level for s, level in levels_of(field, model).items() if not level.is_zero()}
        forms = {s: strong_form(level, model) for s, level in before.items()}

        after = etale_puiseux_package(model, w, self.settings.package_step_factor)
        raw = transform_along(field, package_records(model, after), normalize=False)
        raw_exact = all(coeff.is_exact for coeff in raw.coefficients)
        moved = levels_of(raw, after)
        for s, level in before.items():
            lam, alpha, _ = two_var_invariants(level, model)
            if s not in moved or moved[s].is_zero():
                _refute(level.is_exact and raw_exact, "Level vanished in a w-package",
                        "w_package_level", {"level": s})
            exact = level.is_exact and moved[s].is_exact
            alpha_after = level_alpha(moved[s], after)
            if alpha_after != lam:
                _refute(exact, "Level abscissa after a w-package differs from lambda",
                        "w_package_lambda", {"level": s, "lambda": lam, "alpha": alpha_after})
            bound = alpha - nu_w
            dominant = classify_level(level, model) == DOMINANT
            if alpha_after < bound or dominant != (alpha_after == bound):
                _refute(exact, "Level abscissa moved against its character", "w_package_shift",
                        {"level": s, "before": alpha, "after": alpha_after})
            form = forms[s]
            if form is not None and form.is_stable_recessive(nu_x, nu_w) and alpha_after != alpha:
                _refute(exact, "Stable recessive level moved", "w_package_recessive",
                        {"level": s, "before": alpha, "after": alpha_after})

        field = normalize_generator(raw)
        levels = levels_of(field, after)
        for s, form in forms.items():
            if form is None or form.character != DOMINANT:
                continue
            kept = strong_form(levels[s], after) if s in levels else None
            if kept is None or kept.character != DOMINANT:
                exact = before[s].is_exact and (s not in levels or levels[s].is_exact)
                _refute(exact, "Strongly prepared dominant level lost its shape",
                        "w_package_dominant", {"level": s})
        self.packages += 1
        return self._advance(field, after)

    def strong_prepare_level(self, field: LogVectorField, model: LocalModel,
                             s: int) -> Tuple[LogVectorField, LocalModel, StrongForm]:
        """w-packages until level s is strongly prepared."""
        while True:
            self._check_contact(model)
            level = levels_of(field, model).get(s)
            if level is None or level.is_zero():
                raise ValidationError(f"Level {s} is zero", "level", s)
            form = strong_form(level, model)
            if form is not None:
                return field, model, form
            field, model = self.w_package(field, model)

    def completely_prepare(self, field: LogVectorField,
                           model: LocalModel) -> Tuple[LogVectorField, LocalModel, PreparationState]:
        """w-packages until the field is completely prepared or log-elementary."""
        while True:
            self._check_contact(model)
            state = preparation_state(field, model)
            if not state.x_prepared:
                raise InvariantViolation("x-preparation was lost", "x_prepared",
                                         {"coefficient": field.coefficient(model.names[0]).to_text()})
            if state.log_elementary or state.completely_prepared:
                return field, model, state
            field, model = self.w_package(field, model)

    # Cases

    def y_package_step(self, field: LogVectorField, model: LocalModel, state: PreparationState,
                       critical: CriticalData) -> Tuple[LogVectorField, LocalModel, PreparationState]:
        """Case C: one etale y-package; w'' = w + y' when the segment is recessive."""
        x, w, y = rank_one_coordinates(model)
        xi = model.names.index(x)
        self._spend(y)
        after = etale_puiseux_package(model, y, self.settings.package_step_factor)
        records = package_records(model, after)
        residue = records[-1].c
        root = critical.root_order(residue)
        if root > critical.degree or (critical.tchirnhausen and root >= critical.degree):
            raise InvariantViolation("Root of the critical polynomial is too deep", "root_order",
                                     {"root": root, "degree": critical.degree})

        moved, shift = transform_tracking(field, records)
        nu_t = after.value(x)
        if nu_t * shift[xi] != state.delta:
            raise InvariantViolation("y-package did not reach the critical abscissa",
                                     "critical_abscissa",
                                     {"delta": state.delta, "alpha": nu_t * shift[xi]})
        rest = field_difference(field, initial_part(field, model, state.delta, y=y, skip=(w,)))
        if not rest.is_zero():
            _, rest_shift = transform_tracking(rest, records)
            if not state.delta < nu_t * rest_shift[xi]:
                raise InvariantViolation("Residual part reached the critical abscissa",
                                         "critical_residual", {"delta": state.delta})
        field, model = self._advance(moved, after)

        if critical.character == RECESSIVE:
            model = coord_change(model, w, s=y)
            field, model = self._advance(transform(field, model.history[-1]), model)

        field, model, result = self.completely_prepare(field, model)
        if result.completely_prepared and result.h > root:
            raise InvariantViolation("Main height above the root order", "h_root",
                                     {"h": result.h, "root": root})
        return field, model, result

    def _tchirnhausen_error(self, parts: Dict[int, PolySeries], level: int,
                            shift: PolySeries) -> PolySeries:
        """Coefficient of y^level in sum_s parts[s] * (y + shift)^s."""
        total = PolySeries.zero(shift.variables)
        for s, part in parts.items():
            if s >= level:
                total = total + part * shift ** (s - level) * comb(s, level)
        return total

    def dominant_tchirnhausen_prep(self, field: LogVectorField, model: LocalModel,
                                   state: PreparationState) -> Tuple[LogVectorField, LocalModel, PreparationState]:
        """Case A: y* = y - x^p g removes the y^(h-1) term of the d/dw coefficient."""
        x, w, y = rank_one_coordinates(model)
        names, xi = model.names, model.names.index(x)
        data = contact_data(model, y)
        if data.d != 1:
            raise ShapeViolation("Dominant Tchirnhausen change needs nu(y) = nu(x^p)", {"d": data.d})
        p, h = data.p[0], state.h
        order = self.settings.unit_inverse_order
        parts = field.coefficient(w).split_by(y)
        top = parts.get(h)
        if top is None or top.constant_term() == 0:
            raise ShapeViolation("Level h of the d/dw coefficient is not a unit", {"h": h})
        inverse = ps_invert_unit(top * h, order)
        x_p = PolySeries.monomial(names, _unit_vector(len(names), xi, p))

        g = PolySeries.zero(names)
        for _ in range(order):
            error = self._tchirnhausen_error(parts, h - 1, x_p * g)
            if error.is_zero() or error.min_exponent(xi) > 2 * p:
                break
            if error.min_exponent(xi) < p:
                raise ShapeViolation("Level h-1 of the d/dw coefficient is not divisible by x^p",
                                     {"p": p, "coefficient": error.to_text()})
            g = (g - error.shift(_unit_vector(len(names), xi, -p)) * inverse).truncate(order)

        start = model
        for exp, c in sorted(g.terms.items()):
            exponents = list(exp)
            exponents[xi] += p
            model = coord_change(model, y, exponents, c)
        field = transform_along(field, package_records(start, model))
        field, model = self._advance(field, model)

        field, model, result = self.completely_prepare(field, model)
        if result.log_elementary:
            return field, model, result
        if result.h != h:
            raise InvariantViolation("Tchirnhausen change moved the main height", "h_stable",
                                     {"before": h, "after": result.h})
        if case_classify(result, critical_data(field, model, result)) == CASE_A:
            raise InvariantViolation("Dominant Tchirnhausen change left case A", "case_a_exit",
                                     {"h": h})
        return field, model, result

    def recessive_prep_step(self, field: LogVectorField, model: LocalModel,
                            step: RecessiveStep) -> Tuple[LogVectorField, LocalModel, RecessiveStep]:
        """y* = y - x^p g with g = -f0(w) / (h * mu); the order p strictly increases."""
        x, w, y = rank_one_coordinates(model)
        names, xi = model.names, model.names.index(x)
        levels = levels_of(field, model)
        errors = recessive_step_shapes(levels, model, step)
        if errors:
            raise ShapeViolation("; ".join(errors), {"h": step.h, "q": step.q, "p": step.p})
        if step.p is None:
            return field, model, step

        low = levels.get(step.h - 2)
        obstruction = low.c if low is not None else PolySeries.zero(names)
        mu = levels[step.h - 1].c.coefficient(_unit_vector(len(names), xi, step.q))
        f0 = PolySeries.zero(names)
        if not obstruction.is_zero():
            f0 = obstruction.shift(_unit_vector(len(names), xi, -(step.q + step.p))).set_zero(x)
        g = f0 * (Fraction(-1) / (step.h * mu))

        start = model
        for exp, c in sorted(g.terms.items()):
            exponents = list(exp)
            exponents[xi] += step.p
            model = coord_change(model, y, exponents, c, floor=step.gamma0)
        field = transform_along(field, package_records(start, model))
        field, model = self._advance(field, model)

        levels = levels_of(field, model)
        if rank_one_support(field, model, levels).h != step.h:
            raise InvariantViolation("Recessive step moved the main height", "h_stable",
                                     {"h": step.h})
        low = levels.get(step.h - 2)
        new_p = None
        if low is not None and not low.c.is_zero():
            new_p = low.c.min_exponent(xi) - step.q
            if new_p <= step.p:
                raise InvariantViolation("Recessive obstruction order did not increase",
                                         "recessive_order", {"p": step.p, "after": new_p})
        self.timeline.certify("increase", "order(p)", step.p, new_p)
        return field, model, RecessiveStep(step.h, step.q, new_p, step.epsilon, step.gamma0)

    def _relative_alpha(self, field: LogVectorField, model: LocalModel, h: int) -> Optional[Value]:
        levels = levels_of(field, model)
        if h not in levels or h - 1 not in levels or levels[h - 1].is_zero():
            return None
        return level_alpha(levels[h - 1], model) - level_alpha(levels[h], model)

    def final_recessive_handler(self, field: LogVectorField, model: LocalModel,
                                step: RecessiveStep) -> Tuple[LogVectorField, LocalModel, PreparationState]:
        """nu(y) < nu(x^p): w-packages transport epsilon and p until case C is reached."""
        x, w, _ = rank_one_coordinates(model)
        spent = model.basis.zero()
        epsilon, p = step.epsilon, step.p
        while True:
            self._check_contact(model)
            state = preparation_state(field, model)
            if state.log_elementary or state.completely_prepared:
                break
            nu_x, nu_w = model.value(x), model.value(w)
            spent = spent + nu_w
            if not spent < step.gamma0 - step.epsilon:
                raise InvariantViolation("(x, w) is not recessive for gamma0 - epsilon",
                                         "recessive_bound",
                                         {"spent": spent, "bound": step.gamma0 - step.epsilon})
            level = levels_of(field, model).get(step.h - 1)
            form = strong_form(level, model) if level is not None and not level.is_zero() else None
            stable = form is not None and form.is_stable_recessive(nu_x, nu_w)
            d = contact_data(model, w).d
            field, model = self.w_package(field, model)
            moved = self._relative_alpha(field, model, step.h)
            if moved is not None:
                expected = epsilon + nu_w
                if expected < moved or (stable and moved != expected):
                    raise InvariantViolation("epsilon was not transported by the w-package",
                                             "epsilon_transport",
                                             {"expected": expected, "found": moved})
                epsilon = moved
            p = None if p is None else p * d
        self.logger.debug(f"Final recessive step: epsilon={epsilon.to_text()} p={p}")
        if state.log_elementary:
            return field, model, state
        case = case_classify(state, critical_data(field, model, state))
        if case != CASE_C:
            raise InvariantViolation("Final recessive step did not reach case C", "final_recessive",
                                     {"case": case, "h": state.h})
        return field, model, state

    def recessive_case(self, field: LogVectorField, model: LocalModel, state: PreparationState,
                       critical: CriticalData) -> Tuple[LogVectorField, LocalModel, PreparationState]:
        """Case B: recessive steps while nu(y) >= nu(x^p), then the final step."""
        x, _, y = rank_one_coordinates(model)
        q = state.forms[state.h - 1].tau
        step = RecessiveStep(state.h, q, critical.subleading, model.value(x) * q, model.value(y))
        while True:
            self._check_contact(model)
            if step.p is None or model.value(y) < model.value(x) * step.p:
                break
            self._spend(y)
            field, model, step = self.recessive_prep_step(field, model, step)
        return self.final_recessive_handler(field, model, step)

    # Loop

    def run(self, field: LogVectorField, model: LocalModel) -> Verdict:
        self.timeline.phase(self.phase_name, n=len(model.names), r=model.rank)
        self._advance(field, model)
        try:
            return self._loop(field, model)
        except MaximalContactDetected as e:
            return self._maximal_contact(e.details["variable"])
        except (BudgetExceeded, StepBudgetExceeded, PrecisionError) as e:
            self.logger.warning(f"{self.phase_name} exhausted: {e}")
            return Verdict(VERDICT_EXHAUSTED, self._model, self._field,
                           details={"reason": e.message, "cases": "".join(self.cases) or "-"},
                           timeline=self.timeline)

    def _loop(self, field: LogVectorField, model: LocalModel) -> Verdict:
        _, _, y = rank_one_coordinates(model)
        field, model = self.x_prepare(field, model)
        self.timeline.invariants("xprep", lam=self.x_data[0], m=self.x_data[1])
        previous = None
        for _ in range(self.max_steps):
            field, model, state = self.completely_prepare(field, model)
            if state.log_elementary:
                self.logger.info(f"Log-elementary at h={state.h}")
                return Verdict(VERDICT_LOG_ELEMENTARY, model, field,
                               details={"h": state.h, "cases": "".join(self.cases) or "-"},
                               timeline=self.timeline)
            if state.h <= 1:
                raise InvariantViolation("Main height at most one but not log-elementary",
                                         "log_elementary", {"field": field.to_text()})
            critical = critical_data(field, model, state)
            case = case_classify(state, critical)
            self.heights.append(state.h)
            self.cases.append(case)
            self.timeline.invariants(self.phase_name, h=state.h, chi=state.chi,
                                     delta=state.delta, case=case)
            if previous is not None:
                self.timeline.certify("atmost", "h", state.h, previous)
            previous = state.h

            if case == CASE_C:
                field, model, after = self.y_package_step(field, model, state, critical)
                if after.completely_prepared and not after.log_elementary:
                    if after.h >= state.h:
                        raise InvariantViolation("Case C did not lower the main height",
                                                 "h_decrease", {"before": state.h, "after": after.h})
                    self.timeline.certify("decrease", "h", state.h, after.h)
            elif case == CASE_A:
                field, model, _ = self.dominant_tchirnhausen_prep(field, model, state)
            else:
                field, model, _ = self.recessive_case(field, model, state, critical)
        raise StepBudgetExceeded(y, self.max_steps)

    def _maximal_contact(self, variable: str) -> Verdict:
        image, text = maximal_contact_witness(self._model, variable)
        self.logger.info(f"Maximal contact along {variable}: {text}")
        return Verdict(VERDICT_MAXIMAL_CONTACT, self._model, self._field, series=text,
                       details={"variable": variable, "cases": "".join(self.cases) or "-"},
                       timeline=self.timeline)

    def get_summary(self) -> Dict[str, object]:
        return {"heights": list(self.heights), "cases": list(self.cases),
                "packages": self.packages, "lines": len(self.timeline.lines)}


def rankone_driver(field: LogVectorField, model: LocalModel,
                   settings: Optional[EngineSettings] = None,
                   timeline: Optional[Timeline] = None) -> Verdict:
    rank_one_coordinates(model)
    return RankOneDriver(settings, timeline).run(field, model)
