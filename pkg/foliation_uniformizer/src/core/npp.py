"""
Newton-Puiseux Engine
Reduction of a foliation along a valuation of rational rank n-1: Newton-Puiseux supports and
their invariants, initial forms, the invariant law of Puiseux packages, monomialization of the
coefficient ideal, and the drivers for dimension three and dimension two.

Levels: with the dependent variable y, a term y^k of a log coefficient sits at level k and a
term y^k of the plain y coefficient (the derivative of y) sits at level k-1.
"""

import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

sys.path.append(str(Path(__file__).parent.parent))

from utils.exceptions import (
    BudgetExceeded, DivisibilityViolation, InvariantViolation, PrecisionError,
    StepBudgetExceeded, ValidationError, ZeroField,
)
from utils.logger import LoggerMixin, get_logger
from config.constants import (
    BRANCH_CORNER, BRANCH_FOLLOWED, FRAME_LOG, VERDICT_EXHAUSTED, VERDICT_LOG_ELEMENTARY,
    VERDICT_MAXIMAL_CONTACT,
)
from config.settings import EngineSettings
from core.values import Value
from core.series import GenSeries, PolySeries
from core.model import (
    CHART_COMB1, LocalModel, blowup, contact_data, coord_change, etale_puiseux_package,
    package_records, puiseux_package,
)
from core.foliation import (
    LogVectorField, is_log_elementary_adapted, log_eigenvalues, transform, transform_tracking,
)
from core.polyhedra import MonomializationGame, from_support
from core.timeline import Timeline, Verdict

logger = get_logger("npp")

Exponent = Tuple[int, ...]


# Levels

def term_level(field: LogVectorField, component: int, exponent: Exponent, y: str) -> int:
    k = exponent[field.names.index(y)]
    if field.names[component] == y and field.frame[component] != FRAME_LOG:
        return k - 1
    return k


def level_decomposition(field: LogVectorField, y: str) -> Dict[int, Dict[Exponent, List[Fraction]]]:
    """level -> (exponent with y removed) -> coefficient vector over the frame."""
    yi = field.names.index(y)
    n = len(field.names)
    levels: Dict[int, Dict[Exponent, List[Fraction]]] = {}
    for component, coeff in enumerate(field.coefficients):
        for exp, c in coeff.terms.items():
            s = term_level(field, component, exp, y)
            key = list(exp)
            key[yi] = 0
            vector = levels.setdefault(s, {}).setdefault(tuple(key), [Fraction(0)] * n)
            vector[component] += c
    return levels


def monomial_abscissa(model: LocalModel, exponent: Exponent, skip: Sequence[str] = ()) -> Value:
    total = model.basis.zero()
    for name, k in zip(model.names, exponent):
        if k and name not in skip:
            total = total + model.value(name) * k
    return total


@dataclass(frozen=True)
class NPSupport:
    """Points (abscissa, level) and the invariants read from them."""

    points: Tuple[Tuple[Value, int], ...]
    nu_y: Optional[Value]
    alpha: Value
    hbar: int
    delta: Optional[Value]
    critical: Tuple[int, ...]
    chi: Optional[int]

    def abscissa(self, level: int) -> Optional[Value]:
        for a, s in self.points:
            if s == level:
                return a
        return None

    def levels(self) -> List[int]:
        return sorted(s for _, s in self.points)

    def snapshot(self) -> Dict[str, object]:
        return {"alpha": self.alpha, "hbar": self.hbar, "delta": self.delta, "chi": self.chi}


def np_support(field: LogVectorField, model: LocalModel) -> NPSupport:
    """Newton-Puiseux support of a field whose independents carry the log frame."""
    if len(model.dependents) != 1:
        raise ValidationError("Newton-Puiseux supports need exactly one dependent variable",
                              "dependents", model.dependents)
    for name in model.independents:
        if field.frame[field.names.index(name)] != FRAME_LOG:
            raise ValidationError(f"Independent {name} must carry the log frame", "frame", name)
    y = model.dependents[0]
    levels = level_decomposition(field, y)
    if not levels:
        raise ZeroField()
    points = []
    for s, monomials in levels.items():
        points.append((min(monomial_abscissa(model, e, (y,)) for e in monomials), s))
    points.sort(key=lambda p: p[1])
    alpha = min(a for a, _ in points)
    hbar = min(s for a, s in points if a == alpha)

    nu_y = model.value(y)
    if nu_y is None:
        return NPSupport(tuple(points), None, alpha, hbar, None, (), None)
    heights = [(a + nu_y * s, s) for a, s in points]
    delta = min(h for h, _ in heights)
    critical = tuple(sorted(s for h, s in heights if h == delta))
    chi = max(critical)
    if chi > hbar:
        raise InvariantViolation("Critical height above main height", "chi_below_hbar",
                                 {"chi": chi, "hbar": hbar})
    return NPSupport(tuple(points), nu_y, alpha, hbar, delta, critical, chi)


# Initial forms

@dataclass(frozen=True)
class InitialForm:
    """Critical initial part: Delta_t is the linear field of level chi - d*t."""

    chi: int
    d: int
    rho: int
    q_chi: Tuple[int, ...]
    deltas: Tuple[Tuple[Fraction, ...], ...]
    monomials: Tuple[Tuple[int, Tuple[int, ...]], ...] = field(default=())

    def delta(self, t: int) -> Tuple[Fraction, ...]:
        return self.deltas[t]


def initial_part(field: LogVectorField, model: LocalModel, delta: Value,
                 y: Optional[str] = None, skip: Sequence[str] = ()) -> LogVectorField:
    """Terms x^a y^s (level s) with nu(x^a) + s*nu(y) = delta; names in `skip` weigh zero."""
    y = y or model.dependents[0]
    skip = tuple(skip) + (y,)
    nu_y = model.value(y)
    coefficients = []
    for component, coeff in enumerate(field.coefficients):
        kept = {}
        for exp, c in coeff.terms.items():
            s = term_level(field, component, exp, y)
            if monomial_abscissa(model, exp, skip) + nu_y * s == delta:
                kept[exp] = c
        coefficients.append(PolySeries(field.names, kept))
    return LogVectorField(field.names, field.frame, coefficients)


def field_difference(a: LogVectorField, b: LogVectorField) -> LogVectorField:
    return LogVectorField(a.names, a.frame,
                          [p - q for p, q in zip(a.coefficients, b.coefficients)])


def initial_form(field: LogVectorField, model: LocalModel,
                 support: Optional[NPSupport] = None) -> InitialForm:
    support = support or np_support(field, model)
    if support.delta is None:
        raise InvariantViolation("Initial form needs a finite value of y", "initial_form")
    y = model.dependents[0]
    data = contact_data(model, y)
    levels = level_decomposition(field, y)
    independents = [model.names.index(name) for name in model.independents]

    linear: Dict[int, Tuple[Tuple[int, ...], Tuple[Fraction, ...]]] = {}
    for s in support.critical:
        target = support.delta - support.nu_y * s
        hits = [(e, v) for e, v in levels[s].items()
                if monomial_abscissa(model, e, (y,)) == target]
        if len(hits) != 1:
            raise InvariantViolation("Critical level is not a single monomial", "initial_monomial",
                                     {"level": s, "count": len(hits)})
        exp, vector = hits[0]
        linear[s] = (tuple(exp[i] for i in independents), tuple(vector))

    chi, d = support.chi, data.d
    q_chi = linear[chi][0]
    for s, (q, _) in linear.items():
        if (chi - s) % d:
            raise DivisibilityViolation(s, chi, d)
        step = (chi - s) // d
        if tuple(a + step * b for a, b in zip(q_chi, data.p)) != q:
            raise DivisibilityViolation(s, chi, d)
    rho = (chi + 1) // d
    zero = tuple(Fraction(0) for _ in field.names)
    deltas = tuple(linear[chi - d * t][1] if chi - d * t in linear else zero
                   for t in range(rho + 1))
    if not any(deltas[0]):
        raise InvariantViolation("Leading initial field vanishes", "initial_nonzero")
    monomials = tuple(sorted((s, q) for s, (q, _) in linear.items()))
    return InitialForm(chi, d, rho, q_chi, deltas, monomials)


# Packages

@dataclass
class PackageOutcome:
    model: LocalModel
    field: LogVectorField
    before: NPSupport
    raw_alpha: Value
    after: NPSupport
    d: int
    etale: bool


def package_invariant_law(field: LogVectorField, model: LocalModel, etale: bool = False,
                          step_factor: Optional[int] = None) -> PackageOutcome:
    """Run one Puiseux package and check the height laws on the transformed field."""
    y = model.dependents[0]
    before = np_support(field, model)
    data = contact_data(model, y)
    kwargs = {"step_factor": step_factor} if step_factor else {}
    if etale:
        after_model = etale_puiseux_package(model, y, **kwargs)
    else:
        after_model, _ = puiseux_package(model, y, **kwargs)
    records = package_records(model, after_model)

    new_field, shift = transform_tracking(field, records)
    after = np_support(new_field, after_model)
    raw_alpha = after.alpha + monomial_abscissa(after_model, shift, (y,))
    witness = {"before": str(before.snapshot()), "records": [r.to_line() for r in records]}
    if raw_alpha != before.delta:
        raise InvariantViolation("Package abscissa differs from the critical value",
                                 "package_abscissa", dict(witness, alpha=raw_alpha.to_text()))

    residual = field_difference(field, initial_part(field, model, before.delta))
    if not residual.is_zero():
        moved, moved_shift = transform_tracking(residual, records)
        rest_alpha = (np_support(moved, after_model).alpha
                      + monomial_abscissa(after_model, moved_shift, (y,)))
        if not before.delta < rest_alpha:
            raise InvariantViolation("Residual abscissa did not exceed the critical value",
                                     "package_residual", witness)

    if after.hbar > before.chi:
        raise InvariantViolation("Main height exceeds the previous critical height",
                                 "package_height", dict(witness, hbar=after.hbar))
    if before.chi >= 1 and data.d >= 2 and after.hbar >= before.chi:
        raise InvariantViolation("Main height did not drop", "package_strict_drop",
                                 dict(witness, hbar=after.hbar, d=data.d))
    logger.debug(f"Package d={data.d}: hbar {before.hbar} -> {after.hbar} (chi {before.chi})")
    return PackageOutcome(after_model, new_field, before, raw_alpha, after, data.d, etale)


def coefficient_support(field: LogVectorField, model: LocalModel) -> List[Tuple[int, ...]]:
    positions = [field.names.index(name) for name in model.independents]
    return [tuple(e[i] for i in positions) for c in field.coefficients for e in c.terms]


def play_monomialization(field: LogVectorField, model: LocalModel,
                         budget_factor: Optional[int] = None) -> Tuple[LocalModel, LogVectorField]:
    """Blow up independents along the game word until the coefficient polyhedron is a vertex."""
    poly = from_support(coefficient_support(field, model))
    if poly.is_single_vertex():
        return model, field
    weights = model.independent_values()
    game = MonomializationGame(weights)
    if budget_factor:
        top = max(max(v) for v in poly.vertices)
        game.budget = budget_factor * poly.dimension * max(top, 1)
    game.run(poly)

    for step in game.history:
        big, small = model.independents[step.big], model.independents[step.small]
        model = blowup(model, small, big)
        record = model.history[-1]
        if record.chart != CHART_COMB1:
            raise InvariantViolation("Game chart disagrees with the values", "game_chart",
                                     {"record": record.to_line()})
        field = transform(field, record)
        recomputed = from_support(coefficient_support(field, model))
        if recomputed != step.after:
            raise InvariantViolation("Polyhedron transport mismatch", "polyhedron_transport",
                                     {"predicted": step.after.to_text(),
                                      "recomputed": recomputed.to_text()})
    return model, field


def monomialize_coefficients(field: LogVectorField, model: LocalModel,
                             budget_factor: Optional[int] = None) -> Tuple[LocalModel, LogVectorField]:
    """Blow up independents until the coefficient ideal is principal and monomial."""
    hbar = np_support(field, model).hbar
    model, field = play_monomialization(field, model, budget_factor)
    support = np_support(field, model)
    if not support.alpha.is_zero():
        raise InvariantViolation("Coefficient ideal is not a unit after monomialization",
                                 "alpha_zero", {"alpha": support.alpha.to_text()})
    if support.hbar > hbar:
        raise InvariantViolation("Main height increased during monomialization",
                                 "monomialize_height", {"before": hbar, "after": support.hbar})
    return model, field


# Maximal contact

def pullback_dependent(model: LocalModel, y: Optional[str] = None) -> PolySeries:
    """The starting dependent coordinate written in the current coordinates."""
    y = y or model.dependents[-1]
    series = PolySeries.variable(model.names, y)
    for record in model.history:
        series = record.substitution(model.names).apply(series)
    return series


def maximal_contact_witness(model: LocalModel, y: Optional[str] = None) -> Tuple[GenSeries, str]:
    """Truncated f-hat: the starting y expanded along the arc with the current y set to zero."""
    y = y or model.dependents[-1]
    restricted = pullback_dependent(model, y).set_zero(y)
    image = model.arc.image(restricted)
    return image, witness_text(image, model.independents)


def witness_text(image: GenSeries, independents: Sequence[str]) -> str:
    """Write T^g as a monomial in the starting independents (their values are the generators)."""
    pieces = []
    for g in image.support():
        c = image.terms[g]
        factors = []
        for name, k in zip(independents, g.coeffs):
            if k == 1:
                factors.append(name)
            elif k:
                factors.append(f"{name}^({k})")
        mono = "*".join(factors) or "1"
        body = mono if abs(c) == 1 else f"{abs(c)}*{mono}"
        if not pieces:
            pieces.append(body if c > 0 else f"-{body}")
        else:
            pieces.append(f"+ {body}" if c > 0 else f"- {body}")
    text = " ".join(pieces) if pieces else "0"
    if image.precision is not None:
        text += " + ..."
    return text


def simple_singularity(field: LogVectorField, x: str, y: str) -> Tuple[Fraction, Fraction, bool]:
    """Eigenvalues (lambda, mu) and whether mu/lambda avoids the positive rationals."""
    lam, mu = log_eigenvalues(field, x, y)
    if lam == 0 and mu == 0:
        return lam, mu, False
    if lam == 0 or mu == 0:
        return lam, mu, True
    return lam, mu, not (mu / lam > 0)


def is_singular_point(field: LogVectorField, y: str) -> bool:
    return field.actions()[field.names.index(y)].constant_term() == 0


def _along(g: PolySeries, y: str, phi: PolySeries, cap: int) -> PolySeries:
    """g(x, phi(x)) below total degree cap."""
    total = PolySeries.zero(g.variables, cap)
    for j, part in g.split_by(y).items():
        total = total + part * phi ** j
    return total.truncate(cap)


def invariant_branch(field: LogVectorField, x: str, y: str, order: int) -> PolySeries:
    """phi(x) up to x^order with y = phi(x) invariant through a simple singular point.

    The x^k term of xi(y) - phi'*xi(x) along y = phi is linear in phi_k with factor
    mu - k*lambda, which never vanishes at a simple point.  Stops early on truncated input.
    """
    lam, mu, simple = simple_singularity(field, x, y)
    if not simple or not is_singular_point(field, y):
        raise ValidationError("Invariant branches need a simple singular point", "field",
                              field.to_text())
    names = field.names
    actions = field.actions()
    along_x, along_y = actions[names.index(x)], actions[names.index(y)]
    phi = PolySeries.zero(names)
    xvar = PolySeries.variable(names, x)
    for k in range(1, order + 1):
        residual = _along(along_y, y, phi, k + 1) - phi.derivative(x) * _along(along_x, y, phi, k + 1)
        if residual.precision is not None and residual.precision <= k:
            break
        exp = [0] * len(names)
        exp[names.index(x)] = k
        r = residual.coefficient(exp)
        if r:
            phi = phi + xvar ** k * (r / (k * lam - mu))
    return phi


# Drivers

class Corank1Driver(LoggerMixin):
    """Rank n-1 reduction: monomialize, package, or change coordinates in the stable case."""

    phase_name = "corank1"

    def __init__(self, settings: Optional[EngineSettings] = None,
                 timeline: Optional[Timeline] = None, max_steps: Optional[int] = None):
        self.settings = settings or EngineSettings()
        self.timeline = timeline or Timeline(self.settings.include_snapshots)
        self.max_steps = max_steps or self.settings.driver_steps
        self.ramification_indices: List[int] = []
        self.heights: List[int] = []

    # Hooks for the dimension-two variant
    def stops_at(self, support: NPSupport) -> bool:
        return support.hbar in (-1, 0)

    def use_etale(self, model: LocalModel) -> bool:
        return False

    def on_step(self, field: LogVectorField, model: LocalModel, support: NPSupport):
        pass

    def follow_branch(self, field: LogVectorField, model: LocalModel,
                      support: NPSupport) -> Optional[Tuple[LocalModel, LogVectorField]]:
        return None

    def value_cap(self, model: LocalModel) -> Value:
        top = max(model.basis.generator(i) for i in range(model.basis.rank))
        return top * self.settings.value_cap_factor

    def run(self, field: LogVectorField, model: LocalModel) -> Verdict:
        self.timeline.phase(self.phase_name, n=len(model.names), r=model.rank)
        self.timeline.follow(model)
        try:
            return self._loop(field, model)
        except (BudgetExceeded, StepBudgetExceeded, PrecisionError) as e:
            self.logger.warning(f"{self.phase_name} exhausted: {e}")
            return Verdict(VERDICT_EXHAUSTED, model, field, details={"reason": e.message},
                           timeline=self.timeline)

    def _loop(self, field: LogVectorField, model: LocalModel) -> Verdict:
        y = model.dependents[0]
        cap = self.value_cap(model)
        for _ in range(self.max_steps):
            vy = model.value(y)
            if vy is None or cap < vy:
                return self._maximal_contact(field, model)

            model, field = monomialize_coefficients(field, model, self.settings.game_budget_factor)
            self.timeline.follow(model)
            support = np_support(field, model)
            data = contact_data(model, y)
            self.heights.append(support.hbar)
            self.timeline.invariants(self.phase_name, hbar=support.hbar, chi=support.chi,
                                     delta=support.delta, d=data.d)
            self.on_step(field, model, support)

            if self.stops_at(support):
                if not is_log_elementary_adapted(field, model.independents):
                    raise InvariantViolation("Height at most zero but not log-elementary",
                                             "log_elementary", {"field": field.to_text()})
                self.logger.info(f"Log-elementary at hbar={support.hbar}")
                return Verdict(VERDICT_LOG_ELEMENTARY, model, field,
                               details={"hbar": support.hbar}, timeline=self.timeline)

            followed = self.follow_branch(field, model, support)
            if followed is not None:
                model, field = followed
                continue

            if data.d >= 2 or support.chi < support.hbar:
                self.ramification_indices.append(data.d)
                outcome = package_invariant_law(field, model, self.use_etale(model),
                                                self.settings.package_step_factor)
                model, field = outcome.model, outcome.field
                self.timeline.follow(model)
                self.timeline.certify("atmost", "hbar", outcome.after.hbar, support.chi)
                continue

            model, field = self._stable_change(field, model, support, data)
        raise StepBudgetExceeded(y, self.max_steps)

    def _stable_change(self, field, model, support, data):
        """d = 1 and chi = hbar: y' = y - c*x^p with p >= 0."""
        y = model.dependents[0]
        if any(k < 0 for k in data.p):
            raise InvariantViolation("Stable contact exponent is negative", "contact_nonnegative",
                                     {"p": data.p})
        exponents = [0] * len(model.names)
        for name, k in zip(model.independents, data.p):
            exponents[model.names.index(name)] = k
        before = model.value(y)
        model = coord_change(model, y, exponents, data.c)
        field = transform(field, model.history[-1])
        self.timeline.follow(model)
        after_support = np_support(field, model)
        if after_support.hbar != support.hbar:
            raise InvariantViolation("Coordinate change moved the main height", "hbar_stable",
                                     {"before": support.hbar, "after": after_support.hbar})
        after = model.value(y)
        self.timeline.certify("increase", f"value({y})", before, after)
        return model, field

    def _maximal_contact(self, field, model) -> Verdict:
        image, text = maximal_contact_witness(model)
        self.logger.info(f"Maximal contact: {text}")
        return Verdict(VERDICT_MAXIMAL_CONTACT, model, field, series=text,
                       details={"certificates": self.timeline.certificates},
                       timeline=self.timeline)

    def get_summary(self) -> Dict[str, object]:
        return {"heights": list(self.heights),
                "ramification_indices": list(self.ramification_indices),
                "lines": len(self.timeline.lines)}


class Dim2Driver(Corank1Driver):
    """Two variables: etale packages, continuing through height zero."""

    phase_name = "dim2"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.simple_points: List[Tuple[Fraction, Fraction, bool]] = []
        self.branches: List[str] = []

    def stops_at(self, support: NPSupport) -> bool:
        return support.hbar == -1

    def use_etale(self, model: LocalModel) -> bool:
        return True

    def on_step(self, field, model, support):
        x, y = model.independents[0], model.dependents[0]
        lam, mu, simple = simple_singularity(field, x, y)
        self.simple_points.append((lam, mu, simple))
        self.timeline.invariants("simple", **{"lambda": lam, "mu": mu,
                                              "simple": "yes" if simple else "no"})

    def follow_branch(self, field, model, support):
        """At a simple singular point, move y along the invariant branch transversal to x = 0.

        A zero branch is a corner: y = 0 is invariant and the packages carry on.  Otherwise
        each term c*x^k of the branch becomes y' = y - c*x^k while the arc agrees with it.
        """
        x, y = model.independents[0], model.dependents[0]
        if not self.simple_points[-1][2] or not is_singular_point(field, y):
            return None
        branch = invariant_branch(field, x, y, self.settings.unit_inverse_order)
        if branch.is_zero():
            self.branches.append(BRANCH_CORNER)
            self.timeline.invariants("branch", kind=BRANCH_CORNER)
            return None
        self.branches.append(BRANCH_FOLLOWED)
        self.timeline.invariants("branch", kind=BRANCH_FOLLOWED, terms=len(branch.terms))
        xi = model.names.index(x)
        start = len(model.history)
        for exp in sorted(branch.terms, key=lambda e: e[xi]):
            c = branch.terms[exp]
            before = model.value(y)
            if before is None:
                break
            data = contact_data(model, y)
            if data.d != 1 or tuple(data.p) != (exp[xi],) or data.c != c:
                break
            model = coord_change(model, y, exp, c)
            field = transform(field, model.history[-1])
            self.timeline.follow(model)
            self.timeline.certify("increase", f"value({y})", before, model.value(y))
        steps = len(model.history) - start
        if not steps:
            self.logger.info("Arc leaves the invariant branch at once")
            return None
        self.logger.info(f"Followed the invariant branch through {steps} terms")
        return model, field


def corank1_driver(field: LogVectorField, model: LocalModel,
                   settings: Optional[EngineSettings] = None,
                   timeline: Optional[Timeline] = None) -> Verdict:
    if model.rank != len(model.names) - 1:
        raise ValidationError("Corank one driver needs rational rank n-1", "rank", model.rank)
    return Corank1Driver(settings, timeline).run(field, model)


def dim2_driver(field: LogVectorField, model: LocalModel,
                settings: Optional[EngineSettings] = None,
                timeline: Optional[Timeline] = None) -> Verdict:
    if len(model.names) != 2 or model.rank != 1:
        raise ValidationError("Dimension two driver needs one independent and one dependent",
                              "names", model.names)
    return Dim2Driver(settings, timeline).run(field, model)
