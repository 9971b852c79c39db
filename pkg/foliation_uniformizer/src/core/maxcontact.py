"""
Maximal Contact Engine
Endgame once a dependent coordinate f has (truncated) transversal maximal contact with the
valuation: its arc image vanishes or lies beyond the value cap, so f stands in for the formal
series f-hat.  The field is read in the adapted frame x_i*d/dx_i, (d/dw), f*d/df, multiplied
by f when f = 0 is not invariant, and reduced until its adapted order is at most one.

Two independents: Hironaka characteristic polygons steer point and curve blow-ups.
One independent: formal Puiseux packages in (x, w) prepare the levels f^s, then the curve
x = f = 0 is blown up while the delta invariant drops.
"""

import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

sys.path.append(str(Path(__file__).parent.parent))

from utils.exceptions import (
    BudgetExceeded, EmptySupport, InvariantViolation, PrecisionError, PrecisionExhausted,
    StepBudgetExceeded, ValidationError, ZeroField,
)
from utils.logger import LoggerMixin, get_logger
from config.constants import VERDICT_EXHAUSTED, VERDICT_MAXIMAL_CONTACT_THEN_LOG_ELEMENTARY
from config.settings import EngineSettings
from core.series import PolySeries
from core.model import (
    CHART_COMB1, CHART_COMB2, LocalModel, TransformKind, blowup, contact_data, package_records,
)
from core.foliation import (
    LogVectorField, is_elementary, is_log_elementary_adapted, transform_along,
)
from core.rankone import TwoVarLevel, levels_of, strong_form
from core.timeline import Timeline, Verdict

logger = get_logger("maxcontact")

Point = Tuple[Fraction, Fraction]

T01 = "T01"
T02 = "T02"
T1 = "T1"
T2 = "T2"

CENTER_Y1 = "Y1"
CENTER_Y2 = "Y2"

_SIGMA = {
    T01: lambda u, v: (u + v - 1, v),
    T02: lambda u, v: (u, u + v - 1),
    T1: lambda u, v: (u - 1, v),
    T2: lambda u, v: (u, v - 1),
}


# Adapted frame

@dataclass(frozen=True)
class MaxContactFrame:
    """The field seen from (x1, x2, f) or (x, w, f); coefficients follow model order."""

    names: Tuple[str, ...]
    log_names: Tuple[str, ...]
    plain_name: Optional[str]
    f: str
    field: LogVectorField
    adapted: LogVectorField
    invariant: bool
    coefficients: Tuple[PolySeries, ...]

    def coefficient(self, name: str) -> PolySeries:
        return self.coefficients[self.names.index(name)]

    @property
    def logord(self) -> int:
        orders = [c.order() for c in self.coefficients if not c.is_zero()]
        if not orders:
            raise ZeroField("Adapted coefficients vanish")
        return min(orders)

    def log_set(self) -> Tuple[str, ...]:
        return self.log_names + ((self.f,) if self.invariant else ())


def frame_of(field: LogVectorField, model: LocalModel, f: Optional[str] = None) -> MaxContactFrame:
    """Adapted frame for the contact coordinate f (the last dependent unless given).

    f = 0 is invariant when xi(f) is divisible by f; otherwise the adapted field is f*xi.
    """
    f = f or model.dependents[-1]
    if model.is_independent(f) or f not in model.names:
        raise ValidationError(f"{f} is not a dependent coordinate", "f", f)
    if len(model.names) != 3 or model.rank not in (1, 2):
        raise ValidationError("Maximal contact needs three coordinates and rank one or two",
                              "names", model.names)
    if field.frame != LogVectorField.engine_frame(model.names, model.rank):
        raise ValidationError("Field must be written in the engine frame", "frame", field.frame)

    names = model.names
    fi = names.index(f)
    h = field.coefficient(f)
    invariant = h.set_zero(f).is_zero()
    if invariant and not h.is_exact:
        logger.warning(f"xi({f}) is divisible by {f} only up to truncation order {h.precision}")

    if invariant:
        adapted = field.generator()
    else:
        fvar = PolySeries.variable(names, f)
        adapted = LogVectorField(names, field.frame, [c * fvar for c in field.coefficients],
                                 None, field.flags)
    down = tuple(-1 if i == fi else 0 for i in range(len(names)))
    coefficients = tuple(adapted.coefficient(name).shift(down) if name == f
                         else adapted.coefficient(name) for name in names)
    plain = [name for name in model.dependents if name != f]
    return MaxContactFrame(names, model.independents, plain[0] if plain else None, f, field,
                           adapted, invariant, coefficients)


def logord(frame: MaxContactFrame) -> int:
    return frame.logord


# Characteristic polygons

def _cross(o: Point, a: Point, b: Point) -> Fraction:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def positive_hull(points) -> Tuple[Point, ...]:
    """Vertices of conv(points) + R^2_{>=0}, sorted by the first coordinate."""
    minimal: List[Point] = []
    for p in sorted(set(points)):
        if not minimal or p[1] < minimal[-1][1]:
            minimal.append(p)
    hull: List[Point] = []
    for p in minimal:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) <= 0:
            hull.pop()
        hull.append(p)
    return tuple(hull)


@dataclass(frozen=True)
class CharPolygon:
    eta: int
    vertices: Tuple[Point, ...]

    @property
    def is_single_vertex(self) -> bool:
        return len(self.vertices) == 1

    def meets_below_diagonal(self) -> bool:
        return any(u + v < 1 for u, v in self.vertices)

    def within_u(self) -> bool:
        return all(u >= 1 for u, _ in self.vertices)

    def within_v(self) -> bool:
        return all(v >= 1 for _, v in self.vertices)

    def to_text(self) -> str:
        return ";".join(f"({u},{v})" for u, v in self.vertices)


def polygon_of(coefficients: Sequence[PolySeries], positions: Tuple[int, int, int],
               eta: int) -> CharPolygon:
    """Points (i/(eta-s), j/(eta-s)) of the terms x1^i x2^j f^s with s < eta."""
    if eta < 1:
        raise ValidationError("Characteristic polygons need eta >= 1", "eta", eta)
    i1, i2, fi = positions
    points = []
    for coeff in coefficients:
        for exp in coeff.terms:
            s = exp[fi]
            if s < eta:
                points.append((Fraction(exp[i1], eta - s), Fraction(exp[i2], eta - s)))
    if not points:
        raise EmptySupport(f"No term below f^{eta}")
    return CharPolygon(eta, positive_hull(points))


def char_polygon(frame: MaxContactFrame, eta: Optional[int] = None) -> CharPolygon:
    if len(frame.log_names) != 2:
        raise ValidationError("Characteristic polygons need two independents", "rank",
                              len(frame.log_names))
    eta = frame.logord if eta is None else eta
    positions = tuple(frame.names.index(name) for name in frame.log_names + (frame.f,))
    return polygon_of(frame.coefficients, positions, eta)


def sigma_transform(polygon: CharPolygon, case: str) -> CharPolygon:
    if case not in _SIGMA:
        raise ValidationError(f"Unknown blow-up case {case}", "case", case)
    mapped = [_SIGMA[case](u, v) for u, v in polygon.vertices]
    return CharPolygon(polygon.eta, positive_hull(mapped))


def permissible(frame: MaxContactFrame, center: str) -> bool:
    """Y1 = {x1 = f = 0} (or Y2) keeps the adapted order along it.

    f is a coordinate, so the restriction condition holds and only the polygon test remains.
    """
    zeta = frame.logord
    if zeta < 1:
        return False
    polygon = char_polygon(frame, zeta)
    if center == CENTER_Y1:
        return polygon.within_u()
    if center == CENTER_Y2:
        return polygon.within_v()
    raise ValidationError(f"Unknown center {center}", "center", center)


def transported_coefficients(frame: MaxContactFrame, records, case: str,
                             zeta: int) -> List[PolySeries]:
    """Adapted coefficients after a blow-up, divided by pivot^zeta (log frame bookkeeping)."""
    x1, x2 = frame.log_names
    names = frame.names
    subs = [record.substitution(names) for record in records]

    def push(series: PolySeries) -> PolySeries:
        for sub in subs:
            series = sub.apply(series)
        return series

    a1, a2, b = (push(frame.coefficient(name)) for name in (x1, x2, frame.f))
    if case in (T01, T1):
        pivot = x1
        b = b - a1
        if case == T01:
            a2 = a2 - a1
    else:
        pivot = x2
        b = b - a2
        if case == T02:
            a1 = a1 - a2
    down = tuple(-zeta if name == pivot else 0 for name in names)
    return [c.shift(down) for c in (a1, a2, b)]


# Levels and delta for a single independent

def adapted_levels(frame: MaxContactFrame, model: LocalModel) -> Dict[int, TwoVarLevel]:
    """eta_s of the adapted field: f^s * (a x*d/dx + b d/dw + c f*d/df)."""
    return {s: level for s, level in levels_of(frame.adapted, model, frame.f).items()
            if not level.is_zero()}


def adapted_delta(frame: MaxContactFrame, model: LocalModel) -> Optional[Fraction]:
    """min over nonzero levels s < varrho of m_s / (varrho - s); None when varrho <= 1."""
    varrho = frame.logord
    if varrho <= 1:
        return None
    xi = model.names.index(model.independents[0])
    ratios = [Fraction(level.x_order(xi), varrho - s)
              for s, level in adapted_levels(frame, model).items() if s < varrho]
    return min(ratios) if ratios else None


def unprepared_levels(frame: MaxContactFrame, model: LocalModel) -> List[int]:
    varrho = frame.logord
    return sorted(s for s, level in adapted_levels(frame, model).items()
                  if s <= varrho and strong_form(level, model) is None)


# Driver

class MaxContactDriver(LoggerMixin):
    """Reduce the adapted order to at most one along a maximal contact coordinate."""

    phase_name = "maxcontact"

    def __init__(self, settings: Optional[EngineSettings] = None,
                 timeline: Optional[Timeline] = None, series: Optional[str] = None):
        self.settings = settings or EngineSettings()
        self.timeline = timeline or Timeline(self.settings.include_snapshots)
        self.series = series
        self.budget = self.settings.maxcontact_steps
        self.spent = 0
        self.blowups = 0
        self.packages = 0
        self.history: List[str] = []
        self._field: Optional[LogVectorField] = None
        self._model: Optional[LocalModel] = None

    def _advance(self, field: LogVectorField, model: LocalModel) -> Tuple[LogVectorField, LocalModel]:
        self._field, self._model = field, model
        self.timeline.follow(model)
        return field, model

    def _spend(self, entry: str):
        self.spent += 1
        self.history.append(entry)
        if self.spent > self.budget:
            raise BudgetExceeded(self.phase_name, self.budget, self.history)

    def _guard(self, model: LocalModel, f: str, pivot: str):
        """Dividing f by the pivot must leave it with positive value along the arc."""
        vf = model.value(f)
        if vf is not None and not model.value(pivot) < vf:
            raise PrecisionExhausted(f"Truncated contact coordinate {f} no longer exceeds "
                                     f"nu({pivot})", self.phase_name)

    def _monotone(self, before: int, after: MaxContactFrame) -> int:
        zeta = after.logord
        if zeta > before:
            raise InvariantViolation("Adapted order increased under a blow-up", "logord",
                                     {"before": before, "after": zeta})
        self.timeline.certify("atmost", "logord", zeta, before)
        return zeta

    # Blow-ups

    def curve_blowup(self, field: LogVectorField, model: LocalModel, f: str,
                     pivot: str) -> Tuple[LogVectorField, LocalModel]:
        """f = pivot * f'."""
        self._guard(model, f, pivot)
        start = model
        model = blowup(model, pivot, f, CHART_COMB1)
        self.blowups += 1
        return self._advance(transform_along(field, package_records(start, model)), model)

    def point_blowup(self, field: LogVectorField, model: LocalModel,
                     f: str) -> Tuple[LogVectorField, LocalModel, str]:
        """Blow up the closed point: the (x1, x2) chart by values, then f over the pivot."""
        x1, x2 = model.independents
        start = model
        model = blowup(model, x1, x2)
        case = T01 if model.history[-1].chart == CHART_COMB1 else T02
        pivot = x1 if case == T01 else x2
        self._guard(model, f, pivot)
        model = blowup(model, pivot, f, CHART_COMB1)
        self.blowups += 1
        field = transform_along(field, package_records(start, model))
        field, model = self._advance(field, model)
        return field, model, case

    def formal_package(self, field: LogVectorField, model: LocalModel,
                       f: str) -> Tuple[LogVectorField, LocalModel]:
        """(x, w)-blow-ups up to the translated one, each followed by f over its pivot."""
        x = model.independents[0]
        w = next(name for name in model.dependents if name != f)
        data = contact_data(model, w)
        budget = self.settings.package_step_factor * (data.d + sum(abs(k) for k in data.p))
        start = model
        for _ in range(budget):
            model = blowup(model, x, w)
            record = model.history[-1]
            pivot = w if record.chart == CHART_COMB2 else x
            self._guard(model, f, pivot)
            model = blowup(model, pivot, f, CHART_COMB1)
            if record.kind is TransformKind.TRANSLATION_BLOWUP:
                break
        else:
            raise StepBudgetExceeded(w, budget)
        self.packages += 1
        field = transform_along(field, package_records(start, model))
        return self._advance(field, model)

    # Two independents

    def _blow_polygon(self, field: LogVectorField, model: LocalModel, frame: MaxContactFrame,
                      center: Optional[str]) -> Tuple[LogVectorField, LocalModel]:
        zeta = frame.logord
        eta = max(zeta, 1)
        before = char_polygon(frame, eta)
        start = model
        if center is None:
            field, model, case = self.point_blowup(field, model, frame.f)
        else:
            case = T1 if center == CENTER_Y1 else T2
            pivot = frame.log_names[0] if case == T1 else frame.log_names[1]
            field, model = self.curve_blowup(field, model, frame.f, pivot)
        records = package_records(start, model)
        positions = tuple(model.names.index(name) for name in frame.log_names + (frame.f,))
        recomputed = polygon_of(transported_coefficients(frame, records, case, zeta),
                                positions, eta)
        expected = sigma_transform(before, case)
        if recomputed.vertices != expected.vertices:
            raise InvariantViolation("Characteristic polygon did not follow its blow-up map",
                                     "polygon_transport",
                                     {"case": case, "expected": expected.to_text(),
                                      "found": recomputed.to_text()})
        self.logger.debug(f"{case}: {before.to_text()} -> {recomputed.to_text()}")
        return field, model

    def _run_two(self, field: LogVectorField, model: LocalModel, f: str) -> Verdict:
        while True:
            frame = frame_of(field, model, f)
            zeta = frame.logord
            polygon = char_polygon(frame, max(zeta, 1))
            self.timeline.invariants(self.phase_name, f=f, zeta=zeta, polygon=polygon.to_text())
            if zeta == 0:
                return self._done(frame, model, zeta)
            center = None
            if zeta == 1 and not frame.invariant:
                vertex = polygon.vertices[0]
                if polygon.is_single_vertex and vertex[0] + vertex[1] >= 2:
                    if not is_elementary(field):
                        raise InvariantViolation("Single high vertex at order one but nilpotent",
                                                 "maxcontact_elementary",
                                                 {"field": field.to_text()})
                    return self._done(frame, model, zeta, endgame="elementary")
            elif polygon.is_single_vertex:
                if permissible(frame, CENTER_Y1):
                    center = CENTER_Y1
                elif permissible(frame, CENTER_Y2):
                    center = CENTER_Y2
            self._spend(f"zeta={zeta} polygon={polygon.to_text()} center={center or 'Y0'}")
            field, model = self._blow_polygon(field, model, frame, center)
            self._monotone(zeta, frame_of(field, model, f))

    # One independent

    def formally_prepare(self, field: LogVectorField, model: LocalModel,
                         f: str) -> Tuple[LogVectorField, LocalModel, MaxContactFrame]:
        """Formal packages until every nonzero level s <= varrho is strongly prepared."""
        while True:
            frame = frame_of(field, model, f)
            varrho = frame.logord
            if varrho <= 1:
                return field, model, frame
            pending = unprepared_levels(frame, model)
            if not pending:
                return field, model, frame
            self._spend(f"package varrho={varrho} levels={pending}")
            field, model = self.formal_package(field, model, f)
            self._monotone(varrho, frame_of(field, model, f))

    def _run_one(self, field: LogVectorField, model: LocalModel, f: str) -> Verdict:
        x = model.independents[0]
        while True:
            field, model, frame = self.formally_prepare(field, model, f)
            varrho = frame.logord
            delta = adapted_delta(frame, model)
            self.timeline.invariants(self.phase_name, f=f, varrho=varrho, delta=delta)
            if varrho <= 1:
                return self._done(frame, model, varrho)
            if delta is None or delta < 1:
                raise InvariantViolation("delta below one at adapted order two or more",
                                         "delta_bound", {"delta": delta, "varrho": varrho})
            self._spend(f"curve varrho={varrho} delta={delta}")
            field, model = self.curve_blowup(field, model, f, x)
            after = frame_of(field, model, f)
            if self._monotone(varrho, after) == varrho:
                moved = adapted_delta(after, model)
                if moved is None or moved != delta - 1:
                    raise InvariantViolation("delta did not drop by one along the curve",
                                             "delta_drop", {"before": delta, "after": moved})
                self.timeline.certify("decrease", "delta", delta, moved)

    # Entry

    def _done(self, frame: MaxContactFrame, model: LocalModel, order: int,
              endgame: str = "logord") -> Verdict:
        if endgame == "logord" and not is_log_elementary_adapted(frame.field, frame.log_set()):
            raise InvariantViolation("Adapted order at most one but not log-elementary",
                                     "log_elementary", {"field": frame.field.to_text()})
        self.logger.info(f"Log-elementary along {frame.f} after {self.blowups} blow-ups")
        return Verdict(VERDICT_MAXIMAL_CONTACT_THEN_LOG_ELEMENTARY, model, frame.field,
                       series=self.series,
                       details={"variable": frame.f, "logord": order, "endgame": endgame,
                                "invariant": "yes" if frame.invariant else "no"},
                       timeline=self.timeline)

    def run(self, field: LogVectorField, model: LocalModel, f: str) -> Verdict:
        self.timeline.phase(self.phase_name, f=f, r=model.rank)
        self._advance(field, model)
        try:
            if model.rank == 2:
                return self._run_two(field, model, f)
            return self._run_one(field, model, f)
        except (BudgetExceeded, StepBudgetExceeded, PrecisionError) as e:
            self.logger.warning(f"{self.phase_name} exhausted: {e}")
            return Verdict(VERDICT_EXHAUSTED, self._model, self._field, series=self.series,
                           details={"reason": e.message, "variable": f},
                           timeline=self.timeline)

    def get_summary(self) -> Dict[str, object]:
        return {"blowups": self.blowups, "packages": self.packages,
                "steps": list(self.history), "lines": len(self.timeline.lines)}


def maxcontact_driver(field: LogVectorField, model: LocalModel, f: Optional[str] = None,
                      settings: Optional[EngineSettings] = None,
                      timeline: Optional[Timeline] = None,
                      series: Optional[str] = None) -> Verdict:
    f = f or model.dependents[-1]
    frame_of(field, model, f)
    return MaxContactDriver(settings, timeline, series).run(field, model, f)
