"""
Local Models
Parameterized regular local models and their atomic transformations: coordinate changes in the
dependent variables, coordinate blow-ups with codimension two centers, ramifications, and the
Puiseux packages assembled from them.

Coordinate slot names are stable: after y' = y/x - c the new coordinate is still called "y".
Every transformation is a TransformRecord, so a model is its initial arc plus a history.
"""

import re
import sys
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from sympy import Matrix, eye

sys.path.append(str(Path(__file__).parent.parent))

from utils.exceptions import (
    EqualValuesOnIndependents, InvariantViolation, ModelError, NoDependentVariables,
    ParseError, StepBudgetExceeded, ValidationError, ValueConstraintViolated,
)
from utils.logger import get_logger
from config.constants import DEFAULT_PACKAGE_STEP_FACTOR
from core.values import Value, format_vector, solve_contact
from core.series import PolySeries, Substitution
from core.valuation import ArcValuation

logger = get_logger("model")


class TransformKind(Enum):
    COORD_CHANGE_A = "coord_change_a"
    COORD_CHANGE_B = "coord_change_b"
    BLOWUP = "blowup"
    TRANSLATION_BLOWUP = "translation_blowup"
    RAMIFY = "ramify"


CHART_COMB1 = "comb1"   # z_j = z_i * z_j'
CHART_COMB2 = "comb2"   # z_i = z_i' * z_j
CHART_TRANSLATION = "translation"


def _unit_matrix(n: int) -> List[List[int]]:
    return [[int(a == b) for b in range(n)] for a in range(n)]


@dataclass(frozen=True)
class TransformRecord:
    """One atomic transformation, old coordinates written in the new ones."""

    kind: TransformKind
    target: str
    pivot: Optional[str] = None
    chart: Optional[str] = None
    c: Fraction = Fraction(0)
    exponents: Tuple[int, ...] = ()
    degree: int = 1
    before: str = ""
    after: str = ""

    def matrix(self, names: Sequence[str]) -> Optional[List[List[int]]]:
        """Exponent matrix of the chart; translation blow-ups count as their comb1 shadow."""
        names = list(names)
        n = len(names)
        j = names.index(self.target)
        if self.kind is TransformKind.BLOWUP:
            i = names.index(self.pivot)
            m = _unit_matrix(n)
            if self.chart == CHART_COMB1:
                m[j][i] += 1
            else:
                m[i][j] += 1
            return m
        if self.kind is TransformKind.TRANSLATION_BLOWUP:
            i = names.index(self.pivot)
            m = _unit_matrix(n)
            m[j][i] += 1
            return m
        return None

    def substitution(self, names: Sequence[str]) -> Substitution:
        names = tuple(names)
        if self.kind is TransformKind.BLOWUP:
            return Substitution.monomial(names, self.matrix(names))
        if self.kind is TransformKind.TRANSLATION_BLOWUP:
            m = [0] * len(names)
            m[names.index(self.pivot)] = 1
            return Substitution.translation(names, self.target, m, self.c, "mul")
        if self.kind is TransformKind.COORD_CHANGE_A:
            return Substitution.translation(names, self.target, self.exponents, self.c, "add")
        if self.kind is TransformKind.COORD_CHANGE_B:
            m = [0] * len(names)
            m[names.index(self.pivot)] = 1
            return Substitution.translation(names, self.target, m, -1, "add")
        if self.kind is TransformKind.RAMIFY:
            return Substitution.ramification(names, self.target, self.degree)
        raise ValidationError(f"Unknown transform kind {self.kind}", "kind", self.kind)

    def to_line(self) -> str:
        parts = [self.kind.value]
        if self.pivot is not None:
            parts.append(f"i={self.pivot}")
        parts.append(f"j={self.target}")
        if self.chart:
            parts.append(f"chart={self.chart}")
        if self.kind in (TransformKind.TRANSLATION_BLOWUP, TransformKind.COORD_CHANGE_A):
            parts.append(f"c={self.c}")
        if self.exponents:
            parts.append("a=" + ",".join(str(k) for k in self.exponents))
        if self.kind is TransformKind.RAMIFY:
            parts.append(f"d={self.degree}")
        line = " ".join(parts)
        if self.before or self.after:
            line += f" | inv: {self.before} -> {self.after}"
        return line

    @classmethod
    def from_line(cls, line: str) -> "TransformRecord":
        body, _, snapshot = line.partition(" | inv: ")
        tokens = body.split()
        if not tokens:
            raise ParseError(line, "empty transform line")
        try:
            kind = TransformKind(tokens[0])
        except ValueError:
            raise ParseError(line, f"unknown transform kind {tokens[0]}")
        fields = {}
        for token in tokens[1:]:
            key, sep, value = token.partition("=")
            if not sep:
                raise ParseError(line, f"malformed token {token}")
            fields[key] = value
        before, after = "", ""
        if snapshot:
            before, _, after = snapshot.partition(" -> ")
        if "j" not in fields:
            raise ParseError(line, "missing target j=")
        return cls(
            kind=kind,
            target=fields["j"],
            pivot=fields.get("i"),
            chart=fields.get("chart"),
            c=Fraction(fields.get("c", "0")),
            exponents=tuple(int(k) for k in fields["a"].split(",")) if "a" in fields else (),
            degree=int(fields.get("d", "1")),
            before=before,
            after=after,
        )


@dataclass(frozen=True)
class ContactData:
    """Contact rational function Phi = y_j^d / x^p and its residue c."""

    j: str
    d: int
    p: Tuple[int, ...]
    c: Fraction
    phi: Tuple[int, ...]

    @property
    def is_translation_ready(self) -> bool:
        return self.d == 1 and sorted(self.p) == [0] * (len(self.p) - 1) + [1]


@dataclass(frozen=True)
class LocalModel:
    """Coordinates (x_1..x_r, y_{r+1}..y_n) with a realized valuation and its history."""

    names: Tuple[str, ...]
    rank: int
    arc: ArcValuation
    history: Tuple[TransformRecord, ...] = field(default=())

    @property
    def independents(self) -> Tuple[str, ...]:
        return self.names[:self.rank]

    @property
    def dependents(self) -> Tuple[str, ...]:
        return self.names[self.rank:]

    @property
    def basis(self):
        return self.arc.basis

    def is_independent(self, name: str) -> bool:
        return name in self.independents

    def value(self, name: str) -> Optional[Value]:
        return self.arc.coordinate_value(name)

    def independent_values(self) -> List[Value]:
        return [self.value(name) for name in self.independents]

    def variable(self, name: str) -> PolySeries:
        return PolySeries.variable(self.names, name)

    def monomial(self, exponents: Sequence[int], coeff=1) -> PolySeries:
        return PolySeries.monomial(self.names, exponents, coeff)

    def snapshot(self) -> str:
        parts = []
        for name in self.names:
            v = self.value(name)
            parts.append(f"{name}={format_vector(v) if v is not None else 'inf'}")
        return ";".join(parts)

    def check(self):
        """Coordinates have positive value and independents keep full rank."""
        for name in self.names:
            v = self.value(name)
            if v is None:
                if self.is_independent(name):
                    raise InvariantViolation(f"Independent variable {name} vanishes on the arc",
                                             "value_positivity", {"model": self.snapshot()})
                continue
            if v.sign() <= 0:
                raise InvariantViolation(f"Coordinate {name} has non-positive value {v}",
                                         "value_positivity", {"model": self.snapshot()})
        values = self.independent_values()
        rows = [[c for c in v.coeffs] for v in values]
        if Matrix(rows).rank() != self.rank:
            raise InvariantViolation("Independent values are not linearly independent",
                                     "independent_rank", {"model": self.snapshot()})

    def apply(self, record: TransformRecord) -> "LocalModel":
        """Apply one record, recentering the arc and appending the record with snapshots."""
        if record.kind is TransformKind.RAMIFY and not self.is_independent(record.target):
            raise ModelError(f"Ramification of dependent variable {record.target}")
        before = self.snapshot()
        arc = self.arc.pushforward(record.substitution(self.names))
        rank = self.rank
        model = LocalModel(self.names, rank, arc, self.history)
        model.check()
        stamped = replace(record, before=before, after=model.snapshot())
        logger.debug(f"Applied {stamped.to_line()}")
        return LocalModel(self.names, rank, arc, self.history + (stamped,))


def initial_model(names: Sequence[str], rank: int, arc: ArcValuation) -> LocalModel:
    model = LocalModel(tuple(names), rank, arc, ())
    model.check()
    return model


def _index(model: LocalModel, name: str) -> int:
    if name not in model.names:
        raise ValidationError(f"Unknown coordinate {name}", "coordinate", name)
    return model.names.index(name)


def coord_change(model: LocalModel, j: str, exponents: Optional[Sequence[int]] = None,
                 c=0, s: Optional[str] = None, floor: Optional[Value] = None) -> LocalModel:
    """y_j' = y_j - c*m (m a monomial in the other coordinates) or y_j' = y_j + y_s.

    Monomials must have value at least nu(y_j), or at least `floor` when one is given;
    the new coordinate keeps a value no smaller than the same bound.
    """
    if not model.dependents:
        raise NoDependentVariables()
    if model.is_independent(j):
        raise ValidationError(f"{j} is not a dependent variable", "coordinate", j)
    before = model.value(j)
    if s is not None:
        if s == j or model.is_independent(s):
            raise ValidationError("Adding a coordinate needs another dependent variable", "coordinate", s)
        record = TransformRecord(TransformKind.COORD_CHANGE_B, target=j, pivot=s)
        return model.apply(record)

    c = Fraction(c)
    if c == 0:
        return model
    exponents = tuple(int(k) for k in exponents)
    if len(exponents) != len(model.names) or exponents[_index(model, j)] != 0:
        raise ValidationError("Exponents must cover all coordinates and skip the target",
                              "exponents", exponents)
    if any(k < 0 for k in exponents):
        raise ValidationError("Coordinate change monomials have non-negative exponents",
                              "exponents", exponents)
    bound = before if floor is None else floor
    term_value = model.arc.value_of(model.monomial(exponents))
    if bound is None or term_value < bound:
        raise ValueConstraintViolated(j, bound.to_text() if bound else "inf", term_value.to_text())
    record = TransformRecord(TransformKind.COORD_CHANGE_A, target=j, c=c, exponents=exponents)
    result = model.apply(record)
    after = result.value(j)
    if bound is not None and after is not None and after < bound:
        raise ValueConstraintViolated(j, bound.to_text(), after.to_text())
    return result


def translation_residue(model: LocalModel, i: str, j: str) -> Fraction:
    exp = [0] * len(model.names)
    exp[_index(model, j)] = 1
    exp[_index(model, i)] -= 1
    return model.arc.residue_constant(model.monomial(exp))


def blowup(model: LocalModel, i: str, j: str, chart: Optional[str] = None) -> LocalModel:
    """(i, j)-blow-up; the chart follows the value comparison unless forced."""
    if i == j:
        raise ValidationError("A blow-up needs two distinct coordinates", "pivot", i)
    _index(model, i)
    _index(model, j)
    if chart is None:
        if not model.is_independent(i):
            raise ValidationError(f"Pivot {i} must be independent", "pivot", i)
        vi, vj = model.value(i), model.value(j)
        if vj is None or vi < vj:
            chart = CHART_COMB1
        elif vj < vi:
            chart = CHART_COMB2
        else:
            if model.is_independent(j):
                raise EqualValuesOnIndependents(i, j)
            chart = CHART_TRANSLATION
    if chart == CHART_TRANSLATION:
        c = translation_residue(model, i, j)
        record = TransformRecord(TransformKind.TRANSLATION_BLOWUP, target=j, pivot=i, c=c)
    elif chart in (CHART_COMB1, CHART_COMB2):
        record = TransformRecord(TransformKind.BLOWUP, target=j, pivot=i, chart=chart)
    else:
        raise ValidationError(f"Unknown chart {chart}", "chart", chart)
    return model.apply(record)


def ramify_model(model: LocalModel, x: str, d: int) -> LocalModel:
    if d == 1:
        return model
    return model.apply(TransformRecord(TransformKind.RAMIFY, target=x, degree=d))


def contact_data(model: LocalModel, j: str) -> ContactData:
    if model.is_independent(j):
        raise ValidationError(f"{j} is not a dependent variable", "coordinate", j)
    vy = model.value(j)
    if vy is None:
        raise ModelError(f"{j} vanishes along the arc; no contact function")
    d, p = solve_contact(vy, model.independent_values())
    phi = [0] * len(model.names)
    phi[_index(model, j)] = d
    for name, k in zip(model.independents, p):
        phi[_index(model, name)] -= k
    c = model.arc.residue_constant(model.monomial(phi))
    if c == 0:
        raise InvariantViolation("Contact function has zero residue", "contact_residue",
                                 {"variable": j})
    return ContactData(j, d, tuple(p), c, tuple(phi))


def package_records(before: LocalModel, after: LocalModel) -> Tuple[TransformRecord, ...]:
    return after.history[len(before.history):]


def package_matrix(names: Sequence[str], records: Sequence[TransformRecord]) -> Matrix:
    """Product of the chart matrices: old coordinates as monomials in the new ones."""
    product = eye(len(names))
    for record in records:
        m = record.matrix(names)
        if m is not None:
            product = product * Matrix(m)
    return product


def puiseux_package(model: LocalModel, j: str,
                    step_factor: int = DEFAULT_PACKAGE_STEP_FACTOR) -> Tuple[LocalModel, Matrix]:
    """j-Puiseux package: combinatorial j-admissible blow-ups then one translation."""
    start = contact_data(model, j)
    budget = step_factor * (start.d + sum(abs(k) for k in start.p))
    current = model
    for _ in range(budget):
        data = contact_data(current, j)
        p = data.p
        if data.is_translation_ready:
            i = current.independents[p.index(1)]
            current = blowup(current, i, j)
            last = current.history[-1]
            if last.kind is not TransformKind.TRANSLATION_BLOWUP:
                raise InvariantViolation("Package did not end with a translation",
                                         "package_shape", {"record": last.to_line()})
            break
        pair = None
        for a in range(len(p)):
            for b in range(a + 1, len(p)):
                if p[a] * p[b] < 0:
                    pair = (a, b)
                    break
            if pair:
                break
        if pair:
            current = blowup(current, current.independents[pair[0]], current.independents[pair[1]])
        else:
            a = min(k for k in range(len(p)) if p[k] > 0)
            current = blowup(current, current.independents[a], j)
    else:
        raise StepBudgetExceeded(j, budget)

    records = package_records(model, current)
    b = package_matrix(model.names, records)
    if abs(b.det()) != 1:
        raise InvariantViolation("Package matrix is not unimodular", "package_unimodular",
                                 {"matrix": str(b.tolist())})
    if any(entry < 0 for entry in b):
        raise InvariantViolation("Package matrix has a negative entry", "package_nonnegative",
                                 {"matrix": str(b.tolist())})
    logger.debug(f"Puiseux package on {j}: d={start.d} p={start.p} c={start.c}, "
                 f"{len(records)} blow-ups")
    return current, b


def etale_puiseux_package(model: LocalModel, j: str,
                          step_factor: int = DEFAULT_PACKAGE_STEP_FACTOR) -> LocalModel:
    """Ramify x = t^d so the ramification index becomes one, then run the package."""
    if model.rank != 1:
        raise ValidationError("Etale packages need a single independent variable", "rank",
                              model.rank)
    data = contact_data(model, j)
    x = model.independents[0]
    ramified = ramify_model(model, x, data.d)
    lifted = contact_data(ramified, j)
    if lifted.d != 1:
        raise InvariantViolation("Ramification index did not drop to one", "etale_index",
                                 {"d": lifted.d})
    if lifted.c ** data.d != data.c:
        raise InvariantViolation("Lifted residue is not a root of the residue", "etale_residue",
                                 {"c": str(data.c), "lifted": str(lifted.c)})
    result, _ = puiseux_package(ramified, j, step_factor)
    return result


def replay(start: LocalModel, records: Sequence[TransformRecord]) -> LocalModel:
    """Re-execute records from a model, ignoring their stored snapshots."""
    current = start
    for record in records:
        current = current.apply(replace(record, before="", after=""))
    return current


def compose_substitutions(names: Sequence[str], records: Sequence[TransformRecord]) -> List[Substitution]:
    return [record.substitution(names) for record in records]


_SNAPSHOT = re.compile(r"(\w+)=(\([^)]*\)|inf)")


def parse_snapshot(text: str) -> dict:
    return {name: value for name, value in _SNAPSHOT.findall(text)}
