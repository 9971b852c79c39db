"""
Uniformization Driver
Reads problem files, dispatches a problem to the engine matching its rank, hands maximal
contact over to the endgame, and replays finished traces for the check command.
"""

import json
import random
import re
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

sys.path.append(str(Path(__file__).parent.parent))

from utils.exceptions import (
    ApplicationError, BudgetExceeded, InvariantViolation, ParseError, PrecisionError,
    ProblemFileError, StepBudgetExceeded, ValidationError,
)
from utils.logger import LoggerMixin, get_logger
from config.constants import (
    DEFAULT_ORDER, FRAME_LOG, FRAME_PLAIN, FUZZ_MODES, MAX_DIMENSION, RUN_MODES, TRACE_KEYWORDS,
    VERDICT_ELEMENTARY, VERDICT_EXHAUSTED, VERDICT_LOG_ELEMENTARY, VERDICT_MAXIMAL_CONTACT,
    VERDICT_NOT_IMPLEMENTED,
)
from config.settings import EngineSettings
from core.values import Value, WeightBasis, interval_sign, parse_value, val_sign
from core.series import PolySeries, ps_parse
from core.valuation import ArcValuation, parse_arc, parse_arc_precision
from core.model import LocalModel, TransformRecord, contact_data, initial_model
from core.foliation import (
    LogVectorField, field_from_coefficients, is_elementary, is_nonsingular, reframe, transform,
)
from core.polyhedra import from_support
from core.npp import (
    Corank1Driver, Dim2Driver, coefficient_support, maximal_contact_witness, np_support,
    play_monomialization, simple_singularity,
)
from core.rankone import rank_one_support, rankone_driver
from core.maxcontact import adapted_delta, char_polygon, frame_of, maxcontact_driver
from core.timeline import Timeline, Verdict, format_token

logger = get_logger("driver")

CENTER_POINT = "point"
CENTER_CURVE = "curve"

_IDENTIFIER = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")
_ARC = re.compile(r'^arc\s+(\w+)\s*=\s*"([^"]*)"(?:\s+precision\s+"([^"]*)")?$')
_FIELD = re.compile(r'^field\s*\{(.*)\}\s*(?:frame\s*=\s*"([^"]*)")?$', re.DOTALL)
_ENTRY = re.compile(r'(\w+)\s*=\s*"([^"]*)"')
_SETTING = re.compile(r"^(\w+)\s*=\s*(.+)$")
_LOG_FRAME = re.compile(r"^log\(([^)]*)\)$")


# Problems

@dataclass
class Problem:
    """A model (names, weights, arcs) plus a vector field and the run options."""

    names: Tuple[str, ...]
    weights: Tuple[str, ...]
    coefficients: Dict[str, str]
    arcs: Dict[str, str] = field(default_factory=dict)
    arc_precision: Dict[str, str] = field(default_factory=dict)
    lex: Optional[Tuple[Tuple[int, ...], ...]] = None
    log_frame: Tuple[str, ...] = ()
    mode: str = "auto"
    center: str = CENTER_POINT
    max_steps: Optional[int] = None
    precision: Optional[int] = None
    path: Optional[str] = None

    @property
    def rank(self) -> int:
        return len(self.weights)

    @property
    def dimension(self) -> int:
        return len(self.names)

    @property
    def independents(self) -> Tuple[str, ...]:
        return self.names[:self.rank]

    @property
    def dependents(self) -> Tuple[str, ...]:
        return self.names[self.rank:]

    def basis(self) -> WeightBasis:
        return WeightBasis.parse(self.weights, self.lex)

    def initial_model(self, order: int = DEFAULT_ORDER) -> LocalModel:
        """Arcs without a precision line are truncated at order times the largest weight."""
        basis = self.basis()
        arcs = {name: parse_arc(text, basis, self.independents)
                for name, text in self.arcs.items()}
        bounds = [parse_arc_precision(text, basis, self.independents)
                  for text in self.arc_precision.values()]
        precision = min(bounds) if bounds else None
        if precision is None and self.dependents:
            top = max(basis.generator(i) for i in range(basis.rank))
            precision = top * order
        arc = ArcValuation.initial(basis, self.names, self.rank, arcs, precision)
        return initial_model(self.names, self.rank, arc)

    def user_frame(self) -> Tuple[str, ...]:
        return tuple(FRAME_LOG if name in self.log_frame else FRAME_PLAIN for name in self.names)

    def initial_field(self) -> LogVectorField:
        """The field read in its own frame, then rewritten in the engine frame."""
        series = {name: ps_parse(self.coefficients.get(name, "0"), self.names)
                  for name in self.names}
        user = field_from_coefficients(self.names, self.user_frame(), series, normalize=False)
        return reframe(user, LogVectorField.engine_frame(self.names, self.rank))

    def to_text(self) -> str:
        lines = [f"names = {', '.join(self.names)}",
                 f"weights = {json.dumps(list(self.weights))}"]
        if self.lex:
            lines.append(f"lex = {json.dumps([list(level) for level in self.lex])}")
        for name in self.dependents:
            line = f'arc {name} = "{self.arcs[name]}"'
            if name in self.arc_precision:
                line += f' precision "{self.arc_precision[name]}"'
            lines.append(line)
        entries = ", ".join(f'd{name} = "{self.coefficients[name]}"'
                            for name in self.names if name in self.coefficients)
        frame = f"log({', '.join(self.log_frame)})" if self.log_frame else ""
        lines.append(f'field {{ {entries} }} frame = "{frame}"')
        lines.append(f"mode = {self.mode}")
        if self.center != CENTER_POINT:
            lines.append(f"center = {self.center}")
        if self.max_steps is not None:
            lines.append(f"max_steps = {self.max_steps}")
        if self.precision is not None:
            lines.append(f"precision = {self.precision}")
        return "\n".join(lines) + "\n"


def _logical_lines(text: str) -> List[Tuple[int, str]]:
    """Strip comments and join a field block spread over several lines."""
    out: List[Tuple[int, str]] = []
    pending: Optional[Tuple[int, str]] = None
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if pending is not None:
            start, body = pending
            body = f"{body} {line}"
            if "}" in line:
                out.append((start, body))
                pending = None
            else:
                pending = (start, body)
            continue
        if line.startswith("field") and "{" in line and "}" not in line:
            pending = (number, line)
            continue
        out.append((number, line))
    if pending is not None:
        raise ProblemFileError("Unterminated field block", None, pending[0])
    return out


def _parse_frame(text: str, names: Sequence[str], path, number) -> Tuple[str, ...]:
    text = text.strip()
    if text in ("", "plain"):
        return ()
    match = _LOG_FRAME.match(text)
    if not match:
        raise ProblemFileError(f"Frame must read log(...), got '{text}'", path, number)
    log_names = tuple(part.strip() for part in match.group(1).split(",") if part.strip())
    unknown = [name for name in log_names if name not in names]
    if unknown:
        raise ProblemFileError(f"Frame names unknown coordinates {unknown}", path, number)
    return log_names


def parse_problem(text: str, path: Optional[str] = None) -> Problem:
    """Parse the line-oriented problem grammar; every error carries its line number."""
    values: Dict[str, object] = {}
    where: Dict[str, int] = {}
    arcs: Dict[str, str] = {}
    arc_precision: Dict[str, str] = {}
    coefficients: Dict[str, str] = {}
    frame_text = ""

    for number, line in _logical_lines(text):
        if line.startswith("arc"):
            match = _ARC.match(line)
            if not match:
                raise ProblemFileError(f"Malformed arc line: {line}", path, number)
            name, arc, bound = match.groups()
            arcs[name] = arc
            if bound:
                arc_precision[name] = bound
            where[f"arc {name}"] = number
            continue
        if line.startswith("field"):
            match = _FIELD.match(line)
            if not match:
                raise ProblemFileError(f"Malformed field block: {line}", path, number)
            for key, body in _ENTRY.findall(match.group(1)):
                if not key.startswith("d"):
                    raise ProblemFileError(f"Field entries are named d<coordinate>, got {key}",
                                           path, number)
                coefficients[key[1:]] = body
            frame_text = match.group(2) or ""
            where["field"] = number
            continue
        match = _SETTING.match(line)
        if not match:
            raise ProblemFileError(f"Unrecognized line: {line}", path, number)
        key, body = match.group(1), match.group(2).strip()
        where[key] = number
        try:
            if key == "names":
                values[key] = tuple(part.strip() for part in body.split(","))
            elif key in ("weights", "lex"):
                values[key] = json.loads(body)
            elif key in ("max_steps", "precision"):
                values[key] = int(body)
            elif key in ("mode", "center"):
                values[key] = body
            else:
                raise ProblemFileError(f"Unknown setting {key}", path, number)
        except (ValueError, json.JSONDecodeError) as e:
            raise ProblemFileError(f"Bad value for {key}: {e}", path, number)

    for required in ("names", "weights"):
        if required not in values:
            raise ProblemFileError(f"Missing '{required} = ...' line", path)
    if "field" not in where:
        raise ProblemFileError("Missing field block", path)

    names = values["names"]
    if not 1 <= len(names) <= MAX_DIMENSION or len(set(names)) != len(names) \
            or not all(_IDENTIFIER.match(name) for name in names):
        raise ProblemFileError(f"Names must be one to three distinct identifiers: {names}",
                               path, where["names"])
    weights = tuple(str(w) for w in values["weights"])
    if not 1 <= len(weights) <= len(names):
        raise ProblemFileError("The number of weights must lie between one and the dimension",
                               path, where["weights"])
    lex = values.get("lex")
    problem = Problem(
        names=names, weights=weights, coefficients=coefficients, arcs=arcs,
        arc_precision=arc_precision,
        lex=tuple(tuple(int(i) for i in level) for level in lex) if lex else None,
        log_frame=_parse_frame(frame_text, names, path, where["field"]),
        mode=values.get("mode", "auto"), center=values.get("center", CENTER_POINT),
        max_steps=values.get("max_steps"), precision=values.get("precision"), path=path,
    )
    _validate(problem, where)
    return problem


def _validate(problem: Problem, where: Dict[str, int]):
    path = problem.path
    if problem.mode not in RUN_MODES:
        raise ProblemFileError(f"Mode must be one of {RUN_MODES}", path, where.get("mode"))
    if problem.center not in (CENTER_POINT, CENTER_CURVE):
        raise ProblemFileError("Center must be 'point' or 'curve'", path, where.get("center"))
    try:
        basis = problem.basis()
    except ApplicationError as e:
        raise ProblemFileError(f"Bad weights: {e.message}", path, where.get("weights"))

    for name in problem.arcs:
        if name not in problem.dependents:
            raise ProblemFileError(f"Arcs are given for dependent coordinates only, not {name}",
                                   path, where[f"arc {name}"])
    for name in problem.dependents:
        if name not in problem.arcs:
            raise ProblemFileError(f"No arc for dependent coordinate {name}", path)
        try:
            parse_arc(problem.arcs[name], basis, problem.independents)
            if name in problem.arc_precision:
                parse_arc_precision(problem.arc_precision[name], basis, problem.independents)
        except ParseError as e:
            raise ProblemFileError(e.message, path, where[f"arc {name}"])

    for name, text in problem.coefficients.items():
        if name not in problem.names:
            raise ProblemFileError(f"Field entry d{name} names no coordinate", path, where["field"])
        try:
            series = ps_parse(text, problem.names)
        except ParseError as e:
            raise ProblemFileError(e.message, path, where["field"])
        if any(k < 0 for e in series.terms for k in e):
            raise ProblemFileError(f"Negative exponent in d{name} = {text}", path, where["field"])
    if not any(not ps_parse(t, problem.names).is_zero() for t in problem.coefficients.values()):
        raise ProblemFileError("The vector field is zero", path, where["field"])


def load_problem(path: Union[str, Path]) -> Problem:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ProblemFileError(f"Cannot read problem file: {e}", str(path))
    return parse_problem(text, str(path))


# Running

@dataclass
class Trace:
    """Lines of a finished run (records, snapshots, certificates) and its verdict."""

    lines: List[str]
    verdict: Verdict

    @property
    def records(self) -> List[str]:
        prefix = f"{TRACE_KEYWORDS['record']}: "
        return [line[len(prefix):] for line in self.lines if line.startswith(prefix)]

    @property
    def verdict_line(self) -> str:
        return self.lines[-1]

    def to_text(self) -> str:
        return "\n".join(self.lines) + "\n"

    def write(self, path: Union[str, Path]):
        Path(path).write_text(self.to_text(), encoding="utf-8")


def apply_precision(settings: EngineSettings, order: int):
    """The working order also bounds the truncated unit inverses."""
    settings.default_order = order
    settings.set("precision.unit_inverse_order", order)


class UniformizationDriver(LoggerMixin):
    """Picks the engine for (n, r), runs it, and composes the maximal-contact phase."""

    def __init__(self, settings: Optional[EngineSettings] = None,
                 timeline: Optional[Timeline] = None):
        self.settings = settings or EngineSettings()
        self.timeline = timeline or Timeline(self.settings.include_snapshots)
        self.phases: List[str] = []

    def resolve_mode(self, problem: Problem, model: LocalModel) -> str:
        n, r = problem.dimension, problem.rank
        lex = model.basis.is_lex
        if problem.mode == "auto":
            if lex and r == n - 1:
                return "lexrank2"
            if r == n:
                return "r3"
            if r == n - 1:
                return "r2"
            return "r1"
        allowed = {
            "r3": r == n,
            "r2": r == n - 1,
            "r1": r == 1 and n == 3,
            "maxcontact": n == 3 and r in (1, 2),
            "lexrank2": lex and r == n - 1,
        }
        if not allowed[problem.mode]:
            raise ValidationError(f"Mode {problem.mode} does not fit n={n}, r={r}",
                                  "mode", problem.mode)
        return problem.mode

    def run(self, problem: Problem) -> Verdict:
        if problem.center == CENTER_CURVE:
            self.logger.info("Positive-dimensional center requested")
            return Verdict(VERDICT_NOT_IMPLEMENTED,
                           details={"feature": "positive-dimensional-valuation"},
                           timeline=self.timeline)
        model = problem.initial_model(self.settings.default_order)
        field = problem.initial_field()
        mode = self.resolve_mode(problem, model)
        self.logger.info(f"Running {mode} on n={problem.dimension}, r={problem.rank}")
        if is_nonsingular(field, include_offset=True):
            self.timeline.phase("start", n=problem.dimension, r=problem.rank)
            return Verdict(VERDICT_LOG_ELEMENTARY, model, field,
                           details={"nonsingular": "yes"}, timeline=self.timeline)
        try:
            if mode == "r3":
                return self.full_rank(field, model)
            if mode in ("r2", "lexrank2"):
                return self.corank_one(field, model, monitor=mode == "lexrank2")
            if mode == "r1":
                return self.rank_one(field, model)
            f = model.dependents[-1]
            _, series = maximal_contact_witness(model, f)
            return self.maximal_contact(field, model, f, series)
        except ApplicationError as e:
            e.details.setdefault("phase", self.phases[-1] if self.phases else mode)
            raise
        except Exception as e:
            raise ApplicationError(f"Failed to run the {mode} phase: {e}", "ENGINE_ERROR",
                                   {"phase": mode})

    def full_rank(self, field: LogVectorField, model: LocalModel) -> Verdict:
        """Every coordinate is independent: monomialize the coefficients, then read elementary."""
        self.phases.append("game")
        self.timeline.phase("game", n=len(model.names), r=model.rank)
        start = from_support(coefficient_support(field, model))
        self.timeline.invariants("game", vertices=start.size)
        try:
            model, field = play_monomialization(field, model, self.settings.game_budget_factor)
        except BudgetExceeded as e:
            self.logger.warning(f"game exhausted: {e}")
            return Verdict(VERDICT_EXHAUSTED, model, field, details={"reason": e.message},
                           timeline=self.timeline)
        self.timeline.follow(model)
        self.timeline.invariants("game", vertices=1)
        if not is_elementary(field):
            raise InvariantViolation("Monomial coefficient ideal but nilpotent linear part",
                                     "elementary", {"field": field.to_text()})
        return Verdict(VERDICT_ELEMENTARY, model, field,
                       details={"blowups": len(model.history)}, timeline=self.timeline)

    def corank_one(self, field: LogVectorField, model: LocalModel, monitor: bool = False) -> Verdict:
        engine_class = Dim2Driver if len(model.names) == 2 else Corank1Driver
        engine = engine_class(self.settings, self.timeline)
        self.phases.append(engine.phase_name)
        verdict = engine.run(field, model)
        if monitor:
            trivial = all(d == 1 for d in engine.ramification_indices)
            verdict.details["tri"] = "yes" if trivial else "no"
            self.logger.info(f"Ramification indices met: {engine.ramification_indices or '-'}")
        if verdict.kind != VERDICT_MAXIMAL_CONTACT or len(model.names) == 2:
            return verdict
        follow = self.maximal_contact(verdict.foliation, verdict.model, model.dependents[0],
                                      verdict.series)
        if monitor:
            follow.details["tri"] = verdict.details["tri"]
        return follow

    def rank_one(self, field: LogVectorField, model: LocalModel) -> Verdict:
        self.phases.append("rankone")
        verdict = rankone_driver(field, model, self.settings, self.timeline)
        if verdict.kind != VERDICT_MAXIMAL_CONTACT:
            return verdict
        return self.maximal_contact(verdict.foliation, verdict.model, verdict.details["variable"],
                                    verdict.series)

    def maximal_contact(self, field: LogVectorField, model: LocalModel, f: str,
                        series: Optional[str]) -> Verdict:
        self.phases.append("maxcontact")
        self.logger.info(f"Maximal contact along {f}; continuing in the adapted frame")
        return maxcontact_driver(field, model, f, self.settings, self.timeline, series)

    def get_summary(self) -> Dict[str, object]:
        return {"phases": list(self.phases), "lines": len(self.timeline.lines),
                "certificates": self.timeline.certificates}


def run(problem: Problem, settings: Optional[EngineSettings] = None) -> Trace:
    """Uniformize a problem and return its trace, closed by the verdict line."""
    settings = settings or EngineSettings()
    if problem.max_steps is not None:
        settings.driver_steps = problem.max_steps
    if problem.precision is not None:
        apply_precision(settings, problem.precision)
    timeline = Timeline(settings.include_snapshots)
    driver = UniformizationDriver(settings, timeline)
    verdict = driver.run(problem)
    timeline.conclude(verdict)
    logger.info(f"Verdict: {verdict.summary()}")
    return Trace(list(timeline.lines), verdict)


# Checking

@dataclass
class Mismatch:
    index: int
    line: str
    message: str

    def to_text(self) -> str:
        return f"line {self.index}: {self.message} [{self.line}]"


@dataclass
class CheckReport:
    """Outcome of a replay; an empty mismatch list means every line was confirmed."""

    records: int = 0
    snapshots: int = 0
    certificates: int = 0
    skipped: int = 0
    verdict: Optional[str] = None
    mismatches: List[Mismatch] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def fail(self, index: int, line: str, message: str):
        self.mismatches.append(Mismatch(index, line, message))

    def to_lines(self) -> List[str]:
        status = "ok" if self.ok else f"{len(self.mismatches)} mismatch(es)"
        lines = [f"check: {status} records={self.records} snapshots={self.snapshots} "
                 f"certificates={self.certificates} skipped={self.skipped}"]
        lines.extend(m.to_text() for m in self.mismatches)
        if self.verdict is not None:
            lines.append(f"verdict: {self.verdict}")
        return lines


def recompute_snapshot(label: str, values: Dict[str, str], field: LogVectorField,
                       model: LocalModel) -> Optional[Dict[str, object]]:
    """Invariants of a snapshot label read off the replayed state; None for unknown labels."""
    if label in ("corank1", "dim2"):
        support = np_support(field, model)
        data = contact_data(model, model.dependents[0])
        return {"hbar": support.hbar, "chi": support.chi, "delta": support.delta, "d": data.d}
    if label == "simple":
        lam, mu, simple = simple_singularity(field, model.independents[0], model.dependents[0])
        return {"lambda": lam, "mu": mu, "simple": "yes" if simple else "no"}
    if label == "rankone":
        support = rank_one_support(field, model)
        return {"h": support.h, "chi": support.chi, "delta": support.delta}
    if label == "maxcontact":
        frame = frame_of(field, model, values.get("f"))
        if model.rank == 2:
            zeta = frame.logord
            return {"zeta": zeta, "polygon": char_polygon(frame, max(zeta, 1)).to_text()}
        return {"varrho": frame.logord, "delta": adapted_delta(frame, model)}
    if label == "game":
        return {"vertices": from_support(coefficient_support(field, model)).size}
    return None


class TraceChecker(LoggerMixin):
    """Replays a trace from its problem and confirms every line it can recompute."""

    def __init__(self, problem: Problem, settings: Optional[EngineSettings] = None):
        self.problem = problem
        self.settings = settings or EngineSettings()
        self.report = CheckReport()

    def check(self, lines: Sequence[str]) -> CheckReport:
        try:
            model = self.problem.initial_model(self.settings.default_order)
            field = self.problem.initial_field()
        except ApplicationError as e:
            self.report.fail(0, "", f"problem does not load: {e.message}")
            return self.report

        keywords = {value: key for key, value in TRACE_KEYWORDS.items()}
        for index, raw in enumerate(lines, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            head, sep, body = line.partition(": ")
            kind = keywords.get(head) if sep else None
            if kind is None:
                self.report.fail(index, line, "unknown trace keyword")
                continue
            try:
                if kind == "record":
                    model, field = self._replay(index, line, body, model, field)
                elif kind == "snapshot":
                    self._snapshot(index, line, body, model, field)
                elif kind == "certificate":
                    self._certificate(index, line, body, model)
                elif kind == "verdict":
                    self.report.verdict = body
            except ApplicationError as e:
                self.report.fail(index, line, f"replay failed: {e.message}")
                return self.report

        if self.report.verdict is None:
            self.report.fail(len(lines), "", "trace has no verdict line")
        self.logger.info(f"Checked {self.report.records} records, "
                         f"{self.report.snapshots} snapshots, "
                         f"{self.report.certificates} certificates")
        return self.report

    def _replay(self, index, line, body, model, field):
        record = TransformRecord.from_line(body)
        if record.before and record.before != model.snapshot():
            self.report.fail(index, line, f"values before are {model.snapshot()}")
        after = model.apply(replace(record, before="", after=""))
        if record.after and record.after != after.snapshot():
            self.report.fail(index, line, f"values after are {after.snapshot()}")
        self.report.records += 1
        return after, transform(field, after.history[-1])

    def _snapshot(self, index, line, body, model, field):
        label, _, rest = body.partition(" ")
        values = dict(token.split("=", 1) for token in rest.split() if "=" in token)
        expected = recompute_snapshot(label, values, field, model)
        if expected is None:
            self.report.skipped += 1
            return
        self.report.snapshots += 1
        for key, value in expected.items():
            if key in values and format_token(value) != values[key]:
                self.report.fail(index, line,
                                 f"{key} recomputes to {format_token(value)}, trace has {values[key]}")

    def _operand(self, text: str, model: LocalModel):
        if text == "inf":
            return None
        if text.startswith("("):
            return parse_value(text, model.basis)
        return Fraction(text)

    def _certificate(self, index, line, body, model):
        tokens = body.split()
        if len(tokens) != 4:
            self.report.fail(index, line, "certificates read 'kind subject first second'")
            return
        kind, subject, first, second = tokens
        a, b = self._operand(first, model), self._operand(second, model)
        self.report.certificates += 1
        if kind == "increase":
            holds = _less(a, b)
        elif kind == "decrease":
            holds = _less(b, a)
        elif kind == "atmost":
            holds = not _less(b, a)
        else:
            self.report.fail(index, line, f"unknown certificate kind {kind}")
            return
        if not holds:
            self.report.fail(index, line, f"{subject}: {kind} does not hold")
        if isinstance(a, Value) and isinstance(b, Value):
            enclosed = interval_sign(b - a, self.settings.sign_check_digits)
            if enclosed is not None and enclosed != val_sign(b - a):
                self.report.fail(index, line, f"{subject}: interval sign disagrees")


def _less(a, b) -> bool:
    """a < b with None standing for infinity."""
    if a is None:
        return False
    if b is None:
        return True
    return a < b


def check(lines: Sequence[str], problem: Problem,
          settings: Optional[EngineSettings] = None) -> CheckReport:
    settings = settings or EngineSettings()
    if problem.precision is not None:
        apply_precision(settings, problem.precision)
    return TraceChecker(problem, settings).check(lines)


# Fuzzing

@dataclass
class FuzzCase:
    index: int
    problem: Problem
    trace: Optional[Trace] = None
    report: Optional[CheckReport] = None
    error: Optional[str] = None

    def to_text(self) -> str:
        if self.error is not None:
            return f"case {self.index}: error {self.error}"
        status = "ok" if self.report.ok else "check-failed"
        return f"case {self.index}: {self.trace.verdict.kind} {status}"


def _random_monomial(rng: random.Random, names: Sequence[str], top: int) -> str:
    factors = []
    for name in names:
        k = rng.randint(0, top)
        if k == 1:
            factors.append(name)
        elif k > 1:
            factors.append(f"{name}^{k}")
    return "*".join(factors)


def _random_polynomial(rng: random.Random, names: Sequence[str], terms: int, top: int) -> str:
    pieces = []
    for _ in range(terms):
        c = rng.choice([-3, -2, -1, 1, 2, 3])
        monomial = _random_monomial(rng, names, top)
        pieces.append(f"{c}*{monomial}" if monomial else str(c))
    text = " + ".join(pieces)
    return text.replace("+ -", "- ")


def _random_arc(rng: random.Random, names: Sequence[str], exponents: Sequence[str]) -> str:
    pieces = []
    for exponent in exponents:
        name = rng.choice(list(names))
        c = rng.choice([1, 2, -1])
        pieces.append(f"{c}*{name}^({exponent})" if c != 1 else f"{name}^({exponent})")
    return " + ".join(pieces).replace("+ -", "- ")


def _random_coefficients(rng: random.Random, names: Sequence[str], top: int,
                         required: Optional[str] = None) -> Dict[str, str]:
    """Random field entries, redrawn while the field or the required entry is zero."""
    while True:
        coefficients = {name: _random_polynomial(rng, names, rng.randint(1, 3), top)
                        for name in names}
        series = {name: ps_parse(text, names) for name, text in coefficients.items()}
        if required is not None and series[required].is_zero():
            continue
        if any(not s.is_zero() for s in series.values()):
            return coefficients


def random_problem(rng: random.Random, mode: str) -> Problem:
    """One randomized problem of the requested rank family."""
    if mode == "r3":
        names = ("x1", "x2", "x3")
        coefficients = _random_coefficients(rng, names, 3)
        return Problem(names, ("1", "sqrt2", "sqrt3"), coefficients, log_frame=names, mode=mode)
    if mode == "r2":
        names = ("x1", "x2", "y")
        a, b = rng.randint(1, 3), rng.randint(1, 3)
        arc = f"x1^{a}*x2^{b}"
        if rng.random() < 0.5:
            arc += f" + {rng.randint(1, 3)}*x1^{a + 1}*x2^{b}"
        coefficients = _random_coefficients(rng, names, 2)
        return Problem(names, ("1", "sqrt2"), coefficients, arcs={"y": arc},
                       log_frame=names[:2], mode=mode)
    if mode == "r1":
        names = ("x", "w", "y")
        q = rng.choice([2, 3])
        w_arc = _random_arc(rng, ["x"], [f"{rng.randint(q + 1, 2 * q)}/{q}"])
        y_arc = _random_arc(rng, ["x"], [f"{rng.randint(1, q)}/{q}", f"{rng.randint(2 * q, 3 * q)}/{q}"])
        coefficients = _random_coefficients(rng, names, 2, required="x")
        return Problem(names, ("1",), coefficients, arcs={"w": w_arc, "y": y_arc},
                       log_frame=("x",), mode=mode)
    raise ValidationError(f"Fuzz mode must be one of {FUZZ_MODES}", "mode", mode)


def fuzz(seed: int, count: int, mode: str,
         settings_factory=EngineSettings) -> List[FuzzCase]:
    """Run and check `count` random problems; engine errors are recorded, not raised."""
    if mode not in FUZZ_MODES:
        raise ValidationError(f"Fuzz mode must be one of {FUZZ_MODES}", "mode", mode)
    rng = random.Random(seed)
    cases = []
    for index in range(count):
        problem = random_problem(rng, mode)
        case = FuzzCase(index, problem)
        try:
            case.trace = run(problem, settings_factory())
            case.report = check(case.trace.lines, problem, settings_factory())
        except ApplicationError as e:
            case.error = str(e)
            logger.warning(f"Fuzz case {index} ({mode}, seed {seed}) failed: {e}")
        cases.append(case)
    return cases
