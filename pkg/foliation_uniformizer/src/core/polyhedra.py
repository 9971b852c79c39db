"""
Newton Polyhedra
Vertex sets of supports in Z^n_{>=0} closed by the positive orthant, their images under
coordinate blow-ups, and the vertex-reduction game that monomializes an ideal of monomials.
"""

import sys
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

from sympy import Matrix, Rational

sys.path.append(str(Path(__file__).parent.parent))

from utils.exceptions import (
    BudgetExceeded, EmptySupport, EqualValuesOnIndependents, InvariantViolation, SingleVertex,
)
from utils.logger import LoggerMixin, get_logger
from config.constants import DEFAULT_GAME_BUDGET_FACTOR
from core.values import Value

logger = get_logger("polyhedra")

Point = Tuple[int, ...]


def _dominates(a: Point, b: Point) -> bool:
    """a lies in b + R^n_{>=0}."""
    return all(x >= y for x, y in zip(a, b))


def _minimal_elements(points: Iterable[Point]) -> List[Point]:
    unique = sorted(set(points))
    return [p for p in unique if not any(q != p and _dominates(p, q) for q in unique)]


def _in_hull(p: Point, others: Sequence[Point]) -> bool:
    """p in conv(others) + R^n_{>=0}, decided exactly.

    A feasible convex combination can be taken at a vertex of the feasible set, where the
    support of the weights is matched by tight coordinates; the square systems are solved
    over Q.
    """
    n = len(p)
    for size in range(1, min(len(others), n + 1) + 1):
        for tight in combinations(range(n), size - 1):
            for chosen in combinations(others, size):
                rows = [[Rational(1)] * size]
                rows += [[Rational(q[t]) for q in chosen] for t in tight]
                system = Matrix(rows)
                if system.det() == 0:
                    continue
                rhs = Matrix([Rational(1)] + [Rational(p[t]) for t in tight])
                weights = system.LUsolve(rhs)
                if any(w < 0 for w in weights):
                    continue
                combo = [sum(w * q[t] for w, q in zip(weights, chosen)) for t in range(n)]
                if all(c <= x for c, x in zip(combo, p)):
                    return True
    return False


@dataclass(frozen=True)
class NewtonPolyhedron:
    """Vertices of conv(support) + R^n_{>=0}, sorted lexicographically."""

    vertices: Tuple[Point, ...]

    def __post_init__(self):
        if not self.vertices:
            raise EmptySupport()

    @property
    def dimension(self) -> int:
        return len(self.vertices[0])

    @property
    def size(self) -> int:
        return len(self.vertices)

    def is_single_vertex(self) -> bool:
        return len(self.vertices) == 1

    def minimum(self) -> Point:
        return tuple(min(v[k] for v in self.vertices) for k in range(self.dimension))

    def to_text(self) -> str:
        return "{" + ", ".join("(" + ",".join(str(k) for k in v) + ")" for v in self.vertices) + "}"

    def __str__(self):
        return self.to_text()


def from_support(points: Iterable[Sequence[int]]) -> NewtonPolyhedron:
    """Minimal elements of the support, then only points in convex position."""
    points = [tuple(int(k) for k in p) for p in points]
    if not points:
        raise EmptySupport()
    minimal = _minimal_elements(points)
    vertices = [p for p in minimal if not _in_hull(p, [q for q in minimal if q != p])]
    return NewtonPolyhedron(tuple(sorted(vertices)))


def sigma_map(point: Point, i: int, s: int) -> Point:
    """a_s <- a_i + a_s: the exponent map of the chart x_i = x_i' * x_s."""
    image = list(point)
    image[s] = point[i] + point[s]
    return tuple(image)


def sigma_blowup(poly: NewtonPolyhedron, i: int, s: int) -> NewtonPolyhedron:
    """Polyhedron after the chart x_i = x_i' * x_s, translated back into the orthant."""
    if i == s:
        raise InvariantViolation("A blow-up needs two distinct indices", "sigma_indices",
                                 {"i": i, "s": s})
    images = [sigma_map(v, i, s) for v in poly.vertices]
    low = tuple(min(p[k] for p in images) for k in range(poly.dimension))
    return from_support(tuple(a - b for a, b in zip(p, low)) for p in images)


@dataclass(frozen=True)
class GameMonitor:
    """(N, active index set, amount) read off a vertex pair."""

    vertex_count: int
    active: FrozenSet[int]
    amount: int

    def improves_on(self, previous: "GameMonitor") -> bool:
        """Fewer vertices, else a strictly larger index set, else a smaller amount on the same set."""
        if self.vertex_count != previous.vertex_count:
            return self.vertex_count < previous.vertex_count
        if self.active != previous.active:
            return previous.active < self.active
        return self.amount < previous.amount

    def to_text(self) -> str:
        return f"N={self.vertex_count} active={sorted(self.active)} amount={self.amount}"


@dataclass(frozen=True)
class GameStep:
    """One (big, small) blow-up: x_big = x_big' * x_small."""

    big: int
    small: int
    before: NewtonPolyhedron
    after: NewtonPolyhedron
    monitor: GameMonitor
    pair: Tuple[Point, Point]
    weights: Tuple[Value, ...] = field(default=())
    successor: Optional[GameMonitor] = None


def _pair_data(a: Point, b: Point) -> Tuple[Point, Point, Point]:
    v = tuple(min(x, y) for x, y in zip(a, b))
    return v, tuple(x - y for x, y in zip(a, v)), tuple(x - y for x, y in zip(b, v))


def _monitor_of(count: int, at: Point, bt: Point, i: int, s: int) -> GameMonitor:
    active = frozenset(t for t in range(len(at)) if at[t] or bt[t])
    return GameMonitor(count, active, at[i] + bt[s])


def game_step(poly: NewtonPolyhedron, weights: Sequence[Value],
              pair: Optional[Tuple[Point, Point]] = None) -> GameStep:
    """Blow up along indices separating two vertices; the chart follows the weights."""
    if poly.is_single_vertex():
        raise SingleVertex(poly.vertices[0])
    if pair is None or pair[0] not in poly.vertices or pair[1] not in poly.vertices:
        pair = (poly.vertices[0], poly.vertices[1])
    a, b = pair
    v, at, bt = _pair_data(a, b)
    if any(x * y for x, y in zip(at, bt)) or not any(at) or not any(bt):
        raise InvariantViolation("Vertex pair is not separated by its gcd", "game_pair",
                                 {"a": a, "b": b})
    i, s = min((i, s) for i in range(len(at)) for s in range(len(bt)) if at[i] and bt[s])
    monitor = _monitor_of(poly.size, at, bt, i, s)

    if weights[i] == weights[s]:
        raise EqualValuesOnIndependents(str(i), str(s))
    big, small = (i, s) if weights[s] < weights[i] else (s, i)
    after = sigma_blowup(poly, big, small)

    updated = list(weights)
    updated[big] = weights[big] - weights[small]

    if after.size > poly.size:
        raise InvariantViolation("Vertex count increased", "game_vertex_count",
                                 {"before": poly.to_text(), "after": after.to_text()})
    follow = None
    if after.size == poly.size:
        low = tuple(min(sigma_map(p, big, small)[k] for p in poly.vertices)
                    for k in range(poly.dimension))
        a2 = tuple(x - y for x, y in zip(sigma_map(a, big, small), low))
        b2 = tuple(x - y for x, y in zip(sigma_map(b, big, small), low))
        _, at2, bt2 = _pair_data(a2, b2)
        follow = _monitor_of(after.size, at2, bt2, i, s)
        if not monitor.active <= follow.active:
            raise InvariantViolation("Active index set shrank", "game_index_set",
                                     {"before": monitor.to_text(), "after": follow.to_text()})
        if not follow.improves_on(monitor):
            raise InvariantViolation("Game amount did not drop", "game_amount",
                                     {"before": monitor.to_text(), "after": follow.to_text()})
    return GameStep(big, small, poly, after, monitor, (a, b), tuple(updated), follow)


class MonomializationGame(LoggerMixin):
    """Runs game steps until a single vertex remains, tracking the vertex pair."""

    def __init__(self, weights: Sequence[Value], budget: Optional[int] = None):
        self.weights = tuple(weights)
        self.budget = budget
        self.history: List[GameStep] = []

    def default_budget(self, poly: NewtonPolyhedron) -> int:
        top = max((max(v) for v in poly.vertices), default=0)
        return DEFAULT_GAME_BUDGET_FACTOR * poly.dimension * max(top, 1)

    def run(self, poly: NewtonPolyhedron) -> Tuple[List[Tuple[int, int]], NewtonPolyhedron]:
        budget = self.budget if self.budget is not None else self.default_budget(poly)
        current = poly
        weights = self.weights
        pair = None
        for _ in range(budget):
            if current.is_single_vertex():
                break
            step = game_step(current, weights, pair)
            self.history.append(step)
            self.logger.debug(f"Game ({step.big},{step.small}): {step.monitor.to_text()} "
                              f"-> {step.after.to_text()}")
            pair = self._follow(step) if step.after.size == current.size else None
            current = step.after
            weights = step.weights
        else:
            if not current.is_single_vertex():
                raise BudgetExceeded("monomialize", budget,
                                     [step.monitor.to_text() for step in self.history])
        return [(step.big, step.small) for step in self.history], current

    @staticmethod
    def _follow(step: GameStep) -> Optional[Tuple[Point, Point]]:
        a, b = step.pair
        images = [sigma_map(p, step.big, step.small) for p in step.before.vertices]
        low = tuple(min(p[k] for p in images) for k in range(step.before.dimension))
        moved = [tuple(x - y for x, y in zip(sigma_map(p, step.big, step.small), low)) for p in (a, b)]
        return moved[0], moved[1]


def monomialize(poly: NewtonPolyhedron, weights: Sequence[Value],
                budget: Optional[int] = None) -> Tuple[List[Tuple[int, int]], NewtonPolyhedron]:
    """Blow-up word (big, small) reducing the polyhedron to a single vertex."""
    return MonomializationGame(weights, budget).run(poly)
