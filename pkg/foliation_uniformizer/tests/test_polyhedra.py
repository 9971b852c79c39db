"""Newton polyhedra and the monomialization game."""

import random

import pytest

from utils.exceptions import BudgetExceeded, EmptySupport, EqualValuesOnIndependents, InvariantViolation
from config.constants import FRAME_LOG
from core.series import PolySeries
from core.foliation import field_from_coefficients, is_elementary
from core.npp import play_monomialization
from core.polyhedra import (
    GameMonitor, MonomializationGame, from_support, game_step, monomialize, sigma_blowup,
)


class TestFromSupport:
    def test_dominated_points_drop(self):
        poly = from_support([(2, 0), (0, 2), (1, 2), (3, 3)])
        assert poly.vertices == ((0, 2), (2, 0))

    def test_points_on_a_segment_drop(self):
        poly = from_support([(2, 0), (0, 2), (1, 1)])
        assert poly.vertices == ((0, 2), (2, 0))

    def test_convex_position_kept(self):
        poly = from_support([(3, 0), (0, 3), (1, 1)])
        assert poly.vertices == ((0, 3), (1, 1), (3, 0))
        assert poly.minimum() == (0, 0)
        assert poly.to_text() == "{(0,3), (1,1), (3,0)}"

    def test_three_dimensions(self):
        poly = from_support([(2, 0, 0), (0, 2, 0), (0, 0, 2), (1, 1, 0), (1, 1, 1)])
        assert (1, 1, 0) not in poly.vertices
        assert poly.size == 3

    def test_empty(self):
        with pytest.raises(EmptySupport):
            from_support([])


class TestBlowup:
    def test_collapses_to_a_vertex(self):
        poly = from_support([(0, 2), (2, 0)])
        assert sigma_blowup(poly, 0, 1).vertices == ((0, 0),)

    def test_same_index(self):
        with pytest.raises(InvariantViolation):
            sigma_blowup(from_support([(0, 1), (1, 0)]), 1, 1)


class TestGame:
    def test_chart_follows_weights(self, basis_2):
        poly = from_support([(0, 2), (2, 0)])
        step = game_step(poly, [basis_2.generator(0), basis_2.generator(1)])
        assert (step.big, step.small) == (1, 0)
        assert step.after.is_single_vertex()
        assert step.weights[1] == basis_2.value([-1, 1])

    def test_word(self, basis_2):
        poly = from_support([(0, 3), (1, 1), (3, 0)])
        word, final = monomialize(poly, [basis_2.generator(0), basis_2.generator(1)])
        assert word == [(1, 0), (0, 1)]
        assert final.vertices == ((0, 0),)

    def test_terminates_in_three_variables(self, basis_3):
        poly = from_support([(3, 0, 0), (0, 2, 1), (1, 1, 1), (0, 0, 4)])
        weights = [basis_3.generator(k) for k in range(3)]
        word, final = monomialize(poly, weights)
        assert word == [(2, 1), (1, 0)]
        assert final.vertices == ((0, 0, 0),)

    def test_equal_weights(self, basis_1):
        one = basis_1.generator(0)
        with pytest.raises(EqualValuesOnIndependents):
            game_step(from_support([(0, 1), (1, 0)]), [one, one])

    def test_budget(self, basis_2):
        poly = from_support([(0, 3), (1, 1), (3, 0)])
        with pytest.raises(BudgetExceeded):
            monomialize(poly, [basis_2.generator(0), basis_2.generator(1)], budget=1)


class TestMonitor:
    def test_order(self):
        before = GameMonitor(3, frozenset({0, 1}), 5)
        assert GameMonitor(3, frozenset({0, 1}), 4).improves_on(before)
        assert not GameMonitor(3, frozenset({0, 1}), 5).improves_on(before)
        assert GameMonitor(3, frozenset({0, 1, 2}), 9).improves_on(before)
        assert not GameMonitor(3, frozenset({0}), 1).improves_on(before)
        assert not GameMonitor(3, frozenset({0, 2}), 1).improves_on(before)
        assert GameMonitor(2, frozenset({0}), 9).improves_on(before)

    def test_successor_keeps_the_index_set(self, basis_2):
        # (0,3), (2,0) under x1 = x1' * x2 stays a two-vertex polyhedron
        poly = from_support([(0, 3), (2, 0)])
        step = game_step(poly, [basis_2.generator(1), basis_2.generator(0)])
        assert (step.big, step.small) == (0, 1)
        assert step.after.vertices == ((0, 1), (2, 0))
        assert step.monitor == GameMonitor(2, frozenset({0, 1}), 5)
        assert step.successor == GameMonitor(2, frozenset({0, 1}), 3)
        assert step.successor.improves_on(step.monitor)

    def test_no_successor_when_a_vertex_drops(self, basis_2):
        poly = from_support([(0, 3), (1, 1), (3, 0)])
        step = game_step(poly, [basis_2.generator(0), basis_2.generator(1)])
        assert step.after.size == 2
        assert step.successor is None


def _random_polyhedron(rng: random.Random):
    count = rng.randint(1, 6)
    return from_support([tuple(rng.randint(0, 8) for _ in range(3)) for _ in range(count)])


class TestRandomGames:
    def test_monitor_on_random_polyhedra(self, basis_3):
        rng = random.Random(31)
        weights = [basis_3.generator(k) for k in range(3)]
        for _ in range(500):
            poly = _random_polyhedron(rng)
            assert poly.size <= 6
            game = MonomializationGame(weights, budget=500)
            word, final = game.run(poly)
            assert final.is_single_vertex()
            assert len(word) == len(game.history)
            for step in game.history:
                assert step.after.size <= step.before.size
                if step.successor is not None:
                    assert step.monitor.active <= step.successor.active
                    assert step.successor.improves_on(step.monitor)

    def test_monomialized_fields_are_elementary(self, full_rank_model):
        rng = random.Random(37)
        names = full_rank_model.names
        for _ in range(50):
            poly = _random_polyhedron(rng)
            terms = {vertex: rng.choice([-2, -1, 1, 3]) for vertex in poly.vertices}
            other = dict(terms)
            other[poly.vertices[0]] *= 2
            field = field_from_coefficients(names, (FRAME_LOG,) * 3,
                                            {"x1": PolySeries(names, terms),
                                             "x2": PolySeries(names, other)})
            model, field = play_monomialization(field, full_rank_model)
            assert from_support([e for c in field.coefficients for e in c.terms]).is_single_vertex()
            assert is_elementary(field)
