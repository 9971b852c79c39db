"""Local models: blow-ups, coordinate changes, Puiseux packages and replay."""

import random
from fractions import Fraction

import pytest

from utils.exceptions import ParseError, ValidationError, ValueConstraintViolated
from core.series import GenSeries
from core.valuation import ArcValuation
from core.model import (
    CHART_COMB1, CHART_COMB2, TransformKind, TransformRecord, blowup, contact_data,
    coord_change, etale_puiseux_package, initial_model, puiseux_package, ramify_model, replay,
)

XY = ("x", "y")


class TestContactData:
    def test_ramified_contact(self, cusp_model):
        data = contact_data(cusp_model, "y")
        assert (data.d, data.p, data.c) == (2, (3,), Fraction(1))
        assert data.phi == (-3, 2)
        assert not data.is_translation_ready

    def test_independent_rejected(self, cusp_model):
        with pytest.raises(ValidationError):
            contact_data(cusp_model, "x")

    def test_two_independents(self, corank_one_model):
        data = contact_data(corank_one_model, "y")
        assert (data.d, data.p, data.c) == (1, (1, 1), Fraction(1))


class TestBlowups:
    def test_chart_follows_values(self, cusp_model, basis_1):
        after = blowup(cusp_model, "x", "y")
        record = after.history[-1]
        assert record.kind is TransformKind.BLOWUP
        assert record.chart == CHART_COMB1
        assert after.value("y") == basis_1.generator(0) * Fraction(1, 2)
        again = blowup(after, "x", "y")
        assert again.history[-1].chart == CHART_COMB2
        assert again.value("x") == basis_1.generator(0) * Fraction(1, 2)

    def test_same_coordinate(self, cusp_model):
        with pytest.raises(ValidationError):
            blowup(cusp_model, "x", "x")

    def test_independent_blowup(self, full_rank_model, basis_3):
        after = blowup(full_rank_model, "x1", "x2")
        assert after.history[-1].chart == CHART_COMB1
        assert after.value("x2") == basis_3.value([-1, 1, 0])

    def test_snapshots_recorded(self, cusp_model):
        after = blowup(cusp_model, "x", "y")
        record = after.history[-1]
        assert record.before == "x=(1);y=(3/2)"
        assert record.after == "x=(1);y=(1/2)"


class TestCoordinateChanges:
    def test_keeps_value(self, cusp_model):
        moved = coord_change(cusp_model, "y", (2, 0), 1)
        assert moved.value("y") == cusp_model.value("y")
        assert moved.history[-1].kind is TransformKind.COORD_CHANGE_A

    def test_monomial_below_value(self, cusp_model):
        with pytest.raises(ValueConstraintViolated):
            coord_change(cusp_model, "y", (1, 0), 1)

    def test_zero_constant_is_identity(self, cusp_model):
        assert coord_change(cusp_model, "y", (2, 0), 0) is cusp_model


class TestPackages:
    def test_puiseux_package(self, cusp_model, basis_1):
        after, b = puiseux_package(cusp_model, "y")
        kinds = [record.kind for record in after.history]
        assert kinds == [TransformKind.BLOWUP, TransformKind.BLOWUP,
                         TransformKind.TRANSLATION_BLOWUP]
        assert after.history[-1].c == 1
        assert abs(b.det()) == 1
        assert after.value("x") == basis_1.generator(0) * Fraction(1, 2)
        assert after.value("y") == basis_1.generator(0) * Fraction(1, 4)

    def test_etale_package(self, cusp_model, basis_1):
        after = etale_puiseux_package(cusp_model, "y")
        assert after.history[0].kind is TransformKind.RAMIFY
        assert after.history[-1].kind is TransformKind.TRANSLATION_BLOWUP
        assert after.value("y") == basis_1.generator(0) * Fraction(1, 4)

    def test_ramify_halves_independent(self, cusp_model, basis_1):
        ramified = ramify_model(cusp_model, "x", 2)
        assert ramified.value("x") == basis_1.generator(0) * Fraction(1, 2)
        assert ramified.value("y") == cusp_model.value("y")


def _residue(rng: random.Random) -> Fraction:
    return Fraction(rng.choice([-3, -2, -1, 1, 2, 3]), rng.randint(1, 4))


def _check_package(model, after, b):
    assert abs(b.det()) == 1
    last = after.history[-1]
    assert last.kind is TransformKind.TRANSLATION_BLOWUP
    assert last.c != 0
    before = replay(model, after.history[len(model.history):-1])
    assert before.value("y") == before.value(last.pivot)
    moved = after.value("y")
    assert moved is None or model.basis.zero() < moved


class TestPackageContract:
    def test_random_pairs_over_two_independents(self, basis_2):
        rng = random.Random(23)
        names = ("x1", "x2", "y")
        checked = 0
        while checked < 200:
            d = rng.randint(1, 7)
            p = (rng.randint(-10, 10), rng.randint(-10, 10))
            value = basis_2.value([Fraction(p[0], d), Fraction(p[1], d)])
            if not basis_2.zero() < value:
                continue
            arcs = {"y": GenSeries.monomial(basis_2, value, _residue(rng))}
            model = initial_model(names, 2, ArcValuation.initial(basis_2, names, 2, arcs))
            after, b = puiseux_package(model, "y")
            _check_package(model, after, b)
            checked += 1

    def test_random_pairs_leave_other_dependents_alone(self, basis_1):
        rng = random.Random(29)
        names = ("x", "y", "z")
        for _ in range(200):
            d, p = rng.randint(1, 7), rng.randint(1, 10)
            arcs = {"y": GenSeries.monomial(basis_1, basis_1.value([Fraction(p, d)]), _residue(rng)),
                    "z": GenSeries.monomial(basis_1, basis_1.value([Fraction(5, 2)]), 1)}
            model = initial_model(names, 1, ArcValuation.initial(basis_1, names, 1, arcs))
            data = contact_data(model, "y")
            after, b = puiseux_package(model, "y")
            _check_package(model, after, b)
            assert len(after.history) <= data.d + data.p[0]
            assert all("z" not in (record.pivot, record.target) for record in after.history)
            assert after.value("z") == model.value("z")
            assert list(b.row(2)) == [0, 0, 1]
            assert list(b.col(2)) == [0, 0, 1]


class TestRecords:
    def test_line_format(self, cusp_model):
        after, _ = puiseux_package(cusp_model, "y")
        line = after.history[-1].to_line()
        assert line.startswith("translation_blowup i=x j=y c=1 | inv: ")
        parsed = TransformRecord.from_line(line)
        assert parsed == after.history[-1]

    def test_bad_line(self):
        with pytest.raises(ParseError):
            TransformRecord.from_line("shear j=y")

    def test_replay_reaches_the_same_model(self, cusp_model):
        after, _ = puiseux_package(cusp_model, "y")
        replayed = replay(cusp_model, after.history)
        assert replayed.snapshot() == after.snapshot()
        assert [r.to_line() for r in replayed.history] == [r.to_line() for r in after.history]
