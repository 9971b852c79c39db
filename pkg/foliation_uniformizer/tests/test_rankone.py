"""Rank-one reduction in dimension three: levels, preparation and the driver."""

import random
from fractions import Fraction

import pytest

from utils.exceptions import ValidationError
from config.constants import (
    VERDICT_EXHAUSTED, VERDICT_LOG_ELEMENTARY, VERDICT_MAXIMAL_CONTACT,
)
from core.values import WeightBasis
from core.series import GenSeries, PolySeries, ps_parse
from core.valuation import ArcValuation, parse_arc
from core.model import TransformKind, initial_model, puiseux_package
from core.foliation import LogVectorField, field_from_coefficients
from core.driver import Problem, check, run
from core.rankone import (
    CASE_A, CASE_B, CASE_C, DOMINANT, RECESSIVE, UNPREPARED, CriticalData, RankOneDriver,
    RecessiveStep, case_classify, classify_level, critical_data, levels_of, package_lambda_identity,
    preparation_state, rank_one_coordinates, rank_one_support, recessive_step_shapes, strong_form,
    x_preparation,
)

XWY = ("x", "w", "y")


@pytest.fixture
def rank_one_model(basis_1):
    arcs = {"w": parse_arc("x^(3/2)", basis_1, ("x",)),
            "y": parse_arc("x^(5/2)", basis_1, ("x",))}
    return initial_model(XWY, 1, ArcValuation.initial(basis_1, XWY, 1, arcs))


def model_along(y_arc, w_arc="x^(3/2)"):
    basis = WeightBasis.parse(["1"])
    arcs = {"w": parse_arc(w_arc, basis, ("x",)), "y": parse_arc(y_arc, basis, ("x",))}
    return initial_model(XWY, 1, ArcValuation.initial(basis, XWY, 1, arcs))


def engine_field(dx="0", dw="0", dy="0"):
    coefficients = {name: ps_parse(text, XWY) for name, text in zip(XWY, (dx, dw, dy))}
    return field_from_coefficients(XWY, LogVectorField.engine_frame(XWY, 1), coefficients,
                                   normalize=False)


class TestLevels:
    def test_split_by_powers_of_y(self, rank_one_model):
        levels = levels_of(engine_field(dx="x^2", dw="w^2", dy="y^2"), rank_one_model)
        assert sorted(levels) == [0, 1]
        assert levels[0].a == ps_parse("x^2", XWY)
        assert levels[0].b == ps_parse("w^2", XWY)
        assert levels[1].c == ps_parse("1", XWY)

    def test_characters(self, rank_one_model):
        levels = levels_of(engine_field(dx="x^2", dw="1 + x", dy="y^2 + w*y"), rank_one_model)
        assert classify_level(levels[0], rank_one_model) == DOMINANT
        assert classify_level(levels[1], rank_one_model) == RECESSIVE
        unprepared = levels_of(engine_field(dw="w^2"), rank_one_model)
        assert classify_level(unprepared[0], rank_one_model) == UNPREPARED

    def test_strong_form(self, rank_one_model):
        level = levels_of(engine_field(dx="x^3", dw="2*x"), rank_one_model)[0]
        form = strong_form(level, rank_one_model)
        assert (form.rho, form.tau, form.lam) == (1, None, 2)
        assert form.character == DOMINANT

    def test_weak_x_coefficient_breaks_strong_form(self, rank_one_model):
        level = levels_of(engine_field(dx="x", dw="2*x"), rank_one_model)[0]
        assert strong_form(level, rank_one_model) is None

    def test_x_preparation(self, rank_one_model):
        assert x_preparation(engine_field(dx="3*x^2"), rank_one_model) == (3, 2)
        assert x_preparation(engine_field(dx="x + w"), rank_one_model) is None

    def test_support(self, rank_one_model, basis_1):
        field = engine_field(dx="x^2", dw="w^2", dy="y^2")
        support = rank_one_support(field, rank_one_model)
        assert (support.h, support.chi) == (0, 0)
        assert support.delta == basis_1.zero()
        assert support.alphas[1] == basis_1.zero()

    def test_needs_three_coordinates(self, cusp_model):
        with pytest.raises(ValidationError):
            rank_one_coordinates(cusp_model)


class TestCriticalPolynomial:
    def test_root_order(self):
        # P = y^2 - 1
        data = CriticalData(DOMINANT, 2, Fraction(1), 0, {2: (Fraction(1), 0), 0: (Fraction(-1), 0)},
                            2, True, None)
        assert data.root_order(Fraction(1)) == 1
        assert data.root_order(Fraction(2)) == 0


class TestDriver:
    def test_x_prepared_unit_is_log_elementary(self, rank_one_model, settings):
        verdict = RankOneDriver(settings).run(engine_field(dx="1", dw="1"), rank_one_model)
        assert verdict.kind == VERDICT_LOG_ELEMENTARY
        assert verdict.details["h"] == 0
        assert verdict.details["cases"] == "-"

    def test_preparation_flags(self, rank_one_model):
        state = preparation_state(engine_field(dx="x^2", dw="w^2", dy="y^2"), rank_one_model)
        assert state.x_prepared
        assert not state.log_elementary
        assert not state.completely_prepared
        assert state.snapshot()["prepared"] == "none"

    def test_w_package_reaches_the_arc(self, rank_one_model, settings):
        # w = x^(3/2) exactly: one etale w-package makes w vanish along the arc
        driver = RankOneDriver(settings)
        verdict = driver.run(engine_field(dx="x^2", dw="w^2", dy="y^2"), rank_one_model)
        assert verdict.kind == VERDICT_MAXIMAL_CONTACT
        assert verdict.details["variable"] == "w"
        assert verdict.series == "x^(3/2)"
        assert driver.packages == 1
        kinds = [record.kind for record in verdict.model.history]
        assert kinds[0] is TransformKind.RAMIFY
        assert kinds[-1] is TransformKind.TRANSLATION_BLOWUP
        assert "inv: xprep lam=1 m=2" in driver.timeline.lines


class TestPrecision:
    def test_levels_inherit_the_coefficient_precision(self, rank_one_model):
        coefficients = {"x": ps_parse("x^2", XWY, 6), "w": ps_parse("w + y^2", XWY, 6),
                        "y": ps_parse("y^3", XWY, 6)}
        field = field_from_coefficients(XWY, LogVectorField.engine_frame(XWY, 1), coefficients,
                                        normalize=False)
        levels = levels_of(field, rank_one_model)
        assert levels[0].a.precision == 6
        assert levels[2].b.precision == 4
        assert levels[2].c.precision == 3
        assert not levels[2].is_exact

    def test_exact_field_has_exact_levels(self, rank_one_model):
        levels = levels_of(engine_field(dx="x^2", dw="w^2", dy="y^2"), rank_one_model)
        assert all(level.is_exact for level in levels.values())

    def test_unit_division_moves_into_the_factor(self, rank_one_model, settings):
        driver = RankOneDriver(settings)
        field, _ = driver.x_prepare(engine_field(dx="x^2 + x^2*w", dw="y^2"), rank_one_model)
        assert driver.x_data == (1, 2)
        assert field.factor == ps_parse("1 + w", XWY)
        assert x_preparation(field, rank_one_model) == (1, 2)
        assert not field.coefficient("w").is_exact

    def test_x_first_integral_is_rejected(self, rank_one_model, settings):
        with pytest.raises(ValidationError):
            RankOneDriver(settings).run(engine_field(dw="y^2 + x^3", dy="x*y"), rank_one_model)

    def test_x_coefficient_lost_to_truncation_exhausts(self, rank_one_model, settings):
        coefficients = {"x": PolySeries.zero(XWY, 4), "w": ps_parse("y^2 + x^3", XWY),
                        "y": ps_parse("x*y", XWY)}
        field = field_from_coefficients(XWY, LogVectorField.engine_frame(XWY, 1), coefficients,
                                        normalize=False)
        verdict = RankOneDriver(settings).run(field, rank_one_model)
        assert verdict.kind == VERDICT_EXHAUSTED
        assert "vanishes" in verdict.details["reason"]

    def test_problem_with_x_first_integral(self, settings):
        problem = Problem(XWY, ("1",), {"w": "y^2 + x^3", "y": "x*y"},
                          arcs={"w": "x^(3/2)", "y": "x^(5/2)"}, log_frame=("x",), mode="r1")
        with pytest.raises(ValidationError):
            run(problem, settings)


# (dx, dw, dy, y arc) in the engine frame with nu(x) = 1 and w = x^(3/2), then the expected
# (h, chi, character, case) of the completely prepared field.
CASE_CORPUS = {
    "dominant_y2_x3_on_segment": ("x^4", "y^2 + x^3", "0", "x^(3/2)", 2, 2, DOMINANT, CASE_C),
    "dominant_y2_x3_main_only": ("x^4", "y^2 + x^3", "0", "x", 2, 2, DOMINANT, CASE_C),
    "dominant_y2_x3_low_only": ("x^4", "y^2 + x^3", "0", "x^2", 2, 0, DOMINANT, CASE_C),
    "dominant_y3_x2_on_segment": ("x^3", "y^3 + x^2", "0", "x^(2/3)", 3, 3, DOMINANT, CASE_C),
    "dominant_y3_x4_main_only": ("x^5", "y^3 + x^4", "0", "x", 3, 3, DOMINANT, CASE_C),
    "dominant_y3_x4_low_only": ("x^5", "y^3 + x^4", "0", "x^2", 3, 0, DOMINANT, CASE_C),
    "dominant_y2_x5_on_segment": ("x^6", "y^2 + x^5", "0", "x^(5/2)", 2, 2, DOMINANT, CASE_C),
    "dominant_y4_x3_on_segment": ("x^4", "y^4 + x^3", "0", "x^(3/4)", 4, 4, DOMINANT, CASE_C),
    "dominant_square_shift_x": ("x^5", "y^2 - 2*x*y + x^2 + x^3", "0", "x", 2, 2, DOMINANT,
                                CASE_A),
    "dominant_square_shift_x2": ("x^6", "y^2 + 2*x^2*y + x^4 + x^5", "0", "x^2", 2, 2, DOMINANT,
                                 CASE_A),
    "dominant_cubic_shift_x": ("x^4", "y^3 + 3*x*y^2 + x^3", "0", "x", 3, 3, DOMINANT, CASE_A),
    "dominant_square_shift_slow_y": ("x^5", "y^2 - 2*x*y + x^2 + x^3", "0", "x^2", 2, 0,
                                     DOMINANT, CASE_C),
    "dominant_square_shift_fast_y": ("x^5", "y^2 - 2*x*y + x^2 + x^3", "0", "x^(1/2)", 2, 2,
                                     DOMINANT, CASE_C),
    "dominant_below_main_height": ("x^5", "y^3 + x^2*y + x^4", "0", "x^2", 3, 1, DOMINANT,
                                   CASE_C),
    "recessive_q1_p2": ("x^5", "y^2 + x^4", "x*y^2 + x^3*y", "x^2", 2, 1, RECESSIVE, CASE_B),
    "recessive_q1_p3": ("x^6", "y^2 + x^5", "2*x*y^2 - x^4*y", "x^3", 2, 1, RECESSIVE, CASE_B),
    "recessive_q2_p3": ("x^7", "y^2 + x^6", "x^2*y^2 + 3*x^5*y", "x^3", 2, 1, RECESSIVE, CASE_B),
    "recessive_q1_p2_signs": ("x^5", "y^2 + x^4", "-x*y^2 + 2*x^3*y", "x^2", 2, 1, RECESSIVE,
                              CASE_B),
    "recessive_tchirnhausen_q1_p2": ("x^5", "y^2 + x^4", "x*y^2", "x^2", 2, 1, RECESSIVE, CASE_C),
    "recessive_tchirnhausen_q1_p3": ("x^6", "y^2 + x^5", "x*y^2", "x^3", 2, 1, RECESSIVE, CASE_C),
    "recessive_tchirnhausen_q2_p3": ("x^8", "y^2 + x^7", "x^2*y^2", "x^3", 2, 1, RECESSIVE,
                                     CASE_C),
    "recessive_far_below_main": ("x^5", "y^3 + x^4", "x*y^2 + x^3*y", "x^2", 3, 1, RECESSIVE,
                                 CASE_C),
    "recessive_far_below_main_single": ("x^5", "y^3 + x^4", "x*y^2", "x^2", 3, 1, RECESSIVE,
                                        CASE_C),
    "recessive_far_below_main_q2": ("x^6", "y^3 + x^5", "x^2*y^2 + 2*x^4*y", "x^2", 3, 1,
                                    RECESSIVE, CASE_C),
    "dominant_square_shift_lam4": ("x^3", "y^2 + 4*x*y + 4*x^2 + x^5", "0", "x", 2, 2, DOMINANT,
                                   CASE_A),
    "dominant_cubic_shift_x2": ("x^7", "y^3 + 3*x^2*y^2 + x^6", "0", "x^2", 3, 3, DOMINANT,
                                CASE_A),
    "dominant_main_coefficient_2": ("x^4", "2*y^2 + x^3", "0", "x^(3/2)", 2, 2, DOMINANT, CASE_C),
    "recessive_cubic_q1_p2": ("x^7", "y^3 + x^6", "x*y^3 + x^3*y^2", "x^2", 3, 2, RECESSIVE,
                              CASE_B),
    "recessive_cubic_q1_p3": ("x^9", "y^3 + x^8", "2*x*y^3 - x^4*y^2", "x^3", 3, 2, RECESSIVE,
                              CASE_B),
    "dominant_cubic_gap": ("x^4", "y^3 + x^3*y^2 + x^3", "0", "x", 3, 3, DOMINANT, CASE_C),
}


class TestCaseMachine:
    @pytest.mark.parametrize("name", sorted(CASE_CORPUS))
    def test_case_corpus(self, name):
        dx, dw, dy, y_arc, h, chi, character, case = CASE_CORPUS[name]
        model = model_along(y_arc)
        field = engine_field(dx, dw, dy)
        state = preparation_state(field, model)
        assert state.completely_prepared
        critical = critical_data(field, model, state)
        assert (state.h, critical.chi, critical.character) == (h, chi, character)
        assert case_classify(state, critical) == case

    def test_corpus_reaches_every_case(self):
        cases = {(entry[6], entry[7]) for entry in CASE_CORPUS.values()}
        assert cases == {(DOMINANT, CASE_A), (DOMINANT, CASE_C), (RECESSIVE, CASE_B),
                         (RECESSIVE, CASE_C)}
        assert len(CASE_CORPUS) >= 30

    @pytest.mark.parametrize("name", sorted(n for n, e in CASE_CORPUS.items() if e[7] == CASE_B))
    def test_recessive_instances_have_the_step_shapes(self, name):
        dx, dw, dy, y_arc, h, *_ = CASE_CORPUS[name]
        model = model_along(y_arc)
        field = engine_field(dx, dw, dy)
        state = preparation_state(field, model)
        critical = critical_data(field, model, state)
        q = state.forms[h - 1].tau
        step = RecessiveStep(h, q, critical.subleading, model.value("x") * q, model.value("y"))
        assert recessive_step_shapes(levels_of(field, model), model, step) == []
        # nu(y) = nu(x^p) puts the y^(h-1) term on the segment
        assert model.value("y") == model.value("x") * critical.subleading

    def test_critical_polynomial_of_a_shifted_square(self):
        model = model_along("x")
        field = engine_field("x^5", "y^2 - 2*x*y + x^2 + x^3")
        critical = critical_data(field, model, preparation_state(field, model))
        assert critical.coefficients == {0: (1, 2), 1: (-2, 1), 2: (1, 0)}
        assert not critical.tchirnhausen
        assert critical.subleading == 1
        # P(1, y + 1) = y^2
        assert critical.root_order(Fraction(1)) == 2

    def test_mixed_segment_is_not_completely_prepared(self):
        # level 0 is dominant, level 1 recessive, both critical
        model = model_along("x^2")
        state = preparation_state(engine_field("x^5", "y^2 + x^3", "x*y^2"), model)
        assert state.support.critical == (0, 1)
        assert state.segment_character is None
        assert not state.completely_prepared

    def test_recessive_step_removes_the_obstruction(self, settings):
        model = model_along("x^2")
        field = engine_field("x^5", "y^2 + x^4", "x*y^2 + x^3*y")
        state = preparation_state(field, model)
        critical = critical_data(field, model, state)
        step = RecessiveStep(2, 1, critical.subleading, model.value("x"), model.value("y"))
        driver = RankOneDriver(settings)
        field, model, after = driver.recessive_prep_step(field, model, step)
        assert after.p is None
        assert model.history[-1].kind is TransformKind.COORD_CHANGE_A
        assert not model.value("y") < step.gamma0
        # y = y' - x^2/2
        expected = ps_parse("x*y^2 + x^7", XWY) - PolySeries.monomial(XWY, (5, 0, 0), Fraction(1, 4))
        assert field.coefficient("y") == expected
        assert levels_of(field, model)[0].c.is_zero()
        assert "cert: increase order(p) 2 inf" in driver.timeline.lines


class TestCaseRuns:
    def test_case_a_then_case_c(self, settings):
        driver = RankOneDriver(settings)
        field = engine_field("x^5", "y^2 - 2*x*y + x^2 + x^3")
        verdict = driver.run(field, model_along("x + x^2 + x^3"))
        assert verdict.kind == VERDICT_LOG_ELEMENTARY
        assert verdict.details == {"h": 0, "cases": "AC"}
        assert driver.heights == [2, 2]
        assert verdict.details["h"] < driver.heights[-1]
        kinds = [record.kind for record in verdict.model.history]
        assert kinds[0] is TransformKind.COORD_CHANGE_A
        assert kinds[-1] is TransformKind.TRANSLATION_BLOWUP
        assert "inv: rankone h=2 chi=2 delta=(2) case=A" in driver.timeline.lines
        assert "inv: rankone h=2 chi=0 delta=(3) case=C" in driver.timeline.lines
        assert "cert: atmost h 2 2" in driver.timeline.lines

    def test_case_b_then_case_c(self, settings):
        driver = RankOneDriver(settings)
        field = engine_field("x^5", "y^2 + x^4", "x*y^2 + x^3*y")
        verdict = driver.run(field, model_along("x^2 + x^3"))
        assert verdict.kind == VERDICT_LOG_ELEMENTARY
        assert verdict.details == {"h": -1, "cases": "BC"}
        assert driver.heights == [2, 2]
        kinds = [record.kind for record in verdict.model.history]
        assert kinds[0] is TransformKind.COORD_CHANGE_A
        assert kinds[-1] is TransformKind.COORD_CHANGE_B
        assert "inv: rankone h=2 chi=1 delta=(3) case=B" in driver.timeline.lines
        assert "inv: rankone h=2 chi=1 delta=(3) case=C" in driver.timeline.lines

    def test_ramified_case_c(self, settings):
        driver = RankOneDriver(settings)
        field = engine_field("x^4", "y^2 + x^3")
        verdict = driver.run(field, model_along("x^(3/2) + x^2", "x^(5/2)"))
        assert verdict.kind == VERDICT_LOG_ELEMENTARY
        assert verdict.details == {"h": 0, "cases": "C"}
        assert driver.heights == [2]
        assert verdict.model.history[0].kind is TransformKind.RAMIFY

    @pytest.mark.parametrize("dx, dw, dy, y_arc, cases", [
        ("x^5", "y^2 - 2*x*y + x^2 + x^3", "0", "x + x^2 + x^3", "AC"),
        ("x^5", "y^2 + x^4", "x*y^2 + x^3*y", "x^2 + x^3", "BC"),
    ])
    def test_case_traces_replay(self, settings_factory, dx, dw, dy, y_arc, cases):
        problem = Problem(XWY, ("1",), {"x": dx, "w": dw, "y": dy},
                          arcs={"w": "x^(3/2)", "y": y_arc}, log_frame=("x",), mode="r1")
        trace = run(problem, settings_factory())
        assert trace.verdict.details["cases"] == cases
        report = check(trace.lines, problem, settings_factory())
        assert report.ok, report.to_lines()
        assert report.snapshots >= 2


class TestLambdaIdentity:
    def test_random_functions_of_x_and_w(self, basis_1):
        rng = random.Random(43)
        for _ in range(300):
            d, p = rng.randint(1, 5), rng.randint(1, 9)
            residue = rng.choice([Fraction(-2), Fraction(-1), Fraction(1, 2), Fraction(1), Fraction(3)])
            arcs = {"w": GenSeries.monomial(basis_1, basis_1.value([Fraction(p, d)]), residue),
                    "y": parse_arc("x^(7/2)", basis_1, ("x",))}
            model = initial_model(XWY, 1, ArcValuation.initial(basis_1, XWY, 1, arcs))
            after, _ = puiseux_package(model, "w")
            terms = {(rng.randint(0, 5), rng.randint(0, 5), 0): rng.choice([-2, -1, 1, 3])
                     for _ in range(rng.randint(1, 5))}
            lam, alpha = package_lambda_identity(PolySeries(XWY, terms), model, after)
            assert lam == alpha
