"""Newton-Puiseux supports, monomialization and the corank-one drivers."""

import math
import random
from fractions import Fraction

import pytest

from utils.exceptions import ValidationError
from config.constants import (
    BRANCH_CORNER, BRANCH_FOLLOWED, FRAME_LOG, FRAME_PLAIN, VERDICT_LOG_ELEMENTARY,
)
from core.series import GenSeries, PolySeries, ps_parse
from core.valuation import ArcValuation, parse_arc
from core.model import initial_model
from core.foliation import LogVectorField, field_from_coefficients
from core.model import CHART_COMB1, TransformKind
from core.npp import (
    Dim2Driver, initial_part, invariant_branch, monomialize_coefficients, np_support,
    package_invariant_law, simple_singularity, witness_text,
)

XY = ("x", "y")
ENGINE_2 = (FRAME_LOG, FRAME_PLAIN)


def plane_field(dx="0", dy="0"):
    return field_from_coefficients(XY, ENGINE_2, {"x": ps_parse(dx, XY), "y": ps_parse(dy, XY)},
                                   normalize=False)


class TestSupport:
    def test_levels_and_heights(self, cusp_model, basis_1):
        # x-slot y^2 sits at level 2, the d/dy coefficient x^2 at level -1
        support = np_support(plane_field(dx="y^2", dy="x^2"), cusp_model)
        assert support.levels() == [-1, 2]
        assert support.alpha.is_zero()
        assert support.hbar == 2
        assert support.delta == basis_1.value([Fraction(1, 2)])
        assert support.critical == (-1,)
        assert support.chi == -1
        assert support.abscissa(-1) == basis_1.value([2])

    def test_initial_part(self, cusp_model, basis_1):
        field = plane_field(dx="y^2", dy="x^2")
        part = initial_part(field, cusp_model, basis_1.value([Fraction(1, 2)]))
        assert part.coefficient("y") == ps_parse("x^2", XY)
        assert part.coefficient("x").is_zero()

    def test_needs_log_independents(self, cusp_model):
        field = field_from_coefficients(XY, (FRAME_PLAIN, FRAME_PLAIN),
                                        {"x": ps_parse("1", XY)}, normalize=False)
        with pytest.raises(ValidationError):
            np_support(field, cusp_model)

    def test_needs_one_dependent(self, full_rank_model):
        names = full_rank_model.names
        field = LogVectorField(names, (FRAME_LOG,) * 3, [ps_parse("1", names)] * 3)
        with pytest.raises(ValidationError):
            np_support(field, full_rank_model)


class TestMonomialization:
    def test_two_vertex_coefficient_ideal(self, corank_one_model):
        names = corank_one_model.names
        frame = LogVectorField.engine_frame(names, 2)
        field = field_from_coefficients(names, frame, {"x1": ps_parse("x1 + x2", names)},
                                        normalize=False)
        model, field = monomialize_coefficients(field, corank_one_model)
        record = model.history[-1]
        assert len(model.history) == 1
        assert (record.kind, record.pivot, record.target, record.chart) == \
            (TransformKind.BLOWUP, "x1", "x2", CHART_COMB1)
        assert field.coefficient("x1") == ps_parse("1 + x2", names)
        assert field.coefficient("x2") == ps_parse("-1 - x2", names)
        assert np_support(field, model).alpha.is_zero()


class TestSimpleSingularities:
    @pytest.mark.parametrize("dx,dy,expected", [
        ("1", "-y", True),
        ("1", "2*y", False),
        ("0", "y", True),
        ("x", "y^2", False),
    ])
    def test_ratio(self, dx, dy, expected):
        assert simple_singularity(plane_field(dx, dy), "x", "y")[2] is expected

    def test_saddle_branch_is_the_axis(self):
        assert invariant_branch(plane_field("1", "-y"), "x", "y", 6).is_zero()

    def test_branch_of_a_sheared_saddle(self):
        branch = invariant_branch(plane_field("1", "x - y"), "x", "y", 6)
        assert branch == PolySeries.monomial(XY, (1, 0), Fraction(1, 2))

    def test_branch_second_term(self):
        branch = invariant_branch(plane_field("1", "x - y + y^2"), "x", "y", 2)
        assert branch.coefficient((1, 0)) == Fraction(1, 2)
        assert branch.coefficient((2, 0)) == Fraction(1, 12)

    @pytest.mark.parametrize("dx,dy", [("1", "2*y"), ("1", "1 + y")])
    def test_branch_needs_a_simple_singular_point(self, dx, dy):
        with pytest.raises(ValidationError):
            invariant_branch(plane_field(dx, dy), "x", "y", 4)


class TestWitness:
    def test_puiseux_text(self, basis_1):
        image = GenSeries(basis_1, {basis_1.value([Fraction(3, 2)]): 1,
                                    basis_1.value([Fraction(7, 4)]): -2})
        assert witness_text(image, ("x",)) == "x^(3/2) - 2*x^(7/4)"

    def test_truncated(self, basis_1):
        image = GenSeries(basis_1, {basis_1.value([1]): 3}, basis_1.value([5]))
        assert witness_text(image, ("x",)) == "3*x + ..."


class TestDim2Driver:
    def test_transversal_field_stops_at_once(self, cusp_model, settings):
        verdict = Dim2Driver(settings).run(plane_field(dy="1"), cusp_model)
        assert verdict.kind == VERDICT_LOG_ELEMENTARY
        assert verdict.details["hbar"] == -1
        assert verdict.model.history == ()

    def test_radial_field_needs_one_package(self, cusp_model, settings):
        # x*d/dx + y*d/dy: after x = t^2 the new y = y/t^3 - 1 has a nonzero constant derivative
        driver = Dim2Driver(settings)
        verdict = driver.run(plane_field(dx="1", dy="y"), cusp_model)
        assert verdict.kind == VERDICT_LOG_ELEMENTARY
        kinds = [record.kind for record in verdict.model.history]
        assert kinds == [TransformKind.RAMIFY, TransformKind.BLOWUP, TransformKind.BLOWUP,
                         TransformKind.TRANSLATION_BLOWUP]
        assert driver.ramification_indices == [2]
        assert driver.heights == [0, -1]
        assert driver.simple_points[0] == (1, 1, False)
        assert driver.simple_points[-1][2] is True
        assert any(line.startswith("cert: atmost hbar -1 0") for line in driver.timeline.lines)

    def test_saddle_is_a_corner(self, cusp_model, settings):
        driver = Dim2Driver(settings)
        verdict = driver.run(plane_field(dx="1", dy="-y"), cusp_model)
        assert verdict.kind == VERDICT_LOG_ELEMENTARY
        assert driver.simple_points[0] == (1, -1, True)
        assert driver.branches == [BRANCH_CORNER]
        assert "inv: branch kind=corner" in driver.timeline.lines

    def test_resonant_point_keeps_blowing_up(self, cusp_model, settings):
        driver = Dim2Driver(settings)
        verdict = driver.run(plane_field(dx="1", dy="2*y"), cusp_model)
        assert verdict.kind == VERDICT_LOG_ELEMENTARY
        assert driver.simple_points[0] == (1, 2, False)
        assert driver.branches == []
        kinds = [record.kind for record in verdict.model.history]
        assert kinds == [TransformKind.RAMIFY, TransformKind.BLOWUP, TransformKind.BLOWUP,
                         TransformKind.TRANSLATION_BLOWUP]

    def test_non_corner_branch_moves_y(self, basis_1, settings):
        # y = x/2 is invariant for x*d/dx + (x - y)*d/dy and the arc follows it one term
        arcs = {"y": parse_arc("x/2 + x^(3/2)", basis_1, ("x",))}
        model = initial_model(XY, 1, ArcValuation.initial(basis_1, XY, 1, arcs, basis_1.value([8])))
        driver = Dim2Driver(settings)
        verdict = driver.run(plane_field(dx="1", dy="x - y"), model)
        assert verdict.kind == VERDICT_LOG_ELEMENTARY
        assert driver.branches == [BRANCH_FOLLOWED, BRANCH_CORNER]
        first = verdict.model.history[0]
        assert first.kind is TransformKind.COORD_CHANGE_A
        assert first.c == Fraction(1, 2)
        assert any(line.startswith("cert: increase value(y)") for line in driver.timeline.lines)


_NONZERO = (Fraction(-2), Fraction(-1), Fraction(1, 2), Fraction(1), Fraction(3))


def _critical_instance(rng: random.Random, basis, d: int, chi: int):
    """y along c0*x^(p/d) + x^(p/d+1); a single point of abscissa zero at level chi."""
    p = rng.choice([k for k in range(1, 8) if math.gcd(k, d) == 1])
    slope = Fraction(p, d)
    arc = GenSeries(basis, {basis.value([slope]): rng.choice(_NONZERO), basis.value([slope + 1]): 1})
    model = initial_model(XY, 1, ArcValuation.initial(basis, XY, 1, {"y": arc}))
    dx, dy = {}, {}

    def put(a, s):
        if s >= 0 and rng.random() < 0.5:
            dx[(a, s)] = rng.choice(_NONZERO)
        else:
            dy[(a, s + 1)] = rng.choice(_NONZERO)

    put(0, chi)
    if chi - d >= -1 and rng.random() < 0.5:
        put(p, chi - d)
    for _ in range(rng.randint(0, 3)):
        s = rng.randint(-1, chi + 2)
        put(max(1, math.floor(slope * (chi - s)) + 1) + rng.randint(0, 2), s)
    field = field_from_coefficients(XY, ENGINE_2, {"x": PolySeries(XY, dx), "y": PolySeries(XY, dy)},
                                    normalize=False)
    return model, field


class TestPackageLaw:
    @pytest.mark.parametrize("d", [1, 2, 3])
    @pytest.mark.parametrize("chi", [-1, 0, 1, 2])
    def test_main_height_never_exceeds_the_critical_height(self, basis_1, d, chi):
        rng = random.Random(100 * d + chi)
        for _ in range(9):
            model, field = _critical_instance(rng, basis_1, d, chi)
            outcome = package_invariant_law(field, model, etale=True)
            assert outcome.before.chi == chi
            assert outcome.before.hbar == chi
            assert outcome.d == d
            assert outcome.raw_alpha == outcome.before.delta
            assert outcome.after.hbar <= chi
            if chi >= 1 and d >= 2:
                assert outcome.after.hbar < chi
