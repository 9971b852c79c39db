"""Truncated multivariate series, substitutions and value-group exponent series."""

from fractions import Fraction

import pytest

from utils.exceptions import (
    NegativeExponent, NotAUnit, ParseError, ResidueNotRational, VariableMismatch,
)
from core.series import (
    GenSeries, PolySeries, Substitution, generalized_binomial, gs_root, ps_invert_unit,
    ps_parse, ramify, subst_translation,
)

XY = ("x", "y")
XWY = ("x", "w", "y")


class TestPolySeries:
    def test_parse_and_print(self):
        f = ps_parse("3/2*x^2*w - y", XWY)
        assert f.coefficient((2, 1, 0)) == Fraction(3, 2)
        assert f.coefficient((0, 0, 1)) == -1
        assert f.to_text() == "3/2*x^2*w - y"

    def test_parse_rejects_unknown_names(self):
        with pytest.raises(ParseError):
            ps_parse("x + z", XY)

    def test_parse_rejects_irrational_coefficient(self):
        with pytest.raises(ParseError):
            ps_parse("sqrt(2)*x", XY)

    def test_truncated_product(self):
        f = ps_parse("1 + x", XY).truncate(3)
        square = f * f
        assert square.precision == 3
        assert square == PolySeries(XY, {(0, 0): 1, (1, 0): 2, (2, 0): 1}, 3)

    def test_power_tracks_precision(self):
        f = ps_parse("x + y", XY).truncate(3)
        cube = f ** 3
        assert cube.precision == 5
        assert cube.coefficient((2, 1)) == 3

    def test_mismatched_variables(self):
        with pytest.raises(VariableMismatch):
            ps_parse("x", XY) + ps_parse("x", XWY)

    def test_derivative_and_restriction(self):
        f = ps_parse("x^2*y + y^3 + x", XY)
        assert f.derivative("x") == ps_parse("2*x*y + 1", XY)
        assert f.set_zero("y") == ps_parse("x", XY)

    def test_restriction_refuses_negative_exponents(self):
        f = PolySeries(XY, {(0, -1): 1})
        with pytest.raises(NegativeExponent):
            f.set_zero("y")

    def test_split_by_levels(self):
        parts = ps_parse("x + x*y + 2*y^2", XY).split_by("y")
        assert sorted(parts) == [0, 1, 2]
        assert parts[1] == ps_parse("x", XY)
        assert parts[2] == ps_parse("2", XY)


class TestUnitInverse:
    def test_geometric_series(self):
        u = ps_parse("1 - x", XY)
        inverse = ps_invert_unit(u, 4)
        assert inverse == PolySeries(XY, {(0, 0): 1, (1, 0): 1, (2, 0): 1, (3, 0): 1}, 4)
        assert (u * inverse).agrees_with(PolySeries.constant(XY, 1))

    def test_scaled_unit(self):
        inverse = ps_invert_unit(ps_parse("2 + 2*y", XY), 3)
        assert inverse.coefficient((0, 0)) == Fraction(1, 2)
        assert inverse.coefficient((0, 1)) == Fraction(-1, 2)
        assert inverse.coefficient((0, 2)) == Fraction(1, 2)

    def test_not_a_unit(self):
        with pytest.raises(NotAUnit):
            ps_invert_unit(ps_parse("x + y", XY))


class TestSubstitutions:
    def test_additive_translation(self):
        f = ps_parse("y^2", XY)
        assert subst_translation(f, "y", (1, 0), 2, "add") == ps_parse("y^2 + 4*x*y + 4*x^2", XY)

    def test_multiplicative_translation(self):
        f = ps_parse("y", XY)
        assert subst_translation(f, "y", (1, 0), 1, "mul") == ps_parse("x*y + x", XY)

    def test_monomial_chart(self):
        sub = Substitution.monomial(XY, [[1, 0], [1, 1]])
        assert sub.image_of("y") == ps_parse("x*y", XY)
        assert sub.image_of("x") == ps_parse("x", XY)
        assert sub.inverse_matrix() == [[1, 0], [-1, 1]]

    def test_ramification(self):
        assert ramify(ps_parse("x^3*y", XY), "x", 2) == ps_parse("x^6*y", XY)

    @pytest.mark.parametrize("k, j, expected", [
        (3, 2, 3), (2, 3, 0), (-1, 3, -1), (-2, 2, 3),
    ])
    def test_generalized_binomial(self, k, j, expected):
        assert generalized_binomial(k, j) == expected


class TestGenSeries:
    def test_inverse(self, basis_1):
        g = basis_1.generator(0)
        f = GenSeries(basis_1, {g: 1, g * 2: 1})
        inverse = f.inverse(g * 3)
        assert inverse.terms == {g * -1: 1, basis_1.zero(): -1, g: 1}
        assert inverse.precision == g * 2

    def test_square_root(self, basis_1):
        g = basis_1.generator(0)
        f = GenSeries(basis_1, {g * 2: 1, g * 3: 1})
        root = gs_root(f, 2, g * 3)
        assert root.terms == {g: 1, g * 2: Fraction(1, 2), g * 3: Fraction(-1, 8)}

    def test_exact_root_of_monomial(self, basis_1):
        g = basis_1.generator(0)
        root = gs_root(GenSeries(basis_1, {g * 2: 4}), 2)
        assert root.terms == {g: 2}

    def test_irrational_residue(self, basis_1):
        g = basis_1.generator(0)
        with pytest.raises(ResidueNotRational):
            gs_root(GenSeries(basis_1, {g * 2: 2}), 2)

    def test_truncation_hides_terms(self, basis_2):
        g0, g1 = basis_2.generator(0), basis_2.generator(1)
        f = GenSeries(basis_2, {g0: 1, g1: 3}, precision=g1)
        assert f.support() == [g0]
        assert f.leading() == (g0, 1)
