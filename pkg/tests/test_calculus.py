"""Grid functions and product-integration calculus."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import beta as beta_fn

from qscale.calculus import (
    cell_integrals,
    convolve,
    convolve_mixed,
    derivative,
    frac_derivative,
    frac_integral,
    l1_norm,
    laplace_transform,
    primitive,
    shift,
    sup_norm,
)
from qscale.distributions import MixedDistribution
from qscale.errors import GridMismatch
from qscale.grid import Grid, GridFunction

exponents = st.sampled_from([-0.75, -0.5, -0.25, 0.0, 0.3, 1.0])


def _smooth(grid, coefs, exponent):
    c0, c1, c2 = coefs
    return GridFunction.from_regular(grid, lambda x: c0 + c1 * np.cos(x) + c2 * x, exponent)


class TestGrid:
    def test_from_xmax_covers_range(self):
        g = Grid.from_xmax(1.0, 0.3)
        assert g.count == 4
        assert g.x_max >= 1.0

    def test_nodes_are_midpoints(self):
        g = Grid(0.5, 4)
        np.testing.assert_allclose(g.nodes, [0.25, 0.75, 1.25, 1.75])
        np.testing.assert_allclose(g.edges, [0, 0.5, 1.0, 1.5, 2.0])

    @pytest.mark.parametrize("step,count", [(0.0, 4), (-1.0, 4), (0.1, 1), (math.inf, 3)])
    def test_invalid(self, step, count):
        with pytest.raises(ValueError):
            Grid(step, count)

    def test_refine_and_truncate(self):
        g = Grid(0.25, 8)
        assert g.refine(3) == Grid(0.25 / 3, 24)
        assert g.truncate(4).x_max == pytest.approx(1.0)


class TestGridFunction:
    def test_power_samples(self):
        g = Grid(0.25, 4)
        f = GridFunction.power(g, -0.5, 2.0)
        np.testing.assert_allclose(f.samples, 2.0 * g.nodes**-0.5)

    def test_from_function_divides_power(self):
        g = Grid(0.25, 4)
        f = GridFunction.from_function(g, lambda x: x**0.5 * (1 + x), 0.5)
        np.testing.assert_allclose(f.values, 1 + g.nodes)

    def test_exponent_must_be_integrable(self):
        with pytest.raises(ValueError):
            GridFunction.power(Grid(0.1, 10), -1.0)

    def test_values_are_read_only(self):
        f = GridFunction.constant(Grid(0.1, 10), 1.0)
        with pytest.raises(ValueError):
            f.values[0] = 3.0

    def test_arithmetic_keeps_smaller_exponent(self):
        g = Grid(0.1, 10)
        s = GridFunction.power(g, -0.5) + GridFunction.constant(g, 1.0)
        assert s.exponent == -0.5
        np.testing.assert_allclose(s.samples, g.nodes**-0.5 + 1)

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatch):
            GridFunction.constant(Grid(0.1, 10)) + GridFunction.constant(Grid(0.1, 11))


class TestConvolve:
    @pytest.mark.parametrize("a", [-0.5, -0.25, 0.0, 0.5, 1.0])
    @pytest.mark.parametrize("b", [-0.75, -0.5, 0.0, 0.4])
    def test_beta_closed_form_is_exact(self, a, b):
        g = Grid.from_xmax(3.0, 1 / 32)
        out = convolve(GridFunction.power(g, a), GridFunction.power(g, b))
        assert out.exponent == pytest.approx(a + b + 1)
        np.testing.assert_allclose(out.values, beta_fn(a + 1, b + 1), rtol=1e-8)

    def test_half_powers_give_pi(self):
        g = Grid.from_xmax(1.0, 1 / 16)
        out = convolve(GridFunction.power(g, -0.5), GridFunction.power(g, -0.5))
        np.testing.assert_allclose(out.samples, math.pi, rtol=1e-10)

    def test_linear_factors_are_exact(self):
        g = Grid.from_xmax(2.0, 1 / 32)
        f = GridFunction.from_regular(g, lambda x: 1 + x, 0.0)
        out = convolve(f, GridFunction.constant(g, 2.0))
        x = g.nodes
        np.testing.assert_allclose(out.samples, 2 * x + x**2, atol=1e-13)

    def test_exponential_pair(self):
        g = Grid.from_xmax(4.0, 1 / 256)
        e1 = GridFunction.from_function(g, lambda x: np.exp(-x))
        e2 = GridFunction.from_function(g, lambda x: np.exp(-2 * x))
        x = g.nodes
        np.testing.assert_allclose(convolve(e1, e2).samples, np.exp(-x) - np.exp(-2 * x), atol=2e-6)

    @pytest.mark.parametrize("s", [-0.5, 0.0])
    def test_refinement_order(self, s):
        def error(h):
            g = Grid.from_xmax(2.0, h)
            f = GridFunction.from_regular(g, lambda x: np.exp(-x) * (1 + np.sin(3 * x)), s)
            out = convolve(f, GridFunction.power(g, s))
            xs = g.nodes[7::8]
            if s == 0:
                exact = [integrate.quad(lambda y: np.exp(-y) * (1 + np.sin(3 * y)), 0, x)[0] for x in xs]
            else:
                exact = [
                    integrate.quad(lambda y: np.exp(-y) * (1 + np.sin(3 * y)), 0, x,
                                   weight="alg", wvar=(s, s))[0]
                    for x in xs
                ]
            return np.max(np.abs(out(xs) - exact))

        e1, e2 = error(1 / 32), error(1 / 64)
        assert e1 / e2 >= 1.8

    @given(coefs=st.tuples(*[st.floats(-2, 2)] * 3), coefs2=st.tuples(*[st.floats(-2, 2)] * 3),
           a=exponents, b=exponents)
    def test_commutative(self, coefs, coefs2, a, b):
        g = Grid.from_xmax(2.0, 1 / 16)
        f, k = _smooth(g, coefs, a), _smooth(g, coefs2, b)
        lhs, rhs = convolve(f, k).samples, convolve(k, f).samples
        scale = max(1.0, np.max(np.abs(lhs)))
        np.testing.assert_allclose(lhs, rhs, atol=1e-10 * scale)

    @given(coefs=st.tuples(*[st.floats(-2, 2)] * 3), a=exponents, b=exponents, c=exponents)
    def test_associative(self, coefs, a, b, c):
        g = Grid.from_xmax(2.0, 1 / 16)
        f = _smooth(g, coefs, a)
        k1 = GridFunction.power(g, b)
        k2 = GridFunction.power(g, c)
        lhs = convolve(convolve(f, k1), k2)
        rhs = convolve(f, convolve(k1, k2))
        # both groupings agree up to the discretisation error of the product rule
        scale = max(1.0, sup_norm(rhs.rebase(max(rhs.exponent, 0.0))))
        assert np.max(np.abs(lhs.samples - rhs.samples)) <= 5e-2 * scale

    def test_associative_for_powers_is_exact(self):
        g = Grid.from_xmax(2.0, 1 / 16)
        p = [GridFunction.power(g, s) for s in (-0.5, 0.25, 0.0)]
        lhs = convolve(convolve(p[0], p[1]), p[2])
        rhs = convolve(p[0], convolve(p[1], p[2]))
        np.testing.assert_allclose(lhs.samples, rhs.samples, rtol=1e-10)

    @given(knots=st.lists(st.floats(-3, 3), min_size=7, max_size=7),
           knots2=st.lists(st.floats(-3, 3), min_size=7, max_size=7),
           a=exponents, b=exponents, frac=st.floats(0.1, 1.0))
    def test_young_inequality(self, knots, knots2, a, b, frac):
        # random piecewise linear regular factors with kinks every four cells
        g = Grid(1 / 8, 24)
        xk = np.linspace(0, g.x_max, 7)
        f = GridFunction(g, np.interp(g.nodes, xk, knots), a)
        k = GridFunction(g, np.interp(g.nodes, xk, knots2), b)
        x = frac * g.x_max
        lhs = l1_norm(convolve(f, k), x)
        # norms of the continuous inputs, resolved on a much finer grid
        fine = g.refine(16)
        ff = GridFunction(fine, np.interp(fine.nodes, xk, knots), a)
        kf = GridFunction(fine, np.interp(fine.nodes, xk, knots2), b)
        rhs = l1_norm(ff, x) * l1_norm(kf, x)
        assert lhs <= rhs * 1.05 + 1e-12

    def test_young_inequality_tight_for_positive_smooth(self):
        g = Grid.from_xmax(3.0, 1 / 64)
        f = GridFunction.from_function(g, lambda x: np.exp(-x), 0.0)
        k = GridFunction.power(g, -0.5)
        for x in (0.5, 1.0, 3.0):
            assert l1_norm(convolve(f, k), x) <= l1_norm(f, x) * l1_norm(k, x) * (1 + 1e-6)

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatch):
            convolve(GridFunction.constant(Grid(0.1, 10)), GridFunction.constant(Grid(0.2, 10)))


class TestMixed:
    def test_shift_by_whole_cells(self):
        g = Grid(0.25, 8)
        f = GridFunction.from_function(g, lambda x: x)
        sh = shift(f, 0.5)
        np.testing.assert_allclose(sh.samples, np.where(g.nodes > 0.5, g.nodes - 0.5, 0.0))

    def test_convolve_mixed_atoms(self):
        g = Grid.from_xmax(3.0, 1 / 64)
        f = GridFunction.constant(g, 1.0)
        mu = MixedDistribution([(1.0, 0.5), (2.0, 0.25)])
        out = convolve_mixed(f, mu)
        expected = 0.5 * (g.nodes > 1) + 0.25 * (g.nodes > 2)
        np.testing.assert_allclose(out.samples, expected, atol=1e-12)


class TestPrimitiveDerivative:
    def test_primitive_of_power(self):
        g = Grid.from_xmax(1.0, 1 / 32)
        p = primitive(GridFunction.power(g, -0.5))
        np.testing.assert_allclose(p.samples, 2 * g.nodes**0.5, rtol=1e-12)

    @given(c=st.floats(0.2, 3.0), s=st.sampled_from([0.0, 0.5]))
    def test_derivative_inverts_primitive(self, c, s):
        errs = []
        for h in (1 / 32, 1 / 64):
            g = Grid.from_xmax(2.0, h)
            f = GridFunction.from_regular(g, lambda x: np.sin(c * x) + 1.0, s)
            back = derivative(primitive(f))
            errs.append(np.max(np.abs(back.samples - f.samples)[4:-4]))
        assert errs[1] <= 4 * (1 / 64) ** 2 * (1 + c**2) * 10

    def test_derivative_of_polynomial(self):
        g = Grid.from_xmax(1.0, 1 / 16)
        d = derivative(GridFunction.from_function(g, lambda x: x**2))
        np.testing.assert_allclose(d.samples, 2 * g.nodes, atol=1e-12)

    def test_derivative_rejects_nonintegrable(self):
        with pytest.raises(ValueError):
            derivative(GridFunction.power(Grid(0.1, 10), -0.5))


class TestFractional:
    @pytest.mark.parametrize("mu", [0.25, 0.5, 1.5])
    def test_integral_of_constant(self, mu):
        g = Grid.from_xmax(2.0, 1 / 64)
        out = frac_integral(GridFunction.constant(g, 1.0), mu)
        np.testing.assert_allclose(out.samples, g.nodes**mu / math.gamma(1 + mu), rtol=1e-10)

    @pytest.mark.parametrize("mu", [0.25, 0.5, 0.75])
    def test_derivative_of_power(self, mu):
        g = Grid.from_xmax(2.0, 1 / 128)
        f = GridFunction.power(g, 1.0)
        out = frac_derivative(f, mu)
        expected = g.nodes ** (1 - mu) / math.gamma(2 - mu)
        np.testing.assert_allclose(out.samples, expected, rtol=1e-8)

    def test_order_bounds(self):
        g = Grid(0.1, 10)
        with pytest.raises(ValueError):
            frac_derivative(GridFunction.constant(g), 1.0)
        with pytest.raises(ValueError):
            frac_integral(GridFunction.constant(g), 0.0)


class TestNorms:
    def test_l1_of_power(self):
        g = Grid.from_xmax(2.0, 1 / 16)
        assert l1_norm(GridFunction.power(g, -0.5)) == pytest.approx(2 * math.sqrt(2))
        assert l1_norm(GridFunction.power(g, -0.5), 1.0) == pytest.approx(2.0)

    def test_sup_norm_singular(self):
        g = Grid(0.1, 10)
        assert sup_norm(GridFunction.power(g, -0.5)) == math.inf
        assert sup_norm(GridFunction.power(g, 0.5)) == pytest.approx(1.0**0.5 - 0.0, rel=0.05)

    def test_cell_integrals_sum(self):
        g = Grid(0.25, 8)
        assert cell_integrals(g, -0.5).sum() == pytest.approx(2 * math.sqrt(2.0))


class TestLaplace:
    @pytest.mark.parametrize("s", [-0.5, 0.0, 1.5])
    def test_power(self, s):
        g = Grid.from_xmax(60.0, 1 / 16)
        beta = np.array([1.0, 2.5])
        out = laplace_transform(GridFunction.power(g, s), beta)
        np.testing.assert_allclose(out, math.gamma(s + 1) / beta ** (s + 1), rtol=1e-10)

    @given(c1=st.floats(-5, 5), c2=st.floats(-5, 5), beta=st.floats(0.1, 20))
    def test_linear(self, c1, c2, beta):
        g = Grid.from_xmax(10.0, 1 / 16)
        f = GridFunction.from_regular(g, np.cos, -0.5)
        k = GridFunction.power(g, -0.5)
        lf, lk = laplace_transform(f, beta)[0], laplace_transform(k, beta)[0]
        lhs = laplace_transform(f * c1 + k * c2, beta)[0]
        assert abs(lhs - (c1 * lf + c2 * lk)) <= 1e-12 * max(1.0, abs(c1 * lf) + abs(c2 * lk))
