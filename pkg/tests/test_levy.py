"""Levy triplets, drift conventions and Laplace exponents."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qscale.calculus import laplace_transform
from qscale.distributions import ExponentialLaw, MixedDistribution
from qscale.errors import NonConvergentIntegral, SubordinatorExcluded
from qscale.grid import Grid
from qscale.levy import (
    CombinedJumps,
    CompoundPoisson,
    Custom,
    DriftConvention,
    LevyModel,
    NoJumps,
    Regime,
    Stable,
    TabulatedTail,
    TemperedStable,
    classify,
    drift_constants,
    right_inverse,
    truncate_measure,
)

PARAMETRIC = {
    "brownian": LevyModel(1.0, "c", 1.0),
    "cramer_lundberg": LevyModel(2.0, "c_prime", 0.0, CompoundPoisson(1.0, ExponentialLaw(1.0))),
    "stable": LevyModel(0.0, "c_double_prime", 0.0, Stable(1.5)),
    "tempered": LevyModel(0.3, "c", 0.0, TemperedStable(1.4, 2.0)),
    "gauss_atoms": LevyModel(1.0, "c", 0.5, CompoundPoisson(2.0, MixedDistribution([(0.5, 0.3), (2.0, 0.7)]))),
}
GAMMA_LIKE = LevyModel(1.0, "c_prime", 0.5, Custom(lambda x: x**-0.5 * np.exp(-x), name="gamma-like"))
HEAVY = LevyModel(1.0, "c", 1.0, Custom(lambda x: (1 + x) ** -0.5, name="heavy"))


def _representations(model):
    reps = ["raw"]
    if model.has_bounded_variation_jumps():
        reps.append("bv")
    if model.has_finite_mean():
        reps.append("mean")
    return reps


class TestDriftConstants:
    def test_cramer_lundberg(self):
        m = PARAMETRIC["cramer_lundberg"]
        d = drift_constants(m)
        # int_(0,1) y e^{-y} dy = 1 - 2/e and the mean is 1
        assert d.c_prime == 2.0
        assert d.c == pytest.approx(2.0 - (1 - 2 / math.e), rel=1e-12)
        assert d.c_double_prime == pytest.approx(1.0, rel=1e-12)

    def test_stable_has_no_c_prime(self):
        d = drift_constants(PARAMETRIC["stable"])
        assert d.c_prime is None
        assert d.c_double_prime == 0.0

    def test_conversion_errors(self):
        with pytest.raises(NonConvergentIntegral):
            LevyModel(1.0, "c_prime", 0.0, Stable(1.5))
        with pytest.raises(NonConvergentIntegral):
            LevyModel(1.0, "c_double_prime", 1.0, HEAVY.jumps)
        with pytest.raises(NonConvergentIntegral):
            _ = HEAVY.c_double_prime

    def test_convention_from_string(self):
        assert LevyModel(1.0, "c_prime").convention is DriftConvention.C_PRIME

    def test_constants_are_floats(self):
        d = drift_constants(PARAMETRIC["cramer_lundberg"])
        assert all(type(v) is float for v in (d.c, d.c_prime, d.c_double_prime))


class TestClassify:
    @pytest.mark.parametrize(
        "name,regime",
        [
            ("brownian", Regime.GAUSSIAN),
            ("cramer_lundberg", Regime.BOUNDED_VARIATION),
            ("stable", Regime.UNBOUNDED_VARIATION),
            ("tempered", Regime.UNBOUNDED_VARIATION),
            ("gauss_atoms", Regime.GAUSSIAN),
        ],
    )
    def test_regimes(self, name, regime):
        assert classify(PARAMETRIC[name]) is regime

    @pytest.mark.parametrize("drift", [0.0, -1.0])
    def test_subordinator_excluded(self, drift):
        m = LevyModel(drift, "c_prime", 0.0, CompoundPoisson(1.0, ExponentialLaw(1.0)))
        with pytest.raises(SubordinatorExcluded):
            classify(m)

    def test_pure_drift_is_bounded_variation(self):
        assert classify(LevyModel(1.0, "c")) is Regime.BOUNDED_VARIATION


class TestPsi:
    @pytest.mark.parametrize("name", sorted(PARAMETRIC))
    @given(betas=st.lists(st.floats(0.0, 20.0), min_size=3, max_size=3, unique=True))
    def test_convex_chord(self, name, betas):
        m = PARAMETRIC[name]
        b1, b2, b3 = sorted(betas)
        if b3 - b1 < 1e-6:
            return
        p1, p2, p3 = (float(m.psi(b)) for b in (b1, b2, b3))
        t = (b2 - b1) / (b3 - b1)
        noise = 1e-12 * (1 + abs(p1) + abs(p2) + abs(p3))
        assert p2 <= (1 - t) * p1 + t * p3 + noise

    @pytest.mark.parametrize("name", sorted(PARAMETRIC))
    def test_psi_vanishes_at_zero(self, name):
        assert PARAMETRIC[name].psi(0.0) == 0.0

    @pytest.mark.parametrize("name", sorted(PARAMETRIC))
    def test_representations_agree(self, name):
        m = PARAMETRIC[name]
        beta = np.geomspace(0.1, 50, 25)
        reps = _representations(m)
        assert len(reps) >= 2
        ref = m.psi(beta, reps[0])
        for rep in reps[1:]:
            np.testing.assert_allclose(m.psi(beta, rep), ref, rtol=1e-10)

    def test_representations_agree_by_quadrature(self):
        # the custom measure has no closed forms; quadrature sets the accuracy
        beta = np.geomspace(0.1, 50, 9)
        ref = GAMMA_LIKE.psi(beta, "bv")
        for rep in ("mean", "raw"):
            np.testing.assert_allclose(GAMMA_LIKE.psi(beta, rep), ref, rtol=1e-8)

    @pytest.mark.parametrize(
        "model,beta,expected",
        [
            (LevyModel(1.0, "c", 1.0), 2.0, 6.0),
            (LevyModel(0.0, "c_double_prime", 0.0, Stable(1.5)), 4.0, 8.0),
            (LevyModel(0.0, "c_double_prime", 0.0, Stable(1.5, 2.0)), 4.0, 16.0),
            # 2 beta - beta / (beta + 1)
            (LevyModel(2.0, "c_prime", 0.0, CompoundPoisson(1.0, ExponentialLaw(1.0))), 1.0, 1.5),
        ],
    )
    def test_values(self, model, beta, expected):
        assert float(model.psi(beta)) == pytest.approx(expected, rel=1e-12)

    def test_tempered_closed_form(self):
        m = LevyModel(0.0, "c_double_prime", 0.0, TemperedStable(1.4, 2.0))
        b = 3.0
        expected = (b + 2.0) ** 1.4 - 2.0**1.4 - 1.4 * 2.0**0.4 * b
        assert float(m.psi(b)) == pytest.approx(expected, rel=1e-12)

    def test_negative_beta_rejected(self):
        with pytest.raises(ValueError):
            PARAMETRIC["brownian"].psi(-1.0)


class TestPhi:
    @pytest.mark.parametrize("name", sorted(PARAMETRIC) + ["heavy"])
    @pytest.mark.parametrize("q", [0.0, 0.5, 1.0, 10.0])
    def test_right_inverse(self, name, q):
        m = HEAVY if name == "heavy" else PARAMETRIC[name]
        root = m.phi(q)
        tol = 1e-12 * max(1.0, root)
        assert float(m.psi(root)) == pytest.approx(q, abs=1e-10 * max(1.0, q))
        # the root is bracketed within the bisection tolerance
        assert float(m.psi(root + 2 * tol)) >= q - 1e-12
        if root > 2 * tol:
            assert float(m.psi(max(root - 2 * tol, 0.0))) <= q + 1e-12

    def test_brownian_golden_ratio(self):
        # beta + beta^2 = 1
        assert PARAMETRIC["brownian"].phi(1.0) == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-12)

    def test_negative_mean_has_positive_phi0(self):
        m = LevyModel(-1.0, "c_double_prime", 1.0)
        assert m.phi(0.0) == pytest.approx(1.0, abs=1e-12)

    def test_right_inverse_plain_function(self):
        assert right_inverse(lambda b: b * b, 4.0) == pytest.approx(2.0, abs=1e-12)


def _log_grid():
    return np.geomspace(1e-3, 50.0, 200)


class TestTails:
    @pytest.mark.parametrize(
        "jumps",
        [
            Stable(1.5),
            TemperedStable(1.3, 1.0),
            CompoundPoisson(1.0, ExponentialLaw(2.0)),
            CompoundPoisson(1.0, MixedDistribution([(0.5, 0.5), (1.5, 0.5)])),
            GAMMA_LIKE.jumps,
        ],
        ids=["stable", "tempered", "cp-exp", "cp-atoms", "custom"],
    )
    def test_tail_monotone_and_integrated_tail_convex(self, jumps):
        x = _log_grid()
        t = jumps.tail(x)
        assert np.all(np.diff(t) <= 1e-14)
        it = jumps.integrated_tail(x)
        assert np.all(np.diff(it) <= 1e-12)
        slopes = np.diff(it) / np.diff(x)
        assert np.all(np.diff(slopes) >= -1e-9 * np.abs(slopes[:-1]) - 1e-12)

    def test_integrated_tail_of_tail(self):
        j = TemperedStable(1.3, 1.0)
        x = np.array([0.1, 0.5, 2.0])
        from scipy import integrate

        direct = [integrate.quad(lambda y: float(j.tail(y)), xx, np.inf)[0] for xx in x]
        np.testing.assert_allclose(j.integrated_tail(x), direct, rtol=1e-8)

    def test_stable_integrated_tail_matches_power(self):
        j = Stable(1.5)
        x = np.array([0.25, 1.0, 4.0])
        np.testing.assert_allclose(j.integrated_tail(x), x**-0.5 / math.gamma(0.5), rtol=1e-14)

    def test_tabulated_tail(self):
        g = Grid.from_xmax(6.0, 1 / 64)
        tab = TabulatedTail(GridFunctionFromTail(g))
        exact = CompoundPoisson(1.0, ExponentialLaw(1.0))
        x = np.array([0.5, 1.0, 2.0])
        np.testing.assert_allclose(tab.integrated_tail(x), exact.integrated_tail(x) - np.exp(-6.0), atol=1e-4)

    def test_combined_adds(self):
        a, b = Stable(1.5), CompoundPoisson(2.0, ExponentialLaw(1.0))
        both = a + b
        assert isinstance(both, CombinedJumps)
        x = np.array([0.3, 1.7])
        np.testing.assert_allclose(both.tail(x), a.tail(x) + b.tail(x))
        np.testing.assert_allclose(both.integrated_tail(x), a.integrated_tail(x) + b.integrated_tail(x))

    def test_no_jumps(self):
        j = NoJumps()
        assert j.total_mass() == 0
        assert float(j.tail(1.0)) == 0.0


def GridFunctionFromTail(grid):
    from qscale.grid import GridFunction

    return GridFunction.from_function(grid, lambda x: np.exp(-x))


class TestTilt:
    @pytest.mark.parametrize("name", ["brownian", "cramer_lundberg", "stable", "tempered"])
    def test_tilted_exponent(self, name):
        m = PARAMETRIC[name]
        phi = 0.7
        t = m.tilted(phi)
        beta = np.array([0.3, 1.0, 4.0])
        np.testing.assert_allclose(t.psi(beta), m.psi(beta + phi) - m.psi(phi), rtol=1e-10)


class TestTruncation:
    @pytest.mark.parametrize("model", [PARAMETRIC["stable"], PARAMETRIC["gauss_atoms"], HEAVY],
                             ids=["stable", "atoms", "heavy"])
    @pytest.mark.parametrize("z", [1.0, 2.5])
    def test_reconstruction(self, model, z):
        tm = truncate_measure(model, z, Grid.from_xmax(8.0, 1 / 64))
        for beta in np.linspace(1.0, 20.0, 8):
            psi = float(model.psi(beta))
            assert abs(psi - tm.psi(beta)) < 1e-6 * (1 + abs(psi))

    def test_grid_parts_match_quadrature(self):
        model = PARAMETRIC["stable"]
        errors = []
        for h in (1 / 256, 1 / 1024):
            tm = truncate_measure(model, 2.0, Grid.from_xmax(8.0, h))
            grid_value = laplace_transform(tm.small_integrated_tail, 5.0)[0]
            errors.append(abs(grid_value / tm.laplace_small(5.0) - 1))
        assert errors[1] < 1e-3
        # first order in h for the singular tabulation
        assert errors[0] / errors[1] > 3.5

    def test_mass_of_large_part(self):
        model = PARAMETRIC["gauss_atoms"]
        tm = truncate_measure(model, 1.0, Grid.from_xmax(4.0, 1 / 32))
        # only the atom at 2 lies beyond z = 1
        assert tm.mass == pytest.approx(2.0 * 0.7)
        assert tm.large_part.total_mass() == pytest.approx(1.4)

    def test_z_below_one_rejected(self):
        with pytest.raises(ValueError):
            truncate_measure(PARAMETRIC["stable"], 0.5, Grid.from_xmax(4.0, 1 / 32))


class TestFingerprint:
    def test_stable_and_distinct(self):
        a = LevyModel(1.0, "c", 1.0).fingerprint()
        assert a == LevyModel(1.0, "c", 1.0).fingerprint()
        assert a != LevyModel(1.0, "c", 2.0).fingerprint()
        assert len(a) == 16
