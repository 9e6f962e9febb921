"""Closed-form analytics: msd, joint densities, reversal, heat identity."""

import math

import numpy as np
import pytest
from scipy.special import ndtr

from hdp_lab import (
    SeedSpec,
    SkewCoefficients,
    heat_check_density,
    integrability_conditions,
    joint_density_BL,
    joint_density_YB,
    make_grid,
    msd,
    reversed_bridge_ensemble,
    reversed_pair_bridge,
    simulate_reversed_pair,
    skew_transition_sample,
)
from hdp_lab.analytics import (
    reversed_drift_reflected,
    reversed_drift_y,
    reversed_drift_z,
)
from hdp_lab.stats import ks_test


class TestMsd:
    def test_analytic_anchors(self):
        assert msd(0.0, 0.0, 1.0) == pytest.approx(1.0, abs=1e-12)
        assert msd(0.0, 1.0, 1.0) == pytest.approx(1.0 - 2.0 / math.pi, abs=1e-12)
        assert msd(0.5, 0.0, 1.0) == pytest.approx(0.1875, abs=1e-12)

    def test_even_in_theta(self):
        for alpha in (-0.5, 0.0, 0.5):
            assert msd(alpha, 0.6, 1.0) == pytest.approx(msd(alpha, -0.6, 1.0), rel=1e-12)

    def test_matches_exact_sampler(self):
        alpha, theta = 0.3, 0.4
        b = skew_transition_sample(theta, 0.0, 1.0, SeedSpec(71), size=50_000)
        x = np.sign(b) * np.abs((1.0 - alpha) * b) ** (1.0 / (1.0 - alpha))
        sample = np.var(x, ddof=1)
        assert abs(sample - msd(alpha, theta, 1.0)) < 4.0 * sample / math.sqrt(x.size) * 3.0


class TestJointDensities:
    def test_bl_formula_spot_value(self):
        theta, t, b, ell = 0.5, 1.0, 0.3, 0.2
        co = SkewCoefficients(theta)
        m = ell + abs(b)
        by_hand = 2.0 * co.beta(b) * m / math.sqrt(2.0 * math.pi) * math.exp(-m * m / 2.0)
        assert joint_density_BL(theta, t, 0.0, b, ell) == pytest.approx(by_hand, rel=1e-14)

    def test_bl_validation(self):
        with pytest.raises(ValueError, match="l must be positive"):
            joint_density_BL(0.5, 1.0, 0.0, 0.3, 0.0)
        with pytest.raises(ValueError, match="t must be positive"):
            joint_density_BL(0.5, 0.0, 0.0, 0.3, 0.1)

    def test_yb_vanishes_outside_wedge(self):
        co = SkewCoefficients(0.5)
        y = 0.8
        edge = co.r(y)
        assert joint_density_YB(0.5, 1.0, y, edge + 0.1) == 0.0
        assert joint_density_YB(0.5, 1.0, y, edge - 0.1) > 0.0

    def test_yb_mirror(self):
        for y, z in ((0.4, 0.1), (-0.7, -0.9), (1.2, 0.3)):
            assert joint_density_YB(0.6, 1.0, y, z) == pytest.approx(
                joint_density_YB(-0.6, 1.0, -y, -z), rel=1e-13
            )

    def test_yb_degenerate_theta_rejected(self):
        with pytest.raises(ValueError, match="theta = 0"):
            joint_density_YB(0.0, 1.0, 0.5, 0.1)


class TestReversedDrifts:
    def test_frozen_values(self):
        assert reversed_drift_y(0.5, 1.0, 0.5, 1.0, 0.0) == pytest.approx(
            -5.4074074074074066, rel=1e-13
        )
        assert reversed_drift_z(0.5, 1.0, 0.5, 1.0, 0.0) == pytest.approx(
            -4.055555555555555, rel=1e-13
        )
        assert reversed_drift_reflected(0.25, 0.8) == pytest.approx(3.2, rel=1e-13)

    def test_mirror_antisymmetry(self):
        for s, y, z in ((0.5, 0.7, -0.2), (0.2, -0.4, -0.9), (0.8, 1.1, 0.3)):
            assert reversed_drift_y(0.5, 1.0, s, y, z) == pytest.approx(
                -reversed_drift_y(-0.5, 1.0, s, -y, -z), rel=1e-12
            )


class TestEulerReversedPair:
    def test_shapes_endpoints_and_determinism(self):
        grid = make_grid(0.4, 200)
        y1, z1 = simulate_reversed_pair(0.5, 1.0, (1.3, 0.2), grid, SeedSpec(72))
        y2, z2 = simulate_reversed_pair(0.5, 1.0, (1.3, 0.2), grid, SeedSpec(72))
        assert y1.values[0] == 1.3 and z1.values[0] == 0.2
        np.testing.assert_array_equal(y1.values, y2.values)
        np.testing.assert_array_equal(z1.values, z2.values)


class TestBridgeReversal:
    def test_endpoints_are_exact(self):
        co = SkewCoefficients(0.5)
        grid = make_grid(1.0, 500)
        y, z = reversed_pair_bridge(0.5, 0.8, grid, SeedSpec(73))
        assert y.values[0] == pytest.approx(co.s(0.8), abs=1e-14)
        assert y.terminal == 0.0
        assert z.terminal == 0.0

    def test_driver_start_carries_accumulated_local_time(self):
        # z_0 = b - theta * total local time <= b, strictly when L_T > 0
        y, z = reversed_pair_bridge(0.5, 0.1, make_grid(1.0, 2000), SeedSpec(74))
        assert z.values[0] < 0.1

    def test_mirror(self):
        grid = make_grid(1.0, 300)
        y_p, z_p = reversed_pair_bridge(0.5, 0.6, grid, SeedSpec(75))
        y_m, z_m = reversed_pair_bridge(-0.5, -0.6, grid, SeedSpec(75))
        np.testing.assert_allclose(y_p.values, -y_m.values, atol=1e-12)
        np.testing.assert_allclose(z_p.values, -z_m.values, atol=1e-12)

    def test_full_skew_wrong_side_rejected(self):
        with pytest.raises(ValueError, match="unreachable"):
            reversed_pair_bridge(1.0, -0.5, make_grid(1.0, 100), SeedSpec(76))

    def test_ensemble_mid_capture_law(self):
        theta, horizon = 0.5, 1.0
        terminals = skew_transition_sample(theta, 0.0, horizon, SeedSpec(77), size=4000)
        grid = make_grid(horizon, 2000)
        y, z, ell = reversed_bridge_ensemble(theta, terminals, grid, SeedSpec(78), 1000)
        assert y.shape == z.shape == ell.shape == (4000,)
        _, p = ks_test(z, lambda v: ndtr(np.asarray(v) / math.sqrt(0.5)))
        assert p > 0.01
        # total boundary local time over [0, T] is half-normal: mean sqrt(2T/pi)
        target = math.sqrt(2.0 * horizon / math.pi)
        assert abs(np.mean(ell) - target) < 4.0 * np.std(ell) / math.sqrt(ell.size)


class TestHeatIdentity:
    def test_residual_small_at_interior_point(self):
        co = SkewCoefficients(0.3)
        y = 0.9
        z = co.r(y) - 0.7
        assert heat_check_density(0.3, 0.7, y, z, fd_step=2e-4) < 1e-4


class TestIntegrabilityFlags:
    def test_truth_table(self):
        flags = integrability_conditions(0.5)
        assert flags.ito_integrand_ok and flags.drift_lebesgue_ok and flags.drift_pv_ok
        flags = integrability_conditions(-0.5)
        assert flags.ito_integrand_ok and not flags.drift_lebesgue_ok and flags.drift_pv_ok

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            integrability_conditions(1.0)
