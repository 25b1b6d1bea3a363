import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from silforge.errors import (
    AllSitesOccupied,
    EmptyCurve,
    InsufficientData,
    NegativeRadius,
    SpecInvalid,
)
from silforge.yield_stats import (
    displacement_stats,
    estimate_lambda_from_occupancy,
    fit_rayleigh,
    plan_pulse_energy,
    poisson_pmf,
)

# Frozen oracles. Clopper-Pearson bounds were cross-checked by bisecting
# the binomial tail sums directly; the rest is closed-form arithmetic.
LAMBDA_21_OF_30 = 0.35667494393873245        # ln(30/21)
CI_LOW_21_OF_30 = 0.15940048485125327        # -ln(upper CP bound of 21/30)
CI_HIGH_21_OF_30 = 0.6811376672444215        # -ln(lower CP bound of 21/30)
MULTI_FRACTION = {                           # P(>1) / (P(1) + P(>1))
    0.05: 0.0247916753467053,
    0.1: 0.04916680552249556,
    0.35: 0.16481244807694126,
    1.0: 0.41802329313067355,
}
RAYLEIGH_SIGMA_3PT = 0.816496580927726       # sqrt((1+1+2) / (2*3))
RAYLEIGH_LL_3PT = -1.4370310853955341        # ln(2)/2 + 3*ln(3/2) - 3


class TestPoissonPmf:
    def test_lambda_point_one(self):
        out = poisson_pmf(0.1)
        assert out.p_zero == pytest.approx(0.9048374180359595, rel=1e-14)
        assert out.p_one == pytest.approx(0.09048374180359595, rel=1e-14)
        assert out.p_multi == pytest.approx(0.004678840160444522, rel=1e-12)

    def test_probabilities_sum_to_one(self):
        for lam in (0.0, 0.05, 0.35, 1.0, 7.5):
            out = poisson_pmf(lam)
            assert out.p_zero + out.p_one + out.p_multi == pytest.approx(1.0, abs=1e-14)

    def test_lambda_zero_is_all_empty(self):
        out = poisson_pmf(0.0)
        assert out == (1.0, 0.0, 0.0)

    def test_negative_lambda_rejected(self):
        with pytest.raises(SpecInvalid):
            poisson_pmf(-0.1)


class TestLambdaFromOccupancy:
    def test_nine_of_thirty_occupied(self):
        est = estimate_lambda_from_occupancy(30, 21)
        assert est.lam == pytest.approx(LAMBDA_21_OF_30, rel=1e-14)
        assert est.ci_low == pytest.approx(CI_LOW_21_OF_30, rel=1e-10)
        assert est.ci_high == pytest.approx(CI_HIGH_21_OF_30, rel=1e-10)
        assert (est.n_sites, est.n_empty) == (30, 21)

    def test_all_empty_gives_zero_with_upper_bound(self):
        est = estimate_lambda_from_occupancy(30, 30)
        assert est.lam == 0.0
        assert est.ci_low == 0.0
        assert est.ci_high > 0.1

    def test_all_occupied_raises(self):
        with pytest.raises(AllSitesOccupied):
            estimate_lambda_from_occupancy(30, 0)

    def test_invalid_counts_rejected(self):
        with pytest.raises(SpecInvalid):
            estimate_lambda_from_occupancy(0, 0)
        with pytest.raises(SpecInvalid):
            estimate_lambda_from_occupancy(30, 31)

    def test_wider_confidence_widens_interval(self):
        narrow = estimate_lambda_from_occupancy(30, 21, confidence=0.68)
        wide = estimate_lambda_from_occupancy(30, 21, confidence=0.99)
        assert wide.ci_low < narrow.ci_low < narrow.ci_high < wide.ci_high

    @given(st.integers(min_value=1, max_value=199))
    def test_bounds_bracket_the_estimate(self, n_empty):
        est = estimate_lambda_from_occupancy(200, n_empty)
        assert est.ci_low <= est.lam <= est.ci_high


class TestPlanPulseEnergy:
    CURVE = [(1.0, 0.05), (2.0, 0.1), (3.0, 0.35), (4.0, 1.0)]

    def test_unconstrained_picks_lambda_one(self):
        # P(1) = lam * exp(-lam) peaks at lam = 1
        plan = plan_pulse_energy(self.CURVE, 1.0)
        assert plan.energy == 4.0
        assert plan.lam == 1.0
        assert plan.constraint_met

    def test_multi_fractions_match_closed_form(self):
        plan = plan_pulse_energy(self.CURVE, 1.0)
        assert plan.multi_fraction == pytest.approx(MULTI_FRACTION[1.0], rel=1e-12)

    def test_five_percent_cap_picks_point_one(self):
        plan = plan_pulse_energy(self.CURVE, 0.05)
        assert plan.lam == 0.1
        assert plan.energy == 2.0
        assert plan.constraint_met
        assert plan.multi_fraction == pytest.approx(MULTI_FRACTION[0.1], rel=1e-12)

    def test_unsatisfiable_cap_returns_least_bad(self):
        plan = plan_pulse_energy([(1.0, 0.35), (2.0, 1.0)], 0.01)
        assert not plan.constraint_met
        assert plan.lam == 0.35  # smaller multi fraction of the two

    def test_accepts_ndarray_curve(self):
        curve = np.asarray(self.CURVE)
        assert plan_pulse_energy(curve, 0.05).lam == 0.1

    def test_empty_curve_rejected(self):
        with pytest.raises(EmptyCurve):
            plan_pulse_energy([], 0.05)

    def test_cap_outside_unit_interval_rejected(self):
        with pytest.raises(SpecInvalid):
            plan_pulse_energy(self.CURVE, 0.0)
        with pytest.raises(SpecInvalid):
            plan_pulse_energy(self.CURVE, 1.5)

    def test_lambda_zero_has_no_multi_risk(self):
        plan = plan_pulse_energy([(1.0, 0.0)], 0.05)
        assert plan.multi_fraction == 0.0
        assert plan.constraint_met


class TestDisplacementStats:
    def test_moments_match_hand_values(self):
        pts = [(1.0, 0.0), (3.0, 4.0), (5.0, 2.0)]
        stats = displacement_stats(pts)
        assert stats.mean == pytest.approx((3.0, 2.0))
        assert stats.std[0] == pytest.approx(2.0)       # ddof=1
        assert stats.std[1] == pytest.approx(2.0)

    def test_radial_measured_from_collective_mean(self):
        stats = displacement_stats([(1.0, 0.0), (-1.0, 0.0)])
        assert stats.mean == pytest.approx((0.0, 0.0))
        assert np.allclose(stats.radial, [1.0, 1.0])

    def test_single_point_rejected(self):
        with pytest.raises(InsufficientData):
            displacement_stats([(1.0, 2.0)])


class TestFitRayleigh:
    def test_three_point_oracle(self):
        fit = fit_rayleigh([1.0, 1.0, math.sqrt(2.0)])
        assert fit.sigma == pytest.approx(RAYLEIGH_SIGMA_3PT, rel=1e-14)
        assert fit.n_samples == 3
        assert fit.log_likelihood == pytest.approx(RAYLEIGH_LL_3PT, rel=1e-12)

    def test_recovers_scale_of_large_sample(self):
        rng = np.random.default_rng(17)
        r = rng.rayleigh(0.14, 4000)
        fit = fit_rayleigh(r)
        assert fit.sigma == pytest.approx(0.14, abs=0.005)

    def test_negative_radius_rejected(self):
        with pytest.raises(NegativeRadius):
            fit_rayleigh([0.5, -0.1])

    def test_all_zero_rejected(self):
        with pytest.raises(InsufficientData):
            fit_rayleigh([0.0, 0.0, 0.0])

    def test_too_few_samples_rejected(self):
        with pytest.raises(InsufficientData):
            fit_rayleigh([0.5])

    @given(st.floats(min_value=0.1, max_value=10.0))
    def test_scale_equivariance(self, c):
        base = np.array([0.2, 0.5, 0.9, 1.4])
        assert fit_rayleigh(c * base).sigma == pytest.approx(
            c * fit_rayleigh(base).sigma, rel=1e-12
        )
