import math

import numpy as np
import pytest

from wolffpot.capacity import (
    RadialTent,
    SamplingSpec,
    WeakAinfParams,
    ball_condition_constant,
    capacity_ball_scaling,
    exp_integrability_ratio,
    multiplier_check,
    weak_ainf_check,
    weighted_exp_integrability,
)
from wolffpot.geometry import Ball, unit_ball_volume
from wolffpot.measures import dirac, power_weight, uniform_ball, zero_measure


class TestBallCondition:
    def test_lebesgue_unit_ball(self):
        sig = uniform_ball([0.0, 0.0, 0.0], 1.0, density=1.0)
        rep = ball_condition_constant(sig, 2.0, SamplingSpec(r_min=1e-3, r_max=8.0, per_octave=16))
        assert rep.constant == pytest.approx(4.0 * math.pi / 3.0, rel=1e-3)
        assert not rep.divergent

    def test_witness_requery(self):
        sig = uniform_ball([0.0, 0.0, 0.0], 1.0, density=1.0)
        rep = ball_condition_constant(sig, 2.0)
        c, r = rep.witness
        again = sig.ball_mass(np.asarray(c), r) / r ** (3 - 2.0)
        assert again == pytest.approx(rep.constant, rel=1e-12)

    def test_dirac_flags_divergence(self):
        rep = ball_condition_constant(dirac([0.0, 0.0, 0.0]), 2.0)
        assert rep.divergent

    def test_homogeneity_exact(self):
        sig = uniform_ball([0.0, 0.0, 0.0], 1.0, density=1.0)
        spec = SamplingSpec()
        base = ball_condition_constant(sig, 2.0, spec).constant
        scaled = ball_condition_constant(sig.scaled(3.5), 2.0, spec).constant
        assert scaled == pytest.approx(3.5 * base, rel=1e-12)

    def test_threshold_pass_flag(self, eps_ball_sigma):
        rep = ball_condition_constant(eps_ball_sigma, 2.0, threshold=0.05 * 1.01)
        assert rep.passed


class TestCapacityScaling:
    def test_values(self):
        assert capacity_ball_scaling(2.0, 3, 1.0) == 1.0
        assert capacity_ball_scaling(2.0, 3, 2.0) == 2.0
        assert capacity_ball_scaling(3.0, 5, 0.5) == pytest.approx(0.25)

    def test_rejects_bad_p(self):
        with pytest.raises(ValueError):
            capacity_ball_scaling(3.0, 3, 1.0)


class TestMultiplier:
    def test_zero_measure(self):
        rep = multiplier_check(zero_measure(3), 2.0, [RadialTent((0.0, 0.0, 0.0), 1.0, 2.0)])
        assert rep.max_ratio == 0.0

    def test_closed_form_tent(self):
        # sigma = Lebesgue on the unit ball, tent = 1 on B(0,1) falling to 0 at 2
        sig = uniform_ball([0.0, 0.0, 0.0], 1.0, density=1.0)
        tent = RadialTent((0.0, 0.0, 0.0), 1.0, 2.0)
        p = 2.0
        rep = multiplier_check(sig, p, [tent])
        mass_integral = 4.0 * math.pi / 3.0  # h = 1 on the support
        energy = unit_ball_volume(3) * (2.0**3 - 1.0)  # |grad h| = 1 on the annulus
        expected = mass_integral / ((p / (p - 1.0)) ** p * energy)
        assert rep.ratios[0] == pytest.approx(expected, rel=1e-8)

    def test_partial_tent_quadrature(self):
        # tent ramp crosses the density support: exercised Gauss path
        sig = uniform_ball([0.0, 0.0, 0.0], 1.0, density=2.0)
        tent = RadialTent((0.0, 0.0, 0.0), 0.3, 0.8)
        rep = multiplier_check(sig, 1.8, [tent])
        # reference by dense radial Riemann sum
        s = np.linspace(0, 1, 200001)
        h = np.clip((0.8 - s) / 0.5, 0, 1)
        h[s <= 0.3] = 1.0
        ref = np.trapezoid(h**1.8 * 2.0 * 4 * math.pi * s**2, s)
        energy = (0.5) ** (-1.8) * unit_ball_volume(3) * (0.8**3 - 0.3**3)
        assert rep.ratios[0] == pytest.approx(ref / ((1.8 / 0.8) ** 1.8 * energy), rel=1e-6)

    def test_cross_check_with_ball_condition(self, eps_ball_sigma):
        from wolffpot import baselines

        tents = [RadialTent((0.0, 0.0, 0.0), a, 2 * a) for a in (0.25, 0.5, 1.0)]
        rep = multiplier_check(eps_ball_sigma, 2.0, tents)
        ball = ball_condition_constant(eps_ball_sigma, 2.0).constant
        factor = baselines.get("multiplier_vs_ball_factor")
        assert factor is not None, "run scripts/calibrate_baselines.py first"
        assert rep.max_ratio <= ball * factor


class TestExpIntegrability:
    def test_beta_zero_is_one(self, eps_ball_sigma):
        ball = Ball((0.0, 0.0, 0.0), 1.0)
        assert exp_integrability_ratio(eps_ball_sigma, ball, 0.0, 2.0) == 1.0

    def test_atom_in_region_diverges(self):
        sig = dirac([0.0, 0.0, 0.0])
        assert math.isinf(exp_integrability_ratio(sig, Ball((0.0, 0.0, 0.0), 1.0), 0.5, 2.0))

    def test_empty_region_rejected(self, eps_ball_sigma):
        with pytest.raises(ValueError):
            exp_integrability_ratio(eps_ball_sigma, Ball((9.0, 0.0, 0.0), 0.5), 0.1, 2.0)

    def test_increasing_in_beta(self, eps_ball_sigma):
        ball = Ball((0.0, 0.0, 0.0), 1.0)
        vals = [exp_integrability_ratio(eps_ball_sigma, ball, b, 2.0) for b in (0.0, 0.2, 0.5)]
        assert vals[0] < vals[1] < vals[2]
        assert all(math.isfinite(v) for v in vals)

    def test_refinement_stable(self):
        coarse = uniform_ball([0.0, 0.0, 0.0], 1.0, total=0.1, integration_cells=10)
        fine = uniform_ball([0.0, 0.0, 0.0], 1.0, total=0.1, integration_cells=20)
        ball = Ball((0.0, 0.0, 0.0), 1.0)
        a = exp_integrability_ratio(coarse, ball, 0.3, 2.0)
        b = exp_integrability_ratio(fine, ball, 0.3, 2.0)
        assert abs(a - b) / b < 0.02


class TestWeightedExp:
    def test_sigma_zero(self):
        om = uniform_ball([0.0, 0.0, 0.0], 2.0, density=1.0)
        v = weighted_exp_integrability(om, zero_measure(3), Ball((0.0, 0.0, 0.0), 1.0),
                                       q=1.0, c=0.5, p=2.0)
        assert v == 1.0

    def test_c_to_zero_monotone(self, eps_ball_sigma):
        om = uniform_ball([0.0, 0.0, 0.0], 2.0, density=1.0, integration_cells=10)
        ball = Ball((0.0, 0.0, 0.0), 1.0)
        vals = [weighted_exp_integrability(om, eps_ball_sigma, ball, 1.0, c, 2.0)
                for c in (0.4, 0.2, 0.05)]
        assert vals[0] >= vals[1] >= vals[2] >= 1.0

    def test_finite_small_c(self, eps_ball_sigma):
        om = uniform_ball([0.0, 0.0, 0.0], 2.0, density=1.0, integration_cells=10)
        v = weighted_exp_integrability(om, eps_ball_sigma, Ball((0.0, 0.0, 0.0), 1.0),
                                       q=1.0, c=0.3, p=2.0)
        assert math.isfinite(v) and v >= 1.0


class TestWeakAinf:
    def test_lebesgue_passes(self):
        om = uniform_ball([0.0, 0.0], 4.0, density=1.0)
        rep = weak_ainf_check(om, WeakAinfParams(c_w=2.0**2, theta=1.0), trials=60,
                              domain=Ball((0.0, 0.0), 2.0), seed=3)
        assert rep.passed

    def test_subset_equals_ball(self):
        om = uniform_ball([0.0, 0.0], 4.0, density=1.0)
        # E = B gives |E|_w / |2B|_w <= 1 <= C_w
        x = np.zeros(2)
        ratio = om.ball_mass(x, 1.0) / om.ball_mass(x, 2.0)
        assert ratio <= 1.0

    def test_power_weight_regression(self):
        from wolffpot import baselines

        om = power_weight([0.0, 0.0], 1.5, 8.0)
        frozen = baselines.get("weak_ainf_power_ratio")
        assert frozen is not None, "run scripts/calibrate_baselines.py first"
        rep = weak_ainf_check(om, WeakAinfParams(c_w=frozen * 1.05, theta=1.0), trials=80,
                              domain=Ball((0.0, 0.0), 2.0), seed=12)
        assert rep.passed

    def test_atomic_rejected(self):
        with pytest.raises(ValueError, match="weights"):
            weak_ainf_check(dirac([0.0, 0.0]), WeakAinfParams(1.0, 1.0), 5,
                            Ball((0.0, 0.0), 1.0))
