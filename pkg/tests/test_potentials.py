import math

import numpy as np
import pytest

from wolffpot.measures import PointMasses, dirac, power_weight, uniform_ball, zero_measure
from wolffpot.oracle import brute_force_riesz, brute_force_wolff
from wolffpot.potentials import (
    PotentialParams,
    dirac_riesz_closed_form,
    dirac_wolff_closed_form,
    local_ball_potential,
    riesz,
    riesz_report,
    tail_difference,
    wolff,
    wolff_report,
)
from wolffpot.quadrature import QuadratureSpec

from conftest import scaled_copy


class TestParams:
    def test_quasilinear_mapping(self):
        par = PotentialParams.quasilinear(3, 2.0)
        assert (par.alpha, par.beta, par.s) == (2.0, 1.0, 2.0)

    def test_invalid_orders_rejected(self):
        with pytest.raises(ValueError):
            PotentialParams(n=3, alpha=3.5, beta=1.0, s=2.0)
        with pytest.raises(ValueError):
            PotentialParams(n=3, alpha=2.0, beta=2.0, s=2.0)
        with pytest.raises(ValueError):
            PotentialParams(n=3, alpha=2.0, beta=1.0, s=0.9)


class TestClosedForms:
    def test_riesz_dirac(self):
        mu = dirac([0.0, 0.0, 0.0])
        x = np.array([0.5, 0.0, 0.0])
        assert riesz(mu, x, 2.0) == pytest.approx(2.0, rel=1e-12)

    def test_wolff_dirac_examples(self):
        mu = dirac([0.0, 0.0, 0.0])
        x = np.array([0.5, 0.0, 0.0])
        assert wolff(mu, x, 1.0, 2.0) == pytest.approx(2.0, rel=1e-12)

    def test_wolff_dirac_random(self, rng):
        for p, n in [(2.0, 3), (3.0, 5), (1.5, 3)]:
            for _ in range(5):
                a = rng.uniform(0.2, 3.0)
                x0 = rng.uniform(-1, 1, n)
                mu = dirac(x0, a)
                x = rng.uniform(-2, 2, n)
                d = np.linalg.norm(x - x0)
                if d < 1e-3:
                    continue
                expected = dirac_wolff_closed_form(a, d, p, n)
                assert wolff(mu, x, 1.0, p) == pytest.approx(expected, rel=1e-9)

    def test_atom_sentinel(self):
        mu = dirac([0.0, 0.0, 0.0])
        assert math.isinf(wolff(mu, np.zeros(3), 1.0, 2.0))
        assert math.isinf(riesz(mu, np.zeros(3), 2.0))

    def test_truncation_below_support(self):
        mu = dirac([0.0, 0.0, 0.0])
        assert wolff(mu, np.array([1.0, 0, 0]), 1.0, 2.0, r_trunc=0.5) == 0.0

    def test_lebesgue_ball_truncated(self):
        mu = uniform_ball([0.0, 0.0, 0.0], 1.0, density=1.0)
        assert wolff(mu, np.zeros(3), 1.0, 2.0, r_trunc=1.0) == pytest.approx(
            2.0 * math.pi / 3.0, rel=1e-4
        )

    def test_hessian_preset_coincides_with_p2(self):
        mu = dirac([0.0, 0.0, 0.0])
        x = np.array([0.5, 0.0, 0.0])
        # k=1, n=3: (beta, s) = (1, 2), same as quasilinear p=2
        assert wolff(mu, x, 1.0, 2.0) == wolff(mu, x, 2.0 / 2.0, 2.0)


class TestQuadratureBehaviour:
    def test_dirac_insensitive_to_resolution(self, rng):
        mu = PointMasses(rng.uniform(-1, 1, (5, 3)), rng.uniform(0.1, 1.0, 5))
        x = rng.uniform(-2, 2, 3)
        base = wolff(mu, x, 1.0, 2.0, quad=QuadratureSpec(per_octave=32))
        fine = wolff(mu, x, 1.0, 2.0, quad=QuadratureSpec(per_octave=64))
        assert fine == pytest.approx(base, rel=1e-6)

    def test_monotone_in_truncation(self, rng):
        mu = uniform_ball([0.0, 0.0, 0.0], 1.0, total=1.0)
        x = rng.uniform(-1, 1, 3)
        vals = [wolff(mu, x, 1.0, 2.0, r_trunc=r) for r in [0.5, 1.0, 2.0, math.inf]]
        assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))

    def test_monotone_in_measure(self, rng):
        base = uniform_ball([0.0, 0.0, 0.0], 1.0, total=1.0)
        for _ in range(10):
            x = rng.uniform(-1.5, 1.5, 3)
            extra = PointMasses(rng.uniform(-1, 1, (3, 3)), rng.uniform(0.1, 0.5, 3))
            both = PointMasses(
                np.vstack([base.decomposition()[0], extra.points]),
                np.concatenate([base.decomposition()[1], extra.masses]),
            )
            small = PointMasses(*base.decomposition())
            if both.atom_mass_at(x) > 0:
                continue
            assert wolff(small, x, 1.0, 2.0) <= wolff(both, x, 1.0, 2.0) + 1e-10

    def test_divergence_flag_unbounded(self):
        # density ~ 1 out to infinity: potential diverges, flagged not guessed
        mu = power_weight([0.0, 0.0, 0.0], 0.0, math.inf)
        rep = wolff_report(mu, np.array([0.5, 0, 0]), 1.0, 2.0)
        assert "tail-divergent" in rep.flags or "unbounded-support" in rep.flags

    def test_brute_force_brackets_value(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 4))
            p = float(rng.uniform(1.3, min(n - 0.05, 2.8)))
            kind = rng.integers(0, 3)
            if kind == 0:
                mu = PointMasses(rng.uniform(-1, 1, (4, n)), rng.uniform(0.1, 1.0, 4))
            elif kind == 1:
                mu = uniform_ball([0.0] * n, rng.uniform(0.5, 1.5), total=rng.uniform(0.2, 2.0))
            else:
                mu = power_weight([0.0] * n, rng.uniform(-0.5, 1.0), rng.uniform(0.5, 1.5))
            x = rng.uniform(-2, 2, n)
            if mu.atom_mass_at(x) > 0:
                continue
            val = wolff(mu, x, 1.0, p)
            lo, hi = brute_force_wolff(mu, x, 1.0, p)
            width = hi - lo
            assert lo - 1e-5 * max(1, abs(val)) - width <= val <= hi + 1e-5 * max(1, abs(val)) + width
            vr = riesz(mu, x, p)
            lo2, hi2 = brute_force_riesz(mu, x, p)
            width2 = hi2 - lo2
            assert lo2 - 1e-5 * max(1, abs(vr)) - width2 <= vr <= hi2 + 1e-5 * max(1, abs(vr)) + width2

    def test_dirac_brackets_tight(self, rng):
        mu = dirac([0.3, -0.2, 0.1], 0.7)
        x = np.array([1.0, 1.0, 0.0])
        lo, hi = brute_force_wolff(mu, x, 1.0, 2.0)
        assert hi - lo < 1e-8
        d = np.linalg.norm(x - np.array([0.3, -0.2, 0.1]))
        assert lo <= dirac_wolff_closed_form(0.7, d, 2.0, 3) <= hi


class TestLocalPotential:
    def test_zero_measure(self):
        sig = zero_measure(3)
        for p in (1.5, 2.0, 2.5):
            assert local_ball_potential(sig, np.zeros(3), 1.0, np.array([0.1, 0, 0]), p) == 0.0

    def test_atom_at_eval_point_diverges(self):
        sig = dirac([0.0, 0.0, 0.0])
        for p in (1.5, 2.5):
            assert math.isinf(local_ball_potential(sig, np.array([0.2, 0, 0]), 1.0, np.zeros(3), p))

    def test_branch_coincidence_at_p2(self, rng):
        sig = uniform_ball([0.0, 0.0, 0.0], 1.0, total=0.05)
        for _ in range(10):
            x = rng.uniform(-1, 1, 3)
            r = rng.uniform(0.2, 2.0)
            lo_branch = local_ball_potential(sig, x, r, np.zeros(3), 2.0, branch="low")
            hi_branch = local_ball_potential(sig, x, r, np.zeros(3), 2.0, branch="high")
            assert hi_branch == pytest.approx(lo_branch, rel=1e-12)

    def test_branch_guards(self):
        sig = uniform_ball([0.0, 0.0, 0.0], 1.0, total=0.05)
        with pytest.raises(ValueError):
            local_ball_potential(sig, np.zeros(3), 1.0, np.zeros(3), 2.5, branch="low")
        with pytest.raises(ValueError):
            local_ball_potential(sig, np.zeros(3), 1.0, np.zeros(3), 1.5, branch="high")

    def test_dominated_by_continuous_potentials(self, eps_ball_sigma, rng):
        """The window potential is controlled by the truncated continuous one
        plus a constant; the empirical constant is reported and sane."""
        sig = eps_ball_sigma
        worst = 0.0
        for _ in range(20):
            x = rng.uniform(-0.8, 0.8, 3)
            r = rng.uniform(0.3, 1.5)
            y = rng.uniform(-0.8, 0.8, 3)
            from wolffpot.geometry import Ball
            from wolffpot.measures import restrict

            window = restrict(sig, Ball(tuple(x), r))
            for p in (1.7, 2.4):
                v = local_ball_potential(sig, x, r, y, p)
                if p > 2:
                    cont = wolff(window, y, 1.0, p, r_trunc=r)
                else:
                    cont = riesz(window, y, p, r_trunc=r)
                worst = max(worst, v / (cont + 1.0))
        assert worst < 10.0


class TestTailDifference:
    def test_zero_measure(self):
        sig = zero_measure(3)
        assert tail_difference(sig, np.zeros(3), np.zeros(3), 1.0, 1.0, 2.0) == 0.0

    def test_same_point_exact_zero(self, eps_ball_sigma):
        x = np.array([0.3, 0.1, 0.0])
        assert tail_difference(eps_ball_sigma, x, x.copy(), 0.5, 1.0, 2.0) == 0.0

    def test_outside_ball_rejected(self, eps_ball_sigma):
        with pytest.raises(ValueError):
            tail_difference(eps_ball_sigma, np.zeros(3), np.array([1.0, 0, 0]), 0.5, 1.0, 2.0)

    def test_scale_invariance(self, rng):
        alpha, s, n = 1.0, 2.0, 3
        sig = uniform_ball([0.1, 0.0, 0.2], 1.0, total=0.07)
        for lam in (0.5, 2.0, 7.5):
            nu = scaled_copy(sig, lam, alpha * s)
            for _ in range(5):
                x = rng.uniform(-1, 1, 3)
                t = rng.uniform(0.2, 1.0)
                y = x + rng.normal(size=3) * 0.1
                if np.linalg.norm(y - x) > t:
                    y = x + (y - x) * 0.5 * t / np.linalg.norm(y - x)
                base = tail_difference(sig, x, y, t, alpha, s)
                scaled = tail_difference(nu, lam * x, lam * y, lam * t, alpha, s)
                assert scaled == pytest.approx(base, rel=1e-6, abs=1e-9)

    def test_finite_with_atoms_outside(self):
        sig = PointMasses([[2.0, 0.0, 0.0]], [0.5])
        v = tail_difference(sig, np.zeros(3), np.array([0.2, 0, 0]), 0.5, 1.0, 2.0)
        assert math.isfinite(v)


def test_riesz_rejects_bad_alpha():
    mu = dirac([0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        riesz(mu, np.array([1.0, 0, 0]), 3.5)


def test_report_carries_measure_error():
    # grid measures report their boundary-cell error through the quadrature
    gen = np.random.default_rng(1)
    from wolffpot.measures import GridDensity

    g = GridDensity([-1, -1, -1], [1, 1, 1], gen.uniform(0, 0.01, (6, 6, 6)))
    rep = wolff_report(g, np.array([2.0, 0.0, 0.0]), 1.0, 2.0)
    assert rep.error > 0
    lo, hi = brute_force_wolff(g, np.array([2.0, 0.0, 0.0]), 1.0, 2.0)
    assert lo - rep.error <= rep.value <= hi + rep.error
