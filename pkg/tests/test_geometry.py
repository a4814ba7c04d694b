import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wolffpot.geometry import (
    Ball,
    Box,
    HalfSpace,
    ball_intersection_volume,
    cap_area_fraction,
    cap_volume,
    sphere_in_ball_fraction,
    sphere_surface,
    unit_ball_volume,
)


def test_unit_ball_volumes():
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)
    assert sphere_surface(3) == pytest.approx(4.0 * math.pi)


def test_cap_volume_closed_forms():
    R, t = 1.3, 0.4
    h = R - t
    assert cap_volume(3, R, t) == pytest.approx(math.pi * h * h * (3 * R - h) / 3.0, rel=1e-12)
    seg = R * R * math.acos(t / R) - t * math.sqrt(R * R - t * t)
    assert cap_volume(2, R, t) == pytest.approx(seg, rel=1e-12)
    # complement for negative offsets
    assert cap_volume(3, R, -t) == pytest.approx(
        unit_ball_volume(3) * R**3 - cap_volume(3, R, t), rel=1e-12
    )


@given(st.floats(-0.99, 0.99), st.integers(2, 6))
def test_cap_fraction_complement(c, n):
    assert cap_area_fraction(n, c) + cap_area_fraction(n, -c) == pytest.approx(1.0, abs=1e-12)


def test_cap_fraction_closed_forms():
    theta = 0.7
    assert cap_area_fraction(2, math.cos(theta)) == pytest.approx(theta / math.pi, rel=1e-12)
    assert cap_area_fraction(3, math.cos(theta)) == pytest.approx((1 - math.cos(theta)) / 2, rel=1e-12)


def test_lens_limits():
    # disjoint, nested, symmetric
    assert ball_intersection_volume(3, 3.0, 1.0, 1.0) == 0.0
    assert ball_intersection_volume(3, 0.1, 2.0, 0.5) == pytest.approx(
        unit_ball_volume(3) * 0.5**3, rel=1e-12
    )
    sym = ball_intersection_volume(3, 1.0, 1.0, 1.0)
    assert sym == pytest.approx(2 * float(cap_volume(3, 1.0, 0.5)), rel=1e-12)


def test_lens_monte_carlo():
    gen = np.random.default_rng(3)
    pts = gen.uniform(-1.5, 1.5, size=(200000, 3))
    a = np.zeros(3)
    b = np.array([0.8, 0.0, 0.0])
    inside = (np.linalg.norm(pts - a, axis=1) <= 1.0) & (np.linalg.norm(pts - b, axis=1) <= 0.7)
    mc = inside.mean() * 3.0**3
    assert ball_intersection_volume(3, 0.8, 1.0, 0.7) == pytest.approx(mc, rel=0.02)


def test_sphere_fraction_consistency():
    # integrating the shell fractions recovers the lens volume
    n, d, r = 3, 0.8, 0.7
    s = np.linspace(1e-6, 1.0, 4000)
    frac = sphere_in_ball_fraction(n, s, d, r)
    shell = sphere_surface(n) * s ** (n - 1)
    integral = np.trapezoid(frac * shell, s)
    assert integral == pytest.approx(float(ball_intersection_volume(n, d, 1.0, r)), rel=1e-4)


def test_region_classification():
    ball = Ball((0.0, 0.0), 1.0)
    assert ball.classify_box(np.array([-0.1, -0.1]), np.array([0.1, 0.1])) == 1
    assert ball.classify_box(np.array([2.0, 2.0]), np.array([3.0, 3.0])) == -1
    assert ball.classify_box(np.array([0.5, 0.5]), np.array([1.5, 1.5])) == 0
    box = Box((0.0, 0.0), (1.0, 1.0))
    assert box.contains(np.array([[0.5, 0.5], [1.0, 0.5]])).tolist() == [True, False]
    hs = HalfSpace((1.0, 0.0), 0.0)
    assert hs.classify_box(np.array([-2.0, 0.0]), np.array([-1.0, 1.0])) == 1
    assert hs.classify_box(np.array([1.0, 0.0]), np.array([2.0, 1.0])) == -1
    assert hs.classify_box(np.array([-1.0, 0.0]), np.array([1.0, 1.0])) == 0
