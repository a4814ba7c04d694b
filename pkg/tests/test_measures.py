import math

import numpy as np
import pytest

from wolffpot.geometry import Ball, Box, HalfSpace, unit_ball_volume
from wolffpot.measures import (
    ConfigError,
    GridDensity,
    PointMasses,
    RadialProfile,
    dirac,
    grid_from_function,
    measure_from_config,
    power_weight,
    restrict,
    uniform_ball,
    zero_measure,
)


class TestBallMass:
    def test_dirac_inside(self):
        mu = dirac([0.0, 0.0, 0.0])
        assert mu.ball_mass(np.zeros(3), 0.1) == 1.0

    def test_dirac_outside(self):
        mu = dirac([0.0, 0.0, 0.0])
        assert mu.ball_mass(np.array([1.0, 0.0, 0.0]), 0.5) == 0.0

    def test_boundary_atom_counts(self):
        mu = dirac([1.0, 0.0, 0.0])
        assert mu.ball_mass(np.zeros(3), 1.0) == 1.0

    def test_lebesgue_ball(self):
        mu = uniform_ball([0.0, 0.0, 0.0], 1.0, density=1.0)
        expected = 4.0 * math.pi / 3.0 * 0.125
        assert mu.ball_mass(np.zeros(3), 0.5) == pytest.approx(expected, rel=1e-12)

    def test_offcenter_uniform_closed_form(self):
        mu = uniform_ball([0.0, 0.0, 0.0], 1.0, density=2.0)
        from wolffpot.geometry import ball_intersection_volume

        x = np.array([0.8, 0.0, 0.0])
        v, err = mu.ball_mass_with_error(x, 0.6)
        assert err == 0.0
        assert v == pytest.approx(2.0 * float(ball_intersection_volume(3, 0.8, 1.0, 0.6)), rel=1e-12)

    def test_offcenter_power_profile_vs_grid(self):
        mu = power_weight([0.0, 0.0], -0.5, 1.0)
        ref = grid_from_function([-1, -1], [1, 1], (160, 160),
                                 lambda z: np.linalg.norm(z) ** -0.5 if np.linalg.norm(z) > 1e-9 else 0.0,
                                 subsamples=3)
        x = np.array([0.4, 0.3])
        v, err = mu.ball_mass_with_error(x, 0.5)
        approx = ref.ball_mass(x, 0.5)
        assert v == pytest.approx(approx, rel=0.02)
        assert err < 1e-3 * max(v, 1.0)

    def test_grid_uniform_quarter(self):
        masses = np.full((8, 8), 1.0 / 64)
        g = GridDensity([0.0, 0.0], [1.0, 1.0], masses)
        assert g.box_mass(np.zeros(2), np.array([0.5, 0.5])) == pytest.approx(0.25, rel=1e-12)

    def test_dimension_mismatch(self):
        mu = dirac([0.0, 0.0, 0.0])
        with pytest.raises(ValueError, match="dimension"):
            mu.ball_mass(np.zeros(2), 1.0)

    def test_monotone_in_radius(self, rng):
        measures = [
            dirac([0.2, -0.1, 0.4]),
            uniform_ball([0.1, 0.0, 0.0], 1.2, total=2.0),
            GridDensity([-1, -1, -1], [1, 1, 1], rng.uniform(0, 1, size=(6, 6, 6))),
        ]
        for mu in measures:
            for _ in range(333):
                x = rng.uniform(-2, 2, 3)
                r1, r2 = np.sort(rng.uniform(0, 3, 2))
                assert mu.ball_mass(x, r1) <= mu.ball_mass(x, r2) + 1e-12

    def test_ball_mass_approaches_total(self):
        mu = uniform_ball([0.3, 0.2, 0.1], 0.7, total=1.5)
        assert mu.ball_mass(np.zeros(3), 50.0) == pytest.approx(mu.total_mass(), rel=1e-12)


class TestRestrict:
    def test_dirac_kept(self):
        mu = dirac([0.0, 0.0, 0.0])
        nu = restrict(mu, Ball((0.0, 0.0, 0.0), 1.0))
        assert nu.total_mass() == 1.0

    def test_dirac_dropped(self):
        mu = dirac([0.0, 0.0, 0.0])
        nu = restrict(mu, Ball((3.0, 0.0, 0.0), 1.0))
        assert nu.total_mass() == 0.0

    def test_lebesgue_clip(self):
        mu = uniform_ball([0.0, 0.0, 0.0], 2.0, density=1.0)
        nu = restrict(mu, Ball((0.0, 0.0, 0.0), 1.0))
        assert nu.total_mass() == pytest.approx(4.0 * math.pi / 3.0, rel=1e-10)

    def test_restriction_dominated(self, rng):
        mu = uniform_ball([0.0, 0.0, 0.0], 1.5, total=3.0)
        nu = restrict(mu, Ball((0.5, 0.0, 0.0), 0.8))
        for _ in range(50):
            x = rng.uniform(-1, 1, 3)
            r = rng.uniform(0.05, 2.0)
            assert nu.ball_mass(x, r) <= mu.ball_mass(x, r) + 1e-9

    def test_double_restrict_matches_intersection(self, rng):
        mu = GridDensity([-1, -1], [1, 1], np.full((24, 24), 1.0 / 576))
        b1 = Ball((0.2, 0.0), 0.7)
        b2 = Ball((-0.1, 0.3), 0.6)
        twice = restrict(restrict(mu, b1), b2)
        for _ in range(25):
            x = rng.uniform(-1, 1, 2)
            r = rng.uniform(0.1, 1.0)
            direct, err = mu.region_mass([Ball(tuple(x), r), b1, b2])
            assert twice.ball_mass(x, r) == pytest.approx(direct, abs=4 * err + 1e-9)

    def test_halfspace_restriction(self):
        mu = PointMasses([[0.5, 0.0], [-0.5, 0.0]], [1.0, 2.0])
        nu = restrict(mu, HalfSpace((1.0, 0.0), 0.0))
        assert nu.total_mass() == 2.0


class TestCubeMass:
    def test_atom_in_unit_cube(self):
        from wolffpot.dyadic import DyadicCube, cube_mass

        mu = dirac([0.1, 0.1, 0.1])
        assert cube_mass(mu, DyadicCube(0, (0, 0, 0))) == 1.0
        assert cube_mass(mu, DyadicCube(0, (1, 0, 0))) == 0.0

    def test_face_atom_belongs_to_upper_cube(self):
        from wolffpot.dyadic import DyadicCube, cube_mass

        mu = dirac([0.5, 0.25])
        assert cube_mass(mu, DyadicCube(-1, (1, 0))) == 1.0
        assert cube_mass(mu, DyadicCube(-1, (0, 0))) == 0.0

    def test_children_partition_exact(self, rng):
        from wolffpot.dyadic import DyadicCube, cube_mass

        mu = PointMasses(rng.uniform(-1, 1, size=(40, 2)), rng.uniform(0, 1, 40))
        for _ in range(20):
            cube = DyadicCube(int(rng.integers(-2, 2)), tuple(rng.integers(-2, 2, 2)))
            total = sum(cube_mass(mu, ch) for ch in cube.children())
            assert total == pytest.approx(cube_mass(mu, cube), abs=1e-10)

    def test_children_partition_grid(self, rng):
        from wolffpot.dyadic import DyadicCube, cube_mass

        g = GridDensity([-1, -1], [1, 1], rng.uniform(0, 1, size=(10, 10)))
        cube = DyadicCube(-1, (0, 0))
        total = sum(cube_mass(g, ch) for ch in cube.children())
        assert total == pytest.approx(cube_mass(g, cube), rel=1e-10)


class TestDecomposition:
    def test_profile_total_preserved(self):
        mu = uniform_ball([0.0, 0.0, 0.0], 1.0, total=2.5)
        _, w = mu.decomposition()
        assert w.sum() == pytest.approx(2.5, rel=1e-12)

    def test_reweighted_atoms_exact(self):
        mu = PointMasses([[0.0, 0.0], [1.0, 0.0]], [1.0, 2.0])
        nu = mu.reweighted(np.array([2.0, 0.5]))
        assert nu.total_mass() == pytest.approx(3.0)

    def test_negative_reweight_rejected(self):
        mu = PointMasses([[0.0, 0.0]], [1.0])
        with pytest.raises(ValueError):
            mu.reweighted(np.array([-1.0]))


class TestConfig:
    def test_round_trip_variants(self):
        specs = [
            {"type": "dirac", "location": [0, 0, 0], "mass": 2.0},
            {"type": "point_masses", "points": [[0, 0], [1, 1]], "masses": [1, 2]},
            {"type": "radial", "center": [0, 0, 0],
             "profile": [{"kind": "uniform_ball", "radius": 1.0, "total": 0.5}]},
            {"type": "grid", "lo": [0, 0], "hi": [1, 1], "masses": [[1.0, 0.5], [0.25, 0.0]]},
            {"type": "zero", "dim": 3},
        ]
        totals = [2.0, 3.0, 0.5, 1.75, 0.0]
        for spec, total in zip(specs, totals):
            mu = measure_from_config(spec)
            assert mu.total_mass() == pytest.approx(total)

    def test_scale_field(self):
        mu = measure_from_config({"type": "dirac", "location": [0, 0], "mass": 1.0, "scale": 3.0})
        assert mu.total_mass() == 3.0

    def test_missing_fields_have_paths(self):
        with pytest.raises(ConfigError, match="measure.location"):
            measure_from_config({"type": "dirac"})
        with pytest.raises(ConfigError, match="measure.type"):
            measure_from_config({"type": "nope"})

    def test_power_profile(self):
        mu = measure_from_config(
            {"type": "radial", "center": [0, 0, 0],
             "profile": [{"kind": "power", "exponent": -1.0, "to": 1.0}]}
        )
        # M(t) = surf * t^2 / 2 on [0, 1]
        expected = 4.0 * math.pi * 0.25 / 2.0
        assert mu.ball_mass(np.zeros(3), 0.5) == pytest.approx(expected, rel=1e-12)


def test_zero_measure_everything():
    mu = zero_measure(3)
    assert mu.total_mass() == 0.0
    assert mu.ball_mass(np.zeros(3), 1.0) == 0.0
    assert math.isinf(mu.support_distance(np.zeros(3)))


def test_grid_ball_mass_within_declared_error():
    g = GridDensity([-1, -1], [1, 1], np.full((20, 20), 1.0 / 400 * 4.0))
    x = np.array([0.1, -0.2])
    r = 0.7
    v, err = g.ball_mass_with_error(x, r)
    exact = math.pi * r * r  # density is 1 on the box
    assert abs(v - exact) <= err + 1e-12


def test_profile_region_mass_bracket():
    mu = uniform_ball([0.0, 0.0], 1.0, density=1.0)
    val, err = mu.region_mass([Box((0.0, 0.0), (1.0, 1.0))])
    assert val == pytest.approx(math.pi / 4.0, abs=err + 1e-9)
    assert err < 0.05
