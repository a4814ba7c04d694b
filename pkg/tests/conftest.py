"""Shared corpus builders for the test suite."""

import numpy as np
import pytest

from wolffpot.measures import PointMasses, ProfilePiece, RadialProfile, dirac, uniform_ball


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240901)


@pytest.fixture(scope="session")
def eps_ball_sigma():
    """Coefficient measure with ball-condition constant ~0.05 (p=2, n=3)."""
    return uniform_ball([0.0, 0.0, 0.0], 1.0, total=0.05, integration_cells=14)


@pytest.fixture(scope="session")
def omega_dirac():
    return dirac([0.0, 0.0, 0.0])


@pytest.fixture(scope="session")
def obstacle_points():
    gen = np.random.default_rng(7)
    raw = gen.normal(size=(100, 3))
    raw /= np.linalg.norm(raw, axis=1)[:, None]
    radii = 0.05 + 1.95 * gen.uniform(size=100) ** (1.0 / 3.0)
    return raw * radii[:, None]


def random_atoms(gen, n, count, box=1.0, mass_lo=0.05, mass_hi=1.0):
    pts = gen.uniform(-box, box, size=(count, n))
    masses = gen.uniform(mass_lo, mass_hi, size=count)
    return PointMasses(pts, masses)


def scaled_copy(mu, lam: float, alpha_s: float):
    """Pushforward under z -> lam z, scaled by lam^(n - alpha*s).

    The image satisfies nu(B(lam x, lam r)) = lam^(n - alpha s) mu(B(x, r)).
    """
    n = mu.n
    if isinstance(mu, RadialProfile):
        pieces = [
            ProfilePiece(p.coef * lam ** (-alpha_s - p.exponent), p.exponent,
                         p.lo * lam, p.hi * lam)
            for p in mu.pieces
        ]
        return RadialProfile(mu.center * lam, pieces, mu.atom * lam ** (n - alpha_s),
                             mu.integration_cells)
    if isinstance(mu, PointMasses):
        return PointMasses(mu.points * lam, mu.masses * lam ** (n - alpha_s), n=n)
    raise TypeError("scaled_copy supports profiles and atoms")
