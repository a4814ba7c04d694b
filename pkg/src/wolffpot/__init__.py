"""Computable nonlinear potential estimates.

Potentials of measures, capacity-type diagnostics, the dyadic Carleson
machinery, supersolutions of the integral obstacle problem, bilateral
pointwise bound evaluators, and independent radial/brute-force oracles.
"""

from .geometry import Ball, Box, HalfSpace
from .measures import (
    GridDensity,
    Measure,
    PointMasses,
    RadialProfile,
    dirac,
    measure_from_config,
    power_weight,
    restrict,
    uniform_ball,
    zero_measure,
)
from .potentials import (
    PotentialParams,
    dirac_riesz_closed_form,
    dirac_wolff_closed_form,
    local_ball_potential,
    riesz,
    tail_difference,
    wolff,
    wolff_quasilinear,
)
from .quadrature import QuadratureSpec

__all__ = [
    "Ball",
    "Box",
    "GridDensity",
    "HalfSpace",
    "Measure",
    "PointMasses",
    "PotentialParams",
    "QuadratureSpec",
    "RadialProfile",
    "dirac",
    "dirac_riesz_closed_form",
    "dirac_wolff_closed_form",
    "local_ball_potential",
    "measure_from_config",
    "power_weight",
    "restrict",
    "riesz",
    "tail_difference",
    "uniform_ball",
    "wolff",
    "wolff_quasilinear",
    "zero_measure",
]

__version__ = "0.1.0"
