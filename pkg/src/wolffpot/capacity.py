"""Capacity-type hypotheses on a measure.

True capacity constants are variational and not directly computable; the
checks here report computable lower proxies (the ball-condition constant and
the multiplier-inequality ratio) plus the exponential-integrability and
weak-A-infinity diagnostics that the bound evaluators rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Ball, unit_ball_volume
from .measures import Measure, PointMasses, RadialProfile, _gauss_rule, restrict
from .potentials import kernel_potential, wolff
from .quadrature import QuadratureSpec, geometric_nodes


@dataclass
class SamplingSpec:
    """Centers and radius grid for supremum-type scans."""

    r_min: float = 1e-3
    r_max: float = 8.0
    per_octave: int = 8
    max_centers: int = 200
    extra_centers: tuple = ()

    def radii(self, dense: bool = False) -> np.ndarray:
        per = self.per_octave * (4 if dense else 1)
        return geometric_nodes(self.r_min, self.r_max, per)


@dataclass
class CapacityReport:
    constant: float
    witness: tuple | None  # (center, radius)
    samples: int
    passed: bool | None = None
    divergent: bool = False
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        wc = None if self.witness is None else [list(map(float, self.witness[0])), float(self.witness[1])]
        return {
            "constant": self.constant,
            "witness": wc,
            "samples": self.samples,
            "pass": self.passed,
            "divergent": self.divergent,
        }


@dataclass(frozen=True)
class WeakAinfParams:
    c_w: float
    theta: float

    def __post_init__(self):
        if self.c_w <= 0 or self.theta <= 0:
            raise ValueError("weak A-infinity parameters must be positive")


def _scan_centers(mu: Measure, sampling: SamplingSpec) -> np.ndarray:
    centers = []
    pts, w = mu.atoms()
    if len(w):
        centers.append(pts)
    if isinstance(mu, RadialProfile):
        centers.append(mu.center[None, :])
    try:
        dpts, dw = mu.decomposition()
        if len(dw):
            stride = max(1, len(dw) // sampling.max_centers)
            order = np.argsort(dw)[::-1]
            centers.append(dpts[order[::stride][: sampling.max_centers]])
    except ValueError:
        pass
    if len(sampling.extra_centers):
        centers.append(np.atleast_2d(np.asarray(sampling.extra_centers, dtype=float)))
    if not centers:
        return np.zeros((0, mu.n))
    return np.unique(np.vstack(centers), axis=0)


def ball_growth_constant(mu: Measure, exponent: float, sampling: SamplingSpec,
                         threshold: float | None = None) -> CapacityReport:
    """sup over sampled (x, r) of mu(B(x, r)) / r^exponent.

    A finite-sample lower estimate; atomic measures are flagged divergent
    (the ratio blows up as r -> 0 at an atom).
    """
    centers = _scan_centers(mu, sampling)
    best = 0.0
    witness = None
    count = 0
    for x in centers:
        dense = isinstance(mu, RadialProfile) and np.allclose(x, mu.center)
        radii = sampling.radii(dense=dense)
        masses = mu.ball_masses(x, radii)
        ratios = masses / radii**exponent
        count += len(radii)
        i = int(np.argmax(ratios))
        if ratios[i] > best:
            best = float(ratios[i])
            witness = (tuple(float(v) for v in x), float(radii[i]))
    divergent = mu.has_atoms()
    passed = None if threshold is None else (best <= threshold and not divergent)
    return CapacityReport(best, witness, count, passed, divergent)


def ball_condition_constant(sigma: Measure, p: float, sampling: SamplingSpec | None = None,
                            threshold: float | None = None) -> CapacityReport:
    """Ball form of the capacity condition: sup sigma(B(x,r)) / r^(n-p)."""
    n = sigma.n
    if not 1 < p < n:
        raise ValueError("need 1 < p < n")
    return ball_growth_constant(sigma, n - p, sampling or SamplingSpec(), threshold)


def capacity_ball_scaling(p: float, n: int, r: float) -> float:
    """Normalized variational capacity of a ball: r^(n-p) (unit constant)."""
    if not 1 < p < n:
        raise ValueError("need 1 < p < n")
    if r <= 0:
        raise ValueError("need r > 0")
    return r ** (n - p)


# ---------------------------------------------------------------------------
# Multiplier inequality


@dataclass(frozen=True)
class RadialTent:
    """h = 1 on |z - center| <= inner, linear down to 0 at outer."""

    center: tuple
    inner: float
    outer: float

    def __post_init__(self):
        if not 0 <= self.inner < self.outer:
            raise ValueError("need 0 <= inner < outer")

    def value(self, z) -> float:
        d = float(np.linalg.norm(np.asarray(z, dtype=float) - np.asarray(self.center)))
        return self.value_radial(d)

    def value_radial(self, d: float) -> float:
        if d <= self.inner:
            return 1.0
        if d >= self.outer:
            return 0.0
        return (self.outer - d) / (self.outer - self.inner)

    def gradient_energy(self, p: float, n: int) -> float:
        """int |grad h|^p dx, closed form for the linear annulus profile."""
        vn = unit_ball_volume(n)
        return (self.outer - self.inner) ** (-p) * vn * (self.outer**n - self.inner**n)


@dataclass
class MultiplierReport:
    ratios: list
    max_ratio: float
    witness: RadialTent | None


def _tent_mass_integral(sigma: Measure, tent: RadialTent, p: float) -> float:
    """int h^p d sigma, exact for atoms / concentric profiles, cell rule else."""
    if isinstance(sigma, PointMasses):
        if len(sigma.masses) == 0:
            return 0.0
        d = np.linalg.norm(sigma.points - np.asarray(tent.center), axis=1)
        h = np.array([tent.value_radial(v) for v in d])
        return float(np.dot(sigma.masses, h**p))
    if isinstance(sigma, RadialProfile) and np.allclose(tent.center, sigma.center):
        total = tent.value_radial(0.0) ** p * sigma.atom
        from .geometry import sphere_surface

        surf = sphere_surface(sigma.n)
        for piece in sigma.pieces:
            hi = min(piece.hi, tent.outer)
            if hi <= piece.lo:
                continue
            breaks = sorted({piece.lo, min(max(tent.inner, piece.lo), hi), hi})
            for a, b in zip(breaks, breaks[1:]):
                if b <= a:
                    continue
                z, wq = _gauss_rule(48)
                sgrid = 0.5 * (b - a) * z + 0.5 * (b + a)
                hvals = np.array([tent.value_radial(v) for v in sgrid])
                dens = piece.coef * sgrid**piece.exponent
                total += 0.5 * (b - a) * float(
                    np.dot(wq, hvals**p * dens * surf * sgrid ** (sigma.n - 1))
                )
        return total
    pts, w = sigma.decomposition()
    if len(w) == 0:
        return 0.0
    d = np.linalg.norm(pts - np.asarray(tent.center), axis=1)
    h = np.array([tent.value_radial(v) for v in d])
    return float(np.dot(w, h**p))


def multiplier_check(sigma: Measure, p: float, tents) -> MultiplierReport:
    """Ratios int h^p d sigma / [(p/(p-1))^p int |grad h|^p dx] over test tents.

    The max ratio is a computable lower proxy for the capacity constant.
    """
    n = sigma.n
    ratios = []
    best = 0.0
    witness = None
    for tent in tents:
        energy = tent.gradient_energy(p, n)
        if energy <= 0:
            raise ValueError("test function with zero gradient energy")
        ratio = _tent_mass_integral(sigma, tent, p) / ((p / (p - 1.0)) ** p * energy)
        ratios.append(ratio)
        if ratio > best:
            best = ratio
            witness = tent
    return MultiplierReport(ratios, best, witness)


# ---------------------------------------------------------------------------
# Exponential integrability


def exp_integrability_ratio(sigma: Measure, region, beta: float, p: float,
                            quad: QuadratureSpec | None = None) -> float:
    """(1/sigma(E)) int_E exp(beta W_{1,p}(chi_E d sigma)) d sigma."""
    sig_e = restrict(sigma, region)
    mass = sig_e.total_mass()
    if mass <= 0:
        raise ValueError("restricted measure has zero mass")
    if beta == 0.0:
        return 1.0
    pts, w = sig_e.decomposition()
    total = 0.0
    for pt, wt in zip(pts, w):
        wval = wolff(sig_e, pt, 1.0, p, quad=quad)
        if math.isinf(wval):
            return math.inf
        total += wt * math.exp(beta * wval)
    return total / mass


def weighted_exp_integrability(omega: Measure, sigma: Measure, ball: Ball, q: float,
                               c: float, p: float,
                               quad: QuadratureSpec | None = None) -> float:
    """Average over 2B (w.r.t. omega) of exp(c int_0^inf (sigma(B(x,s) & B)/s^(n-p))^q ds/s)."""
    if q <= 0 or c < 0:
        raise ValueError("need q > 0 and c >= 0")
    quad = quad or QuadratureSpec()
    n = sigma.n
    two_b = Ball(ball.center, 2.0 * ball.radius)
    om2 = restrict(omega, two_b)
    denom = om2.total_mass()
    if denom <= 0:
        raise ValueError("omega gives the doubled ball zero mass")
    if sigma.total_mass() == 0 or c == 0.0:
        return 1.0
    sig_b = restrict(sigma, ball)
    pts, w = om2.decomposition()
    total = 0.0
    for pt, wt in zip(pts, w):
        inner = kernel_potential(sig_b, pt, q, q * (n - p), math.inf, quad).value
        total += wt * math.exp(min(c * inner, 700.0)) if math.isfinite(inner) else math.inf
        if math.isinf(total):
            return math.inf
    return total / denom


# ---------------------------------------------------------------------------
# Weak A-infinity


@dataclass
class WeakAinfReport:
    max_ratio: float
    witness: dict | None
    trials: int
    passed: bool


def weak_ainf_check(omega: Measure, params: WeakAinfParams, trials: int,
                    domain: Ball, seed: int = 0) -> WeakAinfReport:
    """Sample pairs (ball B, subset E of B) and check
    |E|_w / |2B|_w <= C_w (|E|/|B|)^theta."""
    if isinstance(omega, PointMasses):
        raise ValueError("atomic measures are not weights")
    n = omega.n
    rng = np.random.default_rng(seed)
    vn = unit_ball_volume(n)
    best = 0.0
    witness = None
    done = 0
    center0 = np.asarray(domain.center)
    while done < trials:
        x = center0 + rng.uniform(-1.0, 1.0, n) * domain.radius * 0.5
        r = domain.radius * 2.0 ** rng.uniform(-4.0, -0.5)
        big = omega.ball_mass(x, 2.0 * r)
        if big <= 0:
            continue
        if rng.uniform() < 0.5:
            # sub-ball
            er = r * rng.uniform(0.1, 0.9)
            direction = rng.normal(size=n)
            direction /= np.linalg.norm(direction)
            ec = x + direction * rng.uniform(0.0, 1.0) * (r - er)
            e_mass = omega.ball_mass(ec, er)
            e_leb = vn * er**n
            desc = {"kind": "ball", "center": ec.tolist(), "radius": float(er)}
        else:
            # cube inside B
            side = r * rng.uniform(0.1, 0.8)
            lo = x - 0.5 * side + rng.uniform(-1.0, 1.0, n) * (r / math.sqrt(n) - 0.5 * side)
            hi = lo + side
            e_mass = omega.box_mass(lo, hi)
            e_leb = side**n
            desc = {"kind": "cube", "lo": lo.tolist(), "hi": hi.tolist()}
        ratio = (e_mass / big) / (e_leb / (vn * r**n)) ** params.theta
        done += 1
        if ratio > best:
            best = ratio
            witness = {"ball_center": x.tolist(), "ball_radius": float(r), "subset": desc}
    return WeakAinfReport(best, witness, done, best <= params.c_w)
