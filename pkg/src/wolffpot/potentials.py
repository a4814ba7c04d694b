"""Continuous potentials of measures.

The two kernels are the linear one, int_0^r mu(B(x,t)) / t^(n-a) dt/t, and the
nonlinear one, int_0^r (mu(B(x,t)) / t^(n-b*s))^(1/(s-1)) dt/t.  The
quasilinear instance sets a = p, b = 1, s = p.  Infinity is a first-class
value: evaluating at an atom of the measure returns inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .measures import Measure
from .quadrature import (
    QuadratureSpec,
    geometric_nodes,
    kernel_pieces,
    kernel_tail,
    midpoints,
    powered_with_error,
)


@dataclass(frozen=True)
class PotentialParams:
    """Kernel orders: linear order alpha, nonlinear order (beta, s).

    Quasilinear problems use alpha = p, beta = 1, s = p.
    """

    n: int
    alpha: float
    beta: float
    s: float
    r_trunc: float = math.inf
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("dimension must be >= 2")
        if not 0 < self.alpha < self.n:
            raise ValueError("need 0 < alpha < n")
        if not self.s > 1:
            raise ValueError("need s > 1")
        if not 0 < self.beta < self.n / self.s:
            raise ValueError("need 0 < beta < n/s")
        if self.r_trunc <= 0:
            raise ValueError("truncation radius must be positive")

    @classmethod
    def quasilinear(cls, n: int, p: float, **kw) -> "PotentialParams":
        if not 1 < p < n:
            raise ValueError("need 1 < p < n")
        return cls(n=n, alpha=p, beta=1.0, s=p, **kw)


@dataclass(frozen=True)
class PotentialValue:
    value: float
    error: float = 0.0
    flags: tuple = ()

    def __float__(self):
        return self.value


def _scale_hint(mu: Measure, x, r_trunc: float) -> float:
    ext = mu.support_extent(x)
    if math.isfinite(ext) and ext > 0:
        return ext
    if math.isfinite(r_trunc):
        return r_trunc
    return 1.0


def kernel_potential(mu: Measure, x, q_power: float, c_exp: float, r_trunc: float,
                     quad: QuadratureSpec) -> PotentialValue:
    """int_0^{r_trunc} mu(B(x,t))^q * t^(-c) dt/t with tail completion.

    q_power > 0, c_exp > 0.  The Wolff potential is q = 1/(s-1),
    c = (n - b*s)/(s-1); the Riesz potential is q = 1, c = n - a.
    """
    x = np.asarray(x, dtype=float)
    if mu.atom_mass_at(x) > 0:
        return PotentialValue(math.inf, 0.0, ("atom-at-point",))
    d0 = mu.support_distance(x)
    if math.isinf(d0):
        return PotentialValue(0.0)
    if r_trunc <= d0:
        return PotentialValue(0.0)
    ext = mu.support_extent(x)
    flags = []
    scale = _scale_hint(mu, x, r_trunc)
    r_floor = scale * 2.0 ** (-quad.r_min_octaves)
    r_lo = max(d0, r_floor)
    if math.isinf(r_trunc):
        if math.isfinite(ext):
            r_hi = ext
        else:
            r_hi = scale * 2.0**quad.unbounded_octaves
            flags.append("unbounded-support")
    else:
        # the product rule integrates the constant mass beyond the support
        # exactly, so no need to clip at the support extent
        r_hi = r_trunc
    if r_hi <= r_lo:
        # all the mass sits at the outer radius (single-sphere support)
        r_lo = r_hi * 2.0 ** (-quad.r_min_octaves)
    nodes = geometric_nodes(r_lo, r_hi, quad.per_octave, mu.critical_radii(x))
    m_mid, m_err = mu.ball_masses_with_error(x, midpoints(nodes))
    vals, errs = powered_with_error(m_mid, m_err, q_power)
    pieces = kernel_pieces(nodes, c_exp)
    total = float(np.dot(vals, pieces))
    err = float(np.dot(errs, pieces))
    if math.isinf(r_trunc) and quad.tail_completion:
        if math.isfinite(ext):
            m_tot, m_tot_err = mu.ball_mass_with_error(x, ext)
            v, e = powered_with_error(np.array([m_tot]), np.array([m_tot_err]), q_power)
            t = kernel_tail(c_exp, r_hi)
            total += float(v[0]) * t
            err += float(e[0]) * t
        else:
            # no tail guess: report the partial value, flag possible divergence
            last_octave = float(
                np.dot(vals[nodes[:-1] >= r_hi / 2], pieces[nodes[:-1] >= r_hi / 2])
            )
            if last_octave > 1e-9 * max(total, 1e-300):
                flags.append("tail-divergent")
    return PotentialValue(total, err, tuple(flags))


def riesz_report(mu: Measure, x, alpha: float, r_trunc: float = math.inf,
                 quad: QuadratureSpec | None = None) -> PotentialValue:
    quad = quad or QuadratureSpec()
    if not 0 < alpha < mu.n:
        raise ValueError("need 0 < alpha < n")
    return kernel_potential(mu, x, 1.0, mu.n - alpha, r_trunc, quad)


def riesz(mu: Measure, x, alpha: float, r_trunc: float = math.inf,
          quad: QuadratureSpec | None = None) -> float:
    return riesz_report(mu, x, alpha, r_trunc, quad).value


def wolff_report(mu: Measure, x, beta: float, s: float, r_trunc: float = math.inf,
                 quad: QuadratureSpec | None = None) -> PotentialValue:
    quad = quad or QuadratureSpec()
    if not s > 1:
        raise ValueError("need s > 1")
    if not 0 < beta < mu.n / s:
        raise ValueError("need 0 < beta < n/s")
    c_exp = (mu.n - beta * s) / (s - 1.0)
    return kernel_potential(mu, x, 1.0 / (s - 1.0), c_exp, r_trunc, quad)


def wolff(mu: Measure, x, beta: float, s: float, r_trunc: float = math.inf,
          quad: QuadratureSpec | None = None) -> float:
    return wolff_report(mu, x, beta, s, r_trunc, quad).value


def wolff_quasilinear(mu: Measure, x, p: float, r_trunc: float = math.inf,
                      quad: QuadratureSpec | None = None) -> float:
    return wolff(mu, x, 1.0, p, r_trunc, quad)


def dirac_wolff_closed_form(mass: float, distance: float, p: float, n: int) -> float:
    """Untruncated nonlinear potential of a point mass, from the antiderivative."""
    if distance == 0:
        return math.inf
    return mass ** (1.0 / (p - 1.0)) * (p - 1.0) / (n - p) * distance ** ((p - n) / (p - 1.0))


def dirac_riesz_closed_form(mass: float, distance: float, alpha: float, n: int) -> float:
    if distance == 0:
        return math.inf
    return mass * distance ** (alpha - n) / (n - alpha)


# ---------------------------------------------------------------------------
# Truncated potential profiles (values of W^t / I^t on a whole radius grid)


def truncated_profile(mu: Measure, x, nodes: np.ndarray, q_power: float,
                      c_exp: float) -> np.ndarray:
    """Values of int_0^{nodes[k]} mu(B(x,t))^q t^(-c) dt/t at every node.

    nodes[0] must sit below the support of t -> mu(B(x,t)) or at the quadrature
    floor; contributions below nodes[0] are dropped.
    """
    if mu.atom_mass_at(x) > 0:
        return np.full(len(nodes), math.inf)
    m_mid = mu.ball_masses(x, midpoints(nodes))
    vals = np.maximum(m_mid, 0.0) ** q_power
    pieces = kernel_pieces(nodes, c_exp)
    out = np.zeros(len(nodes))
    out[1:] = np.cumsum(vals * pieces)
    return out


def local_ball_potential(sigma: Measure, center, r: float, y, p: float,
                         rel_tol: float = 1e-12, max_terms: int = 400,
                         branch: str = "auto") -> float:
    """Dyadic local potential of sigma relative to the ball B(center, r).

    For p > 2 this is the sum over all dyadic radii rho = r/2^j, j in Z, of
    (sigma(B(y, rho) & B(center, r)) / rho^(n-p))^(1/(p-1)); for 1 < p <= 2
    only j >= 0 enter and the summand is linear in the mass.  The summand
    algebra can be forced with branch = "low" (linear, p <= 2) or "high"
    (power form, p >= 2); the two-sided index range attaches to p > 2
    strictly, so at p = 2 both branches produce the identical one-sided sum.
    The large-ball side saturates once B(y, rho) swallows B(center, r), after
    which the remaining terms form an exact geometric series.
    """
    n = sigma.n
    if not 1 < p < n:
        raise ValueError("need 1 < p < n")
    if r <= 0:
        raise ValueError("need r > 0")
    if branch == "auto":
        branch = "high" if p > 2 else "low"
    if branch == "low" and p > 2:
        raise ValueError("the linear branch needs p <= 2")
    if branch == "high" and p < 2:
        raise ValueError("the power branch needs p >= 2")
    y = np.asarray(y, dtype=float)
    center = np.asarray(center, dtype=float)
    ball_region_mass = _intersection_mass_fn(sigma, y, center, r)

    # atom of sigma at y inside the window makes every branch diverge
    if sigma.atom_mass_at(y) > 0 and np.linalg.norm(y - center) <= r:
        return math.inf

    two_sided = p > 2
    cexp = (n - p) / (p - 1.0) if branch == "high" else (n - p)
    qpow = 1.0 / (p - 1.0) if branch == "high" else 1.0

    # shrinking side: j = 0, 1, 2, ...; masses are monotone in rho, so the
    # first zero mass ends the sum exactly
    total = 0.0
    for j in range(max_terms):
        rho = r / 2.0**j
        m = ball_region_mass(rho)
        if m <= 0.0:
            break
        t = m**qpow * rho ** (-cexp)
        total += t
        if t < rel_tol * total:
            break

    if not two_sided:
        return total

    # growing side: j = -1, -2, ...; saturation gives an exact geometric tail
    d = float(np.linalg.norm(y - center))
    m_sat = ball_region_mass(d + r)
    j = -1
    while r / 2.0**j < d + r and -j < max_terms:
        rho = r / 2.0**j
        total += ball_region_mass(rho) ** qpow * rho ** (-cexp)
        j -= 1
    rho_sat = r / 2.0**j
    ratio = 2.0 ** (-cexp)
    total += m_sat**qpow * rho_sat ** (-cexp) / (1.0 - ratio)
    return total


def _intersection_mass_fn(sigma: Measure, y, center, r: float):
    """rho -> sigma(B(y, rho) & B(center, r)), with the fast radial path."""
    from .geometry import Ball
    from .measures import PointMasses, RadialProfile

    if isinstance(sigma, RadialProfile) and np.allclose(y, sigma.center):
        def fn(rho: float) -> float:
            v, _ = sigma.concentric_lens_masses(center, np.array(rho), np.array(r))
            return float(v)

        return fn
    if isinstance(sigma, PointMasses):
        keep = (
            np.linalg.norm(sigma.points - center, axis=1) <= r
            if len(sigma.masses)
            else np.zeros(0, dtype=bool)
        )
        d = np.linalg.norm(sigma.points[keep] - y, axis=1)
        order = np.argsort(d)
        dy = d[order]
        cw = np.concatenate([[0.0], np.cumsum(sigma.masses[keep][order])])

        def fn(rho: float) -> float:
            return float(cw[np.searchsorted(dy, rho, side="right")])

        return fn
    window = Ball(tuple(center), float(r))

    def fn(rho: float) -> float:
        v, _ = sigma.region_mass([Ball(tuple(y), float(rho)), window])
        return float(v)

    return fn


def tail_difference(sigma: Measure, x, y, t: float, alpha: float, s: float,
                    quad: QuadratureSpec | None = None, r_max: float = math.inf) -> float:
    """|int_t^inf [ (sigma(B(x,r))/r^(n-a s))^(1/(s-1)) - (same at y) ] dr/r|.

    Requires y in B(x, t).  Beyond both supports the two integrands agree
    exactly, so the tail closes itself.
    """
    quad = quad or QuadratureSpec()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.linalg.norm(x - y) > t:
        raise ValueError("y must lie in B(x, t)")
    n = sigma.n
    c_exp = (n - alpha * s) / (s - 1.0)
    if c_exp <= 0:
        raise ValueError("need alpha * s < n")
    q = 1.0 / (s - 1.0)
    ext = max(sigma.support_extent(x), sigma.support_extent(y))
    if not math.isfinite(ext):
        ext = t * 2.0**quad.unbounded_octaves
    r_hi = min(max(ext, t * 2.0), r_max)
    extra = np.concatenate([sigma.critical_radii(x), sigma.critical_radii(y)])
    nodes = geometric_nodes(t, r_hi, quad.per_octave, extra)
    mids = midpoints(nodes)
    mx = sigma.ball_masses(x, mids)
    my = sigma.ball_masses(y, mids)
    pieces = kernel_pieces(nodes, c_exp)
    val = float(np.dot(np.maximum(mx, 0.0) ** q - np.maximum(my, 0.0) ** q, pieces))
    # tails: both means saturate to sigma(B(., ext)); past r_hi the masses are
    # equal (same total), so the difference vanishes exactly
    return abs(val)
