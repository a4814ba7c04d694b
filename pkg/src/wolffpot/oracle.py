"""Independent ground truth at desk scale.

Radial problems reduce exactly to the flux identity

    surf(n) * r^(n-1) * |u'(r)|^(p-2) u'(r) = -M(r),

with M the cumulative mass of the right-hand side, so the solver is a single
outward quadrature with an analytic power tail; no shooting.  The gauge and
natural-growth equations are solved by the monotone fixed-point iteration
from constant initial data, which makes monotonicity of the iterates a
checkable invariant.  A brute-force bracketing evaluator provides
two-sided enclosures for the potential quadratures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import sphere_surface
from .measures import Measure, RadialProfile
from .quadrature import QuadratureSpec, geometric_nodes, kernel_pieces, kernel_tail, midpoints


@dataclass
class RadialGrid:
    r_min: float
    r_max: float
    points: int

    def nodes(self) -> np.ndarray:
        return np.exp(np.linspace(math.log(self.r_min), math.log(self.r_max), self.points))

    def doubled(self) -> "RadialGrid":
        return RadialGrid(self.r_min, self.r_max, 2 * self.points)


@dataclass(frozen=True)
class RadialProblem:
    """Radial problem about the origin; kind selects the equation."""

    p: float
    n: int
    mu: Measure  # radial about 0 (profile, possibly with a center atom)
    kind: str = "poisson"  # poisson | gauge | natural_growth
    grid: RadialGrid = field(default_factory=lambda: RadialGrid(1e-4, 2.0**12, 1200))
    omega: Measure | None = None  # inhomogeneity for natural_growth

    def __post_init__(self):
        if not 1 < self.p < self.n:
            raise ValueError("need 1 < p < n")
        if self.kind not in ("poisson", "gauge", "natural_growth"):
            raise ValueError(f"unknown problem kind {self.kind!r}")


@dataclass
class RadialSolution:
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    iterations: int = 0
    increments: list = field(default_factory=list)

    def interp(self, r: float) -> float:
        # log-log interpolation: radial profiles are locally power-like
        if np.all(self.u > 0):
            return float(np.exp(np.interp(math.log(r), np.log(self.r), np.log(self.u))))
        return float(np.interp(r, self.r, self.u))


def _cumulative_on_grid(mu: Measure, r: np.ndarray) -> np.ndarray:
    origin = np.zeros(mu.n)
    return mu.ball_masses(origin, r)


def _flux_solve(cum_mass, total_mass: float, p: float, n: int, grid: RadialGrid) -> RadialSolution:
    """u(r) = int_r^inf (M(t) / (surf t^(n-1)))^(1/(p-1)) dt via exact power
    integration of the kernel with M sampled per interval."""
    surf = sphere_surface(n)
    r = grid.nodes()
    q = 1.0 / (p - 1.0)
    kappa = (n - p) / (p - 1.0)  # kernel exponent for the dt integral
    mids = np.sqrt(r[:-1] * r[1:])
    m_mid = np.maximum(cum_mass(mids), 0.0)
    pieces = (m_mid / surf) ** q * kernel_pieces(r, kappa)
    tail = (max(total_mass, 0.0) / surf) ** q * kernel_tail(kappa, r[-1])
    u = np.concatenate([(np.cumsum(pieces[::-1])[::-1]), [0.0]]) + tail
    m_nodes = np.maximum(cum_mass(r), 0.0)
    du = -((m_nodes / (surf * r ** (n - 1))) ** q)
    return RadialSolution(r, u, du)


def radial_poisson_solve(prob: RadialProblem) -> RadialSolution:
    """Solve the measure-data radial problem with u -> 0 at infinity."""
    if prob.kind != "poisson":
        raise ValueError("radial_poisson_solve needs kind='poisson'")
    total = prob.mu.total_mass()
    if not math.isfinite(total):
        raise ValueError("the radial solver needs finite total mass")
    ext = prob.mu.support_extent(np.zeros(prob.n))
    if ext > prob.grid.r_max:
        raise ValueError("mass outside the grid is not representable")
    return _flux_solve(lambda t: _cumulative_on_grid(prob.mu, t), total,
                       prob.p, prob.n, prob.grid)


def _weighted_cumulative(sigma: RadialProfile, u_interp, power: float,
                         grid_r: np.ndarray, n: int) -> np.ndarray:
    """Cumulative mass of u^power * d sigma on the grid.

    Integrated piecewise per profile piece (two-point Gauss on every
    subinterval), so density jumps at piece edges cost no accuracy.
    """
    surf = sphere_surface(n)
    incr = np.zeros(len(grid_r))
    base = 0.0
    inv_sqrt3 = 1.0 / math.sqrt(3.0)
    for piece in sigma.pieces:
        lo = piece.lo
        hi = min(piece.hi, float(grid_r[-1]))
        if hi <= lo:
            continue
        # mass below the first grid node: u is flat there
        head_hi = min(hi, float(grid_r[0]))
        if head_hi > lo:
            k = n + piece.exponent
            base += (
                u_interp(np.array([grid_r[0]]))[0] ** power
                * surf * piece.coef / k * (head_hi**k - lo**k)
            )
        inner = grid_r[(grid_r > lo) & (grid_r < hi)]
        edges = np.unique(np.concatenate([[max(lo, grid_r[0])], inner, [hi]]))
        if len(edges) < 2:
            continue
        a, b = edges[:-1], edges[1:]
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        x1 = mid - half * inv_sqrt3
        x2 = mid + half * inv_sqrt3

        def f(s):
            return u_interp(s) ** power * piece.coef * s**piece.exponent * surf * s ** (n - 1)

        vals = half * (f(x1) + f(x2))
        idx = np.clip(np.searchsorted(grid_r, mid) - 1, 0, len(grid_r) - 2)
        np.add.at(incr, idx + 1, vals)
    if sigma.atom > 0:
        base += u_interp(np.array([grid_r[0]]))[0] ** power * sigma.atom
    return base + np.cumsum(incr)


def gauge_solve(prob: RadialProblem, tol: float = 1e-10, max_iter: int = 200,
                cap: float = 1e6) -> RadialSolution:
    """Monotone fixed point u_{j+1} = 1 + Poisson(sigma u_j^(p-1)), from u_0 = 1.

    Divergence (iterates above `cap`) raises rather than truncating silently.
    """
    if prob.kind != "gauge":
        raise ValueError("gauge_solve needs kind='gauge'")
    sigma = prob.mu
    if not isinstance(sigma, RadialProfile) or not np.allclose(sigma.center, 0.0):
        raise ValueError("the gauge oracle needs a radial coefficient about the origin")
    p, n = prob.p, prob.n
    r = prob.grid.nodes()
    u = np.ones(len(r))
    increments = []
    for it in range(1, max_iter + 1):
        u_fn = lambda t: np.interp(t, r, u, left=u[0], right=1.0)
        cum = _weighted_cumulative(sigma, u_fn, p - 1.0, r, n)
        cum_fn = lambda t: np.interp(t, r, cum, left=0.0, right=cum[-1])
        sol = _flux_solve(cum_fn, float(cum[-1]), p, n, prob.grid)
        u_new = 1.0 + sol.u
        if np.any(u_new > cap):
            raise RuntimeError(f"gauge iteration diverged at step {it}")
        inc = float(np.max(np.abs(u_new - u)))
        increments.append(inc)
        if np.any(u_new < u - 1e-12 * np.maximum(u, 1.0)):
            raise RuntimeError("gauge iterates lost monotonicity")
        u = u_new
        if inc < tol:
            break
    else:
        raise RuntimeError("gauge iteration did not converge")
    du = sol.du
    return RadialSolution(r, u, du, iterations=it, increments=increments)


def natural_growth_solve(prob: RadialProblem, tol: float = 1e-10, max_iter: int = 200,
                         cap: float = 1e8) -> RadialSolution:
    """Monotone iteration u_{j+1} = Poisson(sigma u_j^(p-1) + omega), u_0 =
    Poisson(omega); converges for small coefficient measures."""
    if prob.kind != "natural_growth":
        raise ValueError("natural_growth_solve needs kind='natural_growth'")
    if prob.omega is None:
        raise ValueError("natural_growth needs an inhomogeneity")
    sigma = prob.mu
    if not isinstance(sigma, RadialProfile) or not np.allclose(sigma.center, 0.0):
        raise ValueError("the oracle needs a radial coefficient about the origin")
    p, n = prob.p, prob.n
    r = prob.grid.nodes()
    om_cum = _cumulative_on_grid(prob.omega, r)
    om_fn = lambda t: np.interp(t, r, om_cum, left=0.0, right=om_cum[-1])
    base = _flux_solve(om_fn, float(om_cum[-1]), p, n, prob.grid)
    u = base.u.copy()
    increments = []
    sol = base
    for it in range(1, max_iter + 1):
        u_fn = lambda t: np.interp(t, r, u, left=u[0], right=0.0)
        cum = _weighted_cumulative(sigma, u_fn, p - 1.0, r, n) + om_cum
        cum_fn = lambda t: np.interp(t, r, cum, left=0.0, right=cum[-1])
        sol = _flux_solve(cum_fn, float(cum[-1]), p, n, prob.grid)
        if np.any(sol.u > cap):
            raise RuntimeError(f"natural-growth iteration diverged at step {it}")
        inc = float(np.max(np.abs(sol.u - u)))
        increments.append(inc)
        u_prev = u
        u = sol.u.copy()
        if np.any(u < u_prev - 1e-12 * np.maximum(u_prev, 1.0)):
            raise RuntimeError("iterates lost monotonicity")
        if inc < tol * max(1.0, float(np.max(u))):
            break
    else:
        raise RuntimeError("natural-growth iteration did not converge")
    return RadialSolution(r, u, sol.du, iterations=it, increments=increments)


# ---------------------------------------------------------------------------
# Riccati-form weak residual


@dataclass
class ResidualReport:
    max_relative: float
    per_test: list


def riccati_residual(sol: RadialSolution, sigma: RadialProfile, p: float, n: int,
                     tents=None) -> ResidualReport:
    """Weak-form residual of -div(|grad v|^(p-2) grad v) = (p-1)|grad v|^p + s
    for v = log u against radial test bumps.

    Each test reports |I1 - I2 - I3| / (|I1| + |I2| + |I3|) where I1 is the
    principal part tested against phi', I2 the gradient-power term and I3 the
    measure term.  I3 is integrated exactly against the profile; I1 and I2 use
    the solution grid with the test kinks and profile edges inserted as true
    nodes, so the residual shrinks under grid refinement.
    """
    if np.any(sol.u <= 0):
        raise ValueError("log substitution needs a strictly positive solution")
    from .capacity import RadialTent, _tent_mass_integral

    r = sol.r
    dv = sol.du / sol.u
    surf = sphere_surface(n)
    if tents is None:
        ext = sigma.support_radius
        tents = [(0.25 * ext, 1.5 * ext), (0.5 * ext, 2.5 * ext), (0.1 * ext, 1.0 * ext)]
    prof_breaks = [s for piece in sigma.pieces for s in (piece.lo, piece.hi) if math.isfinite(s)]
    g1_base = np.sign(dv) * np.abs(dv) ** (p - 1.0) * surf * r ** (n - 1)
    g2_base = (p - 1.0) * np.abs(dv) ** p * surf * r ** (n - 1)
    results = []
    for a, b in tents:
        extra = np.asarray([s for s in [a, b] + prof_breaks if r[0] < s < r[-1]])
        rr = np.unique(np.concatenate([r, extra]))
        g1 = np.interp(rr, r, g1_base)
        g2 = np.interp(rr, r, g2_base)
        phi = np.clip((b - rr) / (b - a), 0.0, 1.0)
        # phi' is piecewise constant with jumps exactly at the nodes a and b
        mid = 0.5 * (rr[:-1] + rr[1:])
        dphi_mid = np.where((mid > a) & (mid < b), -1.0 / (b - a), 0.0)
        i1 = float(np.sum(dphi_mid * 0.5 * (g1[:-1] + g1[1:]) * np.diff(rr)))
        i2 = float(np.trapezoid(g2 * phi, rr))
        i3 = _tent_mass_integral(sigma, RadialTent(tuple([0.0] * n), a, b), 1.0)
        denom = abs(i1) + abs(i2) + abs(i3)
        rel = abs(i1 - i2 - i3) / denom if denom > 0 else 0.0
        results.append(((a, b), rel))
    return ResidualReport(max(rel for _, rel in results), results)


# ---------------------------------------------------------------------------
# Brute-force bracketing quadrature


def brute_force_potential(mu: Measure, x, q_power: float, c_exp: float,
                          r_trunc: float = math.inf, refinement: int = 320):
    """Two-sided bracket of int mu(B(x,t))^q t^(-c) dt/t by monotone endpoint
    evaluation on a refined grid; measure-query error bounds widen the bracket.

    refinement is grid points per octave and must be at least 10x the default
    potential resolution.
    """
    if refinement < 10 * QuadratureSpec().per_octave:
        raise ValueError("brute force must be at least 10x finer than the default")
    x = np.asarray(x, dtype=float)
    if mu.atom_mass_at(x) > 0:
        return math.inf, math.inf
    d0 = mu.support_distance(x)
    if math.isinf(d0) or r_trunc <= d0:
        return 0.0, 0.0
    ext = mu.support_extent(x)
    scale = ext if math.isfinite(ext) else max(r_trunc, 1.0)
    r_lo = max(d0, scale * 2.0**-60)
    r_hi = r_trunc if math.isfinite(r_trunc) else ext
    if r_hi <= r_lo:
        r_lo = r_hi * 2.0**-60
    # doubled nodes pin the jump radii: the straddling interval degenerates
    crit = mu.critical_radii(x)
    nodes = geometric_nodes(r_lo, r_hi, refinement,
                            np.concatenate([crit, crit * (1.0 - 1e-12)]))
    masses, errs = mu.ball_masses_with_error(x, nodes)
    m_low = np.maximum(masses - errs, 0.0)
    m_high = masses + errs
    pieces = kernel_pieces(nodes, c_exp)
    low = float(np.dot(m_low[:-1] ** q_power, pieces))
    high = float(np.dot(m_high[1:] ** q_power, pieces))
    if math.isinf(r_trunc):
        if not math.isfinite(ext):
            raise ValueError("brute force needs compact support for full-range integrals")
        mt, et = mu.ball_mass_with_error(x, ext)
        low += max(mt - et, 0.0) ** q_power * kernel_tail(c_exp, r_hi)
        high += (mt + et) ** q_power * kernel_tail(c_exp, r_hi)
    return low, high


def brute_force_wolff(mu: Measure, x, beta: float, s: float,
                      r_trunc: float = math.inf, refinement: int = 320):
    c = (mu.n - beta * s) / (s - 1.0)
    return brute_force_potential(mu, x, 1.0 / (s - 1.0), c, r_trunc, refinement)


def brute_force_riesz(mu: Measure, x, alpha: float, r_trunc: float = math.inf,
                      refinement: int = 320):
    return brute_force_potential(mu, x, 1.0, mu.n - alpha, r_trunc, refinement)
