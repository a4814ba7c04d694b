"""Supersolutions and bilateral pointwise bound evaluators.

The common object is the two-weight integral

    int_0^R ( exp(c_out * Outer(r, x)) / r^(n - b s)
              * int_{B(x,r)} exp(c_in * Inner_r(z)) dW(z) )^(1/(s-1)) dr/r

with Outer the truncated (or ball-restricted) nonlinear potential of the
coefficient measure at x, and Inner one of: the truncated nonlinear
potential, the truncated linear potential, or the dyadic local potential of
the window ball.  Branch rules: lower-bound forms carry the nonlinear inner
weight for p <= 2 and the linear one for p > 2; upper-bound/existence forms
swap them.  At p = 2 the two kernels are identical, which is the branch
consistency the tests pin down.

Integrals against the inhomogeneity are evaluated on its decomposition
(exact for atomic data, cell rule otherwise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Ball
from .measures import Measure, PointMasses, RadialProfile, restrict
from .potentials import (
    PotentialParams,
    PotentialValue,
    local_ball_potential,
    wolff,
)
from .quadrature import QuadratureSpec, geometric_nodes, kernel_pieces, kernel_tail, midpoints

EXP_CAP = 700.0  # exp overflow guard; exceeding it propagates as inf


# ---------------------------------------------------------------------------
# Domains


@dataclass(frozen=True)
class EntireSpace:
    n: int

    def lower_truncation(self, x) -> float:
        return math.inf

    def upper_truncation(self) -> float:
        return math.inf

    def gauge_truncations(self, x):
        return math.inf, math.inf

    def clip(self, mu: Measure) -> Measure:
        return mu


@dataclass(frozen=True)
class BallDomain:
    center: tuple
    radius: float

    @property
    def n(self) -> int:
        return len(self.center)

    def boundary_distance(self, x) -> float:
        d = self.radius - float(np.linalg.norm(np.asarray(x, float) - np.asarray(self.center)))
        if d <= 0:
            raise ValueError("point lies outside the domain")
        return d

    def lower_truncation(self, x) -> float:
        return self.boundary_distance(x) / 5.0

    def upper_truncation(self) -> float:
        return 4.0 * self.radius  # 2 * diameter

    def gauge_truncations(self, x):
        return self.boundary_distance(x) / 2.0, self.upper_truncation()

    def clip(self, mu: Measure) -> Measure:
        return restrict(mu, Ball(self.center, self.radius))


# ---------------------------------------------------------------------------
# Bound specification / report records


@dataclass(frozen=True)
class BoundSpec:
    """Which bilateral form to evaluate."""

    p: float
    n: int
    c: float
    beta: float = 0.1
    domain: object = None
    inner: str | None = None  # override: "wolff" | "riesz" | "none"
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if not 1 < self.p < self.n:
            raise ValueError("need 1 < p < n")
        if self.c <= 0 or self.beta <= 0:
            raise ValueError("constants must be positive")


@dataclass
class BoundReport:
    point: list
    lower: float
    upper: float
    supersolution: float | None = None
    oracle: float | None = None
    constants: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Inner-weight machinery


def _safe_exp(a):
    return np.exp(np.minimum(a, EXP_CAP))


def _truncated_matrix(mu: Measure, zs: np.ndarray, radii: np.ndarray, q_pow: float,
                      c_exp: float, quad: QuadratureSpec) -> np.ndarray:
    """M[i, k] = int_0^{radii[k]} mu(B(z_i, t))^q t^(-c) dt/t."""
    out = np.zeros((len(zs), len(radii)))
    if mu.total_mass() == 0:
        return out
    r_hi = float(radii[-1])
    for i, z in enumerate(zs):
        if mu.atom_mass_at(z) > 0:
            out[i, :] = math.inf
            continue
        d0 = mu.support_distance(z)
        if d0 >= r_hi:
            continue
        scale = max(mu.support_extent(z), r_hi)
        t_lo = max(min(d0, r_hi / 2.0), scale * 2.0 ** (-quad.r_min_octaves))
        if t_lo <= 0:
            t_lo = scale * 2.0 ** (-quad.r_min_octaves)
        extra = np.concatenate([mu.critical_radii(z), radii])
        nodes = geometric_nodes(t_lo, r_hi, quad.per_octave, extra)
        m_mid = mu.ball_masses(z, midpoints(nodes))
        cum = np.concatenate([[0.0], np.cumsum(np.maximum(m_mid, 0.0) ** q_pow * kernel_pieces(nodes, c_exp))])
        idx = np.searchsorted(nodes, radii, side="right") - 1
        out[i] = cum[np.clip(idx, 0, len(cum) - 1)]
    return out


def _local_potential_matrix(sigma: Measure, x, zs: np.ndarray, radii: np.ndarray,
                            p: float) -> np.ndarray:
    """M[i, k] = local ball potential of sigma for window B(x, radii[k]) at z_i."""
    n = sigma.n
    x = np.asarray(x, dtype=float)
    out = np.zeros((len(zs), len(radii)))
    two_sided = p > 2
    cexp = (n - p) / (p - 1.0) if two_sided else (n - p)
    qpow = 1.0 / (p - 1.0) if two_sided else 1.0
    fast = isinstance(sigma, RadialProfile)
    for i, z in enumerate(zs):
        if sigma.atom_mass_at(z) > 0:
            out[i, :] = math.inf
            continue
        if fast and np.allclose(z, sigma.center):
            d = float(np.linalg.norm(x - sigma.center))
            j_hi = 60
            if two_sided:
                rat = radii / (d + radii)
                j_lo = int(math.floor(math.log2(float(np.min(rat))))) - 1
            else:
                j_lo = 0
            js = np.arange(j_lo, j_hi + 1)
            rhos = radii[:, None] / 2.0 ** js[None, :]
            masses, _ = sigma.concentric_lens_masses(x, rhos, radii[:, None])
            terms = np.maximum(masses, 0.0) ** qpow * rhos ** (-cexp)
            vals = terms.sum(axis=1)
            if two_sided:
                # saturated geometric tail below j_lo
                m_sat, _ = sigma.concentric_lens_masses(x, d + radii, radii)
                rho_sat = radii / 2.0 ** (j_lo - 1)
                ratio = 2.0 ** (-cexp)
                vals += np.maximum(m_sat, 0.0) ** qpow * rho_sat ** (-cexp) / (1.0 - ratio)
            out[i] = vals
        else:
            for k, r in enumerate(radii):
                out[i, k] = local_ball_potential(sigma, x, float(r), z, p)
    return out


def _inner_matrix(sigma: Measure, x, zs: np.ndarray, radii: np.ndarray, kind: str,
                  params: PotentialParams, quad: QuadratureSpec) -> np.ndarray | None:
    n = params.n
    if kind == "none":
        return None
    if kind == "wolff":
        q = 1.0 / (params.s - 1.0)
        c = (n - params.beta * params.s) / (params.s - 1.0)
        return _truncated_matrix(sigma, zs, radii, q, c, quad)
    if kind == "riesz":
        return _truncated_matrix(sigma, zs, radii, 1.0, n - params.alpha, quad)
    if kind == "local":
        return _local_potential_matrix(sigma, x, zs, radii, params.s)
    if kind == "wolff-restricted":
        # full potential of sigma restricted to the window ball: truncated
        # potential plus the exact saturated tail
        q = 1.0 / (params.s - 1.0)
        c = (n - params.beta * params.s) / (params.s - 1.0)
        m = _truncated_matrix(sigma, zs, radii, q, c, quad)
        for i, z in enumerate(zs):
            # window centered at x: sigma(B(z,t) & B(x,r)) <= sigma(B(x,r)),
            # handled only in the concentric case z = x
            if np.allclose(z, np.asarray(x, float)):
                mass = sigma.ball_masses(np.asarray(x, float), radii)
                m[i] += np.maximum(mass, 0.0) ** q * radii ** (-c) / c
        return m
    raise ValueError(f"unknown inner weight kind {kind!r}")


# ---------------------------------------------------------------------------
# The generic two-weight evaluator


def two_weight_bound(sigma: Measure, omega: Measure, x, *, params: PotentialParams,
                     c_outer: float, c_inner: float, inner_kind: str,
                     r_max: float = math.inf, quad: QuadratureSpec | None = None,
                     outer_restricted: bool = False,
                     outer_power: float | None = None) -> PotentialValue:
    """Evaluate the exponential-weight two-measure integral at x.

    outer_restricted selects exp(c_out * W(chi_{B(x,r)} sigma)(x)) instead of
    the plain truncated potential (the supersolution form).
    """
    quad = quad or QuadratureSpec()
    n = params.n
    x = np.asarray(x, dtype=float)
    s = params.s
    wq = 1.0 / (s - 1.0)
    wc = (n - params.beta * s) / (s - 1.0)
    pow_out = outer_power if outer_power is not None else wq
    c_kernel = (n - params.beta * s) * pow_out
    flags = []

    if omega.total_mass() <= 0:
        return PotentialValue(0.0)
    if omega.atom_mass_at(x) > 0:
        return PotentialValue(math.inf, 0.0, ("atom-at-point",))

    ext_s = sigma.support_extent(x) if sigma.total_mass() > 0 else 0.0
    ext_o = omega.support_extent(x)
    if math.isinf(ext_o) or math.isinf(ext_s):
        flags.append("unbounded-support")
        ext_all = r_max if math.isfinite(r_max) else 2.0**quad.unbounded_octaves
    else:
        ext_all = max(ext_s, ext_o)
    d0 = omega.support_distance(x)
    scale = max(ext_all, 1e-300)
    r_floor = scale * 2.0 ** (-quad.r_min_octaves)
    r_lo = max(d0, r_floor)
    if math.isfinite(r_max):
        r_hi = r_max
    elif sigma.total_mass() > 0:
        r_hi = max(4.0 * ext_s, ext_o, 2.0 * r_lo)
    else:
        r_hi = ext_o
    if r_hi <= r_lo:
        r_lo = r_hi * 2.0 ** (-quad.r_min_octaves)
    if r_lo >= r_hi:
        return PotentialValue(0.0)

    extra = np.concatenate([sigma.critical_radii(x), omega.critical_radii(x)])
    nodes = geometric_nodes(r_lo, r_hi, quad.per_octave, extra)
    mids = midpoints(nodes)

    # outer weight at the midpoints
    if sigma.total_mass() > 0:
        outer_vals = _truncated_matrix(sigma, x[None, :], mids, wq, wc, quad)[0]
        if outer_restricted:
            mass_x = sigma.ball_masses(x, mids)
            outer_vals = outer_vals + np.maximum(mass_x, 0.0) ** wq * mids ** (-wc) / wc
    else:
        outer_vals = np.zeros(len(mids))
    A = _safe_exp(c_outer * outer_vals)

    # inner integral against omega at the midpoints
    trivial_inner = inner_kind == "none" or c_inner == 0.0 or sigma.total_mass() == 0
    if trivial_inner:
        B = np.maximum(omega.ball_masses(x, mids), 0.0)
    else:
        zs, ws = omega.decomposition()
        dist = np.linalg.norm(zs - x, axis=1)
        keep = dist <= r_hi
        zs, ws, dist = zs[keep], ws[keep], dist[keep]
        M = _inner_matrix(sigma, x, zs, mids, inner_kind, params, quad)
        order = np.argsort(dist, kind="stable")
        E = ws[order, None] * _safe_exp(c_inner * M[order])
        cums = np.vstack([np.zeros(len(mids)), np.cumsum(E, axis=0)])
        counts = np.searchsorted(dist[order], mids, side="right")
        B = cums[counts, np.arange(len(mids))]

    G = (A * B) ** pow_out
    pieces = kernel_pieces(nodes, c_kernel)
    total = float(np.dot(G, pieces))

    if math.isinf(r_max) and quad.tail_completion and math.isfinite(ext_all):
        # saturate the outer weight at its full-potential limit; the inner
        # integral is already at its final value beyond the supports
        if sigma.total_mass() > 0:
            w_full = wolff(sigma, x, params.beta, s, quad=quad)
            a_inf = math.exp(min(c_outer * w_full, EXP_CAP))
        else:
            a_inf = 1.0
        if trivial_inner:
            b_inf = omega.total_mass()
        else:
            b_inf = float(B[-1])
            if inner_kind == "local":
                flags.append("tail-sampled")
        total += (a_inf * b_inf) ** pow_out * kernel_tail(c_kernel, r_hi)
    elif math.isinf(r_max) and not math.isfinite(ext_all):
        flags.append("tail-divergent-risk")
    return PotentialValue(total, 0.0, tuple(flags))


# ---------------------------------------------------------------------------
# Operator, supersolution and obstacle problem (quasilinear surface)


def wolff_operator(sigma: Measure, f_values: np.ndarray, x, p: float,
                   quad: QuadratureSpec | None = None) -> float:
    """T(f)(x): nonlinear potential of the reweighted measure f^(p-1) d sigma."""
    f_values = np.asarray(f_values, dtype=float)
    if np.any(f_values < 0):
        raise ValueError("f must be nonnegative on the support")
    if sigma.total_mass() == 0:
        return 0.0
    sig_w = sigma.reweighted(f_values ** (p - 1.0))
    return wolff(sig_w, x, 1.0, p, quad=quad)


def ball_exp_mass(sigma: Measure, omega: Measure, y, s_radius: float, beta: float,
                  p: float) -> float:
    """int_{B(y,s)} exp(beta * V_{B(y,s)}(z)) dW(z), exact for atomic omega."""
    if s_radius <= 0:
        raise ValueError("need a positive radius")
    y = np.asarray(y, dtype=float)
    zs, ws = omega.decomposition()
    if len(ws) == 0:
        return 0.0
    inside = np.linalg.norm(zs - y, axis=1) <= s_radius
    total = 0.0
    for z, w in zip(zs[inside], ws[inside]):
        v = local_ball_potential(sigma, y, s_radius, z, p)
        total += w * math.exp(min(beta * v, EXP_CAP))
    return total


def supersolution(sigma: Measure, omega: Measure, x, beta: float, p: float,
                  quad: QuadratureSpec | None = None) -> PotentialValue:
    """The candidate obstacle-problem solution

        v(x) = int_0^inf ( e^{b W(chi_{B(x,r)} s)(x)} / r^(n-p)
                           * int_{B(x,r)} e^{b V_{B(x,r)}(z)} dW(z) )^(1/(p-1)) dr/r.
    """
    params = PotentialParams.quasilinear(sigma.n, p)
    return two_weight_bound(
        sigma, omega, x, params=params, c_outer=beta, c_inner=beta,
        inner_kind="local", quad=quad, outer_restricted=True,
    )


@dataclass
class ObstacleReport:
    rows: list  # (point, v, w_omega, t_v, ratio)
    obstacle_ok: bool
    constant: float
    flags: list = field(default_factory=list)


def obstacle_check(sigma: Measure, omega: Measure, beta: float, p: float,
                   sample_points, quad: QuadratureSpec | None = None) -> ObstacleReport:
    """Verify v >= W(omega) and measure C* = max T(v) / (v - W(omega))."""
    quad = quad or QuadratureSpec()
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    flags = []
    if sigma.total_mass() > 0:
        spts, _ = sigma.decomposition()
        v_supp = np.array([supersolution(sigma, omega, z, beta, p, quad).value for z in spts])
        if np.any(~np.isfinite(v_supp)):
            flags.append("supersolution-infinite-on-support")
        sig_v = sigma.reweighted(np.where(np.isfinite(v_supp), v_supp, 0.0) ** (p - 1.0))
    else:
        sig_v = sigma
    rows = []
    cstar = 0.0
    ok = True
    for x in pts:
        v = supersolution(sigma, omega, x, beta, p, quad).value
        w_om = wolff(omega, x, 1.0, p, quad=quad)
        t_v = wolff(sig_v, x, 1.0, p, quad=quad) if sigma.total_mass() > 0 else 0.0
        gap = v - w_om
        if v < w_om * (1.0 - 1e-9):
            ok = False
        if t_v == 0.0 and gap <= 0.0:
            ratio = 0.0  # degenerate 0/0
        elif gap <= 0.0:
            ratio = math.inf
            flags.append("hard-failure: positive T(v) with vanishing margin")
            ok = False
        else:
            ratio = t_v / gap
        rows.append((x.tolist(), v, w_om, t_v, ratio))
        cstar = max(cstar, ratio)
    return ObstacleReport(rows, ok, cstar, flags)


@dataclass
class LocalEstimateReport:
    lhs: float
    rhs: float
    ratio: float


def local_estimate_check(sigma: Measure, omega: Measure, x, r: float, beta: float,
                         p: float, quad: QuadratureSpec | None = None,
                         max_support_points: int = 400) -> LocalEstimateReport:
    """Local build-up inequality: sigma-integral of the (p-1) power of the inner
    weighted potential against int (e^{b V} - 1) dW over the doubled ball."""
    quad = quad or QuadratureSpec()
    n = sigma.n
    x = np.asarray(x, dtype=float)
    params = PotentialParams.quasilinear(n, p)
    spts, sw = restrict(sigma, Ball(tuple(x), r)).decomposition()
    if len(sw) > max_support_points:
        stride = len(sw) / max_support_points
        idx = (np.arange(max_support_points) * stride).astype(int)
        scale_w = sw.sum() / sw[idx].sum()
        spts, sw = spts[idx], sw[idx] * scale_w
    inner_quad = QuadratureSpec(per_octave=max(8, quad.per_octave // 4),
                                r_min_octaves=30, tail_completion=True)
    lhs = 0.0
    sig_window = restrict(sigma, Ball(tuple(x), r)) if p <= 2 else None
    for y, wy in zip(spts, sw):
        d0 = max(omega.support_distance(y), r * 2.0 ** (-30))
        if d0 >= r:
            continue
        t_nodes = geometric_nodes(d0 * (1 - 1e-9) if d0 > 0 else r * 2.0 ** (-30), r,
                                  inner_quad.per_octave, omega.critical_radii(y))
        t_mids = midpoints(t_nodes)
        mu_vals = np.array([ball_exp_mass(sigma, omega, y, float(t), beta, p) for t in t_mids])
        if p <= 2:
            wgt = math.exp(min(beta * wolff(sig_window, y, 1.0, p, quad=inner_quad), EXP_CAP))
            g = wgt * (mu_vals * t_mids ** (p - n)) ** (1.0 / (p - 1.0))
        else:
            wvals = _truncated_matrix(sigma, y[None, :], t_mids, 1.0 / (p - 1.0),
                                      (n - p) / (p - 1.0), inner_quad)[0]
            # window-restricted full potential at y for window B(y,t)
            mass_y = sigma.ball_masses(y, t_mids)
            wvals = wvals + np.maximum(mass_y, 0.0) ** (1.0 / (p - 1.0)) * t_mids ** (
                -(n - p) / (p - 1.0)
            ) * (p - 1.0) / (n - p)
            g = _safe_exp(beta * wvals) * (mu_vals * t_mids ** (p - n)) ** (1.0 / (p - 1.0))
        inner = float(np.dot(g, np.diff(np.log(t_nodes))))
        lhs += wy * inner ** (p - 1.0)
    zs, zw = omega.decomposition()
    inside = np.linalg.norm(zs - x, axis=1) <= 2.0 * r
    rhs = 0.0
    for z, w in zip(zs[inside], zw[inside]):
        v = local_ball_potential(sigma, x, 2.0 * r, z, p)
        rhs += w * (math.exp(min(beta * v, EXP_CAP)) - 1.0)
    ratio = 0.0 if rhs == 0 and lhs == 0 else (math.inf if rhs == 0 else lhs / rhs)
    return LocalEstimateReport(lhs, rhs, ratio)


# ---------------------------------------------------------------------------
# Tail finiteness and localization


@dataclass
class TailReport:
    finite: bool
    value: float


def tail_finiteness(sigma: Measure, omega: Measure, x0, big_r: float, c: float,
                    p: float, quad: QuadratureSpec | None = None) -> TailReport:
    """Tail integral over (R, infinity) of the upper-bound integrand, with the
    outer mass counted outside B(x0, R) only; finiteness licenses untruncated
    supersolutions."""
    quad = quad or QuadratureSpec()
    n = sigma.n
    x0 = np.asarray(x0, dtype=float)
    if omega.total_mass() == 0:
        return TailReport(True, 0.0)
    unbounded = math.isinf(sigma.support_extent(x0)) or math.isinf(omega.support_extent(x0))
    if unbounded:
        r_hi = big_r * 2.0**quad.unbounded_octaves
    else:
        r_hi = max(2.0 * max(sigma.support_extent(x0), omega.support_extent(x0)), 2.0 * big_r)
    nodes = geometric_nodes(big_r, r_hi, quad.per_octave,
                            np.concatenate([sigma.critical_radii(x0), omega.critical_radii(x0)]))
    mids = midpoints(nodes)
    # outer exponential: Wolff integrand of the mass outside B(x0, R)
    masses_all = sigma.ball_masses(x0, mids)
    masses_in = sigma.ball_masses(x0, np.minimum(mids, big_r))
    m_out = np.maximum(masses_all - masses_in, 0.0)

    def outer_cum(rs):
        t_nodes = geometric_nodes(big_r * 0.5, float(rs[-1]), quad.per_octave,
                                  sigma.critical_radii(x0))
        t_mids = midpoints(t_nodes)
        mo = np.maximum(
            sigma.ball_masses(x0, t_mids) - sigma.ball_masses(x0, np.minimum(t_mids, big_r)), 0.0
        )
        vals = (mo ** (1.0 / (p - 1.0))) * kernel_pieces(t_nodes, (n - p) / (p - 1.0))
        cum = np.concatenate([[0.0], np.cumsum(vals)])
        idx = np.clip(np.searchsorted(t_nodes, rs, side="right") - 1, 0, len(cum) - 1)
        return cum[idx]

    A = _safe_exp(c * outer_cum(mids))
    if unbounded:
        # exp weights are >= 1, so the unweighted mass gives a conclusive
        # divergence probe for spread-out data
        B = np.maximum(omega.ball_masses(x0, mids), 0.0)
    else:
        zs, zw = omega.decomposition()
        dist = np.linalg.norm(zs - x0, axis=1)
        M = _truncated_matrix(sigma, zs, mids, 1.0, n - p, quad)
        order = np.argsort(dist, kind="stable")
        E = zw[order, None] * _safe_exp(c * M[order])
        cums = np.vstack([np.zeros(len(mids)), np.cumsum(E, axis=0)])
        counts = np.searchsorted(dist[order], mids, side="right")
        B = cums[counts, np.arange(len(mids))]
    G = (A * B * mids ** (p - n)) ** (1.0 / (p - 1.0))
    log_pieces = np.diff(np.log(nodes))
    contrib = G * log_pieces
    total = float(contrib.sum())
    if unbounded:
        # compare octave sums: lack of decay means divergence
        half = mids >= r_hi / 2.0
        quarter = (mids >= r_hi / 4.0) & ~half
        last, prev = float(contrib[half].sum()), float(contrib[quarter].sum())
        if last >= 0.75 * prev and last > 0:
            return TailReport(False, total)
        return TailReport(True, total)
    # compact supports: the integrand decays like a power beyond the supports
    tail = float(G[-1]) * kernel_tail((n - p) / (p - 1.0), r_hi) * r_hi ** ((n - p) / (p - 1.0))
    return TailReport(True, total + tail)


def localize(sigma: Measure, omega: Measure, x0, big_r: float):
    """Restrict both measures to B(x0, R)."""
    if big_r <= 0:
        raise ValueError("need R > 0")
    ball = Ball(tuple(np.asarray(x0, dtype=float)), float(big_r))
    return restrict(sigma, ball), restrict(omega, ball)


# ---------------------------------------------------------------------------
# Neumann iteration lower bounds


def _wolff_at_support(mu: Measure, pts: np.ndarray, exclude_self: bool, p: float,
                      quad: QuadratureSpec | None) -> np.ndarray:
    """Nonlinear potential of mu at its own support points; the self atom is
    removed (particle discretizations otherwise self-diverge)."""
    out = np.zeros(len(pts))
    base_pts, base_w = mu.decomposition()
    for i, z in enumerate(pts):
        if exclude_self:
            keep = ~np.all(np.isclose(base_pts, z), axis=1)
            m_i = PointMasses(base_pts[keep], base_w[keep], n=mu.n)
        else:
            m_i = mu
        out[i] = wolff(m_i, z, 1.0, p, quad=quad)
    return out


@dataclass
class NeumannReport:
    terms: list
    weights: list
    partial_sums: list

    @property
    def value(self) -> float:
        return self.partial_sums[-1] if self.partial_sums else 0.0


def nonlinear_operator(sigma_loc: Measure, f_values: np.ndarray, x, p: float,
                       quad: QuadratureSpec | None = None) -> float:
    """N(f)(x) for the localized coefficient measure (untruncated kernel)."""
    return wolff_operator(sigma_loc, f_values, x, p, quad)


def neumann_series_lower(sigma_loc: Measure, omega_loc: Measure, x, p: float,
                         j_max: int, series_constant: float = 1.0, q: float = 2.0,
                         quad: QuadratureSpec | None = None) -> NeumannReport:
    """Partial sums sum_j C^j w_j N^j(W omega~)(x); w_j = 1 for p <= 2 and
    j^(q(2-p)/(p-1)) for p > 2 (j >= 1)."""
    if j_max < 0:
        raise ValueError("j_max must be >= 0")
    x = np.asarray(x, dtype=float)
    terms = [wolff(omega_loc, x, 1.0, p, quad=quad)]
    if sigma_loc.total_mass() > 0 and j_max > 0:
        pts, _ = sigma_loc.decomposition()
        f = np.array([wolff(omega_loc, z, 1.0, p, quad=quad) for z in pts])
        for _ in range(j_max):
            sig_w = sigma_loc.reweighted(np.where(np.isfinite(f), f, 0.0) ** (p - 1.0))
            terms.append(wolff(sig_w, x, 1.0, p, quad=quad))
            f = _wolff_at_support(sig_w, pts, True, p, quad)
    else:
        terms.extend([0.0] * j_max)
    weights = []
    for j in range(len(terms)):
        if p > 2 and j >= 1:
            weights.append(float(j) ** (q * (2.0 - p) / (p - 1.0)))
        else:
            weights.append(1.0)
    partials = []
    acc = 0.0
    for j, (t, w) in enumerate(zip(terms, weights)):
        acc += series_constant**j * w * t
        partials.append(acc)
    return NeumannReport(terms, weights, partials)


def aux_ball_sum(sigma_loc: Measure, z, t: float, p: float, rel_tol: float = 1e-12,
                 max_terms: int = 400) -> float:
    """sum_j (t/2^j)^(p-n) |B(z, t/2^j)|, the p >= 2 lower-bound auxiliary."""
    if t <= 0:
        raise ValueError("need t > 0")
    n = sigma_loc.n
    z = np.asarray(z, dtype=float)
    if sigma_loc.atom_mass_at(z) > 0:
        return math.inf
    total = 0.0
    for j in range(max_terms):
        rho = t / 2.0**j
        m = sigma_loc.ball_mass(z, rho)
        if m <= 0:
            break
        term = m * rho ** (p - n)
        total += term
        if term < rel_tol * total:
            break
    return total


# ---------------------------------------------------------------------------
# Closed-form bilateral evaluators


def _branch_inner(p: float, side: str) -> str:
    if side == "lower":
        return "wolff" if p <= 2 else "riesz"
    return "riesz" if p <= 2 else "wolff"


def closed_form_lower(sigma: Measure, omega: Measure, x, c: float, p: float,
                      domain=None, quad: QuadratureSpec | None = None,
                      inner: str | None = None) -> PotentialValue:
    """Lower bilateral bound: truncation d(x)/5 in a bounded domain."""
    n = sigma.n
    domain = domain or EntireSpace(n)
    params = PotentialParams.quasilinear(n, p)
    return two_weight_bound(
        sigma, omega, x, params=params, c_outer=c, c_inner=c,
        inner_kind=inner or _branch_inner(p, "lower"),
        r_max=domain.lower_truncation(x), quad=quad,
    )


def upper_bound_eval(sigma: Measure, omega: Measure, x, c: float, p: float,
                     domain=None, quad: QuadratureSpec | None = None,
                     inner: str | None = None) -> PotentialValue:
    """Existence/upper bilateral form: in a bounded domain the measures are
    clipped to the domain and the integral runs to twice the diameter."""
    n = sigma.n
    domain = domain or EntireSpace(n)
    params = PotentialParams.quasilinear(n, p)
    sig = domain.clip(sigma)
    om = domain.clip(omega)
    return two_weight_bound(
        sig, om, x, params=params, c_outer=c, c_inner=c,
        inner_kind=inner or _branch_inner(p, "upper"),
        r_max=domain.upper_truncation(), quad=quad,
    )


# ---------------------------------------------------------------------------
# Gauge bounds


@dataclass
class GaugeSupersolutionReport:
    rows: list
    constant: float
    degenerate: bool


def gauge_supersolution_check(sigma: Measure, beta: float, p: float, sample_points,
                              quad: QuadratureSpec | None = None) -> GaugeSupersolutionReport:
    """v = exp(b W sigma); measures C* = max W(v^(p-1) d sigma) / (v - 1)."""
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    if sigma.total_mass() == 0:
        return GaugeSupersolutionReport([(x.tolist(), 0.0, 0.0, 0.0) for x in pts], 0.0, True)
    spts, _ = sigma.decomposition()
    v_supp = np.array([math.exp(min(beta * wolff(sigma, z, 1.0, p, quad=quad), EXP_CAP))
                       for z in spts])
    sig_v = sigma.reweighted(v_supp ** (p - 1.0))
    rows = []
    cstar = 0.0
    for x in pts:
        v = math.exp(min(beta * wolff(sigma, x, 1.0, p, quad=quad), EXP_CAP))
        lhs = wolff(sig_v, x, 1.0, p, quad=quad)
        gap = v - 1.0
        ratio = 0.0 if (lhs == 0.0 and gap <= 0.0) else (math.inf if gap <= 0 else lhs / gap)
        rows.append((x.tolist(), v, lhs, ratio))
        cstar = max(cstar, ratio)
    return GaugeSupersolutionReport(rows, cstar, False)


def gauge_bounds(sigma: Measure, x, c: float, p: float, domain=None,
                 quad: QuadratureSpec | None = None):
    """(exp((1/c) W^{d(x)/2} sigma(x)), exp(c W^{2 diam} sigma(x)))."""
    n = sigma.n
    domain = domain or EntireSpace(n)
    r_lo, r_hi = domain.gauge_truncations(x)
    w_lo = wolff(sigma, x, 1.0, p, r_trunc=r_lo, quad=quad)
    w_hi = wolff(sigma, x, 1.0, p, r_trunc=r_hi, quad=quad)
    return math.exp(min(w_lo / c, EXP_CAP)), math.exp(min(c * w_hi, EXP_CAP))


# ---------------------------------------------------------------------------
# Example-class simplifications


def lq_upper_bound(sigma: Measure, omega_grid, x, c: float, q: float, p: float,
                   diam: float, quad: QuadratureSpec | None = None) -> float:
    """Product bound for densities with q-th power integrability:
    [int_0^diam (r^(p-n) int_B w^q)^(1/(p-1)) dr/r]^(1/q) * exp((c/q') W^diam sigma(x))."""
    if q <= 1:
        raise ValueError("need q > 1")
    quad = quad or QuadratureSpec()
    n = sigma.n
    x = np.asarray(x, dtype=float)
    from .measures import GridDensity

    if not isinstance(omega_grid, GridDensity):
        raise ValueError("the density factor needs a grid-density inhomogeneity")
    _, cell_masses = omega_grid.decomposition()
    if len(cell_masses) == 0:
        return 0.0
    cellvol = float(np.prod(omega_grid.widths))
    dens = cell_masses / cellvol
    power_measure = omega_grid.reweighted(dens ** (q - 1.0))
    # power_measure ball masses = int_B w^q dx restricted to cells
    d0 = power_measure.support_distance(x)
    r_lo = max(d0, diam * 2.0 ** (-quad.r_min_octaves))
    if r_lo >= diam:
        first = 0.0
    else:
        nodes = geometric_nodes(r_lo, diam, quad.per_octave)
        mids = midpoints(nodes)
        iq = np.maximum(power_measure.ball_masses(x, mids), 0.0)
        pieces = kernel_pieces(nodes, (n - p) / (p - 1.0))
        first = float(np.dot(iq ** (1.0 / (p - 1.0)), pieces)) ** (1.0 / q)
    q_conj = q / (q - 1.0)
    w_sig = wolff(sigma, x, 1.0, p, r_trunc=diam, quad=quad)
    return first * math.exp(min(c / q_conj * w_sig, EXP_CAP))


def weak_ainf_bilateral(sigma: Measure, omega: Measure, x, c1: float, c2: float,
                        p: float, quad: QuadratureSpec | None = None):
    """Both sides of the collapsed bilateral bound for A-infinity-type data:
    int (e^{c W^r sigma(x)} |B(x,r)|_w / r^(n-p))^(1/(p-1)) dr/r at c = c1, c2."""
    n = sigma.n
    params = PotentialParams.quasilinear(n, p)
    lo = two_weight_bound(sigma, omega, x, params=params, c_outer=c1, c_inner=0.0,
                          inner_kind="none", quad=quad)
    hi = two_weight_bound(sigma, omega, x, params=params, c_outer=c2, c_inner=0.0,
                          inner_kind="none", quad=quad)
    return lo.value, hi.value


def morrey_constant(omega: Measure, eps: float, p: float, sampling=None):
    """sup omega(B(x,r)) / r^(n-p+eps): the mass-decay (Morrey) constant."""
    if eps <= 0:
        raise ValueError("need eps > 0")
    from .capacity import SamplingSpec, ball_growth_constant

    return ball_growth_constant(omega, omega.n - p + eps, sampling or SamplingSpec())


def morrey_exp_integral(sigma: Measure, omega: Measure, ball: Ball, c: float, p: float,
                        quad: QuadratureSpec | None = None) -> float:
    """int_B exp(c W^r_{1,p} sigma(z)) dW(z) over the ball B = B(x, r)."""
    quad = quad or QuadratureSpec()
    n = sigma.n
    x = np.asarray(ball.center, dtype=float)
    zs, ws = omega.decomposition()
    inside = np.linalg.norm(zs - x, axis=1) <= ball.radius
    zs, ws = zs[inside], ws[inside]
    if len(ws) == 0:
        return 0.0
    M = _truncated_matrix(sigma, zs, np.array([ball.radius]), 1.0 / (p - 1.0),
                          (n - p) / (p - 1.0), quad)[:, 0]
    return float(np.dot(ws, _safe_exp(c * M)))


def nested_dyadic_sum(sigma: Measure, omega: Measure, ball: Ball, m: int, p: float,
                      depth: int, top_level: int | None = None,
                      max_cubes: int = 20000) -> float:
    """m-fold nested dyadic sum of window-restricted Carleson terms, integrated
    against the inhomogeneity over the ball."""
    if m < 1:
        raise ValueError("need m >= 1")
    from .dyadic import cube_at
    from .geometry import Box as BoxRegion

    n = sigma.n
    x = np.asarray(ball.center, dtype=float)
    if top_level is None:
        top_level = int(math.ceil(math.log2(ball.radius))) + 1
    levels = list(range(top_level, top_level - depth - 1, -1))
    zs, ws = omega.decomposition()
    inside = np.linalg.norm(zs - x, axis=1) <= ball.radius
    zs, ws = zs[inside], ws[inside]
    if len(zs) * len(levels) > max_cubes:
        raise ValueError("dyadic tree too large; reduce depth or samples")
    total = 0.0
    window = Ball(tuple(x), ball.radius)
    for z, w in zip(zs, ws):
        a = np.zeros(len(levels))
        for i, lv in enumerate(levels):
            cube = cube_at(z, lv)
            lo, hi = cube.box()
            mass, _ = sigma.region_mass([BoxRegion(tuple(lo), tuple(hi)), window])
            a[i] = (mass / cube.side ** (n - p)) ** (1.0 / (p - 1.0)) if mass > 0 else 0.0
        # T_i[j] = sum over chains of length i starting at position >= j
        t = np.concatenate([np.cumsum(a[::-1])[::-1], [0.0]])
        for _ in range(m - 1):
            nxt = np.zeros(len(levels) + 1)
            for j in range(len(levels) - 1, -1, -1):
                nxt[j] = nxt[j + 1] + a[j] * t[j]
            t = nxt
        total += w * t[0]
    return total


# ---------------------------------------------------------------------------
# Fully nonlinear presets and the generic bound


def hessian_params(k: int, n: int, **kw) -> PotentialParams:
    """Kernel orders for the k-Hessian analogue: (beta, s) = (2k/(k+1), k+1)
    and linear order 2k."""
    if k < 1 or 2 * k >= n:
        raise ValueError("need 1 <= k < n/2")
    return PotentialParams(n=n, alpha=2.0 * k, beta=2.0 * k / (k + 1.0), s=float(k + 1), **kw)


def hessian_bound(sigma: Measure, omega: Measure, x, c: float, k: int, n: int,
                  side: str = "upper", outer_exponent: str = "match",
                  quad: QuadratureSpec | None = None) -> PotentialValue:
    """Bilateral forms for the fully nonlinear preset.

    side = "lower" carries the linear inner weight with outer exponent 1/k;
    side = "upper" carries the nonlinear inner weight, with outer exponent
    1/k ("match") or 1/(2k) ("half") -- both of the stated variants are
    available, neither asserted as canonical.
    """
    params = hessian_params(k, n)
    if side == "lower":
        inner = "riesz"
        pow_out = 1.0 / k
    elif side == "upper":
        inner = "wolff"
        pow_out = 1.0 / k if outer_exponent == "match" else 1.0 / (2.0 * k)
    else:
        raise ValueError("side must be 'lower' or 'upper'")
    return two_weight_bound(sigma, omega, x, params=params, c_outer=c, c_inner=c,
                            inner_kind=inner, quad=quad, outer_power=pow_out)


# ---------------------------------------------------------------------------
# Summation by parts


def sum_by_parts_power(lams, m: int):
    """(1/m) (sum l)^m <= sum_j l_j (sum_{k>=j} l_k)^(m-1)."""
    lams = np.asarray(lams, dtype=float)
    if np.any(lams < 0):
        raise ValueError("sequence must be nonnegative")
    if m < 1:
        raise ValueError("need m >= 1")
    lhs = lams.sum() ** m / m
    tails = np.cumsum(lams[::-1])[::-1]
    rhs = float(np.dot(lams, tails ** (m - 1)))
    return lhs, rhs, lhs <= rhs * (1.0 + 1e-12)


def sum_by_parts_exp(lams):
    """sum_j l_j e^{sum_{k>=j} l_k} <= 2 (e^{sum l} - 1), for 0 <= l_j <= 1."""
    lams = np.asarray(lams, dtype=float)
    if np.any(lams < 0):
        raise ValueError("sequence must be nonnegative")
    if np.any(lams > 1.0):
        raise ValueError("the exponential form requires entries <= 1")
    tails = np.cumsum(lams[::-1])[::-1]
    lhs = float(np.dot(lams, np.exp(tails)))
    rhs = 2.0 * (math.exp(lams.sum()) - 1.0)
    return lhs, rhs, lhs <= rhs * (1.0 + 1e-12)
