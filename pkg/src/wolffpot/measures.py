"""Nonnegative measures with ball, cube and region mass queries.

Three concrete variants:

* :class:`PointMasses` -- finite atomic measures, exact queries backed by a
  spatial index.
* :class:`RadialProfile` -- radially symmetric densities given as piecewise
  power profiles about a center, plus an optional atom at the center.  Ball
  masses centered at the profile center are exact; off-center balls use
  closed-form cap volumes (uniform pieces) or cap-area quadrature with a
  reported error bound.
* :class:`GridDensity` -- a uniform cell grid over an axis box.  Axis-aligned
  box masses are exact; ball masses subsample boundary cells and report the
  corresponding error.

All measures are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

from .geometry import (
    Ball,
    Box,
    HalfSpace,
    ball_intersection_volume,
    classify_cell,
    sphere_in_ball_fraction,
    sphere_surface,
    unit_ball_volume,
)


class ConfigError(ValueError):
    """Invalid measure/run configuration; carries a field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@lru_cache(maxsize=16)
def _gauss_rule(m: int):
    z, w = np.polynomial.legendre.leggauss(m)
    return z, w


def _check_point(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"dimension mismatch: point has shape {x.shape}, measure lives in R^{n}")
    return x


class Measure:
    """Common query surface; subclasses fill in the variant-specific parts."""

    n: int

    # -- scalar queries ----------------------------------------------------

    def ball_mass(self, x, r: float) -> float:
        val, _ = self.ball_mass_with_error(x, r)
        return val

    def ball_mass_with_error(self, x, r: float):
        if r < 0:
            raise ValueError("ball radius must be nonnegative")
        vals, errs = self.ball_masses_with_error(x, np.array([r]))
        return float(vals[0]), float(errs[0])

    def ball_masses(self, x, radii) -> np.ndarray:
        vals, _ = self.ball_masses_with_error(x, radii)
        return vals

    def ball_masses_with_error(self, x, radii):
        raise NotImplementedError

    def box_mass(self, lo, hi) -> float:
        raise NotImplementedError

    def region_mass(self, regions) -> tuple[float, float]:
        """Mass of the intersection of the query regions, with error bound."""
        raise NotImplementedError

    def total_mass(self) -> float:
        raise NotImplementedError

    # -- structure ---------------------------------------------------------

    def atom_mass_at(self, x) -> float:
        return 0.0

    def atoms(self):
        """(locations, masses) of the atomic part."""
        return np.zeros((0, self.n)), np.zeros(0)

    def has_atoms(self) -> bool:
        return len(self.atoms()[1]) > 0

    def support_distance(self, x) -> float:
        """Distance from x to the support (0 if x in support)."""
        raise NotImplementedError

    def support_extent(self, x) -> float:
        """Supremum of |x - z| over the support; inf if unbounded."""
        raise NotImplementedError

    def support_box(self):
        """(lo, hi) axis box covering the support; None for the zero measure."""
        raise NotImplementedError

    def critical_radii(self, x) -> np.ndarray:
        """Radii at which t -> ball_mass(x, t) jumps or kinks."""
        return np.zeros(0)

    def decomposition(self):
        """(points, weights) quadrature rule for integrals against the measure.

        Exact for atomic measures; cell rules otherwise.
        """
        raise NotImplementedError

    def restrict(self, region) -> "Measure":
        raise NotImplementedError

    def scaled(self, c: float) -> "Measure":
        raise NotImplementedError

    def reweighted(self, values: np.ndarray) -> "Measure":
        """Measure with density `values` (given on decomposition points) applied.

        Atomic measures stay exact; cell-based measures reweight per cell.
        """
        pts, w = self.decomposition()
        values = np.asarray(values, dtype=float)
        if values.shape != w.shape:
            raise ValueError("reweighting values must match the decomposition")
        if np.any(values < 0):
            raise ValueError("reweighting requires nonnegative values")
        return PointMasses(pts, w * values)

    def integrate(self, f) -> float:
        pts, w = self.decomposition()
        if len(w) == 0:
            return 0.0
        return float(np.dot(w, np.asarray([f(p) for p in pts], dtype=float)))


# ---------------------------------------------------------------------------


class PointMasses(Measure):
    """Finite sum of nonnegative point masses."""

    def __init__(self, points, masses, n: int | None = None):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        masses = np.asarray(masses, dtype=float).ravel()
        if points.size == 0:
            if n is None:
                raise ValueError("empty PointMasses needs an explicit dimension")
            points = np.zeros((0, n))
        if len(points) != len(masses):
            raise ValueError("points and masses must have equal length")
        if np.any(masses < 0):
            raise ValueError("masses must be nonnegative")
        keep = masses > 0
        self.points = points[keep]
        self.masses = masses[keep]
        self.n = int(points.shape[1])
        self._tree = cKDTree(self.points) if len(self.points) else None

    def ball_masses_with_error(self, x, radii):
        x = _check_point(x, self.n)
        radii = np.asarray(radii, dtype=float)
        if len(self.masses) == 0:
            return np.zeros(radii.shape), np.zeros(radii.shape)
        d = np.linalg.norm(self.points - x, axis=1)
        order = np.argsort(d)
        cum = np.concatenate([[0.0], np.cumsum(self.masses[order])])
        idx = np.searchsorted(d[order], radii, side="right")
        return cum[idx], np.zeros(radii.shape)

    def ball_mass(self, x, r: float) -> float:
        # closed balls: atoms on the boundary count
        x = _check_point(x, self.n)
        if r < 0:
            raise ValueError("ball radius must be nonnegative")
        if self._tree is None:
            return 0.0
        idx = self._tree.query_ball_point(x, r)
        return float(self.masses[idx].sum())

    def box_mass(self, lo, hi) -> float:
        lo = _check_point(lo, self.n)
        hi = _check_point(hi, self.n)
        inside = np.all((self.points >= lo) & (self.points < hi), axis=1)
        return float(self.masses[inside].sum())

    def region_mass(self, regions):
        keep = np.ones(len(self.masses), dtype=bool)
        for reg in regions:
            keep &= reg.contains(self.points)
        return float(self.masses[keep].sum()), 0.0

    def total_mass(self) -> float:
        return float(self.masses.sum())

    def atom_mass_at(self, x) -> float:
        x = _check_point(x, self.n)
        if len(self.masses) == 0:
            return 0.0
        scale = 1.0 + np.abs(x).max()
        hit = np.linalg.norm(self.points - x, axis=1) <= 1e-12 * scale
        return float(self.masses[hit].sum())

    def atoms(self):
        return self.points, self.masses

    def support_distance(self, x) -> float:
        x = _check_point(x, self.n)
        if len(self.masses) == 0:
            return math.inf
        return float(np.linalg.norm(self.points - x, axis=1).min())

    def support_extent(self, x) -> float:
        x = _check_point(x, self.n)
        if len(self.masses) == 0:
            return 0.0
        return float(np.linalg.norm(self.points - x, axis=1).max())

    def support_box(self):
        if len(self.masses) == 0:
            return None
        return self.points.min(axis=0), self.points.max(axis=0)

    def critical_radii(self, x) -> np.ndarray:
        x = _check_point(x, self.n)
        if len(self.masses) == 0:
            return np.zeros(0)
        return np.unique(np.linalg.norm(self.points - x, axis=1))

    def decomposition(self):
        return self.points, self.masses

    def restrict(self, region) -> "PointMasses":
        keep = region.contains(self.points) if len(self.masses) else np.zeros(0, bool)
        return PointMasses(self.points[keep], self.masses[keep], n=self.n)

    def scaled(self, c: float) -> "PointMasses":
        return PointMasses(self.points, self.masses * c, n=self.n)


def dirac(location, mass: float = 1.0) -> PointMasses:
    return PointMasses([location], [mass])


def zero_measure(n: int) -> PointMasses:
    return PointMasses(np.zeros((0, n)), np.zeros(0), n=n)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProfilePiece:
    """Density coef * s**exponent for s in [lo, hi)."""

    coef: float
    exponent: float
    lo: float
    hi: float


class RadialProfile(Measure):
    """Radial density about a center, as piecewise power profile + center atom.

    The cumulative mass M(t) = mu(closed ball of radius t about the center) is
    exact.  `integration_cells` controls the per-axis resolution of the cell
    rule used for integrals against the measure.
    """

    def __init__(self, center, pieces, atom: float = 0.0, integration_cells: int = 24):
        center = np.asarray(center, dtype=float)
        self.center = center
        self.n = len(center)
        if self.n < 2:
            raise ValueError("dimension must be >= 2")
        if atom < 0:
            raise ValueError("atom mass must be nonnegative")
        clean = []
        for p in pieces:
            if p.hi <= p.lo or p.coef == 0:
                continue
            if p.coef < 0:
                raise ValueError("density coefficients must be nonnegative")
            if p.exponent <= -self.n:
                raise ValueError("density exponent must exceed -n for local finiteness")
            clean.append(p)
        self.pieces = sorted(clean, key=lambda p: p.lo)
        for a, b in zip(self.pieces, self.pieces[1:]):
            if b.lo < a.hi - 1e-15 * max(1.0, a.hi):
                raise ValueError("profile pieces must not overlap")
        self.atom = float(atom)
        self.integration_cells = int(integration_cells)
        self._decomp = None

    # cumulative continuous mass
    def cumulative(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        surf = sphere_surface(self.n)
        for p in self.pieces:
            k = self.n + p.exponent
            upper = np.clip(t, p.lo, p.hi)
            out += surf * p.coef / k * np.maximum(upper**k - p.lo**k, 0.0)
        return out

    def density_at(self, s: float) -> float:
        for p in self.pieces:
            if p.lo <= s < p.hi:
                return p.coef * s**p.exponent
        return 0.0

    @property
    def support_radius(self) -> float:
        r = 0.0
        for p in self.pieces:
            r = max(r, p.hi)
        return r

    def total_mass(self) -> float:
        if math.isinf(self.support_radius):
            return math.inf
        return self.atom + float(self.cumulative(np.array(self.support_radius)))

    def ball_masses_with_error(self, x, radii):
        x = _check_point(x, self.n)
        radii = np.asarray(radii, dtype=float)
        d = float(np.linalg.norm(x - self.center))
        if d == 0.0:
            vals = self.cumulative(radii) + self.atom
            return vals, np.zeros(radii.shape)
        vals = np.where(radii >= d, self.atom, 0.0).astype(float)
        errs = np.zeros(radii.shape)
        for p in self.pieces:
            v, e = self._piece_offcenter(p, d, radii)
            vals += v
            errs += e
        return vals, errs

    def _piece_offcenter(self, p: ProfilePiece, d: float, radii: np.ndarray):
        """Mass of the piece inside off-center balls B(x, r), |x - center| = d."""
        surf = sphere_surface(self.n)
        if p.exponent == 0.0:
            # uniform density: difference of closed-form lens volumes
            hi = np.minimum(p.hi, d + radii)
            v_hi = ball_intersection_volume(self.n, d, hi, radii)
            v_lo = ball_intersection_volume(self.n, d, np.full_like(radii, p.lo), radii)
            return p.coef * (v_hi - v_lo), np.zeros(radii.shape)
        # shells fully inside B(x, r): s <= r - d, integrated in closed form
        k = self.n + p.exponent
        full_hi = np.clip(radii - d, p.lo, p.hi)
        vals = surf * p.coef / k * np.maximum(full_hi**k - p.lo**k, 0.0)
        # partial zone |r - d| < s < r + d, cap-area quadrature per radius
        lo = np.maximum(p.lo, np.abs(radii - d))
        hi = np.minimum(p.hi, radii + d)
        live = hi > lo
        errs = np.zeros(radii.shape)
        if np.any(live):
            v, e = self._cap_quadrature_vec(p, d, radii[live], lo[live], hi[live])
            vals[live] += v
            errs[live] += e
        return vals, errs

    def _cap_quadrature_vec(self, p: ProfilePiece, d: float, r: np.ndarray,
                            lo: np.ndarray, hi: np.ndarray, nodes: int = 96):
        surf = sphere_surface(self.n)

        def eval_rule(m):
            z, w = _gauss_rule(m)
            half = 0.5 * (hi - lo)
            s = half[:, None] * z[None, :] + 0.5 * (hi + lo)[:, None]
            frac = sphere_in_ball_fraction(self.n, s, d, r[:, None])
            integ = frac * p.coef * s**p.exponent * surf * s ** (self.n - 1)
            return half * (integ @ w)

        fine = eval_rule(nodes)
        coarse = eval_rule(nodes // 2)
        return fine, np.abs(fine - coarse)

    def _cap_quadrature(self, p: ProfilePiece, d: float, r: float, lo: float,
                        hi: float, nodes: int = 96):
        v, e = self._cap_quadrature_vec(p, d, np.array([r]), np.array([lo]),
                                        np.array([hi]), nodes)
        return float(v[0]), float(e[0])

    def concentric_lens_masses(self, x, caps, radii):
        """mu(B(center, a) & B(x, r)) for paired arrays a=caps, r=radii.

        Exact for uniform pieces; quadrature with error otherwise.  The
        intersection with the concentric cap is exact because spheres about
        the center are either inside or outside B(center, a).
        """
        x = _check_point(x, self.n)
        caps = np.asarray(caps, dtype=float)
        radii = np.asarray(radii, dtype=float)
        caps_b, radii_b = np.broadcast_arrays(caps, radii)
        d = float(np.linalg.norm(x - self.center))
        if d == 0.0:
            eff = np.minimum(caps_b, radii_b)
            return self.cumulative(eff) + np.where(eff >= 0, self.atom, 0.0), np.zeros(caps_b.shape)
        vals = np.where(d <= radii_b, self.atom, 0.0).astype(float)
        errs = np.zeros(caps_b.shape)
        for p in self.pieces:
            hi_eff = np.minimum(np.minimum(p.hi, caps_b), d + radii_b)
            if p.exponent == 0.0:
                v_hi = ball_intersection_volume(self.n, d, np.maximum(hi_eff, 0.0), radii_b)
                v_lo = ball_intersection_volume(self.n, d, np.full(caps_b.shape, p.lo), radii_b)
                vals += p.coef * np.maximum(v_hi - v_lo, 0.0)
            else:
                flat_hi = hi_eff.ravel()
                flat_r = radii_b.ravel()
                add = np.zeros(flat_hi.shape)
                err = np.zeros(flat_hi.shape)
                surf = sphere_surface(self.n)
                for i in range(len(flat_hi)):
                    r = flat_r[i]
                    full_hi = min(max(r - d, 0.0), flat_hi[i])
                    if full_hi > p.lo:
                        k = self.n + p.exponent
                        add[i] += surf * p.coef / k * (full_hi**k - max(p.lo, 0.0) ** k)
                    lo = max(p.lo, abs(r - d))
                    hi2 = min(flat_hi[i], r + d)
                    if hi2 > lo:
                        v, e = self._cap_quadrature(p, d, r, lo, hi2)
                        add[i] += v
                        err[i] += e
                vals += add.reshape(caps_b.shape)
                errs += err.reshape(caps_b.shape)
        return vals, errs

    def box_mass(self, lo, hi) -> float:
        val, _ = self.region_mass([Box(tuple(lo), tuple(hi))])
        return val

    def region_mass(self, regions):
        # fast paths on ball-only queries
        balls = [r for r in regions if isinstance(r, Ball)]
        if len(balls) == len(regions):
            concentric = [b for b in balls if np.allclose(b.center, self.center)]
            off = [b for b in balls if not np.allclose(b.center, self.center)]
            if len(off) == 0:
                t = min(b.radius for b in balls)
                return float(self.cumulative(np.array(t)) + self.atom), 0.0
            if len(off) == 1:
                cap = min([b.radius for b in concentric], default=math.inf)
                cap = min(cap, self.support_radius + 1.0)
                if math.isinf(cap):
                    cap = self.support_radius
                v, e = self.concentric_lens_masses(
                    np.asarray(off[0].center), np.array(cap), np.array(off[0].radius)
                )
                return float(v), float(e)
            return self._multi_ball_bracket(concentric, off)
        return self._subdivision_mass(regions)

    def two_ball_masses(self, y, radii, other_center, other_radius, cap=math.inf,
                        nodes: int = 128):
        """Bracketed mu(B(y, radii[k]) & B(other_center, other_radius) & B(center, cap))
        vectorized over the query radii.  Shell-fraction bracket:
        max(0, f1 + f2 - 1) <= frac <= min(f1, f2)."""
        y = _check_point(y, self.n)
        radii = np.asarray(radii, dtype=float)
        if np.allclose(y, self.center):
            return self.concentric_lens_masses(
                np.asarray(other_center, dtype=float),
                np.minimum(radii, cap),
                np.full(radii.shape, other_radius),
            )
        surf = sphere_surface(self.n)
        d1 = float(np.linalg.norm(y - self.center))
        d2 = float(np.linalg.norm(np.asarray(other_center, dtype=float) - self.center))
        s_hi = min(self.support_radius, cap, d2 + other_radius, d1 + float(np.max(radii)))
        vals = np.zeros(radii.shape)
        errs = np.zeros(radii.shape)
        if self.atom > 0 and d2 <= other_radius:
            vals += np.where(radii >= d1, self.atom, 0.0)
        if s_hi <= 0:
            return vals, errs
        z, w = _gauss_rule(nodes)
        for p in self.pieces:
            lo, hi = p.lo, min(p.hi, s_hi)
            if hi <= lo:
                continue
            s = 0.5 * (hi - lo) * z + 0.5 * (hi + lo)
            f2 = sphere_in_ball_fraction(self.n, s, d2, other_radius)
            f1 = sphere_in_ball_fraction(self.n, s[None, :], d1, radii[:, None])
            f_hi = np.minimum(f1, f2[None, :])
            f_lo = np.maximum(f1 + f2[None, :] - 1.0, 0.0)
            dens = p.coef * s**p.exponent * surf * s ** (self.n - 1)
            up = 0.5 * (hi - lo) * (f_hi * dens[None, :]) @ w
            dn = 0.5 * (hi - lo) * (f_lo * dens[None, :]) @ w
            vals += 0.5 * (up + dn)
            errs += 0.5 * (up - dn)
        return vals, errs

    def _multi_ball_bracket(self, concentric, off, nodes: int = 160):
        """Bracket the mass of an intersection of several balls by shell
        fractions: the sphere fraction inside all balls lies between
        max(0, sum f_i - (k-1)) and min_i f_i."""
        surf = sphere_surface(self.n)
        cap = min([b.radius for b in concentric], default=math.inf)
        s_hi = min(cap, self.support_radius,
                   min(float(np.linalg.norm(np.asarray(b.center) - self.center)) + b.radius
                       for b in off))
        if s_hi <= 0:
            return 0.0, 0.0
        val = 0.0
        err = 0.0
        c = self.center
        if self.atom > 0 and all(
            np.linalg.norm(c - np.asarray(b.center)) <= b.radius for b in off
        ):
            val += self.atom
        for p in self.pieces:
            lo, hi = p.lo, min(p.hi, s_hi)
            if hi <= lo:
                continue
            z, w = _gauss_rule(nodes)
            s = 0.5 * (hi - lo) * z + 0.5 * (hi + lo)
            fracs = []
            for b in off:
                d = float(np.linalg.norm(np.asarray(b.center) - c))
                fracs.append(sphere_in_ball_fraction(self.n, s, d, b.radius))
            fr = np.stack(fracs)
            f_hi = fr.min(axis=0)
            f_lo = np.maximum(fr.sum(axis=0) - (len(off) - 1), 0.0)
            dens = p.coef * s**p.exponent * surf * s ** (self.n - 1)
            up = 0.5 * (hi - lo) * float(np.dot(w, f_hi * dens))
            dn = 0.5 * (hi - lo) * float(np.dot(w, f_lo * dens))
            val += 0.5 * (up + dn)
            err += 0.5 * (up - dn)
        return val, err

    def _subdivision_mass(self, regions, depth: int = 6):
        """Bracketing subdivision for general region intersections."""
        lo, hi = None, None
        for reg in regions:
            bb = reg.bounding_box()
            if bb is None:
                continue
            blo, bhi = bb
            lo = blo if lo is None else np.maximum(lo, blo)
            hi = bhi if hi is None else np.minimum(hi, bhi)
        srad = self.support_radius
        if math.isinf(srad):
            if lo is None:
                raise ValueError("unbounded region query on an unbounded profile")
        else:
            slo = self.center - srad
            shi = self.center + srad
            lo = slo if lo is None else np.maximum(lo, slo)
            hi = shi if hi is None else np.minimum(hi, shi)
        if np.any(hi <= lo):
            return 0.0, 0.0
        val = 0.0
        err = 0.0
        stack = [(lo, hi, 0)]
        while stack:
            clo, chi, lvl = stack.pop()
            cls = classify_cell(regions, clo, chi)
            if cls == -1:
                continue
            v, e = self._cell_mass(clo, chi)
            refine = (cls == 0 and lvl < depth) or (
                cls == 1 and lvl < depth - 1 and e > 1e-12 * max(v, 1e-300)
            )
            if refine:
                mid = 0.5 * (clo + chi)
                for corner in range(2**self.n):
                    nlo = clo.copy()
                    nhi = chi.copy()
                    for ax in range(self.n):
                        if (corner >> ax) & 1:
                            nlo[ax] = mid[ax]
                        else:
                            nhi[ax] = mid[ax]
                    stack.append((nlo, nhi, lvl + 1))
                continue
            if cls == 1:
                val += v
                err += e
            else:  # unresolved straddle: bracket [0, v + e]
                val += 0.5 * (v + e)
                err += 0.5 * (v + e)
        # center atom
        c = self.center
        if self.atom > 0 and all(reg.contains(c[None, :])[0] for reg in regions):
            val += self.atom
        return val, err

    def _cell_mass(self, lo, hi):
        c = self.center
        near = float(np.linalg.norm(np.maximum(lo - c, 0.0) + np.maximum(c - hi, 0.0)))
        far = float(np.linalg.norm(np.maximum(np.abs(lo - c), np.abs(hi - c))))
        vol = float(np.prod(hi - lo))
        dens = [self.density_at(s) for s in np.linspace(near, far, 5)]
        dmin, dmax = min(dens), max(dens)
        mid = 0.5 * (dmin + dmax) * vol
        return mid, 0.5 * (dmax - dmin) * vol

    def atom_mass_at(self, x) -> float:
        x = _check_point(x, self.n)
        if self.atom > 0 and np.linalg.norm(x - self.center) <= 1e-12 * (1.0 + np.abs(x).max()):
            return self.atom
        return 0.0

    def atoms(self):
        if self.atom > 0:
            return self.center[None, :], np.array([self.atom])
        return np.zeros((0, self.n)), np.zeros(0)

    def support_distance(self, x) -> float:
        x = _check_point(x, self.n)
        d = float(np.linalg.norm(x - self.center))
        lo = math.inf
        if self.atom > 0:
            lo = d
        for p in self.pieces:
            if d < p.lo:
                lo = min(lo, p.lo - d)
            elif d > p.hi:
                lo = min(lo, d - p.hi)
            else:
                lo = 0.0
        return lo

    def support_extent(self, x) -> float:
        x = _check_point(x, self.n)
        d = float(np.linalg.norm(x - self.center))
        if math.isinf(self.support_radius):
            return math.inf
        ext = d if self.atom > 0 else 0.0
        for p in self.pieces:
            ext = max(ext, d + p.hi)
        return ext

    def support_box(self):
        r = self.support_radius
        if math.isinf(r):
            raise ValueError("unbounded profile has no support box")
        if r == 0.0 and self.atom == 0.0:
            return None
        return self.center - r, self.center + r

    def critical_radii(self, x) -> np.ndarray:
        x = _check_point(x, self.n)
        d = float(np.linalg.norm(x - self.center))
        rad = []
        if self.atom > 0:
            rad.append(d)
        for p in self.pieces:
            for s in (p.lo, p.hi):
                if math.isinf(s):
                    continue
                rad.extend([abs(d - s), d + s])
        return np.unique([r for r in rad if r > 0])

    def decomposition(self):
        if self._decomp is None:
            srad = self.support_radius
            if math.isinf(srad):
                raise ValueError("integration against an unbounded profile requires a restriction")
            k = self.integration_cells
            lo = self.center - srad
            width = 2.0 * srad / k
            axes = [np.arange(k) for _ in range(self.n)]
            idx = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)
            centers = lo + (idx + 0.5) * width
            s = np.linalg.norm(centers - self.center, axis=1)
            # 2^n-point subsample of the density per cell
            offs = np.stack(
                np.meshgrid(*[np.array([-0.25, 0.25]) for _ in range(self.n)], indexing="ij"),
                axis=-1,
            ).reshape(-1, self.n)
            dens = np.zeros(len(centers))
            for o in offs:
                pts = centers + o * width
                sd = np.linalg.norm(pts - self.center, axis=1)
                dens += np.array([self.density_at(v) for v in sd])
            dens /= len(offs)
            w = dens * width**self.n
            keep = w > 0
            pts_out = centers[keep]
            w_out = w[keep]
            cont = float(self.cumulative(np.array(srad)))
            if w_out.sum() > 0:
                w_out = w_out * (cont / w_out.sum())
            if self.atom > 0:
                pts_out = np.vstack([pts_out, self.center[None, :]])
                w_out = np.concatenate([w_out, [self.atom]])
            self._decomp = (pts_out, w_out)
        return self._decomp

    def restrict(self, region) -> "Measure":
        if isinstance(region, Ball) and np.allclose(region.center, self.center):
            pieces = [
                ProfilePiece(p.coef, p.exponent, p.lo, min(p.hi, region.radius))
                for p in self.pieces
                if p.lo < region.radius
            ]
            return RadialProfile(self.center, pieces, self.atom, self.integration_cells)
        return RestrictedMeasure(self, [region])

    def scaled(self, c: float) -> "RadialProfile":
        return RadialProfile(
            self.center,
            [ProfilePiece(p.coef * c, p.exponent, p.lo, p.hi) for p in self.pieces],
            self.atom * c,
            self.integration_cells,
        )


def uniform_ball(center, radius: float, total: float | None = None, density: float | None = None,
                 integration_cells: int = 24) -> RadialProfile:
    """Constant density on a ball; give either the total mass or the density."""
    n = len(center)
    vol = unit_ball_volume(n) * radius**n
    if density is None:
        if total is None:
            raise ValueError("give total or density")
        density = total / vol
    return RadialProfile(center, [ProfilePiece(density, 0.0, 0.0, radius)],
                         integration_cells=integration_cells)


def power_weight(center, exponent: float, radius: float, coef: float = 1.0,
                 integration_cells: int = 24) -> RadialProfile:
    """Density coef * |z - center|**exponent on a ball of the given radius."""
    return RadialProfile(center, [ProfilePiece(coef, exponent, 0.0, radius)],
                         integration_cells=integration_cells)


# ---------------------------------------------------------------------------


class GridDensity(Measure):
    """Uniform cell grid with nonnegative per-cell masses on an axis box."""

    SUBSAMPLES_PER_AXIS = 4

    def __init__(self, lo, hi, masses):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.n = len(self.lo)
        masses = np.asarray(masses, dtype=float)
        if masses.ndim != self.n:
            raise ValueError("mass array rank must equal the dimension")
        if np.any(masses < 0):
            raise ValueError("cell masses must be nonnegative")
        self.shape = masses.shape
        self.cell_masses = masses
        self.widths = (self.hi - self.lo) / np.asarray(self.shape)
        axes = [self.lo[k] + (np.arange(self.shape[k]) + 0.5) * self.widths[k] for k in range(self.n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        self._centers = np.stack([m.ravel() for m in mesh], axis=-1)
        self._flat = masses.ravel()
        self._nz = self._flat > 0
        half_diag = 0.5 * float(np.linalg.norm(self.widths))
        self._half_diag = half_diag
        # fixed subsample pattern within a cell
        m = self.SUBSAMPLES_PER_AXIS
        offs = [(np.arange(m) + 0.5) / m - 0.5 for _ in range(self.n)]
        omesh = np.meshgrid(*offs, indexing="ij")
        self._sub_offsets = np.stack([o.ravel() for o in omesh], axis=-1) * self.widths

    def cell_centers(self):
        return self._centers

    def ball_masses_with_error(self, x, radii):
        x = _check_point(x, self.n)
        radii = np.asarray(radii, dtype=float)
        d = np.linalg.norm(self._centers - x, axis=1)
        near = np.maximum(d - self._half_diag, 0.0)
        far = d + self._half_diag
        order_far = np.argsort(far)
        cum_far = np.concatenate([[0.0], np.cumsum(self._flat[order_far])])
        vals = cum_far[np.searchsorted(far[order_far], radii, side="right")]
        errs = np.zeros(radii.shape)
        order_near = np.argsort(near)
        near_sorted = near[order_near]
        far_of_near = far[order_near]
        mass_of_near = self._flat[order_near]
        sub = self._sub_offsets
        for i, r in enumerate(radii):
            hi_idx = np.searchsorted(near_sorted, r, side="right")
            cand = np.nonzero(far_of_near[:hi_idx] > r)[0]
            if len(cand) == 0:
                continue
            cells = order_near[cand]
            cmass = mass_of_near[cand]
            live = cmass > 0
            if not np.any(live):
                continue
            cells = cells[live]
            cmass = cmass[live]
            pts = self._centers[cells][:, None, :] + sub[None, :, :]
            inside = np.linalg.norm(pts - x, axis=2) <= r
            frac = inside.mean(axis=1)
            vals[i] += float(np.dot(cmass, frac))
            errs[i] += float(cmass.sum()) / sub.shape[0]
        return vals, errs

    def box_mass(self, lo, hi) -> float:
        lo = _check_point(lo, self.n)
        hi = _check_point(hi, self.n)
        frac = np.ones(self.shape)
        for ax in range(self.n):
            edges_lo = self.lo[ax] + np.arange(self.shape[ax]) * self.widths[ax]
            edges_hi = edges_lo + self.widths[ax]
            overlap = np.clip(np.minimum(edges_hi, hi[ax]) - np.maximum(edges_lo, lo[ax]), 0.0, None)
            axis_frac = overlap / self.widths[ax]
            shape = [1] * self.n
            shape[ax] = self.shape[ax]
            frac = frac * axis_frac.reshape(shape)
        return float((frac * self.cell_masses).sum())

    def region_mass(self, regions):
        boxes = [r for r in regions if isinstance(r, Box)]
        others = [r for r in regions if not isinstance(r, Box)]
        val = 0.0
        err = 0.0
        sub_count = self._sub_offsets.shape[0]
        for ci in np.nonzero(self._nz)[0]:
            clo = self._centers[ci] - 0.5 * self.widths
            chi = self._centers[ci] + 0.5 * self.widths
            blo, bhi = clo.copy(), chi.copy()
            for b in boxes:
                blo = np.maximum(blo, np.asarray(b.lo))
                bhi = np.minimum(bhi, np.asarray(b.hi))
            if np.any(bhi <= blo):
                continue
            frac_box = float(np.prod(bhi - blo) / np.prod(chi - clo))
            cls = classify_cell(others, blo, bhi) if others else 1
            if cls == -1:
                continue
            m = self._flat[ci] * frac_box
            if cls == 1:
                val += m
                continue
            pts = 0.5 * (blo + bhi) + self._sub_offsets * ((bhi - blo) / self.widths)
            keep = np.ones(sub_count, dtype=bool)
            for reg in others:
                keep &= reg.contains(pts)
            val += m * keep.mean()
            err += m / sub_count
        return val, err

    def total_mass(self) -> float:
        return float(self._flat.sum())

    def support_distance(self, x) -> float:
        x = _check_point(x, self.n)
        if not np.any(self._nz):
            return math.inf
        d = np.linalg.norm(self._centers[self._nz] - x, axis=1)
        return float(np.maximum(d - self._half_diag, 0.0).min())

    def support_extent(self, x) -> float:
        x = _check_point(x, self.n)
        if not np.any(self._nz):
            return 0.0
        d = np.linalg.norm(self._centers[self._nz] - x, axis=1)
        return float(d.max() + self._half_diag)

    def support_box(self):
        if not np.any(self._nz):
            return None
        c = self._centers[self._nz]
        return c.min(axis=0) - 0.5 * self.widths, c.max(axis=0) + 0.5 * self.widths

    def decomposition(self):
        return self._centers[self._nz], self._flat[self._nz]

    def restrict(self, region) -> "GridDensity":
        """Per-cell fractional restriction (within the declared cell error)."""
        masses = np.zeros(len(self._flat))
        for ci in np.nonzero(self._nz)[0]:
            clo = self._centers[ci] - 0.5 * self.widths
            chi = self._centers[ci] + 0.5 * self.widths
            cls = region.classify_box(clo, chi)
            if cls == -1:
                continue
            if cls == 1:
                masses[ci] = self._flat[ci]
                continue
            pts = self._centers[ci] + self._sub_offsets
            masses[ci] = self._flat[ci] * region.contains(pts).mean()
        return GridDensity(self.lo, self.hi, masses.reshape(self.shape))

    def scaled(self, c: float) -> "GridDensity":
        return GridDensity(self.lo, self.hi, self.cell_masses * c)

    def reweighted(self, values: np.ndarray) -> "GridDensity":
        values = np.asarray(values, dtype=float)
        pts, w = self.decomposition()
        if values.shape != w.shape:
            raise ValueError("reweighting values must match the decomposition")
        masses = np.zeros(len(self._flat))
        masses[self._nz] = w * values
        return GridDensity(self.lo, self.hi, masses.reshape(self.shape))

    def density_values(self):
        """Per-cell density (mass / cell volume), for weight-type measures."""
        return self._flat / float(np.prod(self.widths))


def grid_from_function(lo, hi, shape, density, subsamples: int = 2) -> GridDensity:
    """Build a GridDensity from a pointwise density function."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = len(lo)
    widths = (hi - lo) / np.asarray(shape)
    axes = [lo[k] + (np.arange(shape[k]) + 0.5) * widths[k] for k in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=-1)
    offs = [(np.arange(subsamples) + 0.5) / subsamples - 0.5 for _ in range(n)]
    omesh = np.meshgrid(*offs, indexing="ij")
    sub = np.stack([o.ravel() for o in omesh], axis=-1) * widths
    dens = np.zeros(len(centers))
    for o in sub:
        dens += np.apply_along_axis(density, 1, centers + o)
    dens /= len(sub)
    masses = (dens * np.prod(widths)).reshape(shape)
    return GridDensity(lo, hi, masses)


# ---------------------------------------------------------------------------


class RestrictedMeasure(Measure):
    """Base measure restricted to an intersection of regions."""

    def __init__(self, base: Measure, regions):
        self.base = base
        self.regions = list(regions)
        self.n = base.n

    def ball_masses_with_error(self, x, radii):
        x = _check_point(x, self.n)
        radii = np.asarray(radii, dtype=float)
        # vectorized paths for a radial base restricted by balls
        if isinstance(self.base, RadialProfile) and all(
            isinstance(reg, Ball) for reg in self.regions
        ):
            conc = [b for b in self.regions if np.allclose(b.center, self.base.center)]
            off = [b for b in self.regions if not np.allclose(b.center, self.base.center)]
            cap = min([b.radius for b in conc], default=math.inf)
            if not off:
                if np.allclose(x, self.base.center):
                    eff = np.minimum(radii, cap)
                    return self.base.cumulative(eff) + np.where(eff >= 0, self.base.atom, 0.0), np.zeros(radii.shape)
                return self.base.concentric_lens_masses(x, np.full(radii.shape, cap), radii)
            if len(off) == 1:
                return self.base.two_ball_masses(x, radii, np.asarray(off[0].center),
                                                 off[0].radius, cap)
        vals = np.zeros(radii.shape)
        errs = np.zeros(radii.shape)
        for i, r in enumerate(radii):
            v, e = self.base.region_mass([Ball(tuple(x), float(r))] + self.regions)
            vals[i] = v
            errs[i] = e
        return vals, errs

    def box_mass(self, lo, hi) -> float:
        v, _ = self.base.region_mass([Box(tuple(lo), tuple(hi))] + self.regions)
        return v

    def region_mass(self, regions):
        return self.base.region_mass(list(regions) + self.regions)

    def total_mass(self) -> float:
        v, _ = self.base.region_mass(self.regions)
        return v

    def atom_mass_at(self, x) -> float:
        x = _check_point(x, self.n)
        m = self.base.atom_mass_at(x)
        if m > 0 and all(reg.contains(x[None, :])[0] for reg in self.regions):
            return m
        return 0.0

    def atoms(self):
        pts, w = self.base.atoms()
        if len(w) == 0:
            return pts, w
        keep = np.ones(len(w), dtype=bool)
        for reg in self.regions:
            keep &= reg.contains(pts)
        return pts[keep], w[keep]

    def support_distance(self, x) -> float:
        # distance to the unrestricted support is a valid lower bound
        return self.base.support_distance(x)

    def support_extent(self, x) -> float:
        x = _check_point(x, self.n)
        ext = self.base.support_extent(x)
        for reg in self.regions:
            if isinstance(reg, Ball):
                ext = min(ext, float(np.linalg.norm(x - np.asarray(reg.center))) + reg.radius)
        return ext

    def support_box(self):
        bb = self.base.support_box()
        if bb is None:
            return None
        lo, hi = bb
        for reg in self.regions:
            rb = reg.bounding_box()
            if rb is not None:
                lo = np.maximum(lo, rb[0])
                hi = np.minimum(hi, rb[1])
        if np.any(hi < lo):
            return None
        return lo, hi

    def critical_radii(self, x) -> np.ndarray:
        return self.base.critical_radii(x)

    def decomposition(self):
        pts, w = self.base.decomposition()
        if len(w) == 0:
            return pts, w
        keep = np.ones(len(w), dtype=bool)
        for reg in self.regions:
            keep &= reg.contains(pts)
        return pts[keep], w[keep]

    def restrict(self, region) -> "RestrictedMeasure":
        return RestrictedMeasure(self.base, self.regions + [region])

    def scaled(self, c: float) -> "RestrictedMeasure":
        return RestrictedMeasure(self.base.scaled(c), self.regions)


def restrict(mu: Measure, region) -> Measure:
    """Restriction mu|_E: masses of A become mu(A & E)."""
    if region.n != mu.n:
        raise ValueError("dimension mismatch between measure and region")
    return mu.restrict(region)


# ---------------------------------------------------------------------------
# JSON configuration


def measure_from_config(cfg: dict, path: str = "measure") -> Measure:
    """Build a measure from its JSON description.

    Supported types: dirac, point_masses, radial, grid, zero.  See README for
    the field reference.
    """
    if not isinstance(cfg, dict):
        raise ConfigError(path, "expected an object")
    mtype = cfg.get("type")
    scale = float(cfg.get("scale", 1.0))
    if mtype == "zero":
        if "dim" not in cfg:
            raise ConfigError(path + ".dim", "required for zero measures")
        return zero_measure(int(cfg["dim"]))
    if mtype == "dirac":
        if "location" not in cfg:
            raise ConfigError(path + ".location", "required")
        return dirac(cfg["location"], cfg.get("mass", 1.0) * scale)
    if mtype == "point_masses":
        for field in ("points", "masses"):
            if field not in cfg:
                raise ConfigError(f"{path}.{field}", "required")
        return PointMasses(cfg["points"], np.asarray(cfg["masses"], dtype=float) * scale)
    if mtype == "radial":
        if "center" not in cfg:
            raise ConfigError(path + ".center", "required")
        center = cfg["center"]
        n = len(center)
        pieces = []
        for i, pc in enumerate(cfg.get("profile", [])):
            kind = pc.get("kind", "power")
            if kind == "uniform_ball":
                radius = pc.get("radius")
                if radius is None:
                    raise ConfigError(f"{path}.profile[{i}].radius", "required")
                dens = pc.get("density")
                if dens is None:
                    total = pc.get("total")
                    if total is None:
                        raise ConfigError(f"{path}.profile[{i}]", "uniform_ball needs density or total")
                    dens = total / (unit_ball_volume(n) * radius**n)
                pieces.append(ProfilePiece(dens, 0.0, 0.0, radius))
            elif kind == "power":
                pieces.append(
                    ProfilePiece(
                        pc.get("coef", 1.0),
                        pc.get("exponent", 0.0),
                        pc.get("from", 0.0),
                        pc.get("to", math.inf),
                    )
                )
            else:
                raise ConfigError(f"{path}.profile[{i}].kind", f"unknown profile kind {kind!r}")
        prof = RadialProfile(center, pieces, cfg.get("atom", 0.0),
                             cfg.get("integration_cells", 24))
        return prof.scaled(scale) if scale != 1.0 else prof
    if mtype == "grid":
        for field in ("lo", "hi", "masses"):
            if field not in cfg:
                raise ConfigError(f"{path}.{field}", "required")
        g = GridDensity(cfg["lo"], cfg["hi"], np.asarray(cfg["masses"], dtype=float))
        return g.scaled(scale) if scale != 1.0 else g
    raise ConfigError(path + ".type", f"unknown measure type {mtype!r}")
