"""Euclidean ball/cap/lens geometry and query regions.

Everything here is closed form.  Cap volumes and cap areas are expressed
through the regularized incomplete beta function, which is what makes
ball-intersection mass queries on radial measures O(1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, gammaln


def unit_ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n."""
    return math.exp(0.5 * n * math.log(math.pi) - gammaln(0.5 * n + 1.0))


def sphere_surface(n: int) -> float:
    """Surface area of the unit (n-1)-sphere in R^n."""
    return n * unit_ball_volume(n)


def cap_volume(n: int, radius, t):
    """Volume of {z in B(0, radius) : z_1 >= t} for signed t in [-radius, radius].

    Vectorized over `radius`/`t`.  t = -radius gives the full ball, t = radius
    gives 0.
    """
    radius = np.asarray(radius, dtype=float)
    t = np.asarray(t, dtype=float)
    full = unit_ball_volume(n) * radius**n
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(radius > 0, np.clip(np.abs(t) / np.where(radius > 0, radius, 1.0), 0.0, 1.0), 1.0)
    x = 1.0 - ratio**2
    half_excess = 0.5 * full * betainc(0.5 * (n + 1), 0.5, x)
    return np.where(t >= 0, half_excess, full - half_excess)


def cap_area_fraction(n: int, cos_theta):
    """Fraction of the unit (n-1)-sphere within colatitude theta of a pole.

    `cos_theta` in [-1, 1]; vectorized.  Fraction is 0 at theta=0 and 1 at
    theta=pi.
    """
    c = np.clip(np.asarray(cos_theta, dtype=float), -1.0, 1.0)
    x = 1.0 - c**2
    half = 0.5 * betainc(0.5 * (n - 1), 0.5, x)
    return np.where(c >= 0, half, 1.0 - half)


def ball_intersection_volume(n: int, d, r1, r2):
    """Volume of B(a, r1) & B(b, r2) with |a-b| = d.  Vectorized."""
    d = np.asarray(d, dtype=float)
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    d, r1, r2 = np.broadcast_arrays(d, r1, r2)
    vn = unit_ball_volume(n)
    out = np.zeros(d.shape)

    rmin = np.minimum(r1, r2)
    disjoint = d >= r1 + r2
    nested = d <= np.abs(r1 - r2)
    out = np.where(nested, vn * rmin**n, out)

    lens = ~(disjoint | nested) & (rmin > 0)
    if np.any(lens):
        dl, r1l, r2l = d[lens], r1[lens], r2[lens]
        # signed distance from each center to the radical hyperplane
        t1 = (dl**2 + r1l**2 - r2l**2) / (2.0 * dl)
        t2 = dl - t1
        vol = cap_volume(n, r1l, t1) + cap_volume(n, r2l, t2)
        out[lens] = vol
    return out if out.ndim else float(out)


def sphere_in_ball_fraction(n: int, s, d, r):
    """Fraction of the sphere of radius s about c inside B(x, r), |x-c| = d.

    Vectorized over s/d/r.  s = 0 is treated as the point c.
    """
    s = np.asarray(s, dtype=float)
    d = np.asarray(d, dtype=float)
    r = np.asarray(r, dtype=float)
    s, d, r = np.broadcast_arrays(s, d, r)
    out = np.zeros(s.shape)
    inside = d + s <= r
    out = np.where(inside, 1.0, out)
    partial = ~inside & (np.abs(d - s) < r)
    if np.any(partial):
        sp, dp, rp = s[partial], d[partial], r[partial]
        cos_theta = (dp**2 + sp**2 - rp**2) / (2.0 * dp * sp)
        out[partial] = cap_area_fraction(n, cos_theta)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Query regions


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def n(self) -> int:
        return len(self.center)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        d = np.linalg.norm(np.atleast_2d(pts) - np.asarray(self.center), axis=-1)
        return d <= self.radius

    def bounding_box(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def classify_box(self, lo: np.ndarray, hi: np.ndarray) -> int:
        """-1 outside, +1 inside, 0 straddles."""
        c = np.asarray(self.center)
        near = np.linalg.norm(np.maximum(lo - c, 0.0) + np.maximum(c - hi, 0.0))
        if near > self.radius:
            return -1
        far = np.linalg.norm(np.maximum(np.abs(lo - c), np.abs(hi - c)))
        return 1 if far <= self.radius else 0


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(c) for c in self.lo))
        object.__setattr__(self, "hi", tuple(float(c) for c in self.hi))

    @property
    def n(self) -> int:
        return len(self.lo)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(pts)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.all((p >= lo) & (p < hi), axis=-1)

    def bounding_box(self):
        return np.asarray(self.lo), np.asarray(self.hi)

    def classify_box(self, lo: np.ndarray, hi: np.ndarray) -> int:
        slo = np.asarray(self.lo)
        shi = np.asarray(self.hi)
        if np.any(hi <= slo) or np.any(lo >= shi):
            return -1
        if np.all(lo >= slo) and np.all(hi <= shi):
            return 1
        return 0


@dataclass(frozen=True)
class HalfSpace:
    """Points with x . normal <= offset."""

    normal: tuple
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", tuple(float(c) for c in self.normal))

    @property
    def n(self) -> int:
        return len(self.normal)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return np.atleast_2d(pts) @ np.asarray(self.normal) <= self.offset

    def bounding_box(self):
        return None

    def classify_box(self, lo: np.ndarray, hi: np.ndarray) -> int:
        nrm = np.asarray(self.normal)
        lo_dot = np.where(nrm > 0, lo, hi) @ nrm
        hi_dot = np.where(nrm > 0, hi, lo) @ nrm
        if hi_dot <= self.offset:
            return 1
        if lo_dot > self.offset:
            return -1
        return 0


Region = Ball | Box | HalfSpace


def classify_cell(regions, lo: np.ndarray, hi: np.ndarray) -> int:
    """Classify an axis box against an intersection of regions."""
    state = 1
    for reg in regions:
        c = reg.classify_box(lo, hi)
        if c == -1:
            return -1
        if c == 0:
            state = 0
    return state
