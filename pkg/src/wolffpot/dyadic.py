"""Dyadic lattice machinery.

Cubes are half-open boxes [2^k m, 2^k (m+1)) per coordinate with integer
level k and integer corner m, so nesting tests are exact integer arithmetic.
On top of them: the Carleson coefficient and condition, the embedding
inequality, mixed norms, shifted lattices with the Monte-Carlo shift average,
and the discrete duality pairing with its constructive extremal sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .measures import GridDensity, Measure, PointMasses


@dataclass(frozen=True)
class DyadicCube:
    level: int
    corner: tuple

    def __post_init__(self):
        object.__setattr__(self, "corner", tuple(int(c) for c in self.corner))

    @property
    def n(self) -> int:
        return len(self.corner)

    @property
    def side(self) -> float:
        return 2.0**self.level

    def box(self):
        m = np.asarray(self.corner, dtype=float)
        return m * self.side, (m + 1.0) * self.side

    def children(self):
        out = []
        for bits in range(2**self.n):
            corner = tuple(2 * c + ((bits >> i) & 1) for i, c in enumerate(self.corner))
            out.append(DyadicCube(self.level - 1, corner))
        return out

    def parent(self) -> "DyadicCube":
        return DyadicCube(self.level + 1, tuple(c // 2 for c in self.corner))

    def ancestor(self, level: int) -> "DyadicCube":
        if level < self.level:
            raise ValueError("ancestor level must be >= cube level")
        shift = level - self.level
        return DyadicCube(level, tuple(c >> shift if c >= 0 else -((-c - 1 >> shift) + 1) for c in self.corner))

    def contains(self, other: "DyadicCube") -> bool:
        if other.level > self.level:
            return False
        return other.ancestor(self.level) == self

    def contains_point(self, x) -> bool:
        lo, hi = self.box()
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= lo) and np.all(x < hi))


def cube_at(x, level: int, shift=None) -> DyadicCube:
    """The (shifted) dyadic cube of the given level containing x."""
    x = np.asarray(x, dtype=float)
    if shift is not None:
        x = x - np.asarray(shift, dtype=float)
    side = 2.0**level
    return DyadicCube(level, tuple(int(math.floor(c / side)) for c in x))


def cube_mass(mu: Measure, cube: DyadicCube, shift=None) -> float:
    lo, hi = cube.box()
    if shift is not None:
        s = np.asarray(shift, dtype=float)
        lo, hi = lo + s, hi + s
    return mu.box_mass(lo, hi)


CubeFamily = dict  # DyadicCube -> float


@dataclass(frozen=True)
class ShiftedLattice:
    shift: tuple

    def __post_init__(self):
        object.__setattr__(self, "shift", tuple(float(s) for s in self.shift))

    def cube_at(self, x, level: int) -> DyadicCube:
        return cube_at(x, level, self.shift)


def coefficient(cube: DyadicCube, p: float, n: int) -> float:
    """side(Q)^((p - n)/(p - 1)), the discrete Carleson weight."""
    if not 1 < p < n:
        raise ValueError("need 1 < p < n")
    return cube.side ** ((p - n) / (p - 1.0))


def default_shift_levels(n: int) -> int:
    """Smallest j0 with: every ball B(x, 2^j) contains a shifted dyadic cube of
    side 2^(j-j0) containing x, for some shift."""
    return int(math.ceil(math.log2(2.0 * math.sqrt(n)))) + 1


# ---------------------------------------------------------------------------
# Mass-positive cube trees


def _top_cubes(mu: Measure, level: int):
    bb = mu.support_box()
    if bb is None:
        return []
    lo, hi = bb
    side = 2.0**level
    lo_idx = np.floor(lo / side).astype(int)
    hi_idx = np.floor((hi - 1e-15 * np.maximum(np.abs(hi), 1.0)) / side).astype(int)
    axes = [np.arange(a, b + 1) for a, b in zip(lo_idx, hi_idx)]
    mesh = np.meshgrid(*axes, indexing="ij")
    corners = np.stack([m.ravel() for m in mesh], axis=-1)
    return [DyadicCube(level, tuple(c)) for c in corners]


def mass_positive_family(mu: Measure, max_level: int, depth: int) -> CubeFamily:
    """All dyadic cubes of level in [max_level - depth, max_level] with
    positive mass, as a {cube: mass} map."""
    family: CubeFamily = {}
    stack = [(c, cube_mass(mu, c)) for c in _top_cubes(mu, max_level)]
    while stack:
        cube, m = stack.pop()
        if m <= 0:
            continue
        family[cube] = m
        if cube.level > max_level - depth:
            stack.extend((ch, cube_mass(mu, ch)) for ch in cube.children())
    return family


def carleson_sum(sigma: Measure, top: DyadicCube, p: float, depth: int) -> float:
    """sum of c_Q |Q|^p' over Q inside `top`, down `depth` levels."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    n = sigma.n
    p_conj = p / (p - 1.0)
    total = 0.0
    stack = [(top, cube_mass(sigma, top))]
    while stack:
        cube, m = stack.pop()
        if m <= 0:
            continue
        total += coefficient(cube, p, n) * m**p_conj
        if cube.level > top.level - depth:
            stack.extend((ch, cube_mass(sigma, ch)) for ch in cube.children())
    return total


@dataclass
class CarlesonReport:
    constant: float
    witness: DyadicCube | None
    cubes_checked: int
    per_level_growth: float | None = None


def carleson_condition_constant(sigma: Measure, p: float, max_level: int,
                                depth: int) -> CarlesonReport:
    """Finite-sample estimate (from below) of the discrete Carleson constant.

    Scans every positive-mass cube P with level in [max_level - depth,
    max_level] and maximizes sum_{Q subset P} c_Q |Q|^p' / |P| over the same
    truncated family.
    """
    if sigma.total_mass() <= 0:
        raise ValueError("empty measure")
    family = mass_positive_family(sigma, max_level, depth)
    if not family:
        raise ValueError("empty measure")
    n = sigma.n
    p_conj = p / (p - 1.0)
    # bottom-up subtree sums
    by_level: dict[int, list[DyadicCube]] = {}
    for c in family:
        by_level.setdefault(c.level, []).append(c)
    subtree: dict[DyadicCube, float] = {}
    for level in sorted(by_level):
        for c in by_level[level]:
            s = coefficient(c, p, n) * family[c] ** p_conj
            for ch in c.children():
                s += subtree.get(ch, 0.0)
            subtree[c] = s
    best = -math.inf
    witness = None
    for c, m in family.items():
        ratio = subtree[c] / m
        if ratio > best:
            best = ratio
            witness = c
    return CarlesonReport(best, witness, len(family))


@dataclass
class EmbeddingReport:
    lhs: float
    rhs: float
    passed: bool
    cubes: int


def carleson_embedding_check(sigma: Measure, f, s: float, c_tilde: float, p: float,
                             max_level: int, depth: int) -> EmbeddingReport:
    """Check sum c_Q |Q|^p' (avg_Q f)^s <= C~ (s/(s-1))^s ||f||_{L^s}^s over the
    truncated positive-mass family."""
    if s <= 1:
        raise ValueError("need s > 1")
    pts, w = sigma.decomposition()
    fv = np.asarray([f(pt) for pt in pts], dtype=float)
    if np.any(fv < 0):
        raise ValueError("f must be nonnegative")
    family = mass_positive_family(sigma, max_level, depth)
    n = sigma.n
    p_conj = p / (p - 1.0)
    lhs = 0.0
    for cube, m in family.items():
        lo, hi = cube.box()
        inside = np.all((pts >= lo) & (pts < hi), axis=1)
        integral = float(np.dot(w[inside], fv[inside]))
        avg = integral / m
        lhs += coefficient(cube, p, n) * m**p_conj * avg**s
    rhs = c_tilde * (s / (s - 1.0)) ** s * float(np.dot(w, fv**s))
    return EmbeddingReport(lhs, rhs, lhs <= rhs * (1.0 + 1e-12), len(family))


def mixed_norm(family: CubeFamily, p: float, q: float, sigma: Measure) -> float:
    """Norm (int [sum_Q |lam_Q chi_Q|^q]^{p/q} d sigma)^{1/p}."""
    if p <= 0 or q <= 0:
        raise ValueError("need p, q > 0")
    if not family:
        return 0.0
    pts, w = sigma.decomposition()
    if len(w) == 0:
        return 0.0
    S = np.zeros(len(w))
    for cube, lam in family.items():
        lo, hi = cube.box()
        inside = np.all((pts >= lo) & (pts < hi), axis=1)
        S[inside] += abs(lam) ** q
    return float(np.dot(w, S ** (p / q))) ** (1.0 / p)


# ---------------------------------------------------------------------------
# Shifted sums and the shift average


def dyadic_wolff_sum(sigma: Measure, x, p: float, max_side: float, min_side: float,
                     shift=None, multiplier=None) -> float:
    """sum over (shifted) cubes containing x with min_side <= side <= max_side
    of c_Q |Q|^{1/(p-1)}, optionally weighted per cube."""
    n = sigma.n
    k_hi = int(math.floor(math.log2(max_side) + 1e-12))
    k_lo = int(math.ceil(math.log2(min_side) - 1e-12))
    total = 0.0
    for level in range(k_hi, k_lo - 1, -1):
        cube = cube_at(x, level, shift)
        m = cube_mass(sigma, cube, shift)
        if m <= 0:
            break
        term = coefficient(cube, p, n) * m ** (1.0 / (p - 1.0))
        if multiplier is not None:
            term *= multiplier(cube, shift)
        total += term
    return total


@dataclass
class ShiftAverageReport:
    mean: float
    stderr: float
    samples: int
    j0: int


def shift_average(sigma: Measure, omega: Measure, x, p: float, k: int,
                  weight_mode: str = "unit", beta: float = 0.0, samples: int = 64,
                  seed: int = 0, j0: int | None = None, min_side: float | None = None,
                  quad=None) -> ShiftAverageReport:
    """Monte-Carlo average over shifts t in B(0, 2^(k+j0)) of

        sum_{x in Q_t, side <= 2^(k+j0)} c_Q (phi(Q_t)(x) int_{Q_t} psi dW)^(1/(p-1)),

    with phi, psi monotone set-function weights selected by weight_mode
    (unit, exp-wolff, exp-riesz)."""
    if samples <= 0:
        raise ValueError("need at least one shift sample")
    n = sigma.n
    if j0 is None:
        j0 = default_shift_levels(n)
    big = 2.0 ** (k + j0)
    if min_side is None:
        min_side = 2.0 ** (k - 24)
    x = np.asarray(x, dtype=float)
    from .potentials import riesz as riesz_pot
    from .potentials import wolff as wolff_pot
    from .geometry import Box as BoxRegion

    def weights_for(cube: DyadicCube, shift):
        if weight_mode == "unit":
            return 1.0, None
        lo, hi = cube.box()
        s = np.asarray(shift)
        reg = BoxRegion(tuple(lo + s), tuple(hi + s))
        sig_q = sigma.restrict(reg)
        if weight_mode == "exp-wolff":
            phi = math.exp(beta * wolff_pot(sig_q, x, 1.0, p, quad=quad))
            return phi, lambda z: math.exp(beta * wolff_pot(sig_q, z, 1.0, p, quad=quad))
        if weight_mode == "exp-riesz":
            phi = math.exp(beta * riesz_pot(sig_q, x, p, quad=quad))
            return phi, lambda z: math.exp(beta * riesz_pot(sig_q, z, p, quad=quad))
        raise ValueError(f"unknown weight_mode {weight_mode!r}")

    vals = np.zeros(samples)
    o_pts, o_w = omega.decomposition()
    for i in range(samples):
        rng = np.random.default_rng((seed, i))
        direction = rng.normal(size=n)
        direction /= np.linalg.norm(direction)
        t = direction * big * rng.uniform() ** (1.0 / n)
        total = 0.0
        level = k + j0
        while 2.0**level >= min_side:
            cube = cube_at(x, level, t)
            if weight_mode == "unit":
                m = cube_mass(omega, cube, t)
                if m <= 0:
                    break
                inner = m
                phi = 1.0
            else:
                phi, psi = weights_for(cube, t)
                lo, hi = cube.box()
                inside = np.all((o_pts >= lo + t) & (o_pts < hi + t), axis=1)
                if not np.any(inside):
                    break
                inner = float(np.dot(o_w[inside], [psi(z) for z in o_pts[inside]]))
            total += coefficient(cube, p, n) * (phi * inner) ** (1.0 / (p - 1.0))
            level -= 1
        vals[i] = total
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return ShiftAverageReport(mean, stderr, samples, j0)


# ---------------------------------------------------------------------------
# Duality in discrete sequence spaces


@dataclass
class DualityReport:
    lhs: float
    extremal_pairing: float
    admissibility_sup: float
    extremal_mu: CubeFamily = field(default_factory=dict)
    random_pairings: list = field(default_factory=list)

    @property
    def identity_gap(self) -> float:
        scale = max(abs(self.lhs), 1e-300)
        return abs(self.extremal_pairing - self.lhs) / scale


def _closure_with_ancestors(cubes, top: DyadicCube):
    closed = set()
    for c in cubes:
        cur = c
        while True:
            closed.add(cur)
            if cur == top:
                break
            cur = cur.ancestor(cur.level + 1)
            if cur.level > top.level:
                break
    return closed


def duality_check(sigma: Measure, top: DyadicCube, lam: CubeFamily, s: float,
                  trials: int = 0, seed: int = 0) -> DualityReport:
    """Pairing duality for int_P (sum_{x in Q} lam_Q^s)^{1/s} d sigma.

    Builds the extremal admissible sequence mu_Q, verifies its admissibility
    margin and the exact pairing identity, and (optionally) tries random
    admissible sequences whose pairings the norm must dominate up to the
    recorded constant.
    """
    if s <= 1:
        raise ValueError("need s > 1")
    if not isinstance(sigma, (PointMasses, GridDensity)):
        raise ValueError("duality pairing needs exact integration: atomic or grid measure")
    s_conj = s / (s - 1.0)
    lam = {c: v for c, v in lam.items() if v != 0.0}
    for c, v in lam.items():
        if v < 0:
            raise ValueError("lambda must be nonnegative")
        if not top.contains(c):
            raise ValueError("lambda must be supported inside the top cube")
    pts, w = sigma.decomposition()
    lo, hi = top.box()
    inside = np.all((pts >= lo) & (pts < hi), axis=1) if len(w) else np.zeros(0, bool)
    pts, w = pts[inside], w[inside]

    def indicator(cube):
        clo, chi = cube.box()
        return np.all((pts >= clo) & (pts < chi), axis=1)

    masks = {c: indicator(c) for c in lam}
    S = np.zeros(len(w))
    for c, v in lam.items():
        S[masks[c]] += v**s
    lhs = float(np.dot(w, S ** (1.0 / s)))

    masses = {c: float(w[masks[c]].sum()) for c in lam}
    mu = {}
    for c, v in lam.items():
        if masses[c] <= 0:
            mu[c] = 0.0
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            integrand = np.where(S[masks[c]] > 0, (v**s / S[masks[c]]) ** (1.0 / s_conj), 0.0)
        mu[c] = float(np.dot(w[masks[c]], integrand)) / masses[c]
    extremal_pairing = sum(lam[c] * mu[c] * masses[c] for c in lam)

    closure = _closure_with_ancestors(lam.keys(), top)

    def admissibility_sup(seq):
        sup = 0.0
        for q in closure:
            mq = float(w[indicator(q)].sum())
            if mq <= 0:
                continue
            num = sum(seq[c] ** s_conj * masses[c] for c in lam if q.contains(c))
            sup = max(sup, num / mq)
        return sup

    adm = admissibility_sup(mu)

    randoms = []
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        cand = {c: float(rng.uniform(0.05, 1.0)) for c in lam}
        a = admissibility_sup(cand)
        if a <= 0:
            continue
        scale = a ** (-1.0 / s_conj)
        cand = {c: v * scale for c, v in cand.items()}
        randoms.append(sum(lam[c] * cand[c] * masses[c] for c in lam))

    return DualityReport(lhs, extremal_pairing, adm, mu, randoms)
