"""Jump-measure families and their set masses.

Three built-in families of Levy-type jump measures mu(x, dy) on R^d,
d in {1, 2}:

* ``stable``   -- the rotationally symmetric density |x-y|^(-d-alpha) dy,
* ``axes``     -- a sum of d one-dimensional stable measures along the
                  coordinate lines through x (singular w.r.t. volume),
* ``cusp``     -- the stable density restricted to a cusp-shaped double
                  cone around the coordinate axes (d = 2 only); its
                  effective differentiability order is
                  beta = (1 - 1/s) + alpha < alpha.

plus ``tabulated`` for user-supplied radial densities.  All families are
translation invariant and symmetric, so set masses are computed relative
to the base point x.  Masses of balls, annuli, complements and axis-aligned
cells reduce to closed forms or 1-D radial/angular quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import InvalidInput, InvalidSpec, QuadratureFailure

__all__ = [
    "MeasureSpec",
    "EquationCoefficients",
    "Ball",
    "Annulus",
    "Cell",
    "Complement",
    "measure_of_set",
    "second_moment_in_ball",
    "cusp_geometry",
    "cusp_angular_fraction",
    "effective_order",
    "sphere_area",
    "robust_normalization",
    "symbol_normalization",
]

_QUAD_KW = dict(limit=200, epsabs=1e-13, epsrel=1e-11)


def sphere_area(d: int) -> float:
    """Surface measure of the unit (d-1)-sphere: 2 for d=1, 2*pi for d=2."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def robust_normalization(alpha: float) -> float:
    """Multiplier (2 - alpha) that keeps constants bounded as alpha -> 2."""
    return 2.0 - alpha


def symbol_normalization(d: int, alpha: float) -> float:
    """Constant c(d, alpha) making c * stable kernel the generator with
    Fourier symbol -|xi|^alpha.

    c = 2^alpha * Gamma((d+alpha)/2) / (pi^(d/2) * |Gamma(-alpha/2)|).
    """
    num = 2.0 ** alpha * math.gamma((d + alpha) / 2.0)
    den = math.pi ** (d / 2.0) * abs(math.gamma(-alpha / 2.0))
    return num / den


# ---------------------------------------------------------------------------
# Set descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=float)))
        if self.radius <= 0:
            raise InvalidInput("ball radius must be positive")


@dataclass(frozen=True)
class Annulus:
    center: np.ndarray
    r: float
    R: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=float)))
        if self.r < 0 or self.R < self.r:
            raise InvalidInput("annulus needs 0 <= r <= R")


@dataclass(frozen=True)
class Cell:
    """Axis-aligned box given by bounds[k] = (lo_k, hi_k)."""

    bounds: np.ndarray

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        object.__setattr__(self, "bounds", b)
        if np.any(b[:, 1] < b[:, 0]):
            raise InvalidInput("cell bounds must satisfy lo <= hi")


@dataclass(frozen=True)
class Complement:
    """Complement of a ball."""

    ball: Ball


# ---------------------------------------------------------------------------
# Measure specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasureSpec:
    """A jump-measure family with order parameters.

    ``normalization`` multiplies the raw kernel; pass
    ``robust_normalization(alpha)`` for the (2 - alpha) convention or
    ``symbol_normalization(d, alpha)`` to target the |xi|^alpha symbol.
    """

    kind: str                      # "stable" | "axes" | "cusp" | "tabulated"
    d: int
    alpha: float
    s: Optional[float] = None      # cusp exponent
    normalization: float = 1.0
    # tabulated-kernel payload
    radii: Optional[np.ndarray] = None
    densities: Optional[np.ndarray] = None
    head_exponent: Optional[float] = None
    tail_exponent: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("stable", "axes", "cusp", "tabulated"):
            raise InvalidSpec(f"unknown measure kind {self.kind!r}")
        if self.d not in (1, 2):
            raise InvalidSpec("dimension must be 1 or 2")
        if not 0.0 < self.alpha < 2.0:
            raise InvalidSpec("alpha must lie in (0, 2)")
        if self.normalization <= 0:
            raise InvalidSpec("normalization must be positive")
        if self.kind == "cusp":
            if self.d != 2:
                raise InvalidSpec("cusp measure is defined in dimension 2 only")
            if self.s is None or not 0.0 < self.s < 1.0:
                raise InvalidSpec("cusp exponent s must lie in (0, 1)")
            beta = (1.0 - 1.0 / self.s) + self.alpha
            if beta <= 0.0:
                raise InvalidSpec(
                    f"cusp effective order beta = {beta:.4g} must be positive"
                )
        if self.kind == "tabulated":
            if self.radii is None or self.densities is None:
                raise InvalidSpec("tabulated kind needs radii and densities")
            r = np.asarray(self.radii, dtype=float)
            rho = np.asarray(self.densities, dtype=float)
            if r.ndim != 1 or r.size < 2 or rho.shape != r.shape:
                raise InvalidSpec("tabulated kernel needs two equal-length columns")
            if np.any(np.diff(r) <= 0) or np.any(r <= 0) or np.any(rho <= 0):
                raise InvalidSpec("tabulated radii must increase and densities be positive")
            object.__setattr__(self, "radii", r)
            object.__setattr__(self, "densities", rho)

    # -- constructors -------------------------------------------------------

    @classmethod
    def stable(cls, d: int, alpha: float, normalization: float = 1.0) -> "MeasureSpec":
        return cls(kind="stable", d=d, alpha=alpha, normalization=normalization)

    @classmethod
    def axes(cls, d: int, alpha: float, normalization: float = 1.0) -> "MeasureSpec":
        return cls(kind="axes", d=d, alpha=alpha, normalization=normalization)

    @classmethod
    def cusp(cls, alpha: float, s: float, normalization: float = 1.0) -> "MeasureSpec":
        return cls(kind="cusp", d=2, alpha=alpha, s=s, normalization=normalization)

    @classmethod
    def tabulated(cls, d, alpha, radii, densities, head_exponent=None,
                  tail_exponent=None, normalization: float = 1.0) -> "MeasureSpec":
        return cls(kind="tabulated", d=d, alpha=alpha, normalization=normalization,
                   radii=np.asarray(radii, float), densities=np.asarray(densities, float),
                   head_exponent=head_exponent, tail_exponent=tail_exponent)

    @classmethod
    def tabulated_from_file(cls, path, d, alpha, head_exponent=None,
                            tail_exponent=None, normalization: float = 1.0) -> "MeasureSpec":
        """Load a two-column (radius, density) table; '#' starts a comment."""
        data = np.loadtxt(path, comments="#", dtype=float)
        data = np.atleast_2d(data)
        return cls.tabulated(d, alpha, data[:, 0], data[:, 1],
                             head_exponent=head_exponent,
                             tail_exponent=tail_exponent,
                             normalization=normalization)


@dataclass(frozen=True)
class EquationCoefficients:
    """Bounded symmetric coefficient a(t, x, y) in [1, 2] and right side f.

    ``a`` is None for the constant-one default; otherwise a vectorized
    callable a(t, X, Y) over point arrays.  ``f`` is None for zero or a
    callable f(t, X).
    """

    a: Optional[object] = None
    f: Optional[object] = None
    time_dependent_a: bool = False

    def a_values(self, t, X, Y):
        if self.a is None:
            return 1.0
        vals = np.asarray(self.a(t, X, Y), dtype=float)
        if vals.size and (vals.min() < 1.0 - 1e-12 or vals.max() > 2.0 + 1e-12):
            raise InvalidInput("coefficient a must take values in [1, 2]")
        return vals

    def f_values(self, t, X):
        if self.f is None:
            return np.zeros(len(np.atleast_2d(X)))
        return np.asarray(self.f(t, X), dtype=float)

    def check_symmetry(self, rng, n_samples: int = 32, box: float = 2.0) -> float:
        """Max asymmetry |a(t,x,y) - a(t,y,x)| over random samples."""
        if self.a is None:
            return 0.0
        t = rng.uniform(-1.0, 1.0, n_samples)
        X = rng.uniform(-box, box, (n_samples, 2))
        Y = rng.uniform(-box, box, (n_samples, 2))
        worst = 0.0
        for k in range(n_samples):
            fwd = np.atleast_1d(self.a(t[k], X[k:k + 1], Y[k:k + 1]))[0]
            rev = np.atleast_1d(self.a(t[k], Y[k:k + 1], X[k:k + 1]))[0]
            worst = max(worst, abs(float(fwd) - float(rev)))
        return worst


# ---------------------------------------------------------------------------
# Cusp geometry
# ---------------------------------------------------------------------------

def cusp_geometry(s: float, r: float):
    """Boundary point of the cusp at distance r from the origin.

    Returns (z1, theta) where z1 is the unique positive root of
    r^2 = z1^2 + z1^(2s) and theta = arcsin(z1 / r) is the half-opening
    angle of the cusp arc on the circle of radius r.
    """
    if not 0.0 < s < 1.0 or r <= 0.0:
        raise InvalidInput("cusp_geometry needs 0 < s < 1 and r > 0")

    def g(z):
        return z * z + z ** (2.0 * s) - r * r

    lo = min(r, r ** (1.0 / s)) * 1e-8
    hi = r
    if g(hi) < 0:          # cannot happen analytically; guard float edge
        hi = r * (1.0 + 1e-12)
    z1 = brentq(g, lo, hi, xtol=1e-300, rtol=1e-14)
    theta = math.asin(min(1.0, z1 / math.sqrt(z1 ** 2 + z1 ** (2 * s))))
    return z1, theta


def _cusp_ray_cutoff(s: float, phi):
    """Distance along the ray at angle phi beyond which points lie in the
    cusp set {|z2| > |z1|^s or |z1| > |z2|^s}.  Vectorized in phi."""
    phi = np.asarray(phi, dtype=float)
    c = np.abs(np.cos(phi))
    si = np.abs(np.sin(phi))
    expo = 1.0 / (1.0 - s)
    with np.errstate(divide="ignore", over="ignore"):
        t_a = np.where(si > 0, (c ** s / np.where(si > 0, si, 1.0)) ** expo, np.inf)
        t_b = np.where(c > 0, (si ** s / np.where(c > 0, c, 1.0)) ** expo, np.inf)
    out = np.minimum(t_a, t_b)
    return out if out.ndim else float(out)


def cusp_angular_fraction(spec: MeasureSpec, t: float) -> float:
    """Fraction of the circle of radius t lying inside the cusp set."""
    if spec.kind != "cusp":
        raise InvalidInput("angular fraction is a cusp-measure quantity")
    if t <= 0:
        raise InvalidInput("radius must be positive")
    s = spec.s
    # on [0, pi/4] the cutoff is increasing; full circle by 8-fold symmetry
    if _cusp_ray_cutoff(s, math.pi / 4.0) <= t:
        return 1.0
    phi_star = brentq(lambda p: _cusp_ray_cutoff(s, p) - t, 0.0, math.pi / 4.0,
                      xtol=1e-15, rtol=1e-14)
    return 8.0 * phi_star / (2.0 * math.pi)


def _cusp_octant_quad(s, integrand):
    """Integrate integrand(phi, t_c(phi)) over the octant and unfold by 8."""
    val, err = quad(lambda p: integrand(p, _cusp_ray_cutoff(s, p)),
                    0.0, math.pi / 4.0, **_QUAD_KW)
    scale = 8.0 * max(abs(val), 1e-300)
    if err * 8.0 > 1e-7 * scale:
        raise QuadratureFailure("cusp angular quadrature did not converge",
                                achieved_error=8.0 * err)
    return 8.0 * val


# ---------------------------------------------------------------------------
# Radial profiles (mass per unit radius, including surface factor)
# ---------------------------------------------------------------------------

def _tab_segments(spec: MeasureSpec):
    """Piecewise power-law segments (r_lo, r_hi, A, p) with density A*t^p."""
    r, rho = spec.radii, spec.densities
    segs = []
    for k in range(len(r) - 1):
        p = math.log(rho[k + 1] / rho[k]) / math.log(r[k + 1] / r[k])
        A = rho[k] / r[k] ** p
        segs.append((r[k], r[k + 1], A, p))
    return segs


def _tab_radial_integral(spec: MeasureSpec, lo: float, hi: float, moment: int) -> float:
    """integral_lo^hi t^moment * density(t) * surface(t) dt for tabulated kernels."""
    if hi <= lo:
        return 0.0
    d = spec.d
    Cd = sphere_area(d)

    def seg_int(a, b, A, p):
        q = p + moment + d - 1
        a, b = max(a, lo), min(b, hi)
        if b <= a:
            return 0.0
        if abs(q + 1.0) < 1e-14:
            return Cd * A * math.log(b / a)
        return Cd * A * (b ** (q + 1) - a ** (q + 1)) / (q + 1)

    total = 0.0
    r = spec.radii
    if lo < r[0]:
        if spec.head_exponent is None:
            raise InvalidInput(
                "tabulated kernel evaluated below its table without head_exponent")
        p = spec.head_exponent
        A = spec.densities[0] / r[0] ** p
        if p + moment + d <= 0 and lo <= 0:
            raise InvalidInput("tabulated head exponent gives a divergent integral")
        total += seg_int(max(lo, 1e-300), r[0], A, p)
    for (a, b, A, p) in _tab_segments(spec):
        total += seg_int(a, b, A, p)
    if hi > r[-1]:
        if spec.tail_exponent is None:
            raise InvalidInput(
                "tabulated kernel evaluated beyond its table without tail_exponent")
        p = spec.tail_exponent
        A = spec.densities[-1] / r[-1] ** p
        if math.isinf(hi) and p + moment + d >= 0:
            raise InvalidInput("tabulated tail exponent gives a divergent integral")
        b = hi if not math.isinf(hi) else None
        if b is None:
            q = p + moment + d - 1
            total += -sphere_area(d) * A * r[-1] ** (q + 1) / (q + 1)
        else:
            total += seg_int(r[-1], b, A, p)
    return total


def _radial_mass(spec: MeasureSpec, lo: float, hi: float) -> float:
    """mu-mass of the (possibly infinite) annulus lo < |z| < hi, at any base
    point; valid for the rotationally defined kinds and for axes."""
    if hi <= lo:
        return 0.0
    a = spec.alpha
    nu = spec.normalization
    if spec.kind == "stable":
        Cd = sphere_area(spec.d)
        top = 0.0 if math.isinf(hi) else hi ** (-a)
        return nu * Cd / a * (lo ** (-a) - top)
    if spec.kind == "axes":
        top = 0.0 if math.isinf(hi) else hi ** (-a)
        return nu * (2.0 * spec.d) / a * (lo ** (-a) - top)
    if spec.kind == "cusp":
        top = 0.0 if math.isinf(hi) else hi ** (-a)

        def integrand(phi, tc):
            lo_eff = max(lo, tc)
            if not math.isinf(hi) and lo_eff >= hi:
                return 0.0
            return (lo_eff ** (-a) - top) / a
        return nu * _cusp_octant_quad(spec.s, integrand)
    if spec.kind == "tabulated":
        return nu * _tab_radial_integral(spec, lo, hi, moment=0)
    raise InvalidSpec(spec.kind)


def _radial_second_moment(spec: MeasureSpec, rho: float) -> float:
    """integral over |z| <= rho of |z|^2 mu(dz)."""
    a = spec.alpha
    nu = spec.normalization
    if spec.kind == "stable":
        return nu * sphere_area(spec.d) * rho ** (2.0 - a) / (2.0 - a)
    if spec.kind == "axes":
        return nu * 2.0 * spec.d * rho ** (2.0 - a) / (2.0 - a)
    if spec.kind == "cusp":
        def integrand(phi, tc):
            if tc >= rho:
                return 0.0
            return (rho ** (2.0 - a) - tc ** (2.0 - a)) / (2.0 - a)
        return nu * _cusp_octant_quad(spec.s, integrand)
    if spec.kind == "tabulated":
        return nu * _tab_radial_integral(spec, 0.0, rho, moment=2)
    raise InvalidSpec(spec.kind)


# ---------------------------------------------------------------------------
# Off-center ball helpers (angular quadrature around the base point)
# ---------------------------------------------------------------------------

def _ray_exit_from_ball(z_c, R, phi):
    """Distance along direction phi at which the ray leaves B_R(z_c);
    base point assumed inside the ball."""
    e = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    b = e @ z_c
    disc = R * R - float(z_c @ z_c) + b * b
    return b + np.sqrt(np.maximum(disc, 0.0))


def _offcenter_outside_ball_mass(spec: MeasureSpec, z_c, R: float) -> float:
    """mu(x, complement of B_R(c)) for a base point x inside the ball;
    z_c = c - x."""
    a = spec.alpha
    nu = spec.normalization
    if spec.d == 1:
        zc = float(np.atleast_1d(z_c)[0])
        lo_r, lo_l = R - zc, R + zc
        if lo_r <= 0 or lo_l <= 0:
            raise InvalidInput("base point must lie inside the ball")
        if spec.kind in ("stable", "axes"):
            return nu * (lo_r ** (-a) + lo_l ** (-a)) / a
        if spec.kind == "tabulated":
            return nu * 0.5 * (_tab_radial_integral(spec, lo_r, math.inf, 0)
                               + _tab_radial_integral(spec, lo_l, math.inf, 0))
        raise InvalidSpec(spec.kind)
    z_c = np.asarray(z_c, dtype=float)
    if spec.kind == "axes":
        total = 0.0
        for axis in range(2):
            other = z_c[1 - axis]
            # x interior to the ball guarantees the chord exists
            half = math.sqrt(max(R * R - other * other, 0.0))
            lo_p, lo_m = half - z_c[axis], half + z_c[axis]
            if lo_p <= 0 or lo_m <= 0:
                raise InvalidInput("base point must lie inside the ball")
            total += nu / a * (lo_p ** (-a) + lo_m ** (-a))
        return total
    if spec.kind == "stable":
        def f(phi):
            t = _ray_exit_from_ball(z_c, R, phi)
            return t ** (-a) / a
        val, err = quad(f, 0.0, 2.0 * math.pi, **_QUAD_KW)
        return nu * val
    if spec.kind == "cusp":
        def f(phi):
            t = max(_ray_exit_from_ball(z_c, R, phi), _cusp_ray_cutoff(spec.s, phi))
            return t ** (-a) / a
        val, err = quad(f, 0.0, 2.0 * math.pi, **_QUAD_KW)
        return nu * val
    if spec.kind == "tabulated":
        def f(phi):
            t = _ray_exit_from_ball(z_c, R, phi)
            return _tab_radial_integral(spec, t, math.inf, 0) / (2.0 * math.pi)
        val, err = quad(f, 0.0, 2.0 * math.pi, **_QUAD_KW)
        return nu * val
    raise InvalidSpec(spec.kind)


def _gl_nodes(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _stable_density(spec: MeasureSpec, Z):
    """Kernel density at offsets Z (n, d); stable and cusp kinds only."""
    r = np.linalg.norm(np.atleast_2d(Z), axis=1)
    dens = spec.normalization * r ** (-spec.d - spec.alpha)
    if spec.kind == "cusp":
        Zz = np.atleast_2d(Z)
        z1, z2 = np.abs(Zz[:, 0]), np.abs(Zz[:, 1])
        inside = (z2 > z1 ** spec.s) | (z1 > z2 ** spec.s)
        dens = np.where(inside, dens, 0.0)
    return dens


def _cell_mass_quadrature(spec: MeasureSpec, rel_bounds, tol=1e-9, max_depth=24):
    """Adaptive tensor Gauss-Legendre mass of an axis-aligned cell given by
    bounds relative to the base point.  The cell must not contain the origin."""
    b = np.asarray(rel_bounds, dtype=float)
    x8, w8 = _gl_nodes(8)
    x16, w16 = _gl_nodes(16)

    def gl(bounds, xq, wq):
        (a1, b1), (a2, b2) = bounds
        u = 0.5 * (a1 + b1) + 0.5 * (b1 - a1) * xq
        v = 0.5 * (a2 + b2) + 0.5 * (b2 - a2) * xq
        U, V = np.meshgrid(u, v, indexing="ij")
        Z = np.stack([U.ravel(), V.ravel()], axis=1)
        W = np.outer(wq, wq).ravel()
        vals = _stable_density(spec, Z)
        return 0.25 * (b1 - a1) * (b2 - a2) * float(W @ vals)

    total = 0.0
    achieved = 0.0
    stack = [(b, 0)]
    while stack:
        bounds, depth = stack.pop()
        coarse = gl(bounds, x8, w8)
        fine = gl(bounds, x16, w16)
        err = abs(fine - coarse)
        if err <= tol * max(abs(fine), 1e-14) or err <= 1e-16:
            total += fine
            achieved = max(achieved, err)
            continue
        if depth >= max_depth:
            raise QuadratureFailure(
                f"cell quadrature stalled at depth {depth}", achieved_error=err)
        (a1, b1), (a2, b2) = bounds
        m1, m2 = 0.5 * (a1 + b1), 0.5 * (a2 + b2)
        for q in (((a1, m1), (a2, m2)), ((m1, b1), (a2, m2)),
                  ((a1, m1), (m2, b2)), ((m1, b1), (m2, b2))):
            stack.append((np.asarray(q), depth + 1))
    return total


def _cusp_excluded_band_mass(spec: MeasureSpec, a1, b1, a2, b2, n=24):
    """Stable-kernel mass of the part of the first-quadrant rectangle
    [a1,b1]x[a2,b2] lying OUTSIDE the cusp set, i.e. in the band
    x^{1/s} <= y <= x^s (which lives over x in [0, 1])."""
    s, alap = spec.s, spec.alpha
    lo_x = max(a1, 0.0)
    hi_x = min(b1, 1.0)
    if hi_x <= lo_x:
        return 0.0
    # breakpoints where the clipped band limits change analytic form
    brk = {lo_x, hi_x}
    for val in (a2, b2):
        if val > 0:
            for cand in (val ** (1.0 / s), val ** s):
                if lo_x < cand < hi_x:
                    brk.add(cand)
    xq, wq = _gl_nodes(n)

    def piece(xa, xb):
        xs = 0.5 * (xa + xb) + 0.5 * (xb - xa) * xq
        ylo = np.maximum(a2, xs ** (1.0 / s))
        yhi = np.minimum(b2, xs ** s)
        width = np.maximum(yhi - ylo, 0.0)
        total = 0.0
        for x, ya, w0, h in zip(xs, ylo, wq, width):
            if h <= 0:
                continue
            ys = ya + 0.5 * h * (xq + 1.0)
            vals = (x * x + ys * ys) ** (-(2.0 + alap) / 2.0)
            total += w0 * 0.5 * h * float(wq @ vals)
        return 0.5 * (xb - xa) * total

    pts = sorted(brk)
    val = sum(piece(pts[k], pts[k + 1]) for k in range(len(pts) - 1))
    return spec.normalization * val


def _cusp_cell_mass(spec: MeasureSpec, rel_bounds, tol=1e-8):
    """Mass of a cell under the cusp measure: full stable mass minus the
    mass of the excluded band between the curves y = x^s and y = x^{1/s},
    integrated with curved-boundary Gauss-Legendre quadrature."""
    plain = MeasureSpec.stable(2, spec.alpha, normalization=spec.normalization)

    def quadrant_pieces(bounds):
        (a1, b1), (a2, b2) = bounds
        xs = sorted({a1, b1, *([0.0] if a1 < 0.0 < b1 else [])})
        ys = sorted({a2, b2, *([0.0] if a2 < 0.0 < b2 else [])})
        for i in range(len(xs) - 1):
            for j in range(len(ys) - 1):
                yield (xs[i], xs[i + 1]), (ys[j], ys[j + 1])

    total = 0.0
    for (x_lo, x_hi), (y_lo, y_hi) in quadrant_pieces(np.asarray(rel_bounds, float)):
        if x_hi - x_lo <= 0 or y_hi - y_lo <= 0:
            continue
        a1, b1 = sorted((abs(x_lo), abs(x_hi)))
        a2, b2 = sorted((abs(y_lo), abs(y_hi)))
        stable_mass = _cell_mass_quadrature(plain, [[a1, b1], [a2, b2]])
        excl = _cusp_excluded_band_mass(spec, a1, b1, a2, b2, n=24)
        excl_fine = _cusp_excluded_band_mass(spec, a1, b1, a2, b2, n=48)
        if abs(excl_fine - excl) > tol * max(stable_mass, 1e-300):
            raise QuadratureFailure("cusp indicator boundary unresolved",
                                    achieved_error=abs(excl_fine - excl))
        total += stable_mass - excl_fine
    return total


def _axes_cell_mass(spec: MeasureSpec, x, bounds) -> float:
    """Axes-measure mass of an absolute cell: 1-D interval masses along the
    coordinate lines through x that cross the cell's interior."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    b = np.atleast_2d(np.asarray(bounds, dtype=float))
    a = spec.alpha
    nu = spec.normalization
    total = 0.0
    for axis in range(spec.d):
        ok = True
        for other in range(spec.d):
            if other == axis:
                continue
            if not (b[other, 0] < x[other] < b[other, 1]):
                ok = False
                break
        if not ok:
            continue
        lo, hi = b[axis, 0] - x[axis], b[axis, 1] - x[axis]
        if lo < 0.0 < hi:
            raise InvalidInput("cell touches the diagonal singularity")
        lo_d, hi_d = sorted((abs(lo), abs(hi)))
        if lo_d == 0.0:
            raise InvalidInput("cell touches the diagonal singularity")
        total += nu / a * (lo_d ** (-a) - hi_d ** (-a))
    return total


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def measure_of_set(spec: MeasureSpec, x, descriptor) -> float:
    """mu(x, A) for A a Ball, Annulus, Cell or Complement descriptor.

    Closed forms where the geometry permits, quadrature otherwise.  Sets
    whose interior contains x are rejected (infinite mass at the diagonal).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (spec.d,):
        raise InvalidInput(f"base point must have dimension {spec.d}")

    if isinstance(descriptor, Annulus):
        z_c = descriptor.center - x
        dist = float(np.linalg.norm(z_c))
        r, R = descriptor.r, descriptor.R
        if R == r:
            return 0.0
        if dist <= 1e-14:
            return _radial_mass(spec, r, R)
        if dist <= r:
            return (_offcenter_outside_ball_mass(spec, z_c, r)
                    - _offcenter_outside_ball_mass(spec, z_c, R))
        if dist >= R:
            return (measure_of_set(spec, x, Ball(descriptor.center, R))
                    - measure_of_set(spec, x, Ball(descriptor.center, r)))
        raise InvalidInput("base point lies inside the annulus")

    if isinstance(descriptor, Complement):
        ball = descriptor.ball
        z_c = ball.center - x
        dist = float(np.linalg.norm(z_c))
        if dist <= 1e-14:
            return _radial_mass(spec, ball.radius, math.inf)
        if dist < ball.radius:
            return _offcenter_outside_ball_mass(spec, z_c, ball.radius)
        # base point outside the ball: complement contains x
        raise InvalidInput("complement contains the base point")

    if isinstance(descriptor, Ball):
        z_c = descriptor.center - x
        dist = float(np.linalg.norm(z_c))
        if dist <= descriptor.radius:
            raise InvalidInput("ball contains the base point")
        return _ball_mass_from_outside(spec, z_c, descriptor.radius)

    if isinstance(descriptor, Cell):
        b = descriptor.bounds
        if b.shape[0] != spec.d:
            raise InvalidInput("cell dimension mismatch")
        if spec.kind == "axes":
            return _axes_cell_mass(spec, x, b)
        rel = b - x[:, None]
        if np.all((rel[:, 0] <= 0.0) & (0.0 <= rel[:, 1])):
            raise InvalidInput("cell touches the diagonal singularity")
        if spec.d == 1:
            lo, hi = rel[0]
            lo_d, hi_d = sorted((abs(lo), abs(hi)))
            if spec.kind == "stable":
                a = spec.alpha
                return spec.normalization / a * (lo_d ** (-a) - hi_d ** (-a))
            return spec.normalization * 0.5 * _tab_radial_integral(
                spec, lo_d, hi_d, 0)
        if spec.kind == "stable":
            return _cell_mass_quadrature(spec, rel)
        if spec.kind == "cusp":
            return _cusp_cell_mass(spec, rel)
        raise InvalidSpec(f"cell masses not supported for kind {spec.kind!r}")

    raise InvalidInput(f"unknown set descriptor {descriptor!r}")


def _ball_mass_from_outside(spec: MeasureSpec, z_c, R: float) -> float:
    """mu(x, B_R(c)) when x lies outside the ball; z_c = c - x."""
    a = spec.alpha
    nu = spec.normalization
    if spec.d == 1:
        zc = abs(float(np.atleast_1d(z_c)[0]))
        lo, hi = zc - R, zc + R
        if spec.kind in ("stable", "axes"):
            return nu / a * (lo ** (-a) - hi ** (-a))
        return nu * 0.5 * _tab_radial_integral(spec, lo, hi, 0)
    z_c = np.asarray(z_c, dtype=float)
    dist = float(np.linalg.norm(z_c))
    if spec.kind == "axes":
        total = 0.0
        for axis in range(2):
            other = z_c[1 - axis]
            if abs(other) >= R:
                continue  # line misses the ball
            half = math.sqrt(R * R - other * other)
            lo, hi = abs(z_c[axis]) - half, abs(z_c[axis]) + half
            total += nu / a * (lo ** (-a) - hi ** (-a))
        return total
    # rotational kinds: integrate over the wedge of rays hitting the ball
    phi0 = math.atan2(z_c[1], z_c[0])
    delta = math.asin(min(1.0, R / dist))
    q = dist * dist - R * R

    def chord(phi):
        e = np.array([math.cos(phi), math.sin(phi)])
        b = float(e @ z_c)
        disc = b * b - q
        if disc <= 0.0 or b <= 0.0:
            return None
        root = math.sqrt(disc)
        return b - root, b + root

    def f(phi):
        seg = chord(phi)
        if seg is None:
            return 0.0
        t_in, t_out = seg
        if spec.kind == "stable":
            return (t_in ** (-a) - t_out ** (-a)) / a
        if spec.kind == "cusp":
            lo_eff = max(t_in, _cusp_ray_cutoff(spec.s, phi))
            if lo_eff >= t_out:
                return 0.0
            return (lo_eff ** (-a) - t_out ** (-a)) / a
        # tabulated, d = 2: radial integral along the ray (no angular factor)
        return _tab_radial_integral(spec, t_in, t_out, 0) / (2.0 * math.pi)

    # substitute phi = phi0 + delta*sin(psi): the tangential sqrt vanishing of
    # the chord at the wedge edges becomes a smooth integrand in psi
    val, _ = quad(lambda psi: f(phi0 + delta * math.sin(psi))
                  * delta * math.cos(psi),
                  -math.pi / 2.0, math.pi / 2.0, **_QUAD_KW)
    return nu * val


def second_moment_in_ball(spec: MeasureSpec, x, rho: float) -> float:
    """integral over |x - y| <= rho of |x - y|^2 mu(x, dy)."""
    if rho <= 0:
        raise InvalidInput("rho must be positive")
    return _radial_second_moment(spec, rho)


def effective_order(spec: MeasureSpec) -> float:
    """Differentiability order the measure actually carries: alpha for the
    stable/axes/tabulated kinds, beta = (1 - 1/s) + alpha for the cusp."""
    if spec.kind == "cusp":
        return (1.0 - 1.0 / spec.s) + spec.alpha
    return spec.alpha
