"""Uniform grids, parabolic cylinders and exact cell/ball overlap weights.

The spatial grid is the integer lattice scaled by h inside a box
[-L, L]^d centered at the origin (L a multiple of h), with an interior
mask marking the nodes of the equation domain, a ball B_rho(c).  Space
and space-time integrals over balls and cylinders use cell-intersection
weights, so constants integrate exactly.

Cylinders follow the r^alpha time scaling of order-alpha operators:

    Q_r(x0, t0) = (t0 - r^a, t0 + r^a) x B_r(x0)
    Q_plus(r)   = (0, r^a)   x B_r(0)      (late)
    Q_minus(r)  = (-r^a, 0)  x B_r(0)      (early)
    U_plus      = (1 - (1/2)^a, 1)  x B_{1/2}(0)
    U_minus     = (-1, -1 + (1/2)^a) x B_{1/2}(0)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput

__all__ = ["Grid", "Cylinder", "ball_volume", "disk_box_area",
           "interval_overlap"]


def ball_volume(d: int, r: float) -> float:
    """Lebesgue volume of B_r in R^d (2r in 1-D, pi r^2 in 2-D)."""
    if d == 1:
        return 2.0 * r
    if d == 2:
        return math.pi * r * r
    raise InvalidInput("only d in {1, 2} supported")


def interval_overlap(lo1, hi1, lo2, hi2):
    """Length of [lo1, hi1] intersect [lo2, hi2]; vectorized."""
    return np.maximum(np.minimum(hi1, hi2) - np.maximum(lo1, lo2), 0.0)


def _sqrt_clip(v):
    return np.sqrt(np.maximum(v, 0.0))


def disk_box_area(center, radius, bounds) -> float:
    """Exact area of the disk B_radius(center) intersected with the
    axis-aligned box bounds = [[x1, x2], [y1, y2]]."""
    cx, cy = float(center[0]), float(center[1])
    (x1, x2), (y1, y2) = np.asarray(bounds, dtype=float)
    # shift so the disk sits at the origin
    x1, x2, y1, y2, R = x1 - cx, x2 - cx, y1 - cy, y2 - cy, float(radius)
    x1 = max(x1, -R)
    x2 = min(x2, R)
    if x2 <= x1 or R <= 0.0:
        return 0.0

    def F(x):
        # antiderivative of sqrt(R^2 - x^2)
        x = min(max(x, -R), R)
        return 0.5 * (x * math.sqrt(max(R * R - x * x, 0.0))
                      + R * R * math.asin(x / R))

    # breakpoints where the clipped slice limits change form
    brk = {x1, x2}
    for y in (y1, y2):
        if abs(y) < R:
            xc = math.sqrt(R * R - y * y)
            for cand in (-xc, xc):
                if x1 < cand < x2:
                    brk.add(cand)
    pts = sorted(brk)
    area = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        xm = 0.5 * (a + b)
        s = math.sqrt(max(R * R - xm * xm, 0.0))
        top_is_circle = y2 > s
        bot_is_circle = y1 < -s
        top = min(y2, s)
        bot = max(y1, -s)
        if top <= bot:
            continue
        seg = 0.0
        seg += (F(b) - F(a)) if top_is_circle else y2 * (b - a)
        seg -= (-(F(b) - F(a))) if bot_is_circle else y1 * (b - a)
        area += seg
    return area


@dataclass(frozen=True)
class Grid:
    """Uniform lattice grid in [-L, L]^d with a ball-shaped domain.

    Immutable after construction; the coordinate arrays must be treated
    as read-only.
    """

    d: int
    h: float
    box_radius: float
    domain_radius: float
    domain_center: np.ndarray = None

    # derived, filled in __post_init__
    m: int = field(init=False)
    coords: np.ndarray = field(init=False)
    lattice: np.ndarray = field(init=False)
    interior_mask: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.h <= 0:
            raise InvalidInput("grid spacing must be positive")
        m = round(self.box_radius / self.h)
        if abs(m * self.h - self.box_radius) > 1e-9 * self.box_radius:
            raise InvalidInput("box_radius must be an integer multiple of h")
        if self.domain_center is None:
            object.__setattr__(self, "domain_center", np.zeros(self.d))
        else:
            object.__setattr__(self, "domain_center",
                               np.asarray(self.domain_center, dtype=float))
        if self.domain_radius > self.box_radius + 1e-12:
            raise InvalidInput("domain must fit inside the box")
        object.__setattr__(self, "m", m)
        axes = [np.arange(-m, m + 1)] * self.d
        if self.d == 1:
            lattice = axes[0][:, None]
        else:
            I, J = np.meshgrid(axes[0], axes[1], indexing="ij")
            lattice = np.stack([I.ravel(), J.ravel()], axis=1)
        coords = lattice * self.h
        object.__setattr__(self, "lattice", lattice)
        object.__setattr__(self, "coords", coords)
        dist = np.linalg.norm(coords - self.domain_center, axis=1)
        object.__setattr__(self, "interior_mask",
                           dist < self.domain_radius - 1e-12)

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    @property
    def n_per_side(self) -> int:
        return 2 * self.m + 1

    @property
    def interior_indices(self) -> np.ndarray:
        return np.flatnonzero(self.interior_mask)

    def refine(self) -> "Grid":
        return Grid(self.d, self.h / 2.0, self.box_radius,
                    self.domain_radius, self.domain_center)

    def node_at(self, point) -> int:
        """Index of the grid node nearest to ``point``."""
        p = np.atleast_1d(np.asarray(point, dtype=float))
        idx = np.rint(p / self.h).astype(int)
        if np.any(np.abs(idx) > self.m):
            raise InvalidInput("point outside the box")
        if self.d == 1:
            return int(idx[0] + self.m)
        return int((idx[0] + self.m) * self.n_per_side + (idx[1] + self.m))

    def ball_mask(self, center, radius, strict: bool = True) -> np.ndarray:
        dist = np.linalg.norm(self.coords - np.asarray(center, float), axis=1)
        return dist < radius - 1e-12 if strict else dist <= radius + 1e-12

    def cell_bounds(self, index: int) -> np.ndarray:
        x = self.coords[index]
        return np.stack([x - self.h / 2.0, x + self.h / 2.0], axis=1)

    def ball_weights(self, center, radius) -> np.ndarray:
        """Per-node weights = volume of (node cell intersect B_radius(center)).

        Summing v * weights integrates v exactly for constants:
        sum(weights) = |B_radius| whenever the ball fits inside the box.
        """
        center = np.atleast_1d(np.asarray(center, dtype=float))
        w = np.zeros(self.n_nodes)
        dist = np.linalg.norm(self.coords - center, axis=1)
        half_diag = 0.5 * self.h * math.sqrt(self.d)
        inside = dist <= radius - half_diag
        w[inside] = self.h ** self.d
        boundary = (~inside) & (dist <= radius + half_diag)
        if self.d == 1:
            for i in np.flatnonzero(boundary):
                x = self.coords[i, 0]
                w[i] = interval_overlap(x - self.h / 2, x + self.h / 2,
                                        center[0] - radius, center[0] + radius)
        else:
            for i in np.flatnonzero(boundary):
                w[i] = disk_box_area(center, radius, self.cell_bounds(i))
        return w


@dataclass(frozen=True)
class Cylinder:
    """Space-time cylinder (t0, t1) x B_radius(center)."""

    t0: float
    t1: float
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center",
                           np.atleast_1d(np.asarray(self.center, dtype=float)))
        if self.t1 <= self.t0 or self.radius <= 0:
            raise InvalidInput("cylinder needs t0 < t1 and radius > 0")

    # -- canonical constructors ---------------------------------------------

    @classmethod
    def q(cls, x0, t0: float, r: float, alpha: float) -> "Cylinder":
        return cls(t0 - r ** alpha, t0 + r ** alpha, x0, r)

    @classmethod
    def q_plus(cls, r: float, alpha: float, d: int = 1) -> "Cylinder":
        return cls(0.0, r ** alpha, np.zeros(d), r)

    @classmethod
    def q_minus(cls, r: float, alpha: float, d: int = 1) -> "Cylinder":
        return cls(-(r ** alpha), 0.0, np.zeros(d), r)

    @classmethod
    def u_plus(cls, alpha: float, d: int = 1) -> "Cylinder":
        return cls(1.0 - 0.5 ** alpha, 1.0, np.zeros(d), 0.5)

    @classmethod
    def u_minus(cls, alpha: float, d: int = 1) -> "Cylinder":
        return cls(-1.0, -1.0 + 0.5 ** alpha, np.zeros(d), 0.5)

    def volume(self, d: int) -> float:
        return (self.t1 - self.t0) * ball_volume(d, self.radius)

    def time_weights(self, times: np.ndarray, dt: float,
                     t_min: float, t_max: float) -> np.ndarray:
        """Overlap of each time cell [t_k - dt/2, t_k + dt/2] (clipped to the
        global interval) with (t0, t1); integrates constants exactly."""
        lo = np.maximum(times - dt / 2.0, t_min)
        hi = np.minimum(times + dt / 2.0, t_max)
        return interval_overlap(lo, hi, self.t0, self.t1)

    def space_weights(self, grid: Grid) -> np.ndarray:
        return grid.ball_weights(self.center, self.radius)
