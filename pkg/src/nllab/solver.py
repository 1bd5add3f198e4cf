"""Time stepping for d_t u - Lu = f and discrete weak-form residuals.

The theta-scheme

    (u^{k+1} - u^k) / dt = theta L u^{k+1} + (1-theta) L u^k + f(t_{k+theta})

is solved on the interior (domain) nodes; nodes of the box outside the
domain carry imposed exterior values g(t, x), and the region beyond the
box enters through the operator's tail quadrature of g.  Each implicit
step is a symmetric positive-definite sparse solve by conjugate
gradients.

``weak_residual`` evaluates the time-weighted energy inequality that
defines weak supersolutions, discretized with the same theta pairing the
scheme uses, so the residual of a computed solution vanishes up to the
linear-solver tolerance.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .errors import InvalidInput, NumericalFailure
from .grid import Cylinder, Grid
from .operator import DiscreteOperator
from .randomness import stream

logger = logging.getLogger(__name__)

__all__ = ["IvpConfig", "SpaceTimeFunction", "TestFunction",
           "WeakFormResidual", "solve", "weak_residual",
           "make_test_supersolutions", "initial_hat"]


def initial_hat(grid: Grid, center=None) -> np.ndarray:
    """Grid hat of unit discrete mass at the node nearest ``center``."""
    u0 = np.zeros(grid.n_nodes)
    c = np.zeros(grid.d) if center is None else center
    u0[grid.node_at(c)] = grid.h ** (-grid.d)
    return u0


@dataclass
class SpaceTimeFunction:
    """u(t_k, x_i) on all box nodes plus analytic exterior data."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray
    exterior: Optional[Callable] = None
    theta: float = 1.0

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def exterior_values(self, t: float, pts: np.ndarray) -> np.ndarray:
        if self.exterior is None:
            return np.zeros(len(pts))
        return np.asarray(self.exterior(t, pts), dtype=float)

    def time_index(self, t: float) -> int:
        k = int(round((t - self.times[0]) / self.dt))
        if not 0 <= k < len(self.times) or abs(self.times[k] - t) > 1e-9:
            raise InvalidInput(f"time {t} is not on the time grid")
        return k

    def sup_norm(self, t_lo=None, t_hi=None, node_mask=None) -> float:
        k0 = 0 if t_lo is None else self.time_index(t_lo)
        k1 = len(self.times) - 1 if t_hi is None else self.time_index(t_hi)
        vals = self.values[k0:k1 + 1]
        if node_mask is not None:
            vals = vals[:, node_mask]
        return float(np.max(np.abs(vals))) if vals.size else 0.0

    def _cylinder_weights(self, cyl: Cylinder):
        tw = cyl.time_weights(self.times, self.dt,
                              float(self.times[0]), float(self.times[-1]))
        sw = cyl.space_weights(self.grid)
        return tw, sw

    def cylinder_integral(self, cyl: Cylinder, transform=None) -> float:
        """Space-time integral of transform(u) over the cylinder using
        cell-overlap weights (constants integrate exactly)."""
        tw, sw = self._cylinder_weights(cyl)
        ks = np.flatnonzero(tw > 0)
        js = np.flatnonzero(sw > 0)
        block = self.values[np.ix_(ks, js)]
        if transform is not None:
            block = transform(block)
        return float(tw[ks] @ block @ sw[js])

    def cylinder_min(self, cyl: Cylinder) -> float:
        """Discrete essential infimum: min over nodes strictly inside the
        ball at times within the closed interval."""
        ks = np.flatnonzero((self.times >= cyl.t0 - 1e-12)
                            & (self.times <= cyl.t1 + 1e-12))
        js = np.flatnonzero(self.grid.ball_mask(cyl.center, cyl.radius))
        if ks.size == 0 or js.size == 0:
            raise InvalidInput("cylinder contains no grid nodes")
        return float(np.min(self.values[np.ix_(ks, js)]))

    def scaled(self, factor: float) -> "SpaceTimeFunction":
        g = self.exterior
        scaled_g = None if g is None else (
            lambda t, pts, _g=g: factor * np.asarray(_g(t, pts), dtype=float))
        return SpaceTimeFunction(self.grid, self.times, factor * self.values,
                                 scaled_g, self.theta)


@dataclass
class IvpConfig:
    """Initial-value problem: operator, interval, scheme and data."""

    op: DiscreteOperator
    t0: float
    t1: float
    dt: float
    theta: float = 1.0
    u0: Optional[object] = None      # array on box nodes or callable(pts)
    g: Optional[Callable] = None     # exterior data g(t, pts)
    f: Optional[Callable] = None     # right side f(t, pts)
    rtol: float = 1e-10
    maxiter: int = 5000

    def __post_init__(self):
        if self.dt <= 0 or self.t1 <= self.t0:
            raise InvalidInput("need dt > 0 and t0 < t1")
        if not 0.5 <= self.theta <= 1.0:
            raise InvalidInput("theta must lie in [1/2, 1]")
        if self.rtol <= 0:
            raise InvalidInput("solver tolerance must be positive")
        n_steps = (self.t1 - self.t0) / self.dt
        if abs(n_steps - round(n_steps)) > 1e-8:
            raise InvalidInput("dt must divide the time interval")


def _cg_solve(M, b, x0, rtol, maxiter):
    x, info = cg(M, b, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter)
    if info != 0:
        res = float(np.linalg.norm(b - M @ x))
        raise NumericalFailure(
            f"conjugate gradients stalled (info={info})", residual=res)
    return x


def solve(cfg: IvpConfig) -> SpaceTimeFunction:
    """Run the theta-scheme; returns the full space-time trajectory."""
    op = cfg.op
    grid = op.grid
    n = grid.n_nodes
    interior = grid.interior_indices
    exterior = np.flatnonzero(~grid.interior_mask)
    n_steps = int(round((cfg.t1 - cfg.t0) / cfg.dt))
    times = cfg.t0 + cfg.dt * np.arange(n_steps + 1)

    values = np.zeros((n_steps + 1, n))
    if cfg.u0 is None:
        pass
    elif callable(cfg.u0):
        values[0] = np.asarray(cfg.u0(grid.coords), dtype=float)
    else:
        u0 = np.asarray(cfg.u0, dtype=float)
        if u0.shape != (n,):
            raise InvalidInput("u0 must be defined on all box nodes")
        values[0] = u0
    if exterior.size and cfg.g is not None:
        values[0, exterior] = cfg.g(times[0], grid.coords[exterior])

    time_dep = op.coeffs.a is not None and op.coeffs.time_dependent_a

    def build_system(t):
        W = op.weight_matrix(t)
        D = np.asarray(W.sum(axis=1)).ravel() + op.tail_mass_at(t)
        W_II = W[interior][:, interior]
        A_II = sp.diags(D[interior]) - W_II
        W_IE = W[interior][:, exterior] if exterior.size else None
        M = (sp.identity(len(interior), format="csr")
             + cfg.dt * cfg.theta * A_II).tocsr()
        return W, M, W_IE

    W, M, W_IE = build_system(times[0])

    for k in range(n_steps):
        t_now, t_next = times[k], times[k + 1]
        if time_dep:
            W, M, W_IE = build_system(t_next)
        rhs = values[k, interior].copy()
        if cfg.theta < 1.0:
            Lu_now = op.apply(values[k], cfg.g, t_now)
            rhs += cfg.dt * (1.0 - cfg.theta) * Lu_now
        g_next = None
        if exterior.size:
            g_next = (cfg.g(t_next, grid.coords[exterior])
                      if cfg.g is not None else np.zeros(exterior.size))
            if W_IE is not None:
                rhs += cfg.dt * cfg.theta * (W_IE @ g_next)
        rhs += cfg.dt * cfg.theta * op.tail_g_integral(cfg.g, t_next)[interior]
        if cfg.f is not None:
            t_mid = t_now + cfg.theta * cfg.dt
            rhs += cfg.dt * np.asarray(
                cfg.f(t_mid, grid.coords[interior]), dtype=float)
        values[k + 1, interior] = _cg_solve(M, rhs, values[k, interior],
                                            cfg.rtol, cfg.maxiter)
        if exterior.size:
            values[k + 1, exterior] = g_next
    return SpaceTimeFunction(grid=grid, times=times, values=values,
                             exterior=cfg.g, theta=cfg.theta)


# ---------------------------------------------------------------------------
# weak-form residual
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Smooth space-time bump compactly supported in a ball.

    value(t, x) = amp * cos^2(pi/2 |x-c|/R) * cos^2(pi/2 (t-tc)/tw)
    inside the support, zero outside; nonnegative by construction.
    """

    __test__ = False    # not a pytest class

    center: np.ndarray
    radius: float
    t_center: float
    t_width: float
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center",
                           np.atleast_1d(np.asarray(self.center, float)))

    def _space(self, pts):
        r = np.linalg.norm(np.atleast_2d(pts) - self.center, axis=1) / self.radius
        out = np.where(r < 1.0, np.cos(0.5 * math.pi * np.minimum(r, 1.0)) ** 2, 0.0)
        return out

    def _time(self, t):
        s = (t - self.t_center) / self.t_width
        return math.cos(0.5 * math.pi * s) ** 2 if abs(s) < 1.0 else 0.0

    def _dtime(self, t):
        s = (t - self.t_center) / self.t_width
        if abs(s) >= 1.0:
            return 0.0
        return -math.pi / (2.0 * self.t_width) * math.sin(math.pi * s)

    def value(self, t, pts):
        return self.amplitude * self._time(t) * self._space(pts)

    def dt_value(self, t, pts):
        return self.amplitude * self._dtime(t) * self._space(pts)


@dataclass
class WeakFormResidual:
    """lhs - rhs of the supersolution inequality for one test function."""

    value: float
    eps_scheme: float
    t1: float
    t2: float
    certified: bool


def weak_residual(u: SpaceTimeFunction, op: DiscreteOperator,
                  phi: TestFunction, t1: float, t2: float,
                  f: Optional[Callable] = None,
                  require_nonnegative: bool = True) -> WeakFormResidual:
    """Discrete weak-form residual of u against phi on [t1, t2].

    Nonnegative residual (up to the reported scheme tolerance) certifies
    the supersolution inequality; solutions give residual ~ solver
    tolerance.
    """
    grid = op.grid
    if phi.radius + grid.h > grid.domain_radius:
        raise InvalidInput("test function support must be compactly "
                           "contained in the domain")
    if np.linalg.norm(phi.center - grid.domain_center) + phi.radius \
            > grid.domain_radius - 0.5 * grid.h:
        raise InvalidInput("test function support must be compactly "
                           "contained in the domain")
    if require_nonnegative and phi.amplitude < 0:
        raise InvalidInput("supersolution test functions must be nonnegative")
    k1, k2 = u.time_index(t1), u.time_index(t2)
    if k2 <= k1:
        raise InvalidInput("need t1 < t2 on the time grid")
    hd = grid.h ** grid.d
    theta = u.theta
    dt = u.dt
    phi_vals = np.stack([phi.value(u.times[k], grid.coords)
                         for k in range(k1, k2 + 1)])
    support = phi_vals.max(axis=0) > 0
    if np.any(support & ~grid.interior_mask):
        raise InvalidInput("test function leaks outside the domain nodes")

    total = 0.0
    g = u.exterior
    for k in range(k1, k2):
        pk, pk1 = phi_vals[k - k1], phi_vals[k - k1 + 1]
        if not (pk.any() or pk1.any()):
            continue
        phi_hat = theta * pk1 + (1.0 - theta) * pk
        du = u.values[k + 1] - u.values[k]
        total += float(du @ phi_hat) * hd
        e_next = op.bilinear_form(u.values[k + 1], pk1, u.times[k + 1],
                                  g_u=g) if pk1.any() else 0.0
        e_now = op.bilinear_form(u.values[k], pk, u.times[k], g_u=g) \
            if theta < 1.0 and pk.any() else 0.0
        total += dt * (theta * e_next + (1.0 - theta) * e_now)
        if f is not None:
            t_mid = u.times[k] + theta * dt
            fv = np.asarray(f(t_mid, grid.coords), dtype=float)
            total -= dt * float(fv @ phi_hat) * hd

    phi_max = float(phi_vals.max())
    dphi_max = max(abs(phi.dt_value(u.times[k], grid.coords)).max()
                   for k in range(k1, k2 + 1))
    u_max = float(np.max(np.abs(u.values[k1:k2 + 1])))
    vol = (t2 - t1) * (2.0 * phi.radius) ** grid.d
    eps = 4.0 * (dt + grid.h) * (phi_max + dphi_max) * max(u_max, 1e-30) * vol
    return WeakFormResidual(value=total, eps_scheme=eps, t1=t1, t2=t2,
                            certified=total >= -eps)


# ---------------------------------------------------------------------------
# randomized certified supersolutions
# ---------------------------------------------------------------------------

def _random_field(rng, d, box_radius, allow_axis_mass=True):
    """Nonnegative mixture of gaussian bumps and plateau bumps over a
    positive floor proportional to the largest amplitude (so the depth of
    relative variation is comparable across samples); returns a vectorized
    callable over point arrays."""
    terms = []
    n_bumps = int(rng.integers(1, 4))
    for m in range(n_bumps):
        amp = float(rng.uniform(0.3, 1.5))
        # first bump lands near the unit ball so the observation cylinders
        # always see nontrivial variation
        reach = 0.8 if m == 0 else 0.8 * box_radius
        ctr = rng.uniform(-reach, reach, d)
        width = float(rng.uniform(0.15, 0.9))
        power = 2 if rng.uniform() < 0.6 else 8   # gaussian or plateau
        terms.append((amp, ctr, width, power, None))
    if d == 2 and allow_axis_mass and rng.uniform() < 0.5:
        # mass concentrated near a coordinate axis line
        axis = int(rng.integers(0, 2))
        amp = float(rng.uniform(0.5, 2.0))
        width = float(rng.uniform(0.1, 0.3))
        terms.append((amp, None, width, 2, axis))
    floor = float(rng.uniform(0.05, 0.4)) * max(t[0] for t in terms)

    def field(pts):
        pts = np.atleast_2d(pts)
        out = np.full(len(pts), floor)
        for amp, ctr, width, power, axis in terms:
            if axis is None:
                r2 = np.sum((pts - ctr) ** 2, axis=1) / width ** 2
                out = out + amp * np.exp(-r2 ** (power // 2))
            else:
                out = out + amp * np.exp(-(pts[:, 1 - axis] / width) ** 2)
        return out

    return field


def _one_supersolution(op, seed, attempt, dt, t0, t1, theta, rtol, n_certify):
    """Solve and certify the sample of one attempt stream; None if it
    fails certification."""
    grid = op.grid
    rng = stream(seed, attempt)
    u0_field = _random_field(rng, grid.d, grid.box_radius)
    g_field = _random_field(rng, grid.d, grid.box_radius)
    g = lambda t, pts, _f=g_field: _f(pts)
    cfg = IvpConfig(op=op, t0=t0, t1=t1, dt=dt, theta=theta,
                    u0=lambda pts, _f=u0_field: _f(pts),
                    g=g, f=None, rtol=rtol)
    u = solve(cfg)
    for j in range(n_certify):
        radius = float(rng.uniform(0.3, 0.6)) * grid.domain_radius
        max_off = grid.domain_radius - radius - grid.h
        center = rng.uniform(-1.0, 1.0, grid.d)
        nrm = np.linalg.norm(center)
        if nrm > 0 and max_off > 0:
            center = center / nrm * min(nrm, max_off) * rng.uniform(0.0, 1.0)
        else:
            center = np.zeros(grid.d)
        width = float(rng.uniform(0.3, 0.8)) * (t1 - t0) / 2.0
        tc = float(rng.uniform(t0 + width, t1 - width))
        phi = TestFunction(center=center, radius=radius, t_center=tc,
                           t_width=width)
        res = weak_residual(u, op, phi, t0, t1, f=None)
        if not res.certified:
            logger.warning("discarding uncertified supersolution sample %d",
                           attempt)
            return None
    return u


def make_test_supersolutions(op: DiscreteOperator, seed: int, count: int,
                             dt: float, t0: float = -1.0, t1: float = 1.0,
                             theta: float = 1.0, rtol: float = 1e-10,
                             n_certify: int = 3, max_attempts_factor: int = 4,
                             threads: int = 1):
    """Seeded nonnegative solutions of the homogeneous equation on
    (t0, t1) x R^d, each certified as a weak supersolution by
    ``weak_residual`` against random nonnegative test functions.

    Deterministic for fixed (seed, count) regardless of thread count:
    attempt k always uses the counter-based stream (seed, k) and results
    are collected in attempt order.
    """
    out = []
    max_attempts = max_attempts_factor * count
    attempt = 0
    while len(out) < count and attempt < max_attempts:
        wave = list(range(attempt, min(attempt + max(count - len(out), 1),
                                       max_attempts)))
        attempt = wave[-1] + 1
        if threads > 1 and len(wave) > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(
                    lambda k: _one_supersolution(op, seed, k, dt, t0, t1,
                                                 theta, rtol, n_certify),
                    wave))
        else:
            results = [_one_supersolution(op, seed, k, dt, t0, t1, theta,
                                          rtol, n_certify) for k in wave]
        out.extend(u for u in results if u is not None)
    if len(out) < count:
        raise NumericalFailure(
            f"only {len(out)} of {count} samples certified")
    return out[:count]
