"""Regularity experiments: weak Harnack quotients, Hoelder fits, the
scaling property, weighted Poincare ratios, log-level-set bounds, Moser
inequalities, heat-kernel profiles and the strong-Harnack failure probe.

The theorems under test assert existence of constants, so every
operation reports measured ratios and fitted constants; acceptance is
boundedness, stability under refinement and the exact homogeneity
invariances, never a literal constant from the analysis.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .conditions import check_k3
from .errors import InvalidInput
from .grid import Cylinder, Grid
from .measures import MeasureSpec, effective_order
from .operator import DiscreteOperator, assemble
from .randomness import stream
from .solver import (IvpConfig, SpaceTimeFunction, initial_hat,
                     make_test_supersolutions, solve)

logger = logging.getLogger(__name__)

__all__ = ["HarnackReport", "HolderReport", "MoserReport", "PoincareReport",
           "ScalingParams", "harnack_quotient", "harnack_experiment",
           "harnack_constant_smoke", "holder_fit", "holder_experiment",
           "scaling_check", "weighted_poincare_ratio", "poincare_nodes",
           "poincare_experiment", "log_level_sets", "moser_check",
           "moser_positive_fit", "heat_kernel_profile",
           "strong_harnack_probe", "lu_minus_device_check"]


# ---------------------------------------------------------------------------
# report types
# ---------------------------------------------------------------------------

@dataclass
class HarnackReport:
    alpha: float
    h: float
    dt: float
    quotients: List[float]
    max_quotient: float
    degenerate: int = 0
    refinement: dict = field(default_factory=dict)


@dataclass
class HolderReport:
    beta: float
    raw_slope: float
    eta: float
    residual: float
    sup_norm: float
    n_pairs: int
    seminorm_zero: bool = False


@dataclass
class MoserReport:
    mode: str
    p: float
    kappa: float
    r: float
    R: float
    lhs: float
    rhs: float
    implied_constant: float
    g1: Optional[float] = None
    g2_exponent: Optional[float] = None


@dataclass
class PoincareReport:
    alphas: List[float]
    max_ratios: List[float]
    overall_max: float
    degenerate: int = 0


@dataclass(frozen=True)
class ScalingParams:
    r: float
    xi: np.ndarray
    tau: float
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "xi",
                           np.atleast_1d(np.asarray(self.xi, dtype=float)))
        if self.r <= 0:
            raise InvalidInput("scaling ratio must be positive")


# ---------------------------------------------------------------------------
# weak Harnack quotient
# ---------------------------------------------------------------------------

def harnack_quotient(u: SpaceTimeFunction, f_sup: float, alpha: float) -> float:
    """||u||_L1(U_minus) / (inf_{U_plus} u + ||f||_inf); nan if degenerate."""
    grid = u.grid
    um = Cylinder.u_minus(alpha, grid.d)
    up = Cylinder.u_plus(alpha, grid.d)
    l1 = u.cylinder_integral(um, transform=np.abs)
    inf_late = u.cylinder_min(up)
    denom = inf_late + f_sup
    if denom <= 0.0:
        if l1 <= 1e-14:
            return math.nan      # 0/0: degenerate, not infinite
        denom = max(denom, 1e-300)
    return l1 / denom


def harnack_experiment(spec: MeasureSpec, h: float, dt: float, seed: int,
                       count: int, box_radius: float = 8.0,
                       domain_radius: float = 2.0,
                       threads: int = 1) -> HarnackReport:
    """Batch of seeded certified nonnegative supersolutions on
    (-1,1) x R^d with the quotient of each."""
    grid = Grid(spec.d, h, box_radius, domain_radius)
    op = assemble(spec, grid)
    alpha = effective_order(spec)
    samples = make_test_supersolutions(op, seed, count, dt, threads=threads)
    quotients, degenerate = [], 0
    for u in samples:
        q = harnack_quotient(u, 0.0, alpha)
        if math.isnan(q):
            degenerate += 1
        else:
            quotients.append(q)
    return HarnackReport(alpha=alpha, h=h, dt=dt, quotients=quotients,
                         max_quotient=max(quotients) if quotients else 0.0,
                         degenerate=degenerate)


def harnack_constant_smoke(spec: MeasureSpec, h: float, dt: float,
                           box_radius: float = 8.0,
                           domain_radius: float = 2.0,
                           value: float = 1.0) -> float:
    """Quotient of the constant function: the pure cylinder geometry
    (1/2)^alpha |B_1/2|."""
    grid = Grid(spec.d, h, box_radius, domain_radius)
    times = np.arange(-1.0, 1.0 + dt / 2, dt)
    u = SpaceTimeFunction(
        grid, times, np.full((len(times), grid.n_nodes), float(value)),
        lambda t, pts: np.full(len(pts), float(value)))
    return harnack_quotient(u, 0.0, effective_order(spec))


# ---------------------------------------------------------------------------
# Hoelder fit
# ---------------------------------------------------------------------------

def holder_fit(u: SpaceTimeFunction, alpha: float, t_window,
               space_radius: float, seed: int = 0,
               max_pairs: int = 400000) -> HolderReport:
    """Log-log fit of oscillations against the parabolic distance
    |x - y| + |t - s|^{1/alpha} over node pairs in a sub-cylinder, with
    distances restricted to [2h, diam/4]."""
    grid = u.grid
    t_lo, t_hi = t_window
    k_lo, k_hi = u.time_index(t_lo), u.time_index(t_hi)
    nodes = np.flatnonzero(grid.ball_mask(grid.domain_center, space_radius))
    ks = np.arange(k_lo, k_hi + 1)
    sup_norm = float(np.max(np.abs(u.values)))
    if sup_norm < 1e-300:
        return HolderReport(beta=0.0, raw_slope=0.0, eta=0.0, residual=0.0,
                            sup_norm=0.0, n_pairs=0, seminorm_zero=True)
    rng = stream(seed, 101)
    n_nodes, n_times = len(nodes), len(ks)
    n_states = n_nodes * n_times
    m = min(max_pairs, n_states * (n_states - 1) // 2)
    a_k = rng.integers(0, n_times, m)
    a_i = rng.integers(0, n_nodes, m)
    b_k = rng.integers(0, n_times, m)
    b_i = rng.integers(0, n_nodes, m)
    xa = grid.coords[nodes[a_i]]
    xb = grid.coords[nodes[b_i]]
    ta = u.times[ks[a_k]]
    tb = u.times[ks[b_k]]
    dist = np.linalg.norm(xa - xb, axis=1) \
        + np.abs(ta - tb) ** (1.0 / alpha)
    diam = 2.0 * space_radius + (t_hi - t_lo) ** (1.0 / alpha)
    osc = np.abs(u.values[ks[a_k], nodes[a_i]] - u.values[ks[b_k], nodes[b_i]])
    keep = (dist >= 2.0 * grid.h) & (dist <= diam / 4.0) & (osc > 0)
    if keep.sum() < 16:
        return HolderReport(beta=0.0, raw_slope=0.0, eta=0.0, residual=0.0,
                            sup_norm=sup_norm, n_pairs=int(keep.sum()),
                            seminorm_zero=True)
    lx = np.log(dist[keep])
    ly = np.log(osc[keep])
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    (slope, intercept), res, _, _ = np.linalg.lstsq(A, ly, rcond=None)
    residual = math.sqrt(float(res[0]) / keep.sum()) if len(res) else 0.0
    beta = min(max(slope, 1e-6), 1.0)
    eta = math.exp((math.log(sup_norm) - intercept) / beta)
    return HolderReport(beta=float(beta), raw_slope=float(slope),
                        eta=float(eta), residual=residual,
                        sup_norm=sup_norm, n_pairs=int(keep.sum()))


def holder_experiment(spec: MeasureSpec, h: float, dt: float, seed: int,
                      box_radius: float = 8.0, domain_radius: float = 2.0,
                      t_window=(0.25, 0.9375), space_radius: float = 1.0) -> HolderReport:
    """Solve from random sign data (+-1 per interior node) with zero
    forcing and exterior data, then fit the interior oscillations."""
    grid = Grid(spec.d, h, box_radius, domain_radius)
    op = assemble(spec, grid)
    rng = stream(seed, 7)
    u0 = np.zeros(grid.n_nodes)
    u0[grid.interior_mask] = rng.choice([-1.0, 1.0],
                                        int(grid.interior_mask.sum()))
    cfg = IvpConfig(op=op, t0=-1.0, t1=1.0, dt=dt, u0=u0,
                    g=lambda t, pts: np.zeros(len(pts)))
    u = solve(cfg)
    alpha = effective_order(spec)
    # snap the fitting window onto the time grid
    t_lo = -1.0 + round((t_window[0] + 1.0) / dt) * dt
    t_hi = -1.0 + math.floor((t_window[1] + 1.0) / dt + 1e-9) * dt
    return holder_fit(u, alpha, (t_lo, t_hi), space_radius, seed=seed)


# ---------------------------------------------------------------------------
# scaling property
# ---------------------------------------------------------------------------

def scaling_check(spec: MeasureSpec, params: ScalingParams, h_unit: float,
                  dt_unit: float, u0, g, f=None, box_factor: float = 4.0,
                  theta: float = 1.0, rtol: float = 1e-12) -> dict:
    """Compare the pullback of a solve on Q_r(xi, tau) with a direct solve
    of the rescaled problem on the unit cylinder.

    Spatial grids are nested exactly (h_big = r * h_unit) so the rescaled
    weights must equal r^alpha times the pullback masses; the time grids
    differ (two sub-steps per mapped step) unless the transform is the
    identity, for which the discrepancy is exactly zero.
    """
    if spec.kind not in ("stable", "axes"):
        raise InvalidInput("scaling check needs a dilation-closed family "
                           "(stable or axes)")
    r, xi, tau = params.r, params.xi, params.tau
    alpha = params.alpha
    d = spec.d
    h_big = r * h_unit
    if abs(round(math.log2(r)) - math.log2(r)) > 1e-12:
        raise InvalidInput("scaling ratio must be a power of two of the grid")
    if np.any(np.abs(np.round(xi / h_big) - xi / h_big) > 1e-9):
        raise InvalidInput("offset xi must sit on the rescaled lattice")

    box_unit = box_factor * 1.0
    grid_unit = Grid(d, h_unit, box_unit, 1.0)
    op_unit = assemble(spec, grid_unit)

    identity = (r == 1.0) and (tau == 0.0) and np.all(xi == 0.0)
    xi_pad = float(np.max(np.abs(xi)))
    box_big = r * box_unit + math.ceil(xi_pad / h_big) * h_big
    grid_big = Grid(d, h_big, box_big, r, domain_center=xi)
    op_big = assemble(spec, grid_big)

    # weight agreement: unit weights == r^alpha * pullback masses
    matrix_rel = 0.0
    if np.all(xi == 0.0) and box_big == r * box_unit:
        w_unit = op_unit.pair_w
        w_big = op_big.pair_w
        if w_unit.shape == w_big.shape:
            scale = r ** alpha
            denom = np.maximum(np.abs(w_unit), 1e-300)
            matrix_rel = float(np.max(np.abs(w_unit - scale * w_big) / denom))

    def g_unit(t, pts):
        return g(r ** alpha * t + tau, r * np.atleast_2d(pts) + xi)

    def u0_unit(pts):
        return u0(r * np.atleast_2d(pts) + xi)

    f_unit = None
    if f is not None:
        def f_unit(t, pts):
            return r ** alpha * f(r ** alpha * t + tau,
                                  r * np.atleast_2d(pts) + xi)

    cfg_unit = IvpConfig(op=op_unit, t0=-1.0, t1=1.0, dt=dt_unit,
                         theta=theta, u0=u0_unit, g=g_unit, f=f_unit,
                         rtol=rtol)
    u_unit = solve(cfg_unit)

    sub = 1 if identity else 2
    dt_big = r ** alpha * dt_unit / sub
    cfg_big = IvpConfig(op=op_big, t0=tau - r ** alpha, t1=tau + r ** alpha,
                        dt=dt_big, theta=theta,
                        u0=lambda pts: u0(np.atleast_2d(pts)),
                        g=g, f=f, rtol=rtol)
    u_big = solve(cfg_big)

    # map unit nodes into the big grid
    mapped = r * grid_unit.coords + xi
    idx_big = np.array([grid_big.node_at(p) for p in mapped])
    disc = 0.0
    for k in range(len(u_unit.times)):
        pulled = u_big.values[sub * k][idx_big]
        disc = max(disc, float(np.max(np.abs(u_unit.values[k] - pulled))))
    eps_scheme = 4.0 * (dt_unit + h_unit) * max(
        1e-30, float(np.max(np.abs(u_big.values))))
    return {"discrepancy": disc, "matrix_rel_diff": matrix_rel,
            "eps_scheme": eps_scheme, "identity": identity}


# ---------------------------------------------------------------------------
# weighted Poincare
# ---------------------------------------------------------------------------

def _poincare_weight(pts):
    return np.minimum(1.5 - np.linalg.norm(np.atleast_2d(pts), axis=1), 1.0)


_POINCARE_OPS: dict = {}


def _poincare_operator(spec: MeasureSpec, dh: float) -> DiscreteOperator:
    """Operator on the ball B_{3/2} (box = domain) for energy weights;
    cached per (kind, d, alpha, s, normalization, dh)."""
    key = (spec.kind, spec.d, spec.alpha, spec.s, spec.normalization, dh)
    if key not in _POINCARE_OPS:
        grid = Grid(spec.d, dh, 1.5, 1.5)
        _POINCARE_OPS[key] = assemble(spec, grid)
    return _POINCARE_OPS[key]


def weighted_poincare_ratio(v, spec: MeasureSpec, dh: float) -> float:
    """Ratio of the Psi-weighted variance of v on B_{3/2} to the
    (Psi ^ Psi)-weighted mu-energy with operator pair weights (cell masses
    plus the diagonal second-moment correction); 0 for constants."""
    op = _poincare_operator(spec, dh)
    grid = op.grid
    inside = grid.interior_mask
    nodes = grid.coords[inside]
    if callable(v):
        v_in = np.asarray(v(nodes), dtype=float)
    else:
        v_in = np.asarray(v, dtype=float)
    if v_in.shape != (inside.sum(),):
        raise InvalidInput("v must be sampled on the B_{3/2} lattice")
    v_full = np.zeros(grid.n_nodes)
    v_full[inside] = v_in
    psi_full = np.where(inside, _poincare_weight(grid.coords), 0.0)
    hd = dh ** spec.d
    v_mean = float((v_full * psi_full).sum() / psi_full.sum())
    lhs = float(((v_full - v_mean) ** 2 * psi_full).sum()) * hd
    both_in = inside[op.pair_i] & inside[op.pair_j]
    pi, pj = op.pair_i[both_in], op.pair_j[both_in]
    w = op.pair_w[both_in]
    psi_min = np.minimum(psi_full[pi], psi_full[pj])
    rhs = 2.0 * float(((v_full[pj] - v_full[pi]) ** 2 * psi_min * w).sum()) * hd
    if rhs <= 1e-300:
        return 0.0
    return lhs / rhs


def poincare_nodes(d: int, dh: float) -> np.ndarray:
    """Lattice nodes of the Poincare ball B_{3/2}, in operator order."""
    grid = Grid(d, dh, 1.5, 1.5)
    return grid.coords[grid.interior_mask]


def poincare_experiment(d: int, alphas: Sequence[float], dh: float,
                        seed: int, count: int = 30,
                        kind: str = "stable") -> PoincareReport:
    """Max Poincare ratio over seeded random fields for each alpha with
    the robust (2 - alpha) normalization."""
    max_ratios = []
    degenerate = 0
    nodes = poincare_nodes(d, dh)
    for a_idx, alpha in enumerate(alphas):
        spec = MeasureSpec(kind=kind, d=d, alpha=alpha,
                           normalization=2.0 - alpha)
        worst = 0.0
        for k in range(count):
            rng = stream(seed, a_idx, k)
            mode = k % 3
            if mode == 0:
                v = rng.normal(size=len(nodes))
            elif mode == 1:
                freq = rng.uniform(0.5, 4.0, d)
                v = np.sin(nodes @ freq + rng.uniform(0, 2 * math.pi))
            else:
                ctr = rng.uniform(-1.0, 1.0, d)
                v = np.exp(-np.sum((nodes - ctr) ** 2, axis=1)
                           / rng.uniform(0.05, 0.5))
            ratio = weighted_poincare_ratio(v, spec, dh)
            if ratio == 0.0:
                degenerate += 1
            worst = max(worst, ratio)
        max_ratios.append(worst)
    return PoincareReport(alphas=list(alphas), max_ratios=max_ratios,
                          overall_max=max(max_ratios), degenerate=degenerate)


# ---------------------------------------------------------------------------
# log level sets
# ---------------------------------------------------------------------------

def log_level_sets(u: SpaceTimeFunction, f_sup: float, alpha: float,
                   eps: float = 0.0, n_levels: int = 60) -> dict:
    """Level-set bounds for log(u + ||f|| + eps): the normalizing constant
    a is the Psi-weighted spatial average of the log at the cylinder
    junction t = 0; returns sup_s s * |Q_plus(1) cap {log < -s - a}| and
    sup_s s * |Q_minus(1) cap {log > s - a}|."""
    grid = u.grid
    field_vals = u.values + f_sup + eps
    if field_vals.min() <= 0.0:
        raise InvalidInput("log level sets need u + ||f|| + eps > 0")
    log_u = np.log(field_vals)
    k0 = u.time_index(0.0)
    w_ball = grid.ball_weights(np.zeros(grid.d), 1.5)
    psi = _poincare_weight(grid.coords)
    psi_w = np.maximum(psi, 0.0) * w_ball
    a = float((log_u[k0] * psi_w).sum() / psi_w.sum())

    qp = Cylinder.q_plus(1.0, alpha, grid.d)
    qm = Cylinder.q_minus(1.0, alpha, grid.d)
    out = {"a": a}
    spread = float(np.max(np.abs(log_u - a))) + 1.0
    s_grid = np.geomspace(0.02, spread, n_levels)

    for name, cyl, sign in (("sup_neg", qp, -1.0), ("sup_pos", qm, 1.0)):
        tw = cyl.time_weights(u.times, u.dt, float(u.times[0]),
                              float(u.times[-1]))
        sw = cyl.space_weights(grid)
        ks = np.flatnonzero(tw > 0)
        js = np.flatnonzero(sw > 0)
        block = log_u[np.ix_(ks, js)] - a
        best = 0.0
        for s in s_grid:
            if sign < 0:
                meas = float(tw[ks] @ (block < -s) @ sw[js])
            else:
                meas = float(tw[ks] @ (block > s) @ sw[js])
            best = max(best, s * meas)
        out[name] = best
    out["s_grid"] = s_grid
    return out


# ---------------------------------------------------------------------------
# Moser inequalities
# ---------------------------------------------------------------------------

def moser_check(u: SpaceTimeFunction, mode: str, p: float, r: float, R: float,
                f_sup: float, alpha: float, eps: float = 0.0) -> MoserReport:
    """Measured two-sided quantities of one Moser step or iteration.

    NegStep: (int_{Q-(r)} w^{-kp})^{1/k} vs A' int_{Q-(R)} w^{-p}
    NegIter: sup_{Q-(r)} w^{-1}        vs (int_{Q-(R)} w^{-p})^{1/p} / G1-scale
    PosIter: int_{Q+(r)} w             vs (int_{Q+(R)} w^p)^{1/p}

    with w = u + ||f|| + eps and kappa = 1 + alpha/d.
    """
    grid = u.grid
    d = grid.d
    kappa = 1.0 + alpha / d
    if not 0.5 <= r < R <= 1.0:
        raise InvalidInput("need 1/2 <= r < R <= 1")
    if mode == "NegStep":
        if p <= 0:
            raise InvalidInput("NegStep needs p > 0")
    elif mode == "NegIter":
        if not 0.0 < p <= 1.0:
            raise InvalidInput("NegIter needs p in (0, 1]")
    elif mode == "PosIter":
        if not 0.0 < p < 1.0 / kappa:
            raise InvalidInput("PosIter needs p in (0, 1/kappa)")
    else:
        raise InvalidInput(f"unknown Moser mode {mode!r}")

    shift = f_sup + eps

    def shifted(block):
        return block + shift

    g1 = None
    if mode in ("NegStep", "NegIter"):
        cyl_r = Cylinder.q_minus(r, alpha, d)
        cyl_R = Cylinder.q_minus(R, alpha, d)
    else:
        cyl_r = Cylinder.q_plus(r, alpha, d)
        cyl_R = Cylinder.q_plus(R, alpha, d)

    if mode == "NegStep":
        lhs = u.cylinder_integral(
            cyl_r, transform=lambda b: shifted(b) ** (-kappa * p)) ** (1.0 / kappa)
        rhs0 = u.cylinder_integral(cyl_R, transform=lambda b: shifted(b) ** (-p))
        a_factor = (p + 1.0) ** 2 * ((R - r) ** (-alpha)
                                     + (R ** alpha - r ** alpha) ** (-1.0))
        implied = lhs / (a_factor * rhs0)
        return MoserReport(mode=mode, p=p, kappa=kappa, r=r, R=R, lhs=lhs,
                           rhs=a_factor * rhs0, implied_constant=implied)
    if mode == "NegIter":
        w_min = u.cylinder_min(cyl_r) + shift
        if w_min <= 0:
            raise InvalidInput("NegIter needs u + ||f|| + eps > 0")
        lhs = 1.0 / w_min
        rhs = u.cylinder_integral(
            cyl_R, transform=lambda b: shifted(b) ** (-p)) ** (1.0 / p)
        g1 = (R - r) ** (d + alpha) if alpha >= 1.0 \
            else (R ** alpha - r ** alpha) ** ((d + alpha) / alpha)
        implied = g1 * (lhs / rhs) ** p
        return MoserReport(mode=mode, p=p, kappa=kappa, r=r, R=R, lhs=lhs,
                           rhs=rhs, implied_constant=implied, g1=g1)
    lhs = u.cylinder_integral(cyl_r, transform=shifted)
    rhs = u.cylinder_integral(
        cyl_R, transform=lambda b: shifted(b) ** p) ** (1.0 / p)
    implied = (lhs / rhs) ** (1.0 / (1.0 / p - 1.0))
    return MoserReport(mode=mode, p=p, kappa=kappa, r=r, R=R, lhs=lhs,
                       rhs=rhs, implied_constant=implied)


def moser_positive_fit(u: SpaceTimeFunction, p: float, f_sup: float,
                       alpha: float, eps: float = 0.0,
                       radii: Sequence[float] = (0.55, 0.65, 0.75, 0.85)) -> MoserReport:
    """Fit the gap power G2 = (R - r)^omega from the positive-exponent
    inequality across a sweep of inner radii at R = 1."""
    logs_gap, logs_k = [], []
    last = None
    for r in radii:
        rep = moser_check(u, "PosIter", p, r, 1.0, f_sup, alpha, eps)
        logs_gap.append(math.log(1.0 - r))
        logs_k.append(math.log(max(rep.implied_constant, 1e-300)))
        last = rep
    A = np.stack([np.asarray(logs_gap), np.ones(len(radii))], axis=1)
    (slope, _), *_ = np.linalg.lstsq(A, np.asarray(logs_k), rcond=None)
    last.g2_exponent = float(-slope)
    return last


# ---------------------------------------------------------------------------
# heat kernel profile
# ---------------------------------------------------------------------------

def heat_kernel_profile(spec: MeasureSpec, h: float, dt: float,
                        t_list: Sequence[float], box_radius: float) -> dict:
    """Decay profile of the evolution of a unit-mass hat: on-diagonal
    products u(t,0) t^{d/alpha} and far-field ratios u(t,x)/(t |x|^{-d-a})
    for 4 t^{1/a} <= |x| <= box/2, plus total-mass history."""
    alpha = spec.alpha
    d = spec.d
    grid = Grid(d, h, box_radius, box_radius)
    op = assemble(spec, grid)
    t_end = max(t_list)
    cfg = IvpConfig(op=op, t0=0.0, t1=t_end, dt=dt, u0=initial_hat(grid),
                    g=lambda t, pts: np.zeros(len(pts)))
    u = solve(cfg)
    center = grid.node_at(np.zeros(d))
    dists = np.linalg.norm(grid.coords, axis=1)
    on_diag, far_lo, far_hi, masses = [], [], [], []
    flagged = False
    for t in t_list:
        k = u.time_index(t)
        on_diag.append(float(u.values[k, center]) * t ** (d / alpha))
        window = (dists >= 4.0 * t ** (1.0 / alpha)) & (dists <= box_radius / 2.0)
        if not np.any(window):
            flagged = True
            far_lo.append(math.nan)
            far_hi.append(math.nan)
        else:
            ratio = u.values[k, window] / (t * dists[window] ** (-d - alpha))
            far_lo.append(float(ratio.min()))
            far_hi.append(float(ratio.max()))
        masses.append(float(u.values[k].sum()) * h ** d)
    if max(t_list) ** (1.0 / alpha) * 4.0 > box_radius / 4.0:
        flagged = True
    return {"t_list": list(t_list), "on_diag": on_diag, "far_min": far_lo,
            "far_max": far_hi, "masses": masses, "flagged": flagged}


# ---------------------------------------------------------------------------
# strong Harnack failure probe
# ---------------------------------------------------------------------------

def strong_harnack_probe(spec: MeasureSpec, widths: Sequence[float],
                         h: float = 0.25, box_radius: float = 4.0,
                         domain_radius: float = 2.0, dt: float = 0.5,
                         tol: float = 1e-7, max_steps: int = 400) -> dict:
    """Near-equilibrium sup/inf over B_{1/2} under exterior data of unit
    mass concentrated in a strip [2.5, 3.5] x [-w, w] hugging the first
    coordinate axis; shrinking w aligns the mass with a single grid line.
    """
    if spec.d != 2:
        raise InvalidInput("strong-Harnack probe is a d = 2 experiment")
    grid = Grid(2, h, box_radius, domain_radius)
    op = assemble(spec, grid)
    half_mask = grid.ball_mask(np.zeros(2), 0.5)
    ratios = []
    flags = []
    for w in widths:
        height = 1.0 / (2.0 * w)

        def g(t, pts, w=w, height=height):
            pts = np.atleast_2d(pts)
            inside = (pts[:, 0] >= 2.5) & (pts[:, 0] <= 3.5) \
                & (np.abs(pts[:, 1]) <= w)
            return np.where(inside, height, 0.0)

        # step toward the stationary state, stopping on relative change
        u_prev = np.zeros(grid.n_nodes)
        u_prev[~grid.interior_mask] = g(0.0, grid.coords[~grid.interior_mask])
        converged = False
        for step in range(max_steps):
            small = IvpConfig(op=op, t0=0.0, t1=dt, dt=dt, u0=u_prev, g=g,
                              rtol=1e-12)
            u_next = solve(small).values[-1]
            change = np.max(np.abs(u_next - u_prev)) \
                / max(np.max(np.abs(u_next)), 1e-300)
            u_prev = u_next
            if change < tol:
                converged = True
                break
        vals = u_prev[half_mask]
        ratios.append(float(vals.max() / vals.min()))
        flags.append(converged)
    return {"widths": list(widths), "ratios": ratios,
            "converged": flags, "all_converged": all(flags)}


# ---------------------------------------------------------------------------
# the Lu^- device
# ---------------------------------------------------------------------------

def lu_minus_device_check(spec: MeasureSpec, h: float, seed: int,
                          count: int = 10, box_radius: float = 8.0,
                          delta: float = None) -> dict:
    """For fields nonnegative on B_3 but arbitrary outside, the operator
    applied to the negative part is bounded on B_1 by ||u^-||_inf times
    the distant-moment constant C0 of K3."""
    grid = Grid(spec.d, h, box_radius, 1.0)
    op = assemble(spec, grid)
    delta = delta if delta is not None else spec.alpha / 2.0
    k3 = check_k3(spec, delta)
    if k3.divergent:
        raise InvalidInput("K3 moment divergent at this delta")
    c0 = k3.c0_measured
    dists = np.linalg.norm(grid.coords, axis=1)
    outside = dists > 3.0
    worst_ratio = 0.0
    for k in range(count):
        rng = stream(seed, k)
        u_minus = np.zeros(grid.n_nodes)
        u_minus[outside] = np.maximum(-rng.normal(0.0, 1.0, outside.sum()), 0.0)
        amp = float(rng.uniform(0.5, 2.0))
        width = float(rng.uniform(0.5, 2.0))

        def g_minus(t, pts, amp=amp, width=width):
            pts = np.atleast_2d(pts)
            r = np.linalg.norm(pts, axis=1)
            return amp * np.exp(-((r - 6.0) / width) ** 2)

        sup_minus = max(float(u_minus.max()),
                        float(g_minus(0.0, op.tail.pts).max())
                        if op.tail.pts.size else 0.0)
        lu = op.apply(u_minus, g_minus, 0.0)
        rows_b1 = grid.ball_mask(np.zeros(grid.d), 1.0)[grid.interior_mask]
        bound = c0 * sup_minus
        worst_ratio = max(worst_ratio,
                          float(np.max(np.abs(lu[rows_b1]))) / bound)
    return {"c0": c0, "delta": delta, "worst_ratio": worst_ratio,
            "passed": worst_ratio <= 1.0 + 1e-9}
