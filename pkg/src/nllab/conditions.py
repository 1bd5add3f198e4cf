"""Numerical verification of the kernel conditions K1, K2, K3.

K1 bounds second moments inside balls plus tail masses by Lambda rho^-a;
K2 is the two-sided comparability of the measure's Dirichlet energy with
the (2 - alpha)-normalized fractional energy on balls; K3 is a finite
delta-moment far from the diagonal.

Discrete ball energies follow the Riemann-sum construction used for the
axes measure: the outer integral is a node sum weighted by dh^d, the
inner one a sum of cell masses, which are midpoint values for the
absolutely continuous kinds and exact 1-D interval masses along grid
lines for the axes measure.  With midpoint masses the normalized stable
kernel reproduces the reference energy summand-for-summand, making the
K2 identity case exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad

from .errors import InvalidInput, InvalidSpec
from .measures import (Ball, Complement, MeasureSpec,
                       _cusp_ray_cutoff, _ray_exit_from_ball, effective_order,
                       measure_of_set, second_moment_in_ball)
from .randomness import stream

__all__ = ["ConditionReport", "EnergySample", "discrete_energy",
           "canonical_energy", "default_test_suite", "check_k1", "check_k2",
           "check_k2_sample", "check_k3", "axes_energy_bridge"]


@dataclass
class ConditionReport:
    condition: str
    scales: List[float]
    measured_values: List[float]
    lambda_measured: Optional[float] = None
    c0_measured: Optional[float] = None
    delta: Optional[float] = None
    passed: Optional[bool] = None
    divergent: bool = False
    extras: dict = field(default_factory=dict)


@dataclass
class EnergySample:
    center: np.ndarray
    rho: float
    dh: float
    label: str
    e_mu: float
    e_alpha_normalized: float
    v: Optional[np.ndarray] = None    # test function sampled on the lattice

    @property
    def ratio(self) -> float:
        return self.e_mu / self.e_alpha_normalized


# ---------------------------------------------------------------------------
# ball node/pair machinery
# ---------------------------------------------------------------------------

def ball_lattice(d: int, center, rho: float, dh: float) -> np.ndarray:
    """Lattice nodes (multiples of dh) strictly inside B_rho(center)."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    lo = np.floor((center - rho) / dh).astype(int)
    hi = np.ceil((center + rho) / dh).astype(int)
    axes = [np.arange(lo[k], hi[k] + 1) for k in range(d)]
    if d == 1:
        pts = axes[0][:, None] * dh
    else:
        I, J = np.meshgrid(axes[0], axes[1], indexing="ij")
        pts = np.stack([I.ravel(), J.ravel()], axis=1) * dh
    keep = np.linalg.norm(pts - center, axis=1) < rho - 1e-12
    return pts[keep]


class _BallPairs:
    """Unordered node pairs of a ball lattice with cached geometry."""

    def __init__(self, d, center, rho, dh):
        self.d, self.rho, self.dh = d, rho, dh
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.nodes = ball_lattice(d, center, rho, dh)
        n = len(self.nodes)
        if n < 2:
            raise InvalidInput("ball contains fewer than two grid nodes")
        iu, ju = np.triu_indices(n, k=1)
        self.i, self.j = iu.astype(np.int32), ju.astype(np.int32)
        diff = self.nodes[self.j] - self.nodes[self.i]
        self.dist = np.linalg.norm(diff, axis=1)
        if d == 2:
            self.same_line = (np.abs(diff[:, 0]) < 1e-12) \
                | (np.abs(diff[:, 1]) < 1e-12)
        else:
            self.same_line = np.ones(len(self.i), dtype=bool)
        self.diff = diff

    def sum_pairs(self, v: np.ndarray, w: np.ndarray,
                  mask: Optional[np.ndarray] = None) -> float:
        dv = v[self.j] - v[self.i]
        contrib = dv * dv * w
        if mask is not None:
            contrib = contrib[mask]
        return 2.0 * float(contrib.sum())    # ordered double sum


def _pair_cell_masses(spec: MeasureSpec, pairs: _BallPairs) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Inner-sum cell masses per unordered pair, and the pair mask.

    Midpoint masses density * dh^d for the a.c. kinds; exact 1-D interval
    masses for axes (restricted to same-line pairs)."""
    dh, d = pairs.dh, pairs.d
    a = spec.alpha
    if spec.kind == "axes":
        r = pairs.dist
        w = spec.normalization / a * ((r - dh / 2.0) ** (-a)
                                      - (r + dh / 2.0) ** (-a))
        return w, pairs.same_line
    dens = spec.normalization * pairs.dist ** (-d - a)
    if spec.kind == "cusp":
        z1 = np.abs(pairs.diff[:, 0])
        z2 = np.abs(pairs.diff[:, 1])
        inside = (z2 > z1 ** spec.s) | (z1 > z2 ** spec.s)
        dens = np.where(inside, dens, 0.0)
    elif spec.kind == "tabulated":
        from .operator import _tab_density
        dens = spec.normalization * _tab_density(spec, pairs.dist)
    return dens * dh ** d, None


def discrete_energy(spec: MeasureSpec, ball, v, dh: float,
                    pairs: Optional[_BallPairs] = None) -> float:
    """Double Riemann sum of the mu-energy of v over a ball.

    ``ball`` is (center, rho); ``v`` is an array over the ball lattice
    (see ``ball_lattice``) or a callable sampled on it.
    """
    center, rho = ball
    if pairs is None:
        pairs = _BallPairs(spec.d, center, rho, dh)
    if callable(v):
        v = np.asarray(v(pairs.nodes), dtype=float)
    v = np.asarray(v, dtype=float)
    if v.shape != (len(pairs.nodes),):
        raise InvalidInput("v must be sampled on the ball lattice")
    if not np.all(np.isfinite(v)):
        raise InvalidInput("v contains non-finite entries")
    w, mask = _pair_cell_masses(spec, pairs)
    return pairs.sum_pairs(v, w, mask) * dh ** spec.d


def canonical_energy(d: int, alpha: float, ball, v, dh: float,
                     pairs: Optional[_BallPairs] = None,
                     normalized: bool = True) -> float:
    """(2 - alpha) * double sum with weight |x_j - y_k|^{-d-alpha} dh^{2d}."""
    center, rho = ball
    if pairs is None:
        pairs = _BallPairs(d, center, rho, dh)
    if callable(v):
        v = np.asarray(v(pairs.nodes), dtype=float)
    w = pairs.dist ** (-d - alpha) * dh ** d
    val = pairs.sum_pairs(np.asarray(v, float), w) * dh ** d
    return (2.0 - alpha) * val if normalized else val


def axes_energy_bridge(alpha: float, ball, v, dh: float,
                       pairs: Optional[_BallPairs] = None) -> dict:
    """Midpoint-convention sums linking the axes energy to the canonical one
    through the intermediate all-pairs sum with 1-D weights:

        E_axes = sum_{same line} v_jk^2 r^{-1-a} dh^{d+1}
        F      = sum_{all pairs} v_jk^2 r^{-1-a} dh^{d+1}
        E_a    = sum_{all pairs} v_jk^2 r^{-d-a} dh^{2d}

    Discretely 4 N E_axes >= F with N = 2 rho / dh, and F tracks N E_a.
    """
    center, rho = ball
    if pairs is None:
        pairs = _BallPairs(2, center, rho, dh)
    if callable(v):
        v = np.asarray(v(pairs.nodes), dtype=float)
    v = np.asarray(v, dtype=float)
    w_line = pairs.dist ** (-1.0 - alpha) * dh
    e_axes = pairs.sum_pairs(v, w_line, pairs.same_line) * dh ** 2
    f_mid = pairs.sum_pairs(v, w_line) * dh ** 2
    e_alpha = pairs.sum_pairs(v, pairs.dist ** (-2.0 - alpha) * dh ** 2) * dh ** 2
    return {"e_axes": e_axes, "f_intermediate": f_mid, "e_alpha": e_alpha,
            "n_param": 2.0 * rho / dh}


# ---------------------------------------------------------------------------
# default K2 test suite
# ---------------------------------------------------------------------------

def default_test_suite(d: int, center, rho: float,
                       seed: int = 7) -> List[Tuple[str, Callable]]:
    """Trig tensor modes up to frequency 4, three seeded piecewise-linear
    functions and the radial distance function."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    suite: List[Tuple[str, Callable]] = []

    def trig(freqs, use_sin):
        def f(pts, freqs=freqs, use_sin=use_sin):
            pts = np.atleast_2d(pts)
            out = np.ones(len(pts))
            for k, freq in enumerate(freqs):
                arg = freq * math.pi * (pts[:, k] - center[k]) / rho
                out = out * (np.sin(arg) if use_sin[k] else np.cos(arg))
            return out
        return f

    if d == 1:
        for freq in (1, 2, 3, 4):
            suite.append((f"sin{freq}", trig((freq,), (True,))))
            suite.append((f"cos{freq}", trig((freq,), (False,))))
    else:
        for fx, fy in ((1, 1), (2, 1), (1, 2), (2, 2), (3, 2), (4, 1)):
            suite.append((f"sin{fx}sin{fy}", trig((fx, fy), (True, True))))
        suite.append(("cos1cos1", trig((1, 1), (False, False))))
        suite.append(("sin3cos3", trig((3, 3), (True, False))))

    rng = stream(seed, 0)
    for m in range(3):
        planes_a = rng.uniform(-1.0, 1.0, (4, d))
        planes_b = rng.uniform(-0.5, 0.5, 4)

        def pwl(pts, A=planes_a, B=planes_b):
            pts = np.atleast_2d(pts) - center
            return np.max(pts @ A.T + B, axis=1)

        suite.append((f"pwl{m}", pwl))

    suite.append(("radial", lambda pts: np.linalg.norm(
        np.atleast_2d(pts) - center, axis=1)))
    return suite


# ---------------------------------------------------------------------------
# K1
# ---------------------------------------------------------------------------

def check_k1(spec: MeasureSpec, rho_list: Sequence[float],
             lambda_budget: Optional[float] = None) -> ConditionReport:
    """rho^a (rho^-2 * second moment + complement mass) per scale; for the
    cusp the effective order beta replaces alpha."""
    if not len(rho_list) or any(r <= 0 for r in rho_list):
        raise InvalidInput("rho_list must be nonempty and positive")
    eff = effective_order(spec)
    x0 = np.zeros(spec.d)
    values = []
    for rho in rho_list:
        m2 = second_moment_in_ball(spec, x0, rho)
        tail = measure_of_set(spec, x0, Complement(Ball(x0, rho)))
        values.append(rho ** eff * (m2 / rho ** 2 + tail))
    lam = max(values)
    passed = None if lambda_budget is None else lam <= lambda_budget
    return ConditionReport(condition="K1", scales=list(rho_list),
                           measured_values=values, lambda_measured=lam,
                           passed=passed,
                           extras={"effective_order": eff})


# ---------------------------------------------------------------------------
# K2
# ---------------------------------------------------------------------------

def check_k2(spec: MeasureSpec, ball, dh_list: Sequence[float],
             test_suite: Optional[List[Tuple[str, Callable]]] = None,
             lambda_budget: Optional[float] = None) -> ConditionReport:
    """Energy comparability on one ball across grid spacings.

    Per spacing reports upper = max E_mu/E_ref and lower = min over the
    suite (E_ref the normalized canonical energy); lambda_measured =
    max(upper, 1/lower) at the finest spacing.
    """
    center, rho = ball
    dh_list = sorted(dh_list, reverse=True)
    if test_suite is None:
        test_suite = default_test_suite(spec.d, center, rho)
    uppers, lowers = [], []
    samples = []
    eff = effective_order(spec)
    for dh in dh_list:
        pairs = _BallPairs(spec.d, center, rho, dh)
        ratios = []
        for label, fn in test_suite:
            v = np.asarray(fn(pairs.nodes), dtype=float)
            if np.ptp(v) < 1e-14:
                continue
            e_mu = discrete_energy(spec, ball, v, dh, pairs=pairs)
            e_ref = canonical_energy(spec.d, eff, ball, v, dh, pairs=pairs)
            ratios.append(e_mu / e_ref)
            samples.append(EnergySample(center=np.atleast_1d(center), rho=rho,
                                        dh=dh, label=label, e_mu=e_mu,
                                        e_alpha_normalized=e_ref, v=v))
        if not ratios:
            raise InvalidInput("test suite contains only constants")
        uppers.append(max(ratios))
        lowers.append(min(ratios))
    lam = max(uppers[-1], 1.0 / lowers[-1])
    passed = None if lambda_budget is None else lam <= lambda_budget
    return ConditionReport(condition="K2", scales=list(dh_list),
                           measured_values=uppers, lambda_measured=lam,
                           passed=passed,
                           extras={"uppers": uppers, "lowers": lowers,
                                   "samples": samples,
                                   "ball": (np.atleast_1d(center), rho),
                                   "effective_order": eff})


def check_k2_sample(spec: MeasureSpec, dh_list: Sequence[float],
                    test_suite=None, lambda_budget=None,
                    rhos=(0.5, 1.0), off_center: float = 0.25) -> dict:
    """K2 on the fixed ball sample: radii 0.5 and 1 at the origin plus one
    off-center ball (translation invariance makes this representative)."""
    balls = [(np.zeros(spec.d), rho) for rho in rhos]
    oc = np.zeros(spec.d)
    oc[0] = off_center
    balls.append((oc, rhos[0]))
    reports = {}
    for k, ball in enumerate(balls):
        reports[f"ball{k}_r{ball[1]}"] = check_k2(
            spec, ball, dh_list, test_suite=test_suite,
            lambda_budget=lambda_budget)
    return reports


# ---------------------------------------------------------------------------
# K3
# ---------------------------------------------------------------------------

def _k3_tail_integral(spec: MeasureSpec, x: np.ndarray, delta: float) -> float:
    """integral over R^d minus B_3(0) of |x-y|^delta mu(x, dy), x in B_2."""
    a = spec.alpha
    nu = spec.normalization
    R = 3.0
    if delta >= a:
        return math.inf
    if spec.d == 1:
        x0 = float(x[0])
        return nu * ((R - x0) ** (delta - a) + (R + x0) ** (delta - a)) \
            / (a - delta)
    if spec.kind == "axes":
        total = 0.0
        for axis in range(2):
            other = x[1 - axis]
            b = math.sqrt(R * R - other * other)
            total += nu * ((b - x[axis]) ** (delta - a)
                           + (b + x[axis]) ** (delta - a)) / (a - delta)
        return total
    if spec.kind in ("stable", "cusp"):
        def f(phi):
            t = _ray_exit_from_ball(-x, R, phi)
            if spec.kind == "cusp":
                t = max(t, _cusp_ray_cutoff(spec.s, phi))
            return t ** (delta - a) / (a - delta)
        val, _ = quad(f, 0.0, 2.0 * math.pi, limit=200)
        return nu * val
    raise InvalidSpec(spec.kind)


def check_k3(spec: MeasureSpec, delta: float,
             x_samples: Optional[np.ndarray] = None,
             c0_budget: Optional[float] = None) -> ConditionReport:
    """sup over x in B_2(0) of the delta-moment of mu outside B_3(0).

    Divergent (delta >= alpha) tails are reported, not raised.
    """
    if not 0.0 < delta < 1.0:
        raise InvalidInput("delta must lie in (0, 1)")
    if x_samples is None:
        pts = ball_lattice(spec.d, np.zeros(spec.d), 2.0, 0.25)
        x_samples = pts
    if delta >= spec.alpha:
        return ConditionReport(condition="K3", scales=[], measured_values=[],
                               delta=delta, divergent=True, passed=False)
    values = [_k3_tail_integral(spec, x, delta) for x in x_samples]
    c0 = max(values)
    passed = None if c0_budget is None else c0 <= c0_budget
    return ConditionReport(condition="K3",
                           scales=[float(np.linalg.norm(x)) for x in x_samples],
                           measured_values=values, c0_measured=c0,
                           delta=delta, passed=passed)
