"""Regularity-lab operations: quotients, fits, scaling, Moser quantities."""

import math

import numpy as np
import pytest

from nllab.grid import Grid
from nllab.lab import (ScalingParams, harnack_quotient, holder_fit,
                       log_level_sets, lu_minus_device_check, moser_check,
                       moser_positive_fit, poincare_experiment,
                       poincare_nodes, scaling_check, strong_harnack_probe,
                       weighted_poincare_ratio)
from nllab.errors import InvalidInput
from nllab.measures import MeasureSpec
from nllab.solver import SpaceTimeFunction


def _constant_stf(c, d=1, h=1 / 16, box=4.0, domain=2.0, dt=1 / 16,
                  t0=-1.0, t1=1.0):
    grid = Grid(d, h, box, domain)
    times = np.arange(t0, t1 + dt / 2, dt)
    values = np.full((len(times), grid.n_nodes), float(c))
    return SpaceTimeFunction(grid, times, values,
                             lambda t, pts: np.full(len(pts), float(c)))


def _positive_stf(seed=0, d=1, h=1 / 16, dt=1 / 8):
    grid = Grid(d, h, 4.0, 2.0)
    times = np.arange(-1.0, 1.0 + dt / 2, dt)
    rng = np.random.default_rng(seed)
    base = 0.5 + rng.uniform(0.0, 1.0, grid.n_nodes)
    wiggle = 1.0 + 0.3 * np.sin(np.arange(len(times)))[:, None]
    values = wiggle * base[None, :]
    return SpaceTimeFunction(grid, times, values, None)


# ---------------------------------------------------------------------------
# Harnack quotient
# ---------------------------------------------------------------------------

def test_harnack_quotient_constant_geometry():
    # d = 1, alpha = 1: q = (1/2)^alpha |B_1/2| = 0.5 exactly
    u = _constant_stf(3.0)
    assert harnack_quotient(u, 0.0, 1.0) == pytest.approx(0.5, abs=1e-12)


def test_harnack_quotient_scale_invariant():
    u = _positive_stf(3)
    q1 = harnack_quotient(u, 0.0, 1.5)
    q2 = harnack_quotient(u.scaled(7.25), 0.0, 1.5)
    assert q2 == pytest.approx(q1, rel=1e-12)


def test_harnack_quotient_degenerate():
    u = _constant_stf(0.0)
    assert math.isnan(harnack_quotient(u, 0.0, 1.0))


# ---------------------------------------------------------------------------
# Hoelder fit
# ---------------------------------------------------------------------------

def test_holder_fit_constant_reports_zero_seminorm():
    u = _constant_stf(2.0)
    rep = holder_fit(u, 1.0, (-0.5, 0.5), 1.0)
    assert rep.seminorm_zero


def test_holder_fit_linear_function_slope_one():
    grid = Grid(1, 1 / 32, 4.0, 2.0)
    dt = 1 / 32
    times = np.arange(-1.0, 1.0 + dt / 2, dt)
    values = np.tile(grid.coords[:, 0], (len(times), 1))
    u = SpaceTimeFunction(grid, times, values,
                          lambda t, pts: np.atleast_2d(pts)[:, 0])
    rep = holder_fit(u, 1.0, (-0.5, 0.5), 1.0, seed=1)
    assert rep.beta == pytest.approx(1.0, abs=0.1)


def test_holder_fit_slope_invariant_under_affine():
    u = _positive_stf(9)
    rep1 = holder_fit(u, 1.5, (-0.5, 0.5), 1.0, seed=2)
    shifted = SpaceTimeFunction(u.grid, u.times, 3.0 * u.values + 11.0, None)
    rep2 = holder_fit(shifted, 1.5, (-0.5, 0.5), 1.0, seed=2)
    assert rep2.raw_slope == pytest.approx(rep1.raw_slope, rel=1e-12)


# ---------------------------------------------------------------------------
# scaling property
# ---------------------------------------------------------------------------

def _smooth_u0(pts):
    return np.exp(-np.atleast_2d(pts)[:, 0] ** 2 / 0.02)


def _zero_g(t, pts):
    return np.zeros(len(np.atleast_2d(pts)))


def test_scaling_identity_exact():
    spec = MeasureSpec.stable(1, 1.0)
    res = scaling_check(spec, ScalingParams(1.0, np.zeros(1), 0.0, 1.0),
                        1 / 16, 1 / 16, _smooth_u0, _zero_g)
    assert res["discrepancy"] == 0.0
    assert res["identity"]


def test_scaling_half_matrices_and_scheme_error():
    spec = MeasureSpec.stable(1, 1.0)
    res = scaling_check(spec, ScalingParams(0.5, np.zeros(1), 0.0, 1.0),
                        1 / 16, 1 / 16, _smooth_u0, _zero_g)
    assert res["matrix_rel_diff"] < 1e-10
    assert 0.0 < res["discrepancy"] <= res["eps_scheme"]


def test_scaling_rejects_incommensurate():
    spec = MeasureSpec.stable(1, 1.0)
    with pytest.raises(InvalidInput):
        scaling_check(spec, ScalingParams(0.3, np.zeros(1), 0.0, 1.0),
                      1 / 16, 1 / 16, _smooth_u0, _zero_g)


def test_scaling_rejects_cusp():
    spec = MeasureSpec.cusp(1.5, 0.75)
    with pytest.raises(InvalidInput):
        scaling_check(spec, ScalingParams(0.5, np.zeros(2), 0.0, 7 / 6),
                      1 / 8, 1 / 8, lambda p: np.zeros(len(np.atleast_2d(p))),
                      _zero_g)


# ---------------------------------------------------------------------------
# weighted Poincare
# ---------------------------------------------------------------------------

def test_poincare_constant_degenerate_and_shift_invariance():
    spec = MeasureSpec.stable(1, 1.5, normalization=0.5)
    nodes = poincare_nodes(1, 1 / 16)
    assert weighted_poincare_ratio(np.ones(len(nodes)), spec, 1 / 16) == 0.0
    rng = np.random.default_rng(8)
    v = rng.normal(size=len(nodes))
    r1 = weighted_poincare_ratio(v, spec, 1 / 16)
    r2 = weighted_poincare_ratio(v + 4.2, spec, 1 / 16)
    assert r2 == pytest.approx(r1, rel=1e-10)


def test_poincare_robust_across_alpha():
    rep = poincare_experiment(1, (1.0, 1.5, 1.9), 1 / 16, seed=5, count=30)
    assert max(rep.max_ratios) / min(rep.max_ratios) - 1.0 < 0.25


# ---------------------------------------------------------------------------
# log level sets
# ---------------------------------------------------------------------------

def test_log_level_sets_constant_empty():
    u = _constant_stf(2.5)
    out = log_level_sets(u, 0.0, 1.0)
    assert out["sup_neg"] == 0.0
    assert out["sup_pos"] == 0.0


def test_log_level_sets_scaling_shifts_a_only():
    u = _positive_stf(4)
    out1 = log_level_sets(u, 0.0, 1.5)
    out2 = log_level_sets(u.scaled(2.0), 0.0, 1.5)
    assert out2["a"] - out1["a"] == pytest.approx(math.log(2.0), abs=1e-12)
    assert out2["sup_neg"] == pytest.approx(out1["sup_neg"], rel=1e-12)
    assert out2["sup_pos"] == pytest.approx(out1["sup_pos"], rel=1e-12)


def test_log_level_sets_rejects_nonpositive():
    u = _constant_stf(0.0)
    with pytest.raises(InvalidInput):
        log_level_sets(u, 0.0, 1.0, eps=0.0)


# ---------------------------------------------------------------------------
# Moser checks
# ---------------------------------------------------------------------------

def test_moser_negstep_constant_homogeneity():
    alpha = 1.5
    r1 = moser_check(_constant_stf(1.0), "NegStep", 0.5, 0.5, 1.0, 0.0, alpha)
    r2 = moser_check(_constant_stf(17.0), "NegStep", 0.5, 0.5, 1.0, 0.0, alpha)
    assert r2.implied_constant == pytest.approx(r1.implied_constant, rel=1e-12)
    assert np.isfinite(r1.implied_constant)


def test_moser_negiter_g1_case_split():
    alpha = 1.5
    rep = moser_check(_positive_stf(1), "NegIter", 0.5, 0.5, 1.0, 0.0, alpha)
    assert rep.g1 == pytest.approx(0.5 ** (1 + alpha), rel=1e-12)
    alpha_small = 0.8
    rep2 = moser_check(_positive_stf(1), "NegIter", 0.5, 0.5, 1.0, 0.0,
                       alpha_small)
    expected = (1.0 - 0.5 ** alpha_small) ** ((1 + alpha_small) / alpha_small)
    assert rep2.g1 == pytest.approx(expected, rel=1e-12)


def test_moser_mode_validation():
    u = _positive_stf(2)
    with pytest.raises(InvalidInput):
        moser_check(u, "PosIter", 0.9, 0.5, 1.0, 0.0, 1.0)   # p >= 1/kappa
    with pytest.raises(InvalidInput):
        moser_check(u, "NegIter", 1.5, 0.5, 1.0, 0.0, 1.0)
    with pytest.raises(InvalidInput):
        moser_check(u, "NegStep", 0.5, 0.4, 1.0, 0.0, 1.0)   # r < 1/2


def test_moser_all_modes_scale_invariant():
    u = _positive_stf(6)
    lam = 2.5
    for mode, p in (("NegStep", 0.5), ("NegIter", 1.0), ("PosIter", 0.3)):
        r1 = moser_check(u, mode, p, 0.5, 1.0, 0.0, 1.0)
        r2 = moser_check(u.scaled(lam), mode, p, 0.5, 1.0, 0.0, 1.0)
        assert r2.implied_constant == pytest.approx(r1.implied_constant,
                                                    rel=1e-12), mode


def test_moser_positive_fit_reports_exponent():
    rep = moser_positive_fit(_positive_stf(12), 0.3, 0.0, 1.0)
    assert rep.g2_exponent is not None
    assert np.isfinite(rep.g2_exponent)


# ---------------------------------------------------------------------------
# strong Harnack probe and the Lu^- device
# ---------------------------------------------------------------------------

def test_strong_harnack_axes_increases_stable_flat():
    widths = [1.0, 0.35, 0.1]
    axes = strong_harnack_probe(MeasureSpec.axes(2, 1.0), widths,
                                dt=1.0, tol=1e-7)
    assert axes["all_converged"]
    r = axes["ratios"]
    assert r[0] < r[1] < r[2]
    stab = strong_harnack_probe(MeasureSpec.stable(2, 1.0), widths,
                                dt=1.0, tol=1e-7)
    assert max(stab["ratios"]) / min(stab["ratios"]) < 2.0


def test_lu_minus_device_bound():
    res = lu_minus_device_check(MeasureSpec.stable(1, 1.2), h=1 / 16, seed=4,
                                count=10)
    assert res["passed"]


def test_harnack_box_sensitivity_small():
    # doubling the box moves the max quotient by < 2 percent
    from nllab.lab import harnack_experiment
    spec = MeasureSpec.stable(1, 1.5)
    q8 = harnack_experiment(spec, h=1 / 16, dt=1 / 16, seed=5, count=8,
                            box_radius=8.0).max_quotient
    q16 = harnack_experiment(spec, h=1 / 16, dt=1 / 16, seed=5, count=8,
                             box_radius=16.0).max_quotient
    assert abs(q16 - q8) / q16 < 0.02


def test_harnack_d2_stable_smoke():
    from nllab.lab import harnack_experiment
    rep = harnack_experiment(MeasureSpec.stable(2, 1.0), h=1 / 4, dt=1 / 16,
                             seed=3, count=2, box_radius=8.0,
                             domain_radius=2.0)
    assert len(rep.quotients) == 2
    assert all(np.isfinite(q) and q > 0 for q in rep.quotients)


def test_heat_kernel_far_field_bounded():
    from nllab.lab import heat_kernel_profile
    from nllab.measures import symbol_normalization
    alpha = 1.5
    spec = MeasureSpec.stable(1, alpha,
                              normalization=symbol_normalization(1, alpha))
    res = heat_kernel_profile(spec, h=1 / 16, dt=1 / 64,
                              t_list=[0.25, 0.5], box_radius=16.0)
    assert not res["flagged"]
    for lo, hi in zip(res["far_min"], res["far_max"]):
        assert lo > 0.0
        assert hi / lo < 10.0


def test_scaling_with_offset_and_time_shift():
    spec = MeasureSpec.stable(1, 1.0)
    params = ScalingParams(0.5, np.array([0.25]), 0.5, 1.0)

    def u0(pts):
        return np.exp(-(np.atleast_2d(pts)[:, 0] - 0.25) ** 2 / 0.02)

    res = scaling_check(spec, params, 1 / 16, 1 / 16, u0, _zero_g)
    assert np.isfinite(res["discrepancy"])
    assert res["discrepancy"] <= res["eps_scheme"]
