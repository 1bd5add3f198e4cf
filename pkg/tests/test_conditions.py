"""Kernel conditions: closed-form K1, K2 comparability, K3 tails, bridging."""

import math

import numpy as np
import pytest

from nllab.conditions import (axes_energy_bridge, ball_lattice, check_k1,
                              check_k2, check_k2_sample, check_k3,
                              default_test_suite, discrete_energy)
from nllab.errors import InvalidInput
from nllab.measures import MeasureSpec, robust_normalization
from nllab.randomness import stream


def test_k1_axes_closed_form_and_rho_independence():
    report = check_k1(MeasureSpec.axes(2, 1.0), [0.25, 0.5, 1.0, 2.0])
    for v in report.measured_values:
        assert v == pytest.approx(8.0, rel=1e-12)
    assert report.lambda_measured == pytest.approx(8.0, rel=1e-12)


def test_k1_normalized_stable_rho_independent():
    spec = MeasureSpec.stable(1, 1.3, normalization=robust_normalization(1.3))
    report = check_k1(spec, [0.25, 1.0])
    v = report.measured_values
    assert v[0] == pytest.approx(v[1], rel=1e-10)
    # closed form: C(1) (1 + (2-a)/a)
    assert v[0] == pytest.approx(2.0 * (1.0 + 0.7 / 1.3), rel=1e-12)


def test_k1_continuous_in_alpha_no_blowup():
    # normalized kernel: K1 value is 4/alpha, bounded as alpha -> 2
    alphas = (0.5, 1.0, 1.5, 1.9)
    vals = []
    for alpha in alphas:
        spec = MeasureSpec.stable(1, alpha,
                                  normalization=robust_normalization(alpha))
        vals.append(check_k1(spec, [1.0]).measured_values[0])
    for alpha, v in zip(alphas, vals):
        assert v == pytest.approx(4.0 / alpha, rel=1e-12)
    assert vals[-1] < vals[0]
    assert max(vals) < 10.0


def test_k2_identity_case_exact():
    for d in (1, 2):
        alpha = 1.5
        spec = MeasureSpec.stable(d, alpha,
                                  normalization=robust_normalization(alpha))
        report = check_k2(spec, (np.zeros(d), 0.5), [1 / 8])
        for s in report.extras["samples"]:
            assert s.ratio == pytest.approx(1.0, abs=1e-12)
        assert report.lambda_measured == pytest.approx(1.0, abs=1e-9)


def test_k2_axes_finite_and_stable_under_refinement():
    report = check_k2(MeasureSpec.axes(2, 1.0), (np.zeros(2), 0.5),
                      [1 / 16, 1 / 32])
    lam_coarse = max(report.extras["uppers"][0],
                     1.0 / report.extras["lowers"][0])
    lam_fine = report.lambda_measured
    assert np.isfinite(lam_fine) and lam_fine >= 1.0
    assert abs(lam_fine - lam_coarse) / lam_fine < 0.10


def test_k2_rho_invariance():
    axes = MeasureSpec.axes(2, 1.0)
    lam_half = check_k2(axes, (np.zeros(2), 0.5), [1 / 16]).lambda_measured
    lam_one = check_k2(axes, (np.zeros(2), 1.0), [1 / 16]).lambda_measured
    assert lam_one == pytest.approx(lam_half, rel=0.10)


def test_k2_sandwich_reverification():
    # the reported lambda makes both K2 inequalities hold over the suite
    spec = MeasureSpec.axes(2, 1.3)
    ball = (np.zeros(2), 0.5)
    report = check_k2(spec, ball, [1 / 16])
    lam = report.lambda_measured
    for s in report.extras["samples"]:
        assert s.e_mu <= lam * s.e_alpha_normalized * (1 + 1e-12)
        assert s.e_alpha_normalized <= lam * s.e_mu * (1 + 1e-12)


def test_k2_rejects_constant_suite():
    suite = [("const", lambda pts: np.ones(len(np.atleast_2d(pts))))]
    with pytest.raises(InvalidInput):
        check_k2(MeasureSpec.stable(1, 1.0), (np.zeros(1), 0.5), [1 / 8],
                 test_suite=suite)


def test_k2_sample_runs_fixed_balls():
    reports = check_k2_sample(MeasureSpec.stable(1, 1.0,
                                                 normalization=1.0),
                              [1 / 8], rhos=(0.5, 1.0))
    assert len(reports) == 3
    for rep in reports.values():
        assert np.isfinite(rep.lambda_measured)


def test_discrete_energy_basics():
    spec = MeasureSpec.axes(2, 1.0)
    ball = (np.zeros(2), 0.5)
    nodes = ball_lattice(2, np.zeros(2), 0.5, 1 / 8)
    const = np.ones(len(nodes))
    assert discrete_energy(spec, ball, const, 1 / 8) == 0.0
    rng = stream(3, 1)
    v = rng.normal(size=len(nodes))
    e = discrete_energy(spec, ball, v, 1 / 8)
    assert e > 0
    # invariance under sign flip and constant shift
    assert discrete_energy(spec, ball, -v, 1 / 8) == pytest.approx(e, rel=1e-14)
    assert discrete_energy(spec, ball, v + 5.0, 1 / 8) == pytest.approx(
        e, rel=1e-12)


def test_mediator_inequality_corrected_form():
    # 2((v(x)-v(z))^2 + (v(z)-v(y))^2) >= (v(x)-v(y))^2
    rng = stream(11, 0)
    a, b, c = rng.normal(size=(3, 1000))
    lhs = 2.0 * ((a - c) ** 2 + (c - b) ** 2)
    assert np.all(lhs >= (a - b) ** 2 - 1e-14)


def test_axes_bridge_inequalities():
    # 4N E_axes >= F and F >= c N E_alpha over the default suite
    alpha = 1.0
    ball = (np.zeros(2), 0.5)
    dh = 1 / 16
    suite = default_test_suite(2, ball[0], ball[1])
    for label, fn in suite:
        q = axes_energy_bridge(alpha, ball, fn, dh)
        n_param = q["n_param"]
        assert 4.0 * n_param * q["e_axes"] >= q["f_intermediate"] * (1 - 1e-12)
        assert q["f_intermediate"] >= 0.1 * n_param * q["e_alpha"]


def test_k3_closed_form_and_divergence():
    report = check_k3(MeasureSpec.stable(1, 1.0), 0.5,
                      x_samples=np.zeros((1, 1)))
    assert report.c0_measured == pytest.approx(4.0 / math.sqrt(3.0), rel=1e-12)
    div = check_k3(MeasureSpec.stable(1, 0.4), 0.5)
    assert div.divergent

    axes = check_k3(MeasureSpec.axes(2, 1.0), 0.5)
    assert np.isfinite(axes.c0_measured) and axes.c0_measured > 0


def test_k1_cusp_uses_effective_order():
    cusp = MeasureSpec.cusp(1.5, 0.75)     # effective order 7/6
    report = check_k1(cusp, [0.125, 0.25, 0.5, 1.0, 2.0])
    assert report.extras["effective_order"] == pytest.approx(7.0 / 6.0)
    vals = np.asarray(report.measured_values)
    assert np.all(np.isfinite(vals)) and np.all(vals > 0)
    # bounded across scales: no blow-up in either direction
    assert vals.max() / vals.min() < 2.0


def test_k2_cusp_finite_with_effective_order():
    cusp = MeasureSpec.cusp(1.5, 0.75)
    report = check_k2(cusp, (np.zeros(2), 0.5), [1 / 8, 1 / 16])
    assert report.extras["effective_order"] == pytest.approx(7.0 / 6.0)
    assert np.isfinite(report.lambda_measured)
    assert report.lambda_measured >= 1.0
