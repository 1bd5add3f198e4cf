"""Discrete operator: symbol consistency, symmetry, duality, row masses."""

import numpy as np
import pytest
from scipy.integrate import quad

from nllab.grid import Grid
from nllab.measures import MeasureSpec, symbol_normalization
from nllab.operator import assemble


def _zero_g(t, pts):
    return np.zeros(len(pts))


def test_constant_in_kernel():
    spec = MeasureSpec.stable(1, 1.3)
    grid = Grid(1, 1 / 16, 4.0, 1.0)
    op = assemble(spec, grid)
    u = np.full(grid.n_nodes, 2.5)
    Lu = op.apply(u, lambda t, p: np.full(len(p), 2.5), 0.0)
    assert np.max(np.abs(Lu)) < 1e-12


def test_symbol_consistency_cos():
    # normalized kernel applied to cos approximates -cos (symbol |1|^alpha)
    alpha = 1.5
    spec = MeasureSpec.stable(1, alpha,
                              normalization=symbol_normalization(1, alpha))
    grid = Grid(1, 1 / 64, 16.0, 8.0)
    op = assemble(spec, grid)
    u = np.cos(grid.coords[:, 0])
    Lu = op.apply(u, lambda t, p: np.cos(p[:, 0]), 0.0)
    xi = grid.coords[grid.interior_mask, 0]
    inner = np.abs(xi) <= 4.0
    err = np.max(np.abs(Lu[inner] + np.cos(xi[inner])))
    assert err < 0.05


def test_odd_function_vanishes_at_origin():
    # bounded odd data: symmetric weights cancel pairwise at the origin
    spec = MeasureSpec.stable(1, 1.1)
    grid = Grid(1, 1 / 8, 4.0, 2.0)
    op = assemble(spec, grid)
    u = np.sin(grid.coords[:, 0])
    Lu = op.apply(u, lambda t, p: np.sin(p[:, 0]), 0.0)
    center_row = np.flatnonzero(grid.interior_indices == grid.node_at([0.0]))[0]
    assert abs(Lu[center_row]) < 1e-9


def test_bump_negative_at_peak():
    spec = MeasureSpec.stable(2, 1.4)
    grid = Grid(2, 1 / 4, 4.0, 1.0)
    op = assemble(spec, grid)
    r2 = np.sum(grid.coords ** 2, axis=1)
    u = np.exp(-r2 / 0.125)
    Lu = op.apply(u, _zero_g, 0.0)
    center_row = np.flatnonzero(grid.interior_indices == grid.node_at([0, 0]))[0]
    assert Lu[center_row] < 0.0


def test_axes_weights_only_on_lines():
    spec = MeasureSpec.axes(2, 1.0)
    grid = Grid(2, 1 / 4, 4.0, 2.0)
    op = assemble(spec, grid)
    dx = grid.coords[op.pair_i] - grid.coords[op.pair_j]
    same_line = (np.abs(dx[:, 0]) < 1e-12) | (np.abs(dx[:, 1]) < 1e-12)
    assert same_line.all()


def test_weight_matrix_symmetric():
    spec = MeasureSpec.stable(2, 1.5)
    grid = Grid(2, 1 / 4, 2.0, 1.0)
    op = assemble(spec, grid)
    W = op.weight_matrix(0.0)
    asym = (W - W.T)
    assert abs(asym).max() == 0.0
    assert (W.data >= 0).all()


def test_row_masses_reproduce_k1_axes():
    # rho^a (rho^-2 sum |dx|^2 w + sum_far w + tail) vs 2d(1/(2-a) + 1/a) = 8
    spec = MeasureSpec.axes(2, 1.0)
    grid = Grid(2, 1 / 8, 4.0, 2.0)
    op = assemble(spec, grid)
    i0 = grid.node_at([0.0, 0.0])
    rho = 1.0
    on_row = (op.pair_i == i0) | (op.pair_j == i0)
    other = np.where(op.pair_i[on_row] == i0, op.pair_j[on_row],
                     op.pair_i[on_row])
    w = op.pair_w[on_row]
    dist = np.linalg.norm(grid.coords[other] - grid.coords[i0], axis=1)
    near = dist <= rho
    val = rho ** spec.alpha * (
        rho ** (-2) * np.sum(dist[near] ** 2 * w[near])
        + np.sum(w[~near]) + op.tail_mass[i0])
    assert val == pytest.approx(8.0, rel=0.05)


def test_duality_energy_vs_apply():
    # E(u, phi) = -<Lu, phi> h^d for phi supported inside the domain
    spec = MeasureSpec.stable(1, 1.2)
    grid = Grid(1, 1 / 8, 1.0, 0.5)     # 17-node grid
    op = assemble(spec, grid)
    rng = np.random.default_rng(3)
    u = rng.normal(size=grid.n_nodes)
    g = lambda t, p: np.sin(p[:, 0])
    phi = np.zeros(grid.n_nodes)
    phi[grid.interior_mask] = rng.uniform(0.5, 1.0,
                                          int(grid.interior_mask.sum()))
    Lu = op.apply(u, g, 0.0)
    lhs = op.bilinear_form(u, phi, 0.0, g_u=g, g_v=None)
    rhs = -np.sum(Lu * phi[grid.interior_mask]) * grid.h
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_energy_positive_and_shift_invariant():
    spec = MeasureSpec.axes(2, 1.3)
    grid = Grid(2, 1 / 4, 2.0, 1.0)
    op = assemble(spec, grid)
    rng = np.random.default_rng(11)
    for _ in range(20):
        u = rng.normal(size=grid.n_nodes)
        e = op.bilinear_form(u, u, 0.0)
        assert e >= 0.0
        cv = rng.normal()
        c = np.full(grid.n_nodes, cv)
        g_c = lambda t, p: np.full(len(p), cv)
        assert op.bilinear_form(c, u, 0.0, g_u=g_c) == pytest.approx(
            0.0, abs=1e-10)


def test_consistency_under_refinement():
    # deviation from a dense-quadrature oracle shrinks by >= 1.5x at h/2
    alpha = 1.0
    spec = MeasureSpec.stable(1, alpha)
    w2 = 0.35 ** 2

    def u_fn(x):
        return np.exp(-x ** 2 / (2 * w2))

    def oracle(x):
        def integrand(z):
            return 0.5 * (u_fn(x + z) + u_fn(x - z) - 2 * u_fn(x)) \
                * z ** (-1 - alpha)
        val, _ = quad(integrand, 0.0, np.inf, limit=400)
        return 2.0 * val

    probes = np.array([-0.4, -0.2, 0.0, 0.2, 0.4])
    targets = np.array([oracle(x) for x in probes])
    devs = []
    for h in (1 / 16, 1 / 32):
        grid = Grid(1, h, 8.0, 1.0)
        op = assemble(spec, grid)
        u = u_fn(grid.coords[:, 0])
        Lu = op.apply(u, lambda t, p: u_fn(p[:, 0]), 0.0)
        xi = grid.coords[grid.interior_mask, 0]
        idx = [np.argmin(np.abs(xi - p)) for p in probes]
        devs.append(np.max(np.abs(Lu[idx] - targets)))
    assert devs[0] / devs[1] >= 1.5


def test_coefficient_hook():
    # a(t,x,y) = 1 + small symmetric perturbation scales weights accordingly
    spec = MeasureSpec.stable(1, 1.0)
    grid = Grid(1, 1 / 8, 2.0, 1.0)

    def a(t, X, Y):
        X = np.atleast_2d(X)
        Y = np.atleast_2d(Y)
        return 1.5 + 0.25 * np.tanh(X[:, 0] + Y[:, 0])

    from nllab.measures import EquationCoefficients
    op1 = assemble(spec, grid, EquationCoefficients())
    opa = assemble(spec, grid, EquationCoefficients(a=a))
    u = np.sin(grid.coords[:, 0])
    L1 = op1.apply(u, _zero_g, 0.0)
    La = opa.apply(u, _zero_g, 0.0)
    assert not np.allclose(L1, La)
    Wa = opa.weight_matrix(0.0)
    assert abs(Wa - Wa.T).max() < 1e-14
