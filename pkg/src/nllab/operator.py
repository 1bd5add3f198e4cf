"""Assembly of the discrete nonlocal operator and its energy form.

Node pair (i, j) carries the exact jump mass w_ij = mu(x_i, cell(x_j));
by translation invariance and symmetry of the built-in kinds this equals
mu(x_j, cell(x_i)), so weights are stored once per unordered pair.  The
singular diagonal cell is replaced by a second-difference correction on
the nearest neighbors carrying the cell's exact second moment, which
makes the operator reproduce locally quadratic functions.

Beyond the box the exterior data enters through a per-node tail
quadrature: geometric radial bands (clipped to the box complement by
exact angular integration) with mass-centroid representative points.
Band masses sum to the exact complement mass, so row sums satisfy

    sum_j w_ij + tail_mass_i = mu(x_i, R^d \\ cell_i)

up to quadrature tolerance (with the second-moment correction tracked
separately).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad

from .errors import InvalidInput, InvalidSpec
from .grid import Grid
from .measures import (EquationCoefficients, MeasureSpec, _cusp_ray_cutoff,
                       _gl_nodes, _tab_radial_integral, measure_of_set, Cell)

__all__ = ["DiscreteOperator", "assemble", "TailQuadrature"]

_TAIL_EPS = 1e-8
_TAIL_GROWTH = 2.0


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

def _tab_density(spec: MeasureSpec, r):
    r = np.asarray(r, dtype=float)
    lr = np.log(r)
    lrad = np.log(spec.radii)
    ldens = np.log(spec.densities)
    out = np.interp(lr, lrad, ldens)
    if spec.head_exponent is not None:
        head = ldens[0] + spec.head_exponent * (lr - lrad[0])
        out = np.where(lr < lrad[0], head, out)
    elif np.any(lr < lrad[0]):
        raise InvalidInput("tabulated density queried below the table")
    if spec.tail_exponent is not None:
        tail = ldens[-1] + spec.tail_exponent * (lr - lrad[-1])
        out = np.where(lr > lrad[-1], tail, out)
    elif np.any(lr > lrad[-1]):
        raise InvalidInput("tabulated density queried beyond the table")
    return np.exp(out)


def _density_on_radii(spec: MeasureSpec, r):
    """Radial kernel density (no indicator) at radii r."""
    if spec.kind in ("stable", "axes"):
        return spec.normalization * r ** (-spec.d - spec.alpha)
    if spec.kind == "cusp":
        return spec.normalization * r ** (-spec.d - spec.alpha)
    if spec.kind == "tabulated":
        return spec.normalization * _tab_density(spec, r)
    raise InvalidSpec(spec.kind)


# ---------------------------------------------------------------------------
# per-offset cell masses
# ---------------------------------------------------------------------------

def _line_interval_masses(spec: MeasureSpec, h: float, kmax: int) -> np.ndarray:
    """1-D masses of cells [kh - h/2, kh + h/2], k = 1..kmax, one side."""
    k = np.arange(1, kmax + 1)
    lo, hi = (k - 0.5) * h, (k + 0.5) * h
    a = spec.alpha
    if spec.kind in ("stable", "axes"):
        return spec.normalization / a * (lo ** (-a) - hi ** (-a))
    if spec.kind == "tabulated" and spec.d == 1:
        return np.array([spec.normalization * 0.5
                         * _tab_radial_integral(spec, lo[i], hi[i], 0)
                         for i in range(kmax)])
    raise InvalidSpec("line masses only for stable/axes/1-D tabulated")


def _stable2_offset_masses(spec: MeasureSpec, h: float, kmax: int) -> np.ndarray:
    """Masses of cells centered at offsets (i, j) * h, |i|,|j| <= kmax,
    for the 2-D rotational kinds (stable / tabulated)."""
    size = 2 * kmax + 1
    ks = np.arange(-kmax, kmax + 1)
    DI, DJ = np.meshgrid(ks, ks, indexing="ij")
    dist = np.hypot(DI, DJ).ravel()
    centers = np.stack([DI.ravel(), DJ.ravel()], axis=1) * h
    table = np.zeros(size * size)

    def gl_masses(idx, n):
        if idx.size == 0:
            return
        xq, wq = _gl_nodes(n)
        cx = centers[idx, 0][:, None] + 0.5 * h * xq[None, :]
        cy = centers[idx, 1][:, None] + 0.5 * h * xq[None, :]
        R2 = cx[:, :, None] ** 2 + cy[:, None, :] ** 2
        vals = _density_on_radii(spec, np.sqrt(R2))
        W2 = np.outer(wq, wq)[None, :, :]
        table[idx] = 0.25 * h * h * np.sum(vals * W2, axis=(1, 2))

    gl_masses(np.flatnonzero(dist >= 6.0), 6)
    gl_masses(np.flatnonzero((dist >= 2.5) & (dist < 6.0)), 14)
    gl_masses(np.flatnonzero((dist > 0.0) & (dist < 2.5)), 30)
    return table.reshape(size, size)


def _cusp2_offset_masses(spec: MeasureSpec, h: float, kmax: int) -> np.ndarray:
    """Cusp-measure cell masses; full kernel value for cells inside the cusp
    set, zero outside, boundary cells by curved-boundary quadrature."""
    s = spec.s
    plain = MeasureSpec(kind="stable", d=2, alpha=spec.alpha,
                        normalization=spec.normalization)
    table = _stable2_offset_masses(plain, h, kmax)
    size = 2 * kmax + 1
    ks = np.arange(-kmax, kmax + 1)
    for ii, ki in enumerate(ks):
        for jj, kj in enumerate(ks):
            if ki == 0 and kj == 0:
                continue
            lo1, hi1 = sorted((abs(ki * h - h / 2), abs(ki * h + h / 2))) \
                if ki != 0 else (0.0, h / 2)
            lo2, hi2 = sorted((abs(kj * h - h / 2), abs(kj * h + h / 2))) \
                if kj != 0 else (0.0, h / 2)
            fully_in = (lo2 > hi1 ** s) or (lo1 > hi2 ** s)
            fully_out = (hi2 <= lo1 ** s) and (hi1 <= lo2 ** s)
            if fully_in:
                continue
            if fully_out:
                table[ii, jj] = 0.0
                continue
            bounds = [[ki * h - h / 2, ki * h + h / 2],
                      [kj * h - h / 2, kj * h + h / 2]]
            table[ii, jj] = measure_of_set(spec, np.zeros(2), Cell(bounds))
    return table


def _diag_second_moments(spec: MeasureSpec, h: float) -> np.ndarray:
    """Per-axis second moments int_{cell_0} z_k^2 mu(dz) of the diagonal
    cell [-h/2, h/2]^d."""
    a, nu = spec.alpha, spec.normalization
    if spec.d == 1:
        if spec.kind in ("stable", "axes"):
            m = nu * 2.0 * (h / 2.0) ** (2.0 - a) / (2.0 - a)
        elif spec.kind == "tabulated":
            m = nu * _tab_radial_integral(spec, 0.0, h / 2.0, 2)
        else:
            raise InvalidSpec(spec.kind)
        return np.array([m])
    if spec.kind == "axes":
        m = nu * 2.0 * (h / 2.0) ** (2.0 - a) / (2.0 - a)
        return np.array([m, m])
    if spec.kind in ("stable", "tabulated"):
        def t_box(phi):
            return (h / 2.0) / max(abs(math.cos(phi)), abs(math.sin(phi)))

        if spec.kind == "stable":
            def f(phi):
                return t_box(phi) ** (2.0 - a) / (2.0 - a)
        else:
            def f(phi):
                val, _ = quad(lambda t: t ** 3 * _tab_density(spec, t),
                              1e-12, t_box(phi), limit=100)
                return val
        val, _ = quad(f, 0.0, math.pi / 4.0, limit=100)
        m =  0.5 * nu * 8.0 * val
        return np.array([m, m])
    if spec.kind == "cusp":
        def f(phi):
            tb = (h / 2.0) / max(abs(math.cos(phi)), abs(math.sin(phi)))
            tc = min(_cusp_ray_cutoff(spec.s, phi), tb)
            return (tb ** (2.0 - a) - tc ** (2.0 - a)) / (2.0 - a)
        val, _ = quad(f, 0.0, math.pi / 4.0, limit=200)
        m = 0.5 * nu * 8.0 * val
        return np.array([m, m])
    raise InvalidSpec(spec.kind)


# ---------------------------------------------------------------------------
# far-field tail quadrature
# ---------------------------------------------------------------------------

@dataclass
class TailQuadrature:
    """Per-row quadrature of the box complement: points, weights and CSR
    row pointers into the flat arrays.  rows[r] indexes the grid node."""

    rows: np.ndarray
    row_ptr: np.ndarray
    pts: np.ndarray
    w: np.ndarray

    def row_masses(self) -> np.ndarray:
        return np.add.reduceat(self.w, self.row_ptr[:-1]) \
            if self.w.size else np.zeros(len(self.rows))


def _band_radii(first: float, alpha: float) -> np.ndarray:
    n = max(4, math.ceil(math.log(1.0 / _TAIL_EPS) / (alpha * math.log(_TAIL_GROWTH))))
    return first * _TAIL_GROWTH ** np.arange(n + 1)


def _power_band_centroid(lo, hi, alpha):
    """Mass centroid of t^{-1-alpha} dt on [lo, hi] (hi may be inf)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    out = np.empty_like(lo)
    finite = np.isfinite(hi)
    if abs(alpha - 1.0) < 1e-12:
        f = finite
        out[f] = np.log(hi[f] / lo[f]) / (1.0 / lo[f] - 1.0 / hi[f])
    else:
        c = alpha / (alpha - 1.0)
        f = finite
        out[f] = c * (lo[f] ** (1 - alpha) - hi[f] ** (1 - alpha)) / \
            (lo[f] ** (-alpha) - hi[f] ** (-alpha))
    inf = ~finite
    if alpha > 1.0:
        out[inf] = lo[inf] * alpha / (alpha - 1.0)
    else:
        out[inf] = lo[inf] * _TAIL_GROWTH
    return out


def _build_tail_lines(spec: MeasureSpec, grid: Grid, rows: np.ndarray) -> TailQuadrature:
    """Tails for kinds supported on lines (d=1, and axes in d=2): per node,
    per axis, per side, geometric bands beyond the box edge."""
    a = spec.alpha
    nu = spec.normalization
    L_eff = grid.box_radius + grid.h / 2.0
    pts_all, w_all, ptr = [], [], [0]
    if spec.d == 1:
        dirs = [np.array([1.0]), np.array([-1.0])]
    else:
        dirs = [np.array([1.0, 0.0]), np.array([-1.0, 0.0]),
                np.array([0.0, 1.0]), np.array([0.0, -1.0])]
    for i in rows:
        x = grid.coords[i]
        n_pts = 0
        for e in dirs:
            axis = int(np.argmax(np.abs(e)))
            first = L_eff - x[axis] if e[axis] > 0 else L_eff + x[axis]
            radii = _band_radii(first, a)
            los = radii
            his = np.append(radii[1:], np.inf)
            if spec.kind in ("stable", "axes"):
                masses = nu / a * (los ** (-a) - np.where(np.isfinite(his),
                                                          his, np.inf) ** (-a))
                masses[-1] = nu / a * los[-1] ** (-a)
            else:
                masses = np.array([nu * 0.5 * _tab_radial_integral(spec, lo, hi, 0)
                                   for lo, hi in zip(los, his)])
            cent = _power_band_centroid(los, his, a)
            pts = x[None, :] + cent[:, None] * e[None, :]
            pts_all.append(pts)
            w_all.append(masses)
            n_pts += len(masses)
        ptr.append(ptr[-1] + n_pts)
    pts = np.concatenate(pts_all) if pts_all else np.zeros((0, spec.d))
    w = np.concatenate(w_all) if w_all else np.zeros(0)
    return TailQuadrature(rows=np.asarray(rows), row_ptr=np.asarray(ptr),
                          pts=pts, w=w)


def _square_exit(x, phis, S):
    """Distance from x to the boundary of the square [-S, S]^2 along
    directions phis; vectorized."""
    c, s = np.cos(phis), np.sin(phis)
    with np.errstate(divide="ignore"):
        tx = np.where(c > 0, (S - x[0]) / np.where(c != 0, c, 1.0),
                      np.where(c < 0, (-S - x[0]) / np.where(c != 0, c, 1.0),
                               np.inf))
        ty = np.where(s > 0, (S - x[1]) / np.where(s != 0, s, 1.0),
                      np.where(s < 0, (-S - x[1]) / np.where(s != 0, s, 1.0),
                               np.inf))
    return np.minimum(tx, ty)


def _build_tail_radial(spec: MeasureSpec, grid: Grid, rows: np.ndarray,
                       n_sectors: int = 16, gl_order: int = 12) -> TailQuadrature:
    """Tails of the 2-D rotational kinds (stable, cusp, tabulated): the box
    complement is integrated in polar coordinates around each node, split
    into angular sectors (refined at the box corner directions) and
    geometric radial bands."""
    a = spec.alpha
    nu = spec.normalization
    S = grid.box_radius + grid.h / 2.0
    xq, wq = _gl_nodes(gl_order)
    base_edges = np.linspace(0.0, 2.0 * math.pi, n_sectors + 1)
    pts_all, w_all, ptr = [], [], [0]
    cusp = spec.kind == "cusp"
    for i in rows:
        x = grid.coords[i]
        corners = np.arctan2([S - x[1], S - x[1], -S - x[1], -S - x[1]],
                             [S - x[0], -S - x[0], -S - x[0], S - x[0]])
        corners = np.mod(corners, 2.0 * math.pi)
        edges = np.unique(np.concatenate([base_edges, corners]))
        mids = 0.5 * (edges[:-1] + edges[1:])
        widths = edges[1:] - edges[:-1]
        # per-sector GL angles: (n_sec, gl)
        phis = mids[:, None] + 0.5 * widths[:, None] * xq[None, :]
        wphi = 0.5 * widths[:, None] * wq[None, :]
        t_exit = _square_exit(x, phis.ravel(), S).reshape(phis.shape)
        if cusp:
            t_cut = _cusp_ray_cutoff(spec.s, phis.ravel()).reshape(phis.shape)
            t_exit = np.maximum(t_exit, t_cut)
        first = max(S - max(abs(x[0]), abs(x[1])), grid.h)
        radii = _band_radii(first, a)
        los = radii
        his = np.append(radii[1:], np.inf)
        n_pts = 0
        pts_row, w_row = [], []

        def ray_mass(lo_arr, hi):
            if spec.kind == "tabulated":
                out = np.zeros_like(lo_arr)
                flat, lo_flat = out.ravel(), lo_arr.ravel()
                for k, lo_v in enumerate(lo_flat):
                    if lo_v < hi:
                        flat[k] = _tab_radial_integral(spec, lo_v, hi, 0) \
                            / (2.0 * math.pi)
                return out
            if np.isfinite(hi):
                return np.where(lo_arr < hi,
                                (lo_arr ** (-a) - hi ** (-a)) / a, 0.0)
            return lo_arr ** (-a) / a

        for lo, hi in zip(los, his):
            lo_eff = np.maximum(t_exit, lo)
            ray = ray_mass(lo_eff, hi)
            sec_mass = nu * np.sum(ray * wphi, axis=1)
            keep = sec_mass > 0.0
            if not np.any(keep):
                continue
            lo_rep = np.maximum(_square_exit(x, mids, S), lo)[keep]
            hi_rep = np.full(lo_rep.shape, hi)
            cent = _power_band_centroid(lo_rep, hi_rep, a)
            e = np.stack([np.cos(mids[keep]), np.sin(mids[keep])], axis=1)
            pts_row.append(x[None, :] + cent[:, None] * e)
            w_row.append(sec_mass[keep])
            n_pts += int(keep.sum())
        if n_pts:
            pts_all.append(np.concatenate(pts_row))
            w_all.append(np.concatenate(w_row))
        ptr.append(ptr[-1] + n_pts)
    pts = np.concatenate(pts_all) if pts_all else np.zeros((0, 2))
    w = np.concatenate(w_all) if w_all else np.zeros(0)
    return TailQuadrature(rows=np.asarray(rows), row_ptr=np.asarray(ptr),
                          pts=pts, w=w)


# ---------------------------------------------------------------------------
# the operator
# ---------------------------------------------------------------------------

@dataclass
class DiscreteOperator:
    """Immutable discrete realization of the jump operator on a grid."""

    spec: MeasureSpec
    grid: Grid
    coeffs: EquationCoefficients
    pair_i: np.ndarray          # unordered pairs, pair_i < pair_j
    pair_j: np.ndarray
    pair_w: np.ndarray          # effective weights (cell mass + 2nd-moment corr)
    pair_cell_mass: np.ndarray  # raw cell masses
    tail: TailQuadrature
    tail_mass: np.ndarray       # per-node total tail mass (0 off stored rows)

    _W_cache: Optional[sp.csr_matrix] = field(default=None, repr=False)

    # -- matrix views --------------------------------------------------------

    def pair_coefficient(self, t: float):
        if self.coeffs.a is None:
            return 1.0
        X = self.grid.coords[self.pair_i]
        Y = self.grid.coords[self.pair_j]
        return self.coeffs.a_values(t, X, Y)

    def weight_matrix(self, t: float = 0.0) -> sp.csr_matrix:
        """Symmetric sparse matrix of a(t,x_i,x_j) * w_ij."""
        static = self.coeffs.a is None or not self.coeffs.time_dependent_a
        if static and self._W_cache is not None:
            return self._W_cache
        n = self.grid.n_nodes
        vals = self.pair_w * self.pair_coefficient(t)
        W = sp.csr_matrix((vals, (self.pair_i, self.pair_j)), shape=(n, n))
        W = W + W.T
        if static:
            object.__setattr__(self, "_W_cache", W)
        return W

    def row_sums(self, t: float = 0.0) -> np.ndarray:
        return np.asarray(self.weight_matrix(t).sum(axis=1)).ravel()

    # -- tail handling --------------------------------------------------------

    def tail_g_integral(self, g, t: float) -> np.ndarray:
        """Per-node integral of exterior data against the tail bands."""
        out = np.zeros(self.grid.n_nodes)
        if self.tail.w.size == 0 or g is None:
            return out
        gv = np.asarray(g(t, self.tail.pts), dtype=float)
        contrib = self.tail.w * gv
        if self.coeffs.a is not None:
            reps = np.diff(self.tail.row_ptr)
            Xr = np.repeat(self.grid.coords[self.tail.rows], reps, axis=0)
            contrib = contrib * self.coeffs.a_values(t, Xr, self.tail.pts)
        out[self.tail.rows] = np.add.reduceat(contrib, self.tail.row_ptr[:-1])
        return out

    def tail_mass_at(self, t: float = 0.0) -> np.ndarray:
        if self.coeffs.a is None:
            return self.tail_mass
        out = np.zeros(self.grid.n_nodes)
        reps = np.diff(self.tail.row_ptr)
        Xr = np.repeat(self.grid.coords[self.tail.rows], reps, axis=0)
        av = self.coeffs.a_values(t, Xr, self.tail.pts)
        out[self.tail.rows] = np.add.reduceat(self.tail.w * av,
                                              self.tail.row_ptr[:-1])
        return out

    # -- operator action and energy -------------------------------------------

    def apply(self, u: np.ndarray, g, t: float = 0.0) -> np.ndarray:
        """(Lu) on the interior nodes; u given on all box nodes, g beyond."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.grid.n_nodes,):
            raise InvalidInput("u must be defined on all box nodes")
        if not np.all(np.isfinite(u)):
            raise InvalidInput("u contains non-finite entries")
        aw = self.pair_w * self.pair_coefficient(t)
        diff = u[self.pair_j] - u[self.pair_i]
        out = np.zeros(self.grid.n_nodes)
        np.add.at(out, self.pair_i, aw * diff)
        np.add.at(out, self.pair_j, -aw * diff)
        out += self.tail_g_integral(g, t) - self.tail_mass_at(t) * u
        return out[self.grid.interior_mask]

    def bilinear_form(self, u: np.ndarray, v: np.ndarray, t: float = 0.0,
                      g_u=None, g_v=None) -> float:
        """Energy pairing E_t(u, v) over unordered pairs plus tail terms.

        E_t(u, u) >= 0 and E_t(u, phi) = -<Lu, phi> h^d for phi supported
        inside the domain (with g_phi = 0).
        """
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        hd = self.grid.h ** self.grid.d
        aw = self.pair_w * self.pair_coefficient(t)
        du = u[self.pair_j] - u[self.pair_i]
        dv = v[self.pair_j] - v[self.pair_i]
        total = float(np.sum(aw * du * dv))
        if self.tail.w.size:
            rows = self.tail.rows
            reps = np.diff(self.tail.row_ptr)
            gu = np.zeros(self.tail.w.size) if g_u is None \
                else np.asarray(g_u(t, self.tail.pts), dtype=float)
            gv = np.zeros(self.tail.w.size) if g_v is None \
                else np.asarray(g_v(t, self.tail.pts), dtype=float)
            du_t = np.repeat(u[rows], reps) - gu
            dv_t = np.repeat(v[rows], reps) - gv
            wt = self.tail.w
            if self.coeffs.a is not None:
                Xr = np.repeat(self.grid.coords[rows], reps, axis=0)
                wt = wt * self.coeffs.a_values(t, Xr, self.tail.pts)
            total += float(np.sum(wt * du_t * dv_t))
        return total * hd


def assemble(spec: MeasureSpec, grid: Grid,
             coeffs: Optional[EquationCoefficients] = None) -> DiscreteOperator:
    """Build the discrete operator for a measure family on a grid."""
    if spec.d != grid.d:
        raise InvalidInput("measure and grid dimensions differ")
    coeffs = coeffs or EquationCoefficients()
    m = grid.m
    interior = grid.interior_indices
    n = grid.n_nodes
    lattice = grid.lattice
    h = grid.h

    # ---- pair list: unordered pairs with at least one interior endpoint
    if spec.d == 1 or spec.kind == "axes":
        masses_1d = _line_interval_masses(spec, h, 2 * m)
        if spec.d == 1:
            I = interior
            A = np.arange(n)
            PI = np.repeat(I, n)
            PJ = np.tile(A, len(I))
            keep = PI != PJ
            PI, PJ = PI[keep], PJ[keep]
            lo = np.minimum(PI, PJ)
            hi = np.maximum(PI, PJ)
            key = lo * n + hi
            _, idx = np.unique(key, return_index=True)
            lo, hi = lo[idx], hi[idx]
            w = masses_1d[np.abs(lattice[hi, 0] - lattice[lo, 0]) - 1]
            pair_i, pair_j, cell_mass = lo, hi, w
        else:
            side = grid.n_per_side
            ii = lattice[interior, 0] + m
            jj = lattice[interior, 1] + m
            pis, pjs = [], []
            ks = np.arange(side)
            for node, (il, jl) in zip(interior, zip(ii, jj)):
                same_col = il * side + ks          # vary second coordinate
                same_row = ks * side + jl          # vary first coordinate
                nb = np.concatenate([same_col, same_row])
                nb = nb[nb != node]
                pis.append(np.full(nb.shape, node))
                pjs.append(nb)
            PI = np.concatenate(pis)
            PJ = np.concatenate(pjs)
            lo = np.minimum(PI, PJ)
            hi = np.maximum(PI, PJ)
            key = lo * n + hi
            _, idx = np.unique(key, return_index=True)
            lo, hi = lo[idx], hi[idx]
            delta = np.abs(lattice[hi] - lattice[lo]).max(axis=1)
            w = masses_1d[delta - 1]
            pair_i, pair_j, cell_mass = lo, hi, w
    else:
        # rotational kinds: dense coupling of interior rows to all box nodes
        if spec.kind == "cusp":
            table = _cusp2_offset_masses(spec, h, 2 * m)
        else:
            table = _stable2_offset_masses(spec, h, 2 * m)
        I = interior
        A = np.arange(n)
        PI = np.repeat(I, n)
        PJ = np.tile(A, len(I))
        keep = PI != PJ
        PI, PJ = PI[keep], PJ[keep]
        lo = np.minimum(PI, PJ)
        hi = np.maximum(PI, PJ)
        key = lo * n + hi
        _, idx = np.unique(key, return_index=True)
        lo, hi = lo[idx], hi[idx]
        delta = lattice[hi] - lattice[lo]
        w = table[delta[:, 0] + 2 * m, delta[:, 1] + 2 * m]
        pair_i, pair_j, cell_mass = lo, hi, w

    # ---- nearest-neighbor second-moment correction (diagonal cell)
    pair_w = cell_mass.copy()
    m2 = _diag_second_moments(spec, h)
    delta = lattice[pair_j] - lattice[pair_i]
    for axis in range(spec.d):
        unit = (np.abs(delta[:, axis]) == 1)
        for other in range(spec.d):
            if other != axis:
                unit &= (delta[:, other] == 0)
        pair_w[unit] += m2[axis] / (2.0 * h * h)

    # ---- tails
    if spec.d == 1 or spec.kind == "axes":
        tail = _build_tail_lines(spec, grid, interior)
    else:
        tail = _build_tail_radial(spec, grid, interior)
    tail_mass = np.zeros(n)
    tail_mass[tail.rows] = tail.row_masses()

    return DiscreteOperator(spec=spec, grid=grid, coeffs=coeffs,
                            pair_i=pair_i, pair_j=pair_j, pair_w=pair_w,
                            pair_cell_mass=cell_mass, tail=tail,
                            tail_mass=tail_mass)
