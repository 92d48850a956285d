"""Data-space operators on the fan-beam grid: scattering relation, antipodal maps,
Q_{A,+-}, B_{A,+-}, the symmetry splitting of inward data and the range operators P_{A,+-}.

All tables come from one fan of traces started at the inward nodes p.  Writing
e(p) for the exit of that trace, tau(p) for its length and G(p) for E_A^{-1}(p, tau(p)):
    alpha(p) = e(p)                        (p inward)
    alpha(q) = a(e(a(q)))                  (q outward grid node, a(q) is an inward grid node)
    alpha_a(p) = a(e(p))
    C_A(q) = U_A(q) = G(a(q))              (q outward grid node)
    C_A(alpha(p)) = G(p)^{-1}
"""
from __future__ import annotations

import warnings

import numpy as np

from .flow import TraceOptions
from .grids import BoundaryField, FanBeamGrid, interpolate_boundary
from .harmonics import hilbert
from .transport import boundary_phase, trace_with_attenuation


class ScatteringTables:
    """Exit data of the inward fan, arrays of shape (n_beta, n_omega/2) in inward-window order."""

    def __init__(self, metric, grid: FanBeamGrid, A=None, opts=TraceOptions()):
        self.metric, self.grid, self.A, self.opts = metric, grid, A, opts
        B, W = grid.plus_points()
        x, y, th = grid.phase(B, W)
        tau, xe, ye, the, Ei = trace_with_attenuation(metric, A, x, y, th, opts)
        shape = (grid.n_beta, grid.n_omega // 2)
        self.beta = B.reshape(shape)
        self.omega = W.reshape(shape)
        self.tau = tau.reshape(shape)
        be, we = boundary_phase(xe, ye, the)
        self.beta_exit = be.reshape(shape)
        self.omega_exit = we.reshape(shape)  # outward relative angle
        n = Ei.shape[-1]
        self.einv_exit = Ei.reshape(shape + (n, n))
        self.n = n
        self._e_exit = None
        conds = np.linalg.cond(self.einv_exit.reshape(-1, n, n))
        self.max_condition = float(conds.max())
        if self.max_condition > 1e8:
            warnings.warn(f"scattering data badly conditioned (cond {self.max_condition:.3g})")

    @property
    def e_exit(self):
        """C_A(alpha(p)) = inverse of E^{-1} at the exit, by LU per node."""
        if self._e_exit is None:
            self._e_exit = np.linalg.inv(self.einv_exit)
        return self._e_exit

    @property
    def tau_inf(self):
        return float(self.tau.max())

    # maps in (beta, omega) coordinates ------------------------------------------
    def alpha_of_plus(self):
        """alpha(p) for inward grid nodes: outward (beta, omega)."""
        return self.beta_exit, self.omega_exit

    def alpha_a_of_plus(self):
        return self.beta_exit, np.mod(self.omega_exit + np.pi, 2 * np.pi)

    def alpha_of_minus(self):
        """alpha(q) for outward grid nodes q (window order 3n/4 ...), inward (beta, omega)."""
        return self.beta_exit, np.mod(self.omega_exit + np.pi, 2 * np.pi)

    def c_minus(self):
        """C_A at outward grid nodes, window order."""
        return self.einv_exit


def build_scattering_tables(metric, grid, A=None, opts=TraceOptions()):
    return ScatteringTables(metric, grid, A, opts)


# -- interpolation helpers -----------------------------------------------------------

def interp_plus(h: BoundaryField, beta, omega):
    g = h.grid
    out = interpolate_boundary(h.values, g, beta, omega, window=g.n_omega // 4)
    return out.reshape(np.shape(beta) + h.values.shape[2:])


def interp_full(g_field: BoundaryField, beta, omega):
    out = interpolate_boundary(g_field.values, g_field.grid, beta, omega)
    return out.reshape(np.shape(beta) + g_field.values.shape[2:])


def _apply(M, v):
    """Matrix (..., n, n) times vector (..., n) or matrix (..., n, m)."""
    if v.ndim == M.ndim - 1:
        return np.einsum("...ij,...j->...i", M, v)
    return M @ v


def _taper(grid: FanBeamGrid, nodes: int):
    """Cosine ramp over the ``nodes`` outward nodes closest to tangency (1 elsewhere)."""
    w = np.ones(grid.n_omega // 2)
    if nodes > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * (np.arange(nodes) + 0.5) / nodes)
        w[:nodes] = ramp
        w[-nodes:] = ramp[::-1]
    return w


# -- operators ------------------------------------------------------------------------

def extend_Q(h: BoundaryField, tables: ScatteringTables, sign=+1, taper_nodes=0) -> BoundaryField:
    """Q_{A,+-} h: h on the inward half, +-C_A(q) h(alpha(q)) on the outward half."""
    g = h.grid
    out = np.zeros_like(h.values)
    out[:, g.plus_slice] = h.plus()
    b, w = tables.alpha_of_minus()
    hv = interp_plus(h, b, w)
    vals = sign * _apply(tables.c_minus(), hv)
    if taper_nodes:
        vals = vals * _taper(g, taper_nodes).reshape((1, -1) + (1,) * (vals.ndim - 2))
    out[:, g.minus_indices()] = vals
    return BoundaryField(g, out, "full")


def fold_B(gf: BoundaryField, tables: ScatteringTables, sign=+1) -> BoundaryField:
    """B_{A,+-} g = g + - C_A^{-1}(alpha(p)) g(alpha(p)) on the inward half."""
    grid = gf.grid
    b, w = tables.alpha_of_plus()
    gv = interp_full(gf, b, w)
    vals = gf.values[:, grid.plus_slice] + sign * _apply(tables.einv_exit, gv)
    return BoundaryField.from_plus(grid, vals)


def hilbert_boundary(gf: BoundaryField, parity="full") -> BoundaryField:
    """Fiber Hilbert transform over the full direction circle at each boundary point.

    The fan grid's fiber variable is omega = th - beta, a rotation at fixed beta,
    so Fourier modes in omega and in th agree up to a phase and sgn(k) is unchanged."""
    return BoundaryField(gf.grid, hilbert(gf.values, parity, axis=1), "full")


def symmetry_decompose(h: BoundaryField, tables: ScatteringTables):
    """Split inward data as h = h_+ + h_- with h_+ in V_{A,+}, h_- in V_{-A*,-}."""
    C = tables.e_exit                      # C_A(alpha(p))
    Ci = tables.einv_exit                  # C_A(alpha(p))^{-1}
    Ch = np.conj(np.swapaxes(C, -1, -2))
    Cih = np.conj(np.swapaxes(Ci, -1, -2))
    n = C.shape[-1]
    I = np.eye(n)
    b, w = tables.alpha_a_of_plus()
    hv = h.plus()
    ha = interp_plus(h, b, w)
    hp = np.linalg.solve(I + Ch @ C, (hv + _apply(Ch, ha))[..., None])[..., 0]
    hm = np.linalg.solve(I + Ci @ Cih, (hv - _apply(Ci, ha))[..., None])[..., 0]
    return BoundaryField.from_plus(h.grid, hp), BoundaryField.from_plus(h.grid, hm)


def mu_weights(metric, grid: FanBeamGrid):
    """mu e^{lam} R dbeta domega on the inward nodes, shape (n_beta, n_omega/2)."""
    B, W = grid.plus_points()
    x, y, _ = grid.phase(B, W)
    w = -np.cos(W) * np.exp(metric.lam(x, y)) * grid.radius * grid.d_beta * grid.d_omega
    return w.reshape(grid.n_beta, grid.n_omega // 2)


def pairing_mu(metric, h1: BoundaryField, h2: BoundaryField):
    w = mu_weights(metric, h1.grid)
    a, b = h1.plus(), h2.plus()
    prod = (a * np.conj(b)).reshape(a.shape[:2] + (-1,)).sum(axis=-1)
    return complex((w * prod).sum())


def norm_mu(metric, h: BoundaryField):
    return float(np.sqrt(abs(pairing_mu(metric, h, h))))


def membership_residual(h: BoundaryField, tables: ScatteringTables, metric, space="A+"):
    """Relative L2_mu residual of the defining relation of V_{A,+} ('A+') or V_{-A*,-} ('-A*-').

    V_{A,+}:    h(alpha_a(p)) = C_A(alpha(p)) h(p)
    V_{-A*,-}:  h(alpha_a(p)) = -C_{-A*}(alpha(p)) h(p),  C_{-A*} = (C_A^*)^{-1}
    """
    b, w = tables.alpha_a_of_plus()
    ha = interp_plus(h, b, w)
    hv = h.plus()
    if space == "A+":
        rhs = _apply(tables.e_exit, hv)
    elif space == "-A*-":
        rhs = -_apply(np.conj(np.swapaxes(tables.einv_exit, -1, -2)), hv)
    elif space == "A-":
        rhs = -_apply(tables.e_exit, hv)
    else:
        raise ValueError(space)
    r = BoundaryField.from_plus(h.grid, ha - rhs)
    return norm_mu(metric, r) / max(norm_mu(metric, h), 1e-300)


def range_P(w: BoundaryField, tables: ScatteringTables, parity="+"):
    """P_{A,+-} w = B_{A,-} H_{+-} Q_{A,+} w."""
    q = extend_Q(w, tables, +1)
    hq = hilbert_boundary(q, "even" if parity == "+" else "odd")
    return fold_B(hq, tables, -1)


def range_P_full(w: BoundaryField, tables: ScatteringTables):
    q = extend_Q(w, tables, +1)
    return fold_B(hilbert_boundary(q, "full"), tables, -1)
