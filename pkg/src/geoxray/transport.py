"""Attenuated transport along geodesics: propagators, scattering data, attenuated line
integrals, first-integral extensions and augmented kernel traces."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .connection import MatrixConnection, ZeroConnection
from .flow import FlowSystem, TraceOptions, quadrature_pass, trace_to_exit
from .grids import BoundaryField, FanBeamGrid, InteriorGrid, SphereBundleField, interpolate_boundary
from .metrics import Euclidean
from .surface import GeodesicTrace, PhasePoint, _trace_single


def _trivial(A):
    return A is None or isinstance(A, ZeroConnection)


@dataclass
class AugmentedTraceRequest:
    metric: object
    connection: MatrixConnection | None
    start: PhasePoint
    jacobi: bool = True
    attenuation: bool = True
    kernelK: bool = False
    variationVb: bool = False
    opts: TraceOptions = TraceOptions()


def trace_augmented(req: AugmentedTraceRequest) -> GeodesicTrace:
    A = req.connection if req.connection is not None else ZeroConnection(1)
    system = FlowSystem(req.metric, A, jacobi=req.jacobi, attenuation=req.attenuation, kernel=req.kernelK,
                        variation=req.variationVb)
    return _trace_single(system, req.start, req.opts)


def _flat(*arrs):
    return tuple(np.asarray(a, float).ravel() for a in np.broadcast_arrays(*arrs))


def trace_with_attenuation(metric, A, x, y, th, opts=TraceOptions()):
    """Exit time, exit phase point and E^{-1} at exit for each start."""
    x, y, th = _flat(x, y, th)
    if _trivial(A):
        n = 1 if A is None else A.n
        Ei = np.broadcast_to(np.eye(n, dtype=complex), (x.size, n, n))
        if isinstance(metric, Euclidean):
            tau = chord_exit(metric.radius, x, y, th)
            return tau, x + tau * np.cos(th), y + tau * np.sin(th), th, Ei
        tau, Y = trace_to_exit(FlowSystem(metric), x, y, th, opts)
        return tau, Y[:, 0].real, Y[:, 1].real, Y[:, 2].real, Ei
    system = FlowSystem(metric, A, attenuation=True)
    tau, Y = trace_to_exit(system, x, y, th, opts)
    return tau, Y[:, 0].real, Y[:, 1].real, Y[:, 2].real, system.mat(Y, "einv")


def chord_exit(radius, x, y, th):
    """Exit time of straight lines in the flat disk."""
    metric = Euclidean(radius)
    metric.check_domain(x, y)
    pv = x * np.cos(th) + y * np.sin(th)
    disc = np.maximum(pv**2 - (x**2 + y**2) + radius**2, 0.0)
    return np.maximum(-pv + np.sqrt(disc), 0.0)


def propagator_U(metric, A, x, y, th, opts=TraceOptions()):
    """U_A at phase points: the forward E^{-1} of the reversed geodesic, at its exit."""
    x, y, th = _flat(x, y, th)
    return trace_with_attenuation(metric, A, x, y, th + np.pi, opts)[4]


def entry_point(xe, ye, the):
    """Given the exit of a reversed trace, the forward entry (beta, omega) on the inward boundary."""
    beta = np.mod(np.arctan2(ye, xe), 2 * np.pi)
    omega = np.mod(the + np.pi - beta, 2 * np.pi)
    return beta, omega


def boundary_phase(xe, ye, the):
    beta = np.mod(np.arctan2(ye, xe), 2 * np.pi)
    return beta, np.mod(the - beta, 2 * np.pi)


# -- scattering data ------------------------------------------------------------

@dataclass
class ScatteringData:
    """C_A on the outward fan-beam nodes (window of n_omega/2 nodes starting at 3 n_omega/4)."""

    grid: FanBeamGrid
    values: np.ndarray  # (n_beta, n_omega/2, n, n)

    @property
    def window(self):
        return 3 * self.grid.n_omega // 4

    def full(self):
        """Embed into the full fan grid (identity on the inward half)."""
        g = self.grid
        n = self.values.shape[-1]
        out = np.broadcast_to(np.eye(n, dtype=complex), (g.n_beta, g.n_omega, n, n)).copy()
        out[:, g.minus_indices()] = self.values
        return out

    def __call__(self, beta, omega):
        return interpolate_boundary(self.full(), self.grid, beta, omega, window=self.window)


def scattering_data(metric, A, grid: FanBeamGrid, opts=TraceOptions()) -> ScatteringData:
    """C_A(q) = U_A(q) at every outward node q, traced from its antipodal inward start a(q)."""
    B, W = grid.minus_points()
    x, y, th = grid.phase(B, W)
    C = propagator_U(metric, A, x, y, th, opts)
    n = C.shape[-1]
    return ScatteringData(grid, C.reshape(grid.n_beta, grid.n_omega // 2, n, n))


# -- attenuated integrals -----------------------------------------------------

def _integrand_system(metric, A, need_jacobi=False):
    if _trivial(A):
        return FlowSystem(metric, jacobi=need_jacobi), None
    return FlowSystem(metric, A, attenuation=True, jacobi=need_jacobi), "einv"


def integrate_from(metric, A, x, y, th, F, channels, opts=TraceOptions(), tau=None):
    """u_A^F at the given starts: integral over [0, tau] of E^{-1}(t) F(phi_t).

    ``F(x, y, th) -> (N, channels)``.
    """
    x, y, th = _flat(x, y, th)
    system, key = _integrand_system(metric, A)
    if tau is None:
        tau, _ = trace_to_exit(FlowSystem(metric), x, y, th, opts)

    def integrand(ids, t, Y):
        vals = np.asarray(F(Y[:, 0].real, Y[:, 1].real, Y[:, 2].real), complex).reshape(len(ids), channels)
        if key is None:
            return vals
        return np.einsum("pij,pj->pi", system.mat(Y, key), vals)

    return quadrature_pass(system, x, y, th, tau, integrand, (channels,), opts.panels_per_unit)


def attenuated_integral(metric, A, F, grid: FanBeamGrid, channels, opts=TraceOptions()) -> BoundaryField:
    """I_A F on the inward fan nodes for an integrand F(x, y, th) -> (N, channels)."""
    B, W = grid.plus_points()
    x, y, th = grid.phase(B, W)
    vals = integrate_from(metric, A, x, y, th, F, channels, opts)
    return BoundaryField.from_plus(grid, vals)


def transport_solve(metric, A, F, grid: InteriorGrid, n_theta, channels, opts=TraceOptions()) -> SphereBundleField:
    """u_A^F on interior nodes x fiber angles (integral over the forward segment)."""
    x, y = grid.points()
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    X, T = np.repeat(x, n_theta), np.tile(th, x.size)
    Y = np.repeat(y, n_theta)
    vals = integrate_from(metric, A, X, Y, T, F, channels, opts)
    return SphereBundleField(grid, n_theta, vals.reshape(x.size, n_theta, channels))


def extension_at(metric, A, h: BoundaryField, x, y, th, opts=TraceOptions()):
    """h_{psi,A}(x, th) = U_A(x, v) h(entry point) at arbitrary phase points."""
    x, y, th = _flat(x, y, th)
    tau, xe, ye, the, Ei = trace_with_attenuation(metric, A, x, y, th + np.pi, opts)
    beta, omega = entry_point(xe, ye, the)
    hv = interpolate_boundary(h.values, h.grid, beta, omega, window=h.grid.n_omega // 4)
    hv = hv.reshape(x.size, -1)
    if Ei.shape[-1] == 1:
        # scalar attenuation acts on each channel separately
        return Ei[:, 0, :] * hv
    return np.einsum("pij,pj->pi", Ei, hv)


def first_integral_extension(metric, A, h: BoundaryField, grid: InteriorGrid, n_theta,
                             opts=TraceOptions()) -> SphereBundleField:
    x, y = grid.points()
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    vals = extension_at(metric, A, h, np.repeat(x, n_theta), np.repeat(y, n_theta), np.tile(th, x.size), opts)
    return SphereBundleField(grid, n_theta, vals.reshape(x.size, n_theta, -1))
