"""Isothermal-disk geometry: curvature, frame, geodesics with Jacobi fields, exit times,
simplicity constants and the Santalo quadrature check."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ode
from .errors import ConjugatePointError
from .flow import FlowSystem, TraceOptions, lobatto_nodes, quadrature_pass, trace_to_exit
from .frame import frame_coefficients
from .metrics import (ConstantCurvature, Euclidean, GaussianBump, IsothermalMetric, Tabulated, parse_metric,
                      tabulate)

__all__ = [
    "IsothermalMetric", "Euclidean", "ConstantCurvature", "GaussianBump", "Tabulated", "parse_metric", "tabulate",
    "PhasePoint", "GeodesicTrace", "SimplicityReport", "TraceOptions", "curvature", "frame_coefficients",
    "trace_geodesic", "exit_time", "simplicity_constants", "santalo_integrate", "volume", "sup_dkappa",
    "boundary_fan_starts",
]


@dataclass(frozen=True)
class PhasePoint:
    x: float
    y: float
    theta: float

    def wrapped(self):
        return PhasePoint(self.x, self.y, float(np.mod(self.theta, 2 * np.pi)))


@dataclass
class GeodesicTrace:
    """Samples of one traced geodesic.  Matrix channels are None when not requested."""

    start: PhasePoint
    tau: float
    exit: PhasePoint
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    b1: np.ndarray | None = None
    c1: np.ndarray | None = None
    b2: np.ndarray | None = None
    c2: np.ndarray | None = None
    vb1: np.ndarray | None = None
    vb2: np.ndarray | None = None
    einv: np.ndarray | None = None
    k1: np.ndarray | None = None
    k2: np.ndarray | None = None
    extra: dict = field(default_factory=dict)


def curvature(metric: IsothermalMetric, x, y):
    metric.check_domain(x, y)
    return metric.curvature(np.asarray(x, float), np.asarray(y, float))


def _trace_single(system: FlowSystem, start: PhasePoint, opts: TraceOptions) -> GeodesicTrace:
    metric = system.metric
    metric.check_domain(start.x, start.y)
    ts, ys = [], []

    def rec(ids, t, Y):
        ts.append(np.atleast_1d(t)[0])
        ys.append(Y[0].copy())

    y0 = system.initial(np.array([start.x]), np.array([start.y]), np.array([start.theta]))
    res = ode.integrate_to_exit(system.rhs, y0, metric.radius, rtol=opts.rtol, atol=opts.atol,
                                max_step=opts.max_step, tau_max=opts.tau_max, recorder=rec)
    Y = np.array(ys)
    t = np.array(ts)
    ex = res.y[0]
    tr = GeodesicTrace(start=start, tau=float(res.tau[0]),
                       exit=PhasePoint(float(ex[0].real), float(ex[1].real), float(np.mod(ex[2].real, 2 * np.pi))),
                       t=t, x=Y[:, 0].real, y=Y[:, 1].real, theta=Y[:, 2].real)
    if system.jacobi:
        j = system.sl["jac"].start
        tr.b1, tr.c1, tr.b2, tr.c2 = (Y[:, j + i].real for i in range(4))
    if system.variation:
        v = system.sl["var"].start
        tr.vb1, tr.vb2 = Y[:, v].real, Y[:, v + 2].real
    if system.attenuation:
        tr.einv = system.mat(Y, "einv")
    if system.kernel:
        tr.k1, tr.k2 = system.mat(Y, "k1"), system.mat(Y, "k2")
    return tr


def trace_geodesic(metric, start: PhasePoint, opts: TraceOptions = TraceOptions()) -> GeodesicTrace:
    """Geometry plus Jacobi scalars along one geodesic, sampled at the accepted steps."""
    return _trace_single(FlowSystem(metric, jacobi=True), start, opts)


def exit_time(metric, x, y, th, opts: TraceOptions = TraceOptions()):
    """Exit times for (arrays of) phase points."""
    metric.check_domain(x, y)
    scalar = np.ndim(x) == 0 and np.ndim(y) == 0 and np.ndim(th) == 0
    tau, _ = trace_to_exit(FlowSystem(metric), x, y, th, opts)
    return float(tau[0]) if scalar else tau


def boundary_fan_starts(radius, n_beta, n_omega):
    """Inward fan starts (beta, omega) with half-offset omega nodes; returns x, y, th, beta, omega, mu."""
    beta = 2 * np.pi * np.arange(n_beta) / n_beta
    omega = 2 * np.pi * (np.arange(n_omega) + 0.5) / n_omega
    B, W = np.meshgrid(beta, omega, indexing="ij")
    inward = np.cos(W) < -1e-6
    B, W = B[inward], W[inward]
    return radius * np.cos(B), radius * np.sin(B), B + W, B, W, -np.cos(W)


@dataclass
class SimplicityReport:
    C1: float
    C2: float
    tau_inf: float
    k_plus: float
    k_minus: float
    vol_M: float
    sup_dkappa: float

    def as_dict(self):
        return dict(self.__dict__)


def volume(metric, n_r=64, n_phi=128):
    """Riemannian area by Gauss-Legendre in r times trapezoid in phi."""
    g, w = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * metric.radius * (g + 1)
    wr = 0.5 * metric.radius * w
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    R, P = np.meshgrid(r, phi, indexing="ij")
    vals = np.exp(2 * metric.lam(R * np.cos(P), R * np.sin(P))) * R
    return float((vals.sum(axis=1) * (2 * np.pi / n_phi)) @ wr)


def sup_dkappa(metric, n_r=64, n_phi=128):
    """sup of |d kappa|_g = e^{-lam} |grad kappa| over a polar sample grid."""
    r = metric.radius * np.linspace(0, 1, n_r)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    R, P = np.meshgrid(r, phi, indexing="ij")
    x, y = (R * np.cos(P)).ravel(), (R * np.sin(P)).ravel()
    kx, ky = metric.curvature_grad(x, y)
    return float((np.exp(-metric.lam(x, y)) * np.hypot(kx, ky)).max())


def simplicity_constants(metric, n_boundary=48, n_angle=48, opts: TraceOptions = TraceOptions(),
                         panels_per_unit=8.0, floor_frac=1e-3) -> SimplicityReport:
    """Empirical simplicity constants from a boundary fan.

    |b2|/t is sampled over interior starting points too: for samples s < t on one
    boundary trace, b2(phi_s, t - s) = b2(t) b1(s) - b1(t) b2(s).
    """
    x, y, th, *_ = boundary_fan_starts(metric.radius, n_boundary, n_angle)
    system = FlowSystem(metric, jacobi=True)
    tau, _ = trace_to_exit(system, x, y, th, opts)
    tau_inf = float(tau.max())
    t_floor = floor_frac * tau_inf
    T, W, counts = lobatto_nodes(tau, panels_per_unit)
    K = T.shape[1]
    b1 = np.full(T.shape, np.nan)
    b2 = np.full(T.shape, np.nan)
    kap = np.zeros(T.shape)
    j = system.sl["jac"].start

    def visit(ids, k, t, w, Y):
        b1[ids, k] = Y[:, j].real
        b2[ids, k] = Y[:, j + 2].real
        kap[ids, k] = metric.curvature(Y[:, 0].real, Y[:, 1].real)

    quadrature_pass(system, x, y, th, tau, None, (), panels_per_unit, visit=visit)
    Tz = np.nan_to_num(T)
    k_plus = float((W * Tz * np.maximum(kap, 0)).sum(axis=1).max())
    k_minus = float((W * Tz * np.maximum(-kap, 0)).sum(axis=1).max())

    lo, hi = 1.0, 1.0
    for i in range(T.shape[0]):
        m = counts[i]
        ti, p1, p2 = T[i, :m], b1[i, :m], b2[i, :m]
        S, Tt = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        sel = Tt > S
        dt = ti[Tt[sel]] - ti[S[sel]]
        val = p2[Tt[sel]] * p1[S[sel]] - p1[Tt[sel]] * p2[S[sel]]
        keep = dt >= t_floor
        if np.any(val[keep] >= 0):
            raise ConjugatePointError("b2 changes sign: the metric has conjugate points")
        ratio = np.abs(val[keep]) / dt[keep]
        if ratio.size:
            lo = min(lo, float(ratio.min()))
            hi = max(hi, float(ratio.max()))
    return SimplicityReport(C1=lo, C2=hi, tau_inf=tau_inf, k_plus=k_plus, k_minus=k_minus,
                            vol_M=volume(metric), sup_dkappa=sup_dkappa(metric))


def santalo_integrate(metric, F, n_beta=128, n_omega=128, panels_per_unit=16.0, n_r=48, n_phi=96,
                      n_theta=64, opts: TraceOptions = TraceOptions()):
    """Both sides of Santalo's formula for a callable F(x, y, th) -> values.

    lhs: fan over the inward boundary, integral along each geodesic, weighted by
    mu e^{lam} R dbeta domega.  rhs: Gauss-Legendre in r, trapezoid in phi and th,
    weighted by e^{2 lam}.
    """
    x, y, th, B, W, mu = boundary_fan_starts(metric.radius, n_beta, n_omega)
    system = FlowSystem(metric)
    tau, _ = trace_to_exit(system, x, y, th, opts)
    line = quadrature_pass(system, x, y, th, tau,
                           lambda ids, t, Y: np.asarray(F(Y[:, 0].real, Y[:, 1].real, Y[:, 2].real), complex),
                           (), panels_per_unit)
    wb = np.exp(metric.lam(x, y)) * metric.radius * (2 * np.pi / n_beta) * (2 * np.pi / n_omega)
    lhs = np.sum(line * mu * wb)

    g, w = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * metric.radius * (g + 1)
    wr = 0.5 * metric.radius * w
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    tt = 2 * np.pi * np.arange(n_theta) / n_theta
    R, P, TH = np.meshgrid(r, phi, tt, indexing="ij")
    X, Y = R * np.cos(P), R * np.sin(P)
    vals = np.asarray(F(X.ravel(), Y.ravel(), TH.ravel()), complex).reshape(R.shape)
    vals = vals * np.exp(2 * metric.lam(X, Y)) * R
    rhs = (vals.sum(axis=(1, 2)) * (2 * np.pi / n_phi) * (2 * np.pi / n_theta)) @ wr
    if abs(lhs.imag) < 1e-14 * max(1, abs(lhs)) and abs(rhs.imag) < 1e-14 * max(1, abs(rhs)):
        return float(lhs.real), float(rhs.real)
    return complex(lhs), complex(rhs)
