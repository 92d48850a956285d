"""Invariant groups run by ``geoxray validate``; each returns a small JSON-ready dict."""
from __future__ import annotations

import numpy as np

from .connection import ZeroConnection, star_curvature, sup_norms
from .errors import ConjugatePointError
from .flow import TraceOptions
from .frame import frame_coefficients
from .grids import BoundaryField, FanBeamGrid, InteriorField, InteriorGrid
from .inversion import KernelCache, FilterPlan, W_noconnection, bound_for, operator_norm_estimate
from .boundary import ScatteringTables, membership_residual
from .phantoms import Bump, Gaussian
from .rng import SplitMix64
from .surface import santalo_integrate, simplicity_constants, trace_geodesic, PhasePoint
from .transport import propagator_U, scattering_data
from .xray import adjoint_I0, forward_I0, pairing_M, pairing_mu


def _result(name, passed, **details):
    return {"group": name, "passed": bool(passed), **{k: (float(v) if isinstance(v, (np.floating, float)) else v)
                                                      for k, v in details.items()}}


def _random_points(metric, count, seed, frac=0.9):
    rng = SplitMix64(seed)
    r = frac * metric.radius * np.sqrt(rng.uniform((count,)))
    phi = rng.uniform((count,), 0, 2 * np.pi)
    th = rng.uniform((count,), 0, 2 * np.pi)
    return r * np.cos(phi), r * np.sin(phi), th


def _bracket(metric, P, Q, x, y, th, h=1e-5):
    """Lie bracket of two frame fields given as coefficient callables, by central differences."""
    p, q = P(x, y, th), Q(x, y, th)

    def deriv(field, along):
        out = 0
        for k, step in enumerate(np.eye(3)):
            f_plus = field(x + h * step[0], y + h * step[1], th + h * step[2])
            f_minus = field(x - h * step[0], y - h * step[1], th - h * step[2])
            out = out + along[k] * (f_plus - f_minus) / (2 * h)
        return out

    return deriv(Q, p) - deriv(P, q)


def structure_group(metric, mutation="none", seed=1, tol=1e-6):
    x, y, th = _random_points(metric, 64, seed)
    sgn = -1.0 if mutation == "flip_xperp" else 1.0
    Xf = lambda a, b, c: frame_coefficients(metric, a, b, c)[0]  # noqa: E731
    Pf = lambda a, b, c: sgn * frame_coefficients(metric, a, b, c)[1]  # noqa: E731
    Vf = lambda a, b, c: frame_coefficients(metric, a, b, c)[2]  # noqa: E731
    X, P, V = Xf(x, y, th), Pf(x, y, th), Vf(x, y, th)
    kap = metric.curvature(x, y)
    r1 = np.abs(_bracket(metric, Xf, Vf, x, y, th) - P).max()
    r2 = np.abs(_bracket(metric, Pf, Vf, x, y, th) + X).max()
    r3 = np.abs(_bracket(metric, Xf, Pf, x, y, th) + kap * V).max()
    worst = max(r1, r2, r3)
    return _result("structure", worst <= tol, XV=r1, XperpV=r2, XXperp=r3, tol=tol)


def identities_group(metric, A, seed=2, opts=TraceOptions(rtol=1e-10, atol=1e-12)):
    A = A if A is not None else ZeroConnection(2)
    x, y, th = _random_points(metric, 32, seed)
    U = propagator_U(metric, A, x, y, th, opts)
    Ustar = propagator_U(metric, A.neg_adjoint(), x, y, th, opts)
    duality = np.abs(np.conj(np.swapaxes(U, -1, -2)) @ Ustar - np.eye(A.n)).max()
    wr = 0.0
    for i in range(4):
        tr = trace_geodesic(metric, PhasePoint(x[i], y[i], th[i]), opts)
        wr = max(wr, np.abs(tr.b1 * tr.c2 - tr.b2 * tr.c1 - 1).max())
    ok = duality <= 1e-8 and wr <= 1e-7
    return _result("identities", ok, propagator_duality=duality, wronskian=wr)


def santalo_group(metric, tol=5e-3):
    one = santalo_integrate(metric, lambda x, y, th: np.ones_like(x), n_beta=64, n_omega=64)
    g = santalo_integrate(metric, lambda x, y, th: np.exp(-(x**2 + y**2) / (0.3 * metric.radius) ** 2)
                          * (1 + 0.5 * np.cos(th)), n_beta=64, n_omega=64)
    e1 = abs(one[0] - one[1]) / abs(one[1])
    e2 = abs(g[0] - g[1]) / abs(g[1])
    return _result("santalo", max(e1, e2) <= tol, constant=e1, gaussian=e2, tol=tol)


def adjointness_group(metric, A, n_x=32, n_fan=64, seed=3, tol=1e-2):
    R = metric.radius
    fan, grid = FanBeamGrid(n_fan, n_fan, R), InteriorGrid(n_x, R)
    n = 1 if A is None else A.n
    rng = SplitMix64(seed)
    f = Bump((0.2 * R, -0.1 * R), 0.5 * R, rng.uniform((n,), -1, 1) + 1j * rng.uniform((n,), -1, 1))
    F = InteriorField.from_function(grid, f)
    d = forward_I0(metric, A, F, fan)
    x, y, _ = fan.phase(*fan.plus_points())
    h = BoundaryField.from_plus(fan, np.stack([np.cos(x + k) * np.sin(2 * y) + 1j * x * y for k in range(n)], -1))
    lhs = pairing_mu(metric, d, h)
    rhs = pairing_M(metric, F, adjoint_I0(metric, A, h, grid))
    err = abs(lhs - rhs) / max(abs(lhs), 1e-300)
    return _result("adjointness", err <= tol, I0_pairing=err, tol=tol)


def symmetry_group(metric, A, n_fan=64, tol=1e-2):
    R = metric.radius
    fan = FanBeamGrid(n_fan, n_fan, R)
    n = 1 if A is None else A.n
    f = Gaussian((0.1 * R, 0.2 * R), 0.25 * R, np.linspace(1, 0.5, n))
    d = forward_I0(metric, A, f, fan)
    tables = ScatteringTables(metric, fan, A)
    res = membership_residual(d, tables, metric, "A+")
    return _result("symmetry", res <= tol, I0_membership=res, tol=tol)


def kernels_group(metric, n_x=20, n_theta=32, tol=1e-8):
    grid = InteriorGrid(n_x, metric.radius)
    f = InteriorField.from_function(grid, Gaussian((0.1, 0.0), 0.3 * metric.radius, (1.0, 0.5j)))
    full = KernelCache(metric, ZeroConnection(2), grid, "A", n_theta).apply(f)
    red = W_noconnection(metric, grid, f, n_theta)
    scale = max(np.abs(full.values).max(), 1e-300)
    err = np.abs(full.values - red.values).max() / max(scale, 1.0)
    return _result("kernels", err <= tol, zero_connection_reduction=err, tol=tol)


def bound_group(metric, A, n_x=20, w_theta=32):
    try:
        rep = simplicity_constants(metric, 32, 32)
    except ConjugatePointError as exc:
        return _result("bound", False, error=str(exc))
    ev = bound_for(metric, A, rep)
    plan = FilterPlan(metric, A, FanBeamGrid(32, 32, metric.radius), InteriorGrid(n_x, metric.radius),
                      w_theta=w_theta)
    est = operator_norm_estimate(plan, "A", iters=12)
    return _result("bound", est <= ev.bound + 1e-3, norm_estimate=est, bound=ev.bound)


GROUPS = {
    "structure": lambda m, A, cfg: structure_group(m, cfg["validate"]["mutation"]),
    "identities": lambda m, A, cfg: identities_group(m, A),
    "santalo": lambda m, A, cfg: santalo_group(m),
    "adjointness": lambda m, A, cfg: adjointness_group(m, A),
    "symmetry": lambda m, A, cfg: symmetry_group(m, A),
    "kernels": lambda m, A, cfg: kernels_group(m),
    "bound": lambda m, A, cfg: bound_group(m, A),
}


def run_groups(metric, A, cfg):
    return [GROUPS[name](metric, A, cfg) for name in cfg["validate"]["groups"]]
