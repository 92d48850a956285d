"""Attenuated X-ray transforms I_{A,0}, I_{A,perp}, I_{A,k}, their adjoints and the
L2 pairings on the inward boundary and on the disk."""
from __future__ import annotations

import warnings

import numpy as np

from .connection import ZeroConnection
from .flow import TraceOptions
from .grids import BoundaryField, FanBeamGrid, InteriorField, InteriorGrid
from .harmonics import grid_gradient
from .phantoms import as_function
from .transport import attenuated_integral, extension_at


def _trivial(A):
    return A is None or isinstance(A, ZeroConnection)


def partner(A):
    """-A^* (the connection whose extensions enter the adjoints)."""
    return A if _trivial(A) else A.neg_adjoint()


def _channels(fn, metric):
    return np.asarray(fn(np.zeros(1), np.zeros(1))).reshape(1, -1).shape[1]


# -- forward ---------------------------------------------------------------------

def forward_I0(metric, A, f, grid: FanBeamGrid, opts=TraceOptions()) -> BoundaryField:
    """I_A applied to the fiber-constant lift of f."""
    fn = as_function(f)
    ch = _channels(fn, metric)
    return attenuated_integral(metric, A, lambda x, y, th: fn(x, y), grid, ch, opts)


def boundary_size(f, metric, n_samples=256):
    """max |f| on the boundary circle relative to max |f| on a polar sample of the disk."""
    fn = as_function(f)
    phi = 2 * np.pi * np.arange(n_samples) / n_samples
    R = metric.radius
    rim = np.abs(fn(R * np.cos(phi), R * np.sin(phi))).max()
    r = R * np.linspace(0, 1, 33)[:-1]
    P, Rr = np.meshgrid(phi[::4], r)
    inner = np.abs(fn((Rr * np.cos(P)).ravel(), (Rr * np.sin(P)).ravel())).max()
    return float(rim / max(inner, rim, 1e-300))


def perp_integrand(metric, A, fn):
    """(X_perp - A_V)(f o pi) as a callable of (x, y, th)."""
    def F(x, y, th):
        lam = metric.lam(x, y)
        fx, fy = fn.grad(x, y)
        e = np.exp(-lam)[:, None]
        out = e * (np.sin(th)[:, None] * fx - np.cos(th)[:, None] * fy)
        if not _trivial(A):
            out = out - np.einsum("pij,pj->pi", A.vertical(metric, x, y, th, lam=lam), fn(x, y))
        return out
    return F


def forward_Iperp(metric, A, f, grid: FanBeamGrid, opts=TraceOptions(), boundary_tol=1e-3) -> BoundaryField:
    """I_A[(X_perp - A_V)(f o pi)]; warns when f does not vanish on the boundary circle."""
    fn = as_function(f)
    size = boundary_size(fn, metric)
    if size > boundary_tol:
        warnings.warn(f"f is not small on the boundary (relative size {size:.2e}); the perp inversion then "
                      "recovers the interior part plus a quarter of the boundary part")
    ch = _channels(fn, metric)
    return attenuated_integral(metric, A, perp_integrand(metric, A, fn), grid, ch, opts)


def forward_Ik(metric, A, ftilde, k: int, grid: FanBeamGrid, opts=TraceOptions()) -> BoundaryField:
    """I_A of f(x, th) = ftilde(x) e^{i k th}."""
    fn = as_function(ftilde)
    ch = _channels(fn, metric)
    return attenuated_integral(metric, A, lambda x, y, th: fn(x, y) * np.exp(1j * k * th)[:, None], grid, ch,
                               opts)


# -- backprojection ----------------------------------------------------------------

def _theta_batches(n_theta, n_nodes, target=60000):
    per = max(1, target // max(n_nodes, 1))
    idx = np.arange(n_theta)
    return [idx[i:i + per] for i in range(0, n_theta, per)]


def backproject(metric, B, h: BoundaryField, grid: InteriorGrid, n_theta=None, derivative=False,
                strategy="fd", opts=TraceOptions(), order=4, eps=1e-4):
    """pi_0 h_{psi,B} or pi_0 (X_perp - B_V) h_{psi,B} on the interior grid.

    strategy 'fd': masked FD of h_{psi,B}(., th) in space per fiber angle; the
    fiber part of X_perp is moved onto its coefficient by integrating by parts
    over the circle (exact for the uniform discrete mean).
    strategy 'perturb': central differences of h_{psi,B} at phase points displaced
    by +-eps along X_perp, each obtained by its own backward trace.
    """
    n_theta = n_theta or max(32, h.grid.n_omega // 2)
    x, y = grid.points()
    N = x.size
    lam, lx, ly = metric.lam_derivs(x, y)
    e = np.exp(-lam)
    thetas = 2 * np.pi * np.arange(n_theta) / n_theta
    ch = h.values.shape[2] if h.values.ndim > 2 else 1
    acc = np.zeros((N, ch), complex)
    for batch in _theta_batches(n_theta, N * (3 if strategy == "perturb" and derivative else 1)):
        th = thetas[batch]
        X, Y, T = np.repeat(x, th.size), np.repeat(y, th.size), np.tile(th, N)
        if not derivative:
            acc += extension_at(metric, B, h, X, Y, T, opts).reshape(N, th.size, ch).sum(axis=1)
            continue
        s, c = np.sin(th)[None, :, None], np.cos(th)[None, :, None]
        ee = e[:, None, None]
        if strategy == "fd":
            vals = extension_at(metric, B, h, X, Y, T, opts).reshape(N, th.size, ch)
            arr = np.zeros((grid.n, grid.n, th.size, ch), complex)
            arr[grid.mask] = vals
            gx, gy = grid_gradient(arr, grid, order)
            gx, gy = gx[grid.mask], gy[grid.mask]
            dcoef = ee * (-lx[:, None, None] * s + ly[:, None, None] * c)
            term = ee * (s * gx - c * gy) - dcoef * vals
        elif strategy == "perturb":
            vals = extension_at(metric, B, h, X, Y, T, opts).reshape(N, th.size, ch) if not _trivial(B) else 0
            px, py = (ee * s)[..., 0].ravel(), (-ee * c)[..., 0].ravel()
            pt = (ee * (lx[:, None, None] * c + ly[:, None, None] * s))[..., 0].ravel()
            room = metric.radius - np.hypot(X, Y)
            step = np.minimum(eps, 0.45 * room / np.maximum(np.hypot(px, py), 1e-12))
            plus = extension_at(metric, B, h, X + step * px, Y + step * py, T + step * pt, opts)
            minus = extension_at(metric, B, h, X - step * px, Y - step * py, T - step * pt, opts)
            term = ((plus - minus) / (2 * step[:, None])).reshape(N, th.size, ch)
        else:
            raise ValueError(f"unknown derivative strategy {strategy!r}")
        if not _trivial(B):
            BV = B.vertical(metric, X, Y, T).reshape(N, th.size, B.n, B.n)
            term = term - np.einsum("ptij,ptj->pti", BV, vals)
        acc += term.sum(axis=1)
    return InteriorField.from_masked(grid, acc / n_theta)


def adjoint_I0(metric, A, h: BoundaryField, grid: InteriorGrid, n_theta=None, opts=TraceOptions()):
    """I_{A,0}^* h = 2 pi pi_0 h_{psi,-A*}."""
    return backproject(metric, partner(A), h, grid, n_theta, False, opts=opts) * (2 * np.pi)


def adjoint_Iperp(metric, A, h: BoundaryField, grid: InteriorGrid, n_theta=None, strategy="fd",
                  opts=TraceOptions()):
    """I_{A,perp}^* h = -2 pi pi_0 (X_perp - B_V) h_{psi,B} with B = -A^*."""
    return backproject(metric, partner(A), h, grid, n_theta, True, strategy, opts) * (-2 * np.pi)


# -- pairings ---------------------------------------------------------------------

def pairing_mu(metric, h1: BoundaryField, h2: BoundaryField):
    """sum over inward nodes of <h1, h2> mu e^{lam} R dbeta domega."""
    from .boundary import pairing_mu as _p
    return _p(metric, h1, h2)


def pairing_M(metric, f1: InteriorField, f2: InteriorField):
    """Riemannian L2 pairing on the disk (midpoint rule on the masked grid)."""
    g = f1.grid
    x, y = g.points()
    w = np.exp(2 * metric.lam(x, y)) * g.h**2
    return complex(np.sum(w[:, None] * f1.masked() * np.conj(f2.masked())))


def norm_M(metric, f: InteriorField):
    return float(np.sqrt(abs(pairing_M(metric, f, f))))
