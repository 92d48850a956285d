"""Fiberwise Fourier analysis and discrete Guillemin-Kazhdan operators.

Fiber functions are sampled at th_k = 2 pi k / N along a chosen axis.  Spatial
derivatives use masked finite-difference stencils on the interior grid.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .grids import InteriorField, InteriorGrid, SphereBundleField


# -- fiber Fourier ---------------------------------------------------------------

def wavenumbers(N):
    """Integer modes of numpy's FFT ordering, Nyquist mode flagged by k = N/2 (even N)."""
    return np.fft.fftfreq(N, 1.0 / N).astype(int)


def analyze(u, axis=-2):
    """Fiber Fourier coefficients u_k with u(th) = sum_k u_k e^{i k th}."""
    return np.fft.fft(u, axis=axis) / u.shape[axis]


def synthesize(c, axis=-2):
    return np.fft.ifft(c, axis=axis) * c.shape[axis]


def _shape_for(k, ndim, axis):
    shape = [1] * ndim
    shape[axis] = k.size
    return k.reshape(shape)


def fiber_multiplier(u, mult, axis=-2):
    """Apply a Fourier multiplier mult(k) along the fiber axis."""
    N = u.shape[axis]
    k = wavenumbers(N)
    m = np.asarray(mult(k), complex)
    if N % 2 == 0:
        m = np.where(np.abs(k) == N // 2, 0, m)
    return np.fft.ifft(np.fft.fft(u, axis=axis) * _shape_for(m, u.ndim, axis), axis=axis)


def hilbert(u, parity="full", axis=-2):
    """Fiberwise Hilbert transform, multiplier -i sgn(k); Nyquist mode dropped.

    parity 'even' / 'odd' first projects the input onto even / odd fiber modes.
    """
    if parity == "full":
        return fiber_multiplier(u, lambda k: -1j * np.sign(k), axis)
    if parity == "even":
        return fiber_multiplier(u, lambda k: -1j * np.sign(k) * (k % 2 == 0), axis)
    if parity == "odd":
        return fiber_multiplier(u, lambda k: -1j * np.sign(k) * (k % 2 != 0), axis)
    raise ValueError(f"unknown parity {parity!r}")


def mode_project(u, k, axis=-2):
    """Component of u in the k-th fiber mode (as samples)."""
    return fiber_multiplier(u, lambda kk: (kk == k).astype(float), axis)


def d_theta(u, axis=-2):
    return fiber_multiplier(u, lambda k: 1j * k, axis)


def fiber_average(u):
    """pi_0 of a SphereBundleField (or an array with fiber axis -2)."""
    if isinstance(u, SphereBundleField):
        return InteriorField.from_masked(u.grid, u.values.mean(axis=1))
    return np.asarray(u).mean(axis=-2)


# -- masked finite differences -----------------------------------------------

def fd_weights(offsets, deriv=1):
    """Weights w with sum_m w_m f(x + o_m h) ~ h^deriv f^(deriv)(x)."""
    offsets = np.asarray(offsets, float)
    m = offsets.size
    V = np.vander(offsets, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[deriv] = math.factorial(deriv)
    return np.linalg.solve(V, rhs)


@lru_cache(maxsize=64)
def _stencil_plan(n, radius, order, axis):
    grid = InteriorGrid(n, radius)
    mask = grid.mask if axis == 0 else grid.mask.T
    starts = np.zeros((n, n), int)
    weights = np.zeros((n, n, order + 1))
    half = order // 2
    for j in range(n):
        line = mask[:, j]
        idx = np.flatnonzero(line)
        if idx.size == 0:
            continue
        L, U = idx[0], idx[-1]
        for i in idx:
            if i - half >= L and i + half <= U:
                s, w = i - half, order + 1
            else:
                w = min(order, U - L + 1)
                s = int(np.clip(i - w // 2, L, U - w + 1))
            if w > 1:
                weights[i, j, :w] = fd_weights(np.arange(w) - (i - s))
            starts[i, j] = s
    if axis == 1:
        starts, weights = starts.T.copy(), weights.transpose(1, 0, 2).copy()
    return starts, weights


def masked_derivative(values, grid: InteriorGrid, axis, order=4):
    """d/dx (axis 0) or d/dy (axis 1) of grid samples values[ix, iy, ...] inside the mask."""
    starts, weights = _stencil_plan(grid.n, grid.radius, order, axis)
    n = grid.n
    out = np.zeros_like(values, dtype=complex if np.iscomplexobj(values) else float)
    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    for m in range(order + 1):
        w = weights[..., m]
        if not w.any():
            continue
        if axis == 0:
            src = values[np.clip(starts + m, 0, n - 1), J]
        else:
            src = values[I, np.clip(starts + m, 0, n - 1)]
        out += w.reshape(w.shape + (1,) * (values.ndim - 2)) * src
    out /= grid.h
    out[~grid.mask] = 0
    return out


def grid_gradient(values, grid, order=4):
    return masked_derivative(values, grid, 0, order), masked_derivative(values, grid, 1, order)


def d_z(values, grid, order=4):
    gx, gy = grid_gradient(values, grid, order)
    return 0.5 * (gx - 1j * gy)


def d_zbar(values, grid, order=4):
    gx, gy = grid_gradient(values, grid, order)
    return 0.5 * (gx + 1j * gy)


# -- frame operators on sampled sphere-bundle fields ------------------------------

def _grid_array(u: SphereBundleField):
    g = u.grid
    arr = np.zeros((g.n, g.n) + u.values.shape[1:], complex)
    arr[g.mask] = u.values
    return arr


def _frame_parts(metric, u: SphereBundleField, order=4):
    g = u.grid
    x, y = g.points()
    lam, lx, ly = metric.lam_derivs(x, y)
    th = u.thetas
    arr = _grid_array(u)
    gx, gy = grid_gradient(arr, g, order)
    return x, y, lam, lx, ly, th, gx[g.mask], gy[g.mask], d_theta(u.values, axis=1)


def apply_X(metric, u: SphereBundleField, order=4):
    """X u by FD in space and spectrally in the fiber."""
    *_, lam, lx, ly, th, ux, uy, ut = _frame_parts(metric, u, order)
    e = np.exp(-lam)[:, None, None]
    c, s = np.cos(th)[None, :, None], np.sin(th)[None, :, None]
    lx, ly = lx[:, None, None], ly[:, None, None]
    return SphereBundleField(u.grid, u.n_theta, e * (c * ux + s * uy + (ly * c - lx * s) * ut))


def apply_Xperp(metric, u: SphereBundleField, order=4):
    *_, lam, lx, ly, th, ux, uy, ut = _frame_parts(metric, u, order)
    e = np.exp(-lam)[:, None, None]
    c, s = np.cos(th)[None, :, None], np.sin(th)[None, :, None]
    lx, ly = lx[:, None, None], ly[:, None, None]
    return SphereBundleField(u.grid, u.n_theta, e * (s * ux - c * uy + (lx * c + ly * s) * ut))


def apply_connection(metric, A, u: SphereBundleField, vertical=False):
    """A u (or A_V u) pointwise."""
    x, y = u.grid.points()
    N, T = x.size, u.n_theta
    X, Y, TH = np.repeat(x, T), np.repeat(y, T), np.tile(u.thetas, N)
    M = A.vertical(metric, X, Y, TH) if vertical else A.on_sm(metric, X, Y, TH)
    vals = np.einsum("pij,pj->pi", M, u.values.reshape(N * T, -1))
    return SphereBundleField(u.grid, T, vals.reshape(u.values.shape))


# -- Guillemin-Kazhdan operators ---------------------------------------------------

def gk_apply(metric, A, grid: InteriorGrid, h, k, sign, order=4):
    """mu_+ or mu_- of u = h(x, y) e^{i k th}; returns the coefficient of e^{i (k +- 1) th}.

    ``h`` has shape (n, n, channels) on the grid.  Uses
      mu_- u = e^{-(1+k) lam} (dbar(h e^{k lam}) + A_zbar h e^{k lam}) e^{i(k-1) th}
      mu_+ u = e^{-(1-k) lam} (d(h e^{-k lam}) + A_z h e^{-k lam}) e^{i(k+1) th}
    """
    X, Y = grid.mesh()
    lam = metric.lam(X, Y)[..., None]
    h = np.asarray(h, complex)
    if sign < 0:
        g = h * np.exp(k * lam)
        deriv = d_zbar(g, grid, order)
        pref = np.exp(-(1 + k) * lam)
    else:
        g = h * np.exp(-k * lam)
        deriv = d_z(g, grid, order)
        pref = np.exp(-(1 - k) * lam)
    out = deriv
    if A is not None:
        m = grid.mask
        az, ab = A.components(X[m], Y[m])
        M = ab if sign < 0 else az
        term = np.zeros_like(deriv)
        term[m] = np.einsum("pij,pj->pi", M, g[m])
        out = out + term
    out = pref * out
    out[~grid.mask] = 0
    return out
