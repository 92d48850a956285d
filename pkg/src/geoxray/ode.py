"""Batched Dormand-Prince 5(4) integration for many autonomous trajectories at once.

Every row of the state array is an independent trajectory with its own step
size.  Two drivers are provided: an adaptive one that stops each row when its
planar position leaves a disk, and a fixed-grid one that visits prescribed
per-row times (used to place quadrature nodes).
"""
from __future__ import annotations

import numpy as np

from .errors import IntegrationError, TrappingError

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# Shampine's continuous extension (4th order), coefficients of s, s^2, s^3, s^4.
_P = np.array([
    [1.0, -2.8535800653862835, 3.0717434641059005, -1.1270175653862835],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 4.023133379230305, -6.249321565289, 2.675424484351598],
    [0.0, -3.7324019615885042, 10.068970589843675, -5.685526961588504],
    [0.0, 2.5548038301849423, -6.399112377351017, 3.5219323679207912],
    [0.0, -1.3744241142186024, 3.272657752246729, -1.7672812570757455],
    [0.0, 1.3824689317781436, -3.764937863556287, 2.382468931778144],
])


def dp5_step(fun, y, f0, h):
    """Take one DP5 step of length ``h[i]`` for every row.  Returns (y_new, stages)."""
    hc = h[:, None]
    K = np.empty((7,) + y.shape, dtype=y.dtype)
    K[0] = f0
    for s in range(1, 6):
        dy = np.tensordot(_A[s], K[:s], axes=(0, 0))
        K[s] = fun(y + hc * dy)
    y_new = y + hc * np.tensordot(_B, K[:6], axes=(0, 0))
    K[6] = fun(y_new)
    return y_new, K


def _dense_coeffs(K):
    """Dense-output polynomial coefficients of the planar position, shape (N, 2, 4)."""
    return np.einsum("kim,kj->imj", K[:, :, :2].real, _P)


def _dense_xy(y_old, h, Q, s):
    """Planar position on the dense output at fractions ``s`` of the step (Horner)."""
    s = s[:, None]
    acc = Q[:, :, 3]
    for j in (2, 1, 0):
        acc = acc * s + Q[:, :, j]
    return y_old[:, :2].real + h[:, None] * acc * s


class ExitResult:
    """Final states and exit times of an adaptive batch run."""

    def __init__(self, tau, y_exit, n_steps):
        self.tau = tau
        self.y = y_exit
        self.n_steps = n_steps


def integrate_to_exit(fun, y0, radius, *, rtol=1e-8, atol=1e-10, max_step=0.5,
                      tau_max=50.0, first_step=0.05, recorder=None):
    """Integrate each row of ``y0`` until ``x^2 + y^2`` crosses ``radius^2``.

    Columns 0 and 1 of the state hold the planar position.  Rows that start on
    the circle are handled with the event function ``(r^2 - R^2)/t`` so the
    trivial root at t=0 is ignored; rows starting on the circle and pointing
    outward get exit time 0.

    ``recorder(ids, t, y)`` is called after every accepted step (and at the exit)
    when given.
    """
    y0 = np.asarray(y0)
    N = y0.shape[0]
    R2 = radius * radius
    tau = np.zeros(N)
    y_exit = y0.copy()
    n_steps = np.zeros(N, dtype=np.int64)
    if N == 0:
        return ExitResult(tau, y_exit, n_steps)

    f0 = fun(y0)
    r0 = np.hypot(y0[:, 0].real, y0[:, 1].real)
    on_edge = np.abs(r0 - radius) <= 1e-9 * max(radius, 1.0)
    radial_speed = y0[:, 0].real * f0[:, 0].real + y0[:, 1].real * f0[:, 1].real
    outside = (r0 > radius * (1 + 1e-9)) | (on_edge & (radial_speed >= 0))
    if recorder is not None:
        recorder(np.arange(N), np.zeros(N), y0)

    ids = np.flatnonzero(~outside)
    y = y0[ids].copy()
    f = f0[ids]
    edge = on_edge[ids]
    t = np.zeros(ids.size)
    h = np.full(ids.size, min(first_step, max_step))
    h_floor = 1e-14

    while ids.size:
        y_new, K = dp5_step(fun, y, f, h)
        err = h[:, None] * np.tensordot(_E, K, axes=(0, 0))
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        en = np.sqrt(np.mean(np.abs(err / scale) ** 2, axis=1))
        ok = en <= 1.0
        with np.errstate(divide="ignore"):
            fac = np.where(en == 0, 10.0, np.clip(0.9 * en ** -0.2, 0.2, 10.0))
        fac = np.where(ok, fac, np.minimum(fac, 1.0))

        if not ok.all() and (h[~ok] < h_floor).any():
            raise IntegrationError("step size underflow while tracing geodesics")

        g_new = y_new[:, 0].real ** 2 + y_new[:, 1].real ** 2 - R2
        cross = ok & (g_new > 0)
        finished = np.zeros(ids.size, dtype=bool)

        if cross.any():
            c = np.flatnonzero(cross)
            t_c, y_exit_c = _refine_crossing(fun, y[c], f[c], h[c], t[c], K[:, c], edge[c], R2)
            tau[ids[c]] = t_c
            y_exit[ids[c]] = y_exit_c
            n_steps[ids[c]] += 1
            if recorder is not None:
                recorder(ids[c], t_c, y_exit_c)
            finished[c] = True

        adv = ok & ~cross
        if adv.any():
            a = np.flatnonzero(adv)
            t[a] += h[a]
            y[a] = y_new[a]
            f[a] = K[6, a]
            n_steps[ids[a]] += 1
            if recorder is not None:
                recorder(ids[a], t[a], y[a])
            if (t[a] > tau_max).any():
                raise TrappingError(f"geodesic did not exit within tau_max={tau_max}")

        h = np.minimum(h * fac, max_step)
        keep = ~finished
        if not keep.all():
            ids, y, f, edge, t, h = ids[keep], y[keep], f[keep], edge[keep], t[keep], h[keep]
    return ExitResult(tau, y_exit, n_steps)


def _refine_crossing(fun, y_old, f_old, h, t_old, K, edge, R2):
    """Locate the exit inside an accepted step: bisection on the dense output, then Newton."""
    lo = np.zeros(h.size)
    hi = np.ones(h.size)
    Q = _dense_coeffs(K)
    for _ in range(48):
        mid = 0.5 * (lo + hi)
        xy = _dense_xy(y_old, h, Q, mid)
        g = xy[:, 0] ** 2 + xy[:, 1] ** 2 - R2
        g = np.where(edge, g / (t_old + mid * h), g)
        inside = g <= 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    hs = 0.5 * (lo + hi) * h
    for _ in range(2):
        ys, Ks = dp5_step(fun, y_old, f_old, hs)
        x, yy = ys[:, 0].real, ys[:, 1].real
        g = x * x + yy * yy - R2
        gdot = 2 * (x * Ks[6, :, 0].real + yy * Ks[6, :, 1].real)
        safe = np.where(np.abs(gdot) > 1e-300, gdot, 1.0)
        hs = np.clip(hs - g / safe, 0.0, h)
    ys, _ = dp5_step(fun, y_old, f_old, hs)
    return t_old + hs, ys


def integrate_on_nodes(fun, y0, T, counts, visit):
    """Integrate each row through its own increasing node times.

    ``T[i, :counts[i]]`` are the node times of row ``i`` (``T[i, 0] = 0``).  After
    reaching node ``k`` of a set of rows, ``visit(ids, k, y)`` is called; node 0
    is visited before any step.  Steps are plain DP5 steps between consecutive
    nodes without error control, so the nodes must be reasonably dense.
    """
    counts = np.asarray(counts)
    N = counts.size
    y = np.array(y0, copy=True)
    ids = np.arange(N)
    visit(ids, 0, y)
    if N == 0:
        return
    f = fun(y)
    for k in range(1, int(counts.max())):
        live = counts[ids] > k
        if not live.all():
            ids, y, f = ids[live], y[live], f[live]
        if ids.size == 0:
            break
        h = T[ids, k] - T[ids, k - 1]
        y, K = dp5_step(fun, y, f, h)
        f = K[6]
        visit(ids, k, y)
