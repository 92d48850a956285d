"""Geodesic flow on SM with optional Jacobi, variation, attenuation and kernel channels.

State layout per row (complex dtype; geometric channels are real-valued):
    0..2  x, y, th
    jac   b1, c1, b2, c2
    var   Vb1, Vc1, Vb2, Vc2
    einv  E^{-1} (n*n)
    k1,k2 K_1, K_2 (n*n each)
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import ode

_THREADS = 1
_CHUNK = 32768


def set_threads(n: int | None):
    global _THREADS
    if n is None:
        n = int(os.environ.get("GEOXRAY_THREADS", "1") or 1)
    _THREADS = max(1, int(n))


def get_threads() -> int:
    return _THREADS


@dataclass(frozen=True)
class TraceOptions:
    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: float = 0.5
    tau_max: float = 50.0
    panels_per_unit: float = 16.0


class FlowSystem:
    def __init__(self, metric, connection=None, *, jacobi=False, attenuation=False, kernel=False,
                 variation=False):
        if kernel and not (attenuation and jacobi):
            raise ValueError("kernel channels need attenuation and jacobi")
        if variation and not jacobi:
            raise ValueError("variation channels need jacobi")
        if attenuation and connection is None:
            raise ValueError("attenuation needs a connection")
        self.metric, self.A = metric, connection
        self.jacobi, self.attenuation, self.kernel, self.variation = jacobi, attenuation, kernel, variation
        self.n = connection.n if connection is not None else 1
        nn = self.n * self.n
        i = 3
        self.sl = {"geo": slice(0, 3)}
        for key, width, on in (("jac", 4, jacobi), ("var", 4, variation), ("einv", nn, attenuation),
                               ("k1", nn, kernel), ("k2", nn, kernel)):
            if on:
                self.sl[key] = slice(i, i + width)
                i += width
        self.size = i

    def initial(self, x, y, th):
        N = np.size(x)
        Y = np.zeros((N, self.size), complex)
        Y[:, 0], Y[:, 1], Y[:, 2] = x, y, th
        if self.jacobi:
            j = self.sl["jac"].start
            Y[:, j] = 1.0
            Y[:, j + 3] = 1.0
        if self.attenuation:
            Y[:, self.sl["einv"]] = np.eye(self.n).ravel()
        return Y

    def mat(self, Y, key):
        return Y[:, self.sl[key]].reshape(-1, self.n, self.n)

    def rhs(self, Y):
        x, y, th = Y[:, 0].real, Y[:, 1].real, Y[:, 2].real
        metric = self.metric
        lam, lx, ly = metric.lam_derivs(x, y)
        e = np.exp(-lam)
        c, s = np.cos(th), np.sin(th)
        dY = np.empty_like(Y)
        dY[:, 0] = e * c
        dY[:, 1] = e * s
        dY[:, 2] = e * (ly * c - lx * s)
        if self.jacobi:
            j = self.sl["jac"].start
            kap = -np.exp(-2 * lam) * metric.lap_lam(x, y)
            b1, c1, b2, c2 = Y[:, j], Y[:, j + 1], Y[:, j + 2], Y[:, j + 3]
            dY[:, j] = -c1
            dY[:, j + 1] = kap * b1
            dY[:, j + 2] = -c2
            dY[:, j + 3] = kap * b2
            if self.variation:
                v = self.sl["var"].start
                kx, ky = metric.curvature_grad(x, y)
                kperp = e * (s * kx - c * ky)
                dY[:, v] = -Y[:, v + 1]
                dY[:, v + 1] = kap * Y[:, v] + b2 * kperp * b1
                dY[:, v + 2] = -Y[:, v + 3]
                dY[:, v + 3] = kap * Y[:, v + 2] + b2 * kperp * b2
        if self.attenuation:
            A = self.A.on_sm(metric, x, y, th, lam=lam)
            Ei = self.mat(Y, "einv")
            dY[:, self.sl["einv"]] = (Ei @ A).reshape(len(x), -1)
            if self.kernel:
                F = self.A.star_curvature_fast(metric, x, y, lam=lam)
                EF = Ei @ F
                dY[:, self.sl["k1"]] = (self.mat(Y, "k1") @ A + b1[:, None, None] * EF).reshape(len(x), -1)
                dY[:, self.sl["k2"]] = (self.mat(Y, "k2") @ A + b2[:, None, None] * EF).reshape(len(x), -1)
        return dY


def _chunks(N, size=None):
    size = size or _CHUNK
    return [slice(i, min(i + size, N)) for i in range(0, N, size)]


def _run(func, slices):
    if _THREADS > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=_THREADS) as pool:
            return list(pool.map(func, slices))
    return [func(s) for s in slices]


def trace_to_exit(system: FlowSystem, x, y, th, opts: TraceOptions = TraceOptions(), chunk=None):
    """Adaptive tracing of many starts; returns (tau, exit states)."""
    x, y, th = (np.asarray(a, float).ravel() for a in np.broadcast_arrays(x, y, th))
    N = x.size
    tau = np.zeros(N)
    Yout = np.zeros((N, system.size), complex)

    def work(sl):
        res = ode.integrate_to_exit(system.rhs, system.initial(x[sl], y[sl], th[sl]), system.metric.radius,
                                    rtol=opts.rtol, atol=opts.atol, max_step=opts.max_step,
                                    tau_max=opts.tau_max)
        return sl, res

    for sl, res in _run(work, _chunks(N, chunk)):
        tau[sl] = res.tau
        Yout[sl] = res.y
    return tau, Yout


_GL_NODES = np.array([0.0, 0.5 - 0.5 / math.sqrt(5), 0.5 + 0.5 / math.sqrt(5)])
_GL_WEIGHTS = np.array([1 / 12, 5 / 12, 5 / 12, 1 / 12])


def lobatto_nodes(tau, panels_per_unit):
    """Composite 4-point Gauss-Lobatto nodes/weights tiling [0, tau_i] for every row.

    Returns (T, W, counts) with T, W of shape (N, K_max), NaN/0 padded.
    """
    tau = np.asarray(tau, float)
    panels = np.maximum(1, np.ceil(panels_per_unit * tau - 1e-9)).astype(int)
    panels = np.where(tau > 0, panels, 0)
    counts = 3 * panels + 1
    K = int(counts.max()) if tau.size else 1
    k = np.arange(K)
    p, r = k // 3, k % 3
    H = np.where(panels > 0, tau / np.maximum(panels, 1), 0.0)
    T = (p[None, :] + _GL_NODES[r][None, :]) * H[:, None]
    W = np.where(r[None, :] == 0, 2 * _GL_WEIGHTS[0], _GL_WEIGHTS[1]) * H[:, None]
    W[:, 0] = _GL_WEIGHTS[0] * H
    last = counts - 1
    rows = np.arange(tau.size)
    W[rows, last] = _GL_WEIGHTS[0] * H
    live = k[None, :] < counts[:, None]
    T = np.where(live, T, np.nan)
    W = np.where(live, W, 0.0)
    return T, W, counts


def quadrature_pass(system: FlowSystem, x, y, th, tau, integrand, out_shape, panels_per_unit=16.0,
                    chunk=None, visit=None):
    """Integrate ``integrand(ids, t, Y)`` over [0, tau_i] along each trace.

    ``integrand`` returns an array of shape (len(ids), *out_shape).  ``visit``
    (optional) receives (ids, k, t, w, Y) at every node, e.g. to cache samples.
    """
    x, y, th, tau = (np.asarray(a, float).ravel() for a in np.broadcast_arrays(x, y, th, tau))
    N = x.size
    acc = np.zeros((N,) + tuple(out_shape), complex)

    def work(sl):
        T, W, counts = lobatto_nodes(tau[sl], panels_per_unit)
        base = sl.start
        local = np.zeros((sl.stop - sl.start,) + tuple(out_shape), complex)

        def node(ids, k, Y):
            t = T[ids, k]
            w = W[ids, k]
            if integrand is not None:
                local[ids] += w.reshape((-1,) + (1,) * len(out_shape)) * integrand(ids + base, t, Y)
            if visit is not None:
                visit(ids + base, k, t, w, Y)

        ode.integrate_on_nodes(system.rhs, system.initial(x[sl], y[sl], th[sl]), T, counts, node)
        return sl, local

    for sl, local in _run(work, _chunks(N, chunk)):
        acc[sl] = local
    return acc
