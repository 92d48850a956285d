"""Smooth test functions on the disk with analytic gradients."""
from __future__ import annotations

import numpy as np

from .rng import SplitMix64


class Phantom:
    """Callable ``f(x, y) -> (N, n)`` with ``grad(x, y) -> (fx, fy)``."""

    n = 1

    def __call__(self, x, y):
        raise NotImplementedError

    def grad(self, x, y):
        raise NotImplementedError

    def __add__(self, other):
        return SumPhantom([self, other])

    def __mul__(self, s):
        return ScaledPhantom(self, s)

    __rmul__ = __mul__


class Gaussian(Phantom):
    """amplitude * exp(-|p - c|^2 / (2 width^2)); amplitude is a length-n vector."""

    def __init__(self, center=(0.0, 0.0), width=0.2, amplitude=(1.0,)):
        self.cx, self.cy = map(float, center)
        self.width = float(width)
        self.amp = np.atleast_1d(np.asarray(amplitude, complex))
        self.n = self.amp.size

    def _g(self, x, y):
        x, y = np.asarray(x, float).ravel(), np.asarray(y, float).ravel()
        dx, dy = x - self.cx, y - self.cy
        return dx, dy, np.exp(-(dx**2 + dy**2) / (2 * self.width**2))

    def __call__(self, x, y):
        _, _, g = self._g(x, y)
        return g[:, None] * self.amp

    def grad(self, x, y):
        dx, dy, g = self._g(x, y)
        s = -1 / self.width**2
        return (s * dx * g)[:, None] * self.amp, (s * dy * g)[:, None] * self.amp


class Bump(Phantom):
    """Compactly supported exp(1 - 1/(1 - r^2/s^2)) bump (C-infinity, value 1 at the centre)."""

    def __init__(self, center, support, amplitude):
        self.cx, self.cy = map(float, center)
        self.s = float(support)
        self.amp = np.atleast_1d(np.asarray(amplitude, complex))
        self.n = self.amp.size

    def _parts(self, x, y):
        x, y = np.asarray(x, float).ravel(), np.asarray(y, float).ravel()
        dx, dy = x - self.cx, y - self.cy
        q = (dx**2 + dy**2) / self.s**2
        inside = q < 1
        den = np.where(inside, 1 - q, 1.0)
        g = np.where(inside, np.exp(1 - 1 / den), 0.0)
        dg = np.where(inside, -g / den**2 * 2 / self.s**2, 0.0)  # d g / d(r^2) * 2
        return dx, dy, g, dg

    def __call__(self, x, y):
        _, _, g, _ = self._parts(x, y)
        return g[:, None] * self.amp

    def grad(self, x, y):
        dx, dy, _, dg = self._parts(x, y)
        return (dg * dx)[:, None] * self.amp, (dg * dy)[:, None] * self.amp


class Monomial(Phantom):
    """(z/R)^m for m >= 0 and (conj(z)/R)^|m| for m < 0, placed in one channel of C^n."""

    def __init__(self, m, channel=0, n=1, radius=1.0):
        self.m, self.radius, self.n = int(m), float(radius), int(n)
        self.amp = np.zeros(self.n, complex)
        self.amp[channel] = 1.0

    def _z(self, x, y):
        x, y = np.asarray(x, float).ravel(), np.asarray(y, float).ravel()
        sign = 1 if self.m >= 0 else -1
        return (x + 1j * sign * y) / self.radius, sign

    def __call__(self, x, y):
        z, _ = self._z(x, y)
        return (z ** abs(self.m))[:, None] * self.amp

    def grad(self, x, y):
        z, sign = self._z(x, y)
        k = abs(self.m)
        dz = k * z ** (k - 1) / self.radius if k else np.zeros_like(z)
        return dz[:, None] * self.amp, (1j * sign * dz)[:, None] * self.amp


class SumPhantom(Phantom):
    def __init__(self, parts):
        self.parts = list(parts)
        self.n = self.parts[0].n

    def __call__(self, x, y):
        return sum(p(x, y) for p in self.parts)

    def grad(self, x, y):
        gs = [p.grad(x, y) for p in self.parts]
        return sum(g[0] for g in gs), sum(g[1] for g in gs)


class ScaledPhantom(Phantom):
    def __init__(self, base, s):
        self.base, self.s, self.n = base, s, base.n

    def __call__(self, x, y):
        return self.s * self.base(x, y)

    def grad(self, x, y):
        gx, gy = self.base.grad(x, y)
        return self.s * gx, self.s * gy


class ZeroPhantom(Phantom):
    def __init__(self, n=1):
        self.n = n

    def __call__(self, x, y):
        return np.zeros((np.size(x), self.n), complex)

    def grad(self, x, y):
        z = self(x, y)
        return z, z.copy()


def random_bumps(seed, count=4, n=1, radius=1.0, support=(0.2, 0.4), inset=0.05, complex_amp=True):
    """Seeded sum of bumps whose supports stay inside the disk of the given radius."""
    rng = SplitMix64(seed)
    parts = []
    for _ in range(count):
        s = float(rng.uniform((), support[0] * radius, support[1] * radius))
        rmax = radius - s - inset * radius
        r = rmax * np.sqrt(float(rng.uniform((), 0, 1)))
        phi = float(rng.uniform((), 0, 2 * np.pi))
        amp = rng.uniform((n,), -1, 1)
        if complex_amp:
            amp = amp + 1j * rng.uniform((n,), -1, 1)
        parts.append(Bump((r * np.cos(phi), r * np.sin(phi)), s, amp))
    return SumPhantom(parts)


def as_function(f):
    """Accept a Phantom, an InteriorField or any object with __call__/grad."""
    from .grids import InteriorField
    if isinstance(f, InteriorField):
        return f.interpolant()
    return f
