"""Conformal factors lam(x, y) for metrics e^{2 lam}(dx^2 + dy^2) on a chart disk."""
from __future__ import annotations

import json
import pathlib

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import ConfigError, DomainError
from .specs import parse_call


class IsothermalMetric:
    """Base class.  Subclasses supply lam, its gradient, its Laplacian and the Laplacian's gradient."""

    kind = "generic"

    def __init__(self, radius: float = 1.0, name: str = ""):
        if not 0 < radius <= 1:
            raise ConfigError(f"chart radius must lie in (0, 1], got {radius}")
        self.radius = float(radius)
        self.name = name or self.kind

    # -- to be provided by subclasses --------------------------------------
    def lam_derivs(self, x, y):
        """Return (lam, lam_x, lam_y)."""
        raise NotImplementedError

    def lap_lam(self, x, y):
        raise NotImplementedError

    def lap_lam_grad(self, x, y):
        raise NotImplementedError

    # -- derived quantities --------------------------------------------------
    def lam(self, x, y):
        return self.lam_derivs(x, y)[0]

    def curvature(self, x, y):
        lam = self.lam(x, y)
        return -np.exp(-2 * lam) * self.lap_lam(x, y)

    def curvature_grad(self, x, y):
        lam, lx, ly = self.lam_derivs(x, y)
        L = self.lap_lam(x, y)
        Lx, Ly = self.lap_lam_grad(x, y)
        e = np.exp(-2 * lam)
        return e * (2 * lx * L - Lx), e * (2 * ly * L - Ly)

    def check_domain(self, x, y, slack=1e-9):
        r = np.hypot(np.asarray(x, float), np.asarray(y, float))
        if np.any(r > self.radius * (1 + slack)):
            raise DomainError(f"point outside the closed disk of radius {self.radius}")

    def describe(self):
        return {"kind": self.kind, "name": self.name, "radius": self.radius}


class Euclidean(IsothermalMetric):
    kind = "euclidean"

    def lam_derivs(self, x, y):
        z = np.zeros(np.broadcast(x, y).shape)
        return z, z, z

    def lap_lam(self, x, y):
        return np.zeros(np.broadcast(x, y).shape)

    def lap_lam_grad(self, x, y):
        z = np.zeros(np.broadcast(x, y).shape)
        return z, z


class ConstantCurvature(IsothermalMetric):
    """lam = ln(2 / (1 + kappa r^2)), Gaussian curvature kappa everywhere."""

    kind = "constant_curvature"

    def __init__(self, kappa: float, radius: float = 1.0, name: str = ""):
        super().__init__(radius, name)
        self.kappa = float(kappa)
        if self.kappa < 0 and radius >= 1 / np.sqrt(-self.kappa):
            raise ConfigError("hyperbolic chart radius must be below 1/sqrt(|kappa|)")

    def lam_derivs(self, x, y):
        k = self.kappa
        d = 1 + k * (x * x + y * y)
        return np.log(2 / d), -2 * k * x / d, -2 * k * y / d

    def lap_lam(self, x, y):
        d = 1 + self.kappa * (x * x + y * y)
        return -4 * self.kappa / d**2

    def lap_lam_grad(self, x, y):
        k = self.kappa
        d = 1 + k * (x * x + y * y)
        c = 16 * k * k / d**3
        return c * x, c * y

    def describe(self):
        return {**super().describe(), "kappa": self.kappa}


class GaussianBump(IsothermalMetric):
    """Base metric plus an additive Gaussian bump amp*exp(-|p - p0|^2 / (2 sigma^2)) in lam."""

    kind = "perturbed"

    def __init__(self, base: IsothermalMetric, amp: float, sigma: float, x0: float = 0.0, y0: float = 0.0,
                 name: str = ""):
        super().__init__(base.radius, name)
        self.base = base
        self.amp, self.sigma, self.x0, self.y0 = float(amp), float(sigma), float(x0), float(y0)

    def _g(self, x, y):
        u, v = x - self.x0, y - self.y0
        s2 = self.sigma**2
        return u, v, u * u + v * v, s2, self.amp * np.exp(-(u * u + v * v) / (2 * s2))

    def lam_derivs(self, x, y):
        lam, lx, ly = self.base.lam_derivs(x, y)
        u, v, _, s2, ag = self._g(x, y)
        return lam + ag, lx - ag * u / s2, ly - ag * v / s2

    def lap_lam(self, x, y):
        u, v, rho2, s2, ag = self._g(x, y)
        return self.base.lap_lam(x, y) + ag * (rho2 / s2**2 - 2 / s2)

    def lap_lam_grad(self, x, y):
        bx, by = self.base.lap_lam_grad(x, y)
        u, v, rho2, s2, ag = self._g(x, y)
        c = ag * (4 / s2**2 - rho2 / s2**3)
        return bx + c * u, by + c * v

    def describe(self):
        return {**super().describe(), "base": self.base.describe(), "amp": self.amp, "sigma": self.sigma,
                "center": [self.x0, self.y0]}


class Tabulated(IsothermalMetric):
    """lam sampled on a square node grid over [-radius, radius]^2, spline-interpolated.

    ``values[iy, ix]`` (row-major, rows along y).  Points outside the table are
    clamped onto it, which only matters for integrator stages that overshoot
    the rim.
    """

    kind = "tabulated"

    def __init__(self, values, radius: float = 1.0, order: int = 3, name: str = ""):
        super().__init__(radius, name)
        values = np.asarray(values, dtype=float)
        ny, nx = values.shape
        self.order = int(order)
        self.xs = np.linspace(-radius, radius, nx)
        self.ys = np.linspace(-radius, radius, ny)
        self._spl = RectBivariateSpline(self.xs, self.ys, values.T, kx=self.order, ky=self.order)

    def _clamp(self, x, y):
        x = np.clip(np.asarray(x, float), -self.radius, self.radius)
        y = np.clip(np.asarray(y, float), -self.radius, self.radius)
        return x, y

    def _ev(self, x, y, dx, dy):
        shape = np.broadcast(x, y).shape
        x, y = np.broadcast_to(x, shape).ravel(), np.broadcast_to(y, shape).ravel()
        return self._spl.ev(x, y, dx=dx, dy=dy).reshape(shape)

    def lam_derivs(self, x, y):
        x, y = self._clamp(x, y)
        return self._ev(x, y, 0, 0), self._ev(x, y, 1, 0), self._ev(x, y, 0, 1)

    def lap_lam(self, x, y):
        x, y = self._clamp(x, y)
        return self._ev(x, y, 2, 0) + self._ev(x, y, 0, 2)

    def lap_lam_grad(self, x, y):
        x, y = self._clamp(x, y)
        return (self._ev(x, y, 3, 0) + self._ev(x, y, 1, 2),
                self._ev(x, y, 2, 1) + self._ev(x, y, 0, 3))

    @classmethod
    def load(cls, path, order: int = 3):
        path = pathlib.Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        nx, ny, radius = int(meta["nx"]), int(meta["ny"]), float(meta["radius"])
        data = np.fromfile(path, dtype="<f8")
        if data.size != nx * ny:
            raise ConfigError(f"{path}: expected {nx * ny} values, found {data.size}")
        return cls(data.reshape(ny, nx), radius, int(meta.get("order", order)), name=f"table:{path}")

    def save(self, path):
        path = pathlib.Path(path)
        vals = self._spl(self.xs, self.ys).T
        np.asarray(vals, dtype="<f8").tofile(path)
        meta = {"nx": self.xs.size, "ny": self.ys.size, "radius": self.radius, "order": self.order}
        path.with_suffix(".json").write_text(json.dumps(meta))


def tabulate(metric: IsothermalMetric, n: int = 129, order: int = 5) -> Tabulated:
    """Sample an analytic metric onto a table (used for tests and for writing table files)."""
    xs = np.linspace(-metric.radius, metric.radius, n)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    return Tabulated(metric.lam(X, Y), metric.radius, order, name=f"table({metric.name})")


def parse_metric(spec: str) -> IsothermalMetric:
    """Build a metric from its preset string.

    euclidean | euclidean(R) | sphere_cap(kappa, R) | hyperbolic(kappa, R) |
    perturbed(kappa, amp, sigma, x0, y0, R) | table:<path>
    """
    spec = spec.strip()
    if spec.startswith("table:"):
        return Tabulated.load(spec[len("table:"):])
    name, args = parse_call(spec)
    try:
        if name == "euclidean":
            return Euclidean(*(float(a) for a in args), name=spec)
        if name == "sphere_cap":
            kappa, R = (float(a) for a in args)
            if kappa <= 0:
                raise ConfigError("sphere_cap needs kappa > 0")
            return ConstantCurvature(kappa, R, name=spec)
        if name == "hyperbolic":
            kappa, R = (float(a) for a in args)
            return ConstantCurvature(-abs(kappa), R, name=spec)
        if name == "perturbed":
            kappa, amp, sigma, x0, y0, R = (float(a) for a in args)
            base = Euclidean(R) if kappa == 0 else ConstantCurvature(kappa, R)
            return GaussianBump(base, amp, sigma, x0, y0, name=spec)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad arguments in metric spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown metric preset {spec!r}")
