"""Matrix-valued connections A = A_z dz + A_zbar dzbar on the chart disk.

All evaluation routines take flat coordinate arrays ``x, y`` (and ``th``) of
length N and return arrays of shape (N, n, n).
"""
from __future__ import annotations

import json
import pathlib

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import ConfigError, InconsistentConnectionError
from .rng import SplitMix64
from .specs import parse_call, parse_complex


def _fd_grad(fun, x, y, h=1e-3):
    """Fourth-order central differences of an array-valued function of (x, y)."""
    def d(dx, dy):
        return (-fun(x + 2 * dx, y + 2 * dy) + 8 * fun(x + dx, y + dy)
                - 8 * fun(x - dx, y - dy) + fun(x - 2 * dx, y - 2 * dy)) / (12 * h)
    return d(h, 0.0), d(0.0, h)


class MatrixConnection:
    unitary = False
    kind = "generic"

    def __init__(self, n: int, name: str = ""):
        self.n = int(n)
        self.name = name or self.kind

    def components(self, x, y):
        """Return (A_z, A_zbar)."""
        raise NotImplementedError

    def component_grads(self, x, y):
        """Return (dA_z/dx, dA_z/dy, dA_zbar/dx, dA_zbar/dy); finite differences unless overridden."""
        az_x, az_y = _fd_grad(lambda u, v: self.components(u, v)[0], x, y)
        ab_x, ab_y = _fd_grad(lambda u, v: self.components(u, v)[1], x, y)
        return az_x, az_y, ab_x, ab_y

    # -- evaluation on SM ---------------------------------------------------
    def on_sm(self, metric, x, y, th, lam=None):
        az, ab = self.components(x, y)
        if lam is None:
            lam = metric.lam(x, y)
        e = np.exp(1j * th)
        w = np.exp(-lam)
        return w[:, None, None] * (az * e[:, None, None] + ab * np.conj(e)[:, None, None])

    def vertical(self, metric, x, y, th, lam=None):
        az, ab = self.components(x, y)
        if lam is None:
            lam = metric.lam(x, y)
        e = np.exp(1j * th)
        w = 1j * np.exp(-lam)
        return w[:, None, None] * (az * e[:, None, None] - ab * np.conj(e)[:, None, None])

    def field_strength(self, x, y):
        """F_xy with F = dA + A^A = F_xy dx^dy."""
        az, ab = self.components(x, y)
        az_x, az_y, ab_x, ab_y = self.component_grads(x, y)
        ax, ay = az + ab, 1j * (az - ab)
        ay_x = 1j * (az_x - ab_x)
        ax_y = az_y + ab_y
        return ay_x - ax_y + ax @ ay - ay @ ax

    def star_curvature_fast(self, metric, x, y, lam=None):
        if lam is None:
            lam = metric.lam(x, y)
        return np.exp(-2 * lam)[:, None, None] * self.field_strength(x, y)

    def is_flat_hint(self):
        return False

    # -- derived connections -----------------------------------------------
    def neg_adjoint(self):
        return NegAdjoint(self)

    def scaled(self, s):
        return Scaled(self, s)

    def describe(self):
        return {"kind": self.kind, "name": self.name, "n": self.n, "unitary": self.unitary}


class ZeroConnection(MatrixConnection):
    unitary = True
    kind = "zero"

    def components(self, x, y):
        z = np.zeros((np.size(x), self.n, self.n), complex)
        return z, z.copy()

    def component_grads(self, x, y):
        z = np.zeros((np.size(x), self.n, self.n), complex)
        return z, z, z, z

    def is_flat_hint(self):
        return True


def small_inv(M):
    """Batched inverse; closed form for 2 x 2."""
    if M.shape[-1] != 2:
        return np.linalg.inv(M)
    a, b, c, d = M[..., 0, 0], M[..., 0, 1], M[..., 1, 0], M[..., 1, 1]
    det = a * d - b * c
    out = np.empty_like(M)
    out[..., 0, 0], out[..., 0, 1], out[..., 1, 0], out[..., 1, 1] = d / det, -b / det, -c / det, a / det
    return out


def _poly_eval(B, C):
    """sum_k B[p, k] C[k] for basis values B (P, m) and matrix coefficients C (m, n, n)."""
    return (B @ C.reshape(C.shape[0], -1)).reshape((B.shape[0],) + C.shape[1:])


def _monomials(deg):
    return [(i, d - i) for d in range(deg + 1) for i in range(d, -1, -1)]


class PolynomialConnection(MatrixConnection):
    """Components are matrix polynomials sum_k C_k x^i y^j."""

    kind = "polynomial"

    def __init__(self, coef_z, coef_zb, degree: int, unitary=False, name=""):
        coef_z, coef_zb = np.asarray(coef_z, complex), np.asarray(coef_zb, complex)
        super().__init__(coef_z.shape[-1], name)
        self.exps = _monomials(degree)
        self.cz, self.czb = coef_z, coef_zb
        self.unitary = unitary

    def _basis(self, x, y, dx=0, dy=0):
        cols = []
        for i, j in self.exps:
            if i < dx or j < dy:
                cols.append(np.zeros_like(x, dtype=float))
                continue
            cx = np.prod(np.arange(i - dx + 1, i + 1)) if dx else 1
            cy = np.prod(np.arange(j - dy + 1, j + 1)) if dy else 1
            cols.append(cx * cy * x ** (i - dx) * y ** (j - dy))
        return np.stack(cols, axis=-1)

    def components(self, x, y):
        B = self._basis(np.asarray(x, float), np.asarray(y, float))
        return _poly_eval(B, self.cz), _poly_eval(B, self.czb)

    def component_grads(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        Bx, By = self._basis(x, y, 1, 0), self._basis(x, y, 0, 1)
        e = _poly_eval
        return e(Bx, self.cz), e(By, self.cz), e(Bx, self.czb), e(By, self.czb)

    @classmethod
    def random(cls, seed: int, n: int = 2, amp: float = 0.5, degree: int = 2, unitary=False, name=""):
        rng = SplitMix64(seed)
        m = len(_monomials(degree))
        scale = amp / np.sqrt(2 * n)
        cz = scale * (rng.normal((m, n, n)) + 1j * rng.normal((m, n, n)))
        if unitary:
            czb = -np.conj(np.swapaxes(cz, -1, -2))
        else:
            czb = scale * (rng.normal((m, n, n)) + 1j * rng.normal((m, n, n)))
        return cls(cz, czb, degree, unitary=unitary, name=name)


class Scaled(MatrixConnection):
    kind = "scaled"

    def __init__(self, base: MatrixConnection, s: complex, name=""):
        super().__init__(base.n, name or f"scale:{s}:{base.name}")
        self.base, self.s = base, complex(s)
        self.unitary = base.unitary and self.s.imag == 0

    def components(self, x, y):
        az, ab = self.base.components(x, y)
        return self.s * az, self.s * ab

    def component_grads(self, x, y):
        return tuple(self.s * g for g in self.base.component_grads(x, y))

    def is_flat_hint(self):
        return self.s == 0 or (self.base.is_flat_hint() and isinstance(self.base, ZeroConnection))

    def describe(self):
        return {**super().describe(), "scale": [self.s.real, self.s.imag], "base": self.base.describe()}


class NegAdjoint(MatrixConnection):
    """The connection -A^*: components (-A_zbar^*, -A_z^*)."""

    kind = "neg_adjoint"

    def __init__(self, base: MatrixConnection):
        super().__init__(base.n, f"-({base.name})^*")
        self.base = base
        self.unitary = base.unitary

    @staticmethod
    def _h(m):
        return np.conj(np.swapaxes(m, -1, -2))

    def components(self, x, y):
        az, ab = self.base.components(x, y)
        return -self._h(ab), -self._h(az)

    def component_grads(self, x, y):
        az_x, az_y, ab_x, ab_y = self.base.component_grads(x, y)
        return -self._h(ab_x), -self._h(ab_y), -self._h(az_x), -self._h(az_y)

    def neg_adjoint(self):
        return self.base

    def is_flat_hint(self):
        return self.base.is_flat_hint()


class SumConnection(MatrixConnection):
    """A + B where B may be scalar (n=1) and is then taken times the identity."""

    kind = "sum"

    def __init__(self, a: MatrixConnection, b: MatrixConnection):
        super().__init__(a.n, f"{a.name}+{b.name}")
        if b.n not in (1, a.n):
            raise ConfigError("incompatible connection sizes")
        self.a, self.b = a, b

    def _lift(self, m):
        return m * np.eye(self.n) if m.shape[-1] == 1 and self.n > 1 else m

    def components(self, x, y):
        az, ab = self.a.components(x, y)
        bz, bb = self.b.components(x, y)
        return az + self._lift(bz), ab + self._lift(bb)

    def component_grads(self, x, y):
        return tuple(g + self._lift(h) for g, h in zip(self.a.component_grads(x, y), self.b.component_grads(x, y)))


class FiberPhaseForm(MatrixConnection):
    """Scalar 1-form c * q^{-1} X q for q = e^{i theta}; components (-c d lam, c dbar lam).

    With c = -1 this is the distinguished purely imaginary form a = -q^{-1} X q.
    """

    kind = "fiber_phase"

    def __init__(self, metric, c: complex = 1.0):
        super().__init__(1, f"{c}*q^-1Xq")
        self.metric, self.c = metric, complex(c)
        self.unitary = self.c.imag == 0

    def components(self, x, y):
        _, lx, ly = self.metric.lam_derivs(np.asarray(x, float), np.asarray(y, float))
        d = 0.5 * (lx - 1j * ly)
        db = 0.5 * (lx + 1j * ly)
        return (-self.c * d)[:, None, None], (self.c * db)[:, None, None]


def distinguished_form(metric):
    """a = -q^{-1} X q for q = e^{i theta}; purely imaginary on SM."""
    return FiberPhaseForm(metric, -1.0)


# -- gauge fields -----------------------------------------------------------

class GaugeField:
    """A smooth GL(n,C)-valued field g(x, y)."""

    def __init__(self, n):
        self.n = n

    def value(self, x, y):
        raise NotImplementedError

    def grads(self, x, y):
        return _fd_grad(self.value, x, y)


class PolynomialGauge(GaugeField):
    """g = I + eps * P(x, y) with P a random matrix polynomial (invertible for small eps)."""

    def __init__(self, seed, n=2, eps=0.3, degree=2):
        super().__init__(n)
        rng = SplitMix64(seed)
        self.exps = _monomials(degree)
        m = len(self.exps)
        self.coef = eps / np.sqrt(2 * n * m) * (rng.normal((m, n, n)) + 1j * rng.normal((m, n, n)))

    def _basis(self, x, y, dx=0, dy=0):
        return PolynomialConnection._basis(self, np.asarray(x, float), np.asarray(y, float), dx, dy)

    def value(self, x, y):
        return np.eye(self.n) + _poly_eval(self._basis(x, y), self.coef)

    def grads(self, x, y):
        return (_poly_eval(self._basis(x, y, 1, 0), self.coef),
                _poly_eval(self._basis(x, y, 0, 1), self.coef))

    def second_grads(self, x, y):
        """(g_xx, g_xy, g_yy)."""
        return tuple(_poly_eval(self._basis(x, y, a, b), self.coef) for a, b in ((2, 0), (1, 1), (0, 2)))


class UnitaryGauge(GaugeField):
    """g = exp(S(x, y)) with S a skew-Hermitian matrix polynomial."""

    def __init__(self, seed, n=2, amp=1.0, degree=2):
        super().__init__(n)
        base = PolynomialConnection.random(seed, n=n, amp=amp, degree=degree)
        self._poly = base

    def value(self, x, y):
        m, _ = self._poly.components(x, y)
        herm = 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))  # S = i * herm
        w, U = np.linalg.eigh(herm)
        return (U * np.exp(1j * w)[:, None, :]) @ np.conj(np.swapaxes(U, -1, -2))


class ProductGauge(GaugeField):
    def __init__(self, g: GaugeField, h: GaugeField):
        super().__init__(g.n)
        self.g, self.h = g, h

    def value(self, x, y):
        return self.g.value(x, y) @ self.h.value(x, y)

    def grads(self, x, y):
        g, h = self.g.value(x, y), self.h.value(x, y)
        gx, gy = self.g.grads(x, y)
        hx, hy = self.h.grads(x, y)
        return gx @ h + g @ hx, gy @ h + g @ hy


class GaugeTransformed(MatrixConnection):
    """g^{-1} dg + g^{-1} A g."""

    kind = "gauge"

    def __init__(self, base: MatrixConnection, g: GaugeField, unitary=None, name=""):
        super().__init__(base.n, name or f"gauge({base.name})")
        self.base, self.g = base, g
        self.unitary = base.unitary if unitary is None else unitary

    def components(self, x, y):
        g = self.g.value(x, y)
        gi = small_inv(g)
        gx, gy = self.g.grads(x, y)
        dz = gi @ (0.5 * (gx - 1j * gy))
        dzb = gi @ (0.5 * (gx + 1j * gy))
        if isinstance(self.base, ZeroConnection):
            return dz, dzb
        az, ab = self.base.components(x, y)
        return dz + gi @ az @ g, dzb + gi @ ab @ g

    def component_grads(self, x, y):
        if not (isinstance(self.base, ZeroConnection) and hasattr(self.g, "second_grads")):
            return super().component_grads(x, y)
        # d(g^{-1} G) = g^{-1} G' - g^{-1} g' g^{-1} G for G = dz g or dzbar g
        g = self.g.value(x, y)
        gi = small_inv(g)
        gx, gy = self.g.grads(x, y)
        gxx, gxy, gyy = self.g.second_grads(x, y)
        Gz, Gb = 0.5 * (gx - 1j * gy), 0.5 * (gx + 1j * gy)
        Gz_x, Gz_y = 0.5 * (gxx - 1j * gxy), 0.5 * (gxy - 1j * gyy)
        Gb_x, Gb_y = 0.5 * (gxx + 1j * gxy), 0.5 * (gxy + 1j * gyy)
        ix, iy = gi @ gx @ gi, gi @ gy @ gi
        return (gi @ Gz_x - ix @ Gz, gi @ Gz_y - iy @ Gz, gi @ Gb_x - ix @ Gb, gi @ Gb_y - iy @ Gb)

    def is_flat_hint(self):
        return self.base.is_flat_hint()


def gauge_transform(A: MatrixConnection, g: GaugeField, unitary=None) -> MatrixConnection:
    return GaugeTransformed(A, g, unitary=unitary)


# -- the SU(2) example --------------------------------------------------------

def smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, float)
    def psi(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out
    a, b = psi(u), psi(1 - u)
    return a / (a + b)


class SU2Example(MatrixConnection):
    """A = -(dbar F) F^{-1} dzbar for an SU(2) field F with F|_rim = diag(e^{-2i phi}, e^{2i phi}).

    F(r e^{i phi}) = D(phi) R(r) D(phi) R(r)^{-1}, D = diag(e^{-i phi}, e^{i phi}),
    R(r) = exp(-i pi (1 - s(r)) sigma_x / 2); s climbs from 0 to 1 between
    r0 and r1 (fractions of the radius), so F = I near the centre.
    """

    kind = "su2_example"
    unitary = True

    def __init__(self, radius=1.0, r0=0.05, r1=0.95):
        super().__init__(2, "su2_example")
        self.radius, self.r0, self.r1 = float(radius), r0 * radius, r1 * radius

    def F(self, x, y):
        x, y = np.asarray(x, float), np.asarray(y, float)
        r = np.hypot(x, y)
        s = smooth_step((r - self.r0) / (self.r1 - self.r0))
        e = np.where(r > 0, (x + 1j * y) / np.where(r > 0, r, 1), 1.0)
        N = x.size
        D = np.zeros((N, 2, 2), complex)
        D[:, 0, 0], D[:, 1, 1] = np.conj(e), e
        a = 0.5 * np.pi * (1 - s)
        R = np.zeros((N, 2, 2), complex)
        R[:, 0, 0] = R[:, 1, 1] = np.cos(a)
        R[:, 0, 1] = R[:, 1, 0] = -1j * np.sin(a)
        Rinv = np.conj(np.swapaxes(R, -1, -2))
        out = D @ R @ D @ Rinv
        out[r < self.r0 * 0.5] = np.eye(2)
        return out

    def dbar_F(self, x, y, h=1e-3):
        Fx, Fy = _fd_grad(self.F, np.asarray(x, float), np.asarray(y, float), h)
        return 0.5 * (Fx + 1j * Fy)

    def d_F(self, x, y, h=1e-3):
        Fx, Fy = _fd_grad(self.F, np.asarray(x, float), np.asarray(y, float), h)
        return 0.5 * (Fx - 1j * Fy)

    def components(self, x, y):
        F = self.F(x, y)
        ab = -self.dbar_F(x, y) @ np.conj(np.swapaxes(F, -1, -2))
        return np.zeros_like(ab), ab

    def h_fields(self, x, y):
        """(h_z, h_zbar) as (N, 2) vectors: h_z = F e1, h_zbar = e1."""
        F = self.F(x, y)
        hz = F[:, :, 0]
        hzb = np.zeros_like(hz)
        hzb[:, 0] = 1.0
        return hz, hzb


def su2_example(radius=1.0, n_grid=256, n_boundary=256, order=8):
    """The SU(2) connection together with its 1-form h = h_z dz + h_zbar dzbar and sup residuals.

    Returns (A, (h_z, h_zbar) callables, residuals) where residuals holds
    ``boundary_trace`` = max |h(i e^{i phi})| over the rim, and ``mu_minus_h1`` and
    ``mu_plus_h_minus1``, the sup over the grid of mu_-(h_1) and mu_+(h_{-1}) computed with
    masked finite differences.
    """
    from .grids import InteriorGrid
    from .harmonics import gk_apply
    from .metrics import Euclidean

    A = SU2Example(radius)
    metric = Euclidean(radius)
    phi = 2 * np.pi * np.arange(n_boundary) / n_boundary
    bx, by = radius * np.cos(phi), radius * np.sin(phi)
    hz, hzb = A.h_fields(bx, by)
    tangent = 1j * np.exp(1j * phi)[:, None]
    trace = hz * tangent + hzb * np.conj(tangent)
    F_rim = A.F(bx, by)
    target = np.zeros_like(F_rim)
    target[:, 0, 0], target[:, 1, 1] = np.exp(-2j * phi), np.exp(2j * phi)

    grid = InteriorGrid(n_grid, radius)
    X, Y = grid.mesh()
    gz, gzb = A.h_fields(X.ravel(), Y.ravel())
    lam = metric.lam(X, Y)[..., None]
    # on SM: h_1 = e^{-lam} h_z e^{i th}, h_{-1} = e^{-lam} h_zbar e^{-i th}
    h1 = np.exp(-lam) * gz.reshape(X.shape + (2,))
    hm1 = np.exp(-lam) * gzb.reshape(X.shape + (2,))
    r_minus = gk_apply(metric, A, grid, h1, 1, -1, order)
    r_plus = gk_apply(metric, A, grid, hm1, -1, +1, order)
    residuals = {"boundary_trace": float(np.abs(trace).max()),
                 "rim_map": float(np.abs(F_rim - target).max()),
                 "mu_minus_h1": float(np.abs(r_minus).max()),
                 "mu_plus_h_minus1": float(np.abs(r_plus).max())}
    return A, A.h_fields, residuals


# -- tables -------------------------------------------------------------------

class TabulatedConnection(MatrixConnection):
    """Components sampled on a node grid over [-radius, radius]^2, bicubic per real/imag entry.

    Array layout ``values[iy, ix, c, i, j]`` with c = 0 for A_z and 1 for A_zbar.
    """

    kind = "tabulated"

    def __init__(self, values, radius=1.0, order=3, name=""):
        values = np.asarray(values, complex)
        ny, nx, _, n, _ = values.shape
        super().__init__(n, name)
        self.radius = float(radius)
        xs, ys = np.linspace(-radius, radius, nx), np.linspace(-radius, radius, ny)
        self._spl = [[[[RectBivariateSpline(xs, ys, part(values[:, :, c, i, j]).T, kx=order, ky=order)
                        for part in (np.real, np.imag)] for j in range(n)] for i in range(n)] for c in range(2)]

    def _eval(self, x, y, dx=0, dy=0):
        x = np.clip(np.asarray(x, float), -self.radius, self.radius)
        y = np.clip(np.asarray(y, float), -self.radius, self.radius)
        out = np.empty((2, x.size, self.n, self.n), complex)
        for c in range(2):
            for i in range(self.n):
                for j in range(self.n):
                    re, im = self._spl[c][i][j]
                    out[c, :, i, j] = re.ev(x, y, dx=dx, dy=dy) + 1j * im.ev(x, y, dx=dx, dy=dy)
        return out

    def components(self, x, y):
        v = self._eval(x, y)
        return v[0], v[1]

    def component_grads(self, x, y):
        gx, gy = self._eval(x, y, 1, 0), self._eval(x, y, 0, 1)
        return gx[0], gy[0], gx[1], gy[1]

    @classmethod
    def load(cls, path, order=3):
        path = pathlib.Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        nx, ny, n, radius = int(meta["nx"]), int(meta["ny"]), int(meta["n"]), float(meta["radius"])
        raw = np.fromfile(path, dtype="<f8")
        if raw.size != ny * nx * 2 * n * n * 2:
            raise ConfigError(f"{path}: size mismatch for connection table")
        vals = raw.reshape(ny, nx, 2, n, n, 2)
        return cls(vals[..., 0] + 1j * vals[..., 1], radius, int(meta.get("order", order)), name=f"table:{path}")

    @staticmethod
    def write(path, conn: MatrixConnection, radius=1.0, nodes=65):
        path = pathlib.Path(path)
        xs = np.linspace(-radius, radius, nodes)
        X, Y = np.meshgrid(xs, xs, indexing="xy")
        az, ab = conn.components(X.ravel(), Y.ravel())
        vals = np.stack([az, ab], axis=1).reshape(nodes, nodes, 2, conn.n, conn.n)
        np.stack([vals.real, vals.imag], axis=-1).astype("<f8").tofile(path)
        path.with_suffix(".json").write_text(json.dumps({"nx": nodes, "ny": nodes, "n": conn.n, "radius": radius}))


# -- curvature and norms ------------------------------------------------------

def eval_on_sm(A, metric, x, y, th):
    return A.on_sm(metric, *map(np.atleast_1d, (x, y, th)))


def vertical_derivative(A, metric, x, y, th):
    return A.vertical(metric, *map(np.atleast_1d, (x, y, th)))


def star_curvature_frame(A, metric, x, y, th, h=1e-4):
    """X A_V + X_perp A + [A, A_V] at (x, y, th), frame derivatives by central differences."""
    from .frame import frame_coefficients
    x, y, th = map(np.atleast_1d, (np.asarray(x, float), np.asarray(y, float), np.asarray(th, float)))
    Xc, Pc, _ = frame_coefficients(metric, x, y, th)

    def deriv(fun, c):
        def at(s):
            return fun(x + s * c[0], y + s * c[1], th + s * c[2])
        return (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h)

    av = lambda u, v, w: A.vertical(metric, u, v, w)  # noqa: E731
    aa = lambda u, v, w: A.on_sm(metric, u, v, w)  # noqa: E731
    a0, v0 = aa(x, y, th), av(x, y, th)
    return deriv(av, Xc) + deriv(aa, Pc) + a0 @ v0 - v0 @ a0


def star_curvature(A, metric, x, y, rtol=1e-6):
    """Hodge star of the curvature at chart points, evaluated through the frame formula at
    theta = 0 and checked against theta = pi/3."""
    x, y = np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(y, float))
    f0 = star_curvature_frame(A, metric, x, y, np.zeros_like(x))
    f1 = star_curvature_frame(A, metric, x, y, np.full_like(x, np.pi / 3))
    scale = max(np.abs(f0).max(), 1e-8)
    if np.abs(f0 - f1).max() > rtol * scale + 1e-8:
        raise InconsistentConnectionError("star curvature depends on the fiber angle")
    return f0


def sup_norms(A, metric, n_r=24, n_phi=48, n_theta=32):
    """(alpha_A, sup |*F_A|): Frobenius-norm suprema over polar sample grids of SM and M."""
    r = metric.radius * np.linspace(0, 1, n_r)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    R, P = np.meshgrid(r, phi, indexing="ij")
    x, y = (R * np.cos(P)).ravel(), (R * np.sin(P)).ravel()
    F = A.star_curvature_fast(metric, x, y)
    sup_f = float(np.sqrt((np.abs(F) ** 2).sum(axis=(1, 2))).max())
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    X = np.repeat(x, n_theta)
    Y = np.repeat(y, n_theta)
    T = np.tile(th, x.size)
    M = A.on_sm(metric, X, Y, T)
    herm = 0.5 * (M + np.conj(np.swapaxes(M, -1, -2)))
    alpha = float(np.sqrt((np.abs(herm) ** 2).sum(axis=(1, 2))).max())
    return alpha, sup_f


# -- presets ------------------------------------------------------------------

def parse_connection(spec: str, metric=None, n_default: int = 2) -> MatrixConnection:
    """zero | zero(n) | unitary_poly(seed[, n, amp]) | generic_poly(seed[, n, amp]) |
    pure_gauge(seed[, n, eps]) | su2_example | table:<path> | scale:<complex>:<spec>"""
    spec = spec.strip()
    if spec.startswith("scale:"):
        rest = spec[len("scale:"):]
        num, _, inner = rest.partition(":")
        if not inner:
            raise ConfigError(f"scale wrapper needs an inner preset: {spec!r}")
        return Scaled(parse_connection(inner, metric, n_default), parse_complex(num), name=spec)
    if spec.startswith("table:"):
        return TabulatedConnection.load(spec[len("table:"):])
    name, args = parse_call(spec)
    try:
        if name == "zero":
            return ZeroConnection(int(args[0]) if args else 1, name=spec)
        if name in ("unitary_poly", "generic_poly"):
            seed = int(args[0]) if args else 0
            n = int(args[1]) if len(args) > 1 else n_default
            amp = float(args[2]) if len(args) > 2 else 0.5
            return PolynomialConnection.random(seed, n=n, amp=amp, unitary=(name == "unitary_poly"), name=spec)
        if name == "pure_gauge":
            seed = int(args[0]) if args else 0
            n = int(args[1]) if len(args) > 1 else n_default
            eps = float(args[2]) if len(args) > 2 else 0.3
            g = PolynomialGauge(seed, n=n, eps=eps)
            return GaugeTransformed(ZeroConnection(n), g, unitary=False, name=spec)
        if name == "su2_example":
            radius = metric.radius if metric is not None else 1.0
            return SU2Example(radius)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad arguments in connection spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown connection preset {spec!r}")
