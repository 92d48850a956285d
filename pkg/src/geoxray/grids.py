"""Sampling grids and sampled fields: the masked interior disk grid, the fan-beam grid on
the boundary of SM, and interpolation on both."""
from __future__ import annotations

import json
import pathlib
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.interpolate import RectBivariateSpline


# -- interior -----------------------------------------------------------------

@dataclass(frozen=True)
class InteriorGrid:
    """Cell-centred n x n grid on [-R, R]^2; nodes strictly inside the disk form the mask.

    Arrays are indexed [ix, iy].
    """

    n: int
    radius: float = 1.0

    @property
    def h(self):
        return 2 * self.radius / self.n

    @property
    def coords(self):
        return -self.radius + (np.arange(self.n) + 0.5) * self.h

    def mesh(self):
        c = self.coords
        return np.meshgrid(c, c, indexing="ij")

    @property
    def mask(self):
        X, Y = self.mesh()
        return X**2 + Y**2 < self.radius**2

    def points(self):
        """Flat (x, y) of the masked nodes, in C order."""
        X, Y = self.mesh()
        m = self.mask
        return X[m], Y[m]

    def spec(self):
        return {"type": "interior", "n": self.n, "radius": self.radius}


class InteriorField:
    """C^n-valued samples on an InteriorGrid; values outside the mask are zero."""

    def __init__(self, grid: InteriorGrid, values):
        values = np.asarray(values, complex)
        if values.ndim == 2:
            values = values[..., None]
        self.grid = grid
        self.values = np.where(grid.mask[..., None], values, 0)

    @property
    def channels(self):
        return self.values.shape[-1]

    @classmethod
    def from_function(cls, grid, fun):
        """Sample ``fun(x, y) -> (N, n)`` on the masked nodes."""
        x, y = grid.points()
        vals = np.asarray(fun(x, y), complex)
        if vals.ndim == 1:
            vals = vals[:, None]
        out = np.zeros((grid.n, grid.n, vals.shape[1]), complex)
        out[grid.mask] = vals
        return cls(grid, out)

    @classmethod
    def from_masked(cls, grid, vals):
        vals = np.asarray(vals, complex)
        if vals.ndim == 1:
            vals = vals[:, None]
        out = np.zeros((grid.n, grid.n, vals.shape[1]), complex)
        out[grid.mask] = vals
        return cls(grid, out)

    def masked(self):
        return self.values[self.grid.mask]

    def __add__(self, other):
        return InteriorField(self.grid, self.values + other.values)

    def __sub__(self, other):
        return InteriorField(self.grid, self.values - other.values)

    def __mul__(self, s):
        return InteriorField(self.grid, self.values * s)

    __rmul__ = __mul__

    def interpolant(self):
        return GridInterpolant(self)


def _extrapolation_weights(grid: InteriorGrid, band=3.0, reach=4.0, degree=3):
    """Sparse rows mapping inside samples to a band of outside nodes by local least-squares
    polynomial fits; cached per grid."""
    key = (grid, band, reach, degree)
    if key in _EXTRAP_CACHE:
        return _EXTRAP_CACHE[key]
    mask = grid.mask
    X, Y = grid.mesh()
    h = grid.h
    dist = np.hypot(X, Y) - grid.radius
    targets = np.argwhere(~mask & (dist < band * h))
    inside = np.argwhere(mask)
    powers = [(a, b) for a in range(degree + 1) for b in range(degree + 1 - a)]
    rows, cols, vals = [], [], []
    r = int(np.ceil(reach))
    lin = np.ravel_multi_index(inside.T, mask.shape)
    pos = -np.ones(mask.size, int)
    pos[lin] = np.arange(lin.size)
    for t, (i, j) in enumerate(targets):
        lo_i, hi_i = max(i - r, 0), min(i + r + 1, grid.n)
        lo_j, hi_j = max(j - r, 0), min(j + r + 1, grid.n)
        ii, jj = np.mgrid[lo_i:hi_i, lo_j:hi_j]
        sel = mask[ii, jj] & ((ii - i) ** 2 + (jj - j) ** 2 <= reach**2)
        di, dj = (ii[sel] - i).astype(float), (jj[sel] - j).astype(float)
        V = np.stack([di**a * dj**b for a, b in powers], axis=1)
        # value at the target is the constant coefficient: first row of pinv
        w = np.linalg.pinv(V)[0]
        rows.append(np.full(w.size, t))
        cols.append(pos[np.ravel_multi_index((ii[sel], jj[sel]), mask.shape)])
        vals.append(w)
    out = (targets, np.concatenate(rows) if rows else np.zeros(0, int),
           np.concatenate(cols) if cols else np.zeros(0, int), np.concatenate(vals) if vals else np.zeros(0))
    _EXTRAP_CACHE[key] = out
    return out


_EXTRAP_CACHE: dict = {}


def nearest_inside(grid: InteriorGrid, values):
    """Copy the nearest inside value to every outside node."""
    _, (ii, jj) = ndimage.distance_transform_edt(~grid.mask, return_indices=True)
    return values[ii, jj]


def fill_outside(grid: InteriorGrid, values):
    """Extend inside samples past the rim: cubic least-squares extrapolation on a band of
    outside nodes, then nearest-value copy beyond it (for spline fitting near the rim)."""
    from scipy.sparse import csr_matrix
    mask = grid.mask
    targets, rows, cols, w = _extrapolation_weights(grid)
    out = np.array(values, copy=True)
    if targets.size:
        M = csr_matrix((w, (rows, cols)), shape=(len(targets), int(mask.sum())))
        inner = out[mask]
        out[targets[:, 0], targets[:, 1]] = (M @ inner.reshape(inner.shape[0], -1)).reshape(
            (len(targets),) + inner.shape[1:])
    known = mask.copy()
    known[targets[:, 0], targets[:, 1]] = True
    _, (ii, jj) = ndimage.distance_transform_edt(~known, return_indices=True)
    return out[ii, jj]


class GridInterpolant:
    """Bicubic spline interpolation of an InteriorField, with gradients."""

    def __init__(self, field: InteriorField):
        g = field.grid
        c = g.coords
        vals = fill_outside(g, field.values)
        self.n = vals.shape[-1]
        self.radius = g.radius
        self.lo, self.hi = c[0], c[-1]
        self._spl = [(RectBivariateSpline(c, c, vals[..., k].real), RectBivariateSpline(c, c, vals[..., k].imag))
                     for k in range(self.n)]

    def _ev(self, x, y, dx, dy):
        x = np.clip(np.asarray(x, float), self.lo, self.hi)
        y = np.clip(np.asarray(y, float), self.lo, self.hi)
        out = np.empty((x.size, self.n), complex)
        for k, (re, im) in enumerate(self._spl):
            out[:, k] = re.ev(x, y, dx=dx, dy=dy) + 1j * im.ev(x, y, dx=dx, dy=dy)
        return out

    def __call__(self, x, y):
        return self._ev(x, y, 0, 0)

    def grad(self, x, y):
        return self._ev(x, y, 1, 0), self._ev(x, y, 0, 1)


# -- sphere bundle samples ----------------------------------------------------

class SphereBundleField:
    """Samples on masked interior nodes times a uniform fiber grid th_k = 2 pi k / n_theta.

    ``values`` has shape (n_nodes, n_theta, n) with nodes in InteriorGrid.points() order.
    """

    def __init__(self, grid: InteriorGrid, n_theta: int, values):
        self.grid, self.n_theta = grid, int(n_theta)
        self.values = np.asarray(values, complex)

    @property
    def thetas(self):
        return 2 * np.pi * np.arange(self.n_theta) / self.n_theta


# -- boundary -----------------------------------------------------------------

@dataclass(frozen=True)
class FanBeamGrid:
    """Boundary points R(cos b, sin b), b = 2 pi i / n_beta; directions th = b + w with
    w_j = 2 pi (j + 1/2) / n_omega measured from the outward normal.  Inward half:
    cos w < 0, i.e. j in [n_omega/4, 3 n_omega/4)."""

    n_beta: int
    n_omega: int
    radius: float = 1.0

    def __post_init__(self):
        if self.n_omega % 4:
            raise ValueError("n_omega must be divisible by 4")

    @property
    def d_beta(self):
        return 2 * np.pi / self.n_beta

    @property
    def d_omega(self):
        return 2 * np.pi / self.n_omega

    @property
    def beta(self):
        return self.d_beta * np.arange(self.n_beta)

    @property
    def omega(self):
        return self.d_omega * (np.arange(self.n_omega) + 0.5)

    @property
    def plus_slice(self):
        return slice(self.n_omega // 4, 3 * self.n_omega // 4)

    @property
    def plus_mask(self):
        m = np.zeros(self.n_omega, bool)
        m[self.plus_slice] = True
        return m

    def mu(self):
        """-cos(omega) on the full grid, shape (n_beta, n_omega)."""
        return np.broadcast_to(-np.cos(self.omega), (self.n_beta, self.n_omega))

    def plus_points(self):
        """(beta, omega) of the inward nodes, flattened in C order."""
        B, W = np.meshgrid(self.beta, self.omega[self.plus_slice], indexing="ij")
        return B.ravel(), W.ravel()

    def minus_points(self):
        idx = self.minus_indices()
        B, W = np.meshgrid(self.beta, self.omega[idx], indexing="ij")
        return B.ravel(), W.ravel()

    def minus_indices(self):
        q = self.n_omega // 4
        return (np.arange(3 * q, 5 * q)) % self.n_omega

    def phase(self, beta, omega):
        """Chart position and absolute angle of boundary phase points."""
        return self.radius * np.cos(beta), self.radius * np.sin(beta), beta + omega

    def spec(self):
        return {"type": "fan_beam", "n_beta": self.n_beta, "n_omega": self.n_omega, "radius": self.radius}


class BoundaryField:
    """Samples on the full fan-beam grid, shape (n_beta, n_omega, *channels).

    Fields living on the inward half are zero on the outward nodes."""

    def __init__(self, grid: FanBeamGrid, values, support="plus"):
        self.grid = grid
        self.values = np.asarray(values, complex)
        self.support = support

    @classmethod
    def zeros(cls, grid, channels=(1,), support="plus"):
        return cls(grid, np.zeros((grid.n_beta, grid.n_omega) + tuple(channels), complex), support)

    @classmethod
    def from_plus(cls, grid, vals):
        vals = np.asarray(vals, complex)
        half = (grid.n_beta, grid.n_omega // 2)
        extra = vals.shape[2:] if vals.shape[:2] == half else vals.shape[1:]
        out = np.zeros((grid.n_beta, grid.n_omega) + extra, complex)
        out[:, grid.plus_slice] = vals.reshape(half + extra)
        return cls(grid, out, "plus")

    def plus(self):
        return self.values[:, self.grid.plus_slice]

    def restrict_plus(self):
        out = np.zeros_like(self.values)
        out[:, self.grid.plus_slice] = self.plus()
        return BoundaryField(self.grid, out, "plus")

    def __add__(self, o):
        return BoundaryField(self.grid, self.values + o.values, self.support)

    def __sub__(self, o):
        return BoundaryField(self.grid, self.values - o.values, self.support)

    def __mul__(self, s):
        return BoundaryField(self.grid, self.values * s, self.support)

    __rmul__ = __mul__


def _lagrange4(u):
    """Cubic Lagrange weights at offset u relative to nodes 0..3 (any real u)."""
    return np.stack([-(u - 1) * (u - 2) * (u - 3) / 6, u * (u - 2) * (u - 3) / 2,
                     -u * (u - 1) * (u - 3) / 2, u * (u - 1) * (u - 2) / 6], axis=-1)


def interpolate_boundary(field_values, grid: FanBeamGrid, beta, omega, window=None):
    """Tensor cubic Lagrange interpolation on the fan-beam grid.

    Periodic in beta.  In omega either periodic over the full circle
    (``window=None``) or restricted to a contiguous window of n_omega/2 nodes
    starting at index ``window`` (mod n_omega), with one-sided stencils at the
    window ends and extrapolation beyond them.
    """
    vals = np.asarray(field_values)
    nb, nw = grid.n_beta, grid.n_omega
    beta = np.asarray(beta, float).ravel()
    omega = np.asarray(omega, float).ravel()
    ub = np.mod(beta, 2 * np.pi) / grid.d_beta
    ib = np.floor(ub).astype(int) - 1
    wb = _lagrange4(ub - ib)
    ibs = (ib[:, None] + np.arange(4)) % nb

    if window is None:
        uw = np.mod(omega, 2 * np.pi) / grid.d_omega - 0.5
        iw = np.floor(uw).astype(int) - 1
        ww = _lagrange4(uw - iw)
        iws = (iw[:, None] + np.arange(4)) % nw
    else:
        half = nw // 2
        start_angle = grid.d_omega * (window + 0.5)
        rel = np.mod(omega - start_angle + np.pi / 2, 2 * np.pi) - np.pi / 2  # centred on the window
        uw = rel / grid.d_omega
        iw = np.clip(np.floor(uw).astype(int) - 1, 0, half - 4)
        ww = _lagrange4(uw - iw)
        iws = (window + iw[:, None] + np.arange(4)) % nw

    out = 0
    for a in range(4):
        for b in range(4):
            out = out + (wb[:, a] * ww[:, b]).reshape((-1,) + (1,) * (vals.ndim - 2)) * vals[ibs[:, a], iws[:, b]]
    return out


def save_array(path, values, meta: dict):
    """Little-endian float64, complex interleaved (re, im), row-major, with a JSON sidecar."""
    path = pathlib.Path(path)
    values = np.asarray(values)
    if np.iscomplexobj(values):
        raw = np.stack([values.real, values.imag], axis=-1)
        meta = {**meta, "complex": True}
    else:
        raw = values
        meta = {**meta, "complex": False}
    meta = {**meta, "shape": list(values.shape), "dtype": "<f8"}
    np.ascontiguousarray(raw, dtype="<f8").tofile(path)
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def load_array(path):
    path = pathlib.Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    raw = np.fromfile(path, dtype="<f8")
    shape = tuple(meta["shape"])
    if meta.get("complex"):
        raw = raw.reshape(shape + (2,))
        return raw[..., 0] + 1j * raw[..., 1], meta
    return raw.reshape(shape), meta
