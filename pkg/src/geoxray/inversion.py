"""Reconstruction: boundary filter, filtered backprojection, the error operators
W_A and W_{A,perp}, Neumann / Krylov solvers, the a-priori norm bound and a lambda sweep."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, gmres

from .boundary import ScatteringTables, extend_Q, fold_B, hilbert_boundary, interp_full
from .connection import ZeroConnection, sup_norms
from .errors import ConjugatePointError, DivergenceError
from .flow import FlowSystem, TraceOptions, quadrature_pass, trace_to_exit
from .grids import BoundaryField, FanBeamGrid, InteriorField, InteriorGrid, _lagrange4, nearest_inside
from .harmonics import apply_Xperp, apply_connection, fiber_average
from .phantoms import as_function
from .rng import SplitMix64
from .transport import transport_solve
from .xray import _trivial, adjoint_I0, adjoint_Iperp, forward_I0, norm_M, pairing_M, partner, perp_integrand


# -- plan ---------------------------------------------------------------------------

class FilterPlan:
    """Everything the filter, backprojection and W operators share for one (metric, A, grids)."""

    def __init__(self, metric, A, fan: FanBeamGrid, interior: InteriorGrid, *, n_theta=None,
                 opts=TraceOptions(), strategy="fd", taper_nodes=0, w_theta=64, w_panels_per_unit=6.0):
        if abs(fan.radius - metric.radius) > 1e-12 or abs(interior.radius - metric.radius) > 1e-12:
            raise ValueError("grid radii must match the metric radius")
        self.metric, self.A, self.fan, self.interior = metric, A, fan, interior
        self.n_theta = n_theta or max(32, fan.n_omega // 2)
        self.opts, self.strategy, self.taper_nodes = opts, strategy, taper_nodes
        self.w_theta, self.w_ppu = w_theta, w_panels_per_unit
        self._tables = None
        self._kernels = {}

    @property
    def n(self):
        return 1 if self.A is None else self.A.n

    @property
    def tables(self) -> ScatteringTables:
        if self._tables is None:
            self._tables = ScatteringTables(self.metric, self.fan, self.A, self.opts)
        return self._tables

    def kernel(self, which="A"):
        """Cached W kernel for W_A ('A'), W_{A,perp} ('perp') or their adjoint partners ('A*', 'perp*')."""
        if which not in self._kernels:
            if which == "A":
                kc = KernelCache(self.metric, self.A, self.interior, "A", self.w_theta, self.w_ppu, self.opts)
            elif which == "perp":
                kc = KernelCache(self.metric, self.A, self.interior, "perp", self.w_theta, self.w_ppu, self.opts)
            elif which == "A*":   # (W_A)^* = W_{-A*,perp}
                kc = KernelCache(self.metric, partner(self.A), self.interior, "perp", self.w_theta, self.w_ppu,
                                 self.opts)
            elif which == "perp*":  # (W_{A,perp})^* = W_{-A*}
                kc = KernelCache(self.metric, partner(self.A), self.interior, "A", self.w_theta, self.w_ppu,
                                 self.opts)
            else:
                raise ValueError(which)
            self._kernels[which] = kc
        return self._kernels[which]


# -- filter and backprojection ---------------------------------------------------------

def filter_stage(d: BoundaryField, plan: FilterPlan) -> BoundaryField:
    """h = B_{A,+} H Q_{A,-} d."""
    q = extend_Q(d, plan.tables, -1, plan.taper_nodes)
    return fold_B(hilbert_boundary(q, "full"), plan.tables, +1)


def noconnection_filter(d: BoundaryField, tables: ScatteringTables) -> BoundaryField:
    """The A = 0 filter written out directly: odd extension across the scattering
    relation, a dense circulant Hilbert matrix per boundary point, then the even fold."""
    g = d.grid
    nw = g.n_omega
    vals = d.values.reshape(g.n_beta, nw, -1)
    full = np.zeros_like(vals)
    lo, hi = nw // 4, 3 * nw // 4
    full[:, lo:hi] = vals[:, lo:hi]
    # outward node q = (i, (3nw/4 + j) mod nw) takes -d(alpha(q)); alpha(q) is given by the inward tables
    bq, wq = tables.beta_exit, np.mod(tables.omega_exit + np.pi, 2 * np.pi)
    src = BoundaryField(g, full.copy())
    ext = interp_full_window(src, bq, wq, lo)
    for j in range(nw // 2):
        full[:, (3 * nw // 4 + j) % nw] = -ext[:, j]
    # Hilbert matrix: (1/N) sum_k -i sgn(k) e^{i k (w_a - w_b)}, Nyquist dropped
    k = np.arange(-(nw // 2) + 1, nw // 2)
    diff = (np.arange(nw)[:, None] - np.arange(nw)[None, :]) * (2 * np.pi / nw)
    Hm = (np.exp(1j * diff[..., None] * k) * (-1j * np.sign(k))).sum(axis=-1) / nw
    hv = np.einsum("ab,ibc->iac", Hm, full)
    hf = BoundaryField(g, hv)
    back = interp_full(hf, tables.beta_exit, tables.omega_exit)
    out = hv[:, lo:hi] + back.reshape(hv[:, lo:hi].shape)
    return BoundaryField.from_plus(g, out.reshape((g.n_beta, nw // 2) + d.values.shape[2:]))


def interp_full_window(h: BoundaryField, beta, omega, window):
    from .grids import interpolate_boundary
    out = interpolate_boundary(h.values, h.grid, beta, omega, window=window)
    return out.reshape(np.shape(beta) + h.values.shape[2:])


def fbp_I0(d: BoundaryField, plan: FilterPlan, h: BoundaryField | None = None) -> InteriorField:
    """r = f + W_A^2 f from d = I_{A,0} f, i.e. (1/8 pi) I_{-A*,perp}^* of the filtered data."""
    h = filter_stage(d, plan) if h is None else h
    return adjoint_Iperp(plan.metric, partner(plan.A), h, plan.interior, plan.n_theta, plan.strategy,
                         plan.opts) * (1 / (8 * np.pi))


def fbp_Iperp(d: BoundaryField, plan: FilterPlan, h: BoundaryField | None = None) -> InteriorField:
    """r = f + W_{A,perp}^2 f from d = I_{A,perp} f, i.e. -(1/8 pi) I_{-A*,0}^* of the filtered data."""
    h = filter_stage(d, plan) if h is None else h
    return adjoint_I0(plan.metric, partner(plan.A), h, plan.interior, plan.n_theta,
                      plan.opts) * (-1 / (8 * np.pi))


def extended_Iperp_preimage(d: BoundaryField, plan: FilterPlan, trace_modes=8, refine=None):
    """Function f, not required to vanish at the rim, with I_{A,perp} f close to d.

    f = f0 + sum c_k E_k where the E_k are monomial lifts of boundary Fourier modes and
    f0 = invert(d - sum c_k I_perp E_k) by filtered backprojection (then ``refine``, if given).
    The c_k minimise the mu-weighted misfit of the re-forwarded data.  Returns (f, coefficients).
    """
    from .boundary import mu_weights
    from .phantoms import Monomial
    from .xray import forward_Iperp

    metric, grid, fan = plan.metric, plan.interior, plan.fan
    n = d.plus().shape[-1]
    invert = (lambda e: fbp_Iperp(e, plan)) if refine is None else (lambda e: refine(fbp_Iperp(e, plan)))

    def misfit(e):
        # (I_perp o invert - Id) e, as a flat mu-weighted vector
        back = forward_Iperp(metric, plan.A, invert(e), fan, plan.opts, boundary_tol=np.inf)
        return ((back.plus() - e.plus()) * wt).ravel()

    wt = np.sqrt(mu_weights(metric, fan))[..., None]
    lifts, cols = [], []
    for m in range(-trace_modes, trace_modes + 1):
        for c in range(n):
            E = Monomial(m, c, n, grid.radius)
            dm = forward_Iperp(metric, plan.A, E, fan, plan.opts, boundary_tol=np.inf)
            lifts.append((E, dm))
            cols.append(misfit(dm))
    G = np.stack(cols, axis=1)
    coef = np.linalg.lstsq(G, misfit(d), rcond=1e-10)[0]
    rest = d
    for ck, (_, dm) in zip(coef, lifts):
        rest = rest - dm * ck
    f = invert(rest)
    for ck, (E, _) in zip(coef, lifts):
        f = f + InteriorField.from_function(grid, E) * ck
    return f, coef


def range_check(w: BoundaryField, plan: FilterPlan, tables: ScatteringTables, solver="none", tol=1e-8,
                trace_modes=8):
    """For both parities: the factorisation of P_{A,+-} w through composed transforms, and the closed
    loop that inverts P_{A,+-} w and re-forwards it.  Returns {parity: {norm, factorization_rel,
    range_residual}} with relative mu-norms."""
    from .boundary import norm_mu, range_P
    from .xray import forward_Iperp

    metric, A, fan, grid = plan.metric, plan.A, plan.fan, plan.interior
    B = partner(A)
    refine_for = {"A": None, "perp": None}
    if solver == "krylov":
        refine_for = {k: (lambda r, k=k: krylov_solve(r, plan, k, rtol=tol)[0]) for k in refine_for}
    elif solver == "neumann":
        refine_for = {k: (lambda r, k=k: neumann_solve(r, plan, k, tol=tol).solution) for k in refine_for}
    out = {}
    # P_- w = -(1/2 pi) I_{A,0} I*_{-A*,perp} w ;  P_+ w = (1/2 pi) I_{A,perp} I*_{-A*,0} w
    p = range_P(w, tables, "-")
    comp = forward_I0(metric, A, adjoint_Iperp(metric, B, w, grid, plan.n_theta, opts=plan.opts), fan,
                      plan.opts) * (-1 / (2 * np.pi))
    fhat = fbp_I0(p, plan)
    if refine_for["A"] is not None:
        fhat = refine_for["A"](fhat)
    again = forward_I0(metric, A, fhat, fan, plan.opts)
    pn = norm_mu(metric, p)
    out["minus"] = {"norm": pn, "factorization_rel": norm_mu(metric, p - comp) / max(pn, 1e-300),
                    "range_residual": norm_mu(metric, again - p) / max(pn, 1e-300)}
    p = range_P(w, tables, "+")
    comp = forward_Iperp(metric, A, adjoint_I0(metric, B, w, grid, plan.n_theta, plan.opts), fan, plan.opts,
                         boundary_tol=np.inf) * (1 / (2 * np.pi))
    fhat, _ = extended_Iperp_preimage(p, plan, trace_modes, refine_for["perp"])
    again = forward_Iperp(metric, A, fhat, fan, plan.opts, boundary_tol=np.inf)
    pn = norm_mu(metric, p)
    out["plus"] = {"norm": pn, "factorization_rel": norm_mu(metric, p - comp) / max(pn, 1e-300),
                   "range_residual": norm_mu(metric, again - p) / max(pn, 1e-300)}
    return out


# -- W kernels ------------------------------------------------------------------------

def _interp_matrix(grid: InteriorGrid, px, py):
    """Sparse (P x N_mask) local bicubic Lagrange interpolation from masked nodes.

    Outside nodes inherit the nearest inside value, as for spline fitting."""
    n, h = grid.n, grid.h
    c0 = grid.coords[0]
    idx_full = np.full((n, n), -1)
    idx_full[grid.mask] = np.arange(grid.mask.sum())
    nearest = nearest_inside(grid, idx_full)
    ux, uy = (px - c0) / h, (py - c0) / h
    ix = np.clip(np.floor(ux).astype(int) - 1, 0, n - 4)
    iy = np.clip(np.floor(uy).astype(int) - 1, 0, n - 4)
    wx, wy = _lagrange4(ux - ix), _lagrange4(uy - iy)
    rows = np.repeat(np.arange(px.size), 16)
    a, b = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
    a, b = a.ravel(), b.ravel()
    cols = nearest[ix[:, None] + a, iy[:, None] + b].ravel()
    vals = (wx[:, a] * wy[:, b]).ravel()
    return sparse.csr_matrix((vals, (rows, cols)), shape=(px.size, int(grid.mask.sum())))


class KernelCache:
    """Node positions and kernel matrices of W_A ('A') or W_{A,perp} ('perp') for one connection.

    W f(x) = (1/2 pi) int_{S_x} int_0^tau w(x, v, t) f(gamma_{x,v}(t)) dt dv,
      w_A    = K1 - (b1/b2) K2 - V(b1/b2) E^{-1}
      w_perp = -K2/b2 - V(1/b2) E^{-1}
    Contributions with t below eps_taylor = 1e-3 tau_inf are dropped.
    """

    def __init__(self, metric, A, grid: InteriorGrid, kind="A", n_theta=64, panels_per_unit=6.0,
                 opts=TraceOptions(), floor_frac=1e-3, scalar_only=False):
        self.metric, self.grid, self.kind, self.n_theta = metric, grid, kind, n_theta
        self.A = A if A is not None else ZeroConnection(1)
        n = self.A.n
        self.n = n
        x, y = grid.points()
        N = x.size
        th = 2 * np.pi * np.arange(n_theta) / n_theta
        X, Y, T = np.repeat(x, n_theta), np.repeat(y, n_theta), np.tile(th, N)
        tau, _ = trace_to_exit(FlowSystem(metric), X, Y, T, opts)
        self.tau_inf = float(tau.max())
        eps = 1e-3 * self.tau_inf
        full = not scalar_only
        # K1, K2 solve K' = K A + b E^{-1} *F from K(0) = 0, so they vanish identically for flat connections
        self.flat = (not isinstance(self.A, ZeroConnection)) and sup_norms(self.A, metric)[1] <= 1e-12
        use_k = full and not self.flat
        system = FlowSystem(metric, self.A if full else None, jacobi=True, variation=True,
                            attenuation=full, kernel=use_k)
        j, v = system.sl["jac"].start, system.sl["var"].start
        pos, kern, target = [], [], []
        max_b2 = [-np.inf]

        def visit(ids, k, t, w, Yv):
            b1, b2 = Yv[:, j].real, Yv[:, j + 2].real
            vb1, vb2 = Yv[:, v].real, Yv[:, v + 2].real
            keep = t >= eps
            if not keep.any():
                return
            if np.any(b2[keep] >= 0):
                raise ConjugatePointError("b2 vanishes along a trace: the metric has conjugate points")
            ids, t, w, Yv = ids[keep], t[keep], w[keep], Yv[keep]
            b1, b2, vb1, vb2 = b1[keep], b2[keep], vb1[keep], vb2[keep]
            if kind == "A":
                vratio = (b2 * vb1 - b1 * vb2) / b2**2
                if use_k:
                    Ei, K1, K2 = system.mat(Yv, "einv"), system.mat(Yv, "k1"), system.mat(Yv, "k2")
                    wk = K1 - (b1 / b2)[:, None, None] * K2 - vratio[:, None, None] * Ei
                elif full:
                    wk = -vratio[:, None, None] * system.mat(Yv, "einv")
                else:
                    wk = (-vratio)[:, None, None] * np.eye(n)
            else:
                vinv = -vb2 / b2**2
                if use_k:
                    Ei, K2 = system.mat(Yv, "einv"), system.mat(Yv, "k2")
                    wk = -K2 / b2[:, None, None] - vinv[:, None, None] * Ei
                elif full:
                    wk = -vinv[:, None, None] * system.mat(Yv, "einv")
                else:
                    wk = (-vinv)[:, None, None] * np.eye(n)
            pos.append(np.stack([Yv[:, 0].real, Yv[:, 1].real], axis=1))
            kern.append(wk * (w / n_theta)[:, None, None])
            target.append(ids // n_theta)

        quadrature_pass(system, X, Y, T, tau, None, (), panels_per_unit, visit=visit)
        pos = np.concatenate(pos)
        target = np.concatenate(target)
        kern = np.concatenate(kern)
        order = np.argsort(target, kind="stable")
        self.positions = pos[order]
        self.kernels = kern[order]
        self.targets = target[order]
        self.n_nodes = N
        self.S = _interp_matrix(grid, self.positions[:, 0], self.positions[:, 1])
        self._starts = np.searchsorted(self.targets, np.arange(N))

    def apply(self, f: InteriorField) -> InteriorField:
        vals = self.S @ f.masked()
        contrib = np.einsum("pij,pj->pi", self.kernels, vals)
        out = np.zeros((self.n_nodes, contrib.shape[1]), complex)
        has = np.zeros(self.n_nodes, bool)
        has[np.unique(self.targets)] = True
        starts = self._starts[has]
        out[has] = np.add.reduceat(contrib, starts, axis=0)
        return InteriorField.from_masked(self.grid, out)


def apply_WA(f: InteriorField, plan: FilterPlan) -> InteriorField:
    return plan.kernel("A").apply(f)


def apply_WAperp(f: InteriorField, plan: FilterPlan) -> InteriorField:
    return plan.kernel("perp").apply(f)


def apply_W_adjoint(f: InteriorField, plan: FilterPlan, which="A") -> InteriorField:
    """W_A^* as W_{-A*,perp} (and W_{A,perp}^* as W_{-A*})."""
    return plan.kernel("A*" if which == "A" else "perp*").apply(f)


def W_noconnection(metric, grid: InteriorGrid, f: InteriorField, n_theta=64, panels_per_unit=6.0,
                   opts=TraceOptions(), kind="A"):
    """W with scalar kernel -V(b1/b2) (or -V(1/b2)) from Jacobi channels only, applied channelwise."""
    kc = KernelCache(metric, ZeroConnection(f.channels), grid, kind, n_theta, panels_per_unit, opts,
                     scalar_only=True)
    return kc.apply(f)


def definitional_WA(metric, A, f, grid: InteriorGrid, n_theta=64, opts=TraceOptions(), order=4):
    """pi_0 (X_perp - A_V) u_A^f from the transport solution on the interior grid."""
    fn = as_function(f)
    ch = np.asarray(fn(np.zeros(1), np.zeros(1))).reshape(1, -1).shape[1]
    u = transport_solve(metric, A, lambda x, y, th: fn(x, y), grid, n_theta, ch, opts)
    w = apply_Xperp(metric, u, order)
    if not _trivial(A):
        w.values = w.values - apply_connection(metric, A, u, vertical=True).values
    return fiber_average(w)


def definitional_WAperp(metric, A, f, grid: InteriorGrid, n_theta=64, opts=TraceOptions()):
    """pi_0 u_A^{(X_perp - A_V) f}."""
    fn = as_function(f)
    ch = np.asarray(fn(np.zeros(1), np.zeros(1))).reshape(1, -1).shape[1]
    u = transport_solve(metric, A, perp_integrand(metric, A, fn), grid, n_theta, ch, opts)
    return fiber_average(u)


# -- solvers ------------------------------------------------------------------------

@dataclass
class NeumannResult:
    solution: InteriorField
    increments: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    terms: int = 0
    converged: bool = False


def neumann_solve(r: InteriorField, plan: FilterPlan, which="A", k_max=30, tol=1e-10) -> NeumannResult:
    """f = sum_j (-1)^j W^{2j} r, stopping when the increment drops below tol * |r|."""
    apply = apply_WA if which == "A" else apply_WAperp
    metric = plan.metric
    base = norm_M(metric, r)
    total, term = r, r
    res = NeumannResult(solution=r, increments=[base], terms=1)
    growth = 0
    for j in range(1, k_max + 1):
        term = apply(apply(term, plan), plan) * (-1)
        inc = norm_M(metric, term)
        res.ratios.append(inc / max(res.increments[-1], 1e-300))
        res.increments.append(inc)
        total = total + term
        res.terms = j + 1
        growth = growth + 1 if res.ratios[-1] > 1 else 0
        if growth >= 3:
            raise DivergenceError(f"Neumann increments grew for 3 consecutive terms (ratio {res.ratios[-1]:.3g})")
        if inc <= tol * max(base, 1e-300):
            res.converged = True
            break
    if base == 0:
        res.converged = True
    res.solution = total
    return res


def operator_norm_estimate(plan: FilterPlan, which="A", iters=20, seed=1, tol=1e-4) -> float:
    """Power iteration on W^* W with the Riemannian L2 inner product; W^* via the -A* partner."""
    grid = plan.interior
    N = int(grid.mask.sum())
    rng = SplitMix64(seed)
    v = rng.normal((N, plan.n)) + 1j * rng.normal((N, plan.n))
    x = InteriorField.from_masked(grid, v)
    x = x * (1 / max(norm_M(plan.metric, x), 1e-300))
    fwd = apply_WA if which == "A" else apply_WAperp
    est = 0.0
    for _ in range(iters):
        y = apply_W_adjoint(fwd(x, plan), plan, which)
        new = norm_M(plan.metric, y)
        if new == 0:
            return 0.0
        x = y * (1 / new)
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    return float(np.sqrt(est))


@dataclass
class BoundEvaluation:
    n: int
    C1: float
    C2: float
    tau_inf: float
    alpha_A: float
    sup_starF: float
    sup_dkappa: float
    vol_M: float
    C: float
    C_prime: float
    bound: float

    def as_dict(self):
        return dict(self.__dict__)


def theorem3_bound(report, n, alpha_A, sup_starF, sup_dkappa=None) -> BoundEvaluation:
    """a-priori bound on |W_A| and |W_{A,perp}| in L2(M)."""
    dk = report.sup_dkappa if sup_dkappa is None else sup_dkappa
    C1, C2, t = report.C1, report.C2, report.tau_inf
    C = n**3 * math.exp(6 * alpha_A * t) * C2**2 / C1**3 * t**2 / 2
    Cp = n * math.exp(2 * alpha_A * t) * C2**6 / C1**5 * t**4 / 24
    bound = math.sqrt(report.vol_M / (2 * math.pi)) * math.sqrt(C * sup_starF**2 + Cp * dk**2)
    return BoundEvaluation(n=n, C1=C1, C2=C2, tau_inf=t, alpha_A=alpha_A, sup_starF=sup_starF, sup_dkappa=dk,
                           vol_M=report.vol_M, C=C, C_prime=Cp, bound=bound)


def noconnection_bound(report, sup_dkappa=None) -> float:
    """|W| <= |d kappa| C2^3 tau^2 / (24 C1^{5/2}) sqrt(vol / 2 pi) when A = 0."""
    dk = report.sup_dkappa if sup_dkappa is None else sup_dkappa
    return dk * report.C2**3 * report.tau_inf**2 / (24 * report.C1**2.5) * math.sqrt(report.vol_M / (2 * math.pi))


def bound_for(metric, A, report):
    """theorem3_bound with sup norms measured for A on the metric."""
    if _trivial(A):
        return theorem3_bound(report, 1 if A is None else A.n, 0.0, 0.0)
    alpha, sf = sup_norms(A, metric)
    return theorem3_bound(report, A.n, alpha, sf)


def kernel_bound_check(metric, report, n_traces=200, panels_per_unit=16.0, opts=TraceOptions(), seed=7):
    """Sample |V(b1/b2)| and |V(1/b2)| along traces from random interior starts and compare
    with |d kappa| C2^3 t^2 / (12 C1^2).  Returns a dict with the sample count and the minimum margin."""
    rng = SplitMix64(seed)
    R = metric.radius
    r = R * 0.95 * np.sqrt(rng.uniform((n_traces,)))
    phi = rng.uniform((n_traces,), 0, 2 * np.pi)
    th = rng.uniform((n_traces,), 0, 2 * np.pi)
    x, y = r * np.cos(phi), r * np.sin(phi)
    system = FlowSystem(metric, jacobi=True, variation=True)
    tau, _ = trace_to_exit(FlowSystem(metric), x, y, th, opts)
    j, v = system.sl["jac"].start, system.sl["var"].start
    rows = []

    def visit(ids, k, t, w, Y):
        b1, b2 = Y[:, j].real, Y[:, j + 2].real
        vb1, vb2 = Y[:, v].real, Y[:, v + 2].real
        ok = t > 1e-3 * report.tau_inf
        b2s = np.where(ok, b2, -1.0)
        rows.append(np.stack([t, np.abs((b2 * vb1 - b1 * vb2) / b2s**2), np.abs(vb2 / b2s**2), ok], axis=1))

    quadrature_pass(system, x, y, th, tau, None, (), panels_per_unit, visit=visit)
    data = np.concatenate(rows)
    data = data[data[:, 3] > 0]
    t = data[:, 0]
    bound = report.sup_dkappa * report.C2**3 * t**2 / (12 * report.C1**2)
    worst = np.maximum(data[:, 1], data[:, 2])
    with np.errstate(divide="ignore", invalid="ignore"):
        margins = np.where(worst > 0, bound / worst, np.inf)
    return {"samples": int(t.size), "min_margin": float(margins.min()), "max_ratio_term": float(data[:, 1].max()),
            "max_inverse_term": float(data[:, 2].max()), "holds": bool(np.all(worst <= bound * (1 + 1e-9)))}


# -- Krylov solve and lambda sweep ----------------------------------------------------

def krylov_solve(r: InteriorField, plan: FilterPlan, which="A", rtol=1e-8, restart=30, maxiter=20):
    """Solve (I + W^2) x = r with restarted GMRES on the masked unknowns."""
    apply = apply_WA if which == "A" else apply_WAperp
    grid = plan.interior
    N, ch = int(grid.mask.sum()), r.channels
    count = [0]

    def mv(v):
        f = InteriorField.from_masked(grid, v.reshape(N, ch))
        return (f + apply(apply(f, plan), plan)).masked().ravel()

    def cb(_):
        count[0] += 1

    op = LinearOperator((N * ch, N * ch), matvec=mv, dtype=complex)
    x, info = gmres(op, r.masked().ravel(), rtol=rtol, restart=restart, maxiter=maxiter, callback=cb,
                    callback_type="pr_norm")
    return InteriorField.from_masked(grid, x.reshape(N, ch)), info, count[0]


def relative_error(metric, approx: InteriorField, truth: InteriorField):
    return norm_M(metric, approx - truth) / max(norm_M(metric, truth), 1e-300)


def lambda_sweep(metric, A, lambdas, phantoms, fan: FanBeamGrid, interior: InteriorGrid, opts=TraceOptions(),
                 w_theta=48, w_panels_per_unit=6.0, solver_tol=1e-8):
    """For every lambda: data of lambda A, filtered backprojection, GMRES on (I + W^2)."""
    rows = []
    for lam in lambdas:
        lam = complex(lam)
        Al = ZeroConnection(A.n) if lam == 0 else A.scaled(lam)
        plan = FilterPlan(metric, Al, fan, interior, opts=opts, w_theta=w_theta, w_panels_per_unit=w_panels_per_unit)
        for k, ph in enumerate(phantoms):
            truth = InteriorField.from_function(interior, ph)
            d = forward_I0(metric, Al, ph, fan, opts)
            r = fbp_I0(d, plan)
            if lam == 0:
                x, info, its = r, 0, 0
            else:
                x, info, its = krylov_solve(r, plan, rtol=solver_tol)
            rows.append({"lambda_re": lam.real, "lambda_im": lam.imag, "phantom": k,
                         "fbp_rel_l2": relative_error(metric, r, truth),
                         "rel_l2": relative_error(metric, x, truth),
                         "rel_linf": float(np.abs(x.masked() - truth.masked()).max() /
                                           max(np.abs(truth.masked()).max(), 1e-300)),
                         "iterations": its, "converged": info == 0})
    return rows
