import numpy as np
import pytest

from geoxray.connection import PolynomialConnection, PolynomialGauge, ZeroConnection, parse_connection
from geoxray.flow import TraceOptions
from geoxray.frame import frame_coefficients
from geoxray.grids import BoundaryField, FanBeamGrid, InteriorGrid
from geoxray.metrics import Euclidean, parse_metric
from geoxray.surface import PhasePoint
from geoxray.transport import (AugmentedTraceRequest, attenuated_integral, extension_at, integrate_from,
                               propagator_U, scattering_data, trace_augmented, trace_with_attenuation,
                               transport_solve)

TIGHT = TraceOptions(rtol=1e-11, atol=1e-12, panels_per_unit=32.0)
PERTURBED = parse_metric("perturbed(0, 0.1, 0.4, 0.1, 0.0, 1)")


def _scalar_oracle_connection():
    # monomial order 1, x, y
    cz = np.array([0.3, 0.2j, 0.0]).reshape(3, 1, 1)
    czb = np.array([0.4, 0.0, -0.1]).reshape(3, 1, 1)
    return PolynomialConnection(cz, czb, 1)


def _gauss(x, y):
    return np.exp(-((x - 0.2) ** 2 + (y + 0.1) ** 2) / (2 * 0.25**2))[:, None]


def _pts(count, seed, frac=0.8):
    rng = np.random.default_rng(seed)
    r, phi = frac * np.sqrt(rng.random(count)), 2 * np.pi * rng.random(count)
    return r * np.cos(phi), r * np.sin(phi), 2 * np.pi * rng.random(count)


def test_scalar_attenuation_matches_oracle(frozen):
    A = _scalar_oracle_connection()
    for ref in frozen["scalar_attenuation"]:
        tr = trace_augmented(AugmentedTraceRequest(PERTURBED, A, PhasePoint(*ref["start"]), opts=TIGHT))
        assert tr.tau == pytest.approx(ref["tau"], abs=1e-8)
        assert abs(tr.einv[-1, 0, 0] - complex(*ref["einv_exit"])) <= 1e-8
        u = integrate_from(PERTURBED, A, *ref["start"], lambda x, y, th: _gauss(x, y), 1, TIGHT)
        assert abs(u[0, 0] - complex(*ref["u"])) <= 1e-8 * max(1, abs(complex(*ref["u"])))


def test_zero_connection_trivial_channels():
    tr = trace_augmented(AugmentedTraceRequest(PERTURBED, ZeroConnection(2), PhasePoint(0.1, 0.2, 1.0),
                                               kernelK=True, variationVb=True))
    assert np.allclose(tr.einv, np.eye(2)) and np.all(tr.k1 == 0) and np.all(tr.k2 == 0)
    assert tr.vb1[0] == 0 and tr.vb2[0] == 0


def test_flat_connection_has_no_kernel_source():
    A = parse_connection("pure_gauge(2, 2)")
    tr = trace_augmented(AugmentedTraceRequest(PERTURBED, A, PhasePoint(-0.2, 0.3, 2.0), kernelK=True))
    assert np.abs(tr.k1).max() <= 1e-8 and np.abs(tr.k2).max() <= 1e-8


def test_einv_small_time_expansion():
    A = parse_connection("generic_poly(1, 2)")
    start = PhasePoint(0.1, -0.1, 0.7)
    tr = trace_augmented(AugmentedTraceRequest(PERTURBED, A, start, opts=TraceOptions(max_step=0.01)))
    a0 = A.on_sm(PERTURBED, np.array([start.x]), np.array([start.y]), np.array([start.theta]))[0]
    small = (tr.t > 0) & (tr.t < 0.1)
    err = np.linalg.norm(tr.einv[small] - np.eye(2) - tr.t[small, None, None] * a0, axis=(1, 2))
    assert np.all(err <= 5 * tr.t[small] ** 2)


def test_k2_sample_bound():
    from geoxray.connection import sup_norms
    from geoxray.surface import simplicity_constants
    A = parse_connection("generic_poly(3, 2, 0.3)")
    rep = simplicity_constants(PERTURBED, 24, 24)
    alpha, sf = sup_norms(A, PERTURBED, n_r=48, n_phi=96)
    n = A.n
    for th in (0.2, 2.5, 4.0):
        tr = trace_augmented(AugmentedTraceRequest(PERTURBED, A, PhasePoint(0.2, 0.1, th), kernelK=True))
        bound = n**1.5 * np.exp(3 * alpha * rep.tau_inf) * rep.C2 * sf * tr.t**2 / 2
        assert np.all(np.linalg.norm(tr.k2, axis=(1, 2)) <= bound * 1.01 + 1e-12)


def test_propagator_trivial_cases():
    x, y, th = _pts(10, 1)
    assert np.allclose(propagator_U(PERTURBED, ZeroConnection(2), x, y, th), np.eye(2))
    A = parse_connection("generic_poly(2, 2)")
    beta = np.linspace(0, 2 * np.pi, 7)
    inward = beta + np.pi + 0.3
    U = propagator_U(PERTURBED, A, np.cos(beta), np.sin(beta), inward)
    assert np.abs(U - np.eye(2)).max() <= 1e-10


@pytest.mark.parametrize("spec", ["generic_poly(4, 2)", "unitary_poly(5, 3)", "pure_gauge(6, 2)"])
def test_propagator_duality(spec):
    A = parse_connection(spec)
    x, y, th = _pts(100, 2)
    U = propagator_U(PERTURBED, A, x, y, th, TIGHT)
    V = propagator_U(PERTURBED, A.neg_adjoint(), x, y, th, TIGHT)
    assert np.abs(np.conj(np.swapaxes(U, -1, -2)) @ V - np.eye(A.n)).max() <= 1e-8


def test_scattering_identity_on_grid():
    A = parse_connection("generic_poly(7, 2)")
    grid = FanBeamGrid(16, 16)
    C = scattering_data(PERTURBED, A, grid, TIGHT)
    B, W = grid.minus_points()
    x, y, th = grid.phase(B, W)
    # the far end of the geodesic through each outward node, reached from the antipodal inward start
    _, xe, ye, the, _ = trace_with_attenuation(PERTURBED, A, x, y, th + np.pi, TIGHT)
    C_far = propagator_U(PERTURBED, A, xe, ye, the, TIGHT)
    prod = C.values.reshape(-1, 2, 2) @ C_far
    assert np.abs(prod - np.eye(2)).max() <= 1e-6


def test_pure_gauge_scattering_oracle():
    g = PolynomialGauge(11, n=2, eps=0.3)
    A = parse_connection("pure_gauge(11, 2, 0.3)")
    x, y, th = _pts(20, 3)
    tau, xe, ye, the, Ei = trace_with_attenuation(PERTURBED, A, x, y, th, TIGHT)
    expected = np.linalg.inv(g.value(x, y)) @ g.value(xe, ye)
    assert np.abs(Ei - expected).max() <= 1e-8


def test_flat_constant_integrand_is_chord():
    grid = FanBeamGrid(16, 32)
    d = attenuated_integral(Euclidean(), None, lambda x, y, th: np.ones((x.size, 1)), grid, 1)
    assert np.allclose(d.plus()[..., 0], 2 * grid.mu()[:, grid.plus_slice], atol=1e-10)


def _vanishing_u(x, y, th):
    s = 1 - x**2 - y**2
    return np.stack([s * (np.cos(th) + x), s * y * np.sin(2 * th)], axis=1)


def _vanishing_u_derivs(x, y, th):
    s = 1 - x**2 - y**2
    ux = np.stack([-2 * x * (np.cos(th) + x) + s, -2 * x * y * np.sin(2 * th)], 1)
    uy = np.stack([-2 * y * (np.cos(th) + x), (s - 2 * y * y) * np.sin(2 * th)], 1)
    ut = np.stack([-s * np.sin(th), 2 * s * y * np.cos(2 * th)], 1)
    return ux, uy, ut


def test_transport_of_exact_derivative_vanishes():
    A = parse_connection("generic_poly(8, 2)")

    def F(x, y, th):
        (Xa, Xb, Xc), _, _ = frame_coefficients(PERTURBED, x, y, th)
        ux, uy, ut = _vanishing_u_derivs(x, y, th)
        Xu = Xa[:, None] * ux + Xb[:, None] * uy + Xc[:, None] * ut
        return Xu + np.einsum("pij,pj->pi", A.on_sm(PERTURBED, x, y, th), _vanishing_u(x, y, th))

    d = attenuated_integral(PERTURBED, A, F, FanBeamGrid(16, 16), 2, TIGHT)
    ref = attenuated_integral(PERTURBED, A, lambda x, y, th: np.abs(F(x, y, th)), FanBeamGrid(16, 16), 2, TIGHT)
    assert np.abs(d.plus()).max() <= 1e-8 * np.abs(ref.plus()).max()


def test_transport_solve_zero_and_boundary():
    grid = InteriorGrid(8)
    u = transport_solve(Euclidean(), None, lambda x, y, th: np.zeros((x.size, 1)), grid, 8, 1)
    assert np.all(u.values == 0)
    out = integrate_from(PERTURBED, None, np.array([1.0]), np.array([0.0]), np.array([0.2]),
                         lambda x, y, th: np.ones((x.size, 1)), 1)
    assert abs(out[0, 0]) <= 1e-9


def test_transport_solve_residual():
    A = parse_connection("generic_poly(9, 2, 0.3)")
    f = lambda x, y, th: _gauss(x, y) * np.array([1.0, 0.5j])  # noqa: E731
    x0, y0, th0 = 0.1, 0.2, 1.1
    h = 1e-4
    (a, b, c), _, _ = frame_coefficients(PERTURBED, x0, y0, th0)
    pts = [(x0 + s * h * a, y0 + s * h * b, th0 + s * h * c) for s in (1, -1)]
    up, um = (integrate_from(PERTURBED, A, *p, f, 2, TIGHT)[0] for p in pts)
    u0 = integrate_from(PERTURBED, A, x0, y0, th0, f, 2, TIGHT)[0]
    Xu = (up - um) / (2 * h)
    Au = A.on_sm(PERTURBED, np.array([x0]), np.array([y0]), np.array([th0]))[0] @ u0
    assert np.abs(Xu + Au + f(np.array([x0]), np.array([y0]), None)[0]).max() <= 1e-6


def test_extension_of_constant_is_constant():
    grid = FanBeamGrid(32, 32)
    h = BoundaryField.from_plus(grid, np.full((32, 16, 1), 2.5 - 1j))
    x, y, th = _pts(30, 4)
    assert np.allclose(extension_at(PERTURBED, None, h, x, y, th), 2.5 - 1j, atol=1e-12)


def test_extension_is_first_integral():
    A = parse_connection("generic_poly(10, 2, 0.3)")
    grid = FanBeamGrid(128, 128)
    B, W = grid.plus_points()
    vals = np.stack([np.cos(B) * np.exp(-(np.pi - W) ** 2), np.sin(2 * B) * np.cos(W) ** 2], -1)
    h = BoundaryField.from_plus(grid, vals.reshape(128, 64, 2))
    x0, y0, th0, step = 0.15, -0.1, 0.8, 1e-3
    (a, b, c), _, _ = frame_coefficients(PERTURBED, x0, y0, th0)
    up = extension_at(PERTURBED, A, h, x0 + step * a, y0 + step * b, th0 + step * c)
    um = extension_at(PERTURBED, A, h, x0 - step * a, y0 - step * b, th0 - step * c)
    u0 = extension_at(PERTURBED, A, h, x0, y0, th0)
    Xu = (up - um) / (2 * step)
    Au = A.on_sm(PERTURBED, np.array([x0]), np.array([y0]), np.array([th0]))[0] @ u0[0]
    assert np.abs(Xu[0] + Au).max() <= 1e-3 * np.abs(u0).max()


def test_scalar_extension_acts_channelwise():
    grid = FanBeamGrid(16, 16)
    B, W = grid.plus_points()
    h = BoundaryField.from_plus(grid, np.stack([np.cos(B + W), 1j * np.sin(2 * B)], -1))
    x, y, th = _pts(10, 8)
    a = extension_at(PERTURBED, None, h, x, y, th)
    b = extension_at(PERTURBED, ZeroConnection(2), h, x, y, th)
    assert a.shape == (10, 2) and np.abs(a - b).max() <= 1e-14
