import warnings

import numpy as np
import pytest

from geoxray.boundary import ScatteringTables, membership_residual
from geoxray.connection import FiberPhaseForm, SumConnection, parse_connection
from geoxray.flow import TraceOptions
from geoxray.grids import BoundaryField, FanBeamGrid, InteriorField, InteriorGrid
from geoxray.metrics import Euclidean, parse_metric
from geoxray.phantoms import Bump, Gaussian, ZeroPhantom
from geoxray.transport import attenuated_integral
from geoxray.xray import (adjoint_I0, adjoint_Iperp, backproject, forward_I0, forward_Ik, forward_Iperp, norm_M,
                          pairing_M, pairing_mu, partner)

PERTURBED = parse_metric("perturbed(0, 0.1, 0.4, 0.1, 0.0, 1)")
FAN = FanBeamGrid(64, 64)
FINE_FAN = FanBeamGrid(128, 128)
GRID = InteriorGrid(32)
FINE_GRID = InteriorGrid(48)


def _test_h(grid, n, glancing_cutoff=False):
    B, W = grid.plus_points()
    x, y, _ = grid.phase(B, W)
    # the cutoff vanishes to all orders at tangency, keeping the invariant extension smooth
    cut = np.exp(-(0.5 / np.cos(W)) ** 2) if glancing_cutoff else 1.0
    vals = np.stack([(np.cos(x + k) * np.sin(2 * y) + 1j * x * y) * cut for k in range(n)], -1)
    return BoundaryField.from_plus(grid, vals)


def test_flat_constant_profile():
    d = forward_I0(Euclidean(), None, Gaussian((0, 0), 1e9, (1.0,)), FAN)
    assert np.allclose(d.plus()[..., 0], 2 * FAN.mu()[:, FAN.plus_slice], atol=1e-9)


def test_linearity():
    A = parse_connection("generic_poly(1, 2)")
    f, g = Gaussian((0.1, 0), 0.2, (1, 2j)), Bump((-0.2, 0.1), 0.4, (0.5, -1))
    a, b = 0.7 - 0.2j, 1.3
    lhs = forward_I0(PERTURBED, A, a * f + b * g, FanBeamGrid(16, 16)).plus()
    rhs = a * forward_I0(PERTURBED, A, f, FanBeamGrid(16, 16)).plus() + b * forward_I0(PERTURBED, A, g,
                                                                                          FanBeamGrid(16, 16)).plus()
    assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(lhs).max()


def test_perp_of_zero_and_membership():
    A = parse_connection("generic_poly(1, 2)")
    assert np.all(forward_Iperp(PERTURBED, A, ZeroPhantom(2), FanBeamGrid(16, 16)).plus() == 0)
    d = forward_Iperp(PERTURBED, A, Bump((0.1, -0.1), 0.6, (1.0, 0.5j)), FINE_FAN)
    tables = ScatteringTables(PERTURBED, FINE_FAN, A)
    assert membership_residual(d, tables, PERTURBED, "A-") <= 1e-2


def test_perp_warns_on_boundary_values():
    with pytest.warns(UserWarning, match="not small on the boundary"):
        forward_Iperp(Euclidean(), None, Gaussian((0, 0), 0.8, (1.0,)), FanBeamGrid(8, 8))


def test_k_zero_reduces_to_I0():
    A = parse_connection("generic_poly(3, 2)")
    f = Gaussian((0.1, 0.2), 0.3, (1.0, 1j))
    g = FanBeamGrid(16, 16)
    assert np.allclose(forward_Ik(PERTURBED, A, f, 0, g).plus(), forward_I0(PERTURBED, A, f, g).plus(), atol=1e-13)


@pytest.mark.parametrize("k", [-2, -1, 1, 2])
def test_mode_phase_relation(k):
    A = parse_connection("generic_poly(3, 1)")
    shifted = SumConnection(A, FiberPhaseForm(PERTURBED, k))
    f = Gaussian((0.1, 0.2), 0.3, (1.0,))
    g = FanBeamGrid(32, 32)
    lhs = forward_Ik(PERTURBED, A, f, k, g).plus()[..., 0]
    B, W = g.plus_points()
    q = np.exp(1j * k * (B + W)).reshape(lhs.shape)
    rhs = q * forward_I0(PERTURBED, shifted, f, g).plus()[..., 0]
    assert np.linalg.norm(lhs - rhs) <= 1e-2 * np.linalg.norm(lhs)


def test_constant_backprojections():
    h = BoundaryField.from_plus(FAN, np.ones((64, 32, 1)))
    grid = InteriorGrid(16)
    assert np.allclose(adjoint_I0(Euclidean(), None, h, grid).masked(), 2 * np.pi)
    assert np.abs(adjoint_Iperp(Euclidean(), None, h, grid).masked()).max() <= 1e-10


@pytest.mark.parametrize("spec", ["generic_poly(4, 2, 0.4)", "unitary_poly(2, 2)"])
def test_I0_adjointness(spec):
    A = parse_connection(spec)
    rng = np.random.default_rng(5)
    for _ in range(2):
        c = rng.normal(size=2) + 1j * rng.normal(size=2)
        F = InteriorField.from_function(GRID, Bump(tuple(0.3 * rng.random(2)), 0.5, c))
        d = forward_I0(PERTURBED, A, F, FAN)
        h = _test_h(FAN, 2)
        lhs = pairing_mu(PERTURBED, d, h)
        rhs = pairing_M(PERTURBED, F, adjoint_I0(PERTURBED, A, h, GRID))
        assert abs(lhs - rhs) <= 1e-2 * abs(lhs)


def test_Iperp_adjointness():
    A = parse_connection("generic_poly(4, 2, 0.4)")
    f = Bump((0.1, 0.05), 0.6, (1.0, 0.5 - 0.5j))
    F = InteriorField.from_function(FINE_GRID, f)
    d = forward_Iperp(PERTURBED, A, f, FINE_FAN)
    h = _test_h(FINE_FAN, 2)
    lhs = pairing_mu(PERTURBED, d, h)
    rhs = pairing_M(PERTURBED, F, adjoint_Iperp(PERTURBED, A, h, FINE_GRID))
    assert abs(lhs - rhs) <= 1e-2 * abs(lhs)


def test_adjoint_annihilation():
    A = parse_connection("generic_poly(6, 2, 0.4)")
    odd = attenuated_integral(PERTURBED, A, lambda x, y, th: np.stack([np.cos(th) * np.exp(-x * x - y * y),
                                                                      np.sin(th) * x], 1), FAN, 2)
    even = forward_I0(PERTURBED, A, Gaussian((0.1, 0.0), 0.3, (1.0, 1j)), FAN)
    B = partner(A)
    killed = norm_M(PERTURBED, adjoint_I0(PERTURBED, B, odd, GRID))
    scale = norm_M(PERTURBED, adjoint_I0(PERTURBED, B, even, GRID))
    assert killed <= 1e-2 * scale
    killed = norm_M(PERTURBED, adjoint_Iperp(PERTURBED, B, even, GRID))
    scale = norm_M(PERTURBED, adjoint_Iperp(PERTURBED, B, odd, GRID))
    assert killed <= 1e-2 * scale


def test_derivative_strategies_agree():
    A = parse_connection("generic_poly(7, 2, 0.3)")
    h = _test_h(FAN, 2, glancing_cutoff=True)
    # one-sided stencils in the rim ring dominate the gap, so the grid must be fine there
    grid = InteriorGrid(64)
    fd = backproject(PERTURBED, A, h, grid, derivative=True, strategy="fd")
    pert = backproject(PERTURBED, A, h, grid, derivative=True, strategy="perturb")
    assert norm_M(PERTURBED, fd - pert) <= 2e-2 * norm_M(PERTURBED, pert)


def test_mu_pairing_properties():
    one = BoundaryField.from_plus(FAN, np.ones((64, 32, 1)))
    # int over the inward half of mu R dbeta domega = 2 pi R * 2
    assert pairing_mu(Euclidean(), one, one).real == pytest.approx(4 * np.pi, rel=1e-3)
    a, b = _test_h(FAN, 2), _test_h(FAN, 2) * 1
    b.values = b.values * (1 + 1j) + 0.3
    assert pairing_mu(PERTURBED, a, b) == pytest.approx(np.conj(pairing_mu(PERTURBED, b, a)))
    # values on tangential nodes carry weight proportional to mu
    spike = np.zeros((64, 32, 1))
    spike[:, 0] = 1.0
    w = pairing_mu(Euclidean(), *(BoundaryField.from_plus(FAN, spike),) * 2).real
    assert w <= np.sin(np.pi / 64) * 2 * np.pi * FAN.d_omega * 1.01
