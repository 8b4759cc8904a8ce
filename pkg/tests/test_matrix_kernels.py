"""Tests for the beta=1/4 matrix kernels, pairing matrices and block assembly."""

import numpy as np
import pytest

from betacount.equilibrium import PolynomialPotential
from betacount.orthopoly import build_system
from betacount.quadrature import gauss_legendre
from betacount import matrix_kernels as mk

GAUSS = PolynomialPotential((0.0, 0.0, 0.5))
QUARTIC = PolynomialPotential((0.0, 0.0, -1.0, 0.0, 1.0))


@pytest.fixture(scope="module")
def gauss12():
    system = build_system(GAUSS, 12)
    mats = mk.build_operator_matrices(system)
    return system, mats


@pytest.fixture(scope="module")
def quartic12():
    system = build_system(QUARTIC, 12)
    mats = mk.build_operator_matrices(system)
    return system, mats


def test_gaussian_derivative_matrix_is_banded(gauss12):
    # closed form from the weighted Hermite ladder: the derivative pairing
    # matrix has entries +sqrt(n l)/2 and -sqrt(n(l+1))/2 on the two
    # off-diagonals and zeros elsewhere
    system, mats = gauss12
    n, L = system.n, system.lmax
    oracle = np.zeros((L + 1, L + 1))
    for l in range(L + 1):
        if l >= 1:
            oracle[l, l - 1] = np.sqrt(n * l) / 2
        if l + 1 <= L:
            oracle[l, l + 1] = -np.sqrt(n * (l + 1)) / 2
    assert np.max(np.abs(mats.D - oracle)) < 1e-10


def test_pairing_matrices_antisymmetric(gauss12, quartic12):
    for system, mats in (gauss12, quartic12):
        assert mats.antisym_residual < 1e-8
        assert np.max(np.abs(mats.M + mats.M.T)) < 1e-10
        assert np.isfinite(mats.cond_Mn)
        assert mats.cond_Mn < 1e6


def test_one_point_trace_normalization(gauss12):
    # the one-point density integrates to the particle count: n for beta=1
    # and, with the half prefactor, n/2 for beta=4
    system, mats = gauss12
    S1 = mk.build_S1(system, mats)
    S4 = mk.build_S4(system, mats)
    assert abs(S1.one_point_trace() - system.n) < 1e-8
    assert abs(S4.one_point_trace() - system.n) < 1e-8
    window = (system.grid.lo, system.grid.hi)
    assert abs(S4.mean_count(window) - system.n / 2) < 1e-8
    assert abs(S1.mean_count(window) - system.n) < 1e-8


def test_mean_count_tracks_equilibrium_mass(gauss12):
    # finite-n one-point mass of an interval stays near n * equilibrium mass
    system, mats = gauss12
    S1 = mk.build_S1(system, mats)
    x, w = gauss_legendre(400, -1.0, 1.0)
    target = system.n * (w @ system.measure.rho(x))
    assert abs(S1.mean_count((-1.0, 1.0)) - target) < 0.5


def _identity_residuals(system, kernel):
    x = system.grid.nodes
    Dv = kernel.D_block(x, x)
    Sv = kernel.S(x, x)
    Iv = kernel.I_block(x, x)
    eD = system.grid.epsilon_values(Dv)
    De = -system.grid.epsilon_values(Dv.T).T
    eS = system.grid.epsilon_values(Sv)
    scale = np.max(np.abs(Sv))
    return (
        np.max(np.abs(eD - Sv.T)) / scale,
        np.max(np.abs(De - Sv)) / scale,
        np.max(np.abs(eS - Iv)) / scale,
    )


@pytest.mark.parametrize("beta", [1, 4])
def test_exact_block_identities_gaussian(gauss12, beta):
    # eps D = S^T, D eps = S and eps S = I hold at finite n
    system, mats = gauss12
    kernel = mk.MatrixKernel(system, mats, beta=beta)
    r1, r2, r3 = _identity_residuals(system, kernel)
    assert r1 < 1e-10
    assert r2 < 1e-10
    assert r3 < 1e-10


@pytest.mark.parametrize("beta", [1, 4])
def test_exact_block_identities_quartic(quartic12, beta):
    system, mats = quartic12
    kernel = mk.MatrixKernel(system, mats, beta=beta)
    r1, r2, r3 = _identity_residuals(system, kernel)
    assert r1 < 1e-10
    assert r2 < 1e-10
    assert r3 < 1e-10


def test_perturbed_coefficients_break_identities(gauss12):
    # negative control: a one-percent error in the pairing inverse must be
    # visible to the identity checks, otherwise they test nothing
    system, mats = gauss12
    kernel = mk.build_S1(system, mats)
    rng = np.random.default_rng(20260816)
    kernel.coeff = kernel.coeff * (1.0 + 0.01 * rng.standard_normal(kernel.coeff.shape))
    r1, _, _ = _identity_residuals(system, kernel)
    assert r1 > 1e-4


def test_odd_n_rejected():
    system = build_system(GAUSS, 9)
    mats = mk.build_operator_matrices(system)
    with pytest.raises(ValueError):
        mk.build_S1(system, mats)


def test_epsilon_of_derivative_recovers_function(gauss12):
    system, _ = gauss12
    err = np.max(
        np.abs(system.grid.epsilon_values(system.dpsi_nodes) - system.psi_nodes)
    )
    assert err < 1e-10


def test_widom_tail_fit_is_exact(gauss12, quartic12):
    # for a polynomial weight of degree 2m the kernel difference S - K_n is
    # spanned exactly by the 4m-1 tail functions on each side
    system, mats = gauss12
    wd = mk.widom_decompose(mk.build_S1(system, mats))
    assert wd.F.shape == (3, 3)
    assert wd.rel_residual < 1e-10
    # the dominant coefficient of the quadratic-weight correction is 1/2
    assert abs(np.max(np.abs(wd.F)) - 0.5) < 1e-8
    assert wd.corner.shape == (1, 1)

    systemq, matsq = quartic12
    wdq = mk.widom_decompose(mk.build_S1(systemq, matsq))
    assert wdq.F.shape == (7, 7)
    assert wdq.rel_residual < 1e-10
    assert wdq.corner.shape == (3, 3)


def test_widom_tail_fit_beta4(gauss12):
    # the same tail family represents the beta=4 kernel difference
    system, mats = gauss12
    wd = mk.widom_decompose(mk.build_S4(system, mats))
    assert wd.rel_residual < 1e-10


def test_rank_one_boundary_operator(gauss12):
    system, mats = gauss12
    kernel = mk.build_S1(system, mats)
    P = mk.rank_one_P(kernel, (-1.0, 1.0))
    t, w = system.grid.nodes, system.grid.weights
    mat = P.matrix(t, w)
    assert np.linalg.matrix_rank(mat) == 1
    # profile vanishes inside the interval and is +-1/2 outside
    assert np.max(np.abs(P.profile(np.linspace(-0.9, 0.9, 9)))) == 0.0
    assert P.profile(system.grid.lo + 0.01) == 0.5
    assert P.profile(system.grid.hi - 0.01) == -0.5
    # pairing of the constant function against the profile, in closed form
    glo, ghi = system.grid.lo, system.grid.hi
    expect = 0.5 * ((-1.0 - glo) - (ghi - 1.0))
    assert abs(P.pair(t, w, np.ones_like(t)) - expect) < 1e-10
    # the left factor is S(., a) - S(., b)
    vals = kernel.S(np.array([0.3]), np.array([-1.0, 1.0]))
    assert abs(P.left(np.array([0.3]))[0] - (vals[0, 0] - vals[0, 1])) < 1e-12


@pytest.mark.parametrize("beta", [1, 4])
def test_block_kernel_assembly(gauss12, beta):
    system, mats = gauss12
    kernel = mk.MatrixKernel(system, mats, beta=beta)
    block = mk.assemble_block_kernel(kernel, (-1.0, 1.0))
    N = block.nodes.size
    assert block.matrix.shape == (2 * N, 2 * N)
    assert block.skew_residual < 1e-10
    assert abs(np.linalg.det(np.eye(2 * N) + 0.0 * block.matrix) - 1.0) < 1e-12
    # beta=4 carries the half prefactor on every block
    pref = 0.5 if beta == 4 else 1.0
    t, w = block.nodes, block.weights
    expect = pref * kernel.S(t[:1], t[:1])[0, 0] * w[0]
    assert abs(block.matrix[0, 0] - expect) < 1e-12


def _scalar_reduction_det(kernel, interval, delta, with_boundary_pair=True):
    """Determinant of the scalar-reduced projected functional, by quadrature.

    Independent of the block assembly path: combined interval/complement
    grids, plain Nystrom for the smooth kernel, explicit rank-one terms.
    """
    a, b = interval
    glo, ghi = kernel.system.grid.lo, kernel.system.grid.hi
    tg, wg = gauss_legendre(180, a, b)
    tl, wl = gauss_legendre(240, glo, a)
    tr, wr = gauss_legendre(240, b, ghi)
    t = np.concatenate([tg, tl, tr])
    w = np.concatenate([wg, wl, wr])
    chi = np.zeros(t.size)
    chi[: tg.size] = 1.0
    prof = 0.5 * (np.where(t < a, 1.0, 0.0) - np.where(t > b, 1.0, 0.0))
    u, s = kernel.boundary_functions(interval)
    S = kernel.S(t, t)
    if kernel.beta == 1:
        Z = delta * (2.0 + delta) * S * (w * chi)[None, :]
        Z += delta * np.outer(u(t), w * prof)
        if with_boundary_pair:
            Z -= 0.5 * delta * (1.0 + delta) * np.outer(s(t), w * chi)
    else:
        Z = delta * S * (w * chi)[None, :]
        Z += 0.5 * delta * np.outer(u(t), w * prof)
        if with_boundary_pair:
            Z -= 0.25 * delta * np.outer(s(t), w * chi)
    return np.linalg.det(np.eye(t.size) + Z)


@pytest.mark.parametrize("beta", [1, 4])
def test_block_determinant_equals_scalar_reduction(beta):
    # the 2x2 block determinant collapses to a scalar functional with two
    # rank-one boundary corrections; both discretizations must agree
    system = build_system(GAUSS, 8)
    mats = mk.build_operator_matrices(system)
    kernel = mk.MatrixKernel(system, mats, beta=beta)
    interval = (-1.0, 1.0)
    block = mk.assemble_block_kernel(kernel, interval)
    delta = np.exp(0.7 * np.pi / np.sqrt(np.log(8))) - 1.0
    det_block = np.linalg.det(np.eye(2 * block.nodes.size) + delta * block.matrix)
    det_scalar = _scalar_reduction_det(kernel, interval, delta)
    assert abs(det_block - det_scalar) / abs(det_scalar) < 1e-10
    # and the boundary-pair rank-one term is load-bearing, not decorative
    det_wrong = _scalar_reduction_det(kernel, interval, delta, with_boundary_pair=False)
    assert abs(det_wrong - det_scalar) / abs(det_scalar) > 0.05
