"""Matrix kernels for the orthogonal (beta=1) and symplectic (beta=4) cases.

Both symmetry classes are driven by a scalar kernel S built from the
weighted functions psi_l together with either the integration pairing
matrix M_jk = (eps psi_j, psi_k) or the differentiation pairing matrix
D_jk = (psi_j', psi_k), where eps is the integral operator with kernel
sgn(lam - mu)/2.  The 2x2 matrix kernel is assembled from S, its partial
derivative block and its eps-image block.

Conventions.  With C_1 = M_n^{-1} and C_4 = -D_n^{-1},

    beta=1:  S(lam, mu) = sum_jk psi_j(lam)  C1_jk (eps psi_k)(mu)
    beta=4:  S(lam, mu) = sum_jk psi_j'(lam) C4_jk psi_k(mu)

The beta=1 sign is fixed so that the one-point trace int S(lam,lam) dlam
equals +n: writing the kernel with a minus sign in front (with this M
convention) gives -tr(M^{-1} M) = -n, i.e. a negative density.  Both cases
share the structure S = L C R^T with (L, R) = (Psi, eps Psi) resp.
(Psi', Psi); then the derivative block is -L C (R')^T and the eps-image
block is (eps L) C R^T, using eps psi' = psi exactly.

Exact identities that hold at finite n and are asserted in tests:
eps D = S^T, D eps = S, eps S = I-block, and the finite-rank tail
representation S - K_n = n sum_{|j|,|k|<=2m-1} F_jk psi_{n+j} (x) eps psi_{n+k}
for polynomial potentials of degree 2m.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .orthopoly import projection_node_count
from .quadrature import SpectralGrid, gauss_legendre


def epsilon_apply(system, values, x=None):
    """Apply the sgn(lam-mu)/2 kernel to functions sampled on the system grid.

    values has one function per column; x selects evaluation points (grid
    nodes when omitted).  Beyond the grid the true limits are +-(1/2) int f,
    which is exactly what the underlying primitive returns at the ends.
    """
    return system.grid.epsilon_values(values, x)


@dataclass
class OperatorMatrices:
    """Pairing matrices for the full built index range 0..lmax.

    D_jk = (psi_j', psi_k) and M_jk = (eps psi_j, psi_k); both antisymmetric
    by integration by parts.  The n x n top-left corners drive the kernels;
    the extended tail rows/columns feed the finite-rank representation.
    """

    n: int
    lmax: int
    D: np.ndarray
    M: np.ndarray
    antisym_residual: float
    cond_Mn: float = field(init=False)
    cond_Dn: float = field(init=False)

    def __post_init__(self):
        self.cond_Mn = float(np.linalg.cond(self.Mn))
        self.cond_Dn = float(np.linalg.cond(self.Dn))

    @property
    def Dn(self):
        return self.D[: self.n, : self.n]

    @property
    def Mn(self):
        return self.M[: self.n, : self.n]

    def corner_of(self, m):
        """Bottom-right (2m-1) x (2m-1) corner block of D_n M_n."""
        prod = self.Dn @ self.Mn
        k = 2 * m - 1
        return prod[self.n - k :, self.n - k :]


def build_operator_matrices(system):
    """Quadrature D and M matrices with antisymmetry verification."""
    w = system.grid.weights
    Q = system.psi_nodes
    dQ = system.dpsi_nodes
    EQ = epsilon_apply(system, Q)
    D = dQ.T @ (w[:, None] * Q)
    M = EQ.T @ (w[:, None] * Q)
    resid = max(np.max(np.abs(D + D.T)), np.max(np.abs(M + M.T)))
    if resid > 1e-8:
        raise RuntimeError(
            f"antisymmetry residual {resid:.3e} > 1e-8; grid under-resolves psi"
        )
    return OperatorMatrices(
        n=system.n, lmax=system.lmax, D=D, M=M, antisym_residual=float(resid)
    )


class MatrixKernel:
    """Scalar kernel S and its derived blocks for beta = 1 or 4.

    Evaluators take point arrays and return matrices; every evaluation is
    valid inside the system's weight window (the functions underflow to
    zero beyond it, and the eps-images approach the constants +-(1/2)int).
    """

    def __init__(self, system, matrices, beta):
        if beta not in (1, 4):
            raise ValueError("beta must be 1 or 4")
        n = system.n
        if n % 2 != 0:
            raise ValueError(f"beta={beta} kernel needs even n, got {n}")
        self.system = system
        self.matrices = matrices
        self.beta = int(beta)
        self.n = n
        if beta == 1:
            self.coeff = np.linalg.inv(matrices.Mn)
        else:
            self.coeff = -np.linalg.inv(matrices.Dn)
        # cached modal data for evaluating eps psi_l anywhere in the window
        grid = system.grid
        self._eps_modal = grid.antiderivative_modal(grid.modal(system.psi_nodes))
        self._psi_totals = grid.weights @ system.psi_nodes

    # -- family evaluators (columns l = 0..n-1 unless stated) ---------------

    def _psi(self, x, deriv=False):
        if deriv:
            q, dq = self.system.psi(x, lmax=self.n - 1, with_deriv=True)
            return q, dq
        return self.system.psi(x, lmax=self.n - 1)

    def eps_psi(self, x, upto=None):
        """(eps psi_l)(x) for l = 0..upto (default n-1), any x in the window."""
        upto = self.n - 1 if upto is None else upto
        grid = self.system.grid
        xi = (np.atleast_1d(np.asarray(x, dtype=float)) - 0.5 * (grid.lo + grid.hi)) / (
            0.5 * (grid.hi - grid.lo)
        )
        vals = np.polynomial.legendre.legval(xi, self._eps_modal[:, : upto + 1])
        return vals.T - 0.5 * self._psi_totals[: upto + 1]

    def _families(self, lam, mu):
        """Left family L(lam), right family R(mu) with S = L C R^T."""
        if self.beta == 1:
            return self._psi(lam), self.eps_psi(mu)
        _, dq = self._psi(lam, deriv=True)
        return dq, self._psi(mu)

    # -- kernel blocks -------------------------------------------------------

    def S(self, lam, mu):
        left, right = self._families(np.atleast_1d(lam), np.atleast_1d(mu))
        return left @ self.coeff @ right.T

    def S_transpose(self, lam, mu):
        return self.S(mu, lam).T

    def D_block(self, lam, mu):
        """-d/dmu S(lam, mu)."""
        lam = np.atleast_1d(lam)
        mu = np.atleast_1d(mu)
        if self.beta == 1:
            left = self._psi(lam)
            rprime = self._psi(mu)  # d/dmu eps psi = psi
        else:
            _, left = self._psi(lam, deriv=True)
            _, rprime = self._psi(mu, deriv=True)
        return -left @ self.coeff @ rprime.T

    def I_block(self, lam, mu):
        """(eps S)(lam, mu), acting on the first argument."""
        lam = np.atleast_1d(lam)
        mu = np.atleast_1d(mu)
        if self.beta == 1:
            left = self.eps_psi(lam)
            right = self.eps_psi(mu)
        else:
            left = self._psi(lam)  # eps psi' = psi
            right = self._psi(mu)
        return left @ self.coeff @ right.T

    # -- boundary functions and traces ----------------------------------------

    def boundary_functions(self, interval):
        """u = S(., a) - S(., b) and s = S(., a) + S(., b) as evaluators."""
        a, b = interval

        def u(x):
            vals = self.S(x, np.array([a, b]))
            return vals[:, 0] - vals[:, 1]

        def s(x):
            vals = self.S(x, np.array([a, b]))
            return vals[:, 0] + vals[:, 1]

        return u, s

    def one_point_trace(self, interval=None):
        """int S(lam, lam) dlam over the window (or over an interval).

        Equals n for the full window; the one-point density of the ensemble
        is S(lam,lam) for beta=1 and S(lam,lam)/2 for beta=4.
        """
        if interval is None:
            x = self.system.grid.nodes
            w = self.system.grid.weights
        else:
            x, w = gauss_legendre(
                projection_node_count(self.system, interval), *interval
            )
        left, right = self._families(x, x)
        diag = np.einsum("ij,jk,ik->i", left, self.coeff, right)
        return float(w @ diag)

    def mean_count(self, interval):
        """Expected number of ensemble points in the interval."""
        tr = self.one_point_trace(interval)
        return 0.5 * tr if self.beta == 4 else tr


def build_S1(system, matrices):
    """beta=1 kernel; requires even n and an invertible M_n corner."""
    return MatrixKernel(system, matrices, beta=1)


def build_S4(system, matrices):
    """beta=4 kernel (n functions, n/2 particles); requires even n."""
    return MatrixKernel(system, matrices, beta=4)


def identity_residuals(kernel):
    """Scaled max-norm residuals of the exact finite-n block relations.

    Returns a dict with the residuals of eps D = S^T, D eps = S and
    eps S = I-block, each divided by max |S| on the weight-window grid.
    These vanish identically in exact arithmetic for every even n.
    """
    grid = kernel.system.grid
    x = grid.nodes
    Sv = kernel.S(x, x)
    Dv = kernel.D_block(x, x)
    Iv = kernel.I_block(x, x)
    eD = grid.epsilon_values(Dv)
    De = -grid.epsilon_values(Dv.T).T
    eS = grid.epsilon_values(Sv)
    scale = np.max(np.abs(Sv))
    return {
        "eps_D_minus_S_transpose": float(np.max(np.abs(eD - Sv.T)) / scale),
        "D_eps_minus_S": float(np.max(np.abs(De - Sv)) / scale),
        "eps_S_minus_I_block": float(np.max(np.abs(eS - Iv)) / scale),
    }


@dataclass
class WidomDecomposition:
    """Finite-rank tail fit S - K_n = n sum F_jk psi_{n+j} (x) eps psi_{n+k}."""

    F: np.ndarray
    residual: float
    rel_residual: float
    kernel_norm: float
    corner: np.ndarray  # bottom-right (2m-1)^2 block of D_n M_n
    offsets: np.ndarray  # index offsets j relative to n


def widom_decompose(kernel, system=None):
    """Least-squares recovery of the finite-rank tail coefficients F.

    The fit runs on the global grid in the weighted L2 sense; for a
    polynomial potential of degree 2m the representation is exact, so the
    relative residual doubles as an implementation check.
    """
    system = kernel.system if system is None else system
    n = kernel.n
    m = system.potential.half_degree
    k = 2 * m - 1
    if system.lmax < n + k:
        raise ValueError("system was built without the tail indices n..n+2m-1")
    offsets = np.arange(-k, k + 1)
    w = system.grid.weights
    Q = system.psi_nodes
    EQ = epsilon_apply(system, Q)

    left, right = kernel._families(system.grid.nodes, system.grid.nodes)
    S_grid = left @ kernel.coeff @ right.T
    K_grid = Q[:, :n] @ Q[:, :n].T
    R = S_grid - K_grid

    U = Q[:, n + offsets]
    W = EQ[:, n + offsets]
    GU = U.T @ (w[:, None] * U)
    GW = W.T @ (w[:, None] * W)
    cross = U.T @ (w[:, None] * R * w[None, :]) @ W
    F = np.linalg.solve(GU, np.linalg.solve(GW.T, cross.T).T) / n

    fit = n * U @ F @ W.T
    wsq = np.sqrt(w)
    resid = float(np.linalg.norm(wsq[:, None] * (R - fit) * wsq[None, :]))
    snorm = float(np.linalg.norm(wsq[:, None] * S_grid * wsq[None, :]))
    return WidomDecomposition(
        F=F,
        residual=resid,
        rel_residual=resid / snorm,
        kernel_norm=snorm,
        corner=kernel.matrices.corner_of(m),
        offsets=offsets,
    )


@dataclass
class RankOneOperator:
    """(P f)(lam) = left(lam) * (f, profile), the boundary rank-one piece.

    profile is Psi_int(t) = (1_{t<a} - 1_{t>b})/2, supported off the interval.
    """

    interval: tuple
    left: object  # callable lam -> values

    def profile(self, t):
        a, b = self.interval
        t = np.asarray(t, dtype=float)
        return 0.5 * (np.where(t < a, 1.0, 0.0) - np.where(t > b, 1.0, 0.0))

    def pair(self, t, weights, values):
        """(f, Psi_int) for f sampled at quadrature points t."""
        return float((weights * self.profile(t)) @ values)

    def matrix(self, t, weights):
        """Outer-product discretization on the given quadrature points."""
        return np.outer(self.left(t), weights * self.profile(t))


def rank_one_P(kernel, interval):
    """Rank-one boundary operator built from u = S(., a) - S(., b)."""
    u, _ = kernel.boundary_functions(interval)
    return RankOneOperator(interval=tuple(map(float, interval)), left=u)


@dataclass
class BlockKernel:
    """Discretized 2x2 matrix kernel on an interval, plain right-weighted.

    matrix is the 2N x 2N array [[S, D], [I(-eps), S^T]] (times 1/2 for
    beta=4) with each block right-multiplied by the quadrature weights; the
    eps part of the (2,1) block is the spectral primitive matrix on the
    local grid rather than pointwise sgn values (the kink defeats plain
    Nystrom accuracy).
    """

    beta: int
    n: int
    interval: tuple
    nodes: np.ndarray
    weights: np.ndarray
    matrix: np.ndarray
    skew_residual: float


def _local_epsilon_matrix(local_grid):
    """Matrix of eps restricted to the interval, acting on node values."""
    return local_grid.epsilon_values(np.eye(local_grid.num))


def assemble_block_kernel(kernel, interval, num_nodes=None):
    """2x2 block discretization of the projected matrix kernel.

    For beta=1 the (2,1) block is I - eps on the interval; for beta=4 the
    blocks enter with an overall factor 1/2 and no eps subtraction.
    """
    a, b = interval
    if num_nodes is None:
        num_nodes = projection_node_count(kernel.system, interval)
    local = SpectralGrid(num_nodes, a, b)
    t, w = local.nodes, local.weights
    wcol = w[None, :]
    S = kernel.S(t, t)
    Db = kernel.D_block(t, t)
    Ib = kernel.I_block(t, t)
    if kernel.beta == 1:
        lower_left_op = Ib * wcol - _local_epsilon_matrix(local)
        pref = 1.0
    else:
        lower_left_op = Ib * wcol
        pref = 0.5
    matrix = pref * np.block([[S * wcol, Db * wcol], [lower_left_op, S.T * wcol]])
    # J-skewness of the kernel in the weighted inner product: diag(w) X must
    # be antisymmetric for the derivative and (2,1) operator blocks (the
    # spectral eps matrix satisfies this exactly; pointwise sgn would not)
    wd = w[:, None] * (Db * wcol)
    wl = w[:, None] * lower_left_op
    skew = max(
        float(np.max(np.abs(wd + wd.T)) / max(np.max(np.abs(wd)), 1e-300)),
        float(np.max(np.abs(wl + wl.T)) / max(np.max(np.abs(wl)), 1e-300)),
    )
    return BlockKernel(
        beta=kernel.beta,
        n=kernel.n,
        interval=(float(a), float(b)),
        nodes=t,
        weights=w,
        matrix=matrix,
        skew_residual=skew,
    )
