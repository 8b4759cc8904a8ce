"""Fredholm-determinant characteristic functionals for counting statistics.

For a test parameter x the rescaled exponent is x_n = x*pi/sqrt(log n) and
delta_n = exp(x_n) - 1.  The characteristic functional of the number of
points in an interval Delta is

    beta=2:  log Phi(x) = -x_n E N + sum log(1 + delta_n * e_i),
             e_i the eigenvalues of the projected reproducing kernel;
    beta=1,4:  log Phi(x) = -x_n E N + (1/2) log det(1 + delta_n K[Delta]),
             K the 2x2 matrix kernel.

The block determinant admits an exact scalar reduction: with
delta~ = delta(2+delta) = exp(2 x_n) - 1, u = S(.,a) - S(.,b),
s = S(.,a) + S(.,b) and the pairing profile Psi(t) = (1_{t<a} - 1_{t>b})/2,

    det(1 + delta K_1[Delta]) =
        det(1 + delta~ S chi + delta u (x) Psi - (delta(1+delta)/2) s (x) 1_Delta)
    det(1 + delta K_4[Delta]) =
        det(1 + delta S chi + (delta/2) u (x) Psi - (delta/4) s (x) 1_Delta)

where chi restricts to Delta.  Both rank-one boundary corrections are
required: dropping the s-term changes the determinant at order one for
moderate delta (it only becomes negligible in the delta -> 0 limit).

Determinants of non-symmetric discretizations are evaluated through the
eigenvalues with the complex logarithm tracked continuously along the path
x: 0 -> target, so that the half-power of the block determinant is taken on
the correct branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matrix_kernels import MatrixKernel, RankOneOperator, assemble_block_kernel
from .orthopoly import DiscretizedKernel, WeightedPolySystem, projection_node_count
from .quadrature import gauss_legendre


class BranchTrackingError(RuntimeError):
    """The complex determinant path could not be followed continuously."""


def scaled_parameters(x, n):
    """x_n = x pi / sqrt(log n) and delta_n = e^{x_n} - 1."""
    x = np.asarray(x, dtype=float)
    if n < 3:
        raise ValueError("need n >= 3 for the log n rescaling")
    x_n = x * np.pi / np.sqrt(np.log(n))
    return x_n, np.expm1(x_n)


def variance_trace(kernel_disc):
    """tr(A - A^2) of a projected reproducing kernel, from its spectrum.

    For the interval projection of the beta=2 kernel this equals the number
    variance of the counting statistic, and grows like log(n)/pi^2 for an
    interval in the bulk.
    """
    if not isinstance(kernel_disc, DiscretizedKernel):
        raise TypeError("variance_trace expects a DiscretizedKernel")
    s = kernel_disc.spectrum
    if s.min() < -1e-8 or s.max() > 1 + 1e-8:
        raise ValueError("projected kernel spectrum escapes [0, 1]")
    s = np.clip(s, 0.0, 1.0)
    return float(np.sum(s * (1.0 - s)))


def mean_count(obj, interval):
    """Expected number of points in the interval.

    Accepts a weighted-polynomial system (beta=2 determinantal count) or a
    matrix kernel (beta=1 count of n points, beta=4 count of n/2 points).
    """
    if isinstance(obj, MatrixKernel):
        return obj.mean_count(interval)
    if isinstance(obj, WeightedPolySystem):
        t, w = gauss_legendre(projection_node_count(obj, interval), *interval)
        vals = obj.psi(t, lmax=obj.n - 1)
        return float(w @ np.sum(vals**2, axis=1))
    raise TypeError("mean_count expects a WeightedPolySystem or MatrixKernel")


@dataclass
class CharFunctionalResult:
    """log characteristic functional along a grid of test parameters."""

    beta: int
    n: int
    interval: tuple
    x: np.ndarray
    x_n: np.ndarray
    delta_n: np.ndarray
    log_phi: np.ndarray
    mean: float
    method: str
    diagnostics: dict = field(default_factory=dict)


def _path_deltas(x_n, factor=1.0, step=0.05):
    """Exponent path 0 -> x_n in increments of at most `step`.

    Returns delta(t) = exp(factor * t) - 1 on the path, endpoint included.
    """
    num = max(4, int(np.ceil(abs(factor * x_n) / step)))
    t = np.linspace(0.0, x_n, num + 1)
    return np.expm1(factor * t)


def _logdet_eigen_path(eigs, deltas):
    """log prod_i (1 + delta e_i) at delta = deltas[-1], branch-tracked.

    Follows each factor continuously along the delta path; the per-step
    argument increment must stay below pi/2, otherwise the path is refined.
    Returns a complex number whose imaginary part is the accumulated
    winding (zero for determinants that stay on the real-positive sheet).
    """
    for refine in range(8):
        z = 1.0 + deltas[:, None] * eigs[None, :]
        if np.min(np.abs(z)) < 1e-13:
            raise BranchTrackingError("determinant factor vanished on the path")
        steps = np.angle(z[1:] / z[:-1])
        if np.max(np.abs(steps)) < 0.5 * np.pi:
            # deltas[0] = 0 makes every starting factor exactly 1, so the
            # accumulated step angles are the whole argument
            return complex(np.sum(np.log(np.abs(z[-1]))), np.sum(steps))
        fine = np.empty(2 * len(deltas) - 1)
        fine[0::2] = deltas
        fine[1::2] = 0.5 * (deltas[:-1] + deltas[1:])
        deltas = fine
    raise BranchTrackingError("argument steps stayed too large after refinement")


def char_functional_beta2(system, interval, x, num_nodes=None):
    """Characteristic functional of the beta=2 count via the kernel spectrum."""
    from .orthopoly import project_kernel

    disc = project_kernel(system, interval, num_nodes)
    eigs = np.clip(disc.spectrum, 0.0, 1.0)
    mean = disc.trace
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_n, delta = scaled_parameters(x, system.n)
    log_phi = -x_n * mean + np.sum(np.log1p(delta[:, None] * eigs[None, :]), axis=1)
    return CharFunctionalResult(
        beta=2,
        n=system.n,
        interval=tuple(map(float, interval)),
        x=x,
        x_n=x_n,
        delta_n=delta,
        log_phi=log_phi,
        mean=mean,
        method="beta2-spectral",
        diagnostics={
            "kernel_nodes": disc.nodes.size,
            "spectrum_min": float(eigs.min()),
            "spectrum_max": float(eigs.max()),
            "variance_trace": float(np.sum(eigs * (1 - eigs))),
        },
    )


def char_functional_block(kernel, interval, x, num_nodes=None, mean=None):
    """Characteristic functional from the 2x2 block determinant.

    log Phi = -x_n E N + (1/2) log det(1 + delta_n K[Delta]) with the
    determinant followed along the x-path on a continuous branch.
    """
    if isinstance(kernel, MatrixKernel):
        block = assemble_block_kernel(kernel, interval, num_nodes)
        mean = kernel.mean_count(interval) if mean is None else mean
    else:
        block = kernel
        if mean is None:
            raise ValueError("pass mean= when handing a prebuilt BlockKernel")
    eigs = np.linalg.eigvals(block.matrix)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_n, delta = scaled_parameters(x, block.n)
    log_phi = np.empty_like(x_n)
    max_imag = 0.0
    for i, xn in enumerate(x_n):
        logdet = _logdet_eigen_path(eigs, _path_deltas(xn))
        max_imag = max(max_imag, abs(logdet.imag))
        if abs(logdet.imag) > 1e-6 * (1.0 + abs(logdet.real)):
            raise BranchTrackingError(
                f"block determinant left the real axis: imag {logdet.imag:.3e}"
            )
        log_phi[i] = -xn * mean + 0.5 * logdet.real
    return CharFunctionalResult(
        beta=block.beta,
        n=block.n,
        interval=tuple(map(float, block.interval)),
        x=x,
        x_n=x_n,
        delta_n=delta,
        log_phi=log_phi,
        mean=float(mean),
        method="block-det",
        diagnostics={
            "block_nodes": block.nodes.size,
            "skew_residual": block.skew_residual,
            "max_imag_leak": max_imag,
        },
    )


class _ScalarReduction:
    """Shared precomputation for the scalar-reduced determinant.

    Diagonalizes the Nystrom matrix of S on the interval once and expresses
    both the main determinant and the 2x2 boundary correction as rational
    functions of delta through the eigenbasis.
    """

    def __init__(self, kernel, interval, num_nodes=None, complement_nodes=240):
        a, b = interval
        system = kernel.system
        glo, ghi = system.grid.lo, system.grid.hi
        if not (glo < a < b < ghi):
            raise ValueError("interval must sit strictly inside the grid window")
        if num_nodes is None:
            num_nodes = projection_node_count(system, interval)
        self.kernel = kernel
        self.interval = (float(a), float(b))
        self.t, self.w = gauss_legendre(num_nodes, a, b)
        S = kernel.S(self.t, self.t)
        self.A = S * self.w[None, :]
        self.eigs, E = np.linalg.eig(self.A)
        self.basis_cond = float(np.linalg.cond(E))
        if self.basis_cond > 1e10:
            raise RuntimeError(
                f"Nystrom eigenbasis too ill-conditioned ({self.basis_cond:.1e})"
            )
        u, s = kernel.boundary_functions(interval)
        f = np.column_stack([u(self.t), s(self.t)])  # on the interval grid
        q = np.linalg.solve(E, f)  # E^{-1} chi f, one column per rank-one term

        # complement pieces carry the Psi profile: +1/2 left of a, -1/2 right of b
        tl, wl = gauss_legendre(complement_nodes, glo, a)
        tr, wr = gauss_legendre(complement_nodes, b, ghi)
        tc = np.concatenate([tl, tr])
        prof_w = np.concatenate([0.5 * wl, -0.5 * wr])
        f_comp = np.column_stack([u(tc), s(tc)])
        S_comp = kernel.S(tc, self.t)

        # pairings (v_i, h_j)(delta) = g0_ij - c * sum_k rho_ijk / (1 + c e_k)
        # with v_1 = Psi profile (complement), v_2 = 1_Delta (interval)
        self.g0 = np.empty((2, 2))
        self.g0[0] = prof_w @ f_comp
        self.g0[1] = self.w @ f
        r1 = (prof_w @ S_comp) * self.w  # quadrature row for v_1 through S
        row1 = r1 @ E
        # (1_Delta, S chi y) needs S back on the interval grid, i.e. one more
        # factor of the Nystrom matrix: w @ A E = (w @ E) * eigs
        row2 = (self.w @ E) * self.eigs
        self.rho = np.empty((2, 2, self.eigs.size), dtype=complex)
        for j in range(2):
            self.rho[0, j] = row1 * q[:, j]
            self.rho[1, j] = row2 * q[:, j]

    def coefficients(self, delta):
        """(c_S, c_u, c_s) multiplying S chi, u(x)Psi and s(x)1_Delta."""
        if self.kernel.beta == 1:
            return delta * (2.0 + delta), delta, -0.5 * delta * (1.0 + delta)
        return delta, 0.5 * delta, -0.25 * delta

    def correction_matrix(self, delta):
        c_S, c_u, c_s = self.coefficients(delta)
        G = self.g0 - c_S * np.real(self.rho @ (1.0 / (1.0 + c_S * self.eigs)))
        return np.eye(2) + G * np.array([c_u, c_s])[None, :]

    def logdet(self, x_n):
        """Branch-tracked log det of the full scalar reduction at x_n."""
        deltas = _path_deltas(x_n)
        c_path = np.array([self.coefficients(d)[0] for d in deltas])
        main = _logdet_eigen_path(self.eigs, c_path)
        # follow the 2x2 correction along the same path
        arg = 0.0
        prev = 1.0 + 0.0j
        for d in deltas[1:]:
            cur = complex(np.linalg.det(self.correction_matrix(d)))
            if abs(cur) < 1e-300:
                raise BranchTrackingError("boundary correction determinant vanished")
            step = np.angle(cur / prev)
            if abs(step) >= 0.5 * np.pi:
                raise BranchTrackingError("boundary correction winds too fast")
            arg += step
            prev = cur
        return main + complex(np.log(abs(prev)), arg)


def char_functional_scalar_reduced(
    kernel, P, interval, x, num_nodes=None, mean=None, complement_nodes=240
):
    """Characteristic functional via the exact scalar reduction.

    P is the rank-one boundary operator built by rank_one_P; it fixes the
    left factor u = S(., a) - S(., b) and the pairing profile.  The second
    boundary term (the s (x) 1_Delta correction) is part of the exact
    reduction and is included always.
    """
    if not isinstance(kernel, MatrixKernel):
        raise TypeError("scalar reduction needs the MatrixKernel")
    if P is not None and isinstance(P, RankOneOperator):
        if tuple(map(float, interval)) != P.interval:
            raise ValueError("rank-one operator was built for a different interval")
    red = _ScalarReduction(kernel, interval, num_nodes, complement_nodes)
    mean = kernel.mean_count(interval) if mean is None else mean
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_n, delta = scaled_parameters(x, kernel.n)
    log_phi = np.empty_like(x_n)
    max_imag = 0.0
    for i, xn in enumerate(x_n):
        logdet = red.logdet(xn)
        max_imag = max(max_imag, abs(logdet.imag))
        if abs(logdet.imag) > 1e-6 * (1.0 + abs(logdet.real)):
            raise BranchTrackingError(
                f"scalar-reduced determinant left the real axis: {logdet.imag:.3e}"
            )
        log_phi[i] = -xn * mean + 0.5 * logdet.real
    return CharFunctionalResult(
        beta=kernel.beta,
        n=kernel.n,
        interval=tuple(map(float, interval)),
        x=x,
        x_n=x_n,
        delta_n=delta,
        log_phi=log_phi,
        mean=float(mean),
        method="scalar-reduced",
        diagnostics={
            "interval_nodes": red.t.size,
            "eigenbasis_cond": red.basis_cond,
            "max_imag_leak": max_imag,
        },
    )


@dataclass
class WidomBoundReport:
    """Finite-n values of the resolvent-correction bound families.

    Each array is indexed by the tail offsets j (and k) running over
    -(2m-1)..(2m-1).  The implied constants divide out the claimed rate;
    they should stay of order one as n grows for a bulk interval.
    """

    n: int
    interval: tuple
    x: float
    delta_n: float
    tilde_delta_n: float
    offsets: np.ndarray
    resolvent_pairings: np.ndarray  # n (R psi_{n+j}, eps psi_{n+k})
    flat_pairings: np.ndarray  # n (1 psi_{n+k}, eps psi_{n+j})
    smoothed_pairings: np.ndarray  # n (psi_{n+k}, K[D] eps psi_{n+j})
    defect_norms: np.ndarray  # || n (K - K^2) eps psi_{n+j} ||
    flat_moments: np.ndarray  # sqrt(n) (psi_{n+k}, 1)
    smoothed_moments: np.ndarray  # sqrt(n) (K psi_{n+k}, 1)
    flat_defect: float  # || sqrt(n) (K - K^2) 1 ||
    resolvent_margin: float  # min |1 - tilde_delta * eig|
    implied_constants: dict = field(default_factory=dict)


def widom_correction_bounds(system, interval, x=0.5):
    """Evaluate the bound families controlling the finite-rank correction.

    All quantities live on the interval: K is the projected reproducing
    kernel, R = (1 - tilde_delta K)^{-1} its resolvent, and the tail
    functions psi_{n+j}, eps psi_{n+j} enter through the exact finite-rank
    representation of the beta=1 kernel.
    """
    n = system.n
    m = system.potential.half_degree
    k = 2 * m - 1
    offsets = np.arange(-k, k + 1)
    x_n, delta = scaled_parameters(float(x), n)
    tdelta = float(np.expm1(2 * x_n))

    t, w = gauss_legendre(projection_node_count(system, interval), *interval)
    vals = system.psi(t, lmax=system.lmax)
    # Nystrom operator acting on node values
    Kop = (vals[:, :n] @ vals[:, :n].T) * w[None, :]
    tails = vals[:, n + offsets]
    eps_tails = system.grid.epsilon_values(system.psi_nodes, x=t)[:, n + offsets]

    eig = np.linalg.eigvalsh(
        np.sqrt(w)[:, None] * (vals[:, :n] @ vals[:, :n].T) * np.sqrt(w)[None, :]
    )
    margin = float(np.min(np.abs(1.0 - tdelta * eig)))
    if margin < 1e-6:
        raise RuntimeError("resolvent nearly singular at this x; pick another x")
    resolvent = np.linalg.solve(np.eye(t.size) - tdelta * Kop, tails)

    def pair(left, right):
        return left.T @ (w[:, None] * right)

    res_pair = n * np.abs(pair(resolvent, eps_tails))
    flat_pair = n * np.abs(pair(tails, eps_tails))
    smooth_pair = n * np.abs(pair(tails, Kop @ eps_tails))
    defect = Kop @ eps_tails - Kop @ (Kop @ eps_tails)
    defect_norms = n * np.sqrt(w @ defect**2)
    ones = np.ones_like(t)
    flat_mom = np.sqrt(n) * np.abs(pair(tails, ones[:, None])).ravel()
    smooth_mom = np.sqrt(n) * np.abs(pair(Kop @ tails, ones[:, None])).ravel()
    fd = Kop @ ones - Kop @ (Kop @ ones)
    flat_defect = float(np.sqrt(n) * np.sqrt(w @ fd**2))

    ad = abs(delta)
    implied = {
        "resolvent_over_delta": float(np.max(res_pair) / ad),
        "flat_over_delta": float(np.max(flat_pair) / ad),
        "smoothed_over_delta": float(np.max(smooth_pair) / ad),
        "defect": float(np.max(defect_norms)),
        "flat_moment_over_delta": float(np.max(flat_mom) / ad),
        "smoothed_moment_over_delta": float(np.max(smooth_mom) / ad),
        "flat_defect": flat_defect,
    }
    return WidomBoundReport(
        n=n,
        interval=tuple(map(float, interval)),
        x=float(x),
        delta_n=float(delta),
        tilde_delta_n=tdelta,
        offsets=offsets,
        resolvent_pairings=res_pair,
        flat_pairings=flat_pair,
        smoothed_pairings=smooth_pair,
        defect_norms=defect_norms,
        flat_moments=flat_mom,
        smoothed_moments=smooth_mom,
        flat_defect=flat_defect,
        resolvent_margin=margin,
        implied_constants=implied,
    )
