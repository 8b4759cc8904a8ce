"""Orthonormal functions for the varying weight e^{-nV} and their kernel.

The objects here are the weighted functions psi_l = p_l e^{-nV/2}, where the
p_l are orthonormal polynomials for the weight e^{-nV}.  Raw p_l overflow for
moderate l, so every evaluation runs the three-term recurrence directly on
the weighted values; the recurrence is linear, so the weighting commutes
with it.  The recurrence coefficients come from a discretized Stieltjes
(Lanczos) procedure with full reorthogonalization on a Gauss-Legendre grid.

Grid placement: psi_l for l <= n decays off the equilibrium support like
e^{-n(v* - v(lam))/2} with v the effective potential, so the grid covers the
region where n(v* - v) <= 60 plus a safety pad.  (Thresholding the bare
weight e^{-nV} instead would cut the grid inside the support: at the support
edge the weight is already exponentially small and only the polynomial
growth of p_l keeps psi_l of order one.)

The reproducing kernel K_n of {psi_0..psi_{n-1}} is evaluated through the
Christoffel-Darboux formula with an analytic derivative form near the
diagonal, and its restriction to an interval is discretized in the
manifestly positive Gram form A = (Psi W^{1/2})^T (Psi W^{1/2}).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .equilibrium import effective_potential, equilibrium_density
from .quadrature import SpectralGrid, gauss_legendre

# weight-window threshold: keep grid out to n (v* - v) = _TAIL_EXPONENT
_TAIL_EXPONENT = 60.0
_DIAG_SWITCH = 1e-6  # relative separation below which CD uses the derivative form


class OrthonormalityError(RuntimeError):
    """Discretized Stieltjes procedure lost orthogonality."""


def _weight_window(eff, n, pad_frac=0.08, tail_exponent=_TAIL_EXPONENT):
    """[lo, hi] covering the region where weighted functions are above underflow.

    The geometric pad beyond the e^{-60} envelope cut shrinks like n^{-1/2}:
    the envelope steepens with n, and an overly generous pad at large n would
    push the seed exponent n(V - min V)/2 past the range of double precision.
    A final clip enforces exactly that representability bound.
    """
    sup = eff.measure.support
    diam = sup.diameter
    target = tail_exponent / n
    pad = pad_frac * diam * min(np.sqrt(100.0 / n), 1.5)

    def outward_cut(edge, direction):
        step = diam
        far = edge + direction * step
        for _ in range(60):
            if eff.off_support_gap(far) >= target:
                break
            step *= 2.0
            far = edge + direction * step
        near = edge
        for _ in range(80):
            mid = 0.5 * (near + far)
            if eff.off_support_gap(mid) < target:
                near = mid
            else:
                far = mid
        return far

    lo = outward_cut(sup.endpoints[0], -1.0) - pad
    hi = outward_cut(sup.endpoints[-1], +1.0) + pad

    # keep n (V - min V)/2 below ~690 so e^{-nV/2} never underflows to zero
    pot = eff.measure.potential
    scan = np.linspace(lo, hi, 2001)
    vmin = float(np.min(pot(scan)))

    def exponent_ok(lam):
        return 0.5 * n * (pot(lam) - vmin) <= 690.0

    for _ in range(60):
        if exponent_ok(lo):
            break
        lo += 0.01 * diam
    for _ in range(60):
        if exponent_ok(hi):
            break
        hi -= 0.01 * diam
    return lo, hi


def _default_grid_size(total_funcs):
    """Node count for the Stieltjes grid.

    The sqrt rule is generous for small systems; for large n the weight
    e^{-nV} itself needs O(n) polynomial degrees to resolve, hence the
    linear floor.  Orthonormality is checked after the build either way.
    """
    return max(int(40.0 * np.sqrt(total_funcs)) + 200, int(2.5 * total_funcs) + 128)


class WeightedPolySystem:
    """Recurrence coefficients and evaluators for psi_l = p_l e^{-nV/2}.

    Attributes
    ----------
    n : weight parameter (ensemble size).
    lmax : highest available index; psi_0..psi_lmax are built.
    a, b : recurrence coefficients, lam p_l = a_{l+1} p_{l+1} + b_l p_l + a_l p_{l-1},
        stored with a[0] = 0 so that a[l] is valid for l = 1..lmax.
    grid : SpectralGrid over the weight window (used for global inner products).
    psi_nodes, dpsi_nodes : values and derivatives of all psi_l on the grid.
    """

    def __init__(self, pot, n, lmax=None, measure=None, grid_size=None):
        m = pot.half_degree
        self.potential = pot
        self.n = int(n)
        self.lmax = int(lmax) if lmax is not None else self.n + 2 * m + 1
        if self.lmax > self.n + 4 * m:
            raise ValueError(
                f"lmax = {self.lmax} exceeds n + 4m = {self.n + 4 * m}; "
                "higher indices are outside the validated range"
            )
        if self.lmax < self.n + 2 * m - 1:
            raise ValueError("need indices up to n + 2m - 1 for the kernel blocks")
        self.measure = measure if measure is not None else equilibrium_density(pot)
        self.effective = effective_potential(pot, self.measure)

        lo, hi = _weight_window(self.effective, self.n)
        size = grid_size if grid_size is not None else _default_grid_size(self.lmax + 1)
        self.grid = SpectralGrid(size, lo, hi)

        x, w = self.grid.nodes, self.grid.weights
        vbar = pot(x)
        self._vshift = float(np.min(vbar))
        vbar -= self._vshift
        # half exponent directly: e^{-nV} may underflow where e^{-nV/2} does not,
        # and the recurrence must regrow from these small but nonzero seeds
        half_weight = np.exp(-0.5 * self.n * vbar)
        self._norm0 = float(np.sqrt(w @ half_weight**2))

        L = self.lmax
        q = np.empty((x.size, L + 1))
        q[:, 0] = half_weight / self._norm0
        a = np.zeros(L + 1)
        b = np.zeros(L + 1)
        scale = self.measure.support.diameter
        for l in range(L):
            b[l] = w @ (x * q[:, l] ** 2)
            u = (x - b[l]) * q[:, l]
            if l > 0:
                u -= a[l] * q[:, l - 1]
            for _ in range(2):  # full reorthogonalization, twice for safety
                u -= q[:, : l + 1] @ (q[:, : l + 1].T @ (w * u))
            a[l + 1] = np.sqrt(w @ u**2)
            if not a[l + 1] > 1e-12 * scale:
                raise OrthonormalityError(
                    f"recurrence breakdown at l = {l + 1} (a = {a[l + 1]:.3e})"
                )
            q[:, l + 1] = u / a[l + 1]
        b[L] = w @ (x * q[:, L] ** 2)
        self.a, self.b = a, b
        self.psi_nodes = q

        # derivatives via the differentiated recurrence on the same values
        dq = np.empty_like(q)
        dq[:, 0] = -0.5 * self.n * pot.deriv(x) * q[:, 0]
        for l in range(L):
            dprev = dq[:, l - 1] if l > 0 else 0.0
            dq[:, l + 1] = ((x - b[l]) * dq[:, l] + q[:, l] - a[l] * dprev) / a[l + 1]
        self.dpsi_nodes = dq

        gram = q.T @ (w[:, None] * q)
        self.ortho_residual = float(np.max(np.abs(gram - np.eye(L + 1))))
        if self.ortho_residual > 1e-8:
            raise OrthonormalityError(
                f"orthonormality residual {self.ortho_residual:.3e} > 1e-8; "
                "quadrature grid too coarse"
            )

    # -- evaluation ---------------------------------------------------------

    def psi(self, lam, lmax=None, with_deriv=False):
        """Matrix of psi_l(lam) for l = 0..lmax, one row per point.

        Runs the weighted recurrence forward; with_deriv also propagates
        psi_l' through the differentiated recurrence (no finite differences).
        """
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        L = self.lmax if lmax is None else int(lmax)
        if L > self.lmax:
            raise ValueError(f"index {L} above built range {self.lmax}")
        a, b, n = self.a, self.b, self.n
        q = np.empty((lam.size, L + 1))
        q[:, 0] = np.exp(-0.5 * n * (self.potential(lam) - self._vshift)) / self._norm0
        if with_deriv:
            dq = np.empty_like(q)
            dq[:, 0] = -0.5 * n * self.potential.deriv(lam) * q[:, 0]
        for l in range(L):
            prev = q[:, l - 1] if l > 0 else 0.0
            q[:, l + 1] = ((lam - b[l]) * q[:, l] - a[l] * prev) / a[l + 1]
            if with_deriv:
                dprev = dq[:, l - 1] if l > 0 else 0.0
                dq[:, l + 1] = ((lam - b[l]) * dq[:, l] + q[:, l] - a[l] * dprev) / a[
                    l + 1
                ]
        return (q, dq) if with_deriv else q


def build_system(pot, n, lmax=None, measure=None, grid_size=None):
    """Construct the weighted orthonormal system for e^{-nV}."""
    return WeightedPolySystem(pot, n, lmax=lmax, measure=measure, grid_size=grid_size)


def eval_psi(system, l, lam):
    """psi_l(lam) for a single index l."""
    vals = system.psi(lam, lmax=l)[:, l]
    return float(vals[0]) if vals.size == 1 and np.ndim(lam) == 0 else vals


def kernel_cd(system, lam, mu):
    """Reproducing kernel K_n(lam, mu) by the Christoffel-Darboux formula.

    Returns the matrix K[i, j] = K_n(lam[i], mu[j]); scalars in, scalar out.
    Pairs closer than a relative separation of 1e-6 switch to the analytic
    derivative form at the midpoint to avoid cancellation.
    """
    scalar = np.ndim(lam) == 0 and np.ndim(mu) == 0
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    n = system.n
    an = system.a[n]
    ql = system.psi(lam, lmax=n)
    qm = system.psi(mu, lmax=n)
    num = an * (
        np.outer(ql[:, n], qm[:, n - 1]) - np.outer(ql[:, n - 1], qm[:, n])
    )
    den = lam[:, None] - mu[None, :]
    near = np.abs(den) < _DIAG_SWITCH * system.measure.support.diameter
    out = num / np.where(near, 1.0, den)
    if np.any(near):
        mid = (0.5 * (lam[:, None] + mu[None, :]))[near]
        qd, dqd = system.psi(mid, lmax=n, with_deriv=True)
        out[near] = an * (dqd[:, n] * qd[:, n - 1] - dqd[:, n - 1] * qd[:, n])
    return float(out[0, 0]) if scalar else out


@dataclass
class DiscretizedKernel:
    """Quadrature-discretized integral operator on an interval.

    matrix holds A_ij = w_i^{1/2} K(t_i, t_j) w_j^{1/2} when symmetrized
    (the convention for the symmetric reproducing kernel), or plain right
    weighting K(t_i, t_j) w_j otherwise.  factor, when present, is the
    Gram square root: A = factor @ factor.T with factor = Psi * w^{1/2}.
    """

    interval: tuple
    nodes: np.ndarray
    weights: np.ndarray
    matrix: np.ndarray
    symmetrized: bool
    factor: np.ndarray | None = None
    _spectrum: np.ndarray | None = field(default=None, repr=False)

    @property
    def trace(self):
        return float(np.trace(self.matrix))

    @property
    def spectrum(self):
        """Nonzero eigenvalues (via the small Gram matrix when factored)."""
        if self._spectrum is None:
            if self.factor is not None:
                gram = self.factor.T @ self.factor
                self._spectrum = np.linalg.eigvalsh(gram)
            elif self.symmetrized:
                self._spectrum = np.linalg.eigvalsh(self.matrix)
            else:
                self._spectrum = np.sort(np.linalg.eigvals(self.matrix))
        return self._spectrum


def projection_node_count(system, interval, per_wavelength=10.0):
    """Quadrature size for an interval kernel: nodes per kernel oscillation.

    The kernel wavelength in the bulk is 1/(n rho), so an interval holds
    about n |interval| max(rho) oscillations.
    """
    a, b = interval
    scan = np.linspace(a, b, 201)
    max_rho = float(np.max(system.measure.rho(scan)))
    return max(int(np.ceil(per_wavelength * system.n * (b - a) * max_rho)), 64)


def project_kernel(system, interval, num_nodes=None):
    """Restriction K_n[interval] as a symmetrized Nystrom matrix.

    The matrix is assembled in Gram form from the first n functions, which
    makes positive semi-definiteness automatic; the eigenvalue range
    [0, 1] is still checked and failures point at a too-coarse grid.
    """
    a, b = interval
    if not a < b:
        raise ValueError("empty interval")
    sup = system.measure.support
    diam = sup.diameter
    if a < sup.endpoints[0] + 0.05 * diam or b > sup.endpoints[-1] - 0.05 * diam:
        raise ValueError(
            f"interval [{a:.4g}, {b:.4g}] too close to the spectral edges; "
            "need a 5% margin inside the support"
        )
    if num_nodes is None:
        num_nodes = projection_node_count(system, interval)
    t, w = gauss_legendre(num_nodes, a, b)
    factor = system.psi(t, lmax=system.n - 1) * np.sqrt(w)[:, None]
    matrix = factor @ factor.T
    kern = DiscretizedKernel(
        interval=(float(a), float(b)),
        nodes=t,
        weights=w,
        matrix=matrix,
        symmetrized=True,
        factor=factor,
    )
    spec = kern.spectrum
    if spec.min() < -1e-8 or spec.max() > 1.0 + 1e-8:
        raise ValueError(
            f"projected spectrum [{spec.min():.3e}, {spec.max():.3e}] outside "
            "[0, 1]; increase num_nodes"
        )
    return kern


def bulk_sine_compare(system, lam0, window, points=41):
    """Sup deviation of the rescaled kernel from sin(pi(u-v))/(pi(u-v)).

    Rescaling: K_n(lam0 + u/(n rho0), lam0 + v/(n rho0)) / (n rho0) over
    |u|, |v| <= window, with rho0 the equilibrium density at lam0.
    """
    sup = system.measure.support
    diam = sup.diameter
    if min(abs(lam0 - e) for e in sup.endpoints) < 0.1 * diam:
        raise ValueError("lam0 too close to a spectral edge for bulk scaling")
    rho0 = float(system.measure.rho(lam0))
    u = np.linspace(-window, window, points)
    lam = lam0 + u / (system.n * rho0)
    kern = kernel_cd(system, lam, lam) / (system.n * rho0)
    sine = np.sinc(u[:, None] - u[None, :])
    return float(np.max(np.abs(kern - sine)))


def vn_decay(system, interval, lam):
    """v_n(lam) = int_interval K_n(lam, mu) dmu for lam outside the interval."""
    scalar = np.ndim(lam) == 0
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    a, b = interval
    if np.any((lam >= a) & (lam <= b)):
        raise ValueError("v_n is defined on the complement of the interval")
    t, w = gauss_legendre(projection_node_count(system, interval), a, b)
    vals = kernel_cd(system, lam, t) @ w
    return float(vals[0]) if scalar else vals


def vn_decay_report(system, interval, scan=60):
    """Decay diagnostics for v_n: envelope constant and complement L2 norm.

    The envelope model is |v_n(lam)| <= C [1/(1 + n d_a) + 1/(1 + n d_b)]
    with d_a, d_b the distances to the interval endpoints; fitted_C is the
    smallest C that works on a two-sided scan.  l2_norm integrates v_n^2
    over the complement inside the weight window; scaled_l2 = sqrt(n) l2.
    """
    a, b = interval
    n = system.n
    lo, hi = system.grid.lo, system.grid.hi
    pieces = [(lo, a), (b, hi)]
    # envelope scan, denser near the interval edges
    lams = np.concatenate(
        [a - np.geomspace(0.25 / n, 0.98 * (a - lo), scan),
         b + np.geomspace(0.25 / n, 0.98 * (hi - b), scan)]
    )
    vals = np.abs(vn_decay(system, interval, lams))
    envelope = 1.0 / (1.0 + n * np.abs(lams - a)) + 1.0 / (1.0 + n * np.abs(lams - b))
    fitted_c = float(np.max(vals / envelope))
    norm_sq = 0.0
    for piece in pieces:
        t, w = gauss_legendre(max(3 * n, 300), *piece)
        norm_sq += float(w @ vn_decay(system, interval, t) ** 2)
    l2 = np.sqrt(norm_sq)
    return {
        "fitted_C": fitted_c,
        "l2_norm": l2,
        "scaled_l2": float(np.sqrt(n) * l2),
    }
