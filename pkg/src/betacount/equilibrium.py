"""Equilibrium measures for polynomial confining potentials.

For an even-degree polynomial V with positive leading coefficient the
minimizer of the log-energy functional is supported on finitely many
intervals.  On a single interval [a, b] the endpoints solve

    int_a^b V'(t) / sqrt((b - t)(t - a)) dt = 0
    (1 / 2 pi) int_a^b t V'(t) / sqrt((b - t)(t - a)) dt = 1

and the density is rho(lam) = P(lam) Im X^{1/2}(lam + i0) / (2 pi), where
X(z) is the product of (z - endpoint) factors and P comes from a contour
integral around the support.  Everything here is desk-scale numerics: damped
Newton for the endpoints, Gauss-Legendre panels for the contour, and a
Chebyshev expansion of the logarithmic kernel for the effective potential

    v(lam) = 2 int log|lam - mu| rho(mu) dmu - V(lam),

which is constant on the support and strictly smaller off it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadrature import edge_adapted_rule, gauss_legendre


class PotentialError(ValueError):
    """Potential outside the admissible class (even degree, positive lead)."""


class OneCutError(RuntimeError):
    """Endpoint iteration failed or produced an inadmissible density."""


class GenericityError(RuntimeError):
    """P(lam) loses positivity on the support (non-generic potential)."""


@dataclass(frozen=True)
class PolynomialPotential:
    """Polynomial V(lam) = sum coeffs[k] lam^k, even degree, positive lead.

    Growth of an admissible even-degree polynomial dominates the logarithm
    automatically, so validation only has to look at degree and sign.
    """

    coeffs: tuple

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size < 3:
            raise PotentialError("need a polynomial of degree at least 2")
        if c[-1] == 0.0:
            raise PotentialError("leading coefficient must not vanish")
        if (c.size - 1) % 2 != 0:
            raise PotentialError("degree must be even")
        if c[-1] < 0.0:
            raise PotentialError("leading coefficient must be positive")
        object.__setattr__(self, "coeffs", tuple(float(x) for x in c))

    @property
    def degree(self):
        return len(self.coeffs) - 1

    @property
    def half_degree(self):
        """m in deg V = 2m; controls the rank of kernel corrections."""
        return self.degree // 2

    def __call__(self, lam):
        return np.polynomial.polynomial.polyval(lam, self.coeffs)

    def deriv(self, lam, order=1):
        c = np.polynomial.polynomial.polyder(self.coeffs, order)
        return np.polynomial.polynomial.polyval(lam, c)

    def deriv_coeffs(self, order=1):
        return np.polynomial.polynomial.polyder(self.coeffs, order)

    def shifted(self, delta):
        """Coefficients of lam -> V(lam + delta)."""
        p = np.polynomial.polynomial.Polynomial(self.coeffs)
        q = p(np.polynomial.polynomial.Polynomial([delta, 1.0]))
        return PolynomialPotential(tuple(q.coef))


def validate_potential(coeffs):
    """Build a PolynomialPotential, raising PotentialError when inadmissible."""
    return PolynomialPotential(tuple(np.asarray(coeffs, dtype=float)))


@dataclass(frozen=True)
class SupportSet:
    """Union of closed intervals, stored as sorted endpoints E_1 < ... < E_2q."""

    endpoints: tuple

    def __post_init__(self):
        e = np.asarray(self.endpoints, dtype=float)
        if e.size % 2 != 0 or e.size == 0:
            raise ValueError("endpoints must come in pairs")
        if np.any(np.diff(e) <= 0):
            raise ValueError("endpoints must be strictly increasing")
        object.__setattr__(self, "endpoints", tuple(float(x) for x in e))

    @property
    def intervals(self):
        e = self.endpoints
        return [(e[2 * i], e[2 * i + 1]) for i in range(len(e) // 2)]

    @property
    def diameter(self):
        return self.endpoints[-1] - self.endpoints[0]

    def contains(self, lam, margin=0.0):
        lam = np.asarray(lam, dtype=float)
        hit = np.zeros(lam.shape, dtype=bool)
        for a, b in self.intervals:
            hit |= (lam >= a - margin) & (lam <= b + margin)
        return hit


_THETA_NODES = 240


def _moment_residuals(pot, center, radius):
    """Residuals of the two endpoint conditions after t = c + r sin(theta).

    The substitution turns both singular integrals into smooth ones:
        F1 = (1/pi) int V'(c + r sin th) dth
        F2 = (1/2 pi) int (c + r sin th) V'(c + r sin th) dth - 1
    """
    theta, w = gauss_legendre(_THETA_NODES, -0.5 * np.pi, 0.5 * np.pi)
    t = center + radius * np.sin(theta)
    dv = pot.deriv(t)
    d2v = pot.deriv(t, 2)
    f1 = (w @ dv) / np.pi
    f2 = (w @ (t * dv)) / (2.0 * np.pi) - 1.0
    # analytic Jacobian
    j11 = (w @ d2v) / np.pi
    j12 = (w @ (np.sin(theta) * d2v)) / np.pi
    j21 = (w @ (dv + t * d2v)) / (2.0 * np.pi)
    j22 = (w @ (np.sin(theta) * (dv + t * d2v))) / (2.0 * np.pi)
    return np.array([f1, f2]), np.array([[j11, j12], [j21, j22]])


def solve_one_cut_support(pot, tol=1e-12, max_iter=80):
    """Endpoints [a, b] of a one-interval equilibrium support.

    Damped Newton on (center, radius).  The starting radius comes from the
    leading monomial, for which the moment condition is explicit.  Raises
    OneCutError when the iteration stalls, which in practice means the true
    support has several intervals (or the potential is critical).
    """
    m = pot.half_degree
    lead = pot.coeffs[-1]
    # (2m)!! / (2m-1)!! ratio for the pure monomial initial radius
    dfac_ratio = 1.0
    for j in range(1, m + 1):
        dfac_ratio *= (2.0 * j) / (2.0 * j - 1.0)
    radius = (2.0 * dfac_ratio / (2.0 * m * lead)) ** (1.0 / (2.0 * m))
    center = 0.0
    if pot.degree >= 2:
        # crude centroid guess from the two top coefficients
        center = -pot.coeffs[-2] / (pot.degree * lead)

    res, jac = _moment_residuals(pot, center, radius)
    for _ in range(max_iter):
        if np.max(np.abs(res)) < tol:
            break
        try:
            step = np.linalg.solve(jac, res)
        except np.linalg.LinAlgError as exc:
            raise OneCutError("singular Jacobian in endpoint iteration") from exc
        scale = 1.0
        for _damp in range(40):
            c_new = center - scale * step[0]
            r_new = radius - scale * step[1]
            if r_new > 0:
                res_new, jac_new = _moment_residuals(pot, c_new, r_new)
                if np.max(np.abs(res_new)) < np.max(np.abs(res)):
                    center, radius, res, jac = c_new, r_new, res_new, jac_new
                    break
            scale *= 0.5
        else:
            raise OneCutError(
                "endpoint iteration stalled; support is likely multi-interval"
            )
    else:
        raise OneCutError("endpoint iteration did not reach tolerance")
    support = SupportSet((center - radius, center + radius))
    _assert_admissible_density(pot, support)
    return support


def _rectangle_contour(support, nodes_total=512):
    """Gauss-Legendre panels on a rectangle enclosing the support.

    Distance from the support is half the spectral diameter in both
    directions.  Returns nodes zeta and complex weights (including dzeta).
    """
    e = np.asarray(support.endpoints)
    d = 0.5 * support.diameter
    left, right = e[0] - d, e[-1] + d
    top = d
    per_side = max(nodes_total // 4, 8)
    corners = [
        complex(right, -top),
        complex(right, top),
        complex(left, top),
        complex(left, -top),
    ]
    zs, ws = [], []
    for i in range(4):
        z0, z1 = corners[i], corners[(i + 1) % 4]
        x, w = gauss_legendre(per_side, 0.0, 1.0)
        zs.append(z0 + (z1 - z0) * x)
        ws.append((z1 - z0) * w)
    return np.concatenate(zs), np.concatenate(ws)


def _sqrt_branch(z, endpoints):
    """X^{1/2}(z) with the branch that behaves like z^q at infinity.

    The product of principal square roots of the individual factors has
    exactly this branch and is continuous across the real axis outside the
    support (an even number of factors flips sign there).
    """
    z = np.asarray(z, dtype=complex)
    out = np.ones_like(z)
    for e in endpoints:
        out = out * np.sqrt(z - e)
    return out


def _divided_difference_matrix(dv_coeffs, z, zeta):
    """(V'(z) - V'(zeta)) / (z - zeta) evaluated exactly as a polynomial.

    Expanding the difference quotient removes the apparent singularity, so
    the contour integrand stays smooth no matter where z sits.  Uses the
    recursion A_{j-1} = zeta A_j + d_j for the inner coefficients while
    running Horner in z over them.
    """
    z = np.asarray(z, dtype=complex)[:, None]
    zeta = np.asarray(zeta, dtype=complex)[None, :]
    deg = len(dv_coeffs) - 1
    shape = np.broadcast_shapes(z.shape, zeta.shape)
    inner = np.full(zeta.shape, dv_coeffs[deg], dtype=complex)
    out = np.broadcast_to(inner, shape).copy()
    for j in range(deg - 1, 0, -1):
        inner = inner * zeta + dv_coeffs[j]
        out = out * z + inner
    return out


class EquilibriumMeasure:
    """Density rho, polynomial factor P and X^{1/2} data for one potential."""

    def __init__(self, pot, support, contour_nodes=512):
        self.potential = pot
        self.support = support
        self._P = _polynomial_factor(pot, support, contour_nodes)
        self._cheb = None
        norm = self.interval_masses().sum()
        if abs(norm - 1.0) > 1e-10:
            raise OneCutError(
                f"density normalization off by {norm - 1.0:.3e}; "
                "support endpoints are inconsistent with the potential"
            )

    def P(self, z):
        """Polynomial factor via the contour integral around the support."""
        vals = self._P(z)
        if np.all(np.abs(vals.imag) < 1e-8 * (1.0 + np.abs(vals.real))):
            vals = vals.real
        return vals if vals.shape != (1,) else vals[0]

    def xhalf_upper(self, lam):
        """Boundary value X^{1/2}(lam + i0) on the real axis."""
        lam = np.asarray(lam, dtype=complex) + 0j
        return _sqrt_branch(lam, self.support.endpoints)

    def rho(self, lam):
        """Equilibrium density on the real line (zero off the support)."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        vals = np.imag(self.xhalf_upper(lam)) * np.real(self.P(lam)) / (2.0 * np.pi)
        vals = np.where(self.support.contains(lam), np.maximum(vals, 0.0), 0.0)
        return vals if vals.shape != (1,) else float(vals[0])

    def interval_masses(self, nodes=400):
        out = []
        for a, b in self.support.intervals:
            x, w = edge_adapted_rule(nodes, a, b)
            out.append(w @ self.rho(x))
        return np.asarray(out)

    def _cheb_data(self, nterms=800):
        """Cosine coefficients of rho against the Chebyshev angle per interval.

        With mu = c + r cos(phi) the combination g(phi) = rho(mu) r sin(phi)
        is smooth and even at both ends (the density vanishes like a square
        root at the endpoints), so the cosine series converges spectrally.
        """
        if self._cheb is None:
            data = []
            msamp = 2 * nterms
            phi = np.pi * np.arange(msamp + 1) / msamp
            for a, b in self.support.intervals:
                c = 0.5 * (a + b)
                r = 0.5 * (b - a)
                g = self.rho(c + r * np.cos(phi)) * r * np.sin(phi)
                # trapezoid in phi == DCT-I; g vanishes at both ends
                kk = np.arange(nterms + 1)
                cosmat = np.cos(np.outer(kk, phi))
                wts = np.full(msamp + 1, np.pi / msamp)
                wts[0] *= 0.5
                wts[-1] *= 0.5
                gk = cosmat @ (wts * g)
                data.append((c, r, gk))
            self._cheb = data
        return self._cheb

    def log_potential(self, lam):
        """U(lam) = int log|lam - mu| rho(mu) dmu, spectrally accurate.

        On the generating interval the classical expansion
        log|cos a - cos b| = -log 2 - 2 sum cos(k a) cos(k b) / k applies;
        seen from outside, the same coefficients contract against powers of
        the inverse Joukowski variable.
        """
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        total = np.zeros_like(lam)
        for c, r, gk in self._cheb_data():
            k = np.arange(1, gk.size)
            w = (lam - c) / r
            inside = np.abs(w) <= 1.0
            out = np.empty_like(lam)
            if np.any(inside):
                psi = np.arccos(np.clip(w[inside], -1.0, 1.0))
                series = np.cos(np.outer(psi, k)) @ (gk[1:] / k)
                out[inside] = gk[0] * np.log(r / 2.0) - 2.0 * series
            if np.any(~inside):
                wo = w[~inside]
                xi = wo + np.sign(wo) * np.sqrt(wo * wo - 1.0)
                series = (xi[:, None] ** (-k)) @ (gk[1:] / k)
                out[~inside] = gk[0] * np.log(r * np.abs(xi) / 2.0) - 2.0 * series
            total += out
        return total if total.shape != (1,) else float(total[0])


def equilibrium_density(pot, support=None, contour_nodes=512):
    """Equilibrium measure for pot, solving for the support when not given.

    Raises GenericityError when P dips below zero anywhere on the support,
    since the representation then stops being a probability density.
    """
    if support is None:
        support = solve_one_cut_support(pot)
    measure = EquilibriumMeasure(pot, support, contour_nodes)
    _assert_admissible_density(pot, support, measure._P)
    return measure


def _polynomial_factor(pot, support, contour_nodes=512):
    """Evaluator for P via the contour integral, shared by all callers."""
    zeta, w = _rectangle_contour(support, contour_nodes)
    inv_xhalf = 1.0 / _sqrt_branch(zeta, support.endpoints)
    dv = pot.deriv_coeffs()

    def P(z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        quot = _divided_difference_matrix(dv, z, zeta)
        vals = (quot * inv_xhalf) @ w / (2.0j * np.pi)
        return vals

    return P


def _assert_admissible_density(pot, support, P=None):
    P = P if P is not None else _polynomial_factor(pot, support)
    for a, b in support.intervals:
        grid = np.linspace(a, b, 201)
        pvals = np.real(P(grid))
        pmin = float(np.min(pvals))
        tol = 1e-9 * max(1.0, float(np.max(np.abs(pvals))))
        if pmin < -tol:
            raise OneCutError(
                f"density would be negative (min P = {pmin:.3e}); "
                "the true support has several intervals"
            )
        if pmin < tol:
            raise GenericityError(
                f"P attains {pmin:.3e} on [{a:.4g}, {b:.4g}]; "
                "potential is critical, not generic"
            )


@dataclass
class EffectivePotential:
    """v(lam) = 2 U(lam) - V(lam) together with its constancy diagnostics."""

    measure: EquilibriumMeasure
    v_star: float = field(init=False)
    on_support_deviation: float = field(init=False)

    def __post_init__(self):
        vals = []
        for a, b in self.measure.support.intervals:
            pad = 1e-9 * (b - a)
            grid = np.linspace(a + pad, b - pad, 257)
            vals.append(self(grid))
        vals = np.concatenate(vals)
        self.v_star = float(np.median(vals))
        self.on_support_deviation = float(np.max(np.abs(vals - self.v_star)))

    def __call__(self, lam):
        u = self.measure.log_potential(lam)
        return 2.0 * u - self.measure.potential(lam)

    def off_support_gap(self, lam):
        """v_star - v(lam); positive off the support for admissible measures."""
        return self.v_star - self(lam)


def effective_potential(pot, measure):
    if measure.potential is not pot:
        measure = equilibrium_density(pot, measure.support)
    return EffectivePotential(measure)


def check_genericity(measure, fit_lo=1e-4, fit_hi=1e-2):
    """Positivity margin of P and square-root edge exponents.

    Returns a dict with min |P| over the support, the fitted log-log slope
    of rho near every endpoint (should be 1/2), and a pass flag.
    """
    sup = measure.support
    diam = sup.diameter
    pmin, pmax = np.inf, 0.0
    for a, b in sup.intervals:
        grid = np.linspace(a, b, 401)
        pvals = np.abs(np.real(measure.P(grid)))
        pmin = min(pmin, float(np.min(pvals)))
        pmax = max(pmax, float(np.max(pvals)))
    exponents = []
    dists = np.geomspace(fit_lo * diam, fit_hi * diam, 24)
    for a, b in sup.intervals:
        for edge, sign in ((a, +1.0), (b, -1.0)):
            lam = edge + sign * dists
            r = measure.rho(lam)
            mask = r > 0
            slope = np.polyfit(np.log(dists[mask]), np.log(r[mask]), 1)[0]
            exponents.append(float(slope))
    ok = pmin > 1e-8 * max(1.0, pmax) and all(
        abs(s - 0.5) < 0.05 for s in exponents
    )
    return {
        "min_abs_P": pmin,
        "edge_exponents": exponents,
        "generic": bool(ok),
    }
