"""Gauss-Legendre rules and spectral primitives on a fixed grid.

Everything downstream integrates against smooth (if oscillatory) functions
times weights that decay fast, so a single mapped Gauss-Legendre rule per
interval is the workhorse.  The grid object also carries an exact
antiderivative of the Legendre interpolant, which is what the whole-line
integral operator with kernel sgn(x - y)/2 is built from.
"""

from __future__ import annotations

import numpy as np


def gauss_legendre(num, lo, hi):
    """Gauss-Legendre nodes and weights mapped to [lo, hi]."""
    if num < 1:
        raise ValueError("need at least one node")
    if not hi > lo:
        raise ValueError("empty interval")
    xi, w = np.polynomial.legendre.leggauss(int(num))
    half = 0.5 * (hi - lo)
    return 0.5 * (hi + lo) + half * xi, half * w


def edge_adapted_rule(num, lo, hi):
    """Rule on [lo, hi] absorbing inverse-sqrt edge behaviour.

    Substitutes x = mid + radius*sin(theta); the Jacobian radius*cos(theta)
    cancels the sqrt vanishing of equilibrium densities at band edges, so
    plain Gauss-Legendre in theta converges spectrally.
    """
    theta, w = gauss_legendre(num, -0.5 * np.pi, 0.5 * np.pi)
    mid = 0.5 * (hi + lo)
    rad = 0.5 * (hi - lo)
    return mid + rad * np.sin(theta), w * rad * np.cos(theta)


def _legendre_vandermonde(xi, kmax):
    """Rows P_0..P_kmax evaluated at points xi, by the standard recurrence."""
    out = np.empty((kmax + 1, xi.size))
    out[0] = 1.0
    if kmax >= 1:
        out[1] = xi
    for k in range(1, kmax):
        out[k + 1] = ((2 * k + 1) * xi * out[k] - k * out[k - 1]) / (k + 1)
    return out


class SpectralGrid:
    """Gauss-Legendre grid on [lo, hi] with modal Legendre services.

    Parameters
    ----------
    num : int
        Node count.
    lo, hi : float
        Interval covering the numerical support of everything integrated.

    The modal transform (values at nodes -> Legendre coefficients of the
    degree num-1 interpolant) is exact at this node count, which makes the
    antiderivative matrix spectrally accurate for resolved functions.
    """

    def __init__(self, num, lo, hi):
        self.lo = float(lo)
        self.hi = float(hi)
        self.nodes, self.weights = gauss_legendre(num, lo, hi)
        self.num = int(num)
        self._half = 0.5 * (self.hi - self.lo)
        self._mid = 0.5 * (self.hi + self.lo)
        self._vand = None
        self._to_modal = None

    def _xi(self, x):
        return (np.asarray(x, dtype=float) - self._mid) / self._half

    @property
    def vandermonde(self):
        if self._vand is None:
            self._vand = _legendre_vandermonde(self._xi(self.nodes), self.num)
        return self._vand

    @property
    def to_modal(self):
        """Matrix taking node values to Legendre coefficients c_0..c_{num-1}."""
        if self._to_modal is None:
            P = self.vandermonde[: self.num]
            k = np.arange(self.num)
            xi_w = self.weights / self._half
            self._to_modal = (0.5 * (2 * k + 1))[:, None] * (P * xi_w[None, :])
        return self._to_modal

    def integrate(self, values):
        return self.weights @ np.asarray(values)

    def modal(self, values):
        """Legendre coefficients of the interpolant, one column per function."""
        return self.to_modal @ np.asarray(values)

    def antiderivative_modal(self, coef):
        """Coefficients of the primitive vanishing at lo (degree + 1)."""
        coef = np.asarray(coef, dtype=float)
        vec = coef.ndim == 1
        if vec:
            coef = coef[:, None]
        num = coef.shape[0]
        out = np.zeros((num + 1, coef.shape[1]))
        out[1] += coef[0]
        if num > 1:
            k = np.arange(1, num)
            fac = coef[1:] / (2 * k + 1)[:, None]
            out[2:] += fac
            out[: num - 1] -= fac
        signs = (-1.0) ** np.arange(num + 1)
        out[0] -= signs @ out
        out *= self._half
        return out[:, 0] if vec else out

    def antiderivative_values(self, values, x=None):
        """Primitive of the interpolant, F(lo) = 0, at nodes or at x.

        values may be a vector or an array with one function per column;
        the result keeps the same layout (points along the first axis).
        """
        coef = self.antiderivative_modal(self.modal(values))
        xi = self._xi(self.nodes if x is None else x)
        out = np.polynomial.legendre.legval(xi, coef)
        return out.T if out.ndim == 2 else out

    def epsilon_values(self, values, x=None):
        """Apply the kernel sgn(x - y)/2 to the interpolant.

        Beyond the grid the result is the exact tail constant, plus or minus
        half the total integral, which callers add themselves if needed.
        """
        total = self.integrate(values)
        return self.antiderivative_values(values, x) - 0.5 * total
