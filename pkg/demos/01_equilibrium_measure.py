"""
Equilibrium measures for confined log-gases
===========================================

The eigenvalues of a beta-ensemble with confining potential V pile up, as the
matrix size grows, on a deterministic limit shape: the equilibrium measure.
For one-cut potentials it is supported on a single interval [a, b] and has a
density of the form rho(x) = P(x) * sqrt((b - x)(x - a)) with P a polynomial.

This script computes the equilibrium measure for the Gaussian potential
V(x) = x^2 / 2 (where the answer is Wigner's semicircle on [-2, 2]) and for
the pure quartic V(x) = x^4 / 4, and checks the variational characterization:
the effective potential V(x) - 2 * integral log|x - y| rho(y) dy is constant
on the support and strictly larger off it.
"""

import numpy as np

from betacount.equilibrium import (
    PolynomialPotential,
    effective_potential,
    equilibrium_density,
    solve_one_cut_support,
)

# ---------------------------------------------------------------------------
# The Gaussian potential: V(x) = x^2 / 2.
#
# Coefficients are given lowest-degree first, so x^2 / 2 is (0, 0, 0.5).
# ---------------------------------------------------------------------------
gauss = PolynomialPotential((0.0, 0.0, 0.5))
support = solve_one_cut_support(gauss)
a, b = support.endpoints
print("Gaussian potential V(x) = x^2/2")
print(f"  support            = [{a:+.12f}, {b:+.12f}]   (exact: [-2, 2])")

measure = equilibrium_density(gauss)
print(f"  rho(0)             = {measure.rho(0.0):.12f}   (exact: 1/pi = {1/np.pi:.12f})")
print(f"  total mass         = {measure.interval_masses(nodes=400)[0]:.12f}")

# The density should be the semicircle rho(x) = sqrt(4 - x^2) / (2 pi).
x = np.linspace(a, b, 7)
semicircle = np.sqrt(np.maximum(4.0 - x**2, 0.0)) / (2.0 * np.pi)
err = np.max(np.abs(measure.rho(x) - semicircle))
print(f"  max |rho - semicircle| on 7 probes = {err:.3e}")

# ---------------------------------------------------------------------------
# The variational inequality.
#
# v(x) = 2 (U rho)(x) - V(x) is constant (= v_star) on the support and
# strictly smaller outside, i.e. the gap v_star - v(x) is positive off the
# support; this is what makes the measure the minimizer of the weighted
# logarithmic energy.
# ---------------------------------------------------------------------------
veff = effective_potential(gauss, measure)
print(f"  max |v - v_star| on support = {veff.on_support_deviation:.3e}")
off_probes = (-3.0, 2.5, 4.0)
gaps = ", ".join(f"{veff.off_support_gap(t):.4f}" for t in off_probes)
print(f"  gap v_star - v at {off_probes} = {gaps}  (all > 0)")

# ---------------------------------------------------------------------------
# A quartic potential: V(x) = x^4 / 4.
#
# The support is [-A, A] with A = (16/3)^(1/4), and the density gains a
# polynomial factor P(x) = (x^2 + A^2/2) / (2 pi).
# ---------------------------------------------------------------------------
quartic = PolynomialPotential((0.0, 0.0, 0.0, 0.0, 0.25))
support4 = solve_one_cut_support(quartic)
A = (16.0 / 3.0) ** 0.25
print("\nQuartic potential V(x) = x^4/4")
print(f"  support            = [{support4.endpoints[0]:+.12f}, {support4.endpoints[1]:+.12f}]")
print(f"  exact endpoints    = [{-A:+.12f}, {A:+.12f}]")

measure4 = equilibrium_density(quartic)
veff4 = effective_potential(quartic, measure4)
print(f"  total mass         = {measure4.interval_masses(nodes=400)[0]:.12f}")
print(f"  max |v - v_star| on support = {veff4.on_support_deviation:.3e}")
print(f"  gap at 1.5 * A     = {veff4.off_support_gap(1.5 * A):.6f}  (> 0, off support)")
