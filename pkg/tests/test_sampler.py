"""Tests for the Monte Carlo samplers and counting statistics.

Oracles:
- The tridiagonal construction is exact for the quadratic potential, so its
  spectral histogram must match the semicircle density sqrt(4 - x^2)/(2 pi)
  and its spectrum must stay within the support [-2, 2] up to edge
  fluctuations.
- For iid Gaussian "counts" with variance s^2 the centered exponential
  moment is exactly x_n^2 s^2 / 2.
- For an AR(1) chain with coefficient r, the integrated autocorrelation
  time is r / (1 - r).
- The Metropolis chain targets the same density as the tridiagonal
  construction at V = l^2/2, so interval counts from the two routes must
  agree within joint Monte Carlo error.
"""

import numpy as np
import pytest

from betacount.equilibrium import PolynomialPotential
from betacount.sampler import (
    EnsembleSample,
    count_in_interval,
    empirical_char_functional,
    integrated_autocorrelation,
    mcmc_sample,
    normality_test,
    tridiag_gaussian_sample,
)

GAUSS = PolynomialPotential([0.0, 0.0, 0.5])


@pytest.fixture(scope="module")
def tridiag_small():
    return tridiag_gaussian_sample(2, 50, 4000, seed=61)


def test_tridiag_support():
    s = tridiag_gaussian_sample(2, 400, 200, seed=11)
    assert s.eigenvalues.min() > -2.1
    assert s.eigenvalues.max() < 2.1
    # rows sorted
    assert np.all(np.diff(s.eigenvalues, axis=1) >= 0)


def test_tridiag_semicircle_histogram():
    s = tridiag_gaussian_sample(2, 200, 2000, seed=7)
    bins = np.linspace(-2, 2, 41)
    hist, _ = np.histogram(s.eigenvalues.ravel(), bins=bins, density=True)
    mids = 0.5 * (bins[1:] + bins[:-1])
    rho = np.sqrt(np.maximum(4 - mids**2, 0.0)) / (2 * np.pi)
    assert np.max(np.abs(hist - rho)) < 0.05


def test_tridiag_deterministic():
    a = tridiag_gaussian_sample(1, 30, 5, seed=9).eigenvalues
    b = tridiag_gaussian_sample(1, 30, 5, seed=9).eigenvalues
    assert np.array_equal(a, b)


def test_tridiag_rejects_bad_beta():
    with pytest.raises(ValueError):
        tridiag_gaussian_sample(3, 10, 2)


def test_mcmc_deterministic():
    a = mcmc_sample(GAUSS, 2, 20, 5, seed=9, burn_in=50).eigenvalues
    b = mcmc_sample(GAUSS, 2, 20, 5, seed=9, burn_in=50).eigenvalues
    assert np.array_equal(a, b)


def test_mcmc_acceptance_tuned():
    s = mcmc_sample(GAUSS, 2, 50, 100, seed=5)
    assert s.healthy
    assert 0.2 < s.acceptance_rate < 0.6
    assert s.method == "mcmc"


def test_mcmc_matches_tridiagonal(tridiag_small):
    mc = mcmc_sample(GAUSS, 2, 50, 400, seed=5)
    cm = count_in_interval(mc, (-1.0, 1.0))
    ct = count_in_interval(tridiag_small, (-1.0, 1.0))
    tau = integrated_autocorrelation(cm)
    ess = cm.size / (1 + 2 * tau)
    se = np.sqrt(cm.var() / ess + ct.var() / ct.size)
    assert abs(cm.mean() - ct.mean()) < 3.0 * se
    # fluctuations on a comparable scale too
    assert 0.5 < cm.var() / ct.var() < 2.0


def test_mcmc_quartic_stays_on_support():
    pot = PolynomialPotential([0.0, 0.0, -1.0, 0.0, 1.0])
    s = mcmc_sample(pot, 2, 30, 50, seed=13)
    assert s.healthy
    assert np.max(np.abs(s.eigenvalues)) < 2.0


def test_count_closed_interval_edges():
    sample = np.array([[-1.0, 0.0, 1.0]])
    assert count_in_interval(sample, (-1.0, 1.0))[0] == 3
    assert count_in_interval(sample, (-0.999, 1.0))[0] == 2
    assert count_in_interval(sample, (-1.0, 0.999))[0] == 2
    assert count_in_interval(sample, (0.5, 0.6))[0] == 0
    assert count_in_interval(sample, (0.0, 0.0))[0] == 1
    with pytest.raises(ValueError):
        count_in_interval(sample, (1.0, -1.0))


def test_count_accepts_ensemble(tridiag_small):
    c = count_in_interval(tridiag_small, (-2.5, 2.5))
    assert np.all(c == 50)


def test_empirical_char_functional_gaussian_oracle():
    rng = np.random.default_rng(42)
    sig = 1.3
    fake = rng.normal(10.0, sig, size=40000)
    emp = empirical_char_functional(fake, [0.5, 1.0], 100)
    for i in range(emp.x.size):
        exact = 0.5 * emp.x_n[i] ** 2 * sig**2
        assert abs(emp.log_phi[i] - exact) < 4.0 * emp.std_error[i]
    assert emp.tau < 0.2
    assert emp.ess > 30000


def test_empirical_char_functional_rejects_low_ess():
    rng = np.random.default_rng(3)
    z = np.empty(300)
    z[0] = 0.0
    eps = rng.normal(size=300)
    for i in range(1, 300):
        z[i] = 0.995 * z[i - 1] + 0.1 * eps[i]
    with pytest.raises(RuntimeError, match="effective sample size"):
        empirical_char_functional(z, 0.5, 100)


def test_integrated_autocorrelation_ar1():
    rng = np.random.default_rng(8)
    rho = 0.6
    m = 20000
    z = np.empty(m)
    z[0] = 0.0
    eps = rng.normal(size=m)
    for i in range(1, m):
        z[i] = rho * z[i - 1] + eps[i]
    tau = integrated_autocorrelation(z)
    exact = rho / (1 - rho)
    assert abs(tau - exact) / exact < 0.25
    # iid input has essentially no autocorrelation
    iid = np.random.default_rng(100).normal(size=5000)
    assert integrated_autocorrelation(iid) < 0.15


def test_normality_test_lattice_correction():
    rng = np.random.default_rng(17)
    lattice = np.round(rng.normal(20.0, 3.0, size=3000))
    rep = normality_test(lattice)
    assert rep.p_value > 0.05
    assert abs(rep.mean - 20.0) < 0.3
    # clearly non-normal counts must fail hard
    bad = rng.integers(0, 40, size=3000).astype(float)
    rep2 = normality_test(bad)
    assert rep2.p_value < 1e-6


def test_normality_test_guards():
    with pytest.raises(ValueError):
        normality_test(np.arange(5.0))
    with pytest.raises(ValueError):
        normality_test(np.full(50, 7.0))


def test_variance_grows_with_n():
    v = {}
    for n in (50, 400):
        s = tridiag_gaussian_sample(2, n, 1500, seed=23 + n)
        v[n] = count_in_interval(s, (-1.0, 1.0)).var()
    assert v[400] > v[50]


def test_beta_ordering_of_variance():
    v = {}
    for beta in (1, 2, 4):
        s = tridiag_gaussian_sample(beta, 100, 2000, seed=31 + beta)
        v[beta] = count_in_interval(s, (-1.0, 1.0)).var()
    assert v[1] > v[2] > v[4]
