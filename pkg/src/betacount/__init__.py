"""Numerical laboratory for eigenvalue counting statistics of beta-ensembles.

The package is organized as a pipeline:

- ``equilibrium``: one-cut equilibrium measures of polynomial potentials and
  their variational diagnostics.
- ``quadrature``: Gauss-Legendre and edge-adapted rules plus the spectral
  grids everything downstream evaluates on.
- ``orthopoly``: weighted orthogonal-polynomial systems, the reproducing
  (Christoffel-Darboux) kernel, and its projection onto a counting window.
- ``matrix_kernels``: the 2x2 block kernels governing the beta = 1 and
  beta = 4 Pfaffian processes, and their Widom finite-rank decomposition.
- ``fredholm``: characteristic functionals of counts as (block) Fredholm
  determinants, variance traces, and correction bounds.
- ``sampler``: exact tridiagonal and Metropolis Monte Carlo samplers with
  autocorrelation-aware empirical counterparts of the functionals.
- ``cli``: the ``betacount`` command-line entry point.
"""

from .equilibrium import (
    EffectivePotential,
    EquilibriumMeasure,
    PolynomialPotential,
    SupportSet,
    check_genericity,
    effective_potential,
    equilibrium_density,
    solve_one_cut_support,
)
from .fredholm import (
    CharFunctionalResult,
    WidomBoundReport,
    char_functional_beta2,
    char_functional_block,
    char_functional_scalar_reduced,
    scaled_parameters,
    variance_trace,
    widom_correction_bounds,
)
from .matrix_kernels import (
    MatrixKernel,
    OperatorMatrices,
    WidomDecomposition,
    assemble_block_kernel,
    build_operator_matrices,
    build_S1,
    build_S4,
    identity_residuals,
    rank_one_P,
    widom_decompose,
)
from .orthopoly import (
    DiscretizedKernel,
    WeightedPolySystem,
    build_system,
    kernel_cd,
    project_kernel,
    projection_node_count,
    vn_decay,
    vn_decay_report,
)
from .quadrature import SpectralGrid, gauss_legendre
from .sampler import (
    EmpiricalCharFunctional,
    EnsembleSample,
    NormalityReport,
    count_in_interval,
    empirical_char_functional,
    integrated_autocorrelation,
    mcmc_sample,
    normality_test,
    tridiag_gaussian_sample,
)

__version__ = "0.1.0"

__all__ = [
    "CharFunctionalResult",
    "DiscretizedKernel",
    "EffectivePotential",
    "EmpiricalCharFunctional",
    "EnsembleSample",
    "EquilibriumMeasure",
    "MatrixKernel",
    "NormalityReport",
    "OperatorMatrices",
    "PolynomialPotential",
    "SpectralGrid",
    "SupportSet",
    "WeightedPolySystem",
    "WidomBoundReport",
    "WidomDecomposition",
    "assemble_block_kernel",
    "build_operator_matrices",
    "build_S1",
    "build_S4",
    "build_system",
    "char_functional_beta2",
    "char_functional_block",
    "char_functional_scalar_reduced",
    "check_genericity",
    "count_in_interval",
    "effective_potential",
    "empirical_char_functional",
    "equilibrium_density",
    "gauss_legendre",
    "identity_residuals",
    "integrated_autocorrelation",
    "kernel_cd",
    "mcmc_sample",
    "normality_test",
    "project_kernel",
    "projection_node_count",
    "rank_one_P",
    "scaled_parameters",
    "solve_one_cut_support",
    "tridiag_gaussian_sample",
    "variance_trace",
    "vn_decay",
    "vn_decay_report",
    "widom_correction_bounds",
    "widom_decompose",
    "__version__",
]
