"""Spectral Galerkin simulation of semilinear stochastic heat equations.

The model is ``dX = (Delta X + F(X)) dt + dW`` on ``(0, pi)`` with Dirichlet
boundary conditions and a Q-Wiener process ``W`` whose spatial correlation
is a translation-invariant kernel.  Space is discretized in the sine
eigenbasis of the Laplacian and time by the exponential Euler scheme, with
the stochastic convolution sampled exactly.
"""
__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    DivergenceError,
    DomainError,
    FactorizationError,
    FitError,
    NoiseMismatchError,
    StochHeatError,
)
from .spectral import (
    CollocationGrid,
    Eigenbasis,
    SpectralField,
    eigenfunction_eval,
    project,
    semigroup_apply,
    sup_norm,
)
from .covariance import (
    CovarianceFactor,
    CovarianceMatrix,
    Kernel,
    assemble_covariance,
    factorize,
    kernel_eval,
    regularity_sum,
)
from .noise import (
    BrownianHierarchy,
    OUPath,
    couple_restrict,
    holder_quotient,
    ou_increment_cov,
    ou_path_euler_reference,
    ou_path_exact,
    sample_brownian,
)
from .scheme import (
    Nonlinearity,
    SchemeConfig,
    Trajectory,
    boundedness_report,
    nemytskii_apply,
    two_mode_initial_condition,
    simulate,
    step,
)
from .harness import (
    ErrorRecord,
    ExperimentConfig,
    RateFit,
    fit_rate,
    load_config,
    load_preset,
    pathwise_error,
    run_convergence_study,
)
from ._backend import NAME as BACKEND
