"""Empirical Bayes estimation by f-modeling and g-modeling on discrete grids."""

from .classic import (
    FdrCurve,
    TweedieCurve,
    fdr_curve_gmodel,
    james_stein,
    pi0_from_max,
    robbins_estimate,
    tweedie_curve,
    ufdr_curve,
)
from .errors import ConfigError, ConvergenceError, DataError, EBayesError, NumericalError
from .fmodel import (
    EstimateWithAccuracy,
    PseudoInverse,
    UVWVectors,
    estimate_E_hat,
    generalized_pseudo_inverse,
    projection_prior,
    pseudo_inverse,
    sample_size_for_cv,
    theorem1_accuracy,
    theorem2_accuracy,
    theorem3_accuracy,
    uvw_vectors,
)
from .gmodel import (
    GModelFit,
    GModelSpec,
    fisher_information,
    fit_mle,
    g_covariance,
    log_likelihood_and_score,
    prior_from_alpha,
    theorem4_accuracy,
)
from .grid import (
    DiscreteModel,
    make_grid,
    make_uv,
    marginal,
    normal_sampling_matrix,
    posterior_distribution,
    posterior_expectation,
)
from .poisson import CountVector, PoissonFit, bin_observations, delta_covariance, fit_poisson_glm
from .splines import BasisMatrix, augment_with_spike, natural_spline_basis

__version__ = "0.1.0"
