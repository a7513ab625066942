"""gldakit: hierarchical mixture-model toolkit for discrete state discovery
from repeated multivariate observations grouped by subject."""

__version__ = "0.1.0"

from .core import (AssignmentTrace, CohortDataset, GldaParams, GmmParams,
                   PriorConfig, categorical_sample, dirichlet_sample,
                   mvn_logpdf, niw_sample)
from .errors import DataValidationError, GldakitError, NumericalError
from .glda import (GldaFitConfig, GldaPosterior, align_labels, glda_fit,
                   glda_joint_logdensity)
from .gmm import GmmFitConfig, gmm_fit, gmm_hard_assign, realized_proportions
from .ingest import (OutcomeTable, load_cohort, load_outcomes,
                     standardize_within_subject)
from .posterior import glda_membership, state_series
from .synth import SynthConfig, generate_glda, generate_gmm
from .validate import (RegressionResult, compare_models, ols_univariate,
                       validate_weights)

__all__ = [
    "AssignmentTrace", "CohortDataset", "GldaParams", "GmmParams",
    "PriorConfig", "categorical_sample", "dirichlet_sample", "mvn_logpdf",
    "niw_sample", "DataValidationError", "GldakitError", "NumericalError",
    "GldaFitConfig", "GldaPosterior", "align_labels", "glda_fit",
    "glda_joint_logdensity", "GmmFitConfig", "gmm_fit", "gmm_hard_assign",
    "realized_proportions", "OutcomeTable", "load_cohort", "load_outcomes",
    "standardize_within_subject", "glda_membership", "state_series",
    "SynthConfig", "generate_glda", "generate_gmm", "RegressionResult",
    "compare_models", "ols_univariate", "validate_weights",
]
