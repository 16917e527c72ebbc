"""Networks of additive count sequences: simulation, fitting, cascade inference.

Counts on a discrete time grid excite later counts across a network; the
building-block distributions (Poisson or negative binomial) are additive,
so the marginal law of the observed counts and the conditional law of the
latent cascade both take closed forms.  This package simulates the
generative process, fits its parameters by maximum likelihood, attributes
observed counts back to their triggering sources, and reproduces the
accompanying recovery study.
"""

from .cascade import (
    ConditionalVariance,
    ConditionalWeights,
    cascade_sizes,
    conditional_expectation,
    conditional_sample,
    conditional_variance,
    conditional_weights,
    total_triggered,
)
from .distributions import (
    conditional_split_sample,
    dm_conditional_log_pmf,
    multinomial_conditional_log_pmf,
    nb_cgf,
    nb_log_pmf,
    nb_params_from_classic,
    nb_params_to_classic,
    nb_sample,
    poisson_log_pmf,
)
from .estimation import (
    FitConfig,
    FitResult,
    LikelihoodGradient,
    fit,
    log_likelihood,
    log_likelihood_gradient,
)
from .evaluation import (
    CellReport,
    ExperimentConfig,
    ExperimentReport,
    MseComponents,
    MseReport,
    ecdf,
    mse_decomposition,
    qq_points,
    run_experiment,
)
from .model import (
    CountSeries,
    Kernel,
    ModelSpec,
    RateField,
    TriggerMap,
    UnstableModelError,
    compute_rates,
    spectral_radius,
    steady_state_rate,
)
from .simulator import CascadeDecomposition, sample_influence_matrix, simulate

__version__ = "0.1.0"

__all__ = [
    "CascadeDecomposition",
    "CellReport",
    "ConditionalVariance",
    "ConditionalWeights",
    "CountSeries",
    "ExperimentConfig",
    "ExperimentReport",
    "FitConfig",
    "FitResult",
    "Kernel",
    "LikelihoodGradient",
    "ModelSpec",
    "MseComponents",
    "MseReport",
    "RateField",
    "TriggerMap",
    "UnstableModelError",
    "cascade_sizes",
    "compute_rates",
    "conditional_expectation",
    "conditional_sample",
    "conditional_split_sample",
    "conditional_variance",
    "conditional_weights",
    "dm_conditional_log_pmf",
    "ecdf",
    "fit",
    "log_likelihood",
    "log_likelihood_gradient",
    "mse_decomposition",
    "multinomial_conditional_log_pmf",
    "nb_cgf",
    "nb_log_pmf",
    "nb_params_from_classic",
    "nb_params_to_classic",
    "nb_sample",
    "poisson_log_pmf",
    "qq_points",
    "run_experiment",
    "sample_influence_matrix",
    "simulate",
    "spectral_radius",
    "steady_state_rate",
    "total_triggered",
]
