"""Safe Bayesian optimization with Lipschitz-only safety certificates."""

from .bounds import (
    ConfidenceInterval,
    ConstantBeta,
    LipschitzSafetyModel,
    RkhsNormBeta,
    beta_value,
    gp_confidence_interval,
    lipschitz_lower_envelope,
)
from .gp import (
    Dataset,
    GpPosterior,
    KernelFamily,
    KernelSpec,
    NumericError,
    add_observation,
    fit_posterior,
    kernel_eval,
    logdet_regularized_gram,
    predict,
)
from .optimizers import (
    AlgorithmConfig,
    IterationRecord,
    MultistartConfig,
    Variant,
    multistart_search,
    run_optimization,
    step_los_gp_ucb,
    step_safeopt_family,
)
from .safe_sets import (
    ContinuousSafeSet,
    GridDomain,
    InvalidStateError,
    SafeSetState,
    expander_set,
    maximizer_set,
    update_safe_set_gp,
    update_safe_set_lipschitz,
)
from .synth import (
    GaussianNoise,
    RkhsFunction,
    UniformNoise,
    lipschitz_oracle,
    noisy_eval,
    rkhs_norm,
    sample_rkhs_function,
)

__version__ = "0.1.0"
