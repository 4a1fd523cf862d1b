"""Online kernel regression with sampled random features.

The learner never evaluates a kernel. It only draws feature parameters
``w ~ mu`` and evaluates bounded features ``psi(x; w)``, estimating its own
predictions by importance sampling over its support.
"""

from .estimators import DSGDRegressor, ExactKernelOGDRegressor, ShrinkingGradientRegressor
from .feature_space import make_family
from .scalar_estimator import Hypothesis, est_scalar_prod, required_test_samples, tail_bound
from .shrinking_gradient import (
    LearnerConfig,
    averaged_hypothesis,
    l1_norm_bound,
    predict,
    run,
    step,
    theorem_schedule,
)

__version__ = "0.1.0"

__all__ = [
    "ShrinkingGradientRegressor",
    "ExactKernelOGDRegressor",
    "DSGDRegressor",
    "make_family",
    "Hypothesis",
    "est_scalar_prod",
    "required_test_samples",
    "tail_bound",
    "LearnerConfig",
    "theorem_schedule",
    "l1_norm_bound",
    "step",
    "run",
    "averaged_hypothesis",
    "predict",
]
