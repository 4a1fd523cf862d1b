"""scikit-learn compatible regressors built on the functional learners."""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._rng import make_rng
from .baselines import dsgd_run, exact_ogd_step, inverse_sqrt_schedule
from .feature_space import FeatureFamily, make_family
from .shrinking_gradient import (
    LearnerConfig,
    averaged_hypothesis,
    init_state,
    predict_many,
    step,
    theorem_schedule,
)
from .synthetic_data import FixedStream

__all__ = ["ShrinkingGradientRegressor", "ExactKernelOGDRegressor", "DSGDRegressor"]


def _resolve_family(family, family_params, n_features: int) -> FeatureFamily:
    if isinstance(family, FeatureFamily):
        if family.input_dim != n_features:
            raise ValueError(
                f"family expects {family.input_dim} features, X has {n_features}"
            )
        return family
    return make_family(family, n_features, **(family_params or {}))


def _check_labels(y) -> np.ndarray:
    if np.any(np.abs(y) > 1.0):
        raise ValueError("targets must lie in [-1, 1]")
    return y


class _OnlineKernelRegressor(RegressorMixin, BaseEstimator):
    def _validate_fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        y = _check_labels(y.astype(float))
        self.n_features_in_ = X.shape[1]
        self.family_ = _resolve_family(self.family, self.family_params, X.shape[1])
        return X, y

    def _schedule(self, T: int):
        sched = theorem_schedule(self.B, T, self.c_eta, getattr(self, "c_m", 1.0))
        eta = sched.eta if self.eta is None else self.eta
        m = sched.m_train if getattr(self, "m_train", None) is None else self.m_train
        return eta, m

    def _validate_predict(self, X):
        check_is_fitted(self, "hypothesis_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X


class ShrinkingGradientRegressor(_OnlineKernelRegressor):
    """Online kernel least squares that only samples random features.

    Parameters
    ----------
    family : str or FeatureFamily, default="cosine-rff"
        Random-feature family, by id or instance.
    family_params : dict, optional
        Hyperparameters passed to :func:`~shrinksgd.feature_space.make_family`.
    B : float, default=2.0
        Comparator norm bound; sets the shrink threshold and the default step.
    eta, m_train : optional
        Step size and per-round estimator samples. ``None`` takes them from
        :func:`~shrinksgd.shrinking_gradient.theorem_schedule` with
        ``T = n_samples`` and the knobs ``c_eta``, ``c_m``.
    eps0, delta : float
        Accuracy and failure probability for prediction-time estimates.
    predict_mode : {"estimate", "exact"}
        ``"exact"`` evaluates the averaged hypothesis through the closed-form
        kernel, which is only meant for diagnostics.
    random_state : int
        Seed for the training stream; prediction uses a derived sub-stream.

    Attributes
    ----------
    state_ : LearnerState
    hypothesis_ : Hypothesis
        Averaged predictor used by :meth:`predict`.
    records_ : list of RoundRecord
    """

    def __init__(
        self,
        family="cosine-rff",
        family_params=None,
        B=2.0,
        eta=None,
        m_train=None,
        c_eta=1.0,
        c_m=1.0,
        shrink_threshold_factor=16.0,
        shrink_ratio=0.25,
        eps0=0.1,
        delta=0.05,
        predict_mode="estimate",
        random_state=0,
    ):
        self.family = family
        self.family_params = family_params
        self.B = B
        self.eta = eta
        self.m_train = m_train
        self.c_eta = c_eta
        self.c_m = c_m
        self.shrink_threshold_factor = shrink_threshold_factor
        self.shrink_ratio = shrink_ratio
        self.eps0 = eps0
        self.delta = delta
        self.predict_mode = predict_mode
        self.random_state = random_state

    def _config(self, T: int) -> LearnerConfig:
        eta, m = self._schedule(max(T, 1))
        return LearnerConfig(
            T=T,
            B=self.B,
            eta=eta,
            m_train=m,
            shrink_threshold_factor=self.shrink_threshold_factor,
            shrink_ratio=self.shrink_ratio,
            seed=self.random_state,
            c_eta=self.c_eta,
            c_m=self.c_m,
            track_exact_loss=False,
        )

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        self.config_ = self._config(X.shape[0])
        self.state_ = init_state(self.config_, self.family_)
        self.records_ = [step(self.state_, X[t], y[t], self.config_) for t in range(X.shape[0])]
        self.hypothesis_ = averaged_hypothesis(self.state_)
        return self

    def partial_fit(self, X, y):
        """Continue online training; requires explicit ``eta`` and ``m_train``."""
        if not hasattr(self, "state_"):
            if self.eta is None or self.m_train is None:
                raise ValueError("partial_fit needs explicit eta and m_train")
            X, y = self._validate_fit(X, y)
            self.config_ = self._config(0)
            self.state_ = init_state(self.config_, self.family_)
            self.records_ = []
        else:
            X = self._validate_predict(X)
            y = _check_labels(np.asarray(y, dtype=float).ravel())
        self.records_ += [step(self.state_, X[t], y[t], self.config_) for t in range(X.shape[0])]
        self.hypothesis_ = averaged_hypothesis(self.state_)
        return self

    def predict(self, X):
        X = self._validate_predict(X)
        if self.predict_mode == "exact":
            return self.hypothesis_.exact_values(X)
        if self.predict_mode != "estimate":
            raise ValueError(f"unknown predict_mode {self.predict_mode!r}")
        rng = make_rng(self.random_state, 1)
        return predict_many(self.hypothesis_, X, self.eps0, self.delta, rng)


class ExactKernelOGDRegressor(_OnlineKernelRegressor):
    """Kernel OGD on the squared loss with the family's closed-form kernel.

    Predicts with the average of the post-update iterates.
    """

    def __init__(self, family="cosine-rff", family_params=None, B=2.0, eta=None, c_eta=1.0):
        self.family = family
        self.family_params = family_params
        self.B = B
        self.eta = eta
        self.c_eta = c_eta

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        if not self.family_.has_exact_kernel:
            raise ValueError(f"{self.family_.name} has no exact kernel")
        eta, _ = self._schedule(X.shape[0])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            config = LearnerConfig(T=X.shape[0], B=self.B, eta=eta, m_train=1)
        self.state_ = init_state(config, self.family_)
        self.records_ = [exact_ogd_step(self.state_, X[t], y[t], eta) for t in range(X.shape[0])]
        self.hypothesis_ = averaged_hypothesis(self.state_)
        return self

    def predict(self, X):
        X = self._validate_predict(X)
        return self.hypothesis_.exact_values(X)


class DSGDRegressor(_OnlineKernelRegressor):
    """Doubly stochastic functional SGD, one random feature per sample."""

    def __init__(
        self,
        family="cosine-rff",
        family_params=None,
        eta0=1.0,
        gamma=0.0,
        average=True,
        random_state=0,
    ):
        self.family = family
        self.family_params = family_params
        self.eta0 = eta0
        self.gamma = gamma
        self.average = average
        self.random_state = random_state

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        final, averaged, summary = dsgd_run(
            X.shape[0],
            inverse_sqrt_schedule(self.eta0),
            self.gamma,
            self.family_,
            FixedStream(X, y),
            self.random_state,
        )
        self.hypothesis_ = averaged if self.average else final
        self.records_ = summary.records
        return self

    def predict(self, X):
        X = self._validate_predict(X)
        return self.hypothesis_.values(X)
