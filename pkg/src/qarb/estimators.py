"""scikit-learn style wrappers around the functional core."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_matrix, as_series, check_level, check_positive_int
from .econometrics import QlrContract, difference, engle_granger
from .embedding import build_embedding, center_columns
from .qcnc import Comparator
from .vtpa import VtpaConfig, vtpa


class EngleGranger(RegressorMixin, BaseEstimator):
    """Two-step cointegration test as a regressor.

    ``fit(X, y)`` regresses ``y`` on the columns of ``X`` and ADF-tests the
    residual spread; ``predict`` returns the fitted long-run relation.
    """

    def __init__(self, lag=1, level=0.05, qlr_epsilon=0.0, random_state=0, fit_intercept=True):
        self.lag = lag
        self.level = level
        self.qlr_epsilon = qlr_epsilon
        self.random_state = random_state
        self.fit_intercept = fit_intercept

    def fit(self, X, y):
        X = as_matrix(X)
        y = as_series(y, length=X.shape[0])
        lag = check_positive_int(self.lag, "lag", minimum=0)
        level = check_level(self.level)
        contract = QlrContract(self.qlr_epsilon, self.random_state)
        self.result_ = engle_granger(X, y, lag, contract, level, add_intercept=self.fit_intercept)
        self.coef_ = self.result_.beta
        self.intercept_ = self.result_.intercept if self.fit_intercept else 0.0
        self.adf_ = self.result_.adf
        self.cointegrated_ = self.result_.flag
        self.residuals_ = self.result_.first_stage.residuals
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = as_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return self.intercept_ + X @ self.coef_

    def spread(self, X, y):
        """Deviation of ``y`` from the long-run relation."""
        return as_series(y) - self.predict(X)


class ConditionNumberPreselector(BaseEstimator):
    """Flags price blocks whose condition number reaches ``kappa0``.

    Inputs are sequences of ``T x d`` blocks. ``predict`` returns ``True`` for
    blocks the cascade does not stop, i.e. candidates for cointegration.
    Columns are mean-centered before embedding when ``center`` is set.
    """

    def __init__(self, kappa0=16.0, epsilon=0.01, boost=3.0, extra_bits=2, input_mode="uniform",
                 center=True, random_state=0):
        self.kappa0 = kappa0
        self.epsilon = epsilon
        self.boost = boost
        self.extra_bits = extra_bits
        self.input_mode = input_mode
        self.center = center
        self.random_state = random_state

    def _run(self, blocks):
        cfg = VtpaConfig(self.kappa0, self.epsilon, self.boost, self.extra_bits)
        outcomes = []
        for i, block in enumerate(blocks):
            X = as_matrix(block, name=f"block {i}", min_rows=2)
            if self.center:
                X = center_columns(X)
            comp = Comparator(build_embedding(X), self.input_mode)
            rng = np.random.default_rng(np.random.SeedSequence([self.random_state, i]))
            outcomes.append(vtpa(comp.emb, self.input_mode, cfg, rng, comparator=comp))
        return outcomes

    def fit(self, blocks, y=None):
        self.outcomes_ = self._run(blocks)
        self.support_ = np.array([not o.stopped for o in self.outcomes_])
        self.kappa_intervals_ = [o.kappa_interval for o in self.outcomes_]
        return self

    def predict(self, blocks):
        return np.array([not o.stopped for o in self._run(blocks)])

    def fit_predict(self, blocks, y=None):
        return self.fit(blocks).support_


class Differencer(TransformerMixin, BaseEstimator):
    """First differences along the time axis (drops the first row)."""

    def fit(self, X, y=None):
        self.n_features_in_ = as_matrix(X, min_rows=2).shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = as_matrix(X, min_rows=2)
        return np.column_stack([difference(col) for col in X.T])
