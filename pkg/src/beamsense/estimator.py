"""Scikit-learn style estimator wrapping the sensing/prediction network.

X is a (n_samples, n_t*n_r) complex matrix of column-stacked (noisy,
globally normalized) channel vectors. y is a (n_samples, n_codes_tx +
n_codes_rx) binary indicator matrix: the transmit multi-hot block followed
by the receive multi-hot block, with exactly n_rf_tx and n_rf_rx ones.
predict returns an indicator matrix of the same layout, so the estimator
composes with standard multilabel tooling; score is the mean sample-wise
beam accuracy over the two tasks.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .network import (
    NetworkDims,
    export_measurement_matrices,
    forward_pass,
    init_params,
    topk_indices,
)
from .training import TrainConfig, topk_set_accuracy, train
from .validation import check_channel_vectors, check_consistent_length, check_multihot


class CompressiveBeamSelector(BaseEstimator):
    """Joint learned channel sensing and RF beam-set prediction."""

    def __init__(
        self,
        n_t=16,
        n_r=16,
        n_rf_tx=2,
        n_rf_rx=2,
        m_t=8,
        m_r=8,
        n_codes_tx=None,
        n_codes_rx=None,
        hidden1=512,
        hidden2=512,
        batch_size=512,
        learning_rate=0.005,
        adam_beta1=0.5,
        adam_beta2=0.999,
        adam_eps=1e-8,
        epochs=200,
        val_fraction=0.1,
        train_encoder=True,
        random_state=0,
    ):
        self.n_t = n_t
        self.n_r = n_r
        self.n_rf_tx = n_rf_tx
        self.n_rf_rx = n_rf_rx
        self.m_t = m_t
        self.m_r = m_r
        self.n_codes_tx = n_codes_tx
        self.n_codes_rx = n_codes_rx
        self.hidden1 = hidden1
        self.hidden2 = hidden2
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.adam_beta1 = adam_beta1
        self.adam_beta2 = adam_beta2
        self.adam_eps = adam_eps
        self.epochs = epochs
        self.val_fraction = val_fraction
        self.train_encoder = train_encoder
        self.random_state = random_state

    def _dims(self) -> NetworkDims:
        return NetworkDims(
            n_t=self.n_t,
            n_r=self.n_r,
            m_t=self.m_t,
            m_r=self.m_r,
            n_codes_tx=self.n_codes_tx if self.n_codes_tx is not None else self.n_t,
            n_codes_rx=self.n_codes_rx if self.n_codes_rx is not None else self.n_r,
            hidden1=self.hidden1,
            hidden2=self.hidden2,
        )

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_eps=self.adam_eps,
            epochs=self.epochs,
            seed=self.random_state,
            val_fraction=self.val_fraction,
            train_encoder=self.train_encoder,
        )

    def _split_y(self, y, dims: NetworkDims):
        y = np.asarray(y)
        total = dims.n_codes_tx + dims.n_codes_rx
        if y.ndim != 2 or y.shape[1] != total:
            raise ValueError(
                f"y must have shape (n_samples, {total}): tx multi-hot block then rx block"
            )
        y_tx = check_multihot(y[:, : dims.n_codes_tx], dims.n_codes_tx, self.n_rf_tx, "y tx block")
        y_rx = check_multihot(y[:, dims.n_codes_tx :], dims.n_codes_rx, self.n_rf_rx, "y rx block")
        return y_tx, y_rx

    def fit(self, X, y):
        dims = self._dims()
        X = check_channel_vectors(X, self.n_t, self.n_r)
        y_tx, y_rx = self._split_y(y, dims)
        check_consistent_length(X, y_tx, y_rx)
        params = init_params(dims, np.random.default_rng(self.random_state))
        self.params_, self.history_ = train(
            params, X, y_tx, y_rx, self._train_config(), self.n_rf_tx, self.n_rf_rx
        )
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise AttributeError("estimator is not fitted; call fit first")

    def predict_proba(self, X):
        """Per-beam sigmoid scores, (n_samples, n_codes_tx + n_codes_rx)."""
        self._check_fitted()
        X = check_channel_vectors(X, self.n_t, self.n_r)
        out, _ = forward_pass(self.params_, X, training=False)
        return np.hstack([out.tx_scores, out.rx_scores])

    def predict(self, X):
        """Indicator matrix with exactly n_rf ones per task block."""
        self._check_fitted()
        dims = self.params_.dims
        scores = self.predict_proba(X)
        tx_idx = topk_indices(scores[:, : dims.n_codes_tx], self.n_rf_tx)
        rx_idx = topk_indices(scores[:, dims.n_codes_tx :], self.n_rf_rx)
        y = np.zeros_like(scores)
        np.put_along_axis(y[:, : dims.n_codes_tx], tx_idx, 1.0, axis=1)
        np.put_along_axis(y[:, dims.n_codes_tx :], rx_idx, 1.0, axis=1)
        return y

    def predict_beam_indices(self, X):
        """Sorted beam index arrays, (n_samples, n_rf_tx) and (n_samples, n_rf_rx)."""
        self._check_fitted()
        dims = self.params_.dims
        scores = self.predict_proba(X)
        return (
            topk_indices(scores[:, : dims.n_codes_tx], self.n_rf_tx),
            topk_indices(scores[:, dims.n_codes_tx :], self.n_rf_rx),
        )

    def score(self, X, y):
        """Mean of transmit and receive sample-wise beam-set accuracy."""
        self._check_fitted()
        dims = self.params_.dims
        y_tx, y_rx = self._split_y(y, dims)
        scores = self.predict_proba(X)
        acc_tx = topk_set_accuracy(scores[:, : dims.n_codes_tx], y_tx, self.n_rf_tx)
        acc_rx = topk_set_accuracy(scores[:, dims.n_codes_tx :], y_rx, self.n_rf_rx)
        return 0.5 * (acc_tx + acc_rx)

    def measurement_matrices(self):
        """The learned compressive probing matrices (P, Q) for deployment."""
        self._check_fitted()
        return export_measurement_matrices(self.params_)
