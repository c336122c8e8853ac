"""Input validation helpers for the estimator-facing API."""

from __future__ import annotations

import numpy as np


def check_channel_vectors(X, n_t: int, n_r: int) -> np.ndarray:
    """Validate a (n_samples, n_t*n_r) complex matrix of vectorized channels."""
    X = np.asarray(X)
    if X.ndim != 2:
        raise ValueError(f"expected 2-D channel input, got shape {X.shape}")
    expected = n_t * n_r
    if X.shape[1] != expected:
        raise ValueError(
            f"expected {expected} features (n_t*n_r column-stacked channel entries), "
            f"got {X.shape[1]}"
        )
    X = X.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(X.real)) or not np.all(np.isfinite(X.imag)):
        raise ValueError("channel input contains non-finite values")
    return X


def check_multihot(y, n_classes: int, popcount: int, name: str = "y") -> np.ndarray:
    """Validate a binary indicator matrix with a fixed number of ones per row."""
    y = np.asarray(y)
    if y.ndim != 2 or y.shape[1] != n_classes:
        raise ValueError(f"{name} must have shape (n_samples, {n_classes}), got {y.shape}")
    y = y.astype(np.float64, copy=False)
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError(f"{name} must be a binary indicator matrix")
    counts = y.sum(axis=1)
    if not np.all(counts == popcount):
        bad = int(np.argmax(counts != popcount))
        raise ValueError(
            f"{name} row {bad} has {int(counts[bad])} active labels, expected exactly {popcount}"
        )
    return y


def check_consistent_length(X, *ys) -> None:
    n = X.shape[0]
    for y in ys:
        if y.shape[0] != n:
            raise ValueError(f"inconsistent sample counts: {n} vs {y.shape[0]}")
