"""Supervised multi-task training of the sensing/prediction network.

The target for each channel is a pair of multi-hot vectors marking the
oracle-selected transmit and receive beam indices. The loss is the
arithmetic mean of the two per-task binary cross entropies (each averaged
over its classes, in nats), averaged over the batch. Optimization is plain
Adam. Everything runs in float64: the model is tiny and bitwise
reproducibility matters more than speed here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import (
    AutoPrecoderParams,
    ParamGrads,
    backward_from_logit_grads,
    forward_pass,
    topk_indices,
    update_running_stats,
)

SCORE_CLAMP_EPS = 1e-7


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 512
    learning_rate: float = 0.005
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 200
    seed: int = 0
    val_fraction: float = 0.1
    train_encoder: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        for b in (self.adam_beta1, self.adam_beta2):
            if not 0.0 <= b < 1.0:
                raise ValueError("Adam betas must lie in [0, 1)")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in (0, 1)")


def make_label_vectors(tx_sets, rx_sets, n_codes_tx: int, n_codes_rx: int):
    """Index sets to stacked multi-hot arrays (n_samples, n_codes)."""
    n = len(tx_sets)
    y_tx = np.zeros((n, n_codes_tx))
    y_rx = np.zeros((n, n_codes_rx))
    for i, (t, r) in enumerate(zip(tx_sets, rx_sets)):
        y_tx[i, list(t)] = 1.0
        y_rx[i, list(r)] = 1.0
    return y_tx, y_rx


def _clamped_bce(scores: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Per-sample BCE averaged over classes, scores clamped away from {0, 1}."""
    s = np.clip(scores, SCORE_CLAMP_EPS, 1.0 - SCORE_CLAMP_EPS)
    return -(targets * np.log(s) + (1.0 - targets) * np.log1p(-s)).mean(axis=-1)


def bce_multitask_loss(tx_scores, rx_scores, y_tx, y_rx) -> float:
    """Mean over the batch of 0.5 * (BCE_tx + BCE_rx), in nats."""
    tx_scores = np.atleast_2d(tx_scores)
    rx_scores = np.atleast_2d(rx_scores)
    y_tx = np.atleast_2d(y_tx)
    y_rx = np.atleast_2d(y_rx)
    per_sample = 0.5 * (_clamped_bce(tx_scores, y_tx) + _clamped_bce(rx_scores, y_rx))
    return float(per_sample.mean())


def _logit_grads(scores: np.ndarray, targets: np.ndarray, task_weight: float) -> np.ndarray:
    """d(loss)/d(logit) for the clamped BCE behind a sigmoid.

    Inside the clamp region this is the familiar (score - target) scaled by
    the class/task/batch averaging; where the clamp binds the derivative of
    the loss with respect to the score is zero.
    """
    n_batch, n_classes = scores.shape
    inside = (scores > SCORE_CLAMP_EPS) & (scores < 1.0 - SCORE_CLAMP_EPS)
    g = (scores - targets) * inside
    return g * (task_weight / (n_classes * n_batch))


def loss_and_grads(
    params: AutoPrecoderParams, h, y_tx, y_rx, training: bool = True
) -> tuple[float, ParamGrads, dict]:
    """Loss plus exact gradients; returns the forward cache as well."""
    out, cache = forward_pass(params, h, training=training)
    s_tx = np.atleast_2d(cache["s_tx"])
    s_rx = np.atleast_2d(cache["s_rx"])
    y_tx = np.atleast_2d(y_tx)
    y_rx = np.atleast_2d(y_rx)
    loss = bce_multitask_loss(s_tx, s_rx, y_tx, y_rx)
    d_tx = _logit_grads(s_tx, y_tx, 0.5)
    d_rx = _logit_grads(s_rx, y_rx, 0.5)
    grads = backward_from_logit_grads(params, cache, d_tx, d_rx)
    return loss, grads, cache


def backward(params: AutoPrecoderParams, h, y_tx, y_rx) -> ParamGrads:
    """Gradient of the multi-task loss for the given sample(s).

    Uses frozen (running) normalization statistics so per-sample gradients
    are independent and the batch gradient is their mean.
    """
    _, grads, _ = loss_and_grads(params, h, y_tx, y_rx, training=False)
    return grads


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


_PARAM_FIELDS = (
    "enc_rx", "enc_tx", "fc1_w", "fc1_b", "fc2_w", "fc2_b",
    "head_tx_w", "head_tx_b", "head_rx_w", "head_rx_b",
)
_BN_FIELDS = ("bn1_gamma", "bn1_beta", "bn2_gamma", "bn2_beta")


def _param_ref(params: AutoPrecoderParams, name: str) -> np.ndarray:
    if name in _PARAM_FIELDS:
        return getattr(params, name)
    layer, attr = name.split("_", 1)
    return getattr(getattr(params, layer), attr)


def _set_param(params: AutoPrecoderParams, name: str, value: np.ndarray) -> None:
    if name in _PARAM_FIELDS:
        setattr(params, name, value)
    else:
        layer, attr = name.split("_", 1)
        setattr(getattr(params, layer), attr, value)


def adam_step(
    params: AutoPrecoderParams,
    grads: ParamGrads,
    state: AdamState,
    cfg: TrainConfig,
    skip: tuple[str, ...] = (),
) -> None:
    """One bias-corrected Adam update, in place.

    Complex tensors update their real and imaginary parts as independent
    real parameters, so the second moment is elementwise on each part.
    """
    state.step += 1
    t = state.step
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    for name in _PARAM_FIELDS + _BN_FIELDS:
        if name in skip:
            continue
        g = getattr(grads, name)
        if np.iscomplexobj(g):
            g = np.stack([g.real, g.imag])
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = state.m[name] / (1.0 - b1**t)
        v_hat = state.v[name] / (1.0 - b2**t)
        delta = cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        value = _param_ref(params, name)
        if np.iscomplexobj(value):
            _set_param(params, name, value - (delta[0] + 1j * delta[1]))
        else:
            _set_param(params, name, value - delta)


def sample_accuracy(pred_set, true_set) -> float:
    """|true  intersect  pred| / |true| for one sample."""
    true_set = set(int(i) for i in true_set)
    if not true_set:
        raise ValueError("true label set must be non-empty")
    pred_set = set(int(i) for i in pred_set)
    return len(true_set & pred_set) / len(true_set)


def dataset_accuracy(per_sample) -> float:
    per_sample = list(per_sample)
    if not per_sample:
        raise ValueError("cannot average an empty accuracy list")
    return float(np.mean(per_sample))


def topk_set_accuracy(scores: np.ndarray, y_hot: np.ndarray, k: int) -> float:
    """Dataset accuracy of top-k predictions against multi-hot labels."""
    pred = topk_indices(scores, k)
    hits = np.take_along_axis(y_hot, pred, axis=-1).sum(axis=-1)
    return float((hits / y_hot.sum(axis=-1)).mean())


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_tx_acc: float
    val_rx_acc: float


def train(
    params: AutoPrecoderParams,
    h: np.ndarray,
    y_tx: np.ndarray,
    y_rx: np.ndarray,
    cfg: TrainConfig,
    n_rf_tx: int,
    n_rf_rx: int,
) -> tuple[AutoPrecoderParams, list[EpochRecord]]:
    """Mini-batch training with a held-out validation split.

    Returns the parameters of the best-validation-loss epoch and the
    per-epoch history. A non-finite training loss aborts with diagnostics.
    """
    n = h.shape[0]
    if n < 2:
        raise ValueError("need at least two samples to split train/validation")
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(n)
    n_val = max(1, int(round(n * cfg.val_fraction)))
    if n_val >= n:
        n_val = n - 1
    val_idx, train_idx = order[:n_val], order[n_val:]
    h_tr, ytx_tr, yrx_tr = h[train_idx], y_tx[train_idx], y_rx[train_idx]
    h_val, ytx_val, yrx_val = h[val_idx], y_tx[val_idx], y_rx[val_idx]

    state = AdamState()
    skip = () if cfg.train_encoder else ("enc_rx", "enc_tx")
    history: list[EpochRecord] = []
    best_val = np.inf
    best_params = params.copy()
    last_finite = None
    n_tr = len(train_idx)
    batch = min(cfg.batch_size, n_tr)
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n_tr)
        losses = []
        for start in range(0, n_tr, batch):
            sel = perm[start : start + batch]
            loss, grads, cache = loss_and_grads(
                params, h_tr[sel], ytx_tr[sel], yrx_tr[sel], training=True
            )
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {start // batch} "
                    f"(last finite loss: {last_finite})"
                )
            last_finite = loss
            update_running_stats(params, cache)
            adam_step(params, grads, state, cfg, skip=skip)
            losses.append(loss)
        out, _ = forward_pass(params, h_val, training=False)
        val_loss = bce_multitask_loss(out.tx_scores, out.rx_scores, ytx_val, yrx_val)
        rec = EpochRecord(
            epoch=epoch,
            train_loss=float(np.mean(losses)),
            val_loss=val_loss,
            val_tx_acc=topk_set_accuracy(out.tx_scores, ytx_val, n_rf_tx),
            val_rx_acc=topk_set_accuracy(out.rx_scores, yrx_val, n_rf_rx),
        )
        history.append(rec)
        if val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
    return best_params, history


def history_csv_lines(history) -> list[str]:
    lines = ["epoch,train_loss,val_loss,val_tx_acc,val_rx_acc"]
    for r in history:
        lines.append(f"{r.epoch},{r.train_loss!r},{r.val_loss!r},{r.val_tx_acc!r},{r.val_rx_acc!r}")
    return lines
