"""Trainable joint channel-sensing and beam-prediction network.

The first stage (the sensing encoder) is two complex-valued linear layers
that are structurally identical to the compressive measurement operator
(P^T kron Q^H) applied to a column-stacked channel vector:

  stage 1: M_r kernels of size N_r, stride N_r  -> rows of Q^H,
  stage 2: M_t kernels of size N_t, stride N_t  -> rows of P^T,

so after training the kernels ARE the measurement matrices and can be
loaded into analog phase-shifter hardware. The encoder therefore has no
bias and no activation. The second stage (the selection head) maps the
complex measurement vector, split into interleaved real/imaginary pairs,
through two fully connected layers (ReLU then batch normalization) into
two parallel sigmoid output layers, one scoring the transmit codebook and
one the receive codebook.

Complex weights are carried as complex arrays whose real and imaginary
parts are independent real parameters; gradients are exact partials with
respect to those real parts, carried in the same complex layout.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .sensing import MeasurementMatrices

BN_EPS = 1e-5
BN_MOMENTUM = 0.99

CHECKPOINT_MAGIC = b"APNV1"


@dataclass(frozen=True)
class NetworkDims:
    n_t: int
    n_r: int
    m_t: int
    m_r: int
    n_codes_tx: int
    n_codes_rx: int
    hidden1: int = 512
    hidden2: int = 512

    def __post_init__(self):
        for name in ("n_t", "n_r", "m_t", "m_r", "n_codes_tx", "n_codes_rx", "hidden1", "hidden2"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.m_t > self.n_t or self.m_r > self.n_r:
            raise ValueError("measurement counts cannot exceed antenna counts")

    @property
    def n_measurements(self) -> int:
        return self.m_t * self.m_r

    @property
    def input_len(self) -> int:
        return self.n_t * self.n_r


@dataclass
class BatchNormState:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray


@dataclass
class AutoPrecoderParams:
    """Every trainable tensor, plus batch-norm running statistics."""

    dims: NetworkDims
    enc_rx: np.ndarray  # (m_r, n_r) complex, rows of Q^H
    enc_tx: np.ndarray  # (m_t, n_t) complex, rows of P^T
    fc1_w: np.ndarray
    fc1_b: np.ndarray
    fc2_w: np.ndarray
    fc2_b: np.ndarray
    head_tx_w: np.ndarray
    head_tx_b: np.ndarray
    head_rx_w: np.ndarray
    head_rx_b: np.ndarray
    bn1: BatchNormState
    bn2: BatchNormState

    def copy(self) -> "AutoPrecoderParams":
        return AutoPrecoderParams(
            dims=self.dims,
            enc_rx=self.enc_rx.copy(),
            enc_tx=self.enc_tx.copy(),
            fc1_w=self.fc1_w.copy(),
            fc1_b=self.fc1_b.copy(),
            fc2_w=self.fc2_w.copy(),
            fc2_b=self.fc2_b.copy(),
            head_tx_w=self.head_tx_w.copy(),
            head_tx_b=self.head_tx_b.copy(),
            head_rx_w=self.head_rx_w.copy(),
            head_rx_b=self.head_rx_b.copy(),
            bn1=BatchNormState(*(a.copy() for a in _bn_tuple(self.bn1))),
            bn2=BatchNormState(*(a.copy() for a in _bn_tuple(self.bn2))),
        )


@dataclass
class NetworkOutput:
    tx_scores: np.ndarray
    rx_scores: np.ndarray
    sensed: np.ndarray  # encoder output y, complex


def _bn_tuple(bn: BatchNormState):
    return (bn.gamma, bn.beta, bn.running_mean, bn.running_var)


def _glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def init_params(dims: NetworkDims, rng: np.random.Generator) -> AutoPrecoderParams:
    """Fresh parameters.

    Encoder kernels start as random constant-modulus phases scaled by
    1/sqrt(N): a valid classical random sensing matrix, so training starts
    from the non-learned baseline. Dense layers use variance-scaled uniform
    initialization; batch-norm starts as the identity transform.
    """
    enc_rx = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(dims.m_r, dims.n_r))) / np.sqrt(dims.n_r)
    enc_tx = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(dims.m_t, dims.n_t))) / np.sqrt(dims.n_t)
    d_in = 2 * dims.n_measurements
    return AutoPrecoderParams(
        dims=dims,
        enc_rx=enc_rx,
        enc_tx=enc_tx,
        fc1_w=_glorot_uniform(rng, dims.hidden1, d_in),
        fc1_b=np.zeros(dims.hidden1),
        fc2_w=_glorot_uniform(rng, dims.hidden2, dims.hidden1),
        fc2_b=np.zeros(dims.hidden2),
        head_tx_w=_glorot_uniform(rng, dims.n_codes_tx, dims.hidden2),
        head_tx_b=np.zeros(dims.n_codes_tx),
        head_rx_w=_glorot_uniform(rng, dims.n_codes_rx, dims.hidden2),
        head_rx_b=np.zeros(dims.n_codes_rx),
        bn1=BatchNormState(
            np.ones(dims.hidden1), np.zeros(dims.hidden1),
            np.zeros(dims.hidden1), np.ones(dims.hidden1),
        ),
        bn2=BatchNormState(
            np.ones(dims.hidden2), np.zeros(dims.hidden2),
            np.zeros(dims.hidden2), np.ones(dims.hidden2),
        ),
    )


def _as_batch(h: np.ndarray, input_len: int) -> tuple[np.ndarray, bool]:
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim == 1:
        if h.shape[0] != input_len:
            raise ValueError(f"expected channel vector of length {input_len}, got {h.shape[0]}")
        return h[None, :], True
    if h.ndim != 2 or h.shape[1] != input_len:
        raise ValueError(f"expected (batch, {input_len}) channel vectors, got {h.shape}")
    return h, False


def encoder_forward(params: AutoPrecoderParams, h: np.ndarray) -> np.ndarray:
    """Apply the sensing encoder: returns complex (batch, m_t*m_r).

    Equals (P^T kron Q^H) @ h for the matrices exported by
    export_measurement_matrices, with no noise and unit transmit power.
    """
    d = params.dims
    hb, single = _as_batch(h, d.input_len)
    y, _, _ = _encoder_with_cache(params, hb)
    return y[0] if single else y


def _encoder_with_cache(params: AutoPrecoderParams, hb: np.ndarray):
    d = params.dims
    hm = hb.reshape(-1, d.n_t, d.n_r).transpose(0, 2, 1)  # undo column stacking
    z = np.einsum("mk,bkt->bmt", params.enc_rx, hm)
    yt = np.einsum("bmt,pt->bmp", z, params.enc_tx)
    y = yt.transpose(0, 2, 1).reshape(hb.shape[0], d.n_measurements)
    return y, z, hm


def _interleave(y: np.ndarray) -> np.ndarray:
    x = np.empty((y.shape[0], 2 * y.shape[1]))
    x[:, 0::2] = y.real
    x[:, 1::2] = y.imag
    return x


def _sigmoid(a: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    e = np.exp(a[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _bn_forward(bn: BatchNormState, x: np.ndarray, training: bool):
    if training:
        mean = x.mean(axis=0)
        var = x.var(axis=0)
    else:
        mean = bn.running_mean
        var = bn.running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mean) * inv_std
    out = bn.gamma * xhat + bn.beta
    return out, (xhat, inv_std, mean, var)


def forward_pass(params: AutoPrecoderParams, h: np.ndarray, training: bool = False):
    """Full forward over a batch; returns (NetworkOutput, cache).

    In training mode batch statistics normalize each batch-norm layer; the
    statistics are returned in the cache and applied to the running
    averages only by the caller (keeps the forward pure).
    """
    d = params.dims
    hb, single = _as_batch(h, d.input_len)
    y, z, hm = _encoder_with_cache(params, hb)
    x = _interleave(y)
    a1 = x @ params.fc1_w.T + params.fc1_b
    r1 = np.maximum(a1, 0.0)
    n1, bn1_cache = _bn_forward(params.bn1, r1, training)
    a2 = n1 @ params.fc2_w.T + params.fc2_b
    r2 = np.maximum(a2, 0.0)
    n2, bn2_cache = _bn_forward(params.bn2, r2, training)
    logit_tx = n2 @ params.head_tx_w.T + params.head_tx_b
    logit_rx = n2 @ params.head_rx_w.T + params.head_rx_b
    s_tx = _sigmoid(logit_tx)
    s_rx = _sigmoid(logit_rx)
    cache = {
        "hm": hm, "z": z, "y": y, "x": x,
        "a1": a1, "r1": r1, "bn1": bn1_cache, "n1": n1,
        "a2": a2, "r2": r2, "bn2": bn2_cache, "n2": n2,
        "s_tx": s_tx, "s_rx": s_rx, "training": training, "single": single,
    }
    out = NetworkOutput(
        tx_scores=s_tx[0] if single else s_tx,
        rx_scores=s_rx[0] if single else s_rx,
        sensed=y[0] if single else y,
    )
    return out, cache


def precoder_forward(params: AutoPrecoderParams, y: np.ndarray) -> NetworkOutput:
    """Selection head only, from a complex measurement vector (inference mode)."""
    d = params.dims
    y = np.asarray(y, dtype=np.complex128)
    single = y.ndim == 1
    yb = y[None, :] if single else y
    if yb.shape[1] != d.n_measurements:
        raise ValueError(f"expected {d.n_measurements} measurements, got {yb.shape[1]}")
    x = _interleave(yb)
    a1 = x @ params.fc1_w.T + params.fc1_b
    n1, _ = _bn_forward(params.bn1, np.maximum(a1, 0.0), training=False)
    a2 = n1 @ params.fc2_w.T + params.fc2_b
    n2, _ = _bn_forward(params.bn2, np.maximum(a2, 0.0), training=False)
    s_tx = _sigmoid(n2 @ params.head_tx_w.T + params.head_tx_b)
    s_rx = _sigmoid(n2 @ params.head_rx_w.T + params.head_rx_b)
    return NetworkOutput(
        tx_scores=s_tx[0] if single else s_tx,
        rx_scores=s_rx[0] if single else s_rx,
        sensed=yb[0] if single else yb,
    )


def forward(params: AutoPrecoderParams, h: np.ndarray) -> NetworkOutput:
    """Inference-mode composition of encoder and selection head."""
    out, _ = forward_pass(params, h, training=False)
    return out


def update_running_stats(params: AutoPrecoderParams, cache) -> None:
    for bn, bn_cache in ((params.bn1, cache["bn1"]), (params.bn2, cache["bn2"])):
        _, _, mean, var = bn_cache
        bn.running_mean = BN_MOMENTUM * bn.running_mean + (1.0 - BN_MOMENTUM) * mean
        bn.running_var = BN_MOMENTUM * bn.running_var + (1.0 - BN_MOMENTUM) * var


@dataclass
class ParamGrads:
    enc_rx: np.ndarray
    enc_tx: np.ndarray
    fc1_w: np.ndarray
    fc1_b: np.ndarray
    fc2_w: np.ndarray
    fc2_b: np.ndarray
    head_tx_w: np.ndarray
    head_tx_b: np.ndarray
    head_rx_w: np.ndarray
    head_rx_b: np.ndarray
    bn1_gamma: np.ndarray
    bn1_beta: np.ndarray
    bn2_gamma: np.ndarray
    bn2_beta: np.ndarray


def _bn_backward(bn: BatchNormState, bn_cache, d_out: np.ndarray, training: bool):
    xhat, inv_std, _, _ = bn_cache
    d_gamma = (d_out * xhat).sum(axis=0)
    d_beta = d_out.sum(axis=0)
    d_xhat = d_out * bn.gamma
    if training:
        # exact gradient through the batch mean and variance
        d_x = inv_std * (
            d_xhat - d_xhat.mean(axis=0) - xhat * (d_xhat * xhat).mean(axis=0)
        )
    else:
        d_x = d_xhat * inv_std
    return d_x, d_gamma, d_beta


def backward_from_logit_grads(
    params: AutoPrecoderParams,
    cache,
    d_logit_tx: np.ndarray,
    d_logit_rx: np.ndarray,
) -> ParamGrads:
    """Reverse pass from head pre-activation gradients down to every parameter."""
    training = cache["training"]
    n2 = cache["n2"]
    d_head_tx_w = d_logit_tx.T @ n2
    d_head_tx_b = d_logit_tx.sum(axis=0)
    d_head_rx_w = d_logit_rx.T @ n2
    d_head_rx_b = d_logit_rx.sum(axis=0)
    d_n2 = d_logit_tx @ params.head_tx_w + d_logit_rx @ params.head_rx_w

    d_r2, d_bn2_gamma, d_bn2_beta = _bn_backward(params.bn2, cache["bn2"], d_n2, training)
    d_a2 = d_r2 * (cache["a2"] > 0)
    d_fc2_w = d_a2.T @ cache["n1"]
    d_fc2_b = d_a2.sum(axis=0)
    d_n1 = d_a2 @ params.fc2_w

    d_r1, d_bn1_gamma, d_bn1_beta = _bn_backward(params.bn1, cache["bn1"], d_n1, training)
    d_a1 = d_r1 * (cache["a1"] > 0)
    d_fc1_w = d_a1.T @ cache["x"]
    d_fc1_b = d_a1.sum(axis=0)
    d_x = d_a1 @ params.fc1_w

    # real/imag pairs back to a complex adjoint on the measurement vector
    d = params.dims
    g_y = d_x[:, 0::2] + 1j * d_x[:, 1::2]
    g = g_y.reshape(-1, d.m_t, d.m_r).transpose(0, 2, 1)  # (batch, m_r, m_t)
    d_enc_tx = np.einsum("bmp,bmt->pt", g, cache["z"].conj())
    g_z = np.einsum("bmp,pt->bmt", g, params.enc_tx.conj())
    d_enc_rx = np.einsum("bmt,bkt->mk", g_z, cache["hm"].conj())

    return ParamGrads(
        enc_rx=d_enc_rx, enc_tx=d_enc_tx,
        fc1_w=d_fc1_w, fc1_b=d_fc1_b,
        fc2_w=d_fc2_w, fc2_b=d_fc2_b,
        head_tx_w=d_head_tx_w, head_tx_b=d_head_tx_b,
        head_rx_w=d_head_rx_w, head_rx_b=d_head_rx_b,
        bn1_gamma=d_bn1_gamma, bn1_beta=d_bn1_beta,
        bn2_gamma=d_bn2_gamma, bn2_beta=d_bn2_beta,
    )


def predict_beams(out: NetworkOutput, n_rf_tx: int, n_rf_rx: int):
    """Top-k beam indices per task, ties to the lower index, sorted ascending."""
    tx = topk_indices(out.tx_scores, n_rf_tx)
    rx = topk_indices(out.rx_scores, n_rf_rx)
    return tx, rx


def topk_indices(scores: np.ndarray, k: int) -> np.ndarray:
    scores = np.asarray(scores)
    order = np.argsort(-scores, axis=-1, kind="stable")
    top = order[..., :k]
    return np.sort(top, axis=-1)


def export_measurement_matrices(params: AutoPrecoderParams) -> MeasurementMatrices:
    """Read the trained kernels out as deployable measurement matrices.

    Row m of Q^H is rx kernel m, so Q is the conjugate transpose of the rx
    kernel stack; row m of P^T is tx kernel m, so P is the plain transpose
    of the tx kernel stack.
    """
    return MeasurementMatrices(P=params.enc_tx.T.copy(), Q=params.enc_rx.conj().T.copy())


def load_measurement_matrices(params: AutoPrecoderParams, mm: MeasurementMatrices) -> None:
    """Overwrite the encoder kernels with given measurement matrices."""
    d = params.dims
    if mm.P.shape != (d.n_t, d.m_t) or mm.Q.shape != (d.n_r, d.m_r):
        raise ValueError("measurement matrix shapes do not match network dims")
    params.enc_tx = mm.P.T.copy()
    params.enc_rx = mm.Q.conj().T.copy()


class CheckpointError(IOError):
    pass


def _tensor_fields(params: AutoPrecoderParams):
    """Tensors in the declared serialization order."""
    return [
        ("enc_rx", params.enc_rx), ("enc_tx", params.enc_tx),
        ("fc1_w", params.fc1_w), ("fc1_b", params.fc1_b),
        ("fc2_w", params.fc2_w), ("fc2_b", params.fc2_b),
        ("head_tx_w", params.head_tx_w), ("head_tx_b", params.head_tx_b),
        ("head_rx_w", params.head_rx_w), ("head_rx_b", params.head_rx_b),
        ("bn1_gamma", params.bn1.gamma), ("bn1_beta", params.bn1.beta),
        ("bn1_mean", params.bn1.running_mean), ("bn1_var", params.bn1.running_var),
        ("bn2_gamma", params.bn2.gamma), ("bn2_beta", params.bn2.beta),
        ("bn2_mean", params.bn2.running_mean), ("bn2_var", params.bn2.running_var),
    ]


def _tensor_bytes(arr: np.ndarray) -> bytes:
    if np.iscomplexobj(arr):
        flat = np.empty(2 * arr.size, dtype="<f4")
        flat[0::2] = arr.real.ravel()
        flat[1::2] = arr.imag.ravel()
    else:
        flat = np.ascontiguousarray(arr.ravel(), dtype="<f4")
    return flat.tobytes()


def save_checkpoint(params: AutoPrecoderParams, path) -> None:
    """Versioned binary checkpoint: magic, u32 dims, then f32 tensors."""
    d = params.dims
    header = struct.pack(
        "<8I", d.n_t, d.n_r, d.m_t, d.m_r, d.n_codes_tx, d.n_codes_rx, d.hidden1, d.hidden2
    )
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(header)
        for _, arr in _tensor_fields(params):
            fh.write(_tensor_bytes(arr))


def load_checkpoint(path) -> AutoPrecoderParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad checkpoint magic in {path}")
    off = len(CHECKPOINT_MAGIC)
    if len(blob) < off + 32:
        raise CheckpointError("truncated checkpoint: header")
    dims = NetworkDims(*struct.unpack_from("<8I", blob, off))
    off += 32
    rng = np.random.default_rng(0)
    params = init_params(dims, rng)

    def read_tensor(name: str, template: np.ndarray) -> np.ndarray:
        nonlocal off
        n = template.size * (2 if np.iscomplexobj(template) else 1)
        nbytes = 4 * n
        if off + nbytes > len(blob):
            raise CheckpointError(f"truncated checkpoint: field {name}")
        flat = np.frombuffer(blob, dtype="<f4", count=n, offset=off).astype(np.float64)
        off += nbytes
        if np.iscomplexobj(template):
            return (flat[0::2] + 1j * flat[1::2]).reshape(template.shape)
        return flat.reshape(template.shape)

    for name, arr in _tensor_fields(params):
        value = read_tensor(name, arr)
        if name.startswith("bn"):
            layer, attr = name.split("_", 1)
            bn = getattr(params, layer)
            setattr(bn, {"gamma": "gamma", "beta": "beta", "mean": "running_mean", "var": "running_var"}[attr], value)
        else:
            setattr(params, name, value)
    if off != len(blob):
        raise CheckpointError(f"checkpoint has {len(blob) - off} unexpected trailing bytes")
    return params
