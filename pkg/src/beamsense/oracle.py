"""Perfect-CSI reference machinery for hybrid analog/digital precoding.

Given a known channel H, the achievable rate of precoder F = F_RF @ F_BB
and combiner W = W_RF @ W_BB is

    R = log2 | I + R_n^{-1} W^H H F F^H H^H W |,   R_n = W^H W / SNR

with SNR = P_T / (N_S * noise_power) and the transmit power constraint
||F_RF F_BB||_F^2 = N_S. For fixed RF stages the optimal baseband stages
come from the SVD of the effective channel W_RF^H H F_RF. Selecting the RF
columns from quantized codebooks is a combinatorial search; this module
provides the exact exhaustive search and a deterministic alternating greedy
search used as the label generator for the learning pipeline.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from . import cxlinalg as cx
from .codebook import Codebook, assemble_rf_matrix

# Effective channels with a singular value below this are treated as rank
# deficient for the requested stream count.
EFFECTIVE_RANK_TOL = 1e-10
COND_LIMIT = 1e12
DEFAULT_COMBO_CAP = 10**6


class DegenerateChannelError(ValueError):
    """Effective channel cannot support the requested number of streams."""


class SearchSpaceError(ValueError):
    """Exhaustive enumeration would exceed the configured combination cap."""


@dataclass(frozen=True)
class LinkBudget:
    """Total transmit power, receiver noise power (both watts), stream count."""

    p_t: float
    noise_power: float
    n_streams: int

    def __post_init__(self):
        if self.p_t <= 0 or self.noise_power <= 0 or self.n_streams < 1:
            raise ValueError("link budget entries must be positive")

    @property
    def snr(self) -> float:
        return self.p_t / (self.n_streams * self.noise_power)


@dataclass
class PrecodingSolution:
    tx_indices: tuple[int, ...]
    rx_indices: tuple[int, ...]
    F_RF: np.ndarray
    F_BB: np.ndarray
    W_RF: np.ndarray
    W_BB: np.ndarray
    rate: float


def achievable_rate(h: np.ndarray, f: np.ndarray, w: np.ndarray, lb: LinkBudget) -> float:
    """Rate of full precoder f and combiner w over channel h, bits/s/Hz."""
    whw = cx.matmul(cx.hermitian(w), w)
    eig = np.linalg.eigvalsh(0.5 * (whw + whw.conj().T))
    if eig.min() <= 0 or eig.max() / eig.min() > COND_LIMIT:
        raise cx.LinAlgDomainError(
            f"combiner is rank deficient: cond(W^H W) = {eig.max() / max(eig.min(), 1e-300):.3e}"
        )
    m = cx.matmul(cx.hermitian(w), cx.matmul(h, f))
    rn = whw / lb.snr
    rn_inv_sqrt = cx.inv_sqrt_hermitian(rn)
    inner = cx.matmul(rn_inv_sqrt, cx.matmul(m @ cx.hermitian(m), rn_inv_sqrt))
    det = cx.det_hermitian_plus_identity(inner)
    return max(float(np.log2(det)), 0.0)


def optimal_baseband(
    h: np.ndarray, f_rf: np.ndarray, w_rf: np.ndarray, n_streams: int
) -> tuple[np.ndarray, np.ndarray]:
    """Optimal baseband precoder/combiner for fixed RF stages.

    Returns (F_BB, W_BB) built from the SVD of the effective channel
    W_RF^H H F_RF, with F_BB rescaled so ||F_RF F_BB||_F^2 = n_streams.
    """
    if n_streams > min(f_rf.shape[1], w_rf.shape[1]):
        raise ValueError("n_streams exceeds the selected RF dimensions")
    h_eff = w_rf.conj().T @ h @ f_rf
    u, s, v = cx.svd_small(h_eff)
    if s[n_streams - 1] < EFFECTIVE_RANK_TOL:
        raise DegenerateChannelError(
            f"effective channel rank < {n_streams}: singular values {s}"
        )
    gram = f_rf.conj().T @ f_rf
    f_bb = cx.inv_sqrt_hermitian(gram) @ v[:, :n_streams]
    norm = np.linalg.norm(f_rf @ f_bb)
    f_bb = f_bb * (np.sqrt(n_streams) / norm)
    w_bb = u[:, :n_streams]
    return f_bb, w_bb


def _selection_tables(h: np.ndarray, cb_tx: Codebook, cb_rx: Codebook):
    """Precompute per-channel tables used by the set-selection objective.

    g[r, t]     = w_r^H H f_t            (cross gains)
    gram_tx     = F_cb^H F_cb            (tx codebook Gram)
    k_tx[t, t'] = f_t^H H^H H f_t'       (tx-only quadratic form, used
                                          while no rx beam is selected yet)
    """
    f_all = cb_tx.beams.T
    w_all = cb_rx.beams.T
    hf = h @ f_all
    g = w_all.conj().T @ hf
    gram_tx = f_all.conj().T @ f_all
    k_tx = hf.conj().T @ hf
    return g, gram_tx, k_tx


def _objective_tx_batch(tx_sets, rx_set, g, gram_tx, k_tx, snr) -> np.ndarray:
    """Selection objective for a batch of tx index sets at a fixed rx set.

    Evaluated as log2 det(G_T + snr * M_T) - log2 det(G_T) with G_T the tx
    Gram submatrix and M_T = F^H H^H W W^H H F (or F^H H^H H F while the rx
    side is still empty, equivalent to combining with the identity).
    """
    idx = np.asarray(tx_sets)
    gram = gram_tx[idx[:, :, None], idx[:, None, :]]
    if len(rx_set) == 0:
        m = k_tx[idx[:, :, None], idx[:, None, :]]
    else:
        b = g[np.asarray(rx_set)][:, idx].transpose(1, 0, 2)  # (batch, |rx|, k)
        m = np.einsum("brk,brl->bkl", b.conj(), b)
    _, logdet_num = np.linalg.slogdet(gram + snr * m)
    _, logdet_den = np.linalg.slogdet(gram)
    return (logdet_num - logdet_den) / np.log(2.0)


def _objective_rx_batch(rx_sets, tx_set, g, gram_tx, snr) -> np.ndarray:
    """Selection objective for a batch of rx index sets at a fixed tx set."""
    t = list(tx_set)
    finv_sqrt = cx.inv_sqrt_hermitian(gram_tx[np.ix_(t, t)])
    x = g[:, t] @ finv_sqrt  # (n_beams_rx, k)
    idx = np.asarray(rx_sets)
    xs = x[idx]  # (batch, j, k)
    a = np.einsum("bjk,blk->bjl", xs, xs.conj())
    eye = np.eye(a.shape[1])
    _, logdet = np.linalg.slogdet(eye + snr * a)
    return logdet / np.log(2.0)


def selection_objective(
    h: np.ndarray, cb_tx: Codebook, cb_rx: Codebook, tx_set, rx_set, snr: float
) -> float:
    """Codebook-selection objective log2|I + SNR W^H H F (F^H F)^{-1} F^H H^H W|.

    An empty side is treated as identity combining/precoding, which reduces
    the first greedy pick to a matched-filter criterion.
    """
    g, gram_tx, k_tx = _selection_tables(h, cb_tx, cb_rx)
    if len(tx_set) == 0 and len(rx_set) == 0:
        return 0.0
    if len(tx_set) == 0:
        w = cb_rx.beams[list(rx_set)].T
        m = w.conj().T @ h @ h.conj().T @ w
        eig = np.clip(np.linalg.eigvalsh(0.5 * (m + m.conj().T)), 0.0, None)
        return float(np.sum(np.log2(1.0 + snr * eig)))
    return float(_objective_tx_batch([list(tx_set)], list(rx_set), g, gram_tx, k_tx, snr)[0])


def effective_link_budget(lb: LinkBudget, n_rf_tx: int, n_rf_rx: int) -> LinkBudget:
    """Clamp the stream count to what the selected RF dimensions support."""
    ns = min(lb.n_streams, n_rf_tx, n_rf_rx)
    if ns == lb.n_streams:
        return lb
    return LinkBudget(p_t=lb.p_t, noise_power=lb.noise_power, n_streams=ns)


def _build_solution(h, cb_tx, cb_rx, tx_set, rx_set, lb: LinkBudget) -> PrecodingSolution:
    tx = tuple(sorted(tx_set))
    rx = tuple(sorted(rx_set))
    f_rf = assemble_rf_matrix(cb_tx, tx)
    w_rf = assemble_rf_matrix(cb_rx, rx)
    f_bb, w_bb = optimal_baseband(h, f_rf, w_rf, lb.n_streams)
    rate = achievable_rate(h, f_rf @ f_bb, w_rf @ w_bb, lb)
    return PrecodingSolution(
        tx_indices=tx, rx_indices=rx, F_RF=f_rf, F_BB=f_bb, W_RF=w_rf, W_BB=w_bb, rate=rate
    )


def exhaustive_rf_search(
    h: np.ndarray,
    cb_tx: Codebook,
    cb_rx: Codebook,
    n_rf_tx: int,
    n_rf_rx: int,
    lb: LinkBudget,
    combo_cap: int = DEFAULT_COMBO_CAP,
) -> PrecodingSolution:
    """Enumerate every RF index-set pair and return the objective argmax.

    Ties break to the lexicographically smallest (tx_indices, rx_indices).
    """
    n_combos = comb(cb_tx.n_beams, n_rf_tx) * comb(cb_rx.n_beams, n_rf_rx)
    if n_combos > combo_cap:
        raise SearchSpaceError(
            f"{n_combos} candidate pairs exceed the cap of {combo_cap}; "
            "use greedy_label_search instead"
        )
    lb = effective_link_budget(lb, n_rf_tx, n_rf_rx)
    g, gram_tx, _ = _selection_tables(h, cb_tx, cb_rx)
    snr = lb.snr
    rx_sets = [list(c) for c in itertools.combinations(range(cb_rx.n_beams), n_rf_rx)]
    best_val = -np.inf
    best_tx: tuple[int, ...] = ()
    best_rx: tuple[int, ...] = ()
    for tx_set in itertools.combinations(range(cb_tx.n_beams), n_rf_tx):
        vals = _objective_rx_batch(rx_sets, list(tx_set), g, gram_tx, snr)
        j = int(np.argmax(vals))  # first max: lexicographically smallest rx set
        if vals[j] > best_val:
            best_val = float(vals[j])
            best_tx = tuple(tx_set)
            best_rx = tuple(rx_sets[j])
    return _build_solution(h, cb_tx, cb_rx, best_tx, best_rx, lb)


def greedy_label_search(
    h: np.ndarray,
    cb_tx: Codebook,
    cb_rx: Codebook,
    n_rf_tx: int,
    n_rf_rx: int,
    lb: LinkBudget,
) -> PrecodingSolution:
    """Greedy RF beam selection, the dataset label oracle.

    Each round adds the transmit/receive beam pair that maximizes the
    selection objective given everything picked so far (a single beam on
    one side once the other side is full). Adding one beam per side per
    round keeps every pick coupled to both arrays; selecting a side in
    isolation against a partially built other side measurably loses rate.
    Deterministic: objective ties break to the lexicographically smallest
    (tx set, rx set).
    """
    lb = effective_link_budget(lb, n_rf_tx, n_rf_rx)
    g, gram_tx, k_tx = _selection_tables(h, cb_tx, cb_rx)
    snr = lb.snr
    tx_set: list[int] = []
    rx_set: list[int] = []
    while len(tx_set) < n_rf_tx or len(rx_set) < n_rf_rx:
        tx_cands = [c for c in range(cb_tx.n_beams) if c not in tx_set]
        rx_cands = [c for c in range(cb_rx.n_beams) if c not in rx_set]
        if len(tx_set) >= n_rf_tx:
            sets = [sorted(rx_set + [c]) for c in rx_cands]
            vals = _objective_rx_batch(sets, tx_set, g, gram_tx, snr)
            rx_set = sets[int(np.argmax(vals))]
            continue
        if len(rx_set) >= n_rf_rx:
            sets = [sorted(tx_set + [c]) for c in tx_cands]
            vals = _objective_tx_batch(sets, rx_set, g, gram_tx, k_tx, snr)
            tx_set = sets[int(np.argmax(vals))]
            continue
        best_val = -np.inf
        best_pair = None
        rx_sets = [sorted(rx_set + [c]) for c in rx_cands]
        for ct in tx_cands:
            tx_try = sorted(tx_set + [ct])
            vals = _objective_rx_batch(rx_sets, tx_try, g, gram_tx, snr)
            j = int(np.argmax(vals))
            if vals[j] > best_val:
                best_val = float(vals[j])
                best_pair = (tx_try, rx_sets[j])
        tx_set, rx_set = best_pair
    return _build_solution(h, cb_tx, cb_rx, tx_set, rx_set, lb)
