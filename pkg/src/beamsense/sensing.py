"""Reference compressive channel measurement model.

The transmitter probes with the columns of P (N_t x M_t) and the receiver
combines with the columns of Q (N_r x M_r). With unit pilot symbols the
received measurement matrix is

    Y = sqrt(P_T) * Q^H @ H @ P + Q^H @ V,     V ~ CN(0, noise_power) iid

and its column-stacked vectorization is

    y = sqrt(P_T) * (P^T kron Q^H) @ vec(H) + vec(Q^H @ V).

This module is the mathematical reference the trainable encoder is checked
against, and the measurement simulator for deployment-phase evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cxlinalg import kronecker, vec


@dataclass(frozen=True)
class MeasurementMatrices:
    P: np.ndarray  # (N_t, M_t)
    Q: np.ndarray  # (N_r, M_r)

    @property
    def n_t(self) -> int:
        return self.P.shape[0]

    @property
    def m_t(self) -> int:
        return self.P.shape[1]

    @property
    def n_r(self) -> int:
        return self.Q.shape[0]

    @property
    def m_r(self) -> int:
        return self.Q.shape[1]

    def vector_operator(self) -> np.ndarray:
        """The (M_t*M_r x N_t*N_r) operator P^T kron Q^H."""
        return kronecker(self.P.T, self.Q.conj().T)

    def total_pilots(self) -> int:
        return self.m_t * self.m_r


def _draw_noise(shape, noise_power: float, rng: np.random.Generator) -> np.ndarray:
    scale = np.sqrt(noise_power / 2.0)
    return rng.normal(0.0, scale, size=shape) + 1j * rng.normal(0.0, scale, size=shape)


def measure_matrix_form(
    h: np.ndarray,
    mm: MeasurementMatrices,
    p_t: float,
    rng: np.random.Generator | None = None,
    noise_power: float = 0.0,
) -> np.ndarray:
    """Received measurement matrix Y, shape (M_r x M_t)."""
    if h.shape != (mm.n_r, mm.n_t):
        raise ValueError(f"channel shape {h.shape} does not match matrices ({mm.n_r}, {mm.n_t})")
    y = np.sqrt(p_t) * mm.Q.conj().T @ h @ mm.P
    if noise_power > 0:
        if rng is None:
            raise ValueError("rng required when noise_power > 0")
        v = _draw_noise((mm.n_r, mm.m_t), noise_power, rng)
        y = y + mm.Q.conj().T @ v
    return y


def measure_vector_form(
    h_vec: np.ndarray,
    mm: MeasurementMatrices,
    p_t: float,
    rng: np.random.Generator | None = None,
    noise_power: float = 0.0,
) -> np.ndarray:
    """Vectorized measurement y, length M_t*M_r.

    Consumes the RNG stream in the same layout as measure_matrix_form, so
    runs seeded identically produce the same noise realization and
    vec(measure_matrix_form(...)) equals this output.
    """
    if h_vec.shape != (mm.n_t * mm.n_r,):
        raise ValueError(f"expected h of length {mm.n_t * mm.n_r}, got {h_vec.shape}")
    y = np.sqrt(p_t) * mm.vector_operator() @ h_vec
    if noise_power > 0:
        if rng is None:
            raise ValueError("rng required when noise_power > 0")
        v = _draw_noise((mm.n_r, mm.m_t), noise_power, rng)
        y = y + vec(mm.Q.conj().T @ v)
    return y


def random_measurements(
    n_t: int, n_r: int, m_t: int, m_r: int, rng: np.random.Generator
) -> MeasurementMatrices:
    """Classical baseline: random constant-modulus probing beams.

    Entries are unit-magnitude random phases scaled by 1/sqrt(N), so every
    column is realizable with phase shifters, matching the RF hardware
    constraint.
    """
    p_phase = rng.uniform(0.0, 2.0 * np.pi, size=(n_t, m_t))
    q_phase = rng.uniform(0.0, 2.0 * np.pi, size=(n_r, m_r))
    p = np.exp(1j * p_phase) / np.sqrt(n_t)
    q = np.exp(1j * q_phase) / np.sqrt(n_r)
    return MeasurementMatrices(P=p, Q=q)
