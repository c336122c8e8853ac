"""Quantized constant-modulus RF beam codebooks.

Every beam entry has magnitude exactly 1/sqrt(N): analog beams are realized
with phase shifters only, so only the phase is free. Label classes used by
the learning pipeline are codebook positions 0..n_beams-1, and selected
index sets are kept sorted ascending so labels are canonical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import array_response_ula

DFT = "dft"
BEAMSTEERING = "beamsteering"


@dataclass(frozen=True)
class Codebook:
    n_antennas: int
    beams: np.ndarray  # (n_beams, n_antennas), each row unit-norm constant-modulus
    kind: str

    @property
    def n_beams(self) -> int:
        return self.beams.shape[0]

    def beam(self, index: int) -> np.ndarray:
        return self.beams[index]

    def matrix(self) -> np.ndarray:
        """All beams as columns, (n_antennas x n_beams)."""
        return self.beams.T.copy()


def build_dft_codebook(n_antennas: int, n_beams: int) -> Codebook:
    """Square DFT codebook: beam m entry k = exp(-j*2*pi*k*m/N) / sqrt(N)."""
    if n_beams != n_antennas:
        raise ValueError(
            f"DFT codebook requires n_beams == n_antennas, got {n_beams} != {n_antennas}"
        )
    k = np.arange(n_antennas)
    m = np.arange(n_beams)
    beams = np.exp(-2j * np.pi * np.outer(m, k) / n_antennas) / np.sqrt(n_antennas)
    return Codebook(n_antennas=n_antennas, beams=beams, kind=DFT)


def build_steering_codebook(n_antennas: int, n_beams: int, spacing: float = 0.5) -> Codebook:
    """Beamsteering codebook on a uniform sin(azimuth) grid over [-1, 1)."""
    if n_beams < n_antennas:
        raise ValueError("steering codebook needs n_beams >= n_antennas")
    sines = -1.0 + 2.0 * np.arange(n_beams) / n_beams
    beams = np.stack(
        [array_response_ula(n_antennas, float(np.arcsin(s)), spacing) for s in sines]
    )
    return Codebook(n_antennas=n_antennas, beams=beams, kind=BEAMSTEERING)


def assemble_rf_matrix(cb: Codebook, indices) -> np.ndarray:
    """Stack the selected beams as columns, in the given index order."""
    indices = list(indices)
    if len(set(indices)) != len(indices):
        raise ValueError(f"duplicate beam indices: {indices}")
    for i in indices:
        if not 0 <= i < cb.n_beams:
            raise ValueError(f"beam index {i} out of range [0, {cb.n_beams})")
    return cb.beams[indices].T.copy()


def beam_sines(cb: Codebook) -> np.ndarray:
    """Steered direction of each beam as sin(azimuth) in [-1, 1).

    DFT beam m peaks where sin(az) = -2m/N wrapped into [-1, 1) at
    half-wavelength spacing; steering beams store their grid directly.
    """
    if cb.kind == BEAMSTEERING:
        return -1.0 + 2.0 * np.arange(cb.n_beams) / cb.n_beams
    m = np.arange(cb.n_beams)
    return ((-2.0 * m / cb.n_antennas) + 1.0) % 2.0 - 1.0
