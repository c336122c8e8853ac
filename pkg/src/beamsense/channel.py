"""Geometric mmWave channel generation from a synthetic clustered environment.

A channel realization is a sum of L planar-wave paths

    H = sum_l  alpha_l * a_rx(aoa_l) @ a_tx(aod_l)^H          (N_r x N_t)

with unit-norm ULA array responses on both ends. Path angles are drawn
around a small set of environment clusters so the angular structure is
learnable, which stands in for a ray-traced scene. Arrays are azimuth-only
ULAs restricted to the broadside sector [-pi/2, pi/2) to avoid the
front-back ambiguity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HALF_PI = 0.5 * np.pi
# Boltzmann thermal noise floor at 290 K, in dBm per Hz of bandwidth.
THERMAL_NOISE_DBM_PER_HZ = -174.0


@dataclass(frozen=True)
class PathParams:
    """One propagation path: complex gain plus departure/arrival azimuths."""

    gain: complex
    aod_az: float
    aoa_az: float


@dataclass(frozen=True)
class ClusterSpec:
    center_aod: float
    center_aoa: float
    angular_spread: float
    mean_power: float

    def __post_init__(self):
        if self.angular_spread <= 0:
            raise ValueError("angular_spread must be positive")
        if self.mean_power <= 0:
            raise ValueError("mean_power must be positive")


@dataclass(frozen=True)
class EnvironmentModel:
    """Clustered-angle scene: where paths can come from and how strong."""

    clusters: tuple[ClusterSpec, ...]
    num_paths: int
    seed: int = 0

    def __post_init__(self):
        if len(self.clusters) < 1:
            raise ValueError("environment needs at least one cluster")
        if self.num_paths < 1:
            raise ValueError("num_paths must be >= 1")

    def cluster_probabilities(self) -> np.ndarray:
        powers = np.array([c.mean_power for c in self.clusters], dtype=float)
        return powers / powers.sum()


@dataclass
class ChannelSample:
    """One dataset point: path parameters, clean and noisy channel, labels."""

    paths: list[PathParams]
    H: np.ndarray
    H_noisy: np.ndarray
    labels_tx: tuple[int, ...] = field(default_factory=tuple)
    labels_rx: tuple[int, ...] = field(default_factory=tuple)


def array_response_ula(n_antennas: int, azimuth: float, spacing_wavelengths: float = 0.5) -> np.ndarray:
    """Unit-norm ULA response: entry k = exp(j*2*pi*spacing*k*sin(az)) / sqrt(N)."""
    if n_antennas < 1:
        raise ValueError("n_antennas must be >= 1")
    k = np.arange(n_antennas)
    phase = 2.0 * np.pi * spacing_wavelengths * k * np.sin(azimuth)
    return np.exp(1j * phase) / np.sqrt(n_antennas)


def build_channel(paths, n_t: int, n_r: int, spacing_wavelengths: float = 0.5) -> np.ndarray:
    """Assemble H from path parameters; rank is at most len(paths)."""
    if not paths:
        raise ValueError("paths must be non-empty")
    h = np.zeros((n_r, n_t), dtype=np.complex128)
    for p in paths:
        a_r = array_response_ula(n_r, p.aoa_az, spacing_wavelengths)
        a_t = array_response_ula(n_t, p.aod_az, spacing_wavelengths)
        h += p.gain * np.outer(a_r, a_t.conj())
    return h


def _clip_sector(angle: np.ndarray) -> np.ndarray:
    # Broadside sector [-pi/2, pi/2); spreads are small so clipping is rare.
    return np.clip(angle, -HALF_PI, HALF_PI - 1e-12)


def sample_environment(env: EnvironmentModel, rng: np.random.Generator) -> list[PathParams]:
    """Draw L paths: cluster by mean power, angles around the cluster center,
    complex Gaussian gain with variance equal to the cluster power."""
    probs = env.cluster_probabilities()
    idx = rng.choice(len(env.clusters), size=env.num_paths, p=probs)
    paths = []
    for i in idx:
        c = env.clusters[i]
        aod = _clip_sector(c.center_aod + rng.normal(0.0, c.angular_spread))
        aoa = _clip_sector(c.center_aoa + rng.normal(0.0, c.angular_spread))
        scale = np.sqrt(c.mean_power / 2.0)
        gain = complex(rng.normal(0.0, scale), rng.normal(0.0, scale))
        paths.append(PathParams(gain=gain, aod_az=float(aod), aoa_az=float(aoa)))
    return paths


def add_channel_noise(h: np.ndarray, noise_power: float, rng: np.random.Generator) -> np.ndarray:
    """H + V with V i.i.d. circularly-symmetric complex Gaussian, variance noise_power."""
    if noise_power < 0:
        raise ValueError("noise_power must be >= 0")
    if noise_power == 0:
        return h.copy()
    scale = np.sqrt(noise_power / 2.0)
    v = rng.normal(0.0, scale, size=h.shape) + 1j * rng.normal(0.0, scale, size=h.shape)
    return h + v


def receiver_noise_power_dbm(bandwidth_hz: float, noise_figure_db: float) -> float:
    """Link-budget receiver noise: thermal floor + 10*log10(BW) + noise figure.

    0.5 GHz bandwidth with a 5 dB noise figure gives about -82.0 dBm, the
    documented default operating point.
    """
    return THERMAL_NOISE_DBM_PER_HZ + 10.0 * np.log10(bandwidth_hz) + noise_figure_db


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)
