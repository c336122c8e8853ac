"""Experiment configuration: flat key=value files with dotted sections.

Example::

    dims.n_t=16
    dims.m_t=8
    env.cluster.0.aod_deg=-49.5
    link.p_t_dbm=5,10,15,20,25,30
    train.epochs=200
    seed=0

Unknown keys are errors, values are type-checked, and the fully resolved
configuration is echoed as JSON next to every output so a run can be
reproduced from its output directory alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .channel import ClusterSpec, EnvironmentModel, dbm_to_watts
from .codebook import BEAMSTEERING, DFT
from .datapipe import DatasetDims
from .network import NetworkDims
from .oracle import LinkBudget
from .training import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class ClusterConfig:
    aod_deg: float
    aoa_deg: float
    spread_deg: float = 3.0
    power: float = 1.0


def _default_clusters():
    # Four well-separated clusters with unequal powers; sin-domain centers
    # roughly -0.76, -0.25, 0.20, 0.65 (tx) so DFT beams resolve them.
    return [
        ClusterConfig(aod_deg=-49.5, aoa_deg=32.7, spread_deg=3.0, power=1.0),
        ClusterConfig(aod_deg=-14.5, aoa_deg=-46.1, spread_deg=3.0, power=0.7),
        ClusterConfig(aod_deg=11.5, aoa_deg=-8.0, spread_deg=3.0, power=0.5),
        ClusterConfig(aod_deg=40.5, aoa_deg=55.1, spread_deg=3.0, power=0.3),
    ]


@dataclass
class ExperimentConfig:
    # dims
    n_t: int = 16
    n_r: int = 16
    n_rf_tx: int = 2
    n_rf_rx: int = 2
    n_streams: int = 2
    m_t: int = 8
    m_r: int = 8
    # codebook
    codebook_kind: str = DFT
    n_codes_tx: int = 0  # 0 means "same as antenna count"
    n_codes_rx: int = 0
    # environment
    n_paths: int = 3
    clusters: list[ClusterConfig] = field(default_factory=_default_clusters)
    # link budget and noise
    p_t_dbm_grid: list[float] = field(default_factory=lambda: [5.0, 10.0, 15.0, 20.0, 25.0, 30.0])
    noise_power_dbm: float = 0.0
    channel_noise_power: float = 2e-4
    measurement_noise_power: float = 2e-4
    reference_p_t_dbm: float = 30.0
    eval_noise_mode: str = "channel"  # channel | measurement
    # data
    n_samples: int = 20000
    train_fraction: float = 0.9
    label_on_noisy: bool = False
    # network
    hidden1: int = 512
    hidden2: int = 512
    # training
    batch_size: int = 512
    learning_rate: float = 0.005
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 200
    val_fraction: float = 0.1
    train_encoder: bool = True
    # bench
    bench_channels: int = 200
    # global
    seed: int = 0

    def validate(self) -> None:
        def positive(name):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")

        for name in ("n_t", "n_r", "n_rf_tx", "n_rf_rx", "n_streams", "m_t", "m_r",
                     "n_paths", "n_samples", "hidden1", "hidden2", "batch_size",
                     "learning_rate", "epochs", "bench_channels"):
            positive(name)
        if self.m_t > self.n_t:
            raise ConfigError(f"m_t ({self.m_t}) cannot exceed n_t ({self.n_t})")
        if self.m_r > self.n_r:
            raise ConfigError(f"m_r ({self.m_r}) cannot exceed n_r ({self.n_r})")
        if self.n_streams > min(self.n_rf_tx, self.n_rf_rx):
            raise ConfigError("n_streams cannot exceed the RF chain counts")
        if self.codebook_kind not in (DFT, BEAMSTEERING):
            raise ConfigError(f"unknown codebook kind {self.codebook_kind!r}")
        if self.codebook_kind == DFT:
            if self.n_codes_tx not in (0, self.n_t) or self.n_codes_rx not in (0, self.n_r):
                raise ConfigError("DFT codebooks require n_codes equal to the antenna count")
        if not self.p_t_dbm_grid:
            raise ConfigError("p_t_dbm must list at least one transmit power")
        if self.eval_noise_mode not in ("channel", "measurement"):
            raise ConfigError(f"unknown eval_noise_mode {self.eval_noise_mode!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must be in (0, 1)")
        if self.channel_noise_power < 0 or self.measurement_noise_power < 0:
            raise ConfigError("noise powers must be >= 0")
        if self.n_rf_tx > self.codes_tx or self.n_rf_rx > self.codes_rx:
            raise ConfigError("RF chain count cannot exceed the codebook size")
        if not self.clusters:
            raise ConfigError("environment needs at least one cluster")

    @property
    def codes_tx(self) -> int:
        return self.n_codes_tx if self.n_codes_tx else self.n_t

    @property
    def codes_rx(self) -> int:
        return self.n_codes_rx if self.n_codes_rx else self.n_r

    def environment(self) -> EnvironmentModel:
        deg = np.pi / 180.0
        clusters = tuple(
            ClusterSpec(
                center_aod=c.aod_deg * deg,
                center_aoa=c.aoa_deg * deg,
                angular_spread=c.spread_deg * deg,
                mean_power=c.power,
            )
            for c in self.clusters
        )
        return EnvironmentModel(clusters=clusters, num_paths=self.n_paths, seed=self.seed)

    def dataset_dims(self) -> DatasetDims:
        return DatasetDims(
            n_t=self.n_t, n_r=self.n_r, n_rf_tx=self.n_rf_tx, n_rf_rx=self.n_rf_rx,
            n_codes_tx=self.codes_tx, n_codes_rx=self.codes_rx, n_paths=self.n_paths,
        )

    def network_dims(self) -> NetworkDims:
        return NetworkDims(
            n_t=self.n_t, n_r=self.n_r, m_t=self.m_t, m_r=self.m_r,
            n_codes_tx=self.codes_tx, n_codes_rx=self.codes_rx,
            hidden1=self.hidden1, hidden2=self.hidden2,
        )

    def link_budget(self, p_t_dbm: float) -> LinkBudget:
        return LinkBudget(
            p_t=dbm_to_watts(p_t_dbm),
            noise_power=dbm_to_watts(self.noise_power_dbm),
            n_streams=self.n_streams,
        )

    def label_link_budget(self) -> LinkBudget:
        return self.link_budget(self.reference_p_t_dbm)

    def eval_channel_noise_power(self, p_t_dbm: float) -> float:
        """Input-channel noise at a grid point: scales inversely with power.

        Probing at power P_T buys a proportionally cleaner channel
        observation, so the effective noise on the network input is the
        configured level referenced to reference_p_t_dbm.
        """
        ref = dbm_to_watts(self.reference_p_t_dbm)
        return self.channel_noise_power * ref / dbm_to_watts(p_t_dbm)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size, learning_rate=self.learning_rate,
            adam_beta1=self.adam_beta1, adam_beta2=self.adam_beta2,
            adam_eps=self.adam_eps, epochs=self.epochs, seed=self.seed,
            val_fraction=self.val_fraction, train_encoder=self.train_encoder,
        )


# key -> (attribute, parser)
def _parse_bool(s: str) -> bool:
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _parse_float_list(s: str) -> list[float]:
    return [float(tok) for tok in s.split(",") if tok.strip()]


_SCHEMA = {
    "dims.n_t": ("n_t", int),
    "dims.n_r": ("n_r", int),
    "dims.n_rf_tx": ("n_rf_tx", int),
    "dims.n_rf_rx": ("n_rf_rx", int),
    "dims.n_streams": ("n_streams", int),
    "dims.m_t": ("m_t", int),
    "dims.m_r": ("m_r", int),
    "codebook.kind": ("codebook_kind", str),
    "codebook.n_codes_tx": ("n_codes_tx", int),
    "codebook.n_codes_rx": ("n_codes_rx", int),
    "env.n_paths": ("n_paths", int),
    "link.p_t_dbm": ("p_t_dbm_grid", _parse_float_list),
    "link.noise_power_dbm": ("noise_power_dbm", float),
    "noise.channel_noise_power": ("channel_noise_power", float),
    "noise.measurement_noise_power": ("measurement_noise_power", float),
    "noise.reference_p_t_dbm": ("reference_p_t_dbm", float),
    "noise.eval_mode": ("eval_noise_mode", str),
    "data.n_samples": ("n_samples", int),
    "data.train_fraction": ("train_fraction", float),
    "data.label_on_noisy": ("label_on_noisy", _parse_bool),
    "net.hidden1": ("hidden1", int),
    "net.hidden2": ("hidden2", int),
    "train.batch_size": ("batch_size", int),
    "train.learning_rate": ("learning_rate", float),
    "train.adam_beta1": ("adam_beta1", float),
    "train.adam_beta2": ("adam_beta2", float),
    "train.adam_eps": ("adam_eps", float),
    "train.epochs": ("epochs", int),
    "train.val_fraction": ("val_fraction", float),
    "train.train_encoder": ("train_encoder", _parse_bool),
    "bench.channels": ("bench_channels", int),
    "seed": ("seed", int),
}

_CLUSTER_FIELDS = {"aod_deg": float, "aoa_deg": float, "spread_deg": float, "power": float}


def parse_config(text: str) -> ExperimentConfig:
    """Parse key=value text; '#' starts a comment; unknown keys are errors."""
    cfg = ExperimentConfig()
    cluster_entries: dict[int, dict[str, float]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("env.cluster."):
            parts = key.split(".")
            if len(parts) != 4 or parts[3] not in _CLUSTER_FIELDS:
                raise ConfigError(f"line {lineno}: unknown config key {key!r}")
            try:
                idx = int(parts[2])
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad cluster index in {key!r}") from exc
            try:
                cluster_entries.setdefault(idx, {})[parts[3]] = _CLUSTER_FIELDS[parts[3]](value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
            continue
        if key not in _SCHEMA:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        attr, parser = _SCHEMA[key]
        try:
            setattr(cfg, attr, parser(value))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    if cluster_entries:
        indices = sorted(cluster_entries)
        if indices != list(range(len(indices))):
            raise ConfigError(f"cluster indices must be 0..k-1, got {indices}")
        try:
            cfg.clusters = [ClusterConfig(**cluster_entries[i]) for i in indices]
        except TypeError as exc:
            raise ConfigError(f"incomplete cluster definition: {exc}") from exc
    try:
        cfg.validate()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_echo(cfg: ExperimentConfig) -> str:
    """Resolved configuration as deterministic JSON."""
    flat = {key: getattr(cfg, attr) for key, (attr, _) in _SCHEMA.items()}
    for i, c in enumerate(cfg.clusters):
        for name in _CLUSTER_FIELDS:
            flat[f"env.cluster.{i}.{name}"] = getattr(c, name)
    return json.dumps(flat, indent=2, sort_keys=True)
