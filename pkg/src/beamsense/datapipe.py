"""Dataset construction, persistence, and splits.

One data point is the pair (noisy channel, oracle beam index sets). Labels
are computed on the clean channel: the oracle has perfect CSI, while the
network only ever sees the noisy copy, which is what gives training its
noise-robustness signal. After generation the noisy channels are globally
normalized so the largest absolute entry over the whole dataset equals
one; the clean channels keep their physical scale for rate evaluation.

File format (magic "APDS1", little-endian): header of eight u32 fields
(n_t, n_r, n_rf_tx, n_rf_rx, n_codes_tx, n_codes_rx, n_paths, n_samples),
one f64 norm factor and one codebook-kind byte; then per sample the noisy
channel as interleaved f64 re/im in column-major entry order followed by
the tx and rx label index lists as u16; finally a CRC32 trailer over all
preceding bytes.
"""

from __future__ import annotations

import json
import struct
import zlib
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .channel import (
    ChannelSample,
    EnvironmentModel,
    add_channel_noise,
    build_channel,
    sample_environment,
)
from .codebook import DFT, Codebook, build_dft_codebook, build_steering_codebook
from .oracle import DegenerateChannelError, LinkBudget, greedy_label_search

DATASET_MAGIC = b"APDS1"
_KIND_BYTES = {DFT: 0, "beamsteering": 1}
_KIND_NAMES = {v: k for k, v in _KIND_BYTES.items()}
MAX_RESAMPLE_ATTEMPTS = 8


class DatasetFormatError(IOError):
    pass


@dataclass(frozen=True)
class DatasetDims:
    n_t: int
    n_r: int
    n_rf_tx: int
    n_rf_rx: int
    n_codes_tx: int
    n_codes_rx: int
    n_paths: int


@dataclass
class Dataset:
    dims: DatasetDims
    codebook_kind: str
    samples: list[ChannelSample]
    norm_factor: float

    def __len__(self) -> int:
        return len(self.samples)

    def noisy_matrix(self) -> np.ndarray:
        """All noisy channels, column-stacked, as (n_samples, n_t*n_r)."""
        return np.stack([s.H_noisy.reshape(-1, order="F") for s in self.samples])

    def label_sets(self):
        tx = [s.labels_tx for s in self.samples]
        rx = [s.labels_rx for s in self.samples]
        return tx, rx


def make_codebooks(dims: DatasetDims, kind: str) -> tuple[Codebook, Codebook]:
    if kind == DFT:
        return build_dft_codebook(dims.n_t, dims.n_codes_tx), build_dft_codebook(
            dims.n_r, dims.n_codes_rx
        )
    return (
        build_steering_codebook(dims.n_t, dims.n_codes_tx),
        build_steering_codebook(dims.n_r, dims.n_codes_rx),
    )


def channel_realization(
    env: EnvironmentModel, dims: DatasetDims, seed: int, index: int, attempt: int = 0
):
    """Deterministic per-sample channel: substream keyed by (seed, index, attempt)."""
    rng = np.random.default_rng([seed, index, attempt])
    paths = sample_environment(env, rng)
    h = build_channel(paths, dims.n_t, dims.n_r)
    return paths, h, rng


def generate_dataset(
    env: EnvironmentModel,
    dims: DatasetDims,
    lb: LinkBudget,
    n_samples: int,
    seed: int,
    noise_power: float,
    codebook_kind: str = DFT,
    label_on_noisy: bool = False,
) -> Dataset:
    """Full pipeline: environment -> channel -> noise -> oracle labels -> normalize.

    A channel the oracle declares degenerate is resampled from a fresh
    substream, a bounded number of times.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    cb_tx, cb_rx = make_codebooks(dims, codebook_kind)
    samples = []
    for i in range(n_samples):
        for attempt in range(MAX_RESAMPLE_ATTEMPTS):
            paths, h, rng = channel_realization(env, dims, seed, i, attempt)
            h_noisy = add_channel_noise(h, noise_power, rng)
            try:
                sol = greedy_label_search(
                    h_noisy if label_on_noisy else h,
                    cb_tx, cb_rx, dims.n_rf_tx, dims.n_rf_rx, lb,
                )
            except DegenerateChannelError:
                continue
            samples.append(
                ChannelSample(
                    paths=paths, H=h, H_noisy=h_noisy,
                    labels_tx=sol.tx_indices, labels_rx=sol.rx_indices,
                )
            )
            break
        else:
            raise DegenerateChannelError(
                f"sample {i}: channel still degenerate after {MAX_RESAMPLE_ATTEMPTS} resamples"
            )
    ds = Dataset(dims=dims, codebook_kind=codebook_kind, samples=samples, norm_factor=1.0)
    normalize_dataset(ds)
    return ds


def normalize_dataset(ds: Dataset) -> None:
    """Scale all noisy channels by the global max-abs entry (idempotent)."""
    peak = max(float(np.abs(s.H_noisy).max()) for s in ds.samples)
    if peak <= 0:
        raise ValueError("cannot normalize an all-zero dataset")
    for s in ds.samples:
        s.H_noisy = s.H_noisy / peak
    ds.norm_factor *= peak


def save_dataset(ds: Dataset, path) -> None:
    d = ds.dims
    payload = bytearray()
    payload += DATASET_MAGIC
    payload += struct.pack(
        "<8I", d.n_t, d.n_r, d.n_rf_tx, d.n_rf_rx, d.n_codes_tx, d.n_codes_rx,
        d.n_paths, len(ds.samples),
    )
    payload += struct.pack("<d", ds.norm_factor)
    payload += struct.pack("<B", _KIND_BYTES[ds.codebook_kind])
    for s in ds.samples:
        flat = s.H_noisy.reshape(-1, order="F")
        inter = np.empty(2 * flat.size)
        inter[0::2] = flat.real
        inter[1::2] = flat.imag
        payload += inter.astype("<f8").tobytes()
        payload += np.asarray(s.labels_tx, dtype="<u2").tobytes()
        payload += np.asarray(s.labels_rx, dtype="<u2").tobytes()
    payload += struct.pack("<I", zlib.crc32(bytes(payload)))
    with open(path, "wb") as fh:
        fh.write(bytes(payload))


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(DATASET_MAGIC) + 45:
        raise DatasetFormatError("truncated dataset: header")
    if blob[: len(DATASET_MAGIC)] != DATASET_MAGIC:
        raise DatasetFormatError(f"bad dataset magic in {path}")
    body, trailer = blob[:-4], blob[-4:]
    crc = struct.unpack("<I", trailer)[0]
    if zlib.crc32(body) != crc:
        raise DatasetFormatError("dataset checksum mismatch (corrupt or truncated file)")
    off = len(DATASET_MAGIC)
    header = struct.unpack_from("<8I", body, off)
    off += 32
    norm_factor = struct.unpack_from("<d", body, off)[0]
    off += 8
    kind_byte = struct.unpack_from("<B", body, off)[0]
    off += 1
    if kind_byte not in _KIND_NAMES:
        raise DatasetFormatError(f"unknown codebook kind byte {kind_byte}")
    dims = DatasetDims(*header[:7])
    n_samples = header[7]
    samples = []
    ch_len = dims.n_t * dims.n_r
    for i in range(n_samples):
        need = 16 * ch_len + 2 * (dims.n_rf_tx + dims.n_rf_rx)
        if off + need > len(body):
            raise DatasetFormatError(f"truncated dataset: sample {i}")
        inter = np.frombuffer(body, dtype="<f8", count=2 * ch_len, offset=off)
        off += 16 * ch_len
        flat = inter[0::2] + 1j * inter[1::2]
        h_noisy = flat.reshape((dims.n_r, dims.n_t), order="F")
        tx = np.frombuffer(body, dtype="<u2", count=dims.n_rf_tx, offset=off)
        off += 2 * dims.n_rf_tx
        rx = np.frombuffer(body, dtype="<u2", count=dims.n_rf_rx, offset=off)
        off += 2 * dims.n_rf_rx
        samples.append(
            ChannelSample(
                paths=[], H=None, H_noisy=h_noisy,
                labels_tx=tuple(int(v) for v in tx),
                labels_rx=tuple(int(v) for v in rx),
            )
        )
    if off != len(body):
        raise DatasetFormatError(f"dataset has {len(body) - off} unexpected trailing bytes")
    return Dataset(
        dims=dims, codebook_kind=_KIND_NAMES[kind_byte], samples=samples,
        norm_factor=norm_factor,
    )


def split(ds: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle into disjoint, exhaustive train/test parts.

    The norm factor was computed on the full dataset and is inherited by
    both sides unchanged.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    n = len(ds.samples)
    train_idx, test_idx = split_indices(n, train_fraction, seed)
    if len(train_idx) == 0 or len(test_idx) == 0:
        raise ValueError(f"fraction {train_fraction} leaves an empty side for {n} samples")

    def pick(idx):
        return Dataset(
            dims=ds.dims, codebook_kind=ds.codebook_kind,
            samples=[ds.samples[i] for i in idx], norm_factor=ds.norm_factor,
        )

    return pick(train_idx), pick(test_idx)


def split_indices(n: int, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """The index partition used by split, for callers that track positions."""
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(n * train_fraction)
    return order[:n_train], order[n_train:]


def describe(ds: Dataset) -> str:
    """Human-readable JSON summary."""
    tx_counts = Counter(i for s in ds.samples for i in s.labels_tx)
    rx_counts = Counter(i for s in ds.samples for i in s.labels_rx)
    info = {
        "n_samples": len(ds.samples),
        "dims": {
            "n_t": ds.dims.n_t, "n_r": ds.dims.n_r,
            "n_rf_tx": ds.dims.n_rf_tx, "n_rf_rx": ds.dims.n_rf_rx,
            "n_codes_tx": ds.dims.n_codes_tx, "n_codes_rx": ds.dims.n_codes_rx,
            "n_paths": ds.dims.n_paths,
        },
        "codebook_kind": ds.codebook_kind,
        "norm_factor": ds.norm_factor,
        "tx_label_histogram": {str(k): tx_counts[k] for k in sorted(tx_counts)},
        "rx_label_histogram": {str(k): rx_counts[k] for k in sorted(rx_counts)},
    }
    return json.dumps(info, indent=2, sort_keys=True)
