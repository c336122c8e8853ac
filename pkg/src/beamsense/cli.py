"""Experiment driver.

Subcommands reproduce the full evaluation protocol at desk scale:

  generate         build a labeled dataset file from the environment model
  train            train the sensing/prediction network on a dataset
  eval             rate and accuracy versus transmit power on the test split
  compare-sensing  learned versus random measurement matrices
  oracle-bench     greedy label oracle versus exhaustive search
  selftest         run the library invariant suite

Every run writes its outputs plus a JSON echo of the resolved config
(including the seed) into --out, so results are reproducible from the
output directory alone. Exit code 0 on success; failures print a
machine-readable error category to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import datapipe, network, sensing, training
from .channel import add_channel_noise
from .codebook import DFT, beam_sines
from .config import ConfigError, ExperimentConfig, config_echo, load_config
from .cxlinalg import LinAlgDomainError
from .datapipe import Dataset, DatasetFormatError, channel_realization, make_codebooks
from .network import CheckpointError
from .oracle import (
    DegenerateChannelError,
    SearchSpaceError,
    effective_link_budget,
    exhaustive_rf_search,
    greedy_label_search,
)
from .training import TrainingDivergedError

# rng stream tags so generation, eval noise, and baselines never collide
_TAG_EVAL_CHANNEL_NOISE = 101
_TAG_EVAL_MEAS_NOISE = 103
_TAG_RANDOM_BASELINE = 211


class CliDataError(IOError):
    pass


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _write_config_echo(cfg: ExperimentConfig, out: Path) -> None:
    _write(out / "config.json", config_echo(cfg) + "\n")


def _pilot_summary(cfg: ExperimentConfig) -> str:
    return (
        f"pilots: {cfg.m_t * cfg.m_r} compressive ({cfg.m_t} tx x {cfg.m_r} rx) "
        f"vs {cfg.n_t * cfg.n_r} for exhaustive beam probing"
    )


def cmd_generate(cfg: ExperimentConfig, out: Path) -> None:
    ds = datapipe.generate_dataset(
        env=cfg.environment(),
        dims=cfg.dataset_dims(),
        lb=cfg.label_link_budget(),
        n_samples=cfg.n_samples,
        seed=cfg.seed,
        noise_power=cfg.channel_noise_power,
        codebook_kind=cfg.codebook_kind,
        label_on_noisy=cfg.label_on_noisy,
    )
    datapipe.save_dataset(ds, out / "dataset.apds")
    _write(out / "dataset.json", datapipe.describe(ds) + "\n")
    _write_config_echo(cfg, out)
    print(f"wrote {len(ds)} samples to {out / 'dataset.apds'}")
    print(_pilot_summary(cfg))


def _load_dataset_checked(cfg: ExperimentConfig, path: Path) -> Dataset:
    ds = datapipe.load_dataset(path)
    want = cfg.dataset_dims()
    if ds.dims != want:
        raise CliDataError(f"dataset dims {ds.dims} do not match config dims {want}")
    if ds.codebook_kind != cfg.codebook_kind:
        raise CliDataError("dataset codebook kind does not match config")
    return ds


def _train_on(cfg: ExperimentConfig, ds_train: Dataset, train_encoder: bool, seed: int):
    dims = cfg.network_dims()
    params = network.init_params(dims, np.random.default_rng(seed))
    tcfg = cfg.train_config()
    tcfg.seed = seed
    tcfg.train_encoder = train_encoder
    if not train_encoder:
        mm = sensing.random_measurements(
            cfg.n_t, cfg.n_r, cfg.m_t, cfg.m_r,
            np.random.default_rng([seed, _TAG_RANDOM_BASELINE]),
        )
        network.load_measurement_matrices(params, mm)
    h = ds_train.noisy_matrix()
    tx_sets, rx_sets = ds_train.label_sets()
    y_tx, y_rx = training.make_label_vectors(tx_sets, rx_sets, dims.n_codes_tx, dims.n_codes_rx)
    return training.train(params, h, y_tx, y_rx, tcfg, cfg.n_rf_tx, cfg.n_rf_rx)


def cmd_train(cfg: ExperimentConfig, dataset_path: Path, out: Path) -> None:
    ds = _load_dataset_checked(cfg, dataset_path)
    ds_train, _ = datapipe.split(ds, cfg.train_fraction, cfg.seed)
    best, history = _train_on(cfg, ds_train, cfg.train_encoder, cfg.seed)
    network.save_checkpoint(best, out / "checkpoint.apnv")
    _write(out / "history.csv", "\n".join(training.history_csv_lines(history)) + "\n")
    final = min(history, key=lambda r: r.val_loss)
    metrics = {
        "best_epoch": final.epoch,
        "best_val_loss": final.val_loss,
        "best_val_tx_acc": final.val_tx_acc,
        "best_val_rx_acc": final.val_rx_acc,
        "epochs": len(history),
    }
    _write(out / "metrics.json", json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    _write_config_echo(cfg, out)
    print(
        f"best epoch {final.epoch}: val_loss {final.val_loss:.5f} "
        f"tx_acc {final.val_tx_acc:.4f} rx_acc {final.val_rx_acc:.4f}"
    )


def _regenerate_clean_channels(cfg: ExperimentConfig, ds: Dataset, indices, threads: int):
    """Rebuild the clean channels for the given sample positions.

    The dataset file stores only what the network consumes, so the clean
    channels are re-derived from the seeded per-sample substreams and each
    one is verified against the stored noisy channel.
    """
    env = cfg.environment()
    dims = cfg.dataset_dims()

    def rebuild(i: int):
        for attempt in range(datapipe.MAX_RESAMPLE_ATTEMPTS):
            _, h, rng = channel_realization(env, dims, cfg.seed, int(i), attempt)
            h_noisy = add_channel_noise(h, cfg.channel_noise_power, rng) / ds.norm_factor
            if np.abs(h_noisy - ds.samples[i].H_noisy).max() < 1e-9:
                return h, attempt
        raise CliDataError(
            f"sample {i}: stored noisy channel cannot be reproduced from this config/seed"
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(rebuild, indices))
    else:
        results = [rebuild(i) for i in indices]
    return [r[0] for r in results], [r[1] for r in results]


def _subset_rates(g_stack, tx_sets, rx_sets, snr: float, n_streams: int) -> np.ndarray:
    """Rates for per-sample beam selections over precomputed cross-gain tables.

    For orthonormal codebooks the optimal-baseband rate is the sum over the
    top n_streams squared singular values s of the effective channel of
    log2(1 + snr * s^2).
    """
    n = len(g_stack)
    eff = np.stack(
        [g_stack[i][np.ix_(list(rx_sets[i]), list(tx_sets[i]))] for i in range(n)]
    )
    s = np.linalg.svd(eff, compute_uv=False)
    top = s[:, :n_streams]
    return np.log2(1.0 + snr * top**2).sum(axis=1)


def _eval_inputs_channel(cfg, ds, indices, clean, attempts, p_idx, p_t_dbm):
    noise_power = cfg.eval_channel_noise_power(p_t_dbm)
    rows = []
    for pos, i in enumerate(indices):
        rng = np.random.default_rng([cfg.seed, int(i), attempts[pos], _TAG_EVAL_CHANNEL_NOISE, p_idx])
        h_noisy = add_channel_noise(clean[pos], noise_power, rng) / ds.norm_factor
        rows.append(h_noisy.reshape(-1, order="F"))
    return np.stack(rows)


def _eval_scores_measurement(cfg, ds, params, indices, clean, attempts, p_idx, p_t_dbm):
    mm = network.export_measurement_matrices(params)
    op = mm.vector_operator()
    sqrt_pt = np.sqrt(cfg.link_budget(p_t_dbm).p_t)
    rows = []
    for pos, i in enumerate(indices):
        h_norm = clean[pos].reshape(-1, order="F") / ds.norm_factor
        y = sqrt_pt * (op @ h_norm)
        if cfg.measurement_noise_power > 0:
            rng = np.random.default_rng([cfg.seed, int(i), attempts[pos], _TAG_EVAL_MEAS_NOISE, p_idx])
            scale = np.sqrt(cfg.measurement_noise_power / 2.0)
            v = rng.normal(0.0, scale, size=(cfg.n_r, cfg.m_t)) + 1j * rng.normal(
                0.0, scale, size=(cfg.n_r, cfg.m_t)
            )
            y = y + (mm.Q.conj().T @ v).reshape(-1, order="F")
        rows.append(y / sqrt_pt)
    out = network.precoder_forward(params, np.stack(rows))
    return out.tx_scores, out.rx_scores


def evaluate_checkpoint(
    cfg: ExperimentConfig,
    ds: Dataset,
    params,
    indices,
    threads: int = 1,
):
    """Accuracy and rate table over the transmit power grid for test samples."""
    indices = list(indices)
    clean, attempts = _regenerate_clean_channels(cfg, ds, indices, threads)
    cb_tx, cb_rx = make_codebooks(ds.dims, ds.codebook_kind)
    if cfg.codebook_kind != DFT:
        raise NotImplementedError("fast rate evaluation requires DFT codebooks")
    f_all = cb_tx.beams.T
    w_all = cb_rx.beams.T
    g_stack = [w_all.conj().T @ h @ f_all for h in clean]
    labels_tx = [ds.samples[i].labels_tx for i in indices]
    labels_rx = [ds.samples[i].labels_rx for i in indices]
    y_tx, y_rx = training.make_label_vectors(
        labels_tx, labels_rx, ds.dims.n_codes_tx, ds.dims.n_codes_rx
    )
    rows = []
    for p_idx, p_t_dbm in enumerate(cfg.p_t_dbm_grid):
        if cfg.eval_noise_mode == "measurement":
            s_tx, s_rx = _eval_scores_measurement(
                cfg, ds, params, indices, clean, attempts, p_idx, p_t_dbm
            )
        else:
            x = _eval_inputs_channel(cfg, ds, indices, clean, attempts, p_idx, p_t_dbm)
            out, _ = network.forward_pass(params, x, training=False)
            s_tx, s_rx = out.tx_scores, out.rx_scores
        pred_tx = network.topk_indices(s_tx, cfg.n_rf_tx)
        pred_rx = network.topk_indices(s_rx, cfg.n_rf_rx)
        tx_acc = training.topk_set_accuracy(s_tx, y_tx, cfg.n_rf_tx)
        rx_acc = training.topk_set_accuracy(s_rx, y_rx, cfg.n_rf_rx)
        lb = effective_link_budget(cfg.link_budget(p_t_dbm), cfg.n_rf_tx, cfg.n_rf_rx)
        rate_pred = _subset_rates(g_stack, pred_tx, pred_rx, lb.snr, lb.n_streams)
        rate_orac = _subset_rates(g_stack, labels_tx, labels_rx, lb.snr, lb.n_streams)
        rows.append(
            {
                "p_t_dbm": p_t_dbm,
                "m_t": cfg.m_t,
                "m_r": cfg.m_r,
                "mean_rate_pred": float(rate_pred.mean()),
                "mean_rate_oracle": float(rate_orac.mean()),
                "ratio": float(rate_pred.mean() / rate_orac.mean()),
                "tx_acc": tx_acc,
                "rx_acc": rx_acc,
            }
        )
    return rows


_EVAL_COLUMNS = (
    "p_t_dbm", "m_t", "m_r", "mean_rate_pred", "mean_rate_oracle", "ratio", "tx_acc", "rx_acc"
)


def _rows_to_csv(rows, columns) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def cmd_eval(cfg: ExperimentConfig, dataset_path: Path, checkpoint_path: Path, out: Path, threads: int) -> None:
    ds = _load_dataset_checked(cfg, dataset_path)
    params = network.load_checkpoint(checkpoint_path)
    if params.dims != cfg.network_dims():
        raise CliDataError(
            f"checkpoint dims {params.dims} do not match config dims {cfg.network_dims()}"
        )
    _, test_idx = datapipe.split_indices(len(ds), cfg.train_fraction, cfg.seed)
    rows = evaluate_checkpoint(cfg, ds, params, test_idx, threads)
    _write(out / "eval.csv", _rows_to_csv(rows, _EVAL_COLUMNS))
    _write_config_echo(cfg, out)
    print(_pilot_summary(cfg))
    for row in rows:
        print(
            f"P_T {row['p_t_dbm']:5.1f} dBm: rate {row['mean_rate_pred']:.3f} / "
            f"{row['mean_rate_oracle']:.3f} (ratio {row['ratio']:.3f}), "
            f"acc tx {row['tx_acc']:.4f} rx {row['rx_acc']:.4f}"
        )


def project_constant_modulus(params):
    """Kernels projected entrywise to the phase-shifter-realizable set."""
    proj = params.copy()
    for name, n in (("enc_rx", params.dims.n_r), ("enc_tx", params.dims.n_t)):
        k = getattr(proj, name)
        mag = np.abs(k)
        safe = np.where(mag > 0, k / np.where(mag > 0, mag, 1.0), 1.0)
        setattr(proj, name, safe / np.sqrt(n))
    return proj


def beam_power_profile(cb, columns: np.ndarray) -> np.ndarray:
    """Power each codebook beam captures from a set of measurement columns."""
    return (np.abs(cb.beams.conj() @ columns.conj()) ** 2).sum(axis=1)


def cluster_aligned_beams(cfg: ExperimentConfig, cb, side: str) -> np.ndarray:
    """Mask of beams within half a beamwidth of any cluster center."""
    sines = beam_sines(cb)
    centers = [
        np.sin(np.deg2rad(c.aod_deg if side == "tx" else c.aoa_deg)) for c in cfg.clusters
    ]
    window = 1.0 / cb.n_antennas
    mask = np.zeros(cb.n_beams, dtype=bool)
    for c in centers:
        mask |= np.abs(sines - c) <= window
    return mask


def _concentration(profile: np.ndarray, mask: np.ndarray) -> float:
    share = profile[mask].sum() / profile.sum()
    return float(share / (mask.sum() / mask.size))


def _accuracy_on_stored(cfg, ds, params, indices):
    h = np.stack([ds.samples[i].H_noisy.reshape(-1, order="F") for i in indices])
    out, _ = network.forward_pass(params, h, training=False)
    labels_tx = [ds.samples[i].labels_tx for i in indices]
    labels_rx = [ds.samples[i].labels_rx for i in indices]
    y_tx, y_rx = training.make_label_vectors(
        labels_tx, labels_rx, ds.dims.n_codes_tx, ds.dims.n_codes_rx
    )
    return (
        training.topk_set_accuracy(out.tx_scores, y_tx, cfg.n_rf_tx),
        training.topk_set_accuracy(out.rx_scores, y_rx, cfg.n_rf_rx),
    )


def cmd_compare_sensing(
    cfg: ExperimentConfig, dataset_path: Path, checkpoint_path: Path, out: Path
) -> None:
    """Learned kernels vs the classical random constant-modulus baseline.

    The baseline gets its own selection head, retrained with the encoder
    frozen at random phases. The modulus-projected variant reuses the
    learned head without retraining, as a deployment lower bound.
    """
    ds = _load_dataset_checked(cfg, dataset_path)
    learned = network.load_checkpoint(checkpoint_path)
    train_idx, test_idx = datapipe.split_indices(len(ds), cfg.train_fraction, cfg.seed)
    ds_train, _ = datapipe.split(ds, cfg.train_fraction, cfg.seed)
    random_params, _ = _train_on(cfg, ds_train, train_encoder=False, seed=cfg.seed)
    projected = project_constant_modulus(learned)

    rows = []
    for variant, params in (
        ("learned", learned), ("random", random_params), ("projected", projected)
    ):
        tx_acc, rx_acc = _accuracy_on_stored(cfg, ds, params, test_idx)
        rows.append({"variant": variant, "tx_acc": tx_acc, "rx_acc": rx_acc})

    cb_tx, cb_rx = make_codebooks(ds.dims, ds.codebook_kind)
    mm_learned = network.export_measurement_matrices(learned)
    mm_random = network.export_measurement_matrices(random_params)
    profile_rows = []
    summary = {r["variant"]: {"tx_acc": r["tx_acc"], "rx_acc": r["rx_acc"]} for r in rows}
    for side, cb, col_l, col_r in (
        ("tx", cb_tx, mm_learned.P, mm_random.P),
        ("rx", cb_rx, mm_learned.Q, mm_random.Q),
    ):
        prof_l = beam_power_profile(cb, col_l)
        prof_r = beam_power_profile(cb, col_r)
        mask = cluster_aligned_beams(cfg, cb, side)
        sines = beam_sines(cb)
        for b in range(cb.n_beams):
            profile_rows.append(
                {
                    "side": side, "beam": b, "sin_azimuth": float(sines[b]),
                    "aligned": int(mask[b]),
                    "power_learned": float(prof_l[b]), "power_random": float(prof_r[b]),
                }
            )
        summary[f"{side}_concentration_learned"] = _concentration(prof_l, mask)
        summary[f"{side}_concentration_random"] = _concentration(prof_r, mask)
    _write(out / "compare_sensing.csv", _rows_to_csv(rows, ("variant", "tx_acc", "rx_acc")))
    _write(
        out / "beam_profile.csv",
        _rows_to_csv(
            profile_rows,
            ("side", "beam", "sin_azimuth", "aligned", "power_learned", "power_random"),
        ),
    )
    _write(out / "compare_summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _write_config_echo(cfg, out)
    for r in rows:
        print(f"{r['variant']:>9}: tx_acc {r['tx_acc']:.4f} rx_acc {r['rx_acc']:.4f}")
    print(
        "concentration tx learned/random: "
        f"{summary['tx_concentration_learned']:.2f} / {summary['tx_concentration_random']:.2f}"
    )


def cmd_oracle_bench(cfg: ExperimentConfig, out: Path) -> None:
    env = cfg.environment()
    dims = cfg.dataset_dims()
    cb_tx, cb_rx = make_codebooks(dims, cfg.codebook_kind)
    lb = cfg.label_link_budget()
    rows = []
    for i in range(cfg.bench_channels):
        for attempt in range(datapipe.MAX_RESAMPLE_ATTEMPTS):
            _, h, _ = channel_realization(env, dims, cfg.seed, i, attempt)
            try:
                ex = exhaustive_rf_search(h, cb_tx, cb_rx, cfg.n_rf_tx, cfg.n_rf_rx, lb)
                gr = greedy_label_search(h, cb_tx, cb_rx, cfg.n_rf_tx, cfg.n_rf_rx, lb)
            except DegenerateChannelError:
                continue
            rows.append(
                {
                    "channel": i,
                    "rate_greedy": gr.rate,
                    "rate_exhaustive": ex.rate,
                    "ratio": gr.rate / ex.rate,
                    "match": int(
                        gr.tx_indices == ex.tx_indices and gr.rx_indices == ex.rx_indices
                    ),
                }
            )
            break
    mean_ratio = float(np.mean([r["ratio"] for r in rows]))
    match_rate = float(np.mean([r["match"] for r in rows]))
    _write(
        out / "oracle_bench.csv",
        _rows_to_csv(rows, ("channel", "rate_greedy", "rate_exhaustive", "ratio", "match")),
    )
    summary = {"mean_ratio": mean_ratio, "match_rate": match_rate, "channels": len(rows)}
    _write(out / "oracle_bench.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _write_config_echo(cfg, out)
    print(f"greedy/exhaustive mean rate ratio {mean_ratio:.4f}, exact match {match_rate:.3f}")


def cmd_selftest(out: Path) -> bool:
    from .selftest import run_selftest

    results = run_selftest()
    _write(out / "selftest.json", json.dumps(results, indent=2, sort_keys=True) + "\n")
    ok = all(v == "pass" for v in results.values())
    for name, verdict in sorted(results.items()):
        print(f"{'PASS' if verdict == 'pass' else 'FAIL'} {name}" + (
            "" if verdict == "pass" else f": {verdict}"
        ))
    return ok


_ERROR_CATEGORIES = (
    (ConfigError, "config"),
    (DatasetFormatError, "io"),
    (CheckpointError, "io"),
    (CliDataError, "io"),
    (FileNotFoundError, "io"),
    (TrainingDivergedError, "training"),
    (SearchSpaceError, "domain"),
    (DegenerateChannelError, "domain"),
    (LinAlgDomainError, "domain"),
    (NotImplementedError, "domain"),
    (ValueError, "domain"),
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beamsense", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, dataset=False, checkpoint=False):
        p.add_argument("--config", type=Path, default=None, help="key=value config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", type=Path, default=Path("beamsense_out"))
        p.add_argument("--threads", type=int, default=1)
        if dataset:
            p.add_argument("--dataset", type=Path, required=True)
        if checkpoint:
            p.add_argument("--checkpoint", type=Path, required=True)

    common(sub.add_parser("generate", help="generate a labeled channel dataset"))
    common(sub.add_parser("train", help="train the network"), dataset=True)
    common(sub.add_parser("eval", help="rate/accuracy vs transmit power"), dataset=True, checkpoint=True)
    common(
        sub.add_parser("compare-sensing", help="learned vs random measurements"),
        dataset=True, checkpoint=True,
    )
    common(sub.add_parser("oracle-bench", help="greedy vs exhaustive label oracle"))
    common(sub.add_parser("selftest", help="run the invariant suite"))
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.config is None:
            cfg.validate()
        if args.seed is not None:
            cfg.seed = args.seed
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "generate":
            cmd_generate(cfg, out)
        elif args.command == "train":
            cmd_train(cfg, args.dataset, out)
        elif args.command == "eval":
            cmd_eval(cfg, args.dataset, args.checkpoint, out, args.threads)
        elif args.command == "compare-sensing":
            cmd_compare_sensing(cfg, args.dataset, args.checkpoint, out)
        elif args.command == "oracle-bench":
            cmd_oracle_bench(cfg, out)
        elif args.command == "selftest":
            if not cmd_selftest(out):
                print(json.dumps({"error": "selftest", "message": "invariant failures"}),
                      file=sys.stderr)
                return 3
    except tuple(e for e, _ in _ERROR_CATEGORIES) as exc:
        category = next(cat for etype, cat in _ERROR_CATEGORIES if isinstance(exc, etype))
        print(json.dumps({"error": category, "message": str(exc)}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
