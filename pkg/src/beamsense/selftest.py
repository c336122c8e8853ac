"""Fast invariant suite runnable from the CLI (`beamsense selftest`).

Each check is a seeded, self-contained verification of a library
invariant. These mirror the pytest property tests at reduced sizes so a
deployment can sanity-check an installation in seconds.
"""

from __future__ import annotations

import numpy as np

from . import cxlinalg as cx
from .channel import ClusterSpec, EnvironmentModel, array_response_ula, build_channel, sample_environment
from .codebook import build_dft_codebook
from .network import NetworkDims, encoder_forward, export_measurement_matrices, init_params
from .oracle import LinkBudget, exhaustive_rf_search, greedy_label_search
from .sensing import measure_matrix_form, measure_vector_form, random_measurements
from .training import sample_accuracy


def _check_kron_vec_identity(rng):
    for _ in range(50):
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        x = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
        lhs = cx.vec(b @ x @ a.T)
        rhs = cx.kronecker(a, b) @ cx.vec(x)
        assert np.abs(lhs - rhs).max() < 1e-12


def _check_svd_properties(rng):
    for _ in range(200):
        rows, cols = rng.integers(1, 9, size=2)
        a = rng.normal(size=(rows, cols)) + 1j * rng.normal(size=(rows, cols))
        u, s, v = cx.svd_small(a)
        recon = u @ np.diag(s) @ v.conj().T
        assert np.abs(recon - a).max() < cx.ORTHO_TOL
        k = min(rows, cols)
        assert np.abs(u.conj().T @ u - np.eye(k)).max() < cx.ORTHO_TOL
        assert np.abs(v.conj().T @ v - np.eye(k)).max() < cx.ORTHO_TOL
        assert np.all(np.diff(s) <= 1e-12)


def _check_det_psd(rng):
    for _ in range(50):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        assert cx.det_hermitian_plus_identity(a @ a.conj().T) >= 1.0


def _check_codebook_gram(rng):
    cb = build_dft_codebook(8, 8)
    gram = cb.beams.conj() @ cb.beams.T
    assert np.abs(gram - np.eye(8)).max() < 1e-10
    assert np.allclose(np.abs(cb.beams), 1 / np.sqrt(8))


def _check_array_response(rng):
    for _ in range(20):
        n = int(rng.integers(1, 32))
        az = rng.uniform(-np.pi / 2, np.pi / 2)
        a = array_response_ula(n, az)
        assert abs(np.linalg.norm(a) - 1.0) < 1e-12
        assert np.abs(array_response_ula(n, -az) - np.conj(a)).max() < 1e-12


def _check_encoder_operator(rng):
    dims = NetworkDims(n_t=6, n_r=5, m_t=3, m_r=2, n_codes_tx=6, n_codes_rx=5,
                       hidden1=8, hidden2=8)
    for _ in range(50):
        params = init_params(dims, rng)
        params.enc_rx = rng.normal(size=(2, 5)) + 1j * rng.normal(size=(2, 5))
        params.enc_tx = rng.normal(size=(3, 6)) + 1j * rng.normal(size=(3, 6))
        h = rng.normal(size=(30,)) + 1j * rng.normal(size=(30,))
        mm = export_measurement_matrices(params)
        ref = measure_vector_form(h, mm, p_t=1.0)
        assert np.abs(encoder_forward(params, h) - ref).max() < 1e-10


def _check_sensing_forms(rng):
    mm = random_measurements(6, 5, 3, 2, rng)
    for _ in range(20):
        h = rng.normal(size=(5, 6)) + 1j * rng.normal(size=(5, 6))
        r1 = np.random.default_rng(11)
        r2 = np.random.default_rng(11)
        y_mat = measure_matrix_form(h, mm, 2.0, r1, 0.1)
        y_vec = measure_vector_form(h.reshape(-1, order="F"), mm, 2.0, r2, 0.1)
        assert np.abs(y_mat.reshape(-1, order="F") - y_vec).max() < 1e-10


def _check_metric_identities(rng):
    for _ in range(500):
        n = int(rng.integers(2, 12))
        k = int(rng.integers(1, n + 1))
        true = set(rng.choice(n, size=k, replace=False).tolist())
        pred = set(rng.choice(n, size=k, replace=False).tolist())
        acc = sample_accuracy(pred, true)
        precision = len(true & pred) / len(pred)
        recall = len(true & pred) / len(true)
        assert acc == precision == recall


def _check_channel_rank(rng):
    env = EnvironmentModel(
        clusters=(ClusterSpec(0.2, -0.3, 0.05, 1.0), ClusterSpec(-0.6, 0.5, 0.05, 0.5)),
        num_paths=3,
    )
    for i in range(20):
        paths = sample_environment(env, np.random.default_rng([3, i]))
        h = build_channel(paths, 8, 8)
        s = np.linalg.svd(h, compute_uv=False)
        assert np.all(s[3:] < 1e-10)


def _check_greedy_vs_exhaustive(rng):
    env = EnvironmentModel(
        clusters=(
            ClusterSpec(-0.86, 0.57, 0.052, 1.0),
            ClusterSpec(-0.25, -0.80, 0.052, 0.7),
            ClusterSpec(0.20, -0.14, 0.052, 0.5),
            ClusterSpec(0.70, 0.96, 0.052, 0.3),
        ),
        num_paths=3,
    )
    cb = build_dft_codebook(8, 8)
    lb = LinkBudget(p_t=0.1, noise_power=1e-3, n_streams=2)
    ratios = []
    for i in range(25):
        paths = sample_environment(env, np.random.default_rng([5, i]))
        h = build_channel(paths, 8, 8)
        ex = exhaustive_rf_search(h, cb, cb, 2, 2, lb)
        gr = greedy_label_search(h, cb, cb, 2, 2, lb)
        assert ex.rate >= gr.rate - 1e-9
        ratios.append(gr.rate / ex.rate)
    assert np.mean(ratios) >= 0.95


_CHECKS = (
    ("kron_vec_identity", _check_kron_vec_identity),
    ("svd_reconstruction_orthonormality", _check_svd_properties),
    ("det_hermitian_psd_floor", _check_det_psd),
    ("dft_codebook_gram", _check_codebook_gram),
    ("array_response_norm_conjugate", _check_array_response),
    ("encoder_matches_measurement_operator", _check_encoder_operator),
    ("sensing_matrix_vector_equivalence", _check_sensing_forms),
    ("metric_precision_recall_identity", _check_metric_identities),
    ("channel_rank_bound", _check_channel_rank),
    ("greedy_near_exhaustive", _check_greedy_vs_exhaustive),
)


def run_selftest() -> dict[str, str]:
    results = {}
    for name, fn in _CHECKS:
        rng = np.random.default_rng(12345)
        try:
            fn(rng)
            results[name] = "pass"
        except AssertionError as exc:
            results[name] = f"fail: {exc}"
        except Exception as exc:  # pragma: no cover - defensive
            results[name] = f"fail: {type(exc).__name__}: {exc}"
    return results
