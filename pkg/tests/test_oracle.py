import numpy as np
import pytest

from beamsense import oracle
from beamsense.channel import ClusterSpec, EnvironmentModel, build_channel, sample_environment
from beamsense.codebook import assemble_rf_matrix, build_dft_codebook
from beamsense.cxlinalg import LinAlgDomainError

from test_cxlinalg import cofactor_det, crandn


def env8():
    return EnvironmentModel(
        clusters=(
            ClusterSpec(-0.86, 0.57, 0.052, 1.0),
            ClusterSpec(-0.25, -0.80, 0.052, 0.7),
            ClusterSpec(0.20, -0.14, 0.052, 0.5),
            ClusterSpec(0.70, 0.96, 0.052, 0.3),
        ),
        num_paths=3,
    )


def env_channel(i, n=8):
    paths = sample_environment(env8(), np.random.default_rng([99, i]))
    return build_channel(paths, n, n)


LB = oracle.LinkBudget(p_t=0.1, noise_power=1e-3, n_streams=2)


class TestAchievableRate:
    def test_scalar_closed_form(self):
        lb = oracle.LinkBudget(p_t=10.0, noise_power=1.0, n_streams=1)
        one = np.array([[1.0 + 0j]])
        assert oracle.achievable_rate(one, one, one, lb) == pytest.approx(np.log2(11.0))

    def test_null_space_precoder(self):
        h = np.array([[1.0, 0.0]], dtype=complex)
        f = np.array([[0.0], [1.0]], dtype=complex)  # H @ f = 0
        w = np.array([[1.0 + 0j]])
        lb = oracle.LinkBudget(p_t=1.0, noise_power=1e-2, n_streams=1)
        assert oracle.achievable_rate(h, f, w, lb) == pytest.approx(0.0, abs=1e-12)

    def test_against_cofactor_determinant_oracle(self):
        rng = np.random.default_rng(0)
        lb = oracle.LinkBudget(p_t=0.5, noise_power=0.05, n_streams=2)
        for _ in range(10):
            h = crandn(rng, 4, 4)
            f = crandn(rng, 4, 2)
            w = crandn(rng, 4, 2)
            got = oracle.achievable_rate(h, f, w, lb)
            m = w.conj().T @ h @ f
            rn = (w.conj().T @ w) / lb.snr
            inner = np.linalg.inv(rn) @ m @ m.conj().T
            det = cofactor_det(np.eye(2) + inner)
            assert got == pytest.approx(np.log2(det.real), rel=1e-9)

    def test_rank_deficient_combiner_rejected(self):
        h = np.eye(2, dtype=complex)
        w = np.array([[1.0, 1.0], [1.0, 1.0]], dtype=complex)
        with pytest.raises(LinAlgDomainError):
            oracle.achievable_rate(h, np.eye(2, dtype=complex), w, LB)

    def test_monotone_in_power(self):
        rng = np.random.default_rng(1)
        h = crandn(rng, 4, 4)
        f = crandn(rng, 4, 2)
        w = crandn(rng, 4, 2)
        rates = [
            oracle.achievable_rate(
                h, f, w, oracle.LinkBudget(p_t=p, noise_power=1e-2, n_streams=2)
            )
            for p in (0.01, 0.1, 1.0, 10.0)
        ]
        assert np.all(np.diff(rates) > 0)


class TestOptimalBaseband:
    def test_orthonormal_rf_gram_is_identity(self):
        cb = build_dft_codebook(8, 8)
        f_rf = assemble_rf_matrix(cb, [1, 5])
        w_rf = assemble_rf_matrix(cb, [2, 6])
        h = env_channel(0)
        f_bb, w_bb = oracle.optimal_baseband(h, f_rf, w_rf, 2)
        h_eff = w_rf.conj().T @ h @ f_rf
        _, _, vh = np.linalg.svd(h_eff)
        # F_BB columns are the top right singular vectors up to phase
        assert np.linalg.norm(f_rf @ f_bb) ** 2 == pytest.approx(2.0, abs=1e-8)
        overlap = np.abs(vh @ f_bb)
        assert np.allclose(overlap, np.eye(2), atol=1e-8)

    def test_rank_one_single_stream_rate_identity(self):
        h = env_channel(1)
        cb = build_dft_codebook(8, 8)
        f_rf = assemble_rf_matrix(cb, [3])
        w_rf = assemble_rf_matrix(cb, [4])
        lb = oracle.LinkBudget(p_t=0.1, noise_power=1e-3, n_streams=1)
        f_bb, w_bb = oracle.optimal_baseband(h, f_rf, w_rf, 1)
        rate = oracle.achievable_rate(h, f_rf @ f_bb, w_rf @ w_bb, lb)
        sigma1 = np.linalg.svd(w_rf.conj().T @ h @ f_rf, compute_uv=False)[0]
        assert rate == pytest.approx(np.log2(1 + lb.snr * sigma1**2), rel=1e-9)

    def test_power_constraint_random_instances(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            h = crandn(rng, 6, 6)
            f_rf = crandn(rng, 6, 3)
            w_rf = crandn(rng, 6, 3)
            f_bb, w_bb = oracle.optimal_baseband(h, f_rf, w_rf, 2)
            assert np.linalg.norm(f_rf @ f_bb) ** 2 == pytest.approx(2.0, abs=1e-8)
            assert np.abs(w_bb.conj().T @ w_bb - np.eye(2)).max() < 1e-8

    def test_degenerate_channel_rejected(self):
        h = np.zeros((4, 4), dtype=complex)
        h[0, 0] = 1.0
        cb = build_dft_codebook(4, 4)
        f_rf = assemble_rf_matrix(cb, [0, 1])
        w_rf = assemble_rf_matrix(cb, [0, 1])
        with pytest.raises(oracle.DegenerateChannelError):
            oracle.optimal_baseband(h, f_rf, w_rf, 2)

    def test_beats_random_baseband(self):
        # Eq-derived baseband should dominate random power-normalized ones
        rng = np.random.default_rng(3)
        cb = build_dft_codebook(8, 8)
        for trial in range(10):
            h = crandn(rng, 8, 8)
            tx = sorted(rng.choice(8, 2, replace=False).tolist())
            rx = sorted(rng.choice(8, 2, replace=False).tolist())
            f_rf = assemble_rf_matrix(cb, tx)
            w_rf = assemble_rf_matrix(cb, rx)
            f_bb, w_bb = oracle.optimal_baseband(h, f_rf, w_rf, 2)
            best = oracle.achievable_rate(h, f_rf @ f_bb, w_rf @ w_bb, LB)
            for _ in range(50):
                fb = crandn(rng, 2, 2)
                fb *= np.sqrt(2.0) / np.linalg.norm(f_rf @ fb)
                wb = crandn(rng, 2, 2)
                rate = oracle.achievable_rate(h, f_rf @ fb, w_rf @ wb, LB)
                assert rate <= best + 1e-9


class TestExhaustiveSearch:
    def test_full_codebook_selection_is_trivial(self):
        h = env_channel(2, n=4)
        cb = build_dft_codebook(4, 4)
        lb = oracle.LinkBudget(p_t=0.1, noise_power=1e-3, n_streams=2)
        sol = oracle.exhaustive_rf_search(h, cb, cb, 4, 4, lb)
        assert sol.tx_indices == (0, 1, 2, 3)
        assert sol.rx_indices == (0, 1, 2, 3)

    def test_rank_one_matched_filter(self):
        from beamsense.channel import PathParams
        paths = [PathParams(gain=1.5 + 0.5j, aod_az=0.31, aoa_az=-0.42)]
        h = build_channel(paths, 8, 8)
        cb = build_dft_codebook(8, 8)
        lb = oracle.LinkBudget(p_t=0.1, noise_power=1e-3, n_streams=1)
        sol = oracle.exhaustive_rf_search(h, cb, cb, 1, 1, lb)
        from beamsense.channel import array_response_ula
        a_t = array_response_ula(8, 0.31)
        a_r = array_response_ula(8, -0.42)
        best_tx = int(np.argmax(np.abs(cb.beams.conj() @ a_t)))
        best_rx = int(np.argmax(np.abs(cb.beams.conj() @ a_r)))
        assert sol.tx_indices == (best_tx,)
        assert sol.rx_indices == (best_rx,)

    def test_dominates_greedy(self):
        for i in range(10):
            h = env_channel(10 + i)
            cb = build_dft_codebook(8, 8)
            ex = oracle.exhaustive_rf_search(h, cb, cb, 2, 2, LB)
            gr = oracle.greedy_label_search(h, cb, cb, 2, 2, LB)
            assert ex.rate >= gr.rate - 1e-9

    def test_combination_cap(self):
        h = env_channel(3, n=8)
        cb = build_dft_codebook(8, 8)
        with pytest.raises(oracle.SearchSpaceError):
            oracle.exhaustive_rf_search(h, cb, cb, 2, 2, LB, combo_cap=10)

    def test_codebook_permutation_consistency(self):
        from beamsense.codebook import Codebook
        h = env_channel(4)
        cb = build_dft_codebook(8, 8)
        perm = np.array([3, 1, 7, 0, 5, 2, 6, 4])
        cb_p = Codebook(n_antennas=8, beams=cb.beams[perm], kind=cb.kind)
        a = oracle.exhaustive_rf_search(h, cb, cb, 2, 2, LB)
        b = oracle.exhaustive_rf_search(h, cb_p, cb_p, 2, 2, LB)
        assert b.rate == pytest.approx(a.rate, rel=1e-9)
        inv = np.argsort(perm)
        assert tuple(sorted(inv[list(a.tx_indices)])) == b.tx_indices
        assert tuple(sorted(inv[list(a.rx_indices)])) == b.rx_indices


class TestGreedySearch:
    def test_single_rf_matches_exhaustive(self):
        matches = 0
        for i in range(100):
            h = env_channel(200 + i)
            cb = build_dft_codebook(8, 8)
            lb = oracle.LinkBudget(p_t=0.1, noise_power=1e-3, n_streams=1)
            ex = oracle.exhaustive_rf_search(h, cb, cb, 1, 1, lb)
            gr = oracle.greedy_label_search(h, cb, cb, 1, 1, lb)
            matches += gr.tx_indices == ex.tx_indices and gr.rx_indices == ex.rx_indices
        # a single greedy round scans all beam pairs, same as exhaustive
        assert matches == 100

    def test_rank_one_first_tx_pick_is_matched_filter(self):
        from beamsense.channel import PathParams, array_response_ula
        paths = [PathParams(gain=2.0 - 1j, aod_az=-0.22, aoa_az=0.15)]
        h = build_channel(paths, 8, 8)
        cb = build_dft_codebook(8, 8)
        sol = oracle.greedy_label_search(h, cb, cb, 1, 1, LB)
        a_t = array_response_ula(8, -0.22)
        assert sol.tx_indices == (int(np.argmax(np.abs(cb.beams.conj() @ a_t))),)

    def test_near_optimal_on_batch(self):
        cb = build_dft_codebook(8, 8)
        ratios = []
        for i in range(50):
            h = env_channel(300 + i)
            ex = oracle.exhaustive_rf_search(h, cb, cb, 2, 2, LB)
            gr = oracle.greedy_label_search(h, cb, cb, 2, 2, LB)
            ratios.append(gr.rate / ex.rate)
        assert np.mean(ratios) >= 0.95

    def test_deterministic(self):
        h = env_channel(5)
        cb = build_dft_codebook(8, 8)
        a = oracle.greedy_label_search(h, cb, cb, 2, 2, LB)
        b = oracle.greedy_label_search(h, cb, cb, 2, 2, LB)
        assert a.tx_indices == b.tx_indices and a.rx_indices == b.rx_indices
        assert a.rate == b.rate

    def test_asymmetric_rf_counts(self):
        h = env_channel(6)
        cb = build_dft_codebook(8, 8)
        lb = oracle.LinkBudget(p_t=0.1, noise_power=1e-3, n_streams=1)
        sol = oracle.greedy_label_search(h, cb, cb, 3, 1, lb)
        assert len(sol.tx_indices) == 3
        assert len(sol.rx_indices) == 1
        assert sol.F_RF.shape == (8, 3)

    def test_beats_random_selection(self):
        rng = np.random.default_rng(7)
        cb = build_dft_codebook(8, 8)
        for i in range(10):
            h = env_channel(400 + i)
            gr = oracle.greedy_label_search(h, cb, cb, 2, 2, LB)
            tx = sorted(rng.choice(8, 2, replace=False).tolist())
            rx = sorted(rng.choice(8, 2, replace=False).tolist())
            rnd = oracle.selection_objective(h, cb, cb, tx, rx, LB.snr)
            assert gr.rate >= rnd - 1e-9


def test_selection_objective_equals_rate_for_dft():
    # with orthonormal codebooks the Eq-10 style objective is the rate the
    # optimal baseband achieves at the clamped stream count
    cb = build_dft_codebook(8, 8)
    h = env_channel(7)
    lb = oracle.effective_link_budget(LB, 2, 2)
    obj = oracle.selection_objective(h, cb, cb, [1, 3], [0, 5], lb.snr)
    f_rf = assemble_rf_matrix(cb, [1, 3])
    w_rf = assemble_rf_matrix(cb, [0, 5])
    f_bb, w_bb = oracle.optimal_baseband(h, f_rf, w_rf, 2)
    rate = oracle.achievable_rate(h, f_rf @ f_bb, w_rf @ w_bb, lb)
    assert obj == pytest.approx(rate, rel=1e-9)


def test_scaling_invariance_at_compensated_snr():
    cb = build_dft_codebook(8, 8)
    h = env_channel(8)
    scale = 7.3
    lb1 = oracle.LinkBudget(p_t=0.1, noise_power=1e-3, n_streams=2)
    lb2 = oracle.LinkBudget(p_t=0.1 / scale**2, noise_power=1e-3, n_streams=2)
    a = oracle.greedy_label_search(h, cb, cb, 2, 2, lb1)
    b = oracle.greedy_label_search(scale * h, cb, cb, 2, 2, lb2)
    assert a.tx_indices == b.tx_indices and a.rx_indices == b.rx_indices
