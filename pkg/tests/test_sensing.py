import numpy as np
import pytest

from beamsense import sensing

from test_cxlinalg import crandn


def make_mm(rng, n_t=6, n_r=5, m_t=3, m_r=2):
    return sensing.MeasurementMatrices(P=crandn(rng, n_t, m_t), Q=crandn(rng, n_r, m_r))


class TestMatrixForm:
    def test_identity_probing_no_noise(self):
        rng = np.random.default_rng(0)
        h = crandn(rng, 4, 4)
        mm = sensing.MeasurementMatrices(P=np.eye(4, dtype=complex), Q=np.eye(4, dtype=complex))
        y = sensing.measure_matrix_form(h, mm, p_t=4.0)
        assert np.abs(y - 2.0 * h).max() < 1e-12

    def test_single_entry_probe(self):
        rng = np.random.default_rng(1)
        h = crandn(rng, 4, 5)
        e_rx = np.zeros((4, 1), dtype=complex)
        e_rx[0] = 1.0
        e_tx = np.zeros((5, 1), dtype=complex)
        e_tx[0] = 1.0
        mm = sensing.MeasurementMatrices(P=e_tx, Q=e_rx)
        y = sensing.measure_matrix_form(h, mm, p_t=9.0)
        assert y.shape == (1, 1)
        assert y[0, 0] == pytest.approx(3.0 * h[0, 0])

    def test_combined_noise_covariance(self):
        rng = np.random.default_rng(2)
        mm = make_mm(rng)
        h = np.zeros((5, 6), dtype=complex)
        noise_power = 0.25
        acc = np.zeros((2, 2), dtype=complex)
        n_draws = 10000
        for _ in range(n_draws):
            y = sensing.measure_matrix_form(h, mm, 1.0, rng, noise_power)
            acc += y @ y.conj().T
        got = acc / (n_draws * mm.m_t)
        want = noise_power * mm.Q.conj().T @ mm.Q
        assert np.abs(got - want).max() / np.abs(want).max() < 0.05


class TestVectorForm:
    def test_matches_matrix_form_with_shared_noise(self):
        rng = np.random.default_rng(3)
        mm = make_mm(rng)
        for trial in range(20):
            h = crandn(np.random.default_rng(trial), 5, 6)
            y_mat = sensing.measure_matrix_form(
                h, mm, 2.0, np.random.default_rng(trial + 500), 0.3
            )
            y_vec = sensing.measure_vector_form(
                h.reshape(-1, order="F"), mm, 2.0, np.random.default_rng(trial + 500), 0.3
            )
            assert np.abs(y_mat.reshape(-1, order="F") - y_vec).max() < 1e-10

    def test_zero_channel_pure_noise(self):
        rng = np.random.default_rng(4)
        mm = make_mm(rng)
        h = np.zeros(30, dtype=complex)
        y1 = sensing.measure_vector_form(h, mm, 1.0, np.random.default_rng(9), 0.5)
        v = sensing._draw_noise((5, 3), 0.5, np.random.default_rng(9))
        want = (mm.Q.conj().T @ v).reshape(-1, order="F")
        assert np.abs(y1 - want).max() < 1e-12

    def test_power_scaling_linearity(self):
        rng = np.random.default_rng(5)
        mm = make_mm(rng)
        h = crandn(rng, 30)
        y1 = sensing.measure_vector_form(h, mm, 1.0)
        y4 = sensing.measure_vector_form(h, mm, 4.0)
        assert np.abs(y4 - 2.0 * y1).max() < 1e-12

    def test_length_validation(self):
        rng = np.random.default_rng(6)
        mm = make_mm(rng)
        with pytest.raises(ValueError):
            sensing.measure_vector_form(np.zeros(7, dtype=complex), mm, 1.0)


class TestRandomMeasurements:
    def test_constant_modulus(self):
        rng = np.random.default_rng(7)
        mm = sensing.random_measurements(64, 32, 8, 4, rng)
        assert np.allclose(np.abs(mm.P), 1 / np.sqrt(64))
        assert np.allclose(np.abs(mm.Q), 1 / np.sqrt(32))

    def test_seed_determinism(self):
        a = sensing.random_measurements(8, 8, 4, 4, np.random.default_rng(1))
        b = sensing.random_measurements(8, 8, 4, 4, np.random.default_rng(1))
        c = sensing.random_measurements(8, 8, 4, 4, np.random.default_rng(2))
        assert np.array_equal(a.P, b.P) and np.array_equal(a.Q, b.Q)
        assert not np.array_equal(a.P, c.P)

    def test_coherence_sane(self):
        mm = sensing.random_measurements(64, 64, 8, 8, np.random.default_rng(8))
        p = mm.P
        gram = np.abs(p.conj().T @ p)
        norms = np.sqrt(np.diag(gram))
        coh = (gram / np.outer(norms, norms))[~np.eye(8, dtype=bool)].max()
        assert 0.0 < coh < 1.0

    def test_pilot_accounting(self):
        mm = sensing.random_measurements(16, 16, 4, 2, np.random.default_rng(9))
        assert mm.total_pilots() == 8
