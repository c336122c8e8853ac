import numpy as np
import pytest

from beamsense import codebook


class TestDftCodebook:
    def test_two_point(self):
        cb = codebook.build_dft_codebook(2, 2)
        root = 1 / np.sqrt(2)
        assert np.allclose(cb.beam(0), [root, root])
        assert np.allclose(cb.beam(1), [root, -root])

    def test_gram_identity(self):
        cb = codebook.build_dft_codebook(8, 8)
        gram = cb.beams.conj() @ cb.beams.T
        assert np.abs(gram - np.eye(8)).max() < 1e-10

    def test_constant_modulus(self):
        cb = codebook.build_dft_codebook(16, 16)
        assert np.allclose(np.abs(cb.beams), 1 / np.sqrt(16))

    def test_rectangular_rejected(self):
        with pytest.raises(ValueError):
            codebook.build_dft_codebook(8, 16)


class TestSteeringCodebook:
    def test_same_span_as_dft(self):
        steer = codebook.build_steering_codebook(8, 8, 0.5)
        dft = codebook.build_dft_codebook(8, 8)
        # orthonormal bases of the same subspace: projector distance ~ 0
        p1 = steer.beams.T @ np.linalg.pinv(steer.beams.T)
        p2 = dft.beams.T @ np.linalg.pinv(dft.beams.T)
        assert np.abs(p1 - p2).max() < 1e-8

    def test_broadside_beam_is_uniform(self):
        cb = codebook.build_steering_codebook(8, 16, 0.5)
        sines = codebook.beam_sines(cb)
        idx = int(np.argmin(np.abs(sines)))
        assert np.allclose(cb.beam(idx), np.ones(8) / np.sqrt(8))

    def test_constant_modulus(self):
        cb = codebook.build_steering_codebook(8, 16, 0.5)
        assert np.allclose(np.abs(cb.beams), 1 / np.sqrt(8))

    def test_undersampled_rejected(self):
        with pytest.raises(ValueError):
            codebook.build_steering_codebook(8, 4)


class TestAssembleRfMatrix:
    def test_single_column(self):
        cb = codebook.build_dft_codebook(4, 4)
        f = codebook.assemble_rf_matrix(cb, [0])
        assert f.shape == (4, 1)
        assert np.allclose(f[:, 0], cb.beam(0))

    def test_orthonormal_selection(self):
        cb = codebook.build_dft_codebook(8, 8)
        f = codebook.assemble_rf_matrix(cb, [1, 4, 6])
        assert np.abs(f.conj().T @ f - np.eye(3)).max() < 1e-10

    def test_column_order_matches_indices(self):
        cb = codebook.build_dft_codebook(8, 8)
        f = codebook.assemble_rf_matrix(cb, [5, 2])
        assert np.allclose(f[:, 0], cb.beam(5))
        assert np.allclose(f[:, 1], cb.beam(2))

    def test_out_of_range_rejected(self):
        cb = codebook.build_dft_codebook(4, 4)
        with pytest.raises(ValueError):
            codebook.assemble_rf_matrix(cb, [0, 4])

    def test_duplicates_rejected(self):
        cb = codebook.build_dft_codebook(4, 4)
        with pytest.raises(ValueError):
            codebook.assemble_rf_matrix(cb, [1, 1])


def test_beam_sines_match_peak_response():
    from beamsense.channel import array_response_ula
    cb = codebook.build_dft_codebook(16, 16)
    sines = codebook.beam_sines(cb)
    for m in (0, 3, 9, 15):
        a = array_response_ula(16, float(np.arcsin(sines[m])), 0.5)
        gains = np.abs(cb.beams.conj() @ a)
        assert int(np.argmax(gains)) == m
