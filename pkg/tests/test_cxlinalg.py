import numpy as np
import pytest

from beamsense import cxlinalg as cx


def crandn(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def cofactor_det(a: np.ndarray) -> complex:
    """Independent determinant oracle: recursive cofactor expansion."""
    n = a.shape[0]
    if n == 1:
        return complex(a[0, 0])
    total = 0.0 + 0.0j
    for j in range(n):
        minor = np.delete(np.delete(a, 0, axis=0), j, axis=1)
        total += (-1) ** j * a[0, j] * cofactor_det(minor)
    return total


class TestMatmul:
    def test_identity(self):
        rng = np.random.default_rng(0)
        m = crandn(rng, 2, 2)
        assert np.allclose(cx.matmul(np.eye(2), m), m)

    def test_imaginary_square(self):
        j = np.array([[1j, 0], [0, 1j]])
        assert np.allclose(cx.matmul(j, j), -np.eye(2))

    def test_entry_against_dot_product_oracle(self):
        rng = np.random.default_rng(1)
        a = crandn(rng, 3, 4)
        b = crandn(rng, 4, 2)
        c = cx.matmul(a, b)
        expected = sum(a[0, k] * b[k, 0] for k in range(4))
        assert abs(c[0, 0] - expected) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(cx.LinAlgDomainError):
            cx.matmul(np.eye(2), np.eye(3))

    def test_associativity(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a, b, c = crandn(rng, 3, 4), crandn(rng, 4, 5), crandn(rng, 5, 2)
            lhs = cx.matmul(cx.matmul(a, b), c)
            rhs = cx.matmul(a, cx.matmul(b, c))
            denom = np.linalg.norm(lhs)
            assert np.linalg.norm(lhs - rhs) / denom < 1e-10


class TestHermitian:
    def test_real_symmetric_fixed_point(self):
        m = np.array([[1.0, 2.0], [2.0, 5.0]], dtype=complex)
        assert np.allclose(cx.hermitian(m), m)

    def test_scalar_conjugate(self):
        assert cx.hermitian(np.array([[1j]]))[0, 0] == -1j

    def test_involution(self):
        rng = np.random.default_rng(3)
        a = crandn(rng, 4, 3)
        assert np.array_equal(cx.hermitian(cx.hermitian(a)), a)

    def test_product_rule(self):
        rng = np.random.default_rng(4)
        a, b = crandn(rng, 3, 4), crandn(rng, 4, 2)
        lhs = cx.hermitian(cx.matmul(a, b))
        rhs = cx.matmul(cx.hermitian(b), cx.hermitian(a))
        assert np.allclose(lhs, rhs)


class TestKroneckerVec:
    def test_identity_block_diag(self):
        rng = np.random.default_rng(5)
        b = crandn(rng, 2, 2)
        k = cx.kronecker(np.eye(2), b)
        assert np.allclose(k[:2, :2], b)
        assert np.allclose(k[2:, 2:], b)
        assert np.allclose(k[:2, 2:], 0)

    def test_scalar_case(self):
        k = cx.kronecker(np.array([[2.0]]), np.array([[1.0, 1.0]]))
        assert np.allclose(k, [[2.0, 2.0]])

    def test_vec_column_stacking(self):
        m = np.array([[1.0, 3.0], [2.0, 4.0]])
        assert np.allclose(cx.vec(m), [1, 2, 3, 4])

    def test_vec_row_matrix(self):
        m = np.array([[1.0, 2.0, 3.0]])
        assert np.allclose(cx.vec(m), [1, 2, 3])

    def test_unvec_round_trip(self):
        rng = np.random.default_rng(6)
        m = crandn(rng, 3, 5)
        assert np.array_equal(cx.unvec(cx.vec(m), 3, 5), m)

    def test_kron_vec_identity(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            a = crandn(rng, 2, 2)
            b = crandn(rng, 2, 2)
            x = crandn(rng, 2, 2)
            lhs = cx.vec(cx.matmul(cx.matmul(b, x), a.T))
            rhs = cx.kronecker(a, b) @ cx.vec(x)
            assert np.abs(lhs - rhs).max() < 1e-12


class TestDetHermitianPlusIdentity:
    def test_zero_matrix(self):
        assert cx.det_hermitian_plus_identity(np.zeros((3, 3))) == pytest.approx(1.0)

    def test_diagonal(self):
        assert cx.det_hermitian_plus_identity(np.diag([1.0, 3.0])) == pytest.approx(8.0)

    def test_against_cofactor_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            a = crandn(rng, 3, 3)
            psd = a @ a.conj().T
            got = cx.det_hermitian_plus_identity(psd)
            want = cofactor_det(np.eye(3) + psd)
            assert abs(want.imag) < 1e-9
            assert abs(got - want.real) / abs(want.real) < 1e-10

    def test_floor_at_one(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            a = crandn(rng, 4, 2)
            assert cx.det_hermitian_plus_identity(a @ a.conj().T) >= 1.0

    def test_non_square_rejected(self):
        with pytest.raises(cx.LinAlgDomainError):
            cx.det_hermitian_plus_identity(np.zeros((2, 3)))

    def test_non_psd_rejected(self):
        with pytest.raises(cx.LinAlgDomainError):
            cx.det_hermitian_plus_identity(np.diag([1.0, -0.5]))


class TestSvdSmall:
    def test_identity(self):
        _, s, _ = cx.svd_small(np.eye(2))
        assert np.allclose(s, [1.0, 1.0])

    def test_rank_one_outer_product(self):
        rng = np.random.default_rng(10)
        u = crandn(rng, 4)
        v = crandn(rng, 3)
        u /= np.linalg.norm(u)
        v /= np.linalg.norm(v)
        _, s, _ = cx.svd_small(np.outer(u, v.conj()))
        assert s[0] == pytest.approx(1.0)
        assert np.all(s[1:] < 1e-12)

    def test_reconstruction(self):
        rng = np.random.default_rng(11)
        a = crandn(rng, 3, 3)
        u, s, v = cx.svd_small(a)
        assert np.abs(u @ np.diag(s) @ v.conj().T - a).max() < 1e-8

    def test_properties_on_1000_random(self):
        rng = np.random.default_rng(12)
        for _ in range(1000):
            rows = int(rng.integers(1, 9))
            cols = int(rng.integers(1, 9))
            a = crandn(rng, rows, cols)
            u, s, v = cx.svd_small(a)
            k = min(rows, cols)
            assert np.abs(u.conj().T @ u - np.eye(k)).max() < cx.ORTHO_TOL
            assert np.abs(v.conj().T @ v - np.eye(k)).max() < cx.ORTHO_TOL
            assert np.abs(u @ np.diag(s) @ v.conj().T - a).max() < cx.ORTHO_TOL
            assert np.all(np.diff(s) <= 1e-12)

    def test_phase_convention_deterministic(self):
        rng = np.random.default_rng(13)
        a = crandn(rng, 4, 4)
        _, _, v = cx.svd_small(a)
        for j in range(4):
            k = int(np.argmax(np.abs(v[:, j])))
            assert v[k, j].imag == pytest.approx(0.0, abs=1e-12)
            assert v[k, j].real > 0

    def test_size_cap(self):
        with pytest.raises(cx.LinAlgDomainError):
            cx.svd_small(np.zeros((65, 4)))


class TestInvSqrtHermitian:
    def test_identity(self):
        assert np.allclose(cx.inv_sqrt_hermitian(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        b = cx.inv_sqrt_hermitian(np.diag([4.0, 9.0]))
        assert np.allclose(b, np.diag([0.5, 1.0 / 3.0]))

    def test_defining_identity(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            m = crandn(rng, 4, 4)
            a = m @ m.conj().T + np.eye(4)
            b = cx.inv_sqrt_hermitian(a)
            assert np.abs(b @ a @ b - np.eye(4)).max() < 1e-8

    def test_singular_rejected(self):
        with pytest.raises(cx.LinAlgDomainError):
            cx.inv_sqrt_hermitian(np.diag([1.0, 0.0]))
