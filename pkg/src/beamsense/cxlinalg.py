"""Dense complex linear algebra kernels shared by every other module.

All matrices are 2-D ``numpy.ndarray`` of ``complex128``, row-major, with
immutable dimensions; vectors are 1-D. Vectorization is column-stacking
throughout the package: entry (i, j) of an (r x c) matrix maps to index
``j * r + i``. The sensing operator and the network encoder both rely on
this convention, so it is fixed here and nowhere else.
"""

from __future__ import annotations

import numpy as np

# Centralized numerical tolerances.
ORTHO_TOL = 1e-8
PSD_TOL = 1e-9
SINGULAR_TOL = 1e-12

# svd_small is meant for effective channels and desk-scale full channels only.
SVD_MAX_DIM = 64


class LinAlgDomainError(ValueError):
    """Input violates a documented precondition (shape, PSD-ness, rank)."""


def as_cmatrix(a) -> np.ndarray:
    """Coerce to a 2-D complex128 array, rejecting empty or ragged input."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise LinAlgDomainError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def as_cvector(a) -> np.ndarray:
    v = np.asarray(a, dtype=np.complex128)
    if v.ndim != 1 or v.shape[0] < 1:
        raise LinAlgDomainError(f"expected a 1-D vector, got shape {v.shape}")
    return v


def matmul(a, b) -> np.ndarray:
    a = as_cmatrix(a)
    b = as_cmatrix(b)
    if a.shape[1] != b.shape[0]:
        raise LinAlgDomainError(
            f"matmul dimension mismatch: ({a.shape[0]}x{a.shape[1]}) @ ({b.shape[0]}x{b.shape[1]})"
        )
    return a @ b


def hermitian(a) -> np.ndarray:
    """Conjugate transpose."""
    return as_cmatrix(a).conj().T


def kronecker(a, b) -> np.ndarray:
    return np.kron(as_cmatrix(a), as_cmatrix(b))


def vec(a) -> np.ndarray:
    """Column-stacking vectorization: vec(A)[j * rows + i] = A[i, j]."""
    return as_cmatrix(a).reshape(-1, order="F")


def unvec(v, rows: int, cols: int) -> np.ndarray:
    v = as_cvector(v)
    if v.shape[0] != rows * cols:
        raise LinAlgDomainError(f"cannot unvec length {v.shape[0]} into {rows}x{cols}")
    return v.reshape((rows, cols), order="F")


def det_hermitian_plus_identity(a) -> float:
    """Real determinant of (I + A) for Hermitian PSD A, via eigenvalues.

    Eigenvalues below -PSD_TOL raise; smaller negative noise is clamped to
    zero so the result is always >= 1.
    """
    a = as_cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise LinAlgDomainError(f"matrix must be square, got {a.shape}")
    sym = 0.5 * (a + a.conj().T)
    eigvals = np.linalg.eigvalsh(sym)
    if eigvals.min() < -PSD_TOL:
        raise LinAlgDomainError(
            f"matrix is not positive semidefinite: min eigenvalue {eigvals.min():.3e}"
        )
    return float(np.prod(1.0 + np.clip(eigvals, 0.0, None)))


def svd_small(a) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD a = U @ diag(s) @ V^H for small dense matrices.

    Singular values are sorted descending. The phase ambiguity of each
    singular-vector pair is fixed by rotating the largest-magnitude entry
    of each column of V to the positive real axis, so output is
    deterministic for test comparison.
    """
    a = as_cmatrix(a)
    if max(a.shape) > SVD_MAX_DIM:
        raise LinAlgDomainError(
            f"svd_small supports dimensions up to {SVD_MAX_DIM}, got {a.shape}"
        )
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise LinAlgDomainError(f"SVD failed to converge on shape {a.shape}: {exc}") from exc
    v = vh.conj().T
    for j in range(v.shape[1]):
        k = int(np.argmax(np.abs(v[:, j])))
        pivot = v[k, j]
        mag = abs(pivot)
        if mag > 0:
            phase = pivot / mag
            v[:, j] *= phase.conjugate()
            u[:, j] *= phase.conjugate()
    return u, s, v


def inv_sqrt_hermitian(a) -> np.ndarray:
    """Hermitian inverse square root B with B @ A @ B = I.

    Requires A Hermitian positive definite; eigenvalues at or below
    SINGULAR_TOL raise a singularity error.
    """
    a = as_cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise LinAlgDomainError(f"matrix must be square, got {a.shape}")
    sym = 0.5 * (a + a.conj().T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    if eigvals.min() <= SINGULAR_TOL:
        raise LinAlgDomainError(
            f"matrix is numerically singular: min eigenvalue {eigvals.min():.3e}"
        )
    b = (eigvecs * (1.0 / np.sqrt(eigvals))) @ eigvecs.conj().T
    return 0.5 * (b + b.conj().T)
