"""Truncated singular value decompositions and the matrix norms used by
the embedding and its diagnostics.

Two SVD backends are provided. The dense backend computes a full LAPACK
decomposition and slices the top ``d`` triplets, exact to machine
precision. The randomized backend (range finder with oversampling 10 and
two power iterations) touches the matrix only through products, so it
scales to large or sparse unfoldings; it is accurate whenever the spectrum
has a reasonable gap below the requested rank. Both backends are
deterministic: the randomized test matrix is drawn from a fixed internal
stream, and singular-vector signs are normalised so the largest-magnitude
entry of each left vector is positive (ties broken by lowest row index).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import DomainError, GeometryError

DENSE_BACKEND_MAX_DIM = 2000
RANDOMIZED_OVERSAMPLING = 10
RANDOMIZED_POWER_ITERATIONS = 2
_RANDOMIZED_STREAM_ENTROPY = 0x5BD1E995


@dataclass(frozen=True)
class TruncatedSvd:
    """Top-``d`` singular triplets: ``U @ diag(S) @ V.T`` approximates the
    input. ``U`` and ``V`` have orthonormal columns; ``S`` is descending
    and nonnegative."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def __post_init__(self) -> None:
        if self.U.ndim != 2 or self.V.ndim != 2 or self.S.ndim != 1:
            raise GeometryError("TruncatedSvd components have wrong ranks")
        d = self.S.shape[0]
        if self.U.shape[1] != d or self.V.shape[1] != d:
            raise GeometryError(
                f"inconsistent truncation: U {self.U.shape}, S {self.S.shape}, "
                f"V {self.V.shape}"
            )
        if np.any(self.S < 0) or np.any(np.diff(self.S) > 0):
            raise DomainError("singular values must be nonnegative and descending")
        for a in (self.U, self.S, self.V):
            a.setflags(write=False)

    @property
    def d(self) -> int:
        return self.S.shape[0]


def _validate_matrix(matrix) -> None:
    if matrix.ndim != 2:
        raise GeometryError(f"expected a 2-D matrix, got shape {matrix.shape}")
    data = matrix.data if sparse.issparse(matrix) else matrix
    if not np.all(np.isfinite(data)):
        raise DomainError("matrix has non-finite entries")


def _normalize_signs(U: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Largest-magnitude entry of each U column made positive; argmax takes
    # the lowest index on ties.
    anchor = np.abs(U).argmax(axis=0)
    signs = np.sign(U[anchor, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, V * signs


def _randomized_svd(matrix, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m, n = matrix.shape
    ell = min(d + RANDOMIZED_OVERSAMPLING, min(m, n))
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(_RANDOMIZED_STREAM_ENTROPY))
    )
    Q = matrix @ rng.standard_normal((n, ell))
    Q, _ = np.linalg.qr(Q)
    for _ in range(RANDOMIZED_POWER_ITERATIONS):
        W, _ = np.linalg.qr(matrix.T @ Q)
        Q, _ = np.linalg.qr(matrix @ W)
    B = (matrix.T @ Q).T  # = Q.T @ matrix, written to keep sparse @ dense order
    Ub, s, Vt = np.linalg.svd(B, full_matrices=False)
    return (Q @ Ub)[:, :d], s[:d], Vt[:d].T


def _iterative_svd(matrix, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    from scipy.sparse.linalg import svds

    m, n = matrix.shape
    if d >= min(m, n):  # ARPACK needs k < min(m, n); fall back to LAPACK
        dense = matrix.toarray() if sparse.issparse(matrix) else matrix
        U, s, Vt = np.linalg.svd(np.asarray(dense, float), full_matrices=False)
        return U[:, :d], s[:d], Vt[:d].T
    # Fixed start vector (length of the smaller side) keeps the Lanczos
    # iteration deterministic.
    axis = 1 if m <= n else 0
    if sparse.issparse(matrix):
        energy = np.asarray(matrix.multiply(matrix).sum(axis=axis)).ravel()
    else:
        energy = (matrix * matrix).sum(axis=axis)
    U, s, Vt = svds(matrix, k=d, v0=np.sqrt(energy) + 1.0)
    # svds returns ascending singular values
    order = np.argsort(s)[::-1]
    return U[:, order], s[order], Vt[order].T


def svd_truncated(matrix, d: int, backend: str | None = None) -> TruncatedSvd:
    """Top-``d`` singular triplets of ``matrix`` (dense or sparse).

    Parameters
    ----------
    matrix : (m, n) ndarray or sparse array
    d : int
        Number of triplets, ``1 <= d <= min(m, n)``.
    backend : {"dense", "randomized", "iterative"} or None
        None selects "dense" when ``min(m, n) <= DENSE_BACKEND_MAX_DIM``
        and "randomized" otherwise. The dense backend is exact to machine
        precision; "iterative" (Lanczos with a fixed start vector) is
        exact to solver tolerance while touching only the top ``d``
        triplets; "randomized" approximates the dominant subspace and is
        intended for spectra with a gap below rank ``d``. Ordering under
        exactly tied singular values follows the backend and is not
        guaranteed stable.
    """
    if not sparse.issparse(matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
    _validate_matrix(matrix)
    m, n = matrix.shape
    if not 1 <= d <= min(m, n):
        raise DomainError(f"rank d={d} outside [1, {min(m, n)}] for shape {(m, n)}")
    if backend is None:
        backend = "dense" if min(m, n) <= DENSE_BACKEND_MAX_DIM else "randomized"
    if backend == "dense":
        dense = matrix.toarray() if sparse.issparse(matrix) else np.asarray(matrix, float)
        U, s, Vt = np.linalg.svd(dense, full_matrices=False)
        U, s, V = U[:, :d], s[:d], Vt[:d].T
    elif backend == "randomized":
        U, s, V = _randomized_svd(matrix, d)
    elif backend == "iterative":
        U, s, V = _iterative_svd(matrix, d)
    else:
        raise DomainError(f"unknown SVD backend {backend!r}")
    U, V = _normalize_signs(np.ascontiguousarray(U), np.ascontiguousarray(V))
    # Descending order is guaranteed by both backends; clip the tiny
    # negative values the randomized small-matrix SVD can emit.
    s = np.maximum(s, 0.0)
    return TruncatedSvd(U=U, S=np.ascontiguousarray(s), V=np.ascontiguousarray(V))


def frobenius_norm(matrix: np.ndarray) -> float:
    """Square root of the sum of squared entries."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if not np.all(np.isfinite(matrix)):
        raise DomainError("matrix has non-finite entries")
    return float(np.linalg.norm(matrix.ravel()))


def two_to_infinity_norm(matrix: np.ndarray) -> float:
    """Maximum Euclidean norm over the rows of ``matrix``."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise GeometryError(f"expected a 2-D matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise DomainError("matrix has non-finite entries")
    if matrix.shape[0] == 0:
        return 0.0
    return float(np.sqrt((matrix * matrix).sum(axis=1).max()))
