"""Spectral embedding of the doubly unfolded matrix and scree-based
selection of the embedding dimension.

The embedding takes the top-``d`` singular triplets ``(U, S, V)`` of the
nK x nT unfolded matrix and scales the singular vectors by the square root
of the singular values: ``Xhat = U S^{1/2}`` collects layer-specific
positions (blocks ``Xhat^k``), ``Yhat = V S^{1/2}`` time-specific ones.
Because all layers are embedded jointly, their blocks live in a common
coordinate system and can be compared directly, with no Procrustes
alignment step anywhere in the test path.

Dimension selection uses the profile-likelihood elbow: the singular value
sequence is split into a "signal" head and a "noise" tail, both modelled
as Gaussians with a common variance, and the split maximising the profile
log-likelihood is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DomainError, GeometryError
from .graphs import MultiplexGraph, unfold
from .linalg import svd_truncated

DEFAULT_MAX_DIMENSION = 50


@dataclass(frozen=True)
class DuaseEmbedding:
    """Joint layer/time embedding: ``Xhat`` is nK x d with layer blocks,
    ``Yhat`` is nT x d with time blocks, and ``singular_values`` holds the
    d retained singular values (descending, positive)."""

    Xhat: np.ndarray
    Yhat: np.ndarray
    singular_values: np.ndarray
    n: int
    K: int
    T: int

    def __post_init__(self) -> None:
        Xhat = np.ascontiguousarray(self.Xhat, dtype=np.float64)
        Yhat = np.ascontiguousarray(self.Yhat, dtype=np.float64)
        s = np.ascontiguousarray(self.singular_values, dtype=np.float64)
        object.__setattr__(self, "Xhat", Xhat)
        object.__setattr__(self, "Yhat", Yhat)
        object.__setattr__(self, "singular_values", s)
        if Xhat.ndim != 2 or Yhat.ndim != 2 or Xhat.shape[1] != Yhat.shape[1]:
            raise GeometryError(
                f"embedding matrices have incompatible shapes {Xhat.shape}, {Yhat.shape}"
            )
        if Xhat.shape[0] != self.n * self.K:
            raise GeometryError(
                f"Xhat has {Xhat.shape[0]} rows, expected n*K = {self.n * self.K}"
            )
        if Yhat.shape[0] != self.n * self.T:
            raise GeometryError(
                f"Yhat has {Yhat.shape[0]} rows, expected n*T = {self.n * self.T}"
            )
        if s.shape != (Xhat.shape[1],):
            raise GeometryError(
                f"singular_values has shape {s.shape}, expected ({Xhat.shape[1]},)"
            )
        if np.any(s <= 0) or np.any(np.diff(s) > 0):
            raise DomainError("singular values must be positive and descending")
        Xhat.setflags(write=False)
        Yhat.setflags(write=False)
        s.setflags(write=False)

    @property
    def d(self) -> int:
        return self.Xhat.shape[1]

    def layer_block(self, k: int) -> np.ndarray:
        return self.Xhat[k * self.n : (k + 1) * self.n]

    def time_block(self, t: int) -> np.ndarray:
        return self.Yhat[t * self.n : (t + 1) * self.n]

    def layer_blocks(self) -> np.ndarray:
        """Layer blocks of Xhat as a (K, n, d) view."""
        return self.Xhat.reshape(self.K, self.n, self.d)


def _embed_unfolded(
    data, n: int, K: int, T: int, d: int, backend: str | None
) -> DuaseEmbedding:
    decomposition = svd_truncated(data, d, backend=backend)
    s = decomposition.S
    if s[d - 1] <= 0.0:
        raise DegenerateInputError(
            f"no positive singular value at rank {d}; the matrix is (numerically) "
            f"of lower rank"
        )
    root = np.sqrt(s)
    return DuaseEmbedding(
        Xhat=decomposition.U * root,
        Yhat=decomposition.V * root,
        singular_values=s,
        n=n,
        K=K,
        T=T,
    )


def duase(graph: MultiplexGraph, d: int, backend: str | None = None) -> DuaseEmbedding:
    """Embed ``graph`` by truncated SVD of its doubly unfolded matrix.

    Works on binary and real-valued (averaged) graphs alike. ``backend``
    is passed to :func:`dmptest.linalg.svd_truncated`.
    """
    m = unfold(graph)
    if not 1 <= d <= min(m.data.shape):
        raise DomainError(
            f"embedding dimension d={d} outside [1, {min(m.data.shape)}]"
        )
    return _embed_unfolded(m.data, graph.n, graph.K, graph.T, d, backend)


def scree_elbow(values: np.ndarray) -> int:
    """Profile-likelihood split point of a descending scree sequence.

    The criterion works on the logarithms of the values: singular values of
    noisy low-rank matrices separate from the noise bulk by orders of
    magnitude, not by absolute gaps, and on the raw scale the largest value
    dominates every split. For each split q the log-scale head
    ``values[:q]`` and tail ``values[q:]`` are modelled as Gaussians with
    separate means and a common variance (the pooled maximum-likelihood
    variance over all p points). Returns the q in [1, p-1] with maximal
    profile log-likelihood; ties, including the all-values-equal case
    where every split is perfect, resolve to the smallest q.

    Nonpositive values (rank-deficient inputs) are floored at a tiny
    fraction of the leading value before taking logs; an all-zero sequence
    returns 1 by the flat-scree convention.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] < 2:
        raise DomainError("need a 1-D sequence of at least 2 values")
    if not np.all(np.isfinite(v)):
        raise DomainError("scree values must be finite")
    if np.any(np.diff(v) > 0):
        raise DomainError("scree values must be sorted in descending order")
    if np.any(v < 0):
        raise DomainError("scree values must be nonnegative")
    if v[0] <= 0.0:
        return 1
    w = np.log(np.maximum(v, v[0] * 1e-15))
    p = w.shape[0]
    best_q, best_ll = 1, -math.inf
    for q in range(1, p):
        head, tail = w[:q], w[q:]
        ss = ((head - head.mean()) ** 2).sum() + ((tail - tail.mean()) ** 2).sum()
        if ss == 0.0:
            ll = math.inf
        else:
            # Gaussian log-likelihood with the pooled MLE variance ss/p;
            # the quadratic term collapses to the constant -p/2.
            ll = -0.5 * p * (math.log(2.0 * math.pi * ss / p) + 1.0)
        if ll > best_ll:
            best_q, best_ll = q, ll
    return best_q


def select_dimension(
    graph: MultiplexGraph,
    max_d: int | None = None,
    backend: str | None = None,
) -> int:
    """Choose the embedding dimension from the top-``max_d`` singular
    values of the unfolded matrix via the profile-likelihood elbow.

    ``max_d`` defaults to ``min(50, min(nK, nT))`` and must leave at
    least 3 values for the split to be meaningful.
    """
    m = unfold(graph)
    limit = min(m.data.shape)
    if max_d is None:
        max_d = min(DEFAULT_MAX_DIMENSION, limit)
    if max_d > limit:
        raise DomainError(f"max_d={max_d} exceeds min(nK, nT) = {limit}")
    if max_d < 3:
        raise DegenerateInputError(
            f"dimension selection needs at least 3 singular values, got max_d={max_d}"
        )
    values = svd_truncated(m.data, max_d, backend=backend).S
    return scree_elbow(values)


def layer_mean(embedding: DuaseEmbedding) -> np.ndarray:
    """Arithmetic mean of the K layer blocks of ``Xhat`` (an n x d matrix)."""
    return embedding.layer_blocks().mean(axis=0)
