"""Generators for dynamic multiplex graphs.

Two sampling models are provided:

* the inner-product latent position model, where edge (i, j) in block
  (k, t) is Bernoulli with probability ``X^k_i . Y^t_j`` for layer latent
  matrix ``X^k`` and time latent matrix ``Y^t``;
* its blockmodel special case, where probabilities depend only on
  community labels through per-(layer, time) matrices ``B^{k,t}``.

Each (layer, time) block is drawn from its own seed stream, so sampling is
reproducible under any execution order. Diagonals of sampled blocks are
always zero: self-loops are excluded from the model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GeometryError
from .graphs import MultiplexGraph
from .rng import SeedSpec

PROBABILITY_SLACK = 1e-12
SBM_RANK_TOLERANCE = 1e-10


@dataclass(frozen=True)
class LatentPair:
    """Layer latents ``X`` (nK x d, blocks X^k) and time latents ``Y``
    (nT x d, blocks Y^t). Every cross inner product must be a probability."""

    X: np.ndarray
    Y: np.ndarray
    n: int
    K: int
    T: int

    def __post_init__(self) -> None:
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        Y = np.ascontiguousarray(self.Y, dtype=np.float64)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[1]:
            raise GeometryError(
                f"latent matrices have incompatible shapes {X.shape} and {Y.shape}"
            )
        if X.shape[0] != self.n * self.K:
            raise GeometryError(
                f"X has {X.shape[0]} rows, expected n*K = {self.n * self.K}"
            )
        if Y.shape[0] != self.n * self.T:
            raise GeometryError(
                f"Y has {Y.shape[0]} rows, expected n*T = {self.n * self.T}"
            )
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise DomainError("latent positions have non-finite entries")
        P = X @ Y.T
        if P.min() < -PROBABILITY_SLACK or P.max() > 1.0 + PROBABILITY_SLACK:
            raise DomainError(
                "latent inner products outside [0, 1]: "
                f"range [{P.min():.6g}, {P.max():.6g}]"
            )
        X.setflags(write=False)
        Y.setflags(write=False)

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def layer_block(self, k: int) -> np.ndarray:
        return self.X[k * self.n : (k + 1) * self.n]

    def time_block(self, t: int) -> np.ndarray:
        return self.Y[t * self.n : (t + 1) * self.n]

    def probability_matrix(self) -> np.ndarray:
        """The nK x nT matrix of Bernoulli parameters, clamped of the
        sub-machine-precision excursions permitted at construction."""
        return np.clip(self.X @ self.Y.T, 0.0, 1.0)

    def probability_graph(self) -> MultiplexGraph:
        """Probabilities packaged as a weighted graph (diagonals kept),
        useful for noise-free embedding checks."""
        n, K, T = self.n, self.K, self.T
        P = self.probability_matrix()
        blocks = {
            (k, t): P[k * n : (k + 1) * n, t * n : (t + 1) * n]
            for k in range(K)
            for t in range(T)
        }
        return MultiplexGraph(blocks, directed=True, binary=False)


@dataclass(frozen=True)
class BlockModelSpec:
    """Blockmodel specification: per-node community labels and the
    (layer, time)-indexed matrices of between-community probabilities.

    ``layer_labels`` has shape (K, n) with values in [0, G1); row k gives
    the layer-side community of each node in layer k. ``time_labels`` has
    shape (T, n) with values in [0, G2). ``B`` has shape (K, T, G1, G2).
    """

    B: np.ndarray
    layer_labels: np.ndarray
    time_labels: np.ndarray

    def __post_init__(self) -> None:
        B = np.ascontiguousarray(self.B, dtype=np.float64)
        z = np.ascontiguousarray(self.layer_labels, dtype=np.int64)
        u = np.ascontiguousarray(self.time_labels, dtype=np.int64)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "layer_labels", z)
        object.__setattr__(self, "time_labels", u)
        if B.ndim != 4:
            raise GeometryError(f"B must have shape (K, T, G1, G2), got {B.shape}")
        if z.ndim != 2 or u.ndim != 2:
            raise GeometryError("label arrays must be 2-D (per layer/time rows)")
        K, T, G1, G2 = B.shape
        if z.shape[0] != K:
            raise GeometryError(f"layer_labels has {z.shape[0]} rows, expected K={K}")
        if u.shape[0] != T:
            raise GeometryError(f"time_labels has {u.shape[0]} rows, expected T={T}")
        if z.shape[1] != u.shape[1]:
            raise GeometryError(
                f"label arrays disagree on node count: {z.shape[1]} vs {u.shape[1]}"
            )
        if not np.all(np.isfinite(B)) or B.min() < 0.0 or B.max() > 1.0:
            raise DomainError("B entries must lie in [0, 1]")
        if z.min() < 0 or z.max() >= G1:
            raise DomainError(f"layer labels outside [0, {G1})")
        if u.min() < 0 or u.max() >= G2:
            raise DomainError(f"time labels outside [0, {G2})")
        for a in (B, z, u):
            a.setflags(write=False)

    @property
    def n(self) -> int:
        return self.layer_labels.shape[1]

    @property
    def K(self) -> int:
        return self.B.shape[0]

    @property
    def T(self) -> int:
        return self.B.shape[1]

    @property
    def G1(self) -> int:
        return self.B.shape[2]

    @property
    def G2(self) -> int:
        return self.B.shape[3]

    def block_probabilities(self, k: int, t: int) -> np.ndarray:
        """The n x n Bernoulli parameter matrix of block (k, t)."""
        return self.B[k, t][
            self.layer_labels[k][:, None], self.time_labels[t][None, :]
        ]

    @staticmethod
    def with_static_labels(
        B: np.ndarray, layer_communities: np.ndarray, time_communities: np.ndarray
    ) -> "BlockModelSpec":
        """Convenience constructor for node memberships that do not change
        across layers or time points."""
        B = np.asarray(B, dtype=np.float64)
        K, T = B.shape[:2]
        z = np.tile(np.asarray(layer_communities, dtype=np.int64), (K, 1))
        u = np.tile(np.asarray(time_communities, dtype=np.int64), (T, 1))
        return BlockModelSpec(B=B, layer_labels=z, time_labels=u)


def _bernoulli_block(
    probabilities: np.ndarray,
    rng: np.random.Generator,
    n_rep: int = 1,
    hollow: bool = True,
) -> np.ndarray:
    """Mean of ``n_rep`` independent entrywise Bernoulli draws.

    Draws are consumed sequentially from ``rng`` so that ``n_rep = 1``
    reproduces a single plain draw from the same stream. ``hollow`` zeroes
    the diagonal (the convention for observed graphs, where self-loops are
    excluded from the model).
    """
    n = probabilities.shape[0]
    if n_rep == 1:
        out = (rng.random((n, n)) < probabilities).astype(np.float64)
    else:
        acc = np.zeros((n, n))
        for _ in range(n_rep):
            acc += rng.random((n, n)) < probabilities
        out = acc / n_rep
    if hollow:
        np.fill_diagonal(out, 0.0)
    return out


def sample_dmprdpg(latents: LatentPair, seed: SeedSpec) -> MultiplexGraph:
    """Sample a directed multiplex graph with independent Bernoulli edges,
    block (k, t) using probabilities ``X^k @ Y^t.T`` and a zero diagonal.

    Entries of the probability product outside [0, 1] by more than
    ``PROBABILITY_SLACK`` raise; smaller excursions are clamped.
    """
    n, K, T = latents.n, latents.K, latents.T
    blocks = {}
    for k in range(K):
        Xk = latents.layer_block(k)
        for t in range(T):
            P = Xk @ latents.time_block(t).T
            if P.min() < -PROBABILITY_SLACK or P.max() > 1.0 + PROBABILITY_SLACK:
                raise DomainError(
                    f"block (layer={k}, time={t}) has probabilities outside "
                    f"[0, 1]: range [{P.min():.6g}, {P.max():.6g}]"
                )
            np.clip(P, 0.0, 1.0, out=P)
            blocks[(k, t)] = _bernoulli_block(P, seed.child(k, t).generator())
    return MultiplexGraph(blocks, directed=True, binary=True)


def sample_dmpsbm(spec: BlockModelSpec, n: int, seed: SeedSpec) -> MultiplexGraph:
    """Sample a directed multiplex blockmodel graph on ``n`` nodes.

    ``spec`` must carry labels for exactly ``n`` nodes; entry (i, j) of
    block (k, t) is Bernoulli with parameter ``B[k, t][z_k[i], u_t[j]]``
    and the diagonal is zero.
    """
    if spec.n != n:
        raise GeometryError(f"spec labels cover {spec.n} nodes, requested n={n}")
    blocks = {}
    for k in range(spec.K):
        for t in range(spec.T):
            P = spec.block_probabilities(k, t)
            blocks[(k, t)] = _bernoulli_block(P, seed.child(k, t).generator())
    return MultiplexGraph(blocks, directed=True, binary=True)


def sbm_to_latents(spec: BlockModelSpec) -> LatentPair:
    """Realise a blockmodel as inner-product latent positions.

    The (K*G1) x (T*G2) community-level probability matrix (rows indexed
    by (layer, layer-community), columns by (time, time-community)) is
    factorised by exact SVD at its numerical rank; each node inherits the
    factor row of its community. Inner products then reproduce the B
    lookups to machine precision.
    """
    K, T, G1, G2 = spec.K, spec.T, spec.G1, spec.G2
    M = spec.B.transpose(0, 2, 1, 3).reshape(K * G1, T * G2)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    rank = int(np.sum(s > SBM_RANK_TOLERANCE * s[0])) if s[0] > 0 else 1
    root = np.sqrt(s[:rank])
    left = U[:, :rank] * root  # (K*G1, d) community-level layer factors
    right = Vt[:rank].T * root  # (T*G2, d) community-level time factors

    n = spec.n
    X = np.empty((n * K, rank))
    for k in range(K):
        X[k * n : (k + 1) * n] = left[k * G1 + spec.layer_labels[k]]
    Y = np.empty((n * T, rank))
    for t in range(T):
        Y[t * n : (t + 1) * n] = right[t * G2 + spec.time_labels[t]]
    return LatentPair(X=X, Y=Y, n=n, K=K, T=T)
