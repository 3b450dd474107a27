"""Layer-difference test statistic and its bootstrap calibration.

The statistic measures how far the layer-specific embedding blocks sit
from their average:

    psi = (K * sqrt(log n))^-1 * sum_k || Xhat^k - mean_k(Xhat^k) ||_F

(natural logarithm). Under the hypothesis that all layers share the same
latent positions, psi stays bounded as the graph grows, while sufficiently
separated layers push it to infinity; its finite-sample null distribution
has no closed form, so a plug-in parametric bootstrap is used to attach a
p-value:

1. form the layer-averaged positions ``Xbar`` and per-time probability
   matrices ``clamp(Xbar @ Yhat^t.T, 0, 1)`` (clamp counts are recorded,
   out-of-range products do occur in finite samples);
2. resample whole multiplex graphs with every layer drawn from those
   common probabilities (full blocks, diagonal included), re-embed each at
   the same dimension, and recompute the statistic;
3. report ``p = (1 + #{psi*_b > psi_obs}) / (1 + n_boot)`` with a strict
   inequality, so ties count as non-exceedances.

The averaged variant replaces each resampled block by the mean of
``n_rep`` independent draws, matching data that are themselves averages of
replicate graphs. With ``n_rep=1`` it consumes the same random streams as
the plain variant and reproduces it exactly.

Bootstrap iterations are embarrassingly parallel: each iteration b draws
its blocks from streams labelled (bootstrap, b, k, t), so results are
bit-identical for any number of worker processes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from .embedding import DuaseEmbedding, duase, layer_mean, select_dimension
from .errors import DegenerateInputError, DomainError
from .graphs import MultiplexGraph
from .linalg import svd_truncated
from .rng import SeedSpec
from .samplers import _bernoulli_block

logger = logging.getLogger(__name__)

_BOOTSTRAP_PURPOSE = "bootstrap"  # shared by both variants: n_rep=1 must match plain


def _psi_from_xhat(Xhat: np.ndarray, n: int, K: int) -> float:
    blocks = Xhat.reshape(K, n, -1)
    # Mean written as block0 + mean of differences: exactly zero deviations
    # (hence a statistic of exactly 0.0) when all layer blocks are equal.
    mean = blocks[0] + (blocks[1:] - blocks[0]).sum(axis=0) / K
    deviations = blocks - mean
    norms = np.sqrt((deviations * deviations).sum(axis=(1, 2)))
    return float(norms.sum() / (K * math.sqrt(math.log(n))))


def layer_deviation_statistic(embedding: DuaseEmbedding) -> float:
    """Normalised total Frobenius deviation of layer blocks from their mean.

    Requires ``n >= 2`` (the normalisation uses ``sqrt(log n)``). With a
    single layer the statistic is identically zero.
    """
    if embedding.n < 2:
        raise DomainError(f"statistic needs n >= 2 nodes, got n={embedding.n}")
    return _psi_from_xhat(embedding.Xhat, embedding.n, embedding.K)


@dataclass(frozen=True)
class TestResult:
    """Outcome of one bootstrap test.

    ``p_value`` always equals ``(1 + #{samples > statistic}) / (1 + n_boot)``
    and therefore lies in ``[1/(1+n_boot), 1]``.
    """

    statistic: float
    bootstrap_samples: np.ndarray
    p_value: float
    d: int
    n_boot: int
    variant: str
    n_rep: int | None
    seed_fingerprint: str
    layers: tuple[int, ...] | None = None
    clamped_entries: int = 0

    def __post_init__(self) -> None:
        samples = np.ascontiguousarray(self.bootstrap_samples, dtype=np.float64)
        object.__setattr__(self, "bootstrap_samples", samples)
        if samples.shape != (self.n_boot,):
            raise DomainError(
                f"expected {self.n_boot} bootstrap samples, got shape {samples.shape}"
            )
        if self.statistic < 0 or not math.isfinite(self.statistic):
            raise DomainError(f"invalid statistic {self.statistic}")
        if np.any(samples < 0) or not np.all(np.isfinite(samples)):
            raise DomainError("bootstrap samples must be finite and nonnegative")
        expected = (1 + int((samples > self.statistic).sum())) / (1 + self.n_boot)
        if self.p_value != expected:
            raise DomainError(
                f"p-value {self.p_value} inconsistent with samples (expected {expected})"
            )
        if self.variant not in ("plain", "averaged"):
            raise DomainError(f"unknown variant {self.variant!r}")
        samples.setflags(write=False)

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "bootstrap_samples": self.bootstrap_samples.tolist(),
            "d": self.d,
            "n_boot": self.n_boot,
            "variant": self.variant,
            "n_rep": self.n_rep,
            "seed": self.seed_fingerprint,
            "layers": list(self.layers) if self.layers is not None else None,
            "clamped_entries": self.clamped_entries,
        }


def _bootstrap_probabilities(embedding: DuaseEmbedding) -> tuple[list[np.ndarray], int]:
    """Per-time probability matrices ``clamp(Xbar @ Yhat^t.T)`` and the
    number of entries that needed clamping."""
    Xbar = layer_mean(embedding)
    matrices = []
    clamped = 0
    for t in range(embedding.T):
        P = Xbar @ embedding.time_block(t).T
        clamped += int(((P < 0.0) | (P > 1.0)).sum())
        np.clip(P, 0.0, 1.0, out=P)
        matrices.append(P)
    return matrices, clamped


def _bootstrap_psi(
    prob_by_time: list[np.ndarray],
    n: int,
    K: int,
    T: int,
    d: int,
    n_rep: int,
    seed_b: SeedSpec,
    backend: str | None,
) -> float:
    """One bootstrap iteration: resample, embed, evaluate the statistic."""
    A = np.empty((n * K, n * T))
    for k in range(K):
        for t in range(T):
            rng = seed_b.child(k, t).generator()
            # Resampled blocks keep their Bernoulli diagonal: the resampling
            # step draws the whole block from the fitted probabilities.
            # Hollowing them instead skews the null approximation measurably
            # (the p-value distribution drifts conservative).
            block = _bernoulli_block(prob_by_time[t], rng, n_rep, hollow=False)
            A[k * n : (k + 1) * n, t * n : (t + 1) * n] = block
    decomposition = svd_truncated(A, d, backend=backend)
    if decomposition.S[d - 1] <= 0.0:
        raise DegenerateInputError(
            f"bootstrap resample is rank-deficient at d={d}; the fitted "
            f"probabilities are degenerate"
        )
    Xhat = decomposition.U * np.sqrt(decomposition.S)
    return _psi_from_xhat(Xhat, n, K)


def _bootstrap_chunk(
    b_indices: np.ndarray,
    prob_by_time: list[np.ndarray],
    n: int,
    K: int,
    T: int,
    d: int,
    n_rep: int,
    seed: SeedSpec,
    backend: str | None,
) -> np.ndarray:
    # Single-threaded BLAS inside each chunk keeps results bit-identical
    # across worker counts and avoids core oversubscription.
    with threadpool_limits(limits=1):
        return np.array(
            [
                _bootstrap_psi(
                    prob_by_time, n, K, T, d, n_rep,
                    seed.child(_BOOTSTRAP_PURPOSE, int(b)), backend,
                )
                for b in b_indices
            ]
        )


def _run_bootstrap(
    embedding: DuaseEmbedding,
    n_boot: int,
    n_rep: int,
    variant: str,
    seed: SeedSpec,
    threads: int,
    backend: str | None,
    layers: tuple[int, ...] | None,
) -> TestResult:
    if n_boot < 1:
        raise DomainError(f"n_boot must be at least 1, got {n_boot}")
    if n_rep < 1:
        raise DomainError(f"n_rep must be at least 1, got {n_rep}")
    if threads < 1:
        raise DomainError(f"threads must be at least 1, got {threads}")

    psi_obs = layer_deviation_statistic(embedding)
    prob_by_time, clamped = _bootstrap_probabilities(embedding)
    if clamped:
        logger.debug(
            "bootstrap probability matrix: clamped %d entries to [0, 1]", clamped
        )

    n, K, T, d = embedding.n, embedding.K, embedding.T, embedding.d
    chunks = np.array_split(np.arange(n_boot), min(threads, n_boot))
    chunks = [c for c in chunks if c.size]
    if threads == 1:
        parts = [
            _bootstrap_chunk(c, prob_by_time, n, K, T, d, n_rep, seed, backend)
            for c in chunks
        ]
    else:
        parts = Parallel(n_jobs=threads)(
            delayed(_bootstrap_chunk)(
                c, prob_by_time, n, K, T, d, n_rep, seed, backend
            )
            for c in chunks
        )
    samples = np.concatenate(parts)
    p_value = (1 + int((samples > psi_obs).sum())) / (1 + n_boot)
    return TestResult(
        statistic=psi_obs,
        bootstrap_samples=samples,
        p_value=p_value,
        d=d,
        n_boot=n_boot,
        variant=variant,
        n_rep=None if variant == "plain" else n_rep,
        seed_fingerprint=seed.fingerprint(),
        layers=layers,
        clamped_entries=clamped,
    )


def bootstrap_test(
    embedding: DuaseEmbedding,
    n_boot: int,
    seed: SeedSpec,
    *,
    threads: int = 1,
    backend: str | None = None,
    layers: tuple[int, ...] | None = None,
) -> TestResult:
    """Plug-in bootstrap p-value for the layer-difference statistic.

    ``embedding`` should be the embedding of the observed graph; bootstrap
    resamples are embedded at the same dimension with the same SVD backend.
    """
    return _run_bootstrap(
        embedding, n_boot, 1, "plain", seed, threads, backend, layers
    )


def bootstrap_test_averaged(
    embedding: DuaseEmbedding,
    n_boot: int,
    n_rep: int,
    seed: SeedSpec,
    *,
    threads: int = 1,
    backend: str | None = None,
    layers: tuple[int, ...] | None = None,
) -> TestResult:
    """Bootstrap variant for embeddings of replicate-averaged graphs.

    Each resampled block is the mean of ``n_rep`` independent draws from
    the fitted probabilities, mirroring data whose blocks are averages of
    ``n_rep`` binary replicates. ``n_rep=1`` reduces exactly to
    :func:`bootstrap_test`, including the random streams consumed.
    """
    return _run_bootstrap(
        embedding, n_boot, n_rep, "averaged", seed, threads, backend, layers
    )


@dataclass(frozen=True)
class PairwiseResults:
    """All unordered layer-pair tests of one graph plus the rejection
    counts each layer accumulates at level ``alpha``."""

    n_layers: int
    alpha: float
    results: dict[tuple[int, int], TestResult] = field(repr=False)

    def get(self, k: int, l: int) -> TestResult:
        if k == l:
            raise DomainError("pairwise test is undefined on the diagonal")
        return self.results[(min(k, l), max(k, l))]

    def p_matrix(self) -> np.ndarray:
        """Symmetric matrix of p-values with NaN on the diagonal."""
        out = np.full((self.n_layers, self.n_layers), np.nan)
        for (k, l), res in self.results.items():
            out[k, l] = out[l, k] = res.p_value
        return out

    def rejections_per_layer(self) -> np.ndarray:
        """For each layer, the number of pairs involving it with
        ``p <= alpha``."""
        counts = np.zeros(self.n_layers, dtype=np.int64)
        for (k, l), res in self.results.items():
            if res.p_value <= self.alpha:
                counts[k] += 1
                counts[l] += 1
        return counts

    def to_dict(self) -> dict:
        return {
            "n_layers": self.n_layers,
            "alpha": self.alpha,
            "rejections_per_layer": self.rejections_per_layer().tolist(),
            "tests": {
                f"{k},{l}": res.to_dict() for (k, l), res in sorted(self.results.items())
            },
        }


def _pairwise_single(
    graph: MultiplexGraph,
    pair: tuple[int, int],
    n_boot: int,
    seed: SeedSpec,
    variant: str,
    n_rep: int | None,
    d: int | None,
    max_d: int | None,
    backend: str | None,
) -> TestResult:
    k, l = pair
    with threadpool_limits(limits=1):
        sub = graph.subset_layers([k, l])
        d_pair = d if d is not None else select_dimension(sub, max_d=max_d, backend=backend)
        emb = duase(sub, d_pair, backend=backend)
        pair_seed = seed.child("pairwise", k, l)
        if variant == "plain":
            return bootstrap_test(emb, n_boot, pair_seed, backend=backend, layers=(k, l))
        return bootstrap_test_averaged(
            emb, n_boot, n_rep, pair_seed, backend=backend, layers=(k, l)
        )


def pairwise_tests(
    graph: MultiplexGraph,
    n_boot: int,
    seed: SeedSpec,
    *,
    variant: str = "plain",
    n_rep: int | None = None,
    d: int | None = None,
    max_d: int | None = None,
    alpha: float = 0.05,
    backend: str | None = None,
    threads: int = 1,
) -> PairwiseResults:
    """Run the bootstrap test on every unordered pair of layers.

    Each pair's two-layer subgraph is re-embedded from scratch; the
    dimension is re-selected per pair unless ``d`` is supplied. Results are
    symmetric and the diagonal is undefined.
    """
    if graph.K < 2:
        raise DomainError(f"pairwise tests need K >= 2 layers, got K={graph.K}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if variant not in ("plain", "averaged"):
        raise DomainError(f"unknown variant {variant!r}")
    if variant == "averaged" and (n_rep is None or n_rep < 1):
        raise DomainError("averaged variant needs n_rep >= 1")

    pairs = [(k, l) for k in range(graph.K) for l in range(k + 1, graph.K)]
    if threads == 1:
        outcomes = [
            _pairwise_single(graph, p, n_boot, seed, variant, n_rep, d, max_d, backend)
            for p in pairs
        ]
    else:
        outcomes = Parallel(n_jobs=threads)(
            delayed(_pairwise_single)(
                graph, p, n_boot, seed, variant, n_rep, d, max_d, backend
            )
            for p in pairs
        )
    return PairwiseResults(
        n_layers=graph.K,
        alpha=alpha,
        results=dict(zip(pairs, outcomes)),
    )
