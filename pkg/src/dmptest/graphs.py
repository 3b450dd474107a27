"""Containers for dynamic multiplex graphs and the doubly unfolded matrix.

A dynamic multiplex graph on ``n`` shared nodes is a collection of ``K * T``
adjacency blocks, one per (layer k, time t) pair. The doubly unfolded matrix
stacks the blocks vertically over layers and horizontally over time points,
giving an ``nK x nT`` matrix whose (k, t) block sits at rows
``k*n:(k+1)*n`` and columns ``t*n:(t+1)*n`` (0-indexed).

Graphs are immutable after construction (arrays are marked read-only) and
can therefore be shared freely across parallel workers. Blocks are stored
dense by default; ``storage="auto"`` switches to compressed sparse blocks
when the overall edge density is below 10%, which matters for long time
series. Both storages unfold to bit-identical values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

from .errors import DomainError, GeometryError

SPARSE_DENSITY_THRESHOLD = 0.10


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def _block_to_dense(block) -> np.ndarray:
    if sparse.issparse(block):
        return block.toarray()
    return np.asarray(block, dtype=np.float64)


class MultiplexGraph:
    """Adjacency blocks of a dynamic multiplex graph.

    Parameters
    ----------
    blocks : mapping (k, t) -> (n, n) array, or array of shape (K, T, n, n)
        Adjacency matrices per layer/time pair, 0-indexed keys. All
        ``K * T`` blocks must be present and share the same shape.
    directed : bool
        If False, every block must equal its transpose.
    binary : bool or None
        True for observed graphs with entries in {0, 1}, False for
        real-valued graphs (for example averaged replicates) with entries
        in [0, 1]. None auto-detects: binary iff all entries are 0 or 1.
    storage : {"dense", "sparse", "auto"}
        Physical representation. "auto" stores compressed sparse blocks
        when overall density is below ``SPARSE_DENSITY_THRESHOLD``.
    """

    __slots__ = ("_blocks", "_n", "_K", "_T", "_directed", "_binary", "_sparse")

    def __init__(
        self,
        blocks: Mapping[tuple[int, int], np.ndarray] | np.ndarray,
        *,
        directed: bool = True,
        binary: bool | None = None,
        storage: str = "dense",
    ) -> None:
        if storage not in ("dense", "sparse", "auto"):
            raise DomainError(f"unknown storage mode {storage!r}")

        if isinstance(blocks, np.ndarray):
            if blocks.ndim != 4:
                raise GeometryError(
                    f"block array must have shape (K, T, n, n), got {blocks.shape}"
                )
            K, T = blocks.shape[:2]
            block_map = {(k, t): blocks[k, t] for k in range(K) for t in range(T)}
        else:
            block_map = {
                (int(k), int(t)): v for (k, t), v in blocks.items()
            }
            if not block_map:
                raise GeometryError("graph must contain at least one block")
            K = max(k for k, _ in block_map) + 1
            T = max(t for _, t in block_map) + 1

        dense: dict[tuple[int, int], np.ndarray] = {}
        n = None
        for k in range(K):
            for t in range(T):
                if (k, t) not in block_map:
                    raise GeometryError(f"missing block (layer={k}, time={t})")
                b = _block_to_dense(block_map[(k, t)])
                if b.ndim != 2 or b.shape[0] != b.shape[1]:
                    raise GeometryError(
                        f"block (layer={k}, time={t}) is not square: shape {b.shape}"
                    )
                if n is None:
                    n = b.shape[0]
                elif b.shape[0] != n:
                    raise GeometryError(
                        f"block (layer={k}, time={t}) has {b.shape[0]} nodes, expected {n}"
                    )
                if not np.all(np.isfinite(b)):
                    raise DomainError(f"block (layer={k}, time={t}) has non-finite entries")
                dense[(k, t)] = b
        if len(block_map) != K * T:
            extra = sorted(set(block_map) - set(dense))
            raise GeometryError(f"unexpected block keys outside the (K, T) grid: {extra}")
        assert n is not None

        values_binary = all(
            np.all((b == 0.0) | (b == 1.0)) for b in dense.values()
        )
        if binary is None:
            binary = values_binary
        elif binary and not values_binary:
            raise DomainError("binary graph has entries outside {0, 1}")
        if not binary:
            for (k, t), b in dense.items():
                if b.min(initial=0.0) < 0.0 or b.max(initial=0.0) > 1.0:
                    raise DomainError(
                        f"block (layer={k}, time={t}) has entries outside [0, 1]"
                    )
        if not directed:
            for (k, t), b in dense.items():
                if not np.array_equal(b, b.T):
                    raise GeometryError(
                        f"undirected graph but block (layer={k}, time={t}) is asymmetric"
                    )

        use_sparse = storage == "sparse"
        if storage == "auto":
            nnz = sum(np.count_nonzero(b) for b in dense.values())
            use_sparse = nnz / (K * T * n * n) < SPARSE_DENSITY_THRESHOLD

        stored: dict[tuple[int, int], object] = {}
        for key, b in dense.items():
            if use_sparse:
                sb = sparse.csr_array(b)
                sb.data.setflags(write=False)
                stored[key] = sb
            else:
                stored[key] = _as_readonly(b)

        self._blocks = stored
        self._n, self._K, self._T = n, K, T
        self._directed = bool(directed)
        self._binary = bool(binary)
        self._sparse = use_sparse

    # -- geometry ---------------------------------------------------------

    @property
    def n(self) -> int:
        return self._n

    @property
    def K(self) -> int:
        return self._K

    @property
    def T(self) -> int:
        return self._T

    @property
    def directed(self) -> bool:
        return self._directed

    @property
    def binary(self) -> bool:
        return self._binary

    @property
    def storage(self) -> str:
        return "sparse" if self._sparse else "dense"

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        kind = "binary" if self._binary else "weighted"
        return (
            f"MultiplexGraph(n={self._n}, K={self._K}, T={self._T}, "
            f"{kind}, {'directed' if self._directed else 'undirected'}, "
            f"storage={self.storage})"
        )

    # -- access -----------------------------------------------------------

    def block(self, k: int, t: int) -> np.ndarray:
        """Dense view of block (k, t); read-only for dense storage."""
        if not (0 <= k < self._K and 0 <= t < self._T):
            raise GeometryError(f"block index (layer={k}, time={t}) out of range")
        b = self._blocks[(k, t)]
        return b.toarray() if self._sparse else b  # type: ignore[union-attr]

    def to_array(self) -> np.ndarray:
        """All blocks as a (K, T, n, n) dense array."""
        out = np.empty((self._K, self._T, self._n, self._n))
        for k in range(self._K):
            for t in range(self._T):
                out[k, t] = self.block(k, t)
        return out

    def density(self) -> float:
        nnz = sum(
            b.count_nonzero() if self._sparse else np.count_nonzero(b)  # type: ignore[union-attr]
            for b in self._blocks.values()
        )
        return nnz / (self._K * self._T * self._n * self._n)

    def equals(self, other: "MultiplexGraph") -> bool:
        """Value equality: same geometry, flags, and block entries."""
        if (self._n, self._K, self._T) != (other._n, other._K, other._T):
            return False
        if (self._directed, self._binary) != (other._directed, other._binary):
            return False
        return all(
            np.array_equal(self.block(k, t), other.block(k, t))
            for k in range(self._K)
            for t in range(self._T)
        )

    def subset_layers(self, layers: Iterable[int]) -> "MultiplexGraph":
        """New graph keeping only ``layers``, renumbered in the given order."""
        layers = list(layers)
        if not layers:
            raise GeometryError("layer subset must be non-empty")
        if len(set(layers)) != len(layers):
            raise DomainError(f"duplicate layers in subset: {layers}")
        for k in layers:
            if not 0 <= k < self._K:
                raise DomainError(f"layer {k} out of range [0, {self._K})")
        blocks = {
            (i, t): self.block(k, t)
            for i, k in enumerate(layers)
            for t in range(self._T)
        }
        return MultiplexGraph(
            blocks,
            directed=self._directed,
            binary=self._binary,
            storage=self.storage,
        )


@dataclass(frozen=True)
class UnfoldedMatrix:
    """The nK x nT doubly unfolded matrix plus its block geometry.

    ``directed`` and ``binary`` record the flags of the source graph so
    that refolding restores it exactly.
    """

    data: object  # (nK, nT) ndarray or scipy CSR array
    n: int
    K: int
    T: int
    directed: bool = True
    binary: bool | None = None

    def __post_init__(self) -> None:
        rows, cols = self.data.shape
        if rows != self.n * self.K or cols != self.n * self.T:
            raise GeometryError(
                f"unfolded data has shape {self.data.shape}, expected "
                f"({self.n * self.K}, {self.n * self.T})"
            )
        if isinstance(self.data, np.ndarray):
            self.data.setflags(write=False)

    def dense(self) -> np.ndarray:
        return self.data.toarray() if sparse.issparse(self.data) else self.data


def unfold(graph: MultiplexGraph) -> UnfoldedMatrix:
    """Stack blocks vertically over layers and horizontally over time."""
    n, K, T = graph.n, graph.K, graph.T
    if graph.storage == "sparse":
        grid = [[graph._blocks[(k, t)] for t in range(T)] for k in range(K)]
        data = sparse.csr_array(sparse.bmat(grid, format="csr"))
    else:
        data = np.empty((n * K, n * T))
        for k in range(K):
            for t in range(T):
                data[k * n : (k + 1) * n, t * n : (t + 1) * n] = graph.block(k, t)
    return UnfoldedMatrix(
        data, n=n, K=K, T=T, directed=graph.directed, binary=graph.binary
    )


def refold(matrix: UnfoldedMatrix) -> MultiplexGraph:
    """Inverse of :func:`unfold`: split the matrix back into blocks."""
    n, K, T = matrix.n, matrix.K, matrix.T
    blocks = {
        (k, t): matrix.data[k * n : (k + 1) * n, t * n : (t + 1) * n]
        for k in range(K)
        for t in range(T)
    }
    return MultiplexGraph(
        blocks,
        directed=matrix.directed,
        binary=matrix.binary,
        storage="sparse" if sparse.issparse(matrix.data) else "dense",
    )


def _check_same_geometry(graphs: list[MultiplexGraph], what: str) -> None:
    first = graphs[0]
    for i, g in enumerate(graphs[1:], start=1):
        if (g.n, g.K, g.T, g.directed) != (first.n, first.K, first.T, first.directed):
            raise GeometryError(
                f"{what}: graph {i} has geometry (n={g.n}, K={g.K}, T={g.T}, "
                f"directed={g.directed}), expected (n={first.n}, K={first.K}, "
                f"T={first.T}, directed={first.directed})"
            )


def average_replicates(graphs: list[MultiplexGraph]) -> MultiplexGraph:
    """Blockwise arithmetic mean of replicate graphs.

    The result is marked real-valued (entries in [0, 1]) even when the mean
    happens to be 0/1-valued, since it represents averaged data.
    """
    if not graphs:
        raise GeometryError("cannot average an empty list of graphs")
    _check_same_geometry(graphs, "average_replicates")
    acc = graphs[0].to_array().copy()
    for g in graphs[1:]:
        acc += g.to_array()
    acc /= len(graphs)
    return MultiplexGraph(acc, directed=graphs[0].directed, binary=False)


def stack_layers(graphs: list[MultiplexGraph]) -> MultiplexGraph:
    """Concatenate the layers of several graphs sharing (n, T, directed).

    Used to treat per-condition replicates (each a single-layer dynamic
    graph) as the layers of one multiplex graph.
    """
    if not graphs:
        raise GeometryError("cannot stack an empty list of graphs")
    first = graphs[0]
    for i, g in enumerate(graphs[1:], start=1):
        if (g.n, g.T, g.directed) != (first.n, first.T, first.directed):
            raise GeometryError(
                f"stack_layers: graph {i} has (n={g.n}, T={g.T}, directed="
                f"{g.directed}), expected (n={first.n}, T={first.T}, "
                f"directed={first.directed})"
            )
    blocks: dict[tuple[int, int], np.ndarray] = {}
    offset = 0
    for g in graphs:
        for k in range(g.K):
            for t in range(g.T):
                blocks[(offset + k, t)] = g.block(k, t)
        offset += g.K
    return MultiplexGraph(
        blocks,
        directed=first.directed,
        binary=all(g.binary for g in graphs),
    )
