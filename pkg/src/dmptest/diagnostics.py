"""Empirical checks of the embedding theory: alignment to known latent
positions, error-versus-size sweeps, and Gram matrix stability.

The embedding is identified only up to an invertible map, so comparisons
with ground truth first solve a least-squares alignment. The theory bounds
the per-node (two-to-infinity) error by a multiple of ``sqrt(log n / n)``;
the sweep therefore records errors scaled by ``sqrt(n / log n)``, which
should stay bounded as n grows. These are trend diagnostics, not proofs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .embedding import duase
from .errors import DegenerateInputError, DomainError, GeometryError
from .linalg import two_to_infinity_norm
from .rng import SeedSpec
from .samplers import BlockModelSpec, sample_dmpsbm, sbm_to_latents


def align_least_squares(Xhat: np.ndarray, X: np.ndarray) -> np.ndarray:
    """The d x d matrix Q minimising ``||Xhat @ Q - X||_F``.

    Solved via least squares, so the residual is orthogonal to the columns
    of ``Xhat``. ``Xhat`` must have full column rank.
    """
    Xhat = np.asarray(Xhat, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if Xhat.shape != X.shape or Xhat.ndim != 2:
        raise GeometryError(
            f"alignment needs matching 2-D shapes, got {Xhat.shape} and {X.shape}"
        )
    Q, _, rank, _ = np.linalg.lstsq(Xhat, X, rcond=None)
    if rank < Xhat.shape[1]:
        raise DegenerateInputError(
            f"alignment source is rank-deficient (rank {rank} < {Xhat.shape[1]})"
        )
    return Q


@dataclass(frozen=True)
class ConsistencyCurve:
    """Normalised per-node embedding errors across graph sizes.

    For each n: quantiles over seeds of
    ``sqrt(n / log n) * ||Xhat @ Q - X||_{2->inf}``, plus the median
    eigenvalues of the scaled Gram matrix ``Xhat.T @ Xhat / n`` (a
    stability diagnostic: successive values should approach a limit).
    """

    n_values: tuple[int, ...]
    medians: np.ndarray
    lower_quartiles: np.ndarray
    upper_quartiles: np.ndarray
    gram_eigenvalues: np.ndarray  # (len(n_values), d), descending per row
    n_seeds: int
    d: int

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise DomainError(f"n values must be strictly increasing: {self.n_values}")
        ordered = np.all(
            (self.lower_quartiles <= self.medians)
            & (self.medians <= self.upper_quartiles)
        )
        if not ordered:
            raise DomainError("quantiles out of order")

    def rows(self) -> list[dict]:
        out = []
        for i, n in enumerate(self.n_values):
            row = {
                "n": n,
                "median": self.medians[i],
                "q25": self.lower_quartiles[i],
                "q75": self.upper_quartiles[i],
                "n_seeds": self.n_seeds,
            }
            for j in range(self.d):
                row[f"gram_eig_{j + 1}"] = self.gram_eigenvalues[i, j]
            out.append(row)
        return out

    def to_csv(self, path) -> None:
        rows = self.rows()
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            for row in rows:
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def consistency_sweep(
    spec_factory: Callable[[int], BlockModelSpec],
    n_list: list[int],
    n_seeds: int,
    seed: SeedSpec,
    *,
    noiseless: bool = False,
    backend: str | None = None,
) -> ConsistencyCurve:
    """Sample, embed, align, and record normalised errors for each n.

    ``spec_factory`` maps a node count to a blockmodel specification (the
    specification's label arrays are tied to n, hence the callable). With
    ``noiseless=True`` the exact probability blocks are embedded instead of
    sampled graphs, which should drive the error to numerical zero.
    """
    if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise DomainError(f"n_list must be non-empty and strictly increasing: {n_list}")
    if n_seeds < 1:
        raise DomainError(f"n_seeds must be at least 1, got {n_seeds}")

    medians, q25s, q75s, gram_rows = [], [], [], []
    d = None
    for n in n_list:
        spec = spec_factory(n)
        latents = sbm_to_latents(spec)
        if latents.n != n:
            raise GeometryError(
                f"spec_factory({n}) produced labels for {latents.n} nodes"
            )
        if d is None:
            d = latents.d
        elif latents.d != d:
            raise GeometryError(
                f"latent dimension changed across the sweep: {latents.d} != {d}"
            )
        scale = math.sqrt(n / math.log(n))
        errors = np.empty(n_seeds)
        grams = np.empty((n_seeds, d))
        for s in range(n_seeds):
            if noiseless:
                graph = latents.probability_graph()
            else:
                graph = sample_dmpsbm(spec, n, seed.child("sweep", n, s))
            emb = duase(graph, d, backend=backend)
            Q = align_least_squares(emb.Xhat, latents.X)
            errors[s] = scale * two_to_infinity_norm(emb.Xhat @ Q - latents.X)
            grams[s] = np.sort(np.linalg.eigvalsh(emb.Xhat.T @ emb.Xhat / n))[::-1]
        q25, med, q75 = np.quantile(errors, [0.25, 0.5, 0.75])
        medians.append(med)
        q25s.append(q25)
        q75s.append(q75)
        gram_rows.append(np.median(grams, axis=0))
    assert d is not None
    return ConsistencyCurve(
        n_values=tuple(n_list),
        medians=np.asarray(medians),
        lower_quartiles=np.asarray(q25s),
        upper_quartiles=np.asarray(q75s),
        gram_eigenvalues=np.vstack(gram_rows),
        n_seeds=n_seeds,
        d=d,
    )
