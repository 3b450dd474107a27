"""Scripted simulation studies: level/power grids and the replicate
testing workflow.

The studies use a two-community directed blockmodel benchmark whose
connection probabilities drift across layers at a rate ``epsilon`` and
oscillate over time in the off-diagonal entries:

    B[k, t] = [[0.25 + eps * k,            0.1 + 0.1 sin(2 pi t / T)],
               [0.1 + 0.1 sin(2 pi t / T), 0.25                    ]]

with k = 1..K, t = 1..T and static, balanced community memberships.
``epsilon = 0`` is the no-layer-difference case (the community probability
matrix then has rank 2, the benchmark's true embedding dimension);
increasing epsilon separates the layers.

The default desk-scale grid runs 200 Monte Carlo replicates with 200
bootstrap samples per test; ``paper_scale=True`` raises both to 1000,
which takes hours rather than minutes. Every Monte Carlo cell is seeded by
its (n, epsilon, replicate) address, so results are independent of the
execution schedule and of which other cells run alongside.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed
from scipy import stats
from threadpoolctl import threadpool_limits

from .embedding import duase, select_dimension
from .errors import DomainError, GeometryError, ValidationError
from .graphs import MultiplexGraph, average_replicates, stack_layers
from .inference import (
    PairwiseResults,
    TestResult,
    bootstrap_test,
    bootstrap_test_averaged,
    pairwise_tests,
)
from .rng import SeedSpec
from .samplers import BlockModelSpec, sample_dmpsbm

PAPER_SCALE_COUNT = 1000


def benchmark_spec(epsilon: float, K: int, T: int, n: int) -> BlockModelSpec:
    """Two-community benchmark blockmodel with layer drift ``epsilon``.

    Nodes are split into two (near-)equal static communities; with odd n
    the first community receives the extra node. All probabilities must
    stay inside [0, 1], which bounds ``epsilon <= 0.75 / K``.
    """
    if K < 1 or T < 1 or n < 2:
        raise DomainError(f"need K >= 1, T >= 1, n >= 2, got K={K}, T={T}, n={n}")
    B = np.empty((K, T, 2, 2))
    for k in range(K):
        for t in range(T):
            off = 0.1 + 0.1 * math.sin(2.0 * math.pi * (t + 1) / T)
            B[k, t] = [[0.25 + epsilon * (k + 1), off], [off, 0.25]]
    if B.min() < 0.0 or B.max() > 1.0:
        raise DomainError(
            f"epsilon={epsilon} pushes probabilities outside [0, 1] "
            f"(range [{B.min():.4g}, {B.max():.4g}])"
        )
    labels = np.zeros(n, dtype=np.int64)
    labels[(n + 1) // 2 :] = 1
    return BlockModelSpec.with_static_labels(B, labels, labels)


@dataclass(frozen=True)
class SimulationConfig:
    """Configuration of the level/power simulation grid."""

    n_list: tuple[int, ...] = (50, 100, 200, 300)
    epsilon_list: tuple[float, ...] = (0.0, 0.005, 0.01, 0.02)
    K: int = 10
    T: int = 3
    d: int = 2
    n_boot: int = 200
    n_monte_carlo: int = 200
    alpha: float = 0.05
    root_seed: int = 0
    backend: str | None = "iterative"
    threads: int = 1
    cells: tuple[tuple[int, float], ...] | None = None

    def __post_init__(self) -> None:
        if not self.n_list or not self.epsilon_list:
            raise DomainError("n_list and epsilon_list must be non-empty")
        if any(n < 2 for n in self.n_list):
            raise DomainError("every n must be at least 2")
        if any(e < 0 for e in self.epsilon_list):
            raise DomainError("epsilon values must be nonnegative")
        for name in ("K", "T", "d", "n_boot", "n_monte_carlo", "threads"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.cells is not None:
            grid = {(n, e) for n in self.n_list for e in self.epsilon_list}
            bad = [c for c in self.cells if (c[0], c[1]) not in grid]
            if bad:
                raise DomainError(f"cells outside the (n, epsilon) grid: {bad}")

    def at_paper_scale(self) -> "SimulationConfig":
        """Copy with Monte Carlo and bootstrap counts raised to 1000."""
        return replace(
            self, n_boot=PAPER_SCALE_COUNT, n_monte_carlo=PAPER_SCALE_COUNT
        )

    def seed(self) -> SeedSpec:
        return SeedSpec(self.root_seed)

    def active_cells(self) -> list[tuple[int, float]]:
        if self.cells is not None:
            return [(int(n), float(e)) for n, e in self.cells]
        return [(n, e) for n in self.n_list for e in self.epsilon_list]


def _epsilon_label(epsilon: float) -> int:
    # Seed-stream label for an epsilon value; exact for the grids in use.
    return int(round(epsilon * 10**9))


def _power_cell_replicate(
    n: int,
    epsilon: float,
    config: SimulationConfig,
    replicate: int,
) -> bool:
    """One Monte Carlo replicate of one (n, epsilon) cell: sample, embed,
    test; returns whether the test rejects at ``config.alpha``."""
    with threadpool_limits(limits=1):
        cell_seed = config.seed().child("power", n, _epsilon_label(epsilon))
        spec = benchmark_spec(epsilon, config.K, config.T, n)
        graph = sample_dmpsbm(spec, n, cell_seed.child("sample", replicate))
        emb = duase(graph, config.d, backend=config.backend)
        result = bootstrap_test(
            emb, config.n_boot, cell_seed.child("test", replicate),
            backend=config.backend,
        )
        return result.p_value <= config.alpha


@dataclass(frozen=True)
class PowerTable:
    """Rejection fractions (with binomial standard errors) per grid cell.

    Cells not requested in the config hold NaN.
    """

    n_values: tuple[int, ...]
    epsilon_values: tuple[float, ...]
    fractions: np.ndarray
    standard_errors: np.ndarray
    n_monte_carlo: int
    n_boot: int
    alpha: float
    seed_fingerprint: str

    def fraction(self, n: int, epsilon: float) -> float:
        i = self.n_values.index(n)
        j = self.epsilon_values.index(epsilon)
        return float(self.fractions[i, j])

    def to_csv(self, path) -> None:
        header = ["n"]
        for e in self.epsilon_values:
            header += [f"epsilon={e!r}", f"se(epsilon={e!r})"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i, n in enumerate(self.n_values):
                row: list = [n]
                for j in range(len(self.epsilon_values)):
                    row += [repr(float(self.fractions[i, j])),
                            repr(float(self.standard_errors[i, j]))]
                writer.writerow(row)


def power_table(config: SimulationConfig) -> PowerTable:
    """Monte Carlo estimate of the rejection fraction for each (n, epsilon).

    Deterministic given ``config.root_seed``: each replicate draws from
    streams addressed by its cell and index, so the same cell yields the
    same fraction no matter which other cells are requested, in which
    order, or on how many worker processes.
    """
    cells = config.active_cells()
    jobs = [
        (n, epsilon, replicate)
        for (n, epsilon) in cells
        for replicate in range(config.n_monte_carlo)
    ]
    if config.threads == 1:
        flags = [
            _power_cell_replicate(n, e, config, r) for (n, e, r) in jobs
        ]
    else:
        flags = Parallel(n_jobs=config.threads)(
            delayed(_power_cell_replicate)(n, e, config, r) for (n, e, r) in jobs
        )

    fractions = np.full((len(config.n_list), len(config.epsilon_list)), np.nan)
    errors = np.full_like(fractions, np.nan)
    m = config.n_monte_carlo
    for idx, (n, epsilon) in enumerate(cells):
        cell_flags = flags[idx * m : (idx + 1) * m]
        frac = sum(cell_flags) / m
        i = config.n_list.index(n)
        j = config.epsilon_list.index(epsilon)
        fractions[i, j] = frac
        errors[i, j] = math.sqrt(frac * (1.0 - frac) / m)
    return PowerTable(
        n_values=config.n_list,
        epsilon_values=config.epsilon_list,
        fractions=fractions,
        standard_errors=errors,
        n_monte_carlo=m,
        n_boot=config.n_boot,
        alpha=config.alpha,
        seed_fingerprint=config.seed().fingerprint(),
    )


def _null_pvalue_replicate(
    n: int, config: SimulationConfig, replicate: int
) -> float:
    with threadpool_limits(limits=1):
        cell_seed = config.seed().child("nullcdf", n)
        spec = benchmark_spec(0.0, config.K, config.T, n)
        graph = sample_dmpsbm(spec, n, cell_seed.child("sample", replicate))
        emb = duase(graph, config.d, backend=config.backend)
        result = bootstrap_test(
            emb, config.n_boot, cell_seed.child("test", replicate),
            backend=config.backend,
        )
        return result.p_value


@dataclass(frozen=True)
class NullPvalueStudy:
    """Null-hypothesis p-value samples per graph size, with their
    Kolmogorov-Smirnov distance to the uniform distribution."""

    n_values: tuple[int, ...]
    p_values: dict[int, np.ndarray] = field(repr=False)
    ks_distances: dict[int, float] = field(repr=False)
    n_boot: int
    n_monte_carlo: int

    def write_csv(self, out_dir) -> list[str]:
        """One p-value file per n plus a KS summary; returns filenames."""
        import os

        written = []
        for n in self.n_values:
            name = f"pvalues_n{n}.csv"
            with open(os.path.join(out_dir, name), "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["p_value"])
                for p in self.p_values[n]:
                    writer.writerow([repr(float(p))])
            written.append(name)
        with open(os.path.join(out_dir, "ks_summary.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "ks_distance", "replicates", "n_boot"])
            for n in self.n_values:
                writer.writerow(
                    [n, repr(self.ks_distances[n]), self.n_monte_carlo, self.n_boot]
                )
        written.append("ks_summary.csv")
        return written


def null_pvalue_cdf(config: SimulationConfig) -> NullPvalueStudy:
    """Sample the p-value distribution under the no-difference hypothesis
    (epsilon is forced to zero) for each n in the config."""
    p_values: dict[int, np.ndarray] = {}
    ks: dict[int, float] = {}
    for n in config.n_list:
        jobs = range(config.n_monte_carlo)
        if config.threads == 1:
            vals = [_null_pvalue_replicate(n, config, r) for r in jobs]
        else:
            vals = Parallel(n_jobs=config.threads)(
                delayed(_null_pvalue_replicate)(n, config, r) for r in jobs
            )
        arr = np.asarray(vals)
        p_values[n] = arr
        ks[n] = float(stats.kstest(arr, "uniform").statistic)
    return NullPvalueStudy(
        n_values=config.n_list,
        p_values=p_values,
        ks_distances=ks,
        n_boot=config.n_boot,
        n_monte_carlo=config.n_monte_carlo,
    )


@dataclass(frozen=True)
class WorkflowReport:
    """Outcome of the three-stage replicate workflow.

    Stage 1 tests replicates against each other within every condition
    (replicates as layers). Stage 2 averages replicates per condition and
    runs the global averaged-bootstrap test across conditions. Stage 3
    runs all pairwise condition tests and counts rejections per condition.
    Stages 2 and 3 are skipped (with a status message) when only one
    condition is supplied.
    """

    within_condition: list[TestResult]
    global_test: TestResult | None
    pairwise: PairwiseResults | None
    statuses: list[str]
    n_conditions: int
    n_replicates: int
    alpha: float

    def most_rejected_layer(self) -> int | None:
        """Condition index with strictly the most pairwise rejections, or
        None if stage 3 was skipped or the maximum is tied."""
        if self.pairwise is None:
            return None
        counts = self.pairwise.rejections_per_layer()
        top = counts.max()
        winners = np.flatnonzero(counts == top)
        return int(winners[0]) if winners.size == 1 else None

    def to_dict(self) -> dict:
        return {
            "n_conditions": self.n_conditions,
            "n_replicates": self.n_replicates,
            "alpha": self.alpha,
            "statuses": self.statuses,
            "within_condition": [r.to_dict() for r in self.within_condition],
            "global_test": self.global_test.to_dict() if self.global_test else None,
            "pairwise": self.pairwise.to_dict() if self.pairwise else None,
        }


def replicate_workflow(
    conditions: list[list[MultiplexGraph]],
    n_boot: int,
    alpha: float,
    seed: SeedSpec,
    *,
    d: int | None = None,
    max_d: int | None = None,
    backend: str | None = None,
    threads: int = 1,
) -> WorkflowReport:
    """Three-stage testing workflow for replicated dynamic graphs.

    ``conditions`` holds, per experimental condition, a list of replicate
    graphs; each replicate must be a single-layer dynamic graph and all
    graphs must share geometry. The embedding dimension is re-selected per
    assembled graph unless ``d`` is given.
    """
    if not conditions or any(not group for group in conditions):
        raise ValidationError("every condition needs at least one replicate graph")
    all_graphs = [g for group in conditions for g in group]
    first = all_graphs[0]
    for g in all_graphs:
        if g.K != 1:
            raise ValidationError(
                "replicates must be single-layer dynamic graphs (K=1); "
                f"got K={g.K}"
            )
        if (g.n, g.T, g.directed) != (first.n, first.T, first.directed):
            raise GeometryError(
                "replicate graphs disagree on geometry: "
                f"(n={g.n}, T={g.T}, directed={g.directed}) vs "
                f"(n={first.n}, T={first.T}, directed={first.directed})"
            )
    counts = {len(group) for group in conditions}
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")

    statuses: list[str] = []
    within: list[TestResult] = []
    for c, group in enumerate(conditions):
        if len(group) < 2:
            statuses.append(
                f"condition {c}: single replicate, within-condition test skipped"
            )
            continue
        stacked = stack_layers(group)
        d_c = d if d is not None else select_dimension(stacked, max_d=max_d, backend=backend)
        emb = duase(stacked, d_c, backend=backend)
        within.append(
            bootstrap_test(
                emb, n_boot, seed.child("within", c),
                threads=threads, backend=backend,
            )
        )

    if len(conditions) < 2:
        statuses.append(
            "single condition: global and pairwise stages skipped"
        )
        return WorkflowReport(
            within_condition=within,
            global_test=None,
            pairwise=None,
            statuses=statuses,
            n_conditions=len(conditions),
            n_replicates=len(conditions[0]),
            alpha=alpha,
        )

    if len(counts) != 1:
        raise ValidationError(
            f"conditions have unequal replicate counts {sorted(counts)}; the "
            "averaged bootstrap needs a single replicate count"
        )
    n_rep = counts.pop()

    averaged = stack_layers([average_replicates(group) for group in conditions])
    d_g = d if d is not None else select_dimension(averaged, max_d=max_d, backend=backend)
    emb = duase(averaged, d_g, backend=backend)
    global_test = bootstrap_test_averaged(
        emb, n_boot, n_rep, seed.child("global"), threads=threads, backend=backend
    )

    pw = pairwise_tests(
        averaged,
        n_boot,
        seed,
        variant="averaged",
        n_rep=n_rep,
        d=d,
        max_d=max_d,
        alpha=alpha,
        backend=backend,
        threads=threads,
    )
    return WorkflowReport(
        within_condition=within,
        global_test=global_test,
        pairwise=pw,
        statuses=statuses,
        n_conditions=len(conditions),
        n_replicates=n_rep,
        alpha=alpha,
    )


def synthetic_conditions(
    epsilons: list[float],
    n_replicates: int,
    n: int,
    T: int,
    seed: SeedSpec,
) -> list[list[MultiplexGraph]]:
    """Benchmark fixture for the replicate workflow: one single-layer
    benchmark model per condition (drift ``epsilons[c]``), sampled
    ``n_replicates`` times."""
    if n_replicates < 1:
        raise DomainError(f"n_replicates must be at least 1, got {n_replicates}")
    out = []
    for c, eps in enumerate(epsilons):
        spec = benchmark_spec(eps, 1, T, n)
        out.append(
            [
                sample_dmpsbm(spec, n, seed.child("condition", c, r))
                for r in range(n_replicates)
            ]
        )
    return out
