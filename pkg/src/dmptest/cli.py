"""Command line interface.

Subcommands cover the full pipeline: sampling synthetic graphs, embedding,
the single/averaged bootstrap tests, pairwise layer tests, the scripted
simulation studies, and the replicate-testing workflow. Every invocation
writes its artifacts under ``--out`` together with a ``run.json`` manifest
recording the subcommand, arguments, configuration, package versions, and
timing; re-running the recorded argv reproduces the numeric outputs
byte for byte.

Exit codes: 0 on success, 2 for validation/configuration errors, 1 for
unexpected runtime failures. Errors are printed to stderr as single-line
``error: kind=<kind> message="..."`` records.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .diagnostics import consistency_sweep
from .embedding import duase, select_dimension
from .errors import (
    DegenerateInputError,
    DomainError,
    GeometryError,
    ValidationError,
)
from .experiments import (
    SimulationConfig,
    benchmark_spec,
    null_pvalue_cdf,
    power_table,
    replicate_workflow,
    synthetic_conditions,
)
from .graphs import MultiplexGraph
from .inference import bootstrap_test, bootstrap_test_averaged, pairwise_tests
from .rng import SeedSpec
from .samplers import sample_dmprdpg, sample_dmpsbm

logger = logging.getLogger(__name__)

_VALIDATION_ERRORS = (ValidationError, GeometryError, DomainError, DegenerateInputError)

# Parameter names each subcommand accepts; used to reject unknown keys when
# a recorded configuration is replayed.
_SCHEMAS: dict[str, set[str]] = {
    "simulate": {
        "model", "epsilon", "n", "K", "T", "latents", "graph_format",
        "out", "seed", "threads", "backend", "verbose",
    },
    "embed": {
        "in_path", "format", "directed", "d", "max_d",
        "out", "seed", "threads", "backend", "verbose",
    },
    "test": {
        "in_path", "format", "directed", "d", "max_d", "n_boot",
        "out", "seed", "threads", "backend", "verbose",
    },
    "test-averaged": {
        "in_path", "format", "directed", "d", "max_d", "n_boot", "n_rep",
        "out", "seed", "threads", "backend", "verbose",
    },
    "pairwise": {
        "in_path", "format", "directed", "d", "max_d", "n_boot", "alpha",
        "variant", "n_rep", "out", "seed", "threads", "backend", "verbose",
    },
    "reproduce-table1": {
        "paper_scale", "n_list", "epsilon_list", "n_boot", "monte_carlo",
        "alpha", "d", "K", "T", "out", "seed", "threads", "backend", "verbose",
    },
    "null-cdf": {
        "n_list", "monte_carlo", "n_boot", "d", "K", "T",
        "out", "seed", "threads", "backend", "verbose",
    },
    "consistency-sweep": {
        "epsilon", "K", "T", "n_list", "n_seeds", "noiseless",
        "out", "seed", "threads", "backend", "verbose",
    },
    "replicate-workflow": {
        "in_path", "synthetic", "n", "T", "n_replicates", "n_boot", "alpha",
        "d", "max_d", "out", "seed", "threads", "backend", "verbose",
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Validated parameters of one CLI invocation."""

    subcommand: str
    params: dict

    def __post_init__(self) -> None:
        if self.subcommand not in _SCHEMAS:
            raise ValidationError(f"unknown subcommand {self.subcommand!r}")
        unknown = set(self.params) - _SCHEMAS[self.subcommand]
        if unknown:
            raise ValidationError(
                f"unknown configuration keys for {self.subcommand}: {sorted(unknown)}"
            )

    @staticmethod
    def from_dict(payload: dict) -> "RunConfig":
        if set(payload) != {"subcommand", "params"}:
            raise ValidationError(
                "run configuration must have exactly the keys "
                "{'subcommand', 'params'}"
            )
        return RunConfig(payload["subcommand"], dict(payload["params"]))

    def to_dict(self) -> dict:
        return {"subcommand": self.subcommand, "params": self.params}


def _str2bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {value!r}")


def _dimension(value: str) -> int | None:
    if value.strip().lower() == "auto":
        return None
    try:
        return int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"dimension must be an integer or 'auto', got {value!r}"
        ) from None


def _int_list(value: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in value.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a comma-separated integer list, got {value!r}"
        ) from None


def _float_list(value: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in value.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a comma-separated number list, got {value!r}"
        ) from None


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
    parser.add_argument(
        "--threads", type=int, default=1,
        help="worker processes for bootstrap/Monte Carlo loops (default 1)",
    )
    parser.add_argument(
        "--backend", choices=("auto", "dense", "randomized", "iterative"), default="auto",
        help="SVD backend (default: auto by matrix size)",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")


def _add_graph_input(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--in", dest="in_path", required=True, help="input graph path")
    parser.add_argument(
        "--format", choices=io.GRAPH_FORMATS, default="container",
        help="input graph format (default container)",
    )
    parser.add_argument(
        "--directed", type=_str2bool, default=None,
        help="override the stored directedness flag",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dmptest",
        description="Layer-difference testing for dynamic multiplex graphs.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("simulate", help="sample a synthetic multiplex graph to disk")
    p.add_argument(
        "--model", choices=("benchmark", "latents"), default="benchmark",
        help="benchmark blockmodel or latent positions loaded from disk",
    )
    p.add_argument("--epsilon", type=float, default=0.0, help="benchmark layer drift")
    p.add_argument("--n", type=int, default=100, help="benchmark node count")
    p.add_argument("--K", type=int, default=10, help="benchmark layer count")
    p.add_argument("--T", type=int, default=3, help="benchmark time count")
    p.add_argument("--latents", default=None, help="latent pair directory")
    p.add_argument(
        "--graph-format", dest="graph_format", choices=io.GRAPH_FORMATS,
        default="container", help="output graph format",
    )
    _add_common(p)

    p = sub.add_parser("embed", help="embed a graph, optionally selecting d")
    _add_graph_input(p)
    p.add_argument("--d", type=_dimension, default=None, help="dimension or 'auto'")
    p.add_argument("--max-d", dest="max_d", type=int, default=None,
                   help="cap for automatic dimension selection")
    _add_common(p)

    p = sub.add_parser("test", help="bootstrap layer-difference test")
    _add_graph_input(p)
    p.add_argument("--d", type=_dimension, default=None, help="dimension or 'auto'")
    p.add_argument("--max-d", dest="max_d", type=int, default=None)
    p.add_argument("--n-boot", dest="n_boot", type=int, default=200)
    _add_common(p)

    p = sub.add_parser(
        "test-averaged", help="bootstrap test for replicate-averaged graphs"
    )
    _add_graph_input(p)
    p.add_argument("--d", type=_dimension, default=None, help="dimension or 'auto'")
    p.add_argument("--max-d", dest="max_d", type=int, default=None)
    p.add_argument("--n-boot", dest="n_boot", type=int, default=200)
    p.add_argument("--n-rep", dest="n_rep", type=int, required=True,
                   help="replicates averaged into each block")
    _add_common(p)

    p = sub.add_parser("pairwise", help="all unordered layer-pair tests")
    _add_graph_input(p)
    p.add_argument("--d", type=_dimension, default=None, help="dimension or 'auto'")
    p.add_argument("--max-d", dest="max_d", type=int, default=None)
    p.add_argument("--n-boot", dest="n_boot", type=int, default=200)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--variant", choices=("plain", "averaged"), default="plain")
    p.add_argument("--n-rep", dest="n_rep", type=int, default=None)
    _add_common(p)

    p = sub.add_parser(
        "reproduce-table1",
        help="rejection-fraction grid of the benchmark simulation study",
    )
    p.add_argument("--paper-scale", dest="paper_scale", type=_str2bool, default=False,
                   help="raise Monte Carlo and bootstrap counts to 1000 (hours)")
    p.add_argument("--n-list", dest="n_list", type=_int_list,
                   default=(50, 100, 200, 300))
    p.add_argument("--epsilon-list", dest="epsilon_list", type=_float_list,
                   default=(0.0, 0.005, 0.01, 0.02))
    p.add_argument("--n-boot", dest="n_boot", type=int, default=200)
    p.add_argument("--monte-carlo", dest="monte_carlo", type=int, default=200)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--T", type=int, default=3)
    _add_common(p)

    p = sub.add_parser("null-cdf", help="null p-value distribution per graph size")
    p.add_argument("--n-list", dest="n_list", type=_int_list, default=(50, 100))
    p.add_argument("--monte-carlo", dest="monte_carlo", type=int, default=200)
    p.add_argument("--n-boot", dest="n_boot", type=int, default=200)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--T", type=int, default=3)
    _add_common(p)

    p = sub.add_parser(
        "consistency-sweep", help="normalised embedding error versus graph size"
    )
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--T", type=int, default=3)
    p.add_argument("--n-list", dest="n_list", type=_int_list,
                   default=(50, 100, 200, 400))
    p.add_argument("--n-seeds", dest="n_seeds", type=int, default=20)
    p.add_argument("--noiseless", type=_str2bool, default=False,
                   help="embed exact probabilities instead of sampled graphs")
    _add_common(p)

    p = sub.add_parser(
        "replicate-workflow",
        help="within-condition, global, and pairwise tests on replicate groups",
    )
    p.add_argument("--in", dest="in_path", default=None,
                   help="directory of condition subdirectories with .npz replicates")
    p.add_argument("--synthetic", type=_float_list, default=None,
                   help="comma-separated drift per synthetic condition")
    p.add_argument("--n", type=int, default=100, help="synthetic node count")
    p.add_argument("--T", type=int, default=3, help="synthetic time count")
    p.add_argument("--n-replicates", dest="n_replicates", type=int, default=5)
    p.add_argument("--n-boot", dest="n_boot", type=int, default=200)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--d", type=_dimension, default=None, help="dimension or 'auto'")
    p.add_argument("--max-d", dest="max_d", type=int, default=None)
    _add_common(p)

    return parser


def _load_graph(args: argparse.Namespace) -> MultiplexGraph:
    return io.ingest(args.in_path, args.format, directed=args.directed)


def _resolve_dimension(args: argparse.Namespace, graph: MultiplexGraph) -> int:
    if args.d is not None:
        return args.d
    d = select_dimension(graph, max_d=args.max_d, backend=args.backend)
    print(f"selected d={d}")
    return d


def _cmd_simulate(args, out: Path) -> list[str]:
    seed = SeedSpec(args.seed).child("simulate")
    if args.model == "benchmark":
        spec = benchmark_spec(args.epsilon, args.K, args.T, args.n)
        graph = sample_dmpsbm(spec, args.n, seed)
    else:
        if args.latents is None:
            raise ValidationError("--model latents requires --latents DIR")
        graph = sample_dmprdpg(io.load_latents(args.latents), seed)
    name = "graph.npz" if args.graph_format == "container" else "graph"
    io.export_graph(graph, out / name, args.graph_format)
    print(f"sampled graph: n={graph.n} K={graph.K} T={graph.T} "
          f"density={graph.density():.4f}")
    return [name]


def _cmd_embed(args, out: Path) -> list[str]:
    graph = _load_graph(args)
    d = _resolve_dimension(args, graph)
    emb = duase(graph, d, backend=args.backend)
    io.save_embedding(emb, out / "embedding")
    print(f"embedded at d={d}: Xhat {emb.Xhat.shape}, Yhat {emb.Yhat.shape}")
    return ["embedding"]


def _cmd_test(args, out: Path, averaged: bool) -> list[str]:
    graph = _load_graph(args)
    d = _resolve_dimension(args, graph)
    emb = duase(graph, d, backend=args.backend)
    seed = SeedSpec(args.seed)
    if averaged:
        result = bootstrap_test_averaged(
            emb, args.n_boot, args.n_rep, seed,
            threads=args.threads, backend=args.backend,
        )
    else:
        result = bootstrap_test(
            emb, args.n_boot, seed, threads=args.threads, backend=args.backend
        )
    io.write_test_result(result, out / "result.json")
    print(f"statistic={result.statistic:.6g} p_value={result.p_value:.6g} "
          f"(n_boot={result.n_boot})")
    return ["result.json"]


def _cmd_pairwise(args, out: Path) -> list[str]:
    graph = _load_graph(args)
    results = pairwise_tests(
        graph,
        args.n_boot,
        SeedSpec(args.seed),
        variant=args.variant,
        n_rep=args.n_rep,
        d=args.d,
        max_d=args.max_d,
        alpha=args.alpha,
        backend=args.backend,
        threads=args.threads,
    )
    artifacts = io.write_pairwise_outputs(results, out)
    counts = results.rejections_per_layer()
    print(f"pairwise tests on K={graph.K} layers: "
          f"rejections per layer {counts.tolist()} at alpha={args.alpha}")
    return artifacts


def _simulation_config(args) -> SimulationConfig:
    config = SimulationConfig(
        n_list=tuple(args.n_list),
        epsilon_list=tuple(getattr(args, "epsilon_list", (0.0,))),
        K=args.K,
        T=args.T,
        d=args.d,
        n_boot=args.n_boot,
        n_monte_carlo=args.monte_carlo,
        alpha=getattr(args, "alpha", 0.05),
        root_seed=args.seed,
        backend=args.backend,
        threads=args.threads,
    )
    if getattr(args, "paper_scale", False):
        config = config.at_paper_scale()
    return config


def _cmd_table(args, out: Path) -> list[str]:
    table = power_table(_simulation_config(args))
    table.to_csv(out / "table1.csv")
    print(f"rejection fractions ({table.n_monte_carlo} Monte Carlo replicates, "
          f"n_boot={table.n_boot}):")
    for i, n in enumerate(table.n_values):
        cells = ", ".join(
            f"eps={e}: {table.fractions[i, j]:.3f}"
            for j, e in enumerate(table.epsilon_values)
            if not np.isnan(table.fractions[i, j])
        )
        print(f"  n={n}: {cells}")
    return ["table1.csv"]


def _cmd_null_cdf(args, out: Path) -> list[str]:
    study = null_pvalue_cdf(_simulation_config(args))
    artifacts = study.write_csv(out)
    for n in study.n_values:
        print(f"n={n}: KS distance to uniform {study.ks_distances[n]:.4f} "
              f"({study.n_monte_carlo} replicates)")
    return artifacts


def _cmd_consistency(args, out: Path) -> list[str]:
    curve = consistency_sweep(
        lambda n: benchmark_spec(args.epsilon, args.K, args.T, n),
        list(args.n_list),
        args.n_seeds,
        SeedSpec(args.seed),
        noiseless=args.noiseless,
        backend=args.backend,
    )
    curve.to_csv(out / "consistency.csv")
    for i, n in enumerate(curve.n_values):
        print(f"n={n}: median normalised error {curve.medians[i]:.4f}")
    return ["consistency.csv"]


def _load_condition_groups(path: Path) -> list:
    if not path.is_dir():
        raise ValidationError(f"{path}: condition directory not found")
    groups = []
    for cond_dir in sorted(p for p in path.iterdir() if p.is_dir()):
        replicates = [
            io.ingest(f, "container") for f in sorted(cond_dir.glob("*.npz"))
        ]
        if not replicates:
            raise ValidationError(f"{cond_dir}: no .npz replicate containers")
        groups.append(replicates)
    if not groups:
        raise ValidationError(f"{path}: no condition subdirectories")
    return groups


def _cmd_workflow(args, out: Path) -> list[str]:
    seed = SeedSpec(args.seed)
    if (args.in_path is None) == (args.synthetic is None):
        raise ValidationError("provide exactly one of --in or --synthetic")
    if args.synthetic is not None:
        conditions = synthetic_conditions(
            list(args.synthetic), args.n_replicates, args.n, args.T,
            seed.child("synthetic"),
        )
    else:
        conditions = _load_condition_groups(Path(args.in_path))
    report = replicate_workflow(
        conditions,
        args.n_boot,
        args.alpha,
        seed,
        d=args.d,
        max_d=args.max_d,
        backend=args.backend,
        threads=args.threads,
    )
    (out / "workflow.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    artifacts = ["workflow.json"]
    if report.pairwise is not None:
        artifacts += io.write_pairwise_outputs(report.pairwise, out)
    for status in report.statuses:
        print(f"status: {status}")
    for c, res in enumerate(report.within_condition):
        print(f"within condition {c}: p={res.p_value:.4g}")
    if report.global_test is not None:
        print(f"global test: p={report.global_test.p_value:.4g}")
    if report.pairwise is not None:
        print(f"rejections per condition: "
              f"{report.pairwise.rejections_per_layer().tolist()}")
    return artifacts


_HANDLERS = {
    "simulate": _cmd_simulate,
    "embed": _cmd_embed,
    "test": lambda args, out: _cmd_test(args, out, averaged=False),
    "test-averaged": lambda args, out: _cmd_test(args, out, averaged=True),
    "pairwise": _cmd_pairwise,
    "reproduce-table1": _cmd_table,
    "null-cdf": _cmd_null_cdf,
    "consistency-sweep": _cmd_consistency,
    "replicate-workflow": _cmd_workflow,
}


def cli_dispatch(argv: list[str]) -> int:
    """Parse ``argv``, run the requested subcommand, write artifacts and
    the run manifest. Returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help and bad arguments
        return int(exc.code or 0)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if getattr(args, "backend", None) == "auto":
        args.backend = None
    started = time.time()
    try:
        config = RunConfig(args.subcommand, {
            k: v for k, v in vars(args).items() if k != "subcommand"
        })
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        artifacts = _HANDLERS[args.subcommand](args, out)
        io.write_run_manifest(
            out,
            subcommand=args.subcommand,
            argv=list(argv),
            config=_jsonable(config.to_dict()),
            started=started,
            artifacts=artifacts + ["run.json"],
        )
    except _VALIDATION_ERRORS as exc:
        print(f'error: kind=validation message="{exc}"', file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f'error: kind=runtime message="{exc}"', file=sys.stderr)
        return 1
    return 0


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def main() -> None:  # pragma: no cover - thin wrapper
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":  # pragma: no cover
    main()
