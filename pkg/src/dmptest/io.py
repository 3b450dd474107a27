"""Graph ingestion and artifact persistence.

Three interchange formats are supported for graphs:

* ``edge-list-dir`` — a directory with one CSV per block, named
  ``layer-<k>_time-<t>.csv`` (1-indexed), header ``source,target`` or
  ``source,target,weight``, node ids 1-indexed. An optional
  ``manifest.json`` fixes ``n``, ``K``, ``T``, ``directed``, ``binary``;
  anything absent is inferred (directedness defaults to directed).
* ``dense-csv-dir`` — same naming and manifest, each file an n x n comma
  separated numeric grid with no header.
* ``container`` — a single ``.npz`` file holding the block array and
  geometry, convenient for programmatic round trips.

Embeddings and latent position pairs persist as CSV matrices with 17
significant digits (lossless for double precision once parsed) plus a JSON
geometry sidecar. Test results and workflow reports serialise to JSON.
Every CLI run also writes a ``run.json`` manifest recording the exact
configuration, seed, package versions, and timing.
"""

from __future__ import annotations

import csv
import json
import re
import sys
import time
from pathlib import Path

import numpy as np

from .embedding import DuaseEmbedding
from .errors import ValidationError
from .graphs import MultiplexGraph
from .inference import PairwiseResults, TestResult
from .samplers import LatentPair

BLOCK_FILE_PATTERN = re.compile(r"layer-(\d+)_time-(\d+)\.csv\Z")
MANIFEST_NAME = "manifest.json"
_MANIFEST_KEYS = {"n", "K", "T", "directed", "binary"}
FLOAT_FORMAT = "%.17g"

GRAPH_FORMATS = ("edge-list-dir", "dense-csv-dir", "container")


def _format_float(x: float) -> str:
    return FLOAT_FORMAT % x


def _read_manifest(directory: Path) -> dict:
    path = directory / MANIFEST_NAME
    if not path.exists():
        return {}
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON manifest: {exc}") from exc
    if not isinstance(manifest, dict):
        raise ValidationError(f"{path}: manifest must be a JSON object")
    unknown = set(manifest) - _MANIFEST_KEYS
    if unknown:
        raise ValidationError(f"{path}: unknown manifest keys {sorted(unknown)}")
    return manifest


def _scan_block_files(directory: Path) -> dict[tuple[int, int], Path]:
    files = {}
    for entry in sorted(directory.iterdir()):
        m = BLOCK_FILE_PATTERN.match(entry.name)
        if m:
            k, t = int(m.group(1)), int(m.group(2))
            if k < 1 or t < 1:
                raise ValidationError(
                    f"{entry}: layer/time indices are 1-based, got ({k}, {t})"
                )
            files[(k - 1, t - 1)] = entry
    if not files:
        raise ValidationError(
            f"{directory}: no block files matching 'layer-<k>_time-<t>.csv'"
        )
    return files


def _resolve_geometry(
    files: dict[tuple[int, int], Path], manifest: dict, directory: Path
) -> tuple[int, int]:
    K = int(manifest.get("K", max(k for k, _ in files) + 1))
    T = int(manifest.get("T", max(t for _, t in files) + 1))
    for k in range(K):
        for t in range(T):
            if (k, t) not in files:
                raise ValidationError(
                    f"{directory}: missing block file layer-{k + 1}_time-{t + 1}.csv"
                )
    extra = [key for key in files if key[0] >= K or key[1] >= T]
    if extra:
        k, t = extra[0]
        raise ValidationError(
            f"{directory}: block file layer-{k + 1}_time-{t + 1}.csv outside the "
            f"declared K={K}, T={T} grid"
        )
    return K, T


def _parse_edge_file(path: Path) -> list[tuple[int, int, float, int]]:
    """Rows of (source, target, weight, line_number), 1-indexed nodes."""
    edges = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file (header required)") from None
        header = [h.strip() for h in header]
        if header not in (["source", "target"], ["source", "target", "weight"]):
            raise ValidationError(
                f"{path}:1: header must be 'source,target[,weight]', got {header}"
            )
        has_weight = len(header) == 3
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValidationError(
                    f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                s, t = int(row[0]), int(row[1])
            except ValueError:
                raise ValidationError(
                    f"{path}:{line_no}: node ids must be integers, got "
                    f"{row[0]!r}, {row[1]!r}"
                ) from None
            if has_weight:
                try:
                    w = float(row[2])
                except ValueError:
                    raise ValidationError(
                        f"{path}:{line_no}: weight must be a number, got {row[2]!r}"
                    ) from None
            else:
                w = 1.0
            if not 0.0 <= w <= 1.0:
                raise ValidationError(
                    f"{path}:{line_no}: weight {w} outside [0, 1]"
                )
            edges.append((s, t, w, line_no))
    return edges


def _edges_to_block(
    path: Path,
    edges: list[tuple[int, int, float, int]],
    n: int,
    directed: bool,
) -> np.ndarray:
    block = np.zeros((n, n))
    seen: dict[tuple[int, int], tuple[float, int]] = {}
    for s, t, w, line_no in edges:
        if not (1 <= s <= n and 1 <= t <= n):
            raise ValidationError(
                f"{path}:{line_no}: edge ({s}, {t}) outside node range [1, {n}]"
            )
        targets = [(s - 1, t - 1)] if directed else [(s - 1, t - 1), (t - 1, s - 1)]
        for key in targets:
            if key in seen and seen[key][0] != w:
                raise ValidationError(
                    f"{path}:{line_no}: edge ({s}, {t}) conflicts with value "
                    f"{seen[key][0]} set on line {seen[key][1]}"
                )
            seen[key] = (w, line_no)
            block[key] = w
    return block


def _ingest_edge_list_dir(
    directory: Path, directed: bool | None, binary: bool | None
) -> MultiplexGraph:
    manifest = _read_manifest(directory)
    files = _scan_block_files(directory)
    _resolve_geometry(files, manifest, directory)
    if directed is None:
        directed = bool(manifest.get("directed", True))
    if binary is None and "binary" in manifest:
        binary = bool(manifest["binary"])

    parsed = {key: _parse_edge_file(path) for key, path in files.items()}
    if "n" in manifest:
        n = int(manifest["n"])
        if n < 1:
            raise ValidationError(f"{directory}: manifest n={n} must be positive")
    else:
        ids = [x for edges in parsed.values() for s, t, _, _ in edges for x in (s, t)]
        if not ids:
            raise ValidationError(
                f"{directory}: no edges and no manifest; node count unknown"
            )
        n = max(ids)
    blocks = {
        key: _edges_to_block(files[key], edges, n, directed)
        for key, edges in parsed.items()
    }
    return MultiplexGraph(blocks, directed=directed, binary=binary)


def _ingest_dense_csv_dir(
    directory: Path, directed: bool | None, binary: bool | None
) -> MultiplexGraph:
    manifest = _read_manifest(directory)
    files = _scan_block_files(directory)
    _resolve_geometry(files, manifest, directory)
    if directed is None:
        directed = bool(manifest.get("directed", True))
    if binary is None and "binary" in manifest:
        binary = bool(manifest["binary"])

    blocks = {}
    for key, path in files.items():
        try:
            block = np.loadtxt(path, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise ValidationError(f"{path}: malformed numeric grid: {exc}") from exc
        blocks[key] = block
    if "n" in manifest:
        n = int(manifest["n"])
        for key, block in blocks.items():
            if block.shape != (n, n):
                raise ValidationError(
                    f"{files[key]}: block shape {block.shape} does not match "
                    f"manifest n={n}"
                )
    return MultiplexGraph(blocks, directed=directed, binary=binary)


def _ingest_container(
    path: Path, directed: bool | None, binary: bool | None
) -> MultiplexGraph:
    try:
        with np.load(path) as data:
            payload = {key: data[key] for key in data.files}
    except (OSError, ValueError) as exc:
        raise ValidationError(f"{path}: unreadable container: {exc}") from exc
    for key in ("blocks", "directed", "binary"):
        if key not in payload:
            raise ValidationError(f"{path}: container missing array {key!r}")
    if directed is None:
        directed = bool(payload["directed"])
    if binary is None:
        binary = bool(payload["binary"])
    blocks = payload["blocks"]
    if blocks.ndim != 4:
        raise ValidationError(
            f"{path}: container blocks must have shape (K, T, n, n), got "
            f"{blocks.shape}"
        )
    return MultiplexGraph(blocks, directed=directed, binary=binary)


def ingest(
    path, format: str, *, directed: bool | None = None, binary: bool | None = None
) -> MultiplexGraph:
    """Load a multiplex graph from disk.

    ``directed``/``binary`` override whatever the manifest or container
    declares; if neither source specifies them, directedness defaults to
    True and binariness is auto-detected from values.
    """
    path = Path(path)
    if format not in GRAPH_FORMATS:
        raise ValidationError(
            f"unknown graph format {format!r}; expected one of {GRAPH_FORMATS}"
        )
    if format == "container":
        if not path.is_file():
            raise ValidationError(f"{path}: container file not found")
        return _ingest_container(path, directed, binary)
    if not path.is_dir():
        raise ValidationError(f"{path}: directory not found")
    if format == "edge-list-dir":
        return _ingest_edge_list_dir(path, directed, binary)
    return _ingest_dense_csv_dir(path, directed, binary)


def _write_manifest(directory: Path, graph: MultiplexGraph) -> None:
    manifest = {
        "n": graph.n,
        "K": graph.K,
        "T": graph.T,
        "directed": graph.directed,
        "binary": graph.binary,
    }
    (directory / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n")


def export_graph(graph: MultiplexGraph, path, format: str) -> None:
    """Write ``graph`` to disk in the given format (see :func:`ingest`)."""
    path = Path(path)
    if format not in GRAPH_FORMATS:
        raise ValidationError(
            f"unknown graph format {format!r}; expected one of {GRAPH_FORMATS}"
        )
    if format == "container":
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(
            path,
            blocks=graph.to_array(),
            directed=graph.directed,
            binary=graph.binary,
        )
        return

    path.mkdir(parents=True, exist_ok=True)
    _write_manifest(path, graph)
    for k in range(graph.K):
        for t in range(graph.T):
            block = graph.block(k, t)
            name = path / f"layer-{k + 1}_time-{t + 1}.csv"
            if format == "dense-csv-dir":
                np.savetxt(name, block, delimiter=",", fmt=FLOAT_FORMAT)
            else:
                with open(name, "w", newline="") as fh:
                    writer = csv.writer(fh)
                    if graph.binary:
                        writer.writerow(["source", "target"])
                    else:
                        writer.writerow(["source", "target", "weight"])
                    rows, cols = np.nonzero(block)
                    for i, j in zip(rows, cols):
                        if not graph.directed and j < i:
                            continue  # store each undirected edge once
                        if graph.binary:
                            writer.writerow([i + 1, j + 1])
                        else:
                            writer.writerow(
                                [i + 1, j + 1, _format_float(block[i, j])]
                            )


# -- embeddings and latent pairs ------------------------------------------


def _write_matrix(path: Path, matrix: np.ndarray) -> None:
    np.savetxt(path, matrix, delimiter=",", fmt=FLOAT_FORMAT)


def _read_matrix(path: Path, columns: int) -> np.ndarray:
    try:
        out = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"{path}: unreadable matrix: {exc}") from exc
    if out.shape[1] != columns:
        raise ValidationError(
            f"{path}: expected {columns} columns, found {out.shape[1]}"
        )
    return out


def _read_geometry(directory: Path) -> dict:
    path = directory / "geometry.json"
    if not path.exists():
        raise ValidationError(f"{path}: geometry sidecar not found")
    geometry = json.loads(path.read_text())
    missing = {"n", "K", "T", "d"} - set(geometry)
    if missing:
        raise ValidationError(f"{path}: geometry missing keys {sorted(missing)}")
    return geometry


def save_embedding(embedding: DuaseEmbedding, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_matrix(directory / "X.csv", embedding.Xhat)
    _write_matrix(directory / "Y.csv", embedding.Yhat)
    _write_matrix(directory / "singular_values.csv", embedding.singular_values[:, None])
    geometry = {
        "n": embedding.n,
        "K": embedding.K,
        "T": embedding.T,
        "d": embedding.d,
    }
    (directory / "geometry.json").write_text(json.dumps(geometry, indent=2) + "\n")


def load_embedding(directory) -> DuaseEmbedding:
    directory = Path(directory)
    geometry = _read_geometry(directory)
    d = int(geometry["d"])
    return DuaseEmbedding(
        Xhat=_read_matrix(directory / "X.csv", d),
        Yhat=_read_matrix(directory / "Y.csv", d),
        singular_values=_read_matrix(directory / "singular_values.csv", 1)[:, 0],
        n=int(geometry["n"]),
        K=int(geometry["K"]),
        T=int(geometry["T"]),
    )


def save_latents(latents: LatentPair, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_matrix(directory / "X.csv", latents.X)
    _write_matrix(directory / "Y.csv", latents.Y)
    geometry = {"n": latents.n, "K": latents.K, "T": latents.T, "d": latents.d}
    (directory / "geometry.json").write_text(json.dumps(geometry, indent=2) + "\n")


def load_latents(directory) -> LatentPair:
    directory = Path(directory)
    geometry = _read_geometry(directory)
    d = int(geometry["d"])
    return LatentPair(
        X=_read_matrix(directory / "X.csv", d),
        Y=_read_matrix(directory / "Y.csv", d),
        n=int(geometry["n"]),
        K=int(geometry["K"]),
        T=int(geometry["T"]),
    )


# -- results and run manifests ---------------------------------------------


def write_test_result(result: TestResult, path) -> None:
    Path(path).write_text(json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n")


def test_result_from_dict(payload: dict) -> TestResult:
    return TestResult(
        statistic=payload["statistic"],
        bootstrap_samples=np.asarray(payload["bootstrap_samples"]),
        p_value=payload["p_value"],
        d=payload["d"],
        n_boot=payload["n_boot"],
        variant=payload["variant"],
        n_rep=payload.get("n_rep"),
        seed_fingerprint=payload["seed"],
        layers=tuple(payload["layers"]) if payload.get("layers") else None,
        clamped_entries=payload.get("clamped_entries", 0),
    )


def write_pairwise_outputs(results: PairwiseResults, out_dir) -> list[str]:
    """p-value matrix CSV, per-layer rejection counts CSV, and full JSON."""
    out_dir = Path(out_dir)
    matrix = results.p_matrix()
    with open(out_dir / "pairwise_pvalues.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layer"] + [str(l + 1) for l in range(results.n_layers)])
        for k in range(results.n_layers):
            row = [str(k + 1)] + [
                "" if k == l else repr(float(matrix[k, l]))
                for l in range(results.n_layers)
            ]
            writer.writerow(row)
    counts = results.rejections_per_layer()
    with open(out_dir / "rejections_per_layer.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["layer", "rejections", "alpha"])
        for k in range(results.n_layers):
            writer.writerow([k + 1, int(counts[k]), repr(results.alpha)])
    (out_dir / "pairwise.json").write_text(
        json.dumps(results.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    return ["pairwise_pvalues.csv", "rejections_per_layer.csv", "pairwise.json"]


def package_versions() -> dict:
    import numpy
    import scipy

    from . import __version__

    return {
        "dmptest": __version__,
        "python": sys.version.split()[0],
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
    }


def write_run_manifest(
    out_dir,
    *,
    subcommand: str,
    argv: list[str],
    config: dict,
    started: float,
    artifacts: list[str],
) -> None:
    manifest = {
        "subcommand": subcommand,
        "argv": argv,
        "config": config,
        "versions": package_versions(),
        "started_unix": started,
        "elapsed_seconds": time.time() - started,
        "artifacts": sorted(artifacts),
    }
    Path(out_dir, "run.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
