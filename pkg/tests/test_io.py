"""Ingestion formats, persistence round trips, and their validation."""

import json

import numpy as np
import pytest

from dmptest import (
    SeedSpec,
    ValidationError,
    benchmark_spec,
    duase,
    export_graph,
    ingest,
    load_embedding,
    load_latents,
    sample_dmpsbm,
    save_embedding,
    save_latents,
    sbm_to_latents,
)


def sample_graph(n=12, K=2, T=3, eps=0.0, seed=1):
    return sample_dmpsbm(benchmark_spec(eps, K, T, n), n, SeedSpec(seed).child("g"))


class TestEdgeListIngestion:
    def write_minimal(self, root, manifest, files):
        root.mkdir(exist_ok=True)
        if manifest is not None:
            (root / "manifest.json").write_text(json.dumps(manifest))
        for name, body in files.items():
            (root / name).write_text(body)

    def test_empty_edge_lists_with_manifest(self, tmp_path):
        d = tmp_path / "g"
        files = {
            f"layer-{k}_time-{t}.csv": "source,target\n"
            for k in (1, 2)
            for t in (1, 2)
        }
        self.write_minimal(d, {"n": 5, "K": 2, "T": 2}, files)
        g = ingest(d, "edge-list-dir")
        assert (g.n, g.K, g.T) == (5, 2, 2)
        assert g.density() == 0.0
        assert g.directed  # documented default when unspecified

    def test_round_trip_identity(self, tmp_path):
        g = sample_graph()
        export_graph(g, tmp_path / "g", "edge-list-dir")
        back = ingest(tmp_path / "g", "edge-list-dir")
        assert back.equals(g)

    def test_weighted_round_trip(self, tmp_path):
        from dmptest import average_replicates

        avg = average_replicates([sample_graph(seed=s) for s in range(3)])
        export_graph(avg, tmp_path / "g", "edge-list-dir")
        back = ingest(tmp_path / "g", "edge-list-dir")
        assert back.equals(avg)

    def test_undirected_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        b = (rng.random((6, 6)) < 0.4).astype(float)
        b = np.triu(b, 1)
        b = b + b.T
        from dmptest import MultiplexGraph

        g = MultiplexGraph({(0, 0): b}, directed=False)
        export_graph(g, tmp_path / "g", "edge-list-dir")
        back = ingest(tmp_path / "g", "edge-list-dir")
        assert back.equals(g)

    def test_out_of_range_edge_reports_coordinates(self, tmp_path):
        d = tmp_path / "g"
        self.write_minimal(
            d,
            {"n": 5, "K": 1, "T": 1},
            {"layer-1_time-1.csv": "source,target\n3,7\n"},
        )
        with pytest.raises(ValidationError, match=r"\(3, 7\) outside node range"):
            ingest(d, "edge-list-dir")

    def test_malformed_row_reports_line(self, tmp_path):
        d = tmp_path / "g"
        self.write_minimal(
            d,
            {"n": 4, "K": 1, "T": 1},
            {"layer-1_time-1.csv": "source,target\n1,2\nfoo,3\n"},
        )
        with pytest.raises(ValidationError, match=r"csv:3"):
            ingest(d, "edge-list-dir")

    def test_missing_block_file_is_error(self, tmp_path):
        d = tmp_path / "g"
        self.write_minimal(
            d,
            {"n": 3, "K": 2, "T": 1},
            {"layer-1_time-1.csv": "source,target\n"},
        )
        with pytest.raises(ValidationError, match="missing block file layer-2_time-1"):
            ingest(d, "edge-list-dir")

    def test_conflicting_duplicate_rejected(self, tmp_path):
        d = tmp_path / "g"
        self.write_minimal(
            d,
            {"n": 4, "K": 1, "T": 1},
            {
                "layer-1_time-1.csv": (
                    "source,target,weight\n1,2,0.5\n1,2,0.25\n"
                )
            },
        )
        with pytest.raises(ValidationError, match="conflicts"):
            ingest(d, "edge-list-dir")

    def test_unknown_manifest_keys_rejected(self, tmp_path):
        d = tmp_path / "g"
        self.write_minimal(
            d,
            {"n": 3, "K": 1, "T": 1, "frobnicate": True},
            {"layer-1_time-1.csv": "source,target\n"},
        )
        with pytest.raises(ValidationError, match="unknown manifest keys"):
            ingest(d, "edge-list-dir")

    def test_bad_header_rejected(self, tmp_path):
        d = tmp_path / "g"
        self.write_minimal(
            d,
            {"n": 3, "K": 1, "T": 1},
            {"layer-1_time-1.csv": "from,to\n"},
        )
        with pytest.raises(ValidationError, match="header"):
            ingest(d, "edge-list-dir")

    def test_node_count_inferred_without_manifest(self, tmp_path):
        d = tmp_path / "g"
        self.write_minimal(
            d, None, {"layer-1_time-1.csv": "source,target\n1,2\n4,1\n"}
        )
        g = ingest(d, "edge-list-dir")
        assert g.n == 4


class TestOtherFormats:
    def test_dense_round_trip(self, tmp_path):
        g = sample_graph(seed=2)
        export_graph(g, tmp_path / "g", "dense-csv-dir")
        assert ingest(tmp_path / "g", "dense-csv-dir").equals(g)

    def test_dense_shape_mismatch_vs_manifest(self, tmp_path):
        g = sample_graph(n=4, K=1, T=1, seed=3)
        export_graph(g, tmp_path / "g", "dense-csv-dir")
        manifest = json.loads((tmp_path / "g" / "manifest.json").read_text())
        manifest["n"] = 5
        (tmp_path / "g" / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(ValidationError, match="does not match"):
            ingest(tmp_path / "g", "dense-csv-dir")

    def test_container_round_trip(self, tmp_path):
        g = sample_graph(seed=4)
        export_graph(g, tmp_path / "g.npz", "container")
        assert ingest(tmp_path / "g.npz", "container").equals(g)

    def test_container_weighted_round_trip(self, tmp_path):
        from dmptest import average_replicates

        avg = average_replicates([sample_graph(seed=s) for s in range(2)])
        export_graph(avg, tmp_path / "g.npz", "container")
        assert ingest(tmp_path / "g.npz", "container").equals(avg)

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ValidationError, match="unknown graph format"):
            ingest(tmp_path, "parquet")

    def test_missing_container(self, tmp_path):
        with pytest.raises(ValidationError, match="not found"):
            ingest(tmp_path / "nope.npz", "container")

    def test_directed_override(self, tmp_path):
        rng = np.random.default_rng(1)
        b = (rng.random((5, 5)) < 0.4).astype(float)
        b = np.triu(b, 1) + np.triu(b, 1).T
        from dmptest import MultiplexGraph

        g = MultiplexGraph({(0, 0): b}, directed=True)  # symmetric but directed
        export_graph(g, tmp_path / "g.npz", "container")
        forced = ingest(tmp_path / "g.npz", "container", directed=False)
        assert not forced.directed


class TestEmbeddingPersistence:
    def test_embedding_round_trip_exact(self, tmp_path):
        g = sample_graph(n=20, seed=5)
        emb = duase(g, 2, backend="dense")
        save_embedding(emb, tmp_path / "emb")
        back = load_embedding(tmp_path / "emb")
        assert np.array_equal(back.Xhat, emb.Xhat)
        assert np.array_equal(back.Yhat, emb.Yhat)
        assert np.array_equal(back.singular_values, emb.singular_values)
        assert (back.n, back.K, back.T, back.d) == (emb.n, emb.K, emb.T, emb.d)

    def test_latents_round_trip_exact(self, tmp_path):
        lat = sbm_to_latents(benchmark_spec(0.01, 3, 2, 10))
        save_latents(lat, tmp_path / "lat")
        back = load_latents(tmp_path / "lat")
        assert np.array_equal(back.X, lat.X)
        assert np.array_equal(back.Y, lat.Y)

    def test_missing_geometry_sidecar(self, tmp_path):
        (tmp_path / "emb").mkdir()
        with pytest.raises(ValidationError, match="geometry"):
            load_embedding(tmp_path / "emb")
