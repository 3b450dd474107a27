"""Graph samplers: latent-position model, blockmodel, and their equivalence."""

import math

import numpy as np
import pytest

from dmptest import (
    BlockModelSpec,
    DomainError,
    GeometryError,
    LatentPair,
    SeedSpec,
    benchmark_spec,
    sample_dmprdpg,
    sample_dmpsbm,
    sbm_to_latents,
)


def constant_latents(p, n, K=1, T=1):
    """Latent pair with every inner product equal to p."""
    X = np.full((n * K, 1), p)
    Y = np.ones((n * T, 1))
    return LatentPair(X=X, Y=Y, n=n, K=K, T=T)


class TestLatentPair:
    def test_rejects_products_outside_unit_interval(self):
        with pytest.raises(DomainError, match="inner products"):
            constant_latents(1.5, 3)

    def test_block_views(self):
        lat = constant_latents(0.2, 4, K=2, T=3)
        assert lat.layer_block(1).shape == (4, 1)
        assert lat.time_block(2).shape == (4, 1)
        assert lat.d == 1

    def test_probability_graph_keeps_diagonal(self):
        lat = constant_latents(0.4, 3)
        g = lat.probability_graph()
        assert not g.binary
        assert np.all(g.block(0, 0) == 0.4)


class TestSampleRdpg:
    def test_zero_probability_empty_graph(self):
        g = sample_dmprdpg(constant_latents(0.0, 6, K=2, T=2), SeedSpec(0))
        assert g.density() == 0.0

    def test_unit_probability_complete_minus_diagonal(self):
        g = sample_dmprdpg(constant_latents(1.0, 6, K=2, T=2), SeedSpec(0))
        for k in range(2):
            for t in range(2):
                block = g.block(k, t)
                assert np.all(block.diagonal() == 0)
                assert np.all(block[~np.eye(6, dtype=bool)] == 1)

    def test_empirical_density_concentrates(self):
        n, p = 200, 0.3
        g = sample_dmprdpg(constant_latents(p, n), SeedSpec(42).child("dens"))
        off = ~np.eye(n, dtype=bool)
        trials = n * (n - 1)
        se = math.sqrt(p * (1 - p) / trials)
        assert abs(g.block(0, 0)[off].mean() - p) < 3 * se

    def test_determinism(self):
        lat = constant_latents(0.5, 10, K=2, T=2)
        a = sample_dmprdpg(lat, SeedSpec(7).child("x"))
        b = sample_dmprdpg(lat, SeedSpec(7).child("x"))
        assert a.equals(b)

    def test_probability_slack_clamps_but_rejects_gross_violations(self):
        # An inner product of 1 + 5e-13 is within slack and must sample.
        X = np.full((2, 1), 1.0 + 5e-13)
        Y = np.ones((2, 1))
        lat = LatentPair(X=X, Y=Y, n=2, K=1, T=1)
        g = sample_dmprdpg(lat, SeedSpec(0))
        assert np.all(g.block(0, 0)[~np.eye(2, dtype=bool)] == 1)


class TestBlockModelSpec:
    def test_label_range_validation(self):
        B = np.full((1, 1, 2, 2), 0.5)
        with pytest.raises(DomainError, match="labels outside"):
            BlockModelSpec.with_static_labels(B, np.array([0, 2]), np.array([0, 1]))

    def test_b_range_validation(self):
        B = np.full((1, 1, 2, 2), 1.5)
        with pytest.raises(DomainError, match=r"\[0, 1\]"):
            BlockModelSpec.with_static_labels(B, np.array([0, 1]), np.array([0, 1]))

    def test_block_probabilities_lookup(self):
        B = np.array([[[[0.1, 0.2], [0.3, 0.4]]]])
        spec = BlockModelSpec.with_static_labels(
            B, np.array([0, 1, 1]), np.array([1, 0, 1])
        )
        P = spec.block_probabilities(0, 0)
        # node i row community, node j column community
        assert P[0, 1] == 0.1  # z=0, u=0
        assert P[0, 0] == 0.2  # z=0, u=1
        assert P[1, 1] == 0.3  # z=1, u=0
        assert P[2, 0] == 0.4  # z=1, u=1


class TestSbmToLatents:
    def test_single_community_recovers_constant(self):
        B = np.full((2, 3, 1, 1), 0.37)
        spec = BlockModelSpec.with_static_labels(
            B, np.zeros(5, dtype=int), np.zeros(5, dtype=int)
        )
        lat = sbm_to_latents(spec)
        P = lat.X @ lat.Y.T
        np.testing.assert_allclose(P, 0.37, atol=1e-12)

    def test_benchmark_family_reproduces_b_entries(self):
        K, T, n = 10, 3, 8
        spec = benchmark_spec(0.0, K, T, n)
        lat = sbm_to_latents(spec)
        assert lat.d == 2  # drift-free benchmark has a rank-2 structure
        for k in range(K):
            for t in range(T):
                P = lat.layer_block(k) @ lat.time_block(t).T
                expected = spec.block_probabilities(k, t)
                assert np.abs(P - expected).max() < 1e-10

    def test_drifting_benchmark_entry_formula(self):
        # With drift, the (0, 0) community probability grows linearly in
        # the 1-based layer index: 0.25 + epsilon * k.
        eps, K = 0.02, 10
        spec = benchmark_spec(eps, K, 3, 4)
        lat = sbm_to_latents(spec)
        for k in range(K):
            P = lat.layer_block(k) @ lat.time_block(0).T
            assert P[0, 0] == pytest.approx(0.25 + eps * (k + 1), abs=1e-10)

    def test_random_spec_exhaustive_lookup(self):
        rng = np.random.default_rng(3)
        G1, G2, K, T, n = 3, 2, 2, 2, 6
        B = rng.random((K, T, G1, G2))
        z = rng.integers(0, G1, size=n)
        u = rng.integers(0, G2, size=n)
        spec = BlockModelSpec.with_static_labels(B, z, u)
        lat = sbm_to_latents(spec)
        for k in range(K):
            for t in range(T):
                P = lat.layer_block(k) @ lat.time_block(t).T
                for i in range(n):
                    for j in range(n):
                        assert P[i, j] == pytest.approx(
                            B[k, t, z[i], u[j]], abs=1e-10
                        )

    def test_all_zero_b(self):
        B = np.zeros((1, 1, 2, 2))
        spec = BlockModelSpec.with_static_labels(B, np.array([0, 1]), np.array([0, 1]))
        lat = sbm_to_latents(spec)
        assert np.all(lat.X @ lat.Y.T == 0)


class TestSampleSbm:
    def test_all_zero_b_empty_graph(self):
        B = np.zeros((2, 2, 2, 2))
        labels = np.array([0, 0, 1, 1])
        spec = BlockModelSpec.with_static_labels(B, labels, labels)
        g = sample_dmpsbm(spec, 4, SeedSpec(0))
        assert g.density() == 0.0

    def test_deterministic_blocks_when_probabilities_are_01(self):
        B = np.zeros((1, 1, 2, 2))
        B[0, 0, 0, 0] = 1.0
        B[0, 0, 1, 1] = 1.0
        labels = np.array([0, 0, 0, 1, 1, 1])
        spec = BlockModelSpec.with_static_labels(B, labels, labels)
        g = sample_dmpsbm(spec, 6, SeedSpec(0))
        block = g.block(0, 0)
        within0 = block[:3, :3]
        assert np.all(within0[~np.eye(3, dtype=bool)] == 1)
        assert np.all(block[:3, 3:] == 0)
        assert np.all(block[3:, :3] == 0)
        assert np.all(block[3:, 3:][~np.eye(3, dtype=bool)] == 1)

    def test_benchmark_per_block_densities(self):
        n = 100
        spec = benchmark_spec(0.01, 4, 3, n)
        g = sample_dmpsbm(spec, n, SeedSpec(11).child("dens"))
        off = ~np.eye(n, dtype=bool)
        for k in range(4):
            for t in range(3):
                P = spec.block_probabilities(k, t)
                expected = P[off].mean()
                se = math.sqrt((P[off] * (1 - P[off])).sum()) / off.sum()
                observed = g.block(k, t)[off].mean()
                assert abs(observed - expected) < 4 * se

    def test_node_count_mismatch(self):
        spec = benchmark_spec(0.0, 2, 2, 10)
        with pytest.raises(GeometryError, match="labels cover 10"):
            sample_dmpsbm(spec, 12, SeedSpec(0))

    def test_matches_latent_probabilities(self):
        # Blockmodel sampling and latent-position sampling draw from the
        # same entrywise Bernoulli parameters.
        spec = benchmark_spec(0.005, 3, 2, 12)
        lat = sbm_to_latents(spec)
        P_latent = lat.probability_matrix()
        n = 12
        for k in range(3):
            for t in range(2):
                block = P_latent[k * n : (k + 1) * n, t * n : (t + 1) * n]
                np.testing.assert_allclose(
                    block, spec.block_probabilities(k, t), atol=1e-10
                )

    def test_cross_block_independence(self):
        n = 200
        B = np.full((2, 1, 1, 1), 0.3)
        labels = np.zeros(n, dtype=int)
        spec = BlockModelSpec.with_static_labels(B, labels, labels)
        g = sample_dmpsbm(spec, n, SeedSpec(5).child("ind"))
        off = ~np.eye(n, dtype=bool)
        a = g.block(0, 0)[off]
        b = g.block(1, 0)[off]
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.05

    def test_schedule_independence(self):
        # Blocks are addressed by (k, t) streams: the same graph results
        # no matter how the sampling loop is ordered, which we probe by
        # comparing against per-block resampling in reverse order.
        spec = benchmark_spec(0.0, 2, 2, 8)
        seed = SeedSpec(21).child("sched")
        g = sample_dmpsbm(spec, 8, seed)
        from dmptest.samplers import _bernoulli_block

        for k, t in [(1, 1), (1, 0), (0, 1), (0, 0)]:
            block = _bernoulli_block(
                spec.block_probabilities(k, t), seed.child(k, t).generator()
            )
            assert np.array_equal(block, g.block(k, t))
