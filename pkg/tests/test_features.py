import math

import numpy as np
import pytest
from scipy.stats import ortho_group

from conftest import dense_eigh, path_graph, random_knn_graph, two_cliques
from fastsc.cluster import PipelineConfig, accelerated_spectral_clustering, \
    classical_spectral_clustering
from fastsc.errors import InvalidEpsilon
from fastsc.features import (exact_spectral_features, fast_spectral_features, fix_signs,
                             gaussian_signals, required_signals, smallest_eigenpairs)
from fastsc.graph import build_knn_graph, build_laplacian, estimate_lambda_max
from fastsc.kmeans import kmeans
from fastsc.stability import adjusted_rand_index, same_partition


def pair_sq_dists(F):
    G = F @ F.T
    d = np.diag(G)
    return d[:, None] + d[None, :] - 2 * G


class TestExactFeatures:
    def test_k1_constant(self):
        g = random_knn_graph(np.random.default_rng(0))
        f = exact_spectral_features(build_laplacian(g), 1)
        assert np.allclose(f.values[:, 0], 1 / math.sqrt(g.n_nodes))

    def test_path4_fiedler(self):
        g = path_graph(4)
        w, U = dense_eigh(g)
        ref = fix_signs(U[:, :2])
        f = exact_spectral_features(build_laplacian(g), 2)
        assert np.allclose(f.values, ref, atol=1e-8)
        assert f.values[np.argmax(np.abs(f.values[:, 1])), 1] > 0

    def test_two_cliques_separate(self):
        g, labels = two_cliques(10)
        F = exact_spectral_features(build_laplacian(g), 2).values
        D = pair_sq_dists(F)
        same = labels[:, None] == labels[None, :]
        assert D[same].max() < D[~same].min()

    def test_columns_orthonormal(self):
        g = random_knn_graph(np.random.default_rng(1))
        F = exact_spectral_features(build_laplacian(g), 6).values
        assert np.allclose(F.T @ F, np.eye(6), atol=1e-8)

    def test_lanczos_matches_dense(self):
        pts = np.random.default_rng(2).random((400, 2))
        lap = build_laplacian(build_knn_graph(pts, 8))
        w_d, U_d = smallest_eigenpairs(lap, 5)
        w_l, U_l = smallest_eigenpairs(lap, 5, dense_limit=100)
        assert np.allclose(w_d, w_l, atol=1e-8)
        # compare the spanned subspaces
        assert np.allclose(U_l @ U_l.T, U_d @ U_d.T, atol=1e-6)

    def test_k_bounds(self):
        lap = build_laplacian(path_graph(5))
        with pytest.raises(ValueError):
            exact_spectral_features(lap, 5)


class TestRequiredSignals:
    def test_n5000(self):
        expect = 6 / (0.125 - 0.5**3 / 3) * math.log(5000)
        assert required_signals(5000, 0.5, 1) == math.ceil(expect) == 614

    def test_log_n_one(self):
        assert required_signals(math.e, 0.5, 1) == 72

    def test_epsilon_one(self):
        assert required_signals(100, 1.0, 1) == math.ceil(36 * math.log(100))

    def test_small_epsilon_limit(self):
        eps = 0.01
        assert required_signals(1000, eps) / (12 / eps**2 * math.log(1000)) == pytest.approx(1, rel=0.01)

    def test_invalid(self):
        for eps in (0.0, -0.1, 1.5):
            with pytest.raises(InvalidEpsilon):
                required_signals(10, eps)


class TestRandomFeatures:
    def test_signal_variance(self):
        R = gaussian_signals(2000, 25, 0)
        assert R.var() == pytest.approx(1 / 25, rel=0.03)

    def test_shape(self):
        g = random_knn_graph(np.random.default_rng(3))
        lap = build_laplacian(g)
        lmax = estimate_lambda_max(lap)
        f = fast_spectral_features(lap, 0.1 * lmax, 13, seed=1)
        assert f.values.shape == (g.n_nodes, 13)
        assert f.provenance["kind"] == "filtered-random" and f.provenance["eta"] == 13

    def test_gaussian_pushforward(self):
        g = random_knn_graph(np.random.default_rng(4), 150, 200)
        _, U = dense_eigh(g)
        U = U[:, :5]
        eta = 20
        samples = np.concatenate([(gaussian_signals(g.n_nodes, eta, s).T @ U).ravel()
                                  for s in range(100)])
        assert samples.size == 10_000
        m, v = samples.mean(), samples.var()
        assert abs(m) <= 5 * math.sqrt(1 / eta / samples.size)
        # var of the sample variance of a normal: 2 s^4 / n
        assert abs(v - 1 / eta) <= 5 * math.sqrt(2 / samples.size) / eta

    def test_jl_sandwich_exact_projector_n100(self):
        rng = np.random.default_rng(5)
        g = random_knn_graph(rng, 100, 100)
        _, U = dense_eigh(g)
        U = U[:, :4]
        eps = 0.5
        eta = required_signals(100, eps, 1)
        i, j = np.triu_indices(100, 1)
        D = U[i] - U[j]  # f_i - f_j; filtered rows differ by D @ (U^T R)
        exact = np.einsum("pk,pk->p", D, D)
        good = 0
        for trial in range(100):
            P = U.T @ gaussian_signals(100, eta, trial)
            approx = np.einsum("pk,kl,pl->p", D, P @ P.T, D)
            tol = 1e-12 * exact.max()
            good += bool(np.all((approx >= (1 - eps) * exact - tol)
                                & (approx <= (1 + eps) * exact + tol)))
        assert good >= 99

    def test_all_pass_is_identity_jl(self):
        g = path_graph(30)
        lap = build_laplacian(g)
        lmax = estimate_lambda_max(lap)
        eps = 0.5
        eta = required_signals(30, eps)
        assert eta >= 30
        F = fast_spectral_features(lap, lmax, eta, order=5, seed=2).values
        d = pair_sq_dists(F)[np.triu_indices(30, 1)]
        assert np.all((d >= 2 * (1 - eps)) & (d <= 2 * (1 + eps)))


class TestRotationInvariance:
    def test_partition_unchanged_by_rotation(self):
        rng = np.random.default_rng(6)
        centres = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], float)
        pts = centres[np.repeat(np.arange(4), 50)] + 0.18 * rng.standard_normal((200, 2))
        lap = build_laplacian(build_knn_graph(pts, 10))
        U = exact_spectral_features(lap, 4).values
        Q = ortho_group.rvs(4, random_state=7)
        a = kmeans(U, 4, replicates=10, seed=3)
        b = kmeans(U @ Q, 4, replicates=10, seed=3)
        assert same_partition(a, b)


class TestPipelines:
    def test_two_cliques_fast(self):
        g, labels = two_cliques(10)
        hits = 0
        for seed in range(20):
            res = accelerated_spectral_clustering(g, 2, eta=8, seed=seed)
            hits += adjusted_rand_index(labels, res.labels) == 1.0
        assert hits >= 18

    def test_two_cliques_classical(self):
        g, labels = two_cliques(10)
        assert adjusted_rand_index(labels, classical_spectral_clustering(g, 2).labels) == 1.0

    def test_diagnostics(self):
        g = random_knn_graph(np.random.default_rng(8), 150, 200)
        res = accelerated_spectral_clustering(g, 3, seed=1)
        d = res.diagnostics
        for key in ("lambda_max", "lambda_k", "order", "t_spectral", "t_filter", "t_kmeans",
                    "bisection_exhausted"):
            assert key in d
        assert d["eta"] == 6 and 0 < d["lambda_k"] <= d["lambda_max"]
        assert res.labels.shape == (g.n_nodes,)

    def test_precomputed_lambda_skips_bisection(self):
        g, _ = two_cliques(10)
        lap = build_laplacian(g)
        w, _ = dense_eigh(g)
        res = accelerated_spectral_clustering(g, 2, eta=8, lap=lap, lambda_k=0.5 * (w[1] + w[2]))
        assert res.diagnostics["bisection_steps"] == 0

    def test_from_points(self):
        rng = np.random.default_rng(9)
        pts = np.r_[rng.normal(0, 0.18, (60, 2)), rng.normal(1, 0.18, (60, 2))]
        labels = np.repeat([0, 1], 60)
        res = classical_spectral_clustering(pts, 2, K=6)
        assert adjusted_rand_index(labels, res.labels) == 1.0

    def test_fixed_order_config(self):
        g, _ = two_cliques(10)
        res = accelerated_spectral_clustering(g, 2, eta=8, config=PipelineConfig(order=33))
        assert res.diagnostics["order"] == 33
