import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fastsc import _kernels
from fastsc.kmeans import kmeans, kmeans_plusplus, lloyd


def brute_min_inertia(X, k):
    best = np.inf
    for labels in itertools.product(range(k), repeat=len(X)):
        labels = np.array(labels)
        if np.unique(labels).size < k:
            continue
        best = min(best, sum(((X[labels == j] - X[labels == j].mean(0)) ** 2).sum() for j in range(k)))
    return best


def blobs(seed, n=150, k=3):
    rng = np.random.default_rng(seed)
    c = rng.random((k, 2)) * 10
    return c[np.arange(n) % k] + rng.standard_normal((n, 2)) * 0.3


class TestKMeans:
    def test_k1(self):
        X = np.random.default_rng(0).standard_normal((40, 3))
        c = kmeans(X, 1)
        assert np.all(c.labels == 0)
        assert c.inertia == pytest.approx(((X - X.mean(0)) ** 2).sum())

    def test_rectangle(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
        c = kmeans(X, 2)
        assert c.labels[0] == c.labels[1] != c.labels[2] == c.labels[3]
        assert c.inertia == pytest.approx(brute_min_inertia(X, 2)) == pytest.approx(1.0)

    def test_k_equals_n(self):
        X = np.random.default_rng(1).standard_normal((6, 2))
        c = kmeans(X, 6)
        assert c.inertia == pytest.approx(0.0) and np.unique(c.labels).size == 6

    def test_brute_force_small(self):
        X = np.random.default_rng(2).standard_normal((8, 2))
        assert kmeans(X, 3).inertia == pytest.approx(brute_min_inertia(X, 3))

    def test_monotone_descent(self):
        for seed in range(5):
            c = kmeans(blobs(seed, k=5), 5, replicates=1, seed=seed)
            h = np.array(c.history)
            assert np.all(np.diff(h) <= 1e-9 * h[0])

    def test_best_replicate_selected(self):
        X = blobs(3, k=6)
        c = kmeans(X, 6, replicates=8, seed=4)
        inertias = [lloyd(X, 6, np.random.default_rng([4, r]))[1] for r in range(8)]
        assert c.inertia == pytest.approx(min(inertias))
        assert c.replicate == int(np.argmin(inertias))

    def test_degenerate_rows(self):
        c = kmeans(np.ones((10, 3)), 3)
        assert c.degenerate and np.all(c.labels == 0) and c.inertia == 0

    def test_validation(self):
        with pytest.raises(ValueError):
            kmeans(np.ones((3, 2)), 4)
        with pytest.raises(ValueError):
            kmeans(np.random.default_rng(0).random((3, 2)), 2, replicates=0)

    def test_deterministic(self):
        X = blobs(5)
        a, b = kmeans(X, 3, seed=9), kmeans(X, 3, seed=9)
        assert np.array_equal(a.labels, b.labels) and a.inertia == b.inertia

    def test_plusplus_distinct_centres(self):
        X = blobs(6)
        idx = kmeans_plusplus(X, 3, np.random.default_rng(0))
        assert np.unique(idx).size == 3

    @pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")
    def test_backends_agree(self):
        X = blobs(7, n=500, k=4)
        a = kmeans(X, 4, replicates=3, seed=1, backend="numpy")
        b = kmeans(X, 4, replicates=3, seed=1, backend="numba")
        assert np.array_equal(a.labels, b.labels)
        assert a.inertia == pytest.approx(b.inertia, rel=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 40), st.integers(1, 5), st.integers(0, 2**31))
    def test_labels_in_range(self, n, k, seed):
        k = min(k, n)
        X = np.random.default_rng(seed).standard_normal((n, 2))
        c = kmeans(X, k, replicates=2, seed=seed)
        assert c.labels.min() >= 0 and c.labels.max() < k
        assert c.degenerate or np.unique(c.labels).size == k
