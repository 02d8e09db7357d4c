import os
import tempfile
import warnings

import numpy as np
import pytest

# keep order tables of the run out of the user's cache
os.environ.setdefault("FASTSC_CACHE", tempfile.mkdtemp(prefix="fastsc-cache-"))

from fastsc.errors import DisconnectedGraph  # noqa: E402
from fastsc.graph import SparseGraph, build_knn_graph, build_laplacian  # noqa: E402


def path_graph(n, w=1.0):
    i = np.arange(n - 1)
    return SparseGraph.from_edges(n, i, i + 1, np.full(n - 1, w))


def complete_graph(n):
    i, j = np.triu_indices(n, 1)
    return SparseGraph.from_edges(n, i, j)


def star_graph(leaves):
    return SparseGraph.from_edges(leaves + 1, np.zeros(leaves, int), np.arange(1, leaves + 1))


def two_cliques(size=10, bridge=0.05):
    i, j = np.triu_indices(size, 1)
    ii = np.r_[i, i + size, 0]
    jj = np.r_[j, j + size, size]
    w = np.r_[np.ones(2 * i.size), bridge]
    labels = np.repeat([0, 1], size)
    return SparseGraph.from_edges(2 * size, ii, jj, w), labels


def random_knn_graph(rng, n_min=50, n_max=200, spread=0.08):
    """Connected kNN graph on a few Gaussian blobs in the unit square."""
    while True:
        n = int(rng.integers(n_min, n_max + 1))
        c = int(rng.integers(1, 6))
        centres = rng.random((c, 2))
        pts = centres[rng.integers(c, size=n)] + spread * rng.standard_normal((n, 2))
        K = int(rng.integers(3, 9))
        try:
            return build_knn_graph(pts, K)
        except DisconnectedGraph:
            continue


def dense_eigh(graph):
    return np.linalg.eigh(build_laplacian(graph).to_dense())


@pytest.fixture(autouse=True)
def _quiet_numba():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", category=DeprecationWarning, module="numba")
        yield


# acceptance criteria report one line each, shown after the test summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
