"""Lloyd's k-means with k-means++ seeding and replicate selection."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import EmptyClusterWarning

MAX_REPAIRS = 10


@dataclass
class Clustering:
    labels: np.ndarray
    k: int
    inertia: float
    degenerate: bool = False
    n_iter: int = 0
    replicate: int = 0
    history: list = field(default_factory=list, repr=False)
    repairs: int = 0

    @property
    def n(self):
        return self.labels.shape[0]


def _as_array(features):
    X = getattr(features, "values", features)
    return np.ascontiguousarray(X, dtype=np.float64)


def kmeans_plusplus(X, k, rng):
    """k-means++ seeding; returns centre indices into ``X``."""
    n = X.shape[0]
    idx = np.empty(k, dtype=np.int64)
    idx[0] = rng.integers(n)
    d2 = np.einsum("ij,ij->i", X - X[idx[0]], X - X[idx[0]])
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            # every remaining point coincides with a centre
            idx[j] = rng.integers(n)
        else:
            idx[j] = min(int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right")),
                         n - 1)
        diff = X - X[idx[j]]
        d2 = np.minimum(d2, np.einsum("ij,ij->i", diff, diff))
    return idx


def _centres(X, labels, k, backend=None):
    C, counts = _kernels.centre_sums(X, labels, k, backend=backend)
    nz = counts > 0
    C[nz] /= counts[nz, None]
    return C, counts


def lloyd(X, k, rng, max_iter=300, backend=None):
    """One k-means run. Returns (labels, inertia, n_iter, history, repairs)."""
    C = X[kmeans_plusplus(X, k, rng)].copy()
    labels, mind, inertia = _kernels.assign_nearest(X, C, backend=backend)
    history = [inertia]
    repairs = 0
    it = 0
    for it in range(1, max_iter + 1):
        newC, counts = _centres(X, labels, k, backend)
        empty = np.flatnonzero(counts == 0)
        for j in empty:
            # move the empty centre onto the point farthest from its centre
            far = int(np.argmax(mind))
            newC[j] = X[far]
            mind[far] = 0.0
            repairs += 1
        newlabels, mind, inertia = _kernels.assign_nearest(X, newC, backend=backend)
        history.append(inertia)
        C = newC
        if np.array_equal(newlabels, labels) and empty.size == 0:
            labels = newlabels
            break
        labels = newlabels
    return labels, inertia, it, history, repairs


def kmeans(features, k, replicates=20, max_iter=300, seed=0, backend=None):
    """Best-of-``replicates`` k-means clustering.

    Each replicate uses k-means++ seeding from ``default_rng([seed, r])``; the
    lowest-inertia replicate wins, ties going to the lowest index.

    Inputs whose rows are all identical give a single-cluster result flagged
    ``degenerate``.
    """
    X = _as_array(features)
    n = X.shape[0]
    k = int(k)
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={n}")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    if n == 0 or np.all(X == X[0]):
        centre = X.mean(axis=0)
        inertia = float(((X - centre) ** 2).sum())
        return Clustering(np.zeros(n, dtype=np.int64), k, inertia, degenerate=k > 1)
    best = None
    for r in range(replicates):
        rng = np.random.default_rng([int(seed), r])
        labels, inertia, n_iter, history, repairs = lloyd(X, k, rng, max_iter, backend)
        if best is None or inertia < best.inertia:
            best = Clustering(labels, k, float(inertia), False, n_iter, r, history, repairs)
    used = np.unique(best.labels).size
    if used < k or best.repairs > MAX_REPAIRS:
        best.degenerate = True
        if best.repairs > MAX_REPAIRS:
            warnings.warn(f"empty-cluster repair ran {best.repairs} times", EmptyClusterWarning)
    return best
