"""Adjusted Rand Index and the random-signal stability measure over k."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cluster import PipelineConfig, accelerated_spectral_clustering
from .eigencount import estimate_lambda_k
from .errors import DegenerateComparisonWarning
from .graph import build_laplacian


def _labels(c):
    return np.asarray(getattr(c, "labels", c))


def contingency(a, b):
    a = _labels(a)
    b = _labels(b)
    if a.shape != b.shape:
        raise ValueError("clusterings cover different node sets")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    C = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(C, (ai, bi), 1)
    return C


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1.0) / 2.0


def adjusted_rand_index(a, b):
    """Hubert-Arabie adjusted Rand index of two labelings.

    When the chance-corrected denominator vanishes (e.g. both labelings
    put everything in one cluster) the result is 1 for identical
    partitions and 0 otherwise, with a :class:`DegenerateComparisonWarning`.
    """
    C = contingency(a, b)
    n = int(C.sum())
    sum_ij = _comb2(C).sum()
    sum_a = _comb2(C.sum(axis=1)).sum()
    sum_b = _comb2(C.sum(axis=0)).sum()
    total = n * (n - 1) / 2.0
    expected = sum_a * sum_b / total if total > 0 else 0.0
    denom = 0.5 * (sum_a + sum_b) - expected
    if denom == 0:
        warnings.warn("degenerate ARI comparison", DegenerateComparisonWarning)
        same = C.shape[0] == C.shape[1] and np.count_nonzero(C) == C.shape[0]
        return 1.0 if same else 0.0
    return float((sum_ij - expected) / denom)


def same_partition(a, b):
    C = contingency(a, b)
    return C.shape[0] == C.shape[1] and np.count_nonzero(C) == C.shape[0]


def gamma_from_clusterings(clusterings):
    """Mean pairwise ARI over all unordered pairs, and the pair matrix."""
    J = len(clusterings)
    if J < 2:
        raise ValueError("need at least two clusterings")
    M = np.eye(J)
    vals = []
    for i in range(J):
        for j in range(i + 1, J):
            v = adjusted_rand_index(clusterings[i], clusterings[j])
            M[i, j] = M[j, i] = v
            vals.append(v)
    return float(np.mean(vals)), M


@dataclass
class StabilityProfile:
    ks: np.ndarray
    gamma: np.ndarray
    J: int
    k_star: int
    tie: bool = False
    failed: dict = field(default_factory=dict)
    pair_ari: dict = field(default_factory=dict, repr=False)
    clusterings: dict = field(default_factory=dict, repr=False)
    lambda_k: dict = field(default_factory=dict)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("k,gamma\n")
            for k, g in zip(self.ks, self.gamma):
                fh.write(f"{int(k)},{'' if math.isnan(g) else repr(float(g))}\n")


def derive_seed(master, *keys):
    """64-bit seed from a master seed and integer keys, schedule independent."""
    ss = np.random.SeedSequence([int(master), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def stability_scan(graph, k_min, k_max, J=20, seed=0, eta=None, config=None,
                   keep_clusterings=False, lap=None):
    """Stability gamma(k) = mean pairwise ARI of J random-signal clusterings.

    For each k the k-th eigenvalue is estimated once and shared by the J
    replicates, which differ only in their random signals. ``eta`` is a
    callable ``k -> eta`` (default ``2k``). ``k_star`` is the argmax of gamma,
    ties going to the smallest k (``tie`` is set).
    """
    if not (1 <= k_min <= k_max < graph.n_nodes):
        raise ValueError("need 1 <= k_min <= k_max < N")
    if J < 2:
        raise ValueError("J must be >= 2")
    if eta is None:
        eta = lambda k: 2 * k  # noqa: E731
    elif isinstance(eta, int):
        fixed = eta
        eta = lambda k: fixed  # noqa: E731
    cfg = config or PipelineConfig(kmeans_replicates=5)
    lap = lap or build_laplacian(graph)
    ks = np.arange(k_min, k_max + 1)
    gamma = np.full(ks.shape, np.nan)
    prof = StabilityProfile(ks, gamma, J, int(k_min))
    for idx, k in enumerate(ks):
        k = int(k)
        try:
            lk = estimate_lambda_k(lap, k, num_probes=cfg.num_probes, seed=derive_seed(seed, k, 0, 1),
                                   max_bisections=cfg.max_bisections, delta=cfg.delta,
                                   theta=cfg.bisection_theta)
            prof.lambda_k[k] = lk.lambda_tilde
            runs = []
            for j in range(J):
                res = accelerated_spectral_clustering(
                    graph, k, eta(k), seed=derive_seed(seed, k, j + 1), config=cfg,
                    lap=lap, lambda_k=lk,
                )
                runs.append(res.clustering.labels)
        except Exception as exc:  # a failed k is reported, the scan continues
            prof.failed[k] = repr(exc)
            continue
        g, M = gamma_from_clusterings(runs)
        gamma[idx] = g
        prof.pair_ari[k] = M
        if keep_clusterings:
            prof.clusterings[k] = runs
    finite = np.isfinite(gamma)
    if not finite.any():
        raise RuntimeError(f"every k failed: {prof.failed}")
    best = np.nanmax(gamma)
    winners = ks[finite & (gamma == best)]
    prof.k_star = int(winners[0])
    prof.tie = winners.size > 1
    return prof
