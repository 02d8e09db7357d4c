"""Spectral feature vectors: exact eigenvectors or filtered random signals."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import EigensolverFailure, InvalidEpsilon
from .filters import IdealLowPass, apply_filter, design_filter, get_order_table
from .graph import estimate_lambda_max

DENSE_LIMIT = 2000


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    provenance: dict

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature matrix contains non-finite values")

    @property
    def n_nodes(self):
        return self.values.shape[0]

    @property
    def dim(self):
        return self.values.shape[1]


def fix_signs(U):
    """Flip columns so each one's largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def smallest_eigenpairs(lap, k, tol=1e-8, dense_limit=DENSE_LIMIT, seed=0):
    """The ``k`` smallest eigenpairs of ``L``, ascending.

    Dense ``eigh`` up to ``dense_limit`` nodes, ARPACK Lanczos (no shift,
    ``which="SA"``) above.
    """
    n = lap.n
    if not (1 <= k < n):
        raise ValueError(f"need 1 <= k < N, got k={k}, N={n}")
    if n <= dense_limit:
        w, U = scipy.linalg.eigh(lap.to_dense(), subset_by_index=(0, k - 1))
        return w, U
    L = lap.to_scipy()
    v0 = np.random.default_rng(seed).standard_normal(n)
    try:
        w, U = eigsh(L, k=k, which="SA", tol=tol, v0=v0, maxiter=100 * n)
    except ArpackNoConvergence as exc:  # pragma: no cover - depends on graph
        raise EigensolverFailure(str(exc)) from exc
    order = np.argsort(w)
    w, U = w[order], U[:, order]
    res = np.linalg.norm(L @ U - U * w, axis=0)
    if np.any(res > max(1e-6, 1e3 * tol) * max(1.0, abs(w).max())):
        raise EigensolverFailure(f"eigenpair residuals too large: {res.max():.3g}")
    return w, U


def exact_spectral_features(lap, k, tol=1e-8, dense_limit=DENSE_LIMIT):
    """Rows of the first ``k`` Laplacian eigenvectors, sign-normalised."""
    w, U = smallest_eigenpairs(lap, k, tol=tol, dense_limit=dense_limit)
    U = fix_signs(U)
    return FeatureMatrix(U, {"kind": "exact-eigenvectors", "k": int(k), "eigenvalues": w})


def gaussian_signals(n, eta, seed):
    """``n x eta`` Gaussian matrix with mean 0 and variance ``1/eta``."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, eta)) / math.sqrt(eta)


def fast_spectral_features(lap, lambda_k, eta, order=None, seed=0, delta=0.1, theta=0.1,
                           damping="none"):
    """Filtered random signals ``p(L) R`` with ``p`` a low-pass at ``lambda_k``.

    ``order`` defaults to the tabulated minimal order at
    ``lambda_k / lambda_max``.
    """
    eta = int(eta)
    if eta < 1:
        raise ValueError("eta must be >= 1")
    lmax = estimate_lambda_max(lap)
    cutoff = min(float(lambda_k), lmax)
    if order is None:
        order = get_order_table(delta, theta, damping).lookup(cutoff / lmax)
    filt = design_filter(IdealLowPass(cutoff, lmax), order, damping=damping, theta=theta)
    R = gaussian_signals(lap.n, eta, seed)
    F = apply_filter(filt, lap, R)
    return FeatureMatrix(F, {"kind": "filtered-random", "seed": seed, "eta": eta,
                             "order": int(order), "lambda_k": cutoff,
                             "achieved_error": filt.achieved_error})


def required_signals(n, epsilon, beta=1.0):
    """Number of random signals ``ceil((4 + 2 beta) / (eps^2/2 - eps^3/3) * log N)``.

    Above this count the filtered-signal distances match the exact
    spectral-embedding distances within a factor ``1 +/- epsilon`` for all
    pairs, with probability at least ``1 - N^-beta``.
    """
    if not (0 < epsilon <= 1):
        raise InvalidEpsilon(f"epsilon must lie in (0, 1], got {epsilon}")
    if beta <= 0:
        raise ValueError("beta must be positive")
    denom = epsilon**2 / 2.0 - epsilon**3 / 3.0
    if denom <= 0:
        raise InvalidEpsilon(f"non-positive denominator for epsilon={epsilon}")
    eta0 = (4.0 + 2.0 * beta) / denom * math.log(n)
    # absorb round-off so exact integers are not bumped up by one
    return max(1, math.ceil(eta0 - 1e-9 * max(1.0, eta0)))
