"""Stochastic eigenvalue counting and bisection for the k-th eigenvalue."""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BisectionExhaustedWarning
from .filters import (IdealLowPass, apply_filter, design_filter, get_order_table, jackson_damping,
                      lowpass_chebyshev_coefficients)
from .graph import estimate_lambda_max

log = logging.getLogger(__name__)

MAX_BISECTION_ORDER = 500
# transition band of the counting filters used during bisection
BISECTION_THETA = 0.05
# the deflation basis only needs a rough low-pass; its order is capped lower
BASIS_ORDER_CAP = 150


@dataclass
class EigencountEstimate:
    cutoff: float
    estimated_count: float
    num_probes: int
    per_probe_values: np.ndarray
    order: int = 0

    @property
    def stderr(self):
        p = self.per_probe_values
        if p.size < 2:
            return math.inf
        return float(p.std(ddof=1) / math.sqrt(p.size))


@dataclass
class LambdaKEstimate:
    k: int
    lambda_tilde: float
    bracket: tuple
    count_at_lambda: float
    n_bisections: int
    exhausted: bool = False
    trace: list = field(default_factory=list)


def default_num_probes(n, deflated=False):
    """``2 ceil(log N)`` probes, or ``max(4, ceil(log N / 2))`` once the estimator is deflated."""
    if deflated:
        return max(4, math.ceil(math.log(n) / 2))
    return 2 * math.ceil(math.log(n))


def probe_matrix(n, num_probes, seed, start=0):
    """Standard Gaussian probes; column i is drawn from ``(seed, i)`` alone."""
    R = np.empty((n, num_probes))
    for i in range(num_probes):
        R[:, i] = np.random.default_rng([int(seed), start + i]).standard_normal(n)
    return R


def order_for_cutoff(cutoff, lambda_max, delta=0.1, theta=0.1, cap=MAX_BISECTION_ORDER):
    ratio = min(1.0, cutoff / lambda_max)
    return min(cap, get_order_table(delta, theta).lookup(ratio))


def _count_with_probes(lap, cutoff, R, order, lambda_max, theta=0.1):
    filt = design_filter(IdealLowPass(cutoff, lambda_max), order, theta=theta)
    HR = apply_filter(filt, lap, R)
    return np.einsum("ij,ij->j", R, HR)


def count_eigenvalues_below(lap, cutoff, num_probes=None, filter_order=None, seed=0,
                            delta=0.1, theta=0.1):
    """Hutchinson estimate of ``#{l : lambda_l <= cutoff}``.

    Each probe ``r`` contributes ``r^T p(L) r`` where ``p`` approximates the
    ideal low-pass at ``cutoff``; the ideal operator is a projector whose
    trace is the eigencount.
    """
    lmax = estimate_lambda_max(lap)
    if not (0 < cutoff):
        raise ValueError("cutoff must be positive")
    cutoff = min(cutoff, lmax)
    if num_probes is None:
        num_probes = default_num_probes(lap.n)
    if num_probes < 1:
        raise ValueError("num_probes must be >= 1")
    if filter_order is None:
        filter_order = order_for_cutoff(cutoff, lmax, delta, theta)
    R = probe_matrix(lap.n, num_probes, seed)
    vals = _count_with_probes(lap, cutoff, R, filter_order, lmax, theta)
    return EigencountEstimate(cutoff, float(vals.mean()), num_probes, vals, filter_order)


def counts_from_moments(mu, cutoff, lambda_max, order, damping="none"):
    """Per-probe ``r^T p(L) r`` for the order-``order`` low-pass at ``cutoff``.

    Equal to filtering each probe and taking the inner product, since
    ``r^T p(L) r = sum_j c_j r^T T_j(L~) r``.
    """
    ratio = min(1.0, cutoff / lambda_max)
    c = lowpass_chebyshev_coefficients(ratio, order)
    if damping == "jackson":
        c = c * jackson_damping(order)
    return c @ mu[: order + 1]


class _MomentCache:
    """Probe moments grown on demand, in probe count and in order.

    With a deflation basis ``Q`` (orthonormal columns) the trace splits as
    ``tr(Q^T H Q) + tr((I - QQ^T) H (I - QQ^T))``: the first term is computed
    exactly from the moments of ``Q``, the second by Hutchinson on probes
    projected away from ``Q``. When ``Q`` nearly spans the passband the
    second term, and with it the estimator variance, almost vanishes.
    """

    def __init__(self, lap, n, seed, lambda_max, cap, Q=None):
        self.lap, self.n, self.seed, self.half, self.cap = lap, n, seed, lambda_max / 2.0, cap
        self.lambda_max = lambda_max
        self.Q = Q
        self.q_moments = None if Q is None else lap.chebyshev_moments(self.half, self.half, Q)
        self.batches = []
        self.n_probes = 0

    def add_probes(self, extra):
        R = probe_matrix(self.n, extra, self.seed, start=self.n_probes)
        if self.Q is not None:
            R -= self.Q @ (self.Q.T @ R)
        self.batches.append(self.lap.chebyshev_moments(self.half, self.half, R))
        self.n_probes += extra

    def get(self, order):
        order = min(order, self.cap)
        return np.hstack([b.extend(order)[: order + 1] for b in self.batches])

    def count(self, cutoff, order):
        """``(estimate, stderr, per-probe residual values)`` at ``cutoff``."""
        order = min(order, self.cap)
        if self.batches:
            vals = counts_from_moments(self.get(order), cutoff, self.lambda_max, order)
        else:  # Q spans the whole space, the trace is exact
            vals = np.zeros(1)
        base = 0.0
        if self.q_moments is not None:
            mq = self.q_moments.extend(order)[: order + 1]
            base = float(counts_from_moments(mq, cutoff, self.lambda_max, order).sum())
        if not self.batches:
            se = 0.0
        elif vals.size > 1:
            se = float(vals.std(ddof=1) / math.sqrt(vals.size))
        else:
            se = math.inf
        return base + float(vals.mean()), se, vals


def _coarse_cutoff(moments, k, target, lmax, delta, theta, cap, steps=20):
    """Cutoff whose estimated count is about ``target`` and confidently above ``k``."""
    lo, hi = 0.0, lmax
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        c, se, _ = moments.count(mid, order_for_cutoff(mid, lmax, delta, theta, cap))
        if c < target or c - 2.0 * se < k + 1:
            lo = mid
        elif c > 1.5 * target + 2:
            hi = mid
        else:
            return mid
    return hi


def deflation_basis(lap, k, lmax, seed=0, num_probes=None, delta=0.1, theta=0.1,
                    cap=MAX_BISECTION_ORDER):
    """Orthonormal basis approximately spanning the eigenvectors below ``lambda_{k+s}``.

    Filters ``k + max(3, k/2) + 10`` Gaussian columns with a low-pass at a
    cutoff whose estimated count is about ``k + max(3, k/2)`` and
    orthonormalises the result. Small graphs get the identity.
    """
    n = lap.n
    target = k + max(3, math.ceil(k / 2))
    s = target + 10
    if s >= n:
        return np.eye(n), lmax
    # probe stream distinct from the one the caller uses on the deflated residual
    coarse = _MomentCache(lap, n, (int(seed) + 1) % 2**63, lmax, cap)
    coarse.add_probes(num_probes or default_num_probes(n))
    c0 = _coarse_cutoff(coarse, k, target, lmax, delta, theta, cap)
    m = order_for_cutoff(c0, lmax, delta, theta, min(cap, BASIS_ORDER_CAP))
    filt = design_filter(IdealLowPass(c0, lmax), m)
    S = np.random.default_rng([int(seed), 1 << 32]).standard_normal((n, s))
    Q, _ = np.linalg.qr(apply_filter(filt, lap, S))
    return Q, c0


def estimate_lambda_k(lap, k, num_probes=None, max_bisections=30, seed=0,
                      max_probes=None, delta=0.1, theta=BISECTION_THETA, rel_tol=1e-3,
                      order_cap=MAX_BISECTION_ORDER, deflate=True):
    """Locate a cutoff in ``[lambda_k, lambda_{k+1})`` by bisection on ``(0, lambda_max]``.

    Counts include the zero eigenvalue. A trial cutoff is accepted once its
    estimated count lies within ``slack / 2`` of ``k``, with
    ``slack = max(1/2, 0.05 k)``; otherwise the bracket ``count(lo) < k <=
    count(hi)`` is halved. When the estimate sits within two standard
    errors of a decision boundary the probe set is doubled (up to
    ``max_probes``, default four times the initial count) before deciding.

    The filter order at each trial cutoff comes from the order table built
    with transition band ``theta`` (narrower than the clustering filter's,
    so that eigenvalues close to the cutoff are resolved), capped at
    ``order_cap``.

    With ``deflate`` the trace estimator is split over a filtered low-rank
    basis (see :func:`deflation_basis`), which removes most of the
    Hutchinson variance for about ``1.5 k + 13`` extra filtered columns, so
    far fewer probes are needed (``default_num_probes(N, deflated=True)``).
    Chebyshev moments of the probes are computed once and only extended
    when a deeper cutoff needs a higher order, so each trial cutoff costs a
    dot product with its filter coefficients instead of a filtering pass.

    Returns the accepted cutoff, or the midpoint of the final bracket with
    ``exhausted=True`` (and a :class:`BisectionExhaustedWarning`) when the
    bracket shrinks below ``rel_tol * lambda_max`` or ``max_bisections``
    runs out.
    """
    n = lap.n
    if not (1 <= k < n):
        raise ValueError(f"need 1 <= k < N, got k={k}, N={n}")
    lmax = estimate_lambda_max(lap)
    if num_probes is None:
        num_probes = default_num_probes(n, deflated=deflate)
    if max_probes is None:
        max_probes = 4 * num_probes
    half_width = 0.5 * max(0.5, 0.05 * k)
    low_edge, high_edge = k - half_width, k + half_width

    lo, hi = 0.0, lmax
    Q = None
    if deflate:
        Q, hi = deflation_basis(lap, k, lmax, seed, None, delta, cap=order_cap)
    coarse_hi = hi
    moments = _MomentCache(lap, n, seed, lmax, order_cap, Q)
    if Q is None or Q.shape[1] < n:
        moments.add_probes(num_probes)
    trace = []
    count = float("nan")
    widened = False
    step = 0
    while step < max_bisections:
        step += 1
        mid = 0.5 * (lo + hi)
        order = order_for_cutoff(mid, lmax, delta, theta, order_cap)
        while True:
            count, se, vals = moments.count(mid, order)
            ambiguous = min(abs(count - low_edge), abs(count - high_edge)) < 2.0 * se
            have = moments.n_probes
            if not ambiguous or have == 0 or have >= max_probes:
                break
            moments.add_probes(min(have, max_probes - have))
        rec = {"step": step, "lo": lo, "hi": hi, "cutoff": mid, "count": count,
               "stderr": se if math.isfinite(se) else None, "order": order,
               "probes": int(moments.n_probes)}
        trace.append(rec)
        log.debug(json.dumps(rec))
        if low_edge <= count < high_edge:
            return LambdaKEstimate(k, mid, (lo, hi), count, step, False, trace)
        if count < low_edge:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rel_tol * lmax:
            if not widened and hi == coarse_hi < lmax:
                # the coarse upper bracket was too low: reopen it once
                hi, widened = lmax, True
                continue
            break
    mid = 0.5 * (lo + hi)
    warnings.warn(
        f"bisection for lambda_{k} ended without hitting count {k} "
        f"(bracket [{lo:.4g}, {hi:.4g}], last count {count:.2f})",
        BisectionExhaustedWarning,
    )
    return LambdaKEstimate(k, mid, (lo, hi), count, len(trace), True, trace)
