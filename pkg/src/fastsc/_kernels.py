"""Hot loops: Laplacian mat-mat, Chebyshev recurrence, k-means assignment.

Each kernel has a numba implementation and a numpy/scipy fallback. The
backend is picked once at import from ``FASTSC_BACKEND`` (``numba`` or
``numpy``); ``FASTSC_DISABLE_NUMBA=1`` is accepted as a shorthand. When
numba cannot be imported the numpy path is used silently.

All kernels take a ``backend`` argument so both paths can be exercised in
one process (tests, ``benchmarks/bench_backends.py``).
"""
import os

import numpy as np
import scipy.sparse as sp

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


def _default_backend():
    env = os.environ.get("FASTSC_BACKEND", "").strip().lower()
    if os.environ.get("FASTSC_DISABLE_NUMBA", "") not in ("", "0"):
        env = "numpy"
    if env not in ("", "numba", "numpy"):
        raise ValueError(f"FASTSC_BACKEND must be 'numba' or 'numpy', got {env!r}")
    if env == "numpy" or not HAVE_NUMBA:
        return "numpy"
    return "numba"


BACKEND = _default_backend()


def resolve_backend(backend=None):
    if backend is None:
        return BACKEND
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return backend


# ----------------------------------------------------------------------------
# numba kernels

if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _lap_matmat_nb(indptr, indices, data, strengths, X, out):
        n, p = X.shape
        for i in range(n):
            s = strengths[i]
            for c in range(p):
                out[i, c] = s * X[i, c]
            for jj in range(indptr[i], indptr[i + 1]):
                j = indices[jj]
                w = data[jj]
                for c in range(p):
                    out[i, c] -= w * X[j, c]

    @njit(cache=True, nogil=True)
    def _lap_matvec_nb(indptr, indices, data, strengths, x, out):
        for i in range(x.shape[0]):
            acc = strengths[i] * x[i]
            for jj in range(indptr[i], indptr[i + 1]):
                acc -= data[jj] * x[indices[jj]]
            out[i] = acc

    @njit(cache=True, nogil=True)
    def _cheby_nb(indptr, indices, data, strengths, coeffs, center, half, X):
        # p(L) X with p = sum_j coeffs[j] T_j((L - center) / half)
        n, p = X.shape
        m = coeffs.shape[0] - 1
        out = np.empty((n, p))
        t_prev = X.copy()
        t_cur = np.empty((n, p))
        t_next = np.empty((n, p))
        c0 = coeffs[0]
        for i in range(n):
            for c in range(p):
                out[i, c] = c0 * X[i, c]
        if m == 0:
            return out
        inv = 1.0 / half
        # T_1 = (L - center) X / half
        for i in range(n):
            s = strengths[i] - center
            for c in range(p):
                t_cur[i, c] = s * X[i, c]
            for jj in range(indptr[i], indptr[i + 1]):
                j = indices[jj]
                w = data[jj]
                for c in range(p):
                    t_cur[i, c] -= w * X[j, c]
            for c in range(p):
                t_cur[i, c] *= inv
                out[i, c] += coeffs[1] * t_cur[i, c]
        two_inv = 2.0 * inv
        for k in range(2, m + 1):
            ck = coeffs[k]
            for i in range(n):
                s = strengths[i] - center
                for c in range(p):
                    t_next[i, c] = s * t_cur[i, c]
                for jj in range(indptr[i], indptr[i + 1]):
                    j = indices[jj]
                    w = data[jj]
                    for c in range(p):
                        t_next[i, c] -= w * t_cur[j, c]
                for c in range(p):
                    v = two_inv * t_next[i, c] - t_prev[i, c]
                    t_next[i, c] = v
                    out[i, c] += ck * v
            t_prev, t_cur, t_next = t_cur, t_next, t_prev
        return out

    @njit(cache=True, nogil=True)
    def _lap_shift_nb(indptr, indices, data, strengths, center, V, out):
        n, p = V.shape
        for i in range(n):
            sh = strengths[i] - center
            for c in range(p):
                out[i, c] = sh * V[i, c]
            for kk in range(indptr[i], indptr[i + 1]):
                j = indices[kk]
                w = data[kk]
                for c in range(p):
                    out[i, c] -= w * V[j, c]

    @njit(cache=True, nogil=True)
    def _moments_nb(indptr, indices, data, strengths, center, half, t_prev, t_cur,
                    j0, j1, mu, mu0, mu1):
        # entering with t_prev = T_{j0-1}, t_cur = T_{j0}; fills mu[2j], mu[2j+1]
        # for j0 <= j < j1 using T_{2j} = 2 T_j^2 - I, T_{2j+1} = 2 T_{j+1} T_j - T_1
        n, p = t_cur.shape
        two_inv = 2.0 / half
        t_next = np.empty((n, p))
        acc = np.zeros(p)
        acc2 = np.zeros(p)
        for jstep in range(j0, j1):
            _lap_shift_nb(indptr, indices, data, strengths, center, t_cur, t_next)
            acc[:] = 0.0
            acc2[:] = 0.0
            for i in range(n):
                for c in range(p):
                    cur = t_cur[i, c]
                    v = two_inv * t_next[i, c] - t_prev[i, c]
                    t_next[i, c] = v
                    acc[c] += cur * cur
                    acc2[c] += v * cur
            for c in range(p):
                mu[2 * jstep, c] = 2.0 * acc[c] - mu0[c]
                mu[2 * jstep + 1, c] = 2.0 * acc2[c] - mu1[c]
            t_prev, t_cur, t_next = t_cur, t_next, t_prev
        return t_prev, t_cur

    @njit(cache=True, nogil=True)
    def _assign_nb(X, C, labels, mind):
        n, d = X.shape
        k = C.shape[0]
        total = 0.0
        for i in range(n):
            best = np.inf
            bj = 0
            for j in range(k):
                acc = 0.0
                for t in range(d):
                    diff = X[i, t] - C[j, t]
                    acc += diff * diff
                if acc < best:
                    best = acc
                    bj = j
            labels[i] = bj
            mind[i] = best
            total += best
        return total


    @njit(cache=True, nogil=True)
    def _centre_sums_nb(X, labels, k):
        n, d = X.shape
        sums = np.zeros((k, d))
        counts = np.zeros(k)
        for i in range(n):
            j = labels[i]
            counts[j] += 1.0
            for t in range(d):
                sums[j, t] += X[i, t]
        return sums, counts


# ----------------------------------------------------------------------------
# public entry points


def laplacian_matmat(indptr, indices, data, strengths, X, backend=None, W=None):
    """Return ``(S - W) @ X`` for CSR adjacency ``W`` and strengths ``S``."""
    backend = resolve_backend(backend)
    if backend == "numba":
        X = np.ascontiguousarray(X, dtype=np.float64)
        out = np.empty_like(X)
        if X.shape[1] == 1:
            _lap_matvec_nb(indptr, indices, data, strengths, X[:, 0], out[:, 0])
        else:
            _lap_matmat_nb(indptr, indices, data, strengths, X, out)
        return out
    if W is None:
        n = strengths.shape[0]
        W = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    return strengths[:, None] * X - W @ X


def chebyshev_apply(indptr, indices, data, strengths, coeffs, center, half, X,
                    backend=None, W=None):
    """Apply ``sum_j coeffs[j] T_j((L - center)/half)`` to the columns of ``X``.

    Costs exactly ``len(coeffs) - 1`` Laplacian products per column.
    """
    backend = resolve_backend(backend)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    if backend == "numba":
        return _cheby_nb(indptr, indices, data, strengths, coeffs,
                         float(center), float(half), X)
    if W is None:
        n = strengths.shape[0]
        W = sp.csr_matrix((data, indices, indptr), shape=(n, n))
    m = coeffs.shape[0] - 1
    out = coeffs[0] * X
    if m == 0:
        return out
    shift = (strengths - center)[:, None]

    def op(V):
        return (shift * V - W @ V) / half

    t_prev, t_cur = X, op(X)
    out += coeffs[1] * t_cur
    for k in range(2, m + 1):
        t_next = 2.0 * op(t_cur) - t_prev
        out += coeffs[k] * t_next
        t_prev, t_cur = t_cur, t_next
    return out


class ChebyshevMoments:
    """Resumable moments ``x^T T_j((L - center)/half) x`` for each column of ``X``.

    ``extend(M)`` grows the moment array to order ``M`` (rounded up to odd)
    from the stored recurrence state, one Laplacian product per column for
    every two new moments; ``(M + 2) // 2`` products in total. ``counter``
    is called with the number of single-column products performed.
    """

    def __init__(self, indptr, indices, data, strengths, center, half, X, backend=None, W=None,
                 counter=None):
        self.backend = resolve_backend(backend)
        self.args = (indptr, indices, data, strengths)
        self.center, self.half = float(center), float(half)
        n = strengths.shape[0]
        self.W = W if W is not None else sp.csr_matrix((data, indices, indptr), shape=(n, n))
        X = np.array(X, dtype=np.float64, order="C")  # the recurrence overwrites its state
        self.t_prev = X
        self.t_cur = self._op(X)
        self.mu0 = np.einsum("ij,ij->j", X, X)
        self.mu1 = np.einsum("ij,ij->j", X, self.t_cur)
        self.mu = np.vstack([self.mu0, self.mu1])
        self.j = 1  # t_cur holds T_j
        self.counter = counter
        self._count(X.shape[1])

    def _count(self, k):
        if self.counter is not None:
            self.counter(k)

    def _op(self, V):
        shift = (self.args[3] - self.center)[:, None]
        return (shift * V - self.W @ V) / self.half

    @property
    def order(self):
        return self.mu.shape[0] - 1

    def extend(self, M):
        j1 = (int(M) + 2) // 2 if M > self.order else self.j
        if j1 <= self.j:
            return self.mu
        p = self.t_cur.shape[1]
        mu = np.zeros((2 * j1, p))
        mu[: self.mu.shape[0]] = self.mu
        if self.backend == "numba":
            self.t_prev, self.t_cur = _moments_nb(*self.args, self.center, self.half,
                                                  self.t_prev, self.t_cur, self.j, j1,
                                                  mu, self.mu0, self.mu1)
        else:
            t_prev, t_cur = self.t_prev, self.t_cur
            for j in range(self.j, j1):
                t_next = 2.0 * self._op(t_cur) - t_prev
                mu[2 * j] = 2.0 * np.einsum("ij,ij->j", t_cur, t_cur) - self.mu0
                mu[2 * j + 1] = 2.0 * np.einsum("ij,ij->j", t_next, t_cur) - self.mu1
                t_prev, t_cur = t_cur, t_next
            self.t_prev, self.t_cur = t_prev, t_cur
        self._count((j1 - self.j) * p)
        self.j = j1
        self.mu = mu
        return mu


def chebyshev_moments(indptr, indices, data, strengths, center, half, X, M,
                      backend=None, W=None):
    """Per-column moments ``X[:, c]^T T_j((L - center)/half) X[:, c]``, j = 0..M.

    Returns an ``(M + 1, p)`` array.
    """
    cm = ChebyshevMoments(indptr, indices, data, strengths, center, half, X, backend, W)
    return cm.extend(M)[: int(M) + 1]


def assign_nearest(X, C, backend=None):
    """Nearest-centre labels, squared distances and their sum."""
    backend = resolve_backend(backend)
    X = np.ascontiguousarray(X, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    n = X.shape[0]
    if backend == "numba":
        labels = np.empty(n, dtype=np.int64)
        mind = np.empty(n)
        total = _assign_nb(X, C, labels, mind)
        return labels, mind, total
    # explicit differences: the expanded-norm trick loses precision near 0
    d2 = np.empty((n, C.shape[0]))
    for j in range(C.shape[0]):
        diff = X - C[j]
        d2[:, j] = np.einsum("ij,ij->i", diff, diff)
    labels = np.argmin(d2, axis=1).astype(np.int64)
    mind = d2[np.arange(n), labels]
    return labels, mind, float(mind.sum())


def centre_sums(X, labels, k, backend=None):
    """Per-cluster coordinate sums and member counts."""
    backend = resolve_backend(backend)
    if backend == "numba":
        return _centre_sums_nb(np.ascontiguousarray(X, dtype=np.float64),
                               np.ascontiguousarray(labels, dtype=np.int64), int(k))
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.empty((k, X.shape[1]))
    for t in range(X.shape[1]):
        sums[:, t] = np.bincount(labels, weights=X[:, t], minlength=k)
    return sums, counts
