"""Point sets, kNN similarity graphs and the combinatorial Laplacian."""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, reverse_cuthill_mckee
from scipy.spatial import cKDTree

from . import _kernels
from .errors import DisconnectedGraph, InvalidGraph, NoConvergenceWarning

POINTS_MAGIC = b"FSCPTS01"
CSR_MAGIC = b"FSCCSR01"


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"points must be an N x dim array with N, dim >= 1, got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain non-finite values")
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (pts.shape[0],):
                raise ValueError("labels must have one entry per point")
            if lab.size and (not np.issubdtype(lab.dtype, np.integer) or lab.min() < 0):
                raise ValueError("labels must be non-negative integers")
            object.__setattr__(self, "labels", lab.astype(np.int64))

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def num_labels(self):
        return 0 if self.labels is None else int(self.labels.max()) + 1


@dataclass(frozen=True, eq=False)
class SparseGraph:
    """Symmetric, non-negative, zero-diagonal, connected adjacency in CSR form."""

    n_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    check_connected: bool = field(default=True, repr=False)

    def __post_init__(self):
        n = int(self.n_nodes)
        W = sp.csr_matrix(
            (np.asarray(self.data, np.float64), np.asarray(self.indices), np.asarray(self.indptr)),
            shape=(n, n),
        )
        W.sum_duplicates()
        W.sort_indices()
        if W.nnz and W.data.min() < 0:
            raise InvalidGraph("edge weights must be non-negative")
        if W.diagonal().any():
            raise InvalidGraph("adjacency must have a zero diagonal")
        if (W != W.T).nnz:
            raise InvalidGraph("adjacency is not symmetric")
        object.__setattr__(self, "n_nodes", n)
        object.__setattr__(self, "indptr", W.indptr.astype(np.int64))
        object.__setattr__(self, "indices", W.indices.astype(np.int64))
        object.__setattr__(self, "data", W.data.astype(np.float64))
        for arr in (self.indptr, self.indices, self.data):
            arr.flags.writeable = False
        if self.check_connected:
            ncomp = self.n_components()
            if ncomp != 1:
                raise DisconnectedGraph(ncomp, "try a larger K")

    @classmethod
    def from_scipy(cls, W, check_connected=True):
        W = sp.csr_matrix(W, dtype=np.float64)
        return cls(W.shape[0], W.indptr, W.indices, W.data, check_connected=check_connected)

    @classmethod
    def from_edges(cls, n, i, j, w=None, check_connected=True):
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        w = np.ones(i.shape) if w is None else np.asarray(w, dtype=np.float64)
        W = sp.coo_matrix((np.r_[w, w], (np.r_[i, j], np.r_[j, i])), shape=(n, n)).tocsr()
        return cls.from_scipy(W, check_connected=check_connected)

    def to_scipy(self):
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(self.n_nodes, self.n_nodes))

    def n_components(self):
        return connected_components(self.to_scipy(), directed=False)[0]

    @property
    def num_edges(self):
        return int(self.indices.shape[0] // 2)

    def edge_list(self):
        """Edges as (i, j, w) arrays with i < j."""
        coo = sp.triu(self.to_scipy(), k=1).tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order].astype(np.int64), coo.col[order].astype(np.int64), coo.data[order]


def _knn_indices(points, K):
    """Indices of the K nearest neighbours of every point, self excluded."""
    n, dim = points.shape
    if dim <= 3:
        tree = cKDTree(points)
        _, idx = tree.query(points, k=K + 1)
        idx = np.atleast_2d(idx)
        out = np.empty((n, K), dtype=np.int64)
        for r in range(n):
            row = idx[r]
            keep = row[row != r]
            # with duplicates the query point may not come back at all
            out[r] = keep[:K]
        return out
    out = np.empty((n, K), dtype=np.int64)
    sq = np.einsum("ij,ij->i", points, points)
    chunk = max(1, int(2**24 // max(n, 1)))
    for s in range(0, n, chunk):
        e = min(n, s + chunk)
        d2 = sq[s:e, None] - 2.0 * points[s:e] @ points.T + sq[None, :]
        d2[np.arange(e - s), np.arange(s, e)] = np.inf
        out[s:e] = np.argsort(d2, axis=1, kind="stable")[:, :K]
    return out


def build_knn_graph(points, K, weighting="binary", sigma=None, check_connected=True):
    """Union-symmetrised K-nearest-neighbour graph.

    Parameters
    ----------
    points : PointSet or array_like
        N x dim coordinates.
    K : int
        Neighbours per point, ``1 <= K < N``.
    weighting : {"binary", "gaussian"}
        Unit weights, or ``exp(-d^2 / 2 sigma^2)``.
    sigma : float, optional
        Kernel width for gaussian weighting; defaults to the median kNN
        distance.

    Raises
    ------
    DisconnectedGraph
        When the union graph has more than one component.
    """
    pts = points.points if isinstance(points, PointSet) else PointSet(points).points
    n = pts.shape[0]
    K = int(K)
    if K < 1 or K >= n:
        raise ValueError(f"K must satisfy 1 <= K < N (K={K}, N={n})")
    nbr = _knn_indices(pts, K)
    rows = np.repeat(np.arange(n, dtype=np.int64), K)
    cols = nbr.ravel()
    A = sp.coo_matrix((np.ones(rows.shape[0]), (rows, cols)), shape=(n, n)).tocsr()
    A = A.maximum(A.T).tocsr()
    A.sort_indices()
    A.data[:] = 1.0
    if weighting == "gaussian":
        r, c = A.nonzero()
        d2 = np.einsum("ij,ij->i", pts[r] - pts[c], pts[r] - pts[c])
        if sigma is None:
            sigma = float(np.sqrt(np.median(d2))) or 1.0
        A = sp.csr_matrix((np.exp(-d2 / (2.0 * sigma**2)), (r, c)), shape=(n, n))
    elif weighting != "binary":
        raise ValueError(f"unknown weighting {weighting!r}")
    return SparseGraph.from_scipy(A, check_connected=check_connected)


def default_knn_k(n, base="e"):
    """``ceil(log N)``; natural log unless ``base`` is 10 or 2."""
    logf = {"e": math.log, "10": math.log10, "2": math.log2}[str(base)]
    return max(1, math.ceil(logf(n)))


class LaplacianOperator:
    """Matrix-free combinatorial Laplacian ``L = S - W``.

    Above ``reorder_min`` nodes the CSR arrays are stored in reverse
    Cuthill-McKee order, which keeps the gathers of the mat-mat kernels
    cache friendly; inputs and outputs are permuted at the boundary, so the
    ordering is invisible to callers.

    ``n_matvecs`` counts single-column products and is the only mutable
    state besides the cached spectral bound.
    """

    reorder_min = 2000
    fused = True

    def __init__(self, graph: SparseGraph, reorder=None):
        self.graph = graph
        self.n = graph.n_nodes
        W = graph.to_scipy()
        self._W = W
        self.strengths = np.asarray(W.sum(axis=1)).ravel()
        self.strengths.flags.writeable = False
        self.lambda_max_estimate = None
        self.lambda_max_converged = None
        self.n_matvecs = 0
        if reorder is None:
            reorder = self.n >= self.reorder_min
        if reorder:
            perm = reverse_cuthill_mckee(W, symmetric_mode=True).astype(np.int64)
            Wp = W[perm][:, perm].tocsr()
            Wp.sort_indices()
            self._perm = perm
        else:
            Wp = W
            self._perm = None
        self._Wp = Wp
        self._indptr = Wp.indptr.astype(np.int64)
        self._indices = Wp.indices.astype(np.int64)
        self._data = Wp.data.astype(np.float64)
        self._strengths_p = np.asarray(Wp.sum(axis=1)).ravel()

    def _to_internal(self, X):
        X = np.asarray(X, dtype=np.float64)
        return np.ascontiguousarray(X if self._perm is None else X[self._perm])

    def _from_internal(self, Y):
        if self._perm is None:
            return Y
        out = np.empty_like(Y)
        out[self._perm] = Y
        return out

    def _as_2d(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] != self.n:
            raise ValueError(f"expected {self.n} rows, got {X.shape[0]}")
        return (X[:, None], True) if X.ndim == 1 else (X, False)

    def matmat(self, X, backend=None):
        X2, squeeze = self._as_2d(X)
        out = _kernels.laplacian_matmat(self._indptr, self._indices, self._data, self._strengths_p,
                                        self._to_internal(X2), backend=backend, W=self._Wp)
        self.n_matvecs += X2.shape[1]
        out = self._from_internal(out)
        return out[:, 0] if squeeze else out

    matvec = matmat

    def __matmul__(self, X):
        return self.matmat(X)

    def chebyshev(self, coeffs, center, half, X, backend=None):
        """``sum_j coeffs[j] T_j((L - center) / half) X``; ``len(coeffs) - 1`` products per column."""
        X2, squeeze = self._as_2d(X)
        out = _kernels.chebyshev_apply(self._indptr, self._indices, self._data, self._strengths_p,
                                       coeffs, center, half, self._to_internal(X2),
                                       backend=backend, W=self._Wp)
        self.n_matvecs += (len(coeffs) - 1) * X2.shape[1]
        out = self._from_internal(out)
        return out[:, 0] if squeeze else out

    def chebyshev_moments(self, center, half, X, M=None, backend=None):
        """Moments ``x^T T_j((L - center) / half) x`` of each column of ``X``.

        With ``M`` given, returns the ``(M + 1, p)`` array; otherwise a
        resumable :class:`~fastsc._kernels.ChebyshevMoments`.
        """
        X2, _ = self._as_2d(X)
        cm = _kernels.ChebyshevMoments(self._indptr, self._indices, self._data, self._strengths_p,
                                       center, half, self._to_internal(X2), backend=backend,
                                       W=self._Wp, counter=self._count)
        if M is None:
            return cm
        return cm.extend(M)[: int(M) + 1]

    def _count(self, k):
        self.n_matvecs += k

    def quadratic_form(self, x):
        return float(x @ self.matmat(x))

    def to_scipy(self):
        return (sp.diags(self.strengths) - self._W).tocsr()

    def to_dense(self):
        return self.to_scipy().toarray()


def build_laplacian(graph):
    if graph.check_connected is False and graph.n_components() != 1:
        raise DisconnectedGraph(graph.n_components())
    return LaplacianOperator(graph)


def estimate_lambda_max(lap, tol=1e-2, max_iter=5000, seed=0):
    """Upper estimate of the largest Laplacian eigenvalue by power iteration.

    Iterates until the relative eigen-residual ``||Lv - rho v|| / rho`` drops
    below ``tol / 10`` and returns ``rho * (1 + tol)``. The residual only
    bounds the distance to *some* eigenvalue, and on kNN graphs the top of
    the spectrum is crowded, so the stopping threshold is kept an order of
    magnitude below the inflation. The result is cached on
    ``lap``. If ``max_iter`` is hit the estimate is inflated by a further
    1.01 and a :class:`NoConvergenceWarning` is issued.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if lap.lambda_max_estimate is not None:
        return lap.lambda_max_estimate
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(lap.n)
    v -= v.mean()  # the constant vector is in the nullspace
    if not np.any(v):
        v[0] = 1.0
    v /= np.linalg.norm(v)
    rho = 0.0
    converged = False
    for _ in range(max_iter):
        w = lap.matvec(v)
        rho = float(v @ w)
        if rho <= 0:
            break
        res = np.linalg.norm(w - rho * v)
        if res <= 0.1 * tol * rho:
            converged = True
            break
        v = w / np.linalg.norm(w)
    if rho <= 0:
        # only possible for an edgeless graph
        rho = 2.0 * float(lap.strengths.max()) or 1.0
    est = rho * (1.0 + tol)
    if not converged:
        est *= 1.01
        warnings.warn(f"power iteration did not converge in {max_iter} steps", NoConvergenceWarning)
    # never exceed the Gershgorin bound 2 max s_i
    est = min(est, 2.0 * float(lap.strengths.max())) if lap.strengths.max() > 0 else est
    lap.lambda_max_estimate = est
    lap.lambda_max_converged = converged
    return est


# ----------------------------------------------------------------------------
# I/O


def read_points_csv(path):
    """CSV with one point per row; an integer final column is read as labels.

    A header line is skipped when its first field is not numeric. A label
    column is only recognised when the header names it ``label``.
    """
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
    header = None
    try:
        float(first.split(",")[0])
    except ValueError:
        header = [h.strip() for h in first.split(",")]
    arr = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    if header and header[-1] == "label":
        return PointSet(arr[:, :-1], arr[:, -1].astype(np.int64))
    return PointSet(arr)


def write_points_csv(path, ps):
    """Write ``x,y[,label]`` rows with round-trip exact floats; ``path`` may be a file object."""
    if hasattr(path, "write"):
        _write_points(path, ps)
        return
    with open(path, "w") as fh:
        _write_points(fh, ps)


def _write_points(fh, ps):
    dim = ps.dim
    names = ["x", "y", "z"][:dim] if dim <= 3 else [f"x{i}" for i in range(dim)]
    fh.write(",".join(names + (["label"] if ps.labels is not None else [])) + "\n")
    for r in range(ps.n):
        vals = [repr(float(v)) for v in ps.points[r]]
        if ps.labels is not None:
            vals.append(str(int(ps.labels[r])))
        fh.write(",".join(vals) + "\n")


def write_matrix_bin(path, X):
    """Binary matrix: magic, N, dim (uint64 little endian), then row-major float64."""
    X = np.ascontiguousarray(X, dtype="<f8")
    if X.ndim == 1:
        X = X[:, None]
    with open(path, "wb") as fh:
        fh.write(POINTS_MAGIC)
        fh.write(struct.pack("<QQ", X.shape[0], X.shape[1]))
        fh.write(X.tobytes())


def read_matrix_bin(path):
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != POINTS_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        n, dim = struct.unpack("<QQ", fh.read(16))
        X = np.frombuffer(fh.read(), dtype="<f8")
    if X.size != n * dim:
        raise ValueError(f"{path}: truncated matrix")
    return X.reshape(n, dim).astype(np.float64)


def write_points_bin(path, ps):
    write_matrix_bin(path, ps.points)


def read_points_bin(path):
    return PointSet(read_matrix_bin(path))


def write_edge_list(path, graph):
    """``# n=N`` then one ``i,j,w`` line per edge with ``i < j``; ``path`` may be a file object."""
    if hasattr(path, "write"):
        _write_edges(path, graph)
        return
    with open(path, "w") as fh:
        _write_edges(fh, graph)


def _write_edges(fh, graph):
    i, j, w = graph.edge_list()
    fh.write(f"# n={graph.n_nodes}\n")
    for a, b, c in zip(i.tolist(), j.tolist(), w.tolist()):
        fh.write(f"{a},{b},{c!r}\n")


def read_edge_list(path, n=None, check_connected=True):
    """Edge list ``i,j,w`` with an optional ``# n=N`` first line."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    rows = []
    for line in lines:
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            if s[1:].strip().startswith("n=") and n is None:
                n = int(s[1:].strip()[2:])
            continue
        if s[0].isalpha():
            continue
        a, b, *rest = s.split(",")
        rows.append((int(a), int(b), float(rest[0]) if rest else 1.0))
    arr = np.array(rows, dtype=np.float64).reshape(-1, 3)
    i, j = arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64)
    if n is None:
        n = int(max(i.max(), j.max())) + 1
    return SparseGraph.from_edges(n, i, j, arr[:, 2], check_connected=check_connected)


def write_csr_bin(path, graph):
    """Binary CSR: magic, N, nnz (uint64), indptr, indices (int64), data (float64)."""
    with open(path, "wb") as fh:
        fh.write(CSR_MAGIC)
        fh.write(struct.pack("<QQ", graph.n_nodes, graph.indices.shape[0]))
        fh.write(np.ascontiguousarray(graph.indptr, "<i8").tobytes())
        fh.write(np.ascontiguousarray(graph.indices, "<i8").tobytes())
        fh.write(np.ascontiguousarray(graph.data, "<f8").tobytes())


def read_csr_bin(path, check_connected=True):
    with open(path, "rb") as fh:
        if fh.read(8) != CSR_MAGIC:
            raise ValueError(f"{path}: not a CSR file")
        n, nnz = struct.unpack("<QQ", fh.read(16))
        indptr = np.frombuffer(fh.read(8 * (n + 1)), "<i8")
        indices = np.frombuffer(fh.read(8 * nnz), "<i8")
        data = np.frombuffer(fh.read(8 * nnz), "<f8")
    return SparseGraph(n, indptr.copy(), indices.copy(), data.copy(), check_connected=check_connected)


def read_graph(path, check_connected=True):
    path = Path(path)
    with path.open("rb") as fh:
        head = fh.read(8)
    if head == CSR_MAGIC:
        return read_csr_bin(path, check_connected=check_connected)
    return read_edge_list(path, check_connected=check_connected)


def read_points(path):
    """Points from CSV or the binary matrix format, detected by magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head == POINTS_MAGIC:
        return read_points_bin(path)
    return read_points_csv(path)
