"""Fast versus classical benchmark on synthetic Gaussian mixtures.

Phase timings follow the usual split: graph construction (kNN graph and
Laplacian) is timed on its own and excluded from ``t_total``; the spectral
phase is the eigensolve (classical) or the lambda_max and lambda_k estimates
(fast); the clustering phase is k-means (classical) or filtering plus k-means
(fast).
"""
from __future__ import annotations

import csv
import math
import re
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cluster import PipelineConfig, accelerated_spectral_clustering, classical_spectral_clustering
from .datasets import default_paper_spec, generate_gaussian_mixture
from .features import gaussian_signals
from .filters import IdealLowPass, apply_filter, design_filter
from .graph import build_knn_graph, build_laplacian, default_knn_k, estimate_lambda_max
from .stability import adjusted_rand_index, derive_seed

DEFAULT_METHODS = ("classical", "fast(k)", "fast(2k)", "fast(3k)")
CSV_COLUMNS = ("method", "N", "realization", "ari", "t_graph", "t_spectral", "t_cluster", "t_total")
SUMMARY_STATS = ("mean", "q10", "q90")

_METHOD_RE = re.compile(r"^fast\((\d*)(k?)\)$")


@dataclass
class BenchmarkRecord:
    method: str
    N: int
    k: int
    seed: int
    realization: int
    ari: float
    t_graph: float
    t_spectral: float
    t_cluster: float
    t_total: float
    error: str | None = None

    @property
    def ok(self):
        return self.error is None


def parse_method(method, k):
    """``"classical"`` -> ``None``; ``"fast(2k)"`` -> ``2k``; ``"fast(25)"`` -> 25."""
    if method == "classical":
        return None
    m = _METHOD_RE.match(method)
    if m is None or (m.group(1) == "" and m.group(2) == ""):
        raise ValueError(f"unknown method {method!r}; expected classical or fast(<a>k) / fast(<eta>)")
    mult = int(m.group(1)) if m.group(1) else 1
    return mult * k if m.group(2) else mult


def _run_realization(n, r, methods, k, seed, config, spec_factory):
    data_seed = derive_seed(seed, n, r)
    ps = generate_gaussian_mixture(spec_factory(n, k, data_seed))
    out = []
    try:
        t0 = time.perf_counter()
        graph = build_knn_graph(ps, default_knn_k(n))
        t_graph = time.perf_counter() - t0
    except Exception as exc:  # e.g. a disconnected draw
        return [BenchmarkRecord(m, n, k, data_seed, r, math.nan, math.nan, math.nan, math.nan,
                                math.nan, repr(exc)) for m in methods]
    for method in methods:
        run_seed = derive_seed(seed, n, r, 1)
        try:
            eta = parse_method(method, k)
            t0 = time.perf_counter()
            # fresh operator per method so no cached lambda_max leaks between timings
            lap = build_laplacian(graph)
            t_lap = time.perf_counter() - t0
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                if eta is None:
                    res = classical_spectral_clustering(graph, k, seed=run_seed, config=config, lap=lap)
                else:
                    res = accelerated_spectral_clustering(graph, k, eta, seed=run_seed, config=config,
                                                          lap=lap)
            d = res.diagnostics
            ari = adjusted_rand_index(ps.labels, res.labels)
            out.append(BenchmarkRecord(method, n, k, data_seed, r, float(ari), t_graph + t_lap,
                                       d["t_spectral"], d["t_cluster"],
                                       d["t_spectral"] + d["t_cluster"]))
        except Exception as exc:
            out.append(BenchmarkRecord(method, n, k, data_seed, r, math.nan, t_graph, math.nan,
                                       math.nan, math.nan, repr(exc)))
    return out


def summarize(records):
    """Mean, 10% and 90% quantiles per (N, method), failed runs excluded.

    Rows use the ``realization`` column for the statistic name.
    """
    rows = []
    keys = list(dict.fromkeys((r.N, r.method) for r in records))
    keys.sort(key=lambda t: t[0])
    fields = CSV_COLUMNS[3:]
    for n, method in keys:
        good = [r for r in records if r.N == n and r.method == method and r.ok]
        for stat in SUMMARY_STATS:
            row = {"method": method, "N": n, "realization": stat}
            for f in fields:
                vals = np.array([getattr(r, f) for r in good], dtype=float)
                if vals.size == 0:
                    row[f] = math.nan
                elif stat == "mean":
                    row[f] = float(vals.mean())
                else:
                    row[f] = float(np.quantile(vals, 0.1 if stat == "q10" else 0.9))
            rows.append(row)
    return rows


def run_benchmark(sizes, methods=DEFAULT_METHODS, realizations=20, seed=0, k=10,
                  config=None, parallel=False, spec_factory=default_paper_spec):
    """Run every method on ``realizations`` mixture draws for each N.

    Returns ``(records, summary)``. Records come back ordered by N,
    realization and method regardless of ``parallel``; failed runs carry
    ``error`` and NaN metrics instead of aborting the benchmark.
    """
    methods = tuple(methods)
    for m in methods:
        parse_method(m, k)
    if realizations < 1:
        raise ValueError("realizations must be >= 1")
    config = config or PipelineConfig()
    jobs = [(int(n), r) for n in sizes for r in range(realizations)]
    args = [(n, r, methods, k, seed, config, spec_factory) for n, r in jobs]
    if parallel and len(jobs) > 1:
        with ProcessPoolExecutor() as ex:
            chunks = list(ex.map(_run_realization, *zip(*args)))
    else:
        chunks = [_run_realization(*a) for a in args]
    records = [rec for chunk in chunks for rec in chunk]
    return records, summarize(records)


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_benchmark_csv(path, records, summary=()):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
        for row in summary:
            w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])


@dataclass
class ScalingFit:
    sizes: np.ndarray
    times: np.ndarray
    edges: np.ndarray
    slope: float
    intercept: float
    r2: float
    order: int
    eta: int


def linear_fit(x, y):
    """Least-squares line ``y = a x + b``; returns ``(a, b, r2)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a, b = np.polyfit(x, y, 1)
    resid = y - (a * x + b)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), r2


def filtering_scaling(sizes=(2000, 4000, 8000, 16000), order=100, eta=20, repeats=3, seed=0,
                      k=10, backend=None):
    """Time the filtering step alone at fixed ``order`` and ``eta`` for each N.

    Each size is timed ``repeats`` times and the fastest run kept, then a
    straight line is fitted against N.
    """
    times, edges = [], []
    for n in sizes:
        ps = generate_gaussian_mixture(default_paper_spec(int(n), k, derive_seed(seed, n)))
        graph = build_knn_graph(ps, default_knn_k(int(n)), check_connected=False)
        lap = build_laplacian(graph)
        lmax = estimate_lambda_max(lap)
        filt = design_filter(IdealLowPass(0.01 * lmax, lmax), order)
        R = gaussian_signals(int(n), eta, seed)
        apply_filter(filt, lap, R, backend=backend)  # warm-up (JIT, caches)
        best = math.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            apply_filter(filt, lap, R, backend=backend)
            best = min(best, time.perf_counter() - t0)
        times.append(best)
        edges.append(graph.num_edges)
    a, b, r2 = linear_fit(sizes, times)
    return ScalingFit(np.asarray(sizes), np.asarray(times), np.asarray(edges), a, b, r2, order, eta)
