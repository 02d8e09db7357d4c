"""Benchmark the numba kernels against the pure-numpy fallback.

Run with ``python3 benchmarks/bench_backends.py [--sizes 4000,16000,64000]``.
Both backends run in this process; the backend is chosen per call, so the
``FASTSC_BACKEND`` environment flag does not need to change.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from fastsc import _kernels
from fastsc.datasets import default_paper_spec, generate_gaussian_mixture
from fastsc.filters import IdealLowPass, apply_filter, design_filter
from fastsc.graph import build_knn_graph, build_laplacian, default_knn_k, estimate_lambda_max
from fastsc.kmeans import kmeans


def best_time(fn, repeats):
    fn()  # warm-up, triggers JIT compilation
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(n, eta, order, seed):
    ps = generate_gaussian_mixture(default_paper_spec(n, seed=seed))
    lap = build_laplacian(build_knn_graph(ps, default_knn_k(n), check_connected=False))
    lmax = estimate_lambda_max(lap)
    filt = design_filter(IdealLowPass(0.005 * lmax, lmax), order)
    rng = np.random.default_rng(seed)
    R = rng.standard_normal((n, eta))
    x = R[:, :1].copy()
    F = apply_filter(filt, lap, R)
    C = F[rng.choice(n, 10, replace=False)]
    half = lmax / 2
    return {
        "matvec": lambda b: lap.matmat(x, backend=b),
        f"matmat (p={eta})": lambda b: lap.matmat(R, backend=b),
        f"chebyshev filter (m={order}, p={eta})": lambda b: apply_filter(filt, lap, R, backend=b),
        f"moments (M={order}, p={eta})": lambda b: lap.chebyshev_moments(half, half, R, order,
                                                                         backend=b),
        "nearest centre (k=10)": lambda b: _kernels.assign_nearest(F, C, backend=b),
        "k-means (k=10, 5 replicates)": lambda b: kmeans(F, 10, replicates=5, backend=b),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", default="4000,16000,64000")
    p.add_argument("--eta", type=int, default=20)
    p.add_argument("--order", type=int, default=200)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        print("numba is not installed; only the numpy backend is available")
        return 1
    print(f"{'N':>7}  {'kernel':<34} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for n in (int(s) for s in args.sizes.split(",")):
        for name, fn in cases(n, args.eta, args.order, args.seed).items():
            t_np = best_time(lambda: fn("numpy"), args.repeats)
            t_nb = best_time(lambda: fn("numba"), args.repeats)
            print(f"{n:>7}  {name:<34} {1e3 * t_np:>10.2f} {1e3 * t_nb:>10.2f} {t_np / t_nb:>7.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
