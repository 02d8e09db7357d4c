"""Command-line driver.

Exit codes: 0 on success, 1 on usage errors (synopsis printed), 2 on runtime
failures (diagnostic on stderr). A ``--config`` file of ``key = value``
lines supplies defaults; command-line flags win.
"""
from __future__ import annotations

import argparse
import functools
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import bench as _bench
from .cluster import PipelineConfig, accelerated_spectral_clustering, classical_spectral_clustering
from .datasets import (FIXTURE_MEANS, FIXTURE_SIGMAS, default_paper_spec, generate_gaussian_mixture,
                       isotropic_spec)
from .errors import FastSCError
from .filters import build_order_table, default_ratio_grid, get_order_table
from .graph import (build_knn_graph, build_laplacian, default_knn_k, read_graph, read_points,
                    write_csr_bin, write_edge_list, write_points_csv)
from .stability import stability_scan

log = logging.getLogger("fastsc")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ----------------------------------------------------------------------------
# config files


def read_config(path):
    """``key = value`` lines; ``#`` starts a comment. Keys use underscores."""
    cfg = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


def _merge(args, cfg, key, cast, default=None):
    v = getattr(args, key, None)
    if v is not None:
        return v
    if key in cfg:
        try:
            return cast(cfg[key])
        except ValueError as exc:
            raise UsageError(f"config value for {key!r}: {exc}") from None
    return default


def _floats(s):
    return [float(t) for t in str(s).replace(",", " ").split()]


def _ints(s):
    return [int(t) for t in str(s).replace(",", " ").split()]


def _words(s):
    return [t for t in str(s).replace(",", " ").split() if t]


def _means(s):
    """``"x1 y1; x2 y2; ..."`` -> (k, 2) array."""
    rows = [_floats(r) for r in str(s).split(";") if r.strip()]
    return np.array(rows, dtype=float)


def _pipeline_config(args, cfg):
    return PipelineConfig(
        delta=_merge(args, cfg, "delta", float, 0.1),
        theta=_merge(args, cfg, "theta", float, 0.1),
        damping=_merge(args, cfg, "damping", str, "none"),
        kmeans_replicates=_merge(args, cfg, "replicates", int, 20),
        num_probes=_merge(args, cfg, "probes", int, None),
    )


def mixture_spec(n, k, seed, means=None, sigmas=None, weights=None):
    """Mixture spec from explicit parameters, else the committed fixture.

    Without ``means``, ``k = 10`` is the calibrated fixture and smaller ``k``
    takes its first ``k`` components.
    """
    if means is None:
        if k == 10:
            return default_paper_spec(n, 10, seed)
        if not (1 <= k <= 10):
            raise UsageError("without explicit means, k must lie in 1..10")
        means, sigmas = FIXTURE_MEANS[:k], FIXTURE_SIGMAS[:k]
    means = np.atleast_2d(means)
    if means.shape[0] != k:
        raise UsageError(f"k={k} but {means.shape[0]} means given")
    if sigmas is None:
        sigmas = np.full(k, 0.05)
    return isotropic_spec(means, sigmas, n, weights, seed)


def _spec_from(args, cfg):
    n = _merge(args, cfg, "n", int, 5000)
    k = _merge(args, cfg, "k", int, 10)
    seed = _merge(args, cfg, "seed", int, 0)
    means = _means(cfg["means"]) if "means" in cfg else None
    sigmas = _floats(cfg["sigmas"]) if "sigmas" in cfg else None
    weights = _floats(cfg["weights"]) if "weights" in cfg else None
    return n, k, seed, means, sigmas, weights


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


# ----------------------------------------------------------------------------
# subcommands


def cmd_generate(args, cfg):
    n, k, seed, means, sigmas, weights = _spec_from(args, cfg)
    ps = generate_gaussian_mixture(mixture_spec(n, k, seed, means, sigmas, weights))
    write_points_csv(sys.stdout if args.out in (None, "-") else args.out, ps)
    return 0


def cmd_graph(args, cfg):
    ps = read_points(args.points)
    base = _merge(args, cfg, "knn_base", str, "e")
    K = _merge(args, cfg, "K", int, None) or default_knn_k(ps.n, base)
    weighting = _merge(args, cfg, "weighting", str, "binary")
    sigma = _merge(args, cfg, "sigma", float, None)
    g = build_knn_graph(ps, K, weighting=weighting, sigma=sigma)
    fmt = args.format or ("csr" if str(args.out).endswith(".bin") else "edges")
    if fmt == "csr":
        if args.out in (None, "-"):
            raise UsageError("--format csr needs --out FILE")
        write_csr_bin(args.out, g)
    else:
        write_edge_list(sys.stdout if args.out in (None, "-") else args.out, g)
    log.info("graph: N=%d K=%d edges=%d", g.n_nodes, K, g.num_edges)
    return 0


def _parse_eta(value, k):
    if value is None:
        return 2 * k
    s = str(value).strip()
    if s.endswith("k"):
        return (int(s[:-1]) if s[:-1] else 1) * k
    return int(s)


def cmd_cluster(args, cfg):
    g = read_graph(args.graph)
    k = _merge(args, cfg, "k", int, None)
    if k is None:
        raise UsageError("--k is required")
    method = _merge(args, cfg, "method", str, "fast")
    if method not in ("classical", "fast"):
        raise UsageError(f"--method must be classical or fast, got {method!r}")
    seed = _merge(args, cfg, "seed", int, 0)
    conf = _pipeline_config(args, cfg)
    lap = build_laplacian(g)
    if method == "classical":
        res = classical_spectral_clustering(g, k, seed=seed, config=conf, lap=lap)
    else:
        eta = _parse_eta(_merge(args, cfg, "eta", str, None), k)
        res = accelerated_spectral_clustering(g, k, eta, seed=seed, config=conf, lap=lap)
    fh = _open_out(args.out)
    try:
        fh.write("node,label\n")
        for i, lab in enumerate(res.labels):
            fh.write(f"{i},{int(lab)}\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    diag = dict(res.diagnostics)
    diag.update(n_nodes=g.n_nodes, seed=seed, inertia=res.clustering.inertia,
                degenerate=res.clustering.degenerate)
    text = json.dumps(diag, indent=2, default=float)
    diag_path = args.diagnostics or (f"{args.out}.json" if args.out not in (None, "-") else None)
    if diag_path:
        Path(diag_path).write_text(text + "\n")
    else:
        sys.stderr.write(text + "\n")
    return 0


def cmd_estimate_k(args, cfg):
    g = read_graph(args.graph)
    kmin = _merge(args, cfg, "kmin", int, 2)
    kmax = _merge(args, cfg, "kmax", int, 20)
    J = _merge(args, cfg, "J", int, 20)
    seed = _merge(args, cfg, "seed", int, 0)
    eta_s = _merge(args, cfg, "eta", str, "2k")
    conf = _pipeline_config(args, cfg)
    if args.replicates is None and "replicates" not in cfg:
        conf.kmeans_replicates = 5
    prof = stability_scan(g, kmin, kmax, J=J, seed=seed,
                          eta=functools.partial(_parse_eta, eta_s), config=conf)
    fh = _open_out(args.out)
    try:
        fh.write("k,gamma\n")
        for k, gm in zip(prof.ks, prof.gamma):
            fh.write(f"{int(k)},{'nan' if math.isnan(gm) else repr(float(gm))}\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    for k, err in prof.failed.items():
        sys.stderr.write(f"fastsc: k={k} failed: {err}\n")
    sys.stderr.write(f"k* = {prof.k_star}{' (tie)' if prof.tie else ''}\n")
    return 0


def _bench_spec_factory(n, k, seed, means=None, sigmas=None, weights=None):
    return mixture_spec(n, k, seed, means, sigmas, weights)


def cmd_bench(args, cfg):
    sizes = _merge(args, cfg, "sizes", _ints, [5000])
    methods = _merge(args, cfg, "methods", _words, list(_bench.DEFAULT_METHODS))
    realizations = _merge(args, cfg, "realizations", int, 20)
    seed = _merge(args, cfg, "seed", int, 0)
    k = _merge(args, cfg, "k", int, 10)
    _, _, _, means, sigmas, weights = _spec_from(args, cfg)
    mixture_spec(max(sizes), k, seed, means, sigmas, weights)  # validate early
    factory = functools.partial(_bench_spec_factory, means=means, sigmas=sigmas, weights=weights)
    try:
        for m in methods:
            _bench.parse_method(m, k)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    records, summary = _bench.run_benchmark(sizes, methods, realizations, seed, k,
                                            _pipeline_config(args, cfg), args.parallel, factory)
    out = args.out or "bench.csv"
    _bench.write_benchmark_csv(out, records, summary)
    failed = [r for r in records if not r.ok]
    for r in failed:
        sys.stderr.write(f"fastsc: {r.method} N={r.N} realization={r.realization}: {r.error}\n")
    if args.scaling_out:
        fit = _bench.filtering_scaling(_merge(args, cfg, "scaling_sizes", _ints, [2000, 4000, 8000, 16000]),
                                       order=_merge(args, cfg, "order", int, 100),
                                       eta=_merge(args, cfg, "scaling_eta", int, 20), seed=seed, k=k)
        with open(args.scaling_out, "w") as fh:
            fh.write("N,edges,t_filter\n")
            for n, e, t in zip(fit.sizes, fit.edges, fit.times):
                fh.write(f"{int(n)},{int(e)},{t!r}\n")
        sys.stderr.write(f"filtering time vs N: slope={fit.slope:.3g} s/node, R^2={fit.r2:.4f}\n")
    return 0


def cmd_ordertable(args, cfg):
    delta = _merge(args, cfg, "delta", float, 0.1)
    theta = _merge(args, cfg, "theta", float, 0.1)
    damping = _merge(args, cfg, "damping", str, "none")
    if args.out:
        table = build_order_table(delta, default_ratio_grid(), theta, damping=damping)
        table.to_csv(args.out)
    else:
        table = get_order_table(delta, theta, damping, regenerate=True)
    for r, m in zip(table.ratios, table.m_star):
        log.info("ratio %.3e  m* %d", r, m)
    return 0


# ----------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="fastsc", description="Spectral clustering with fast graph filtering.")
    p.add_argument("--config", help="key = value file supplying defaults")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("generate", help="Gaussian mixture -> points CSV")
    s.add_argument("--n", type=int)
    s.add_argument("--k", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("-o", "--out")

    s = sub.add_parser("graph", help="points -> kNN edge list")
    s.add_argument("points")
    s.add_argument("--K", type=int, help="neighbours (default ceil(log N))")
    s.add_argument("--knn-base", choices=["e", "10", "2"])
    s.add_argument("--weighting", choices=["binary", "gaussian"])
    s.add_argument("--sigma", type=float)
    s.add_argument("--format", choices=["edges", "csr"])
    s.add_argument("-o", "--out")

    def pipeline_flags(s):
        s.add_argument("--seed", type=int)
        s.add_argument("--delta", type=float)
        s.add_argument("--theta", type=float)
        s.add_argument("--damping", choices=["none", "jackson"])
        s.add_argument("--replicates", type=int, help="k-means replicates")
        s.add_argument("--probes", type=int, help="eigencount probes")

    s = sub.add_parser("cluster", help="graph -> labels CSV + diagnostics JSON")
    s.add_argument("graph")
    s.add_argument("--method", choices=["classical", "fast"])
    s.add_argument("--k", type=int)
    s.add_argument("--eta", help="signal count, e.g. 20 or 2k")
    pipeline_flags(s)
    s.add_argument("-o", "--out")
    s.add_argument("--diagnostics", help="diagnostics JSON path (default OUT.json)")

    s = sub.add_parser("estimate-k", help="graph -> stability CSV (k,gamma)")
    s.add_argument("graph")
    s.add_argument("--kmin", type=int)
    s.add_argument("--kmax", type=int)
    s.add_argument("--J", type=int)
    s.add_argument("--eta", help="signal count per k, e.g. 2k (default) or 30")
    pipeline_flags(s)
    s.add_argument("-o", "--out")

    s = sub.add_parser("bench", help="fast vs classical benchmark CSVs")
    s.add_argument("--sizes", type=_ints, help="comma separated N values")
    s.add_argument("--methods", type=_words, help="e.g. classical,fast(k),fast(2k),fast(3k)")
    s.add_argument("--realizations", type=int)
    s.add_argument("--k", type=int)
    s.add_argument("--parallel", action="store_true")
    pipeline_flags(s)
    s.add_argument("-o", "--out", help="benchmark CSV (default bench.csv)")
    s.add_argument("--scaling-out", help="also time filtering vs N into this CSV")

    s = sub.add_parser("ordertable", help="regenerate the filter order table")
    s.add_argument("--delta", type=float)
    s.add_argument("--theta", type=float)
    s.add_argument("--damping", choices=["none", "jackson"])
    s.add_argument("-o", "--out", help="write here instead of the cache")
    return p


COMMANDS = {
    "generate": cmd_generate,
    "graph": cmd_graph,
    "cluster": cmd_cluster,
    "estimate-k": cmd_estimate_k,
    "bench": cmd_bench,
    "ordertable": cmd_ordertable,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            raise UsageError("a subcommand is required")
        cfg = read_config(args.config) if args.config else {}
    except UsageError as exc:
        sys.stderr.write(f"fastsc: error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"fastsc: error: cannot read config: {exc}\n")
        return 1
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"fastsc: error: {exc}\n")
        return 1
    except (FastSCError, OSError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"fastsc: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
