import csv
import math

import numpy as np
import pytest

from fastsc.bench import (CSV_COLUMNS, filtering_scaling, linear_fit, parse_method, run_benchmark,
                          write_benchmark_csv)
from fastsc.datasets import isotropic_spec

MEANS = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.9]]


def three_blobs(n, k, seed):
    return isotropic_spec(MEANS[:k], 0.2, n, seed=seed)


def split_blobs(n, k, seed):
    # far apart and tight: the kNN graph falls apart
    return isotropic_spec([[0, 0], [100, 100], [-100, 50]][:k], 0.01, n, seed=seed)


def test_parse_method():
    assert parse_method("classical", 10) is None
    assert parse_method("fast(k)", 10) == 10
    assert parse_method("fast(2k)", 10) == 20
    assert parse_method("fast(25)", 10) == 25
    for bad in ("fast()", "fast", "slow(2k)", "fast(k2)"):
        with pytest.raises(ValueError):
            parse_method(bad, 10)


def test_row_counts_and_csv(tmp_path):
    sizes, methods, reps = [200, 300], ["classical", "fast(2k)"], 2
    records, summary = run_benchmark(sizes, methods, reps, seed=1, k=3, spec_factory=three_blobs)
    assert len(records) == len(sizes) * len(methods) * reps
    assert len(summary) == 3 * len(sizes) * len(methods)
    assert all(r.ok and -1 <= r.ari <= 1 for r in records)
    for r in records:
        assert min(r.t_graph, r.t_spectral, r.t_cluster) >= 0
        assert r.t_total == pytest.approx(r.t_spectral + r.t_cluster)
    assert np.mean([r.ari for r in records if r.method == "classical"]) > 0.8
    write_benchmark_csv(tmp_path / "b.csv", records, summary)
    with open(tmp_path / "b.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 1 + len(records) + len(summary)
    assert {r[2] for r in rows[-len(summary):]} == {"mean", "q10", "q90"}


def test_summary_statistics():
    records, summary = run_benchmark([200], ["fast(k)"], 3, seed=2, k=3, spec_factory=three_blobs)
    aris = np.array([r.ari for r in records])
    row = {s["realization"]: s for s in summary}
    assert row["mean"]["ari"] == pytest.approx(aris.mean())
    assert row["q10"]["ari"] == pytest.approx(np.quantile(aris, 0.1))
    assert row["q90"]["ari"] == pytest.approx(np.quantile(aris, 0.9))


def test_failures_recorded_not_fatal():
    records, summary = run_benchmark([60], ["classical", "fast(k)"], 2, k=3, spec_factory=split_blobs)
    assert len(records) == 4
    assert all(not r.ok and "DisconnectedGraph" in r.error and math.isnan(r.ari) for r in records)
    assert all(math.isnan(s["ari"]) for s in summary)


def test_parallel_matches_sequential():
    a, _ = run_benchmark([200], ["classical", "fast(2k)"], 2, seed=3, k=3, spec_factory=three_blobs)
    b, _ = run_benchmark([200], ["classical", "fast(2k)"], 2, seed=3, k=3, spec_factory=three_blobs,
                         parallel=True)
    assert [(r.method, r.realization, r.ari) for r in a] == [(r.method, r.realization, r.ari) for r in b]


def test_bad_arguments():
    with pytest.raises(ValueError):
        run_benchmark([100], ["fast(zz)"], 1)
    with pytest.raises(ValueError):
        run_benchmark([100], ["classical"], 0)


def test_linear_fit():
    a, b, r2 = linear_fit([1, 2, 3, 4], [3, 5, 7, 9])
    assert (a, b, r2) == pytest.approx((2, 1, 1))
    assert linear_fit([1, 2, 3], [1, 3, 2])[2] < 1


def test_filtering_scaling_small():
    fit = filtering_scaling(sizes=(1000, 2000), order=20, eta=4, repeats=1)
    assert fit.times.shape == (2,) and np.all(fit.times > 0)
    assert np.all(fit.edges > 0) and fit.order == 20
