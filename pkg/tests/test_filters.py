import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import chebyshev as npcheb

from conftest import dense_eigh, path_graph, random_knn_graph
from fastsc.errors import DomainMismatch, OrderExhausted
from fastsc.filters import (IdealLowPass, OrderTable, apply_filter, build_order_table,
                            design_filter, get_order_table, jackson_damping,
                            lowpass_chebyshev_coefficients, minimal_order, order_errors)
from fastsc.graph import build_laplacian, estimate_lambda_max


def grid_error(filt, theta=0.1, n=10_000):
    lam = np.linspace(0, filt.lambda_max, n)
    keep = (lam < filt.cutoff * (1 - theta)) | (lam > filt.cutoff * (1 + theta))
    p = npcheb.chebval(2 * lam / filt.lambda_max - 1, filt.coefficients)
    return np.abs(p - (lam <= filt.cutoff))[keep].max()


class CountingOperator:
    """Wraps a Laplacian, exposing only ``matmat``, and counts columns."""

    fused = False

    def __init__(self, lap):
        self.lap, self.n, self.count = lap, lap.n, 0
        self.lambda_max_estimate = lap.lambda_max_estimate

    def matmat(self, X):
        self.count += X.shape[1]
        return self.lap.to_dense() @ X


class TestCoefficients:
    @pytest.mark.parametrize("ratio", [0.01, 0.3, 0.5, 0.9])
    def test_match_quadrature(self, ratio):
        # c_j = (2 - [j=0]) / pi * int_0^pi h(cos t) cos(j t) dt with a fine midpoint rule
        m = 30
        t = (np.arange(200_000) + 0.5) * np.pi / 200_000
        h = (np.cos(t) <= 2 * ratio - 1).astype(float)
        ref = np.array([(2 - (j == 0)) * np.mean(h * np.cos(j * t)) for j in range(m + 1)])
        assert np.allclose(lowpass_chebyshev_coefficients(ratio, m), ref, atol=1e-4)

    def test_jackson_damping_endpoints(self):
        g = jackson_damping(20)
        assert g[0] == pytest.approx(1.0)
        assert np.all(np.diff(g) <= 1e-12)


class TestDesignFilter:
    def test_all_pass(self):
        for m in (1, 5, 50):
            f = design_filter(IdealLowPass(2.0, 2.0), m)
            assert f.achieved_error <= 0.01
            assert np.allclose(f(np.linspace(0, 2, 11)), 1.0)

    def test_half_band_order_50(self):
        f = design_filter(IdealLowPass(1.0, 2.0), 50)
        assert f.achieved_error <= 0.1
        assert f.achieved_error == pytest.approx(grid_error(f))

    def test_jackson_error_oracle(self):
        f = design_filter(IdealLowPass(0.6, 2.0), 80, damping="jackson")
        assert f.achieved_error == pytest.approx(grid_error(f))

    def test_endpoint_invariant(self):
        for ratio in (0.05, 0.3, 0.7):
            f = design_filter(IdealLowPass(ratio, 1.0), minimal_order(ratio))
            e = f.achieved_error
            assert abs(f(0.0) - 1) <= e + 1e-12
            assert abs(f(1.0)) <= e + 1e-12

    def test_validation(self):
        with pytest.raises(ValueError):
            IdealLowPass(0.0, 1.0)
        with pytest.raises(ValueError):
            IdealLowPass(2.0, 1.0)
        with pytest.raises(ValueError):
            design_filter(IdealLowPass(0.5, 1.0), 0)
        with pytest.raises(ValueError):
            design_filter(IdealLowPass(0.5, 1.0), 5, damping="lanczos")

    def test_coefficients_frozen(self):
        f = design_filter(IdealLowPass(0.5, 1.0), 5)
        with pytest.raises(ValueError):
            f.coefficients[0] = 0


class TestMinimalOrder:
    def test_all_pass_is_one(self):
        assert minimal_order(1.0, 0.1) == 1

    def test_half_band(self):
        m = minimal_order(0.5, 0.1)
        assert m <= 50
        # brute-force sweep with the design error as oracle
        sweep = [design_filter(IdealLowPass(0.5, 1.0), j).achieved_error for j in range(1, 51)]
        assert m == 1 + next(j for j, e in enumerate(sweep) if e <= 0.1)

    def test_sharp_cutoff_order_of_200(self):
        # paper reports m ~ 200 at lambda_c / lambda_N ~ 1e-4
        assert 100 <= minimal_order(1e-4, 0.1, m_max=2000) <= 400

    def test_monotone_spot_check(self):
        assert minimal_order(1e-4, m_max=2000) >= minimal_order(1e-2) >= minimal_order(1e-1)

    def test_order_errors_agree_with_design(self):
        errs = order_errors(0.2, 40)
        for m in (1, 7, 40):
            assert errs[m - 1] == pytest.approx(design_filter(IdealLowPass(0.2, 1.0), m).achieved_error)
        errs = order_errors(0.2, 20, damping="jackson")
        assert errs[19] == pytest.approx(
            design_filter(IdealLowPass(0.2, 1.0), 20, damping="jackson").achieved_error)

    def test_exhausted(self):
        with pytest.raises(OrderExhausted) as exc:
            minimal_order(1e-3, 0.1, m_max=10)
        assert exc.value.best_error > 0.1

    def test_validation(self):
        with pytest.raises(ValueError):
            minimal_order(0.0)
        with pytest.raises(ValueError):
            minimal_order(0.5, delta=0)


class TestOrderTable:
    def test_lookup_rule(self):
        t = OrderTable(0.1, 0.1, np.array([0.01, 0.1, 1.0]), np.array([150, 40, 1]))
        assert t.lookup(1.0) == 1
        assert t.lookup(0.05) == 150  # between grid points: smaller-ratio neighbour
        assert t.lookup(0.1) == 40
        with pytest.raises(ValueError):
            t.lookup(0)

    def test_below_grid_computed_directly(self):
        t = OrderTable(0.1, 0.1, np.array([0.5, 1.0]), np.array([13, 1]))
        assert t.lookup(1e-2) == minimal_order(1e-2)

    def test_entries_recheck(self):
        t = build_order_table(0.1, ratios=[1e-3, 1e-2, 0.2, 1.0])
        assert t.lookup(1.0) == 1
        for r, m in zip(t.ratios, t.m_star):
            assert design_filter(IdealLowPass(r, 1.0), int(m)).achieved_error <= 0.1

    def test_csv_roundtrip(self, tmp_path):
        t = build_order_table(0.1, ratios=[1e-2, 0.5, 1.0])
        t.to_csv(tmp_path / "t.csv")
        header = (tmp_path / "t.csv").read_text().splitlines()[0]
        assert header == "ratio,m_star,delta,theta"
        back = OrderTable.from_csv(tmp_path / "t.csv")
        assert np.array_equal(back.ratios, t.ratios) and np.array_equal(back.m_star, t.m_star)

    def test_default_table_cached_on_disk(self):
        t = get_order_table()
        assert t.ratios.size == 50 and t.ratios[0] == pytest.approx(1e-5) and t.lookup(1.0) == 1
        assert get_order_table() is t


class TestApplyFilter:
    def setup_method(self):
        self.g = path_graph(50)
        self.lap = build_laplacian(self.g)
        self.lmax = estimate_lambda_max(self.lap)
        self.w, self.U = dense_eigh(self.g)

    def test_all_pass_identity(self):
        f = design_filter(IdealLowPass(self.lmax, self.lmax), 10)
        x = np.random.default_rng(0).standard_normal(50)
        y = apply_filter(f, self.lap, x)
        assert np.linalg.norm(y - x) / np.linalg.norm(x) <= max(f.achieved_error, 1e-12)

    def test_constant_vector(self):
        cut = 0.5 * (self.w[3] + self.w[4])
        f = design_filter(IdealLowPass(cut, self.lmax), minimal_order(cut / self.lmax))
        y = apply_filter(f, self.lap, np.ones(50))
        assert np.abs(y - 1).max() <= f.achieved_error

    def test_projector_oracle(self):
        cut = 0.5 * (self.w[2] + self.w[3])
        f = design_filter(IdealLowPass(cut, self.lmax), minimal_order(cut / self.lmax))
        x = np.random.default_rng(1).standard_normal(50)
        U3 = self.U[:, :3]
        err = np.linalg.norm(apply_filter(f, self.lap, x) - U3 @ (U3.T @ x)) / np.linalg.norm(x)
        assert err <= 2 * f.achieved_error

    def test_linearity(self):
        f = design_filter(IdealLowPass(0.3 * self.lmax, self.lmax), 40)
        rng = np.random.default_rng(2)
        x, y = rng.standard_normal((2, 50))
        lhs = apply_filter(f, self.lap, 2.5 * x - 0.7 * y)
        rhs = 2.5 * apply_filter(f, self.lap, x) - 0.7 * apply_filter(f, self.lap, y)
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)

    @pytest.mark.parametrize("m", [1, 2, 17, 120])
    def test_eigenvector_exactness(self, m):
        f = design_filter(IdealLowPass(0.2 * self.lmax, self.lmax), m)
        for l in (0, 5, 30, 49):
            chi = self.U[:, l]
            assert np.linalg.norm(apply_filter(f, self.lap, chi) - f(self.w[l]) * chi) <= 1e-8

    def test_near_idempotence(self):
        rng = np.random.default_rng(5)
        g = random_knn_graph(rng, 60, 100)
        lap = build_laplacian(g)
        lmax = estimate_lambda_max(lap)
        w, U = dense_eigh(g)
        cut = 0.5 * (w[5] + w[6])
        f = design_filter(IdealLowPass(cut, lmax), minimal_order(cut / lmax))
        x = rng.standard_normal(g.n_nodes)
        once = U.T @ apply_filter(f, lap, x)
        twice = U.T @ apply_filter(f, lap, apply_filter(f, lap, x))
        outside = (w < cut * 0.9) | (w > cut * 1.1)
        # |p^2 - p| <= 3 delta outside the band, relative to the input component
        assert np.all(np.abs(twice - once)[outside] <= 3 * f.achieved_error * np.abs(U.T @ x)[outside] + 1e-10)

    def test_cost_counted(self):
        op = CountingOperator(self.lap)
        f = design_filter(IdealLowPass(0.3 * self.lmax, self.lmax), 25)
        X = np.random.default_rng(3).standard_normal((50, 4))
        out = apply_filter(f, op, X)
        assert op.count == 25 * 4
        assert np.allclose(out, apply_filter(f, self.lap, X))
        before = self.lap.n_matvecs
        apply_filter(f, self.lap, X)
        assert self.lap.n_matvecs - before == 25 * 4

    def test_domain_mismatch(self):
        f = design_filter(IdealLowPass(1.0, 1.2 * self.lmax), 10)
        with pytest.raises(DomainMismatch):
            apply_filter(f, self.lap, np.ones(50))

    def test_shape_check(self):
        f = design_filter(IdealLowPass(1.0, self.lmax), 10)
        with pytest.raises(ValueError):
            apply_filter(f, self.lap, np.ones(49))

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.01, 1.0), st.integers(1, 60), st.integers(1, 5), st.integers(0, 2**31))
    def test_recurrence_matches_scalar_polynomial(self, ratio, m, p, seed):
        f = design_filter(IdealLowPass(ratio * self.lmax, self.lmax), m)
        X = np.random.default_rng(seed).standard_normal((50, p))
        ref = self.U @ (f(self.w)[:, None] * (self.U.T @ X))
        assert np.allclose(apply_filter(f, self.lap, X), ref, atol=1e-8)
