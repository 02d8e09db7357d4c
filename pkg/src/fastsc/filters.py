"""Polynomial approximations of ideal low-pass graph filters.

The target ``h(lam) = 1 if lam <= cutoff else 0`` is expanded in Chebyshev
polynomials on ``[0, lambda_max]``. Coefficients of the truncated series
are exact closed forms, so no quadrature is involved. Jackson damping is
available but off by default (see ``design_filter``).
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial import chebyshev as npcheb

from .errors import DomainMismatch, OrderExhausted

DEFAULT_DELTA = 0.1
DEFAULT_THETA = 0.1
DEFAULT_GRID = 10_000
DEFAULT_TABLE_M_MAX = 2000


@dataclass(frozen=True)
class IdealLowPass:
    cutoff: float
    lambda_max: float

    def __post_init__(self):
        if not (0 < self.cutoff <= self.lambda_max):
            raise ValueError(f"need 0 < cutoff <= lambda_max, got {self.cutoff}, {self.lambda_max}")

    @property
    def ratio(self):
        return self.cutoff / self.lambda_max

    def __call__(self, lam):
        return (np.asarray(lam) <= self.cutoff).astype(np.float64)


@dataclass(frozen=True)
class PolyFilter:
    """Order-m Chebyshev polynomial on ``[0, lambda_max]``."""

    order: int
    coefficients: np.ndarray
    cutoff: float
    lambda_max: float
    achieved_error: float
    damping: str = "none"
    theta: float = DEFAULT_THETA

    def __call__(self, lam):
        x = 2.0 * np.asarray(lam, dtype=np.float64) / self.lambda_max - 1.0
        return npcheb.chebval(x, self.coefficients)

    @property
    def ratio(self):
        return self.cutoff / self.lambda_max


def lowpass_chebyshev_coefficients(ratio, order):
    """Chebyshev coefficients of the indicator of ``[-1, 2*ratio - 1]``."""
    xc = min(1.0, max(-1.0, 2.0 * ratio - 1.0))
    a = math.acos(xc)
    j = np.arange(1, order + 1)
    c = np.empty(order + 1)
    c[0] = (math.pi - a) / math.pi
    c[1:] = -2.0 * np.sin(j * a) / (j * math.pi)
    return c


def jackson_damping(order):
    j = np.arange(order + 1)
    a = math.pi / (order + 2)
    return ((1 - j / (order + 2)) * math.sin(a) * np.cos(j * a)
            + math.cos(a) * np.sin(j * a) / (order + 2)) / math.sin(a)


def _grid(grid_size):
    return np.linspace(0.0, 1.0, grid_size)


def _error_mask(lam, ratio, theta):
    return (lam < ratio * (1.0 - theta)) | (lam > ratio * (1.0 + theta))


def _sup_error(lam, ratio, theta, values):
    mask = _error_mask(lam, ratio, theta)
    target = (lam <= ratio).astype(np.float64)
    return float(np.max(np.abs(values[mask] - target[mask])))


def design_filter(spec: IdealLowPass, order, damping="none", theta=DEFAULT_THETA,
                  grid_size=DEFAULT_GRID):
    """Order-``order`` Chebyshev approximation of ``spec``.

    ``achieved_error`` is the max deviation from the ideal response on a
    uniform grid of ``grid_size`` points over ``[0, lambda_max]``, ignoring
    the transition band ``[cutoff(1-theta), cutoff(1+theta)]``.

    ``damping="jackson"`` multiplies the series by Jackson coefficients,
    which removes Gibbs overshoot at the price of a wider transition and
    roughly twice the order for the same error.
    """
    order = int(order)
    if order < 1:
        raise ValueError("order must be >= 1")
    ratio = spec.ratio
    c = lowpass_chebyshev_coefficients(ratio, order)
    if damping == "jackson":
        c = c * jackson_damping(order)
    elif damping != "none":
        raise ValueError(f"unknown damping {damping!r}")
    lam = _grid(grid_size)
    err = _sup_error(lam, ratio, theta, npcheb.chebval(2.0 * lam - 1.0, c))
    c.flags.writeable = False
    return PolyFilter(order, c, spec.cutoff, spec.lambda_max, err, damping, theta)


def order_errors(ratio, m_max, damping="none", theta=DEFAULT_THETA, grid_size=DEFAULT_GRID):
    """Achieved error of ``design_filter`` for every order 1..m_max."""
    lam = _grid(grid_size)
    mask = _error_mask(lam, ratio, theta)
    x = 2.0 * lam[mask] - 1.0
    target = (lam[mask] <= ratio).astype(np.float64)
    c = lowpass_chebyshev_coefficients(ratio, m_max)
    errs = np.empty(m_max)
    if damping == "none":
        # partial sums, T_j via the three-term recurrence
        t_prev = np.ones_like(x)
        t_cur = x.copy()
        acc = c[0] * t_prev + c[1] * t_cur
        errs[0] = np.max(np.abs(acc - target))
        for j in range(2, m_max + 1):
            t_prev, t_cur = t_cur, 2.0 * x * t_cur - t_prev
            acc += c[j] * t_cur
            errs[j - 1] = np.max(np.abs(acc - target))
        return errs
    T = npcheb.chebvander(x, m_max)
    for m in range(1, m_max + 1):
        cm = c[: m + 1] * jackson_damping(m)
        errs[m - 1] = np.max(np.abs(T[:, : m + 1] @ cm - target))
    return errs


def minimal_order(ratio, delta=DEFAULT_DELTA, m_max=500, damping="none",
                  theta=DEFAULT_THETA, grid_size=DEFAULT_GRID):
    """Smallest order m <= m_max whose achieved error is at most ``delta``.

    Raises
    ------
    OrderExhausted
        If no order up to ``m_max`` qualifies.
    """
    if not (0 < ratio <= 1):
        raise ValueError(f"ratio must lie in (0, 1], got {ratio}")
    if delta <= 0:
        raise ValueError("delta must be positive")
    errs = order_errors(ratio, m_max, damping, theta, grid_size)
    ok = np.flatnonzero(errs <= delta)
    if ok.size == 0:
        raise OrderExhausted(ratio, delta, m_max, float(errs.min()))
    return int(ok[0]) + 1


@dataclass(frozen=True)
class OrderTable:
    delta: float
    theta: float
    ratios: np.ndarray
    m_star: np.ndarray
    damping: str = "none"
    grid_size: int = DEFAULT_GRID

    def lookup(self, ratio):
        """m* of the nearest grid ratio at or below ``ratio``.

        Ratios under the smallest grid value are computed directly.
        """
        if not (0 < ratio <= 1):
            raise ValueError(f"ratio must lie in (0, 1], got {ratio}")
        pos = int(np.searchsorted(self.ratios, ratio, side="right")) - 1
        if pos < 0:
            return minimal_order(ratio, self.delta, DEFAULT_TABLE_M_MAX, self.damping,
                                 self.theta, self.grid_size)
        return int(self.m_star[pos])

    def to_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["ratio", "m_star", "delta", "theta"])
            for r, m in zip(self.ratios, self.m_star):
                w.writerow([repr(float(r)), int(m), repr(self.delta), repr(self.theta)])

    @classmethod
    def from_csv(cls, path, damping="none", grid_size=DEFAULT_GRID):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: empty order table")
        return cls(
            float(rows[0]["delta"]),
            float(rows[0]["theta"]),
            np.array([float(r["ratio"]) for r in rows]),
            np.array([int(r["m_star"]) for r in rows]),
            damping,
            grid_size,
        )


def default_ratio_grid(n=50, lo=1e-5):
    return np.logspace(math.log10(lo), 0.0, n)


def build_order_table(delta=DEFAULT_DELTA, ratios=None, theta=DEFAULT_THETA,
                      m_max=DEFAULT_TABLE_M_MAX, damping="none", grid_size=DEFAULT_GRID):
    ratios = default_ratio_grid() if ratios is None else np.sort(np.asarray(ratios, float))
    if np.any(ratios <= 0) or np.any(ratios > 1):
        raise ValueError("table ratios must lie in (0, 1]")
    m = np.array([minimal_order(r, delta, m_max, damping, theta, grid_size) for r in ratios])
    return OrderTable(float(delta), float(theta), ratios, m, damping, grid_size)


def cache_dir():
    return Path(os.environ.get("FASTSC_CACHE", Path.home() / ".cache" / "fastsc"))


def _table_path(delta, theta, damping, grid_size):
    return cache_dir() / f"ordertable_d{delta:g}_t{theta:g}_{damping}_g{grid_size}.csv"


_TABLES = {}


def get_order_table(delta=DEFAULT_DELTA, theta=DEFAULT_THETA, damping="none",
                    grid_size=DEFAULT_GRID, regenerate=False):
    """Default-grid order table, cached in memory and on disk as CSV."""
    key = (float(delta), float(theta), damping, int(grid_size))
    if not regenerate and key in _TABLES:
        return _TABLES[key]
    path = _table_path(*key)
    table = None
    if not regenerate and path.exists():
        try:
            table = OrderTable.from_csv(path, damping, grid_size)
            grid = default_ratio_grid()
            if (table.delta != key[0] or table.theta != key[1]
                    or table.ratios.shape != grid.shape or not np.allclose(table.ratios, grid)):
                table = None
        except (ValueError, KeyError):
            table = None
    if table is None:
        table = build_order_table(delta, None, theta, DEFAULT_TABLE_M_MAX, damping, grid_size)
        try:
            table.to_csv(path)
        except OSError:
            pass
    _TABLES[key] = table
    return table


def apply_filter(filt: PolyFilter, lap, signals, backend=None):
    """Filter the columns of ``signals`` with ``filt(L)``.

    Uses the three-term Chebyshev recurrence: exactly ``filt.order``
    Laplacian products per column, no dense N x N matrix.

    Raises
    ------
    DomainMismatch
        If the filter's ``lambda_max`` differs from the operator's cached
        estimate by more than 5%.
    """
    est = lap.lambda_max_estimate
    if est is not None and abs(filt.lambda_max - est) > 0.05 * est:
        raise DomainMismatch(
            f"filter designed for lambda_max={filt.lambda_max:.6g}, operator has {est:.6g}"
        )
    X = np.asarray(signals, dtype=np.float64)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[:, None]
    if X.shape[0] != lap.n:
        raise ValueError(f"signals have {X.shape[0]} rows, graph has {lap.n} nodes")
    half = filt.lambda_max / 2.0
    if getattr(lap, "fused", False):
        out = lap.chebyshev(filt.coefficients, half, half, X, backend=backend)
    else:
        out = _generic_recurrence(filt.coefficients, lap, X, half)
    return out[:, 0] if squeeze else out


def _generic_recurrence(coeffs, lap, X, half):
    # for operators exposing only matmat (instrumented or user supplied)
    out = coeffs[0] * X
    t_prev = X
    t_cur = (lap.matmat(X) - half * X) / half
    out = out + coeffs[1] * t_cur
    for c in coeffs[2:]:
        t_next = 2.0 * (lap.matmat(t_cur) - half * t_cur) / half - t_prev
        out += c * t_next
        t_prev, t_cur = t_cur, t_next
    return out
