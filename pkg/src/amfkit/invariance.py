"""Per-stock stability test batteries and out-of-sample evaluation.

Four batteries run against a fitted selection:

* intercept test -- two-step arbitrage check on price levels: fit the
  no-intercept level model, then test whether the residual mean is zero.
  The two-step form avoids the near-singularity of regressing on both a
  constant and the money-market value.
* linear invariance -- interact every selected column with a half-period
  indicator and F-test the interaction block jointly.
* residual re-selection -- refit the second half, run selection on its
  residuals over factors available there (minus the already-selected
  set), and F-test the enlarged model against the original.
* spline invariance -- let every coefficient vary along a B-spline basis
  in normalized window time and F-test against the constant-coefficient
  model.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from .errors import (
    DegenerateSplit,
    MissingFuture,
    RankDeficient,
    ReduceBasis,
    TooFewObservations,
)
from .gibs import SelectionResult, gibs_select_stock, prepare_window, stock_rows
from .panels import FactorPanel, PricePanel
from .stats import nested_anova, ols_fit, out_of_sample_r2
from .windows import WEEK_DAYS, Window

log = logging.getLogger(__name__)

DEFAULT_OOS_WEEKS = 26
MIN_OOS_ROWS = 20


@dataclass(frozen=True)
class HalfIndicator:
    """0/1 marker of rows at or past the window midpoint."""

    h: np.ndarray

    @classmethod
    def from_times(cls, times: np.ndarray, mid: np.datetime64) -> "HalfIndicator":
        h = (np.asarray(times) >= mid).astype(float)
        if h.min() == h.max():
            raise DegenerateSplit("half-period indicator needs both halves nonempty")
        return cls(h=h)


def intercept_test(y_levels: np.ndarray, v_levels: np.ndarray) -> float:
    """Two-sided p-value for a nonzero mean of the no-intercept level-model
    residuals.  ``v_levels`` holds the selected factor columns, row-aligned
    with ``y_levels``."""
    first = ols_fit(v_levels, y_levels)
    n = first.residuals.size
    second = ols_fit(np.ones((n, 1)), first.residuals)
    return float(second.p_values[0])


def linear_invariance_test(
    dy: np.ndarray,
    dv_selected: np.ndarray,
    half: HalfIndicator,
) -> tuple[float, tuple[int, ...]]:
    """Joint F-test that all half-period interaction coefficients vanish.

    Interaction columns that are collinear (a factor constant within one
    half) are dropped and reported in the second return slot; if every
    interaction column drops, the models coincide and p is 1 by
    convention.
    """
    dv_selected = np.asarray(dv_selected, dtype=float)
    n, p = dv_selected.shape
    h = half.h
    if h.size != n:
        raise ValueError("indicator length must match rows")
    n_first = int(np.sum(h == 0))
    if min(n_first, n - n_first) < p + 2:
        raise TooFewObservations("each half needs at least p + 2 rows")

    reduced = ols_fit(dv_selected, dy)
    keep = list(range(p))
    dropped: list[int] = []
    while keep:
        inter = dv_selected[:, keep] * h[:, None]
        design = np.hstack([dv_selected, inter])
        try:
            full = ols_fit(design, dy)
        except RankDeficient as exc:
            if exc.column < p:
                raise
            bad = keep[exc.column - p]
            dropped.append(bad)
            keep.remove(bad)
            continue
        return float(nested_anova(full, reduced, n).p_value), tuple(dropped)
    return 1.0, tuple(dropped)


def residual_analysis(
    prices: PricePanel,
    asset: str,
    factors: FactorPanel,
    window: Window,
    selected: tuple[int, ...],
    support_cap: int = 20,
    n_folds: int = 10,
    grid_size: int = 100,
    threshold_within: float = 0.5,
    threshold_union: float = 0.5,
) -> tuple[float | None, tuple[int, ...], tuple[int, ...]]:
    """Second-half re-selection test.

    Refits the already-selected set on the back half of the window, runs
    the full selection stage on those residuals over the factors available
    there (the already-selected set is excluded before clustering, so the
    new set is disjoint by construction), and F-tests the union model
    against the base.  Returns (p_value or None, newly selected set, union
    set).  None means no new factors were picked up, so the enlarged and
    original models coincide; such a stock still counts in sweep
    denominators.
    """
    second_half = prepare_window(
        factors,
        window,
        threshold_within,
        threshold_union,
        lo=window.mid,
        hi=window.end,
        exclude=frozenset(selected),
    )
    rows, dy = stock_rows(prices, asset, second_half)
    sel_cols = [second_half.position[f] for f in selected]
    base = ols_fit(second_half.dv[np.ix_(rows, sel_cols)], dy)

    new_set, _ = gibs_select_stock(
        base.residuals,
        rows,
        second_half,
        support_cap=support_cap,
        n_folds=n_folds,
        grid_size=grid_size,
    )
    if not new_set:
        return None, (), tuple(selected)

    union = tuple(sorted(set(selected) | set(new_set)))
    union_cols = [second_half.position[f] for f in union]
    full = ols_fit(second_half.dv[np.ix_(rows, union_cols)], dy)
    p = float(nested_anova(full, base, dy.size).p_value)
    return p, new_set, union


def spline_basis(t_norm: np.ndarray, basis_size: int) -> np.ndarray:
    """Open-uniform B-spline basis on [0, 1]; cubic once the dimension
    allows, lower degree below that.  Rows sum to one, so constant
    coefficients are nested inside the expansion."""
    if basis_size < 1:
        raise ValueError("basis_size must be positive")
    t = np.clip(np.asarray(t_norm, dtype=float), 0.0, 1.0)
    if basis_size == 1:
        return np.ones((t.size, 1))
    degree = min(3, basis_size - 1)
    interior = np.linspace(0.0, 1.0, basis_size - degree + 1)[1:-1]
    knots = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
    return BSpline.design_matrix(t, knots, degree, extrapolate=False).toarray()


def spline_invariance_test(
    dy: np.ndarray,
    dv_selected: np.ndarray,
    t_norm: np.ndarray,
    basis_size: int = 5,
    asset: str = "",
) -> float:
    """F-test of time-varying coefficients on a spline basis against the
    constant-coefficient model."""
    dv_selected = np.asarray(dv_selected, dtype=float)
    n, p = dv_selected.shape
    if basis_size == 1:
        return 1.0
    if n < p * basis_size + 5:
        raise TooFewObservations(
            f"{n} rows cannot support {p} columns x {basis_size} basis functions"
        )
    basis = spline_basis(t_norm, basis_size)
    blocks = [dv_selected[:, [j]] * basis for j in range(p)]
    design = np.hstack(blocks)
    reduced = ols_fit(dv_selected, dy)
    try:
        full = ols_fit(design, dy)
    except RankDeficient as exc:
        raise ReduceBasis(asset) from exc
    return float(nested_anova(full, reduced, n).p_value)


def normalized_window_time(times: np.ndarray, window: Window) -> np.ndarray:
    span = float(window.end.astype(np.int64) - window.start.astype(np.int64))
    return (np.asarray(times).astype("datetime64[D]").astype(np.int64)
            - int(window.start.astype(np.int64))) / span


def oos_evaluate(
    result: SelectionResult,
    prices: PricePanel,
    factors: FactorPanel,
    horizon_weeks: int = DEFAULT_OOS_WEEKS,
    min_rows: int = MIN_OOS_ROWS,
) -> float:
    """Out-of-sample fit of the frozen-coefficient difference prediction
    over the half-year following the window."""
    window = result.window
    grid = factors.dates
    future = np.nonzero(
        (grid > window.end) & (grid <= window.end + np.timedelta64(horizon_weeks * WEEK_DAYS, "D"))
    )[0]
    anchor = np.nonzero(grid <= window.end)[0]
    if future.size == 0 or anchor.size == 0:
        raise MissingFuture(f"no observations after {window.label()}")
    rows = np.concatenate([[anchor[-1]], future])

    sel = list(result.selected_set)
    v = factors.values[np.ix_(rows, sel)]
    a = prices.assets.index(result.asset)
    pos = np.searchsorted(prices.dates, grid[rows])
    y = prices.prices[pos, a]

    dv = np.diff(v, axis=0)
    dy = np.diff(y)
    ok = np.isfinite(dy) & np.isfinite(dv).all(axis=1)
    if int(ok.sum()) < min_rows:
        raise MissingFuture(
            f"{int(ok.sum())} complete future rows for {result.asset}; need {min_rows}"
        )
    preds = dv[ok] @ result.fit.coefficients
    train_dy = result.fit.fitted + result.fit.residuals
    return out_of_sample_r2(preds, dy[ok], float(train_dy.mean()))
