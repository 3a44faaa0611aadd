"""Start-year by end-year result grids and the rolling sweep that fills them.

A sweep runs one (model, test) pair over every admissible window: fit each
retained stock, compute the battery statistic, FDR-adjust p-values within
the window, and record the percentage of stocks below the q-threshold (or
the mean metric for goodness-of-fit tags).  Stocks are independent work
units; aggregation is keyed and sorted by asset so results do not depend
on scheduling order or worker count.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .errors import AmfError
from .gibs import fit_stock, prepare_window, stock_rows
from .invariance import (
    HalfIndicator,
    intercept_test,
    linear_invariance_test,
    normalized_window_time,
    oos_evaluate,
    residual_analysis,
    spline_invariance_test,
)
from .panels import FactorPanel, PricePanel, filter_assets
from .stats import bhy_adjust
from .windows import Window, enumerate_windows

log = logging.getLogger(__name__)

MODEL_TAGS = ("amf", "ff5")
TEST_TAGS = ("intercept", "linear", "residual", "spline", "adj_r2", "oos_r2")
P_VALUE_TESTS = ("intercept", "linear", "residual", "spline")


@dataclass(frozen=True)
class TestGrid:
    """Percentages (or mean metrics) per (start year, end year) window."""

    start_years: np.ndarray
    end_years: np.ndarray
    cells: np.ndarray
    model_tag: str
    test_tag: str
    min_len: int

    @classmethod
    def empty(cls, first_year: int, last_year: int, min_len: int,
              model_tag: str, test_tag: str) -> "TestGrid":
        starts = np.arange(first_year, last_year - min_len + 2)
        ends = np.arange(first_year + min_len - 1, last_year + 1)
        cells = np.full((starts.size, ends.size), np.nan)
        return cls(starts, ends, cells, model_tag, test_tag, min_len)

    @property
    def g(self) -> int:
        return self.start_years.size

    def is_admissible(self, i: int, j: int) -> bool:
        return int(self.end_years[j]) - int(self.start_years[i]) + 1 >= self.min_len

    def set_cell(self, start_year: int, end_year: int, value: float):
        i = int(start_year - self.start_years[0])
        j = int(end_year - self.end_years[0])
        self.cells[i, j] = value

    def cell(self, start_year: int, end_year: int) -> float:
        i = int(start_year - self.start_years[0])
        j = int(end_year - self.end_years[0])
        return float(self.cells[i, j])

    def populated(self) -> list[tuple[int, int, float]]:
        out = []
        for i, s in enumerate(self.start_years):
            for j, e in enumerate(self.end_years):
                v = self.cells[i, j]
                if np.isfinite(v):
                    out.append((int(s), int(e), float(v)))
        return out

    def skew_diagonal(self, k: int) -> np.ndarray:
        """Cells with end index minus start index equal to k: all windows
        of length min_len + k years."""
        vals = [
            self.cells[i, i + k]
            for i in range(self.g)
            if 0 <= i + k < self.end_years.size
        ]
        return np.asarray(vals)

    def skew_anti_diagonal(self, k: int) -> np.ndarray:
        """Cells with (1-indexed) row + column equal to g + k + 1: all
        windows sharing a timestamp midpoint."""
        vals = [
            self.cells[i, j]
            for i in range(self.g)
            for j in [self.g + k - 1 - i]
            if 0 <= j < self.end_years.size
        ]
        return np.asarray(vals)

    def anti_diagonal_mid_year(self, k: int) -> float:
        """Calendar midpoint (fractional year) shared by anti-diagonal k."""
        for i in range(self.g):
            j = self.g + k - 1 - i
            if 0 <= j < self.end_years.size and self.is_admissible(i, j):
                return (int(self.start_years[i]) + int(self.end_years[j]) + 1) / 2.0
        raise ValueError(f"anti-diagonal {k} has no admissible cells")


def diff_grids(a: TestGrid, b: TestGrid) -> TestGrid:
    if a.cells.shape != b.cells.shape or not np.array_equal(a.start_years, b.start_years):
        raise ValueError("grids cover different axes")
    return TestGrid(
        start_years=a.start_years.copy(),
        end_years=a.end_years.copy(),
        cells=a.cells - b.cells,
        model_tag=f"{a.model_tag}-{b.model_tag}",
        test_tag=a.test_tag if a.test_tag == b.test_tag else f"{a.test_tag}-{b.test_tag}",
        min_len=a.min_len,
    )


@dataclass
class WindowOutcome:
    window: Window
    cell: float
    n_retained: int
    n_tested: int    # scored stocks, including no-discovery residual outcomes
    n_pvalues: int   # stocks contributing an actual statistic
    n_errors: int
    errors: dict[str, str] = field(default_factory=dict)


@dataclass
class SweepResult:
    grid: TestGrid
    outcomes: list[WindowOutcome]
    failed_windows: dict[str, str]

    @property
    def partial(self) -> bool:
        return bool(self.failed_windows)


def _stock_statistic(
    prices: PricePanel,
    factors: FactorPanel,
    asset: str,
    data,
    window: Window,
    model: str,
    test: str,
    cfg: RunConfig,
) -> float | None:
    """One battery statistic for one stock; None marks a no-discovery
    residual outcome that still belongs in the denominator."""
    result = fit_stock(
        prices, asset, data,
        model=model,
        support_cap=cfg.support_cap,
        n_folds=cfg.n_folds,
        grid_size=cfg.grid_size,
        significance=cfg.significance,
    )
    if test == "adj_r2":
        return float(result.fit.adj_r2)
    if test == "oos_r2":
        return oos_evaluate(result, prices, factors,
                            horizon_weeks=cfg.oos_weeks)
    if test == "intercept":
        a = prices.assets.index(asset)
        pos = np.searchsorted(prices.dates, data.dates)
        px = prices.prices[pos, a]
        ok = np.isfinite(px)
        cols = [data.position[f] for f in result.selected_set]
        return intercept_test(px[ok], data.levels[np.ix_(np.nonzero(ok)[0], cols)])
    rows, dy = stock_rows(prices, asset, data)
    cols = [data.position[f] for f in result.selected_set]
    dv_sel = data.dv[np.ix_(rows, cols)]
    times = data.diff_dates[rows]
    if test == "linear":
        half = HalfIndicator.from_times(times, window.mid)
        p, _ = linear_invariance_test(dy, dv_sel, half)
        return p
    if test == "spline":
        t_norm = normalized_window_time(times, window)
        return spline_invariance_test(dy, dv_sel, t_norm, cfg.basis_size, asset)
    if test == "residual":
        p, _, _ = residual_analysis(
            prices, asset, factors, window, result.selected_set,
            support_cap=cfg.support_cap,
            n_folds=cfg.n_folds,
            grid_size=cfg.grid_size,
            threshold_within=cfg.threshold_within,
            threshold_union=cfg.threshold_union,
        )
        return p
    raise ValueError(f"unknown test tag {test!r}")


def evaluate_window(
    prices: PricePanel,
    factors: FactorPanel,
    window: Window,
    model: str,
    test: str,
    cfg: RunConfig,
    workers: int = 1,
) -> WindowOutcome:
    retained = filter_assets(prices, window, cfg.min_coverage)
    if not retained:
        return WindowOutcome(window, float("nan"), 0, 0, 0, 0, {})

    data = prepare_window(
        factors, window, cfg.threshold_within, cfg.threshold_union,
        reduce=(model == "amf"),
    )

    def run(asset: str) -> tuple[str, float | None, str | None]:
        try:
            return asset, _stock_statistic(
                prices, factors, asset, data, window, model, test, cfg
            ), None
        except AmfError as exc:
            return asset, None, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(run, retained))
    else:
        raw = [run(asset) for asset in retained]
    by_asset = {asset: (value, err) for asset, value, err in raw}

    values: dict[str, float] = {}
    no_discovery: list[str] = []
    errors: dict[str, str] = {}
    for asset in sorted(by_asset):
        value, err = by_asset[asset]
        if err is not None:
            errors[asset] = err
            log.warning("window %s asset %s failed: %s", window.label(), asset, err)
        elif value is None:
            no_discovery.append(asset)
        else:
            values[asset] = value

    if test in P_VALUE_TESTS:
        denom = len(values) + len(no_discovery)
        if denom == 0 or not values:
            cell = 0.0 if denom else float("nan")
        else:
            q = bhy_adjust(np.array([values[a] for a in sorted(values)]))
            cell = 100.0 * float(np.sum(q < cfg.fdr_level)) / denom
    else:
        cell = float(np.mean([values[a] for a in sorted(values)])) if values else float("nan")
    return WindowOutcome(
        window, cell, len(retained), len(values) + len(no_discovery), len(values),
        len(errors), errors
    )


def sweep(
    prices: PricePanel,
    factors: FactorPanel,
    windows: list[Window],
    model: str,
    test: str,
    cfg: RunConfig,
    workers: int = 1,
) -> SweepResult:
    if model not in MODEL_TAGS:
        raise ValueError(f"model must be one of {MODEL_TAGS}")
    if test not in TEST_TAGS:
        raise ValueError(f"test must be one of {TEST_TAGS}")
    first = min(w.start_year for w in windows)
    last = max(w.end_year for w in windows)
    grid = TestGrid.empty(first, last, cfg.min_len, model, test)
    outcomes: list[WindowOutcome] = []
    failed: dict[str, str] = {}
    for window in windows:
        try:
            outcome = evaluate_window(prices, factors, window, model, test, cfg, workers)
        except AmfError as exc:
            failed[window.label()] = f"{type(exc).__name__}: {exc}"
            log.warning("window %s failed: %s", window.label(), exc)
            continue
        outcomes.append(outcome)
        grid.set_cell(window.start_year, window.end_year, outcome.cell)
    return SweepResult(grid=grid, outcomes=outcomes, failed_windows=failed)


def default_windows(cfg: RunConfig) -> list[Window]:
    return enumerate_windows(cfg.first_year, cfg.last_year, cfg.min_len)


# ---------------------------------------------------------------------------
# serialization


def grid_to_csv(grid: TestGrid) -> str:
    lines = ["start_year,end_year,value"]
    for s, e, v in grid.populated():
        lines.append(f"{s},{e},{v!r}")
    return "\n".join(lines) + "\n"


def grid_from_csv(text: str) -> TestGrid:
    rows = [line.split(",") for line in text.strip().splitlines()[1:]]
    triples = [(int(s), int(e), float(v)) for s, e, v in rows]
    if not triples:
        raise ValueError("grid CSV has no rows")
    min_len = min(e - s + 1 for s, e, _ in triples)
    first = min(s for s, _, _ in triples)
    last = max(e for _, e, _ in triples)
    grid = TestGrid.empty(first, last, min_len, "unknown", "unknown")
    for s, e, v in triples:
        grid.set_cell(s, e, v)
    return grid


def grid_manifest(grid: TestGrid, cfg: RunConfig, result: SweepResult | None = None,
                  metadata: dict | None = None) -> str:
    payload = {
        "model": grid.model_tag,
        "test": grid.test_tag,
        "first_year": int(grid.start_years[0]),
        "last_year": int(grid.end_years[-1]),
        "min_len": grid.min_len,
        "populated_cells": len(grid.populated()),
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "failed_windows": dict(result.failed_windows) if result else {},
        "stock_errors": {
            o.window.label(): o.errors for o in (result.outcomes if result else []) if o.errors
        },
        "metadata": metadata or {},
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def render_svg(grid: TestGrid, cell_px: int = 48) -> str:
    """Heatmap with start years on the vertical axis (top to bottom) and
    end years across the horizontal axis."""
    gs, ge = grid.start_years.size, grid.end_years.size
    margin = 60
    width = margin + ge * cell_px + 10
    height = margin + gs * cell_px + 10
    finite = grid.cells[np.isfinite(grid.cells)]
    lo = float(finite.min()) if finite.size else 0.0
    hi = float(finite.max()) if finite.size else 1.0
    span = hi - lo if hi > lo else 1.0

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{margin}" y="16" font-size="13">'
        f"{grid.model_tag} / {grid.test_tag}</text>",
    ]
    for j, e in enumerate(grid.end_years):
        parts.append(
            f'<text x="{margin + j * cell_px + 4}" y="{margin - 8}" '
            f'font-size="10">{e}</text>'
        )
    for i, s in enumerate(grid.start_years):
        parts.append(
            f'<text x="8" y="{margin + i * cell_px + cell_px // 2}" font-size="10">{s}</text>'
        )
        for j in range(ge):
            v = grid.cells[i, j]
            x, y = margin + j * cell_px, margin + i * cell_px
            if not np.isfinite(v):
                parts.append(
                    f'<rect x="{x}" y="{y}" width="{cell_px}" height="{cell_px}" '
                    f'fill="#f0f0f0" stroke="#ccc"/>'
                )
                continue
            shade = int(round(235 * (1.0 - (v - lo) / span)))
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell_px}" height="{cell_px}" '
                f'fill="rgb({shade},{shade},255)" stroke="#888"/>'
                f'<text x="{x + 3}" y="{y + cell_px // 2 + 4}" font-size="9">{v:.1f}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
