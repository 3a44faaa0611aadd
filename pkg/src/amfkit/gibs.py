"""Groupwise interpretable basis selection and the fixed-baseline comparison.

Per window the pipeline runs once: difference the factor levels,
orthogonalize everything except the money-market and market columns
against the market difference, cluster the ETF columns class by class to
prototypes, cluster the union of prototypes again, and pool the survivors
with the always-included columns.  Per stock it then runs a capped
one-standard-error LASSO on the orthogonalized pool and refits plain OLS
on the original differenced columns of the selected set.

Factor identifiers used in selected/significant sets are panel column
indices, which stay stable across windows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cluster import PrototypeSet, cut_prototypes, distance_matrix, minimax_cluster
from .errors import (
    DegenerateMarket,
    MissingFactor,
    RankDeficient,
    TooFewObservations,
    ValidationError,
)
from .lasso import ModifiedLambdaChoice, choose_lambda, cv_path
from .panels import ROLE_ETF, ROLE_FF5, FactorPanel, PricePanel
from .stats import FitSummary, ols_fit
from .windows import Window

log = logging.getLogger(__name__)

MIN_ROWS_PER_CANDIDATE = 3
VARIANCE_FLOOR = 1e-24


@dataclass(frozen=True)
class OrthogonalizedPanel:
    """Differenced factor columns with everything beyond the first two
    projected off the market difference."""

    transformed: np.ndarray
    projection_target: int = 1


@dataclass(frozen=True)
class SelectionResult:
    asset: str
    selected_set: tuple[int, ...]
    significant_set: tuple[int, ...]
    fit: FitSummary
    window: Window
    lambda_choice: ModifiedLambdaChoice | None = None

    def __post_init__(self):
        support = {
            self.selected_set[k]
            for k in np.nonzero(self.fit.coefficients)[0]
        }
        if not set(self.significant_set) <= support <= set(self.selected_set):
            raise ValidationError("significant set must sit inside the fitted support")


def orthogonalize(dv: np.ndarray, market_col: int = 1) -> OrthogonalizedPanel:
    """Project every column except 0 (mma) and ``market_col`` off the
    market difference column."""
    dv = np.asarray(dv, dtype=float)
    market = dv[:, market_col]
    denom = float(market @ market)
    if denom <= VARIANCE_FLOOR:
        raise DegenerateMarket("market difference column has no variation")
    out = dv.copy()
    keep = (0, market_col)
    for j in range(dv.shape[1]):
        if j in keep:
            continue
        out[:, j] = dv[:, j] - (float(market @ dv[:, j]) / denom) * market
    return OrthogonalizedPanel(transformed=out, projection_target=market_col)


def groupwise_reduce(
    orth: OrthogonalizedPanel,
    factor_names: tuple[str, ...],
    roles: tuple[str, ...],
    classes: dict[str, str],
    threshold_within: float = 0.5,
    threshold_union: float = 0.5,
) -> PrototypeSet:
    """Two-stage prototype reduction of the ETF columns.

    Stage one clusters within each taxonomy class; stage two clusters the
    union of class prototypes.  Non-ETF columns never enter clustering.
    """
    etf_positions = [j for j, r in enumerate(roles) if r == ROLE_ETF]
    for j in etf_positions:
        if factor_names[j] not in classes:
            raise ValidationError(f"etf column {factor_names[j]!r} has no class label")

    by_class: dict[str, list[int]] = {}
    for j in etf_positions:
        by_class.setdefault(classes[factor_names[j]], []).append(j)

    stage_one: list[int] = []
    for cls in sorted(by_class):
        cols = by_class[cls]
        if not cols:
            log.warning("class %s has no available ETF columns; skipped", cls)
            continue
        if len(cols) == 1:
            stage_one.extend(cols)
            continue
        names = [factor_names[j] for j in cols]
        dist = distance_matrix(orth.transformed[:, cols])
        tree = minimax_cluster(names, dist)
        protos = cut_prototypes(tree, threshold_within)
        stage_one.extend(cols[names.index(m)] for m in protos.members)

    stage_one.sort()
    if len(stage_one) <= 1:
        members = tuple(factor_names[j] for j in stage_one)
        return PrototypeSet(
            members=members,
            threshold=threshold_union,
            assignment={m: m for m in members},
        )
    names = [factor_names[j] for j in stage_one]
    dist = distance_matrix(orth.transformed[:, stage_one])
    tree = minimax_cluster(names, dist)
    return cut_prototypes(tree, threshold_union)


def select_factors(
    dy: np.ndarray,
    candidates: np.ndarray,
    candidate_ids: list[int],
    support_cap: int = 20,
    n_folds: int = 10,
    grid_size: int = 100,
) -> tuple[tuple[int, ...], ModifiedLambdaChoice]:
    """Capped one-standard-error LASSO support over orthogonalized
    candidate columns, reported as factor panel indices."""
    dy = np.asarray(dy, dtype=float).ravel()
    candidates = np.asarray(candidates, dtype=float)
    if candidates.shape[1] != len(candidate_ids):
        raise ValidationError("candidate ids must label candidate columns")
    if dy.size < MIN_ROWS_PER_CANDIDATE * len(candidate_ids):
        raise TooFewObservations(
            f"{dy.size} rows for {len(candidate_ids)} candidates; "
            f"need {MIN_ROWS_PER_CANDIDATE}x coverage"
        )
    path = cv_path(candidates, dy, n_folds=n_folds, grid_size=grid_size)
    choice = choose_lambda(path, support_cap=support_cap)
    selected = tuple(sorted(candidate_ids[k] for k in choice.support))
    return selected, choice


def refit_ols(
    dy: np.ndarray,
    dv_selected: np.ndarray,
    selected_ids: tuple[int, ...],
    asset: str,
    window: Window,
    significance: float = 0.05,
    lambda_choice: ModifiedLambdaChoice | None = None,
) -> SelectionResult:
    """Plain OLS on the original (non-orthogonalized) differenced columns
    of the selected set; the significant set keeps coefficients with
    two-sided p-values under the significance level."""
    if not selected_ids:
        raise ValidationError("selected set is empty; nothing to refit")
    try:
        fit = ols_fit(dv_selected, dy)
    except RankDeficient as exc:
        raise RankDeficient(
            selected_ids[exc.column],
            f"factor {selected_ids[exc.column]} is collinear in refit for {asset}",
        ) from exc
    significant = tuple(
        fid for fid, p in zip(selected_ids, fit.p_values) if p < significance
    )
    return SelectionResult(
        asset=asset,
        selected_set=tuple(selected_ids),
        significant_set=significant,
        fit=fit,
        window=window,
        lambda_choice=lambda_choice,
    )


def baseline_ids(factors: FactorPanel) -> tuple[int, ...]:
    """The six fixed-baseline columns: mma, market, and the four
    ff5-tagged factors."""
    ff5 = factors.indices_with_role(ROLE_FF5)
    if len(ff5) != 4:
        raise MissingFactor(f"baseline needs exactly 4 ff5-tagged factors, found {len(ff5)}")
    return tuple([factors.mma_index, factors.market_index] + sorted(ff5))


def ff5_baseline(
    dy: np.ndarray,
    dv: np.ndarray,
    ids: tuple[int, ...],
    id_positions: dict[int, int],
    asset: str,
    window: Window,
    significance: float = 0.05,
) -> SelectionResult:
    """Fixed-set fit: no selection stage, same refit path as the adaptive
    model downstream."""
    missing = [i for i in ids if i not in id_positions]
    if missing:
        raise MissingFactor(f"baseline factors {missing} unavailable in window")
    cols = dv[:, [id_positions[i] for i in ids]]
    return refit_ols(dy, cols, ids, asset, window, significance)


# ---------------------------------------------------------------------------
# window-level orchestration


@dataclass
class WindowData:
    """Shared per-window preparation (stages 1-4 of the pipeline)."""

    window: Window
    dates: np.ndarray
    diff_dates: np.ndarray
    factor_ids: list[int]
    position: dict[int, int]
    roles: dict[int, str]
    levels: np.ndarray
    dv: np.ndarray
    dv_tilde: np.ndarray
    candidate_ids: list[int]
    prototypes: PrototypeSet | None
    warnings: list[str] = field(default_factory=list)


def prepare_window(
    factors: FactorPanel,
    window: Window,
    threshold_within: float = 0.5,
    threshold_union: float = 0.5,
    lo: np.datetime64 | None = None,
    hi: np.datetime64 | None = None,
    reduce: bool = True,
    exclude: frozenset[int] = frozenset(),
) -> WindowData:
    """Difference, orthogonalize, and reduce the factor panel for one window.

    A factor is a candidate only when fully observed across the span
    (``lo``/``hi`` default to the window bounds); columns whose
    orthogonalized difference is numerically constant (for example a
    market clone) are dropped from the pool with a warning.  ``exclude``
    removes factors from clustering and the candidate pool without
    removing them from the prepared matrices.
    """
    lo = window.start if lo is None else lo
    hi = window.end if hi is None else hi
    rows = np.nonzero((factors.dates >= lo) & (factors.dates <= hi))[0]
    if rows.size < 2:
        raise ValidationError(f"window {window.label()} has no weekly observations")
    avail = factors.available_in(rows)
    if factors.mma_index not in avail or factors.market_index not in avail:
        raise MissingFactor("mma and market must be available across the window")

    ids = [int(j) for j in avail]
    position = {fid: k for k, fid in enumerate(ids)}
    levels = factors.values[np.ix_(rows, avail)]
    dv = np.diff(levels, axis=0)
    orth = orthogonalize(dv, market_col=position[factors.market_index])

    warnings: list[str] = []
    degenerate: set[int] = set()
    for fid in ids:
        col = orth.transformed[:, position[fid]]
        centered = col - col.mean()
        if float(centered @ centered) <= VARIANCE_FLOOR * max(1.0, float(col @ col)):
            degenerate.add(fid)
            warnings.append(f"factor {factors.factors[fid]} degenerate after projection; dropped")
            log.warning(warnings[-1])

    skip = exclude | degenerate
    pool = [fid for fid in (factors.mma_index, factors.market_index) if fid not in skip]
    pool += [
        fid for fid in ids
        if factors.roles[fid] == ROLE_FF5 and fid not in skip
    ]
    protos = None
    if reduce:
        cluster_ids = [fid for fid in ids if fid not in skip]
        pos_sub = [position[fid] for fid in cluster_ids]
        names = tuple(factors.factors[fid] for fid in cluster_ids)
        roles = tuple(factors.roles[fid] for fid in cluster_ids)
        classes = {name: cat[0] for name, cat in factors.categories.items()}
        protos = groupwise_reduce(
            OrthogonalizedPanel(orth.transformed[:, pos_sub], orth.projection_target),
            names, roles, classes, threshold_within, threshold_union,
        )
        name_to_id = {factors.factors[fid]: fid for fid in ids}
        pool += sorted(name_to_id[m] for m in protos.members)
    candidate_ids = pool

    dates = factors.dates[rows]
    return WindowData(
        window=window,
        dates=dates,
        diff_dates=dates[:-1],
        factor_ids=ids,
        position=position,
        roles={fid: factors.roles[fid] for fid in ids},
        levels=levels,
        dv=dv,
        dv_tilde=orth.transformed,
        candidate_ids=candidate_ids,
        prototypes=protos,
        warnings=warnings,
    )


def stock_rows(prices: PricePanel, asset: str, data: WindowData) -> tuple[np.ndarray, np.ndarray]:
    """Complete-case difference rows for one stock: returns (row indices
    into the window's difference grid, stock differences)."""
    a = prices.assets.index(asset)
    pos = np.searchsorted(prices.dates, data.dates)
    px = prices.prices[pos, a]
    ok = np.isfinite(px[:-1]) & np.isfinite(px[1:])
    rows = np.nonzero(ok)[0]
    return rows, np.diff(px)[rows]


def gibs_select_stock(
    dy: np.ndarray,
    rows: np.ndarray,
    data: WindowData,
    support_cap: int = 20,
    n_folds: int = 10,
    grid_size: int = 100,
    exclude: frozenset[int] = frozenset(),
) -> tuple[tuple[int, ...], ModifiedLambdaChoice]:
    """Stage 5 for one stock: selection over the window's candidate pool,
    optionally excluding already-claimed factors."""
    cand = [fid for fid in data.candidate_ids if fid not in exclude]
    if not cand:
        return (), None
    cols = data.dv_tilde[np.ix_(rows, [data.position[f] for f in cand])]
    return select_factors(dy, cols, cand, support_cap, n_folds, grid_size)


def fit_stock(
    prices: PricePanel,
    asset: str,
    data: WindowData,
    model: str = "amf",
    support_cap: int = 20,
    n_folds: int = 10,
    grid_size: int = 100,
    significance: float = 0.05,
) -> SelectionResult:
    """Stages 5-6 for one stock under either model tag."""
    rows, dy = stock_rows(prices, asset, data)
    if model == "ff5":
        ids = baseline_ids_from(data)
        return ff5_baseline(
            dy, data.dv[rows], ids, data.position, asset, data.window, significance
        )
    selected, choice = gibs_select_stock(dy, rows, data, support_cap, n_folds, grid_size)
    if not selected:
        # degenerate stock: fall back to the market column alone so the
        # downstream tests still have a base model
        log.info("window %s asset %s: empty selection, falling back to market",
                 data.window.label(), asset)
        selected = (1,)
        choice = None
    cols = data.dv[np.ix_(rows, [data.position[f] for f in selected])]
    return refit_ols(dy, cols, selected, asset, data.window, significance, choice)


def baseline_ids_from(data: WindowData) -> tuple[int, ...]:
    ff5 = sorted(fid for fid, role in data.roles.items() if role == ROLE_FF5)
    if len(ff5) != 4:
        raise MissingFactor(f"baseline needs exactly 4 ff5-tagged factors, found {len(ff5)}")
    return tuple([0, 1] + ff5)
