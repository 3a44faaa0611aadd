"""Price and factor panels on the weekly grid.

Conventions
-----------
* Dates are Fridays, strictly increasing, 7 days apart.
* ``returns[t]`` is the return realized over the week ending at ``dates[t]``
  (so ``prices[t] = prices[t-1] * (1 + returns[t])`` wherever all three are
  present).  The first available week of a series has no return and is
  therefore masked unavailable.
* Missing cells are NaN; ``mask`` is True only where both price and return
  are finite.
* Factor column 0 is always the money-market account value, column 1 the
  market index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateRate,
    TooShort,
    TotalLossUnsupported,
    ValidationError,
)
from .taxonomy import Taxonomy
from .windows import WEEK_DAYS, Window

PRICE_RETURN_RTOL = 1e-10

ROLE_MMA = "mma"
ROLE_MARKET = "market"
ROLE_FF5 = "ff5"
ROLE_ETF = "etf"


def compound_mma(rates: np.ndarray) -> np.ndarray:
    """Money-market account values from per-period risk-free rates.

    Value starts at 1 and compounds each period: output has length
    ``len(rates) + 1``.
    """
    rates = np.asarray(rates, dtype=float)
    if rates.ndim != 1:
        raise ValidationError("rates must be one-dimensional")
    if not np.all(np.isfinite(rates)):
        raise ValidationError("rates must be finite")
    if np.any(rates <= -1.0):
        raise DegenerateRate("rate <= -1 cannot be compounded")
    out = np.empty(rates.size + 1)
    out[0] = 1.0
    np.cumprod(1.0 + rates, out=out[1:])
    return out


def build_adjusted_prices(initial_price: float, returns: np.ndarray) -> np.ndarray:
    """Adjusted price series compounded from an initial price and returns."""
    if not initial_price > 0:
        raise ValidationError("initial price must be positive")
    returns = np.asarray(returns, dtype=float)
    if not np.all(np.isfinite(returns)):
        raise ValidationError("returns must be finite")
    bad = np.nonzero(returns <= -1.0)[0]
    if bad.size:
        raise TotalLossUnsupported(int(bad[0]))
    out = np.empty(returns.size + 1)
    out[0] = initial_price
    np.cumprod(1.0 + returns, out=out[1:])
    out[1:] *= initial_price
    return out


def first_difference(series: np.ndarray) -> np.ndarray:
    """First-order differences; element t is series[t+1] - series[t]."""
    series = np.asarray(series, dtype=float)
    if series.shape[-1] < 2:
        raise TooShort("need at least two observations to difference")
    return np.diff(series, axis=-1)


def _check_weekly_dates(dates: np.ndarray) -> np.ndarray:
    dates = np.asarray(dates, dtype="datetime64[D]")
    if dates.ndim != 1 or dates.size == 0:
        raise ValidationError("dates must be a nonempty 1-d array")
    gaps = np.diff(dates.astype(np.int64))
    if dates.size > 1 and not np.all(gaps == WEEK_DAYS):
        raise ValidationError("dates must be strictly increasing on a 7-day grid")
    return dates


@dataclass(frozen=True)
class PricePanel:
    """Weekly adjusted prices and returns for a set of assets."""

    dates: np.ndarray
    assets: tuple[str, ...]
    prices: np.ndarray
    returns: np.ndarray
    mask: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, dates, assets, prices, returns) -> "PricePanel":
        dates = _check_weekly_dates(dates)
        assets = tuple(assets)
        prices = np.asarray(prices, dtype=float)
        returns = np.asarray(returns, dtype=float)
        shape = (dates.size, len(assets))
        if prices.shape != shape or returns.shape != shape:
            raise ValidationError(f"prices/returns must have shape {shape}")
        if len(set(assets)) != len(assets):
            raise ValidationError("duplicate asset identifiers")
        mask = np.isfinite(prices) & np.isfinite(returns)
        panel = cls(dates=dates, assets=assets, prices=prices, returns=returns, mask=mask)
        panel._check_coherence()
        return panel

    def _check_coherence(self):
        p0 = self.prices[:-1]
        p1 = self.prices[1:]
        r1 = self.returns[1:]
        ok = np.isfinite(p0) & np.isfinite(p1) & np.isfinite(r1)
        if not ok.any():
            return
        implied = p0[ok] * (1.0 + r1[ok])
        scale = np.maximum(np.abs(p1[ok]), 1e-30)
        bad = np.abs(implied - p1[ok]) > PRICE_RETURN_RTOL * scale
        if bad.any():
            t, a = np.nonzero(ok)
            k = np.nonzero(bad)[0][0]
            raise ValidationError(
                f"price/return mismatch for asset {self.assets[a[k]]!r} "
                f"at {self.dates[t[k] + 1]}"
            )

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    def date_slice(self, window: Window) -> np.ndarray:
        """Indices of grid dates inside the window."""
        return np.nonzero((self.dates >= window.start) & (self.dates <= window.end))[0]


@dataclass(frozen=True)
class FactorPanel:
    """Weekly basis-asset values with role tags and ETF category labels.

    ``roles[j]`` is one of {mma, market, ff5, etf}; exactly one mma (column
    0) and one market (column 1).  ``categories`` maps each etf-tagged
    factor name to its (class, subclass) pair.
    """

    dates: np.ndarray
    factors: tuple[str, ...]
    roles: tuple[str, ...]
    values: np.ndarray
    categories: dict[str, tuple[str, str]] = field(repr=False)

    @classmethod
    def build(cls, dates, factors, roles, values, categories, taxonomy: Taxonomy) -> "FactorPanel":
        dates = _check_weekly_dates(dates)
        factors = tuple(factors)
        roles = tuple(roles)
        values = np.asarray(values, dtype=float)
        if values.shape != (dates.size, len(factors)):
            raise ValidationError("values shape must be (n_dates, n_factors)")
        if len(set(factors)) != len(factors):
            raise ValidationError("duplicate factor identifiers")
        if len(roles) != len(factors):
            raise ValidationError("one role per factor required")
        bad_roles = set(roles) - {ROLE_MMA, ROLE_MARKET, ROLE_FF5, ROLE_ETF}
        if bad_roles:
            raise ValidationError(f"unknown roles: {sorted(bad_roles)}")
        if roles.count(ROLE_MMA) != 1 or roles.count(ROLE_MARKET) != 1:
            raise ValidationError("exactly one mma and one market factor required")
        if roles[0] != ROLE_MMA or roles[1] != ROLE_MARKET:
            raise ValidationError("mma must be column 0 and market column 1")
        for j, (name, role) in enumerate(zip(factors, roles)):
            if role == ROLE_ETF:
                if name not in categories:
                    raise ValidationError(f"etf factor {name!r} lacks a category label")
                cls_name, sub = categories[name]
                if sub not in taxonomy or taxonomy.class_of(sub) != cls_name:
                    raise ValidationError(
                        f"etf factor {name!r} has category {(cls_name, sub)} not in taxonomy"
                    )
        mma = values[:, 0]
        finite = np.isfinite(mma)
        if not finite.any() or abs(mma[np.argmax(finite)] - 1.0) > 1e-8:
            raise ValidationError("mma series must start at 1")
        if np.any(mma[finite] <= 0):
            raise ValidationError("mma series must stay positive")
        kept = {name: categories[name] for name, role in zip(factors, roles) if role == ROLE_ETF}
        return cls(dates=dates, factors=factors, roles=roles, values=values, categories=kept)

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    @property
    def mma_index(self) -> int:
        return 0

    @property
    def market_index(self) -> int:
        return 1

    def indices_with_role(self, role: str) -> list[int]:
        return [j for j, r in enumerate(self.roles) if r == role]

    def date_slice(self, window: Window) -> np.ndarray:
        return np.nonzero((self.dates >= window.start) & (self.dates <= window.end))[0]

    def available_in(self, rows: np.ndarray) -> np.ndarray:
        """Factor indices with complete data over the given grid rows."""
        return np.nonzero(np.isfinite(self.values[rows]).all(axis=0))[0]


def filter_assets(panel: PricePanel, window: Window, min_coverage: float = 2.0 / 3.0) -> list[str]:
    """Assets whose availability over the window meets the coverage floor."""
    if not 0 < min_coverage <= 1:
        raise ValidationError("min_coverage must be in (0, 1]")
    rows = panel.date_slice(window)
    if rows.size == 0:
        return []
    coverage = panel.mask[rows].mean(axis=0)
    return [a for a, c in zip(panel.assets, coverage) if c >= min_coverage]


def align_panels(prices: PricePanel, factors: FactorPanel) -> tuple[PricePanel, FactorPanel]:
    """Reindex both panels onto the union of their weekly grids."""
    if prices.dates.size and factors.dates.size and np.array_equal(prices.dates, factors.dates):
        return prices, factors
    lo = min(prices.dates[0], factors.dates[0])
    hi = max(prices.dates[-1], factors.dates[-1])
    grid = np.arange(lo.astype(np.int64), hi.astype(np.int64) + 1, WEEK_DAYS).astype("datetime64[D]")

    def expand(dates, mat):
        out = np.full((grid.size, mat.shape[1]), np.nan)
        pos = np.searchsorted(grid, dates)
        out[pos] = mat
        return out

    new_prices = PricePanel.build(
        grid, prices.assets, expand(prices.dates, prices.prices), expand(prices.dates, prices.returns)
    )
    new_values = expand(factors.dates, factors.values)
    new_factors = FactorPanel(
        dates=grid,
        factors=factors.factors,
        roles=factors.roles,
        values=new_values,
        categories=dict(factors.categories),
    )
    return new_prices, new_factors
