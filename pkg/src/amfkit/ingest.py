"""Long-format CSV ingestion and the validated on-disk panel bundle.

Schemas (UTF-8, ISO-8601 dates, header row required):

* prices:  date,id,price,return
* factors: date,id,value,role,class,subclass
* taxonomy override: subclass,class

Observation dates are bucketed onto the Friday grid (an early-week
observation stands in for a missing Friday); every violation is reported
with its data row number.  Floats are written with ``repr`` so panels
round-trip exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ValidationError
from .panels import (
    ROLE_ETF,
    ROLE_MARKET,
    ROLE_MMA,
    FactorPanel,
    PricePanel,
    align_panels,
)
from .taxonomy import Taxonomy, builtin_taxonomy, load_taxonomy
from .windows import WEEK_DAYS, week_slot

_ROLES = {ROLE_MMA, ROLE_MARKET, "ff5", ROLE_ETF}

PRICES_FILE = "prices.csv"
FACTORS_FILE = "factors.csv"
TAXONOMY_FILE = "taxonomy.csv"
MANIFEST_FILE = "manifest.json"


def _read_csv(path: str | Path, required: set[str]) -> pd.DataFrame:
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise ValidationError(f"{path}: file not found") from None
    except Exception as exc:  # malformed CSV
        raise ValidationError(f"{path}: cannot parse CSV ({exc})") from None
    missing = required - set(df.columns)
    if missing:
        raise ValidationError(f"{path}: missing columns {sorted(missing)}")
    return df


def _parse_dates(df: pd.DataFrame, path) -> np.ndarray:
    parsed = pd.to_datetime(df["date"], format="ISO8601", errors="coerce")
    bad = np.nonzero(parsed.isna().to_numpy())[0]
    if bad.size:
        raise ValidationError(f"{path}: unparseable date at row {bad[0] + 2}")
    return parsed.to_numpy().astype("datetime64[D]")


def _parse_float(df: pd.DataFrame, column: str, path) -> np.ndarray:
    raw = df[column].to_numpy()
    out = np.full(raw.size, np.nan)
    for k, cell in enumerate(raw):
        cell = cell.strip()
        if cell == "":
            continue
        try:
            out[k] = float(cell)
        except ValueError:
            raise ValidationError(
                f"{path}: bad {column} value {cell!r} at row {k + 2}"
            ) from None
    return out


def _check_monotone(ids: np.ndarray, dates: np.ndarray, path):
    last: dict[str, np.datetime64] = {}
    for k, (ident, date) in enumerate(zip(ids, dates)):
        prev = last.get(ident)
        if prev is not None and date <= prev:
            raise ValidationError(
                f"{path}: non-monotone date for {ident!r} at row {k + 2}"
            )
        last[ident] = date


def _grid_and_slots(dates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    slots = np.array([week_slot(d) for d in dates], dtype="datetime64[D]")
    lo, hi = slots.min().astype(np.int64), slots.max().astype(np.int64)
    grid = np.arange(lo, hi + 1, WEEK_DAYS).astype("datetime64[D]")
    return grid, slots


def read_price_csv(path: str | Path) -> PricePanel:
    df = _read_csv(path, {"date", "id", "price", "return"})
    if df.empty:
        raise ValidationError(f"{path}: no data rows")
    dates = _parse_dates(df, path)
    ids = df["id"].to_numpy()
    prices = _parse_float(df, "price", path)
    returns = _parse_float(df, "return", path)
    _check_monotone(ids, dates, path)

    grid, slots = _grid_and_slots(dates)
    assets = tuple(dict.fromkeys(ids))
    a_pos = {a: k for k, a in enumerate(assets)}
    t_pos = {d: k for k, d in enumerate(grid)}

    price_mat = np.full((grid.size, len(assets)), np.nan)
    ret_mat = np.full_like(price_mat, np.nan)
    # per-id dates are strictly increasing, so within one week the latest
    # observation lands last and stands in for a missing Friday
    for k in range(len(df)):
        cell = (t_pos[slots[k]], a_pos[ids[k]])
        price_mat[cell] = prices[k]
        ret_mat[cell] = returns[k]
    return PricePanel.build(grid, assets, price_mat, ret_mat)


def read_factor_csv(path: str | Path, taxonomy: Taxonomy | None = None) -> FactorPanel:
    taxonomy = taxonomy or builtin_taxonomy()
    df = _read_csv(path, {"date", "id", "value", "role", "class", "subclass"})
    if df.empty:
        raise ValidationError(f"{path}: no data rows")
    dates = _parse_dates(df, path)
    ids = df["id"].to_numpy()
    values = _parse_float(df, "value", path)
    _check_monotone(ids, dates, path)

    roles: dict[str, str] = {}
    categories: dict[str, tuple[str, str]] = {}
    for k in range(len(df)):
        ident, role = ids[k], df["role"].iat[k].strip()
        if role not in _ROLES:
            raise ValidationError(f"{path}: unknown role {role!r} at row {k + 2}")
        if roles.setdefault(ident, role) != role:
            raise ValidationError(f"{path}: conflicting role for {ident!r} at row {k + 2}")
        if role == ROLE_ETF:
            cat = (df["class"].iat[k].strip(), df["subclass"].iat[k].strip())
            if not cat[0] or not cat[1]:
                raise ValidationError(f"{path}: etf {ident!r} missing class at row {k + 2}")
            if categories.setdefault(ident, cat) != cat:
                raise ValidationError(
                    f"{path}: conflicting category for {ident!r} at row {k + 2}"
                )

    grid, slots = _grid_and_slots(dates)
    ordered = list(dict.fromkeys(ids))
    front = [f for f in ordered if roles[f] == ROLE_MMA]
    front += [f for f in ordered if roles[f] == ROLE_MARKET]
    names = tuple(front + [f for f in ordered if f not in front])
    f_pos = {f: k for k, f in enumerate(names)}
    t_pos = {d: k for k, d in enumerate(grid)}

    mat = np.full((grid.size, len(names)), np.nan)
    for k in range(len(df)):
        mat[t_pos[slots[k]], f_pos[ids[k]]] = values[k]
    return FactorPanel.build(
        grid, names, tuple(roles[f] for f in names), mat, categories, taxonomy
    )


def write_price_csv(panel: PricePanel, path: str | Path):
    lines = ["date,id,price,return"]
    for t, date in enumerate(panel.dates):
        for a, asset in enumerate(panel.assets):
            p, r = panel.prices[t, a], panel.returns[t, a]
            if np.isnan(p) and np.isnan(r):
                continue
            p_txt = "" if np.isnan(p) else repr(float(p))
            r_txt = "" if np.isnan(r) else repr(float(r))
            lines.append(f"{date},{asset},{p_txt},{r_txt}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_factor_csv(panel: FactorPanel, path: str | Path):
    lines = ["date,id,value,role,class,subclass"]
    for t, date in enumerate(panel.dates):
        for j, name in enumerate(panel.factors):
            v = panel.values[t, j]
            if np.isnan(v):
                continue
            cls, sub = panel.categories.get(name, ("", ""))
            lines.append(f"{date},{name},{float(v)!r},{panel.roles[j]},{cls},{sub}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_taxonomy_csv(taxonomy: Taxonomy, path: str | Path):
    lines = ["subclass,class"]
    for sub in sorted(taxonomy.subclasses):
        lines.append(f"{sub},{taxonomy.subclasses[sub]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def bundle_summary(prices: PricePanel, factors: FactorPanel) -> dict:
    return {
        "n_weeks": int(prices.dates.size),
        "first_date": str(prices.dates[0]),
        "last_date": str(prices.dates[-1]),
        "n_assets": prices.n_assets,
        "n_factors": factors.n_factors,
        "asset_coverage": round(float(prices.mask.mean()), 6),
        "factor_coverage": round(float(np.isfinite(factors.values).mean()), 6),
    }


def write_bundle(out_dir: str | Path, prices: PricePanel, factors: FactorPanel,
                 taxonomy: Taxonomy | None = None, metadata: dict | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prices, factors = align_panels(prices, factors)
    write_price_csv(prices, out / PRICES_FILE)
    write_factor_csv(factors, out / FACTORS_FILE)
    write_taxonomy_csv(taxonomy or builtin_taxonomy(), out / TAXONOMY_FILE)
    manifest = {"summary": bundle_summary(prices, factors), "metadata": metadata or {}}
    (out / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def read_bundle(bundle_dir: str | Path) -> tuple[PricePanel, FactorPanel]:
    bundle = Path(bundle_dir)
    taxonomy = load_taxonomy(bundle / TAXONOMY_FILE) if (bundle / TAXONOMY_FILE).exists() else None
    prices = read_price_csv(bundle / PRICES_FILE)
    factors = read_factor_csv(bundle / FACTORS_FILE, taxonomy)
    return align_panels(prices, factors)
