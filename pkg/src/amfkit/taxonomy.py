"""ETF class / subclass taxonomy.

Built-in table covering the 10 ETF classes and 73 subclasses used for
groupwise clustering.  A user-supplied CSV (columns: subclass, class) can
override it at load time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError

_BUILTIN: dict[str, list[str]] = {
    "Bond/Fixed Income": [
        "California Munis",
        "Corporate Bonds",
        "Emerging Markets Bonds",
        "Government Bonds",
        "High Yield Bonds",
        "Inflation-Protected Bonds",
        "International Government Bonds",
        "Money Market",
        "Mortgage Backed Securities",
        "National Munis",
        "New York Munis",
        "Preferred Stock/Convertible Bonds",
        "Total Bond Market",
    ],
    "Commodity": [
        "Agricultural Commodities",
        "Commodities",
        "Metals",
        "Oil & Gas",
        "Precious Metals",
    ],
    "Currency": ["Currency"],
    "Diversified Portfolio": [
        "Diversified Portfolio",
        "Target Retirement Date",
    ],
    "Equity": [
        "All Cap Equities",
        "Alternative Energy Equities",
        "Asia Pacific Equities",
        "Building & Construction",
        "China Equities",
        "Commodity Producers Equities",
        "Communications Equities",
        "Consumer Discretionary Equities",
        "Consumer Staples Equities",
        "Emerging Markets Equities",
        "Energy Equities",
        "Europe Equities",
        "Financial Equities",
        "Foreign Large Cap Equities",
        "Foreign Small & Mid Cap Equities",
        "Global Equities",
        "Health & Biotech Equities",
        "Industrials Equities",
        "Japan Equities",
        "Large Cap Blend Equities",
        "Large Cap Growth Equities",
        "Large Cap Value Equities",
        "Latin America Equities",
        "MLPs (Master Limited Partnerships)",
        "Materials",
        "Mid Cap Blend Equities",
        "Mid Cap Growth Equities",
        "Mid Cap Value Equities",
        "Small Cap Blend Equities",
        "Small Cap Growth Equities",
        "Small Cap Value Equities",
        "Technology Equities",
        "Transportation Equities",
        "Utilities Equities",
        "Volatility Hedged Equity",
        "Water Equities",
    ],
    "Alternative ETFs": ["Hedge Fund", "Long-Short"],
    "Inverse": [
        "Inverse Bonds",
        "Inverse Commodities",
        "Inverse Equities",
        "Inverse Volatility",
    ],
    "Leveraged": [
        "Leveraged Bonds",
        "Leveraged Commodities",
        "Leveraged Currency",
        "Leveraged Equities",
        "Leveraged Multi-Asset",
        "Leveraged Real Estate",
        "Leveraged Volatility",
    ],
    "Real Estate": ["Global Real Estate", "Real Estate"],
    "Volatility": ["Volatility"],
}


@dataclass(frozen=True)
class Taxonomy:
    classes: tuple[str, ...]
    subclasses: dict[str, str] = field(repr=False)  # subclass -> class

    def __post_init__(self):
        for sub, cls in self.subclasses.items():
            if cls not in self.classes:
                raise ValidationError(f"subclass {sub!r} maps to unknown class {cls!r}")

    def class_of(self, subclass: str) -> str:
        try:
            return self.subclasses[subclass]
        except KeyError:
            raise ValidationError(f"unknown subclass {subclass!r}") from None

    def __contains__(self, subclass: str) -> bool:
        return subclass in self.subclasses


def builtin_taxonomy() -> Taxonomy:
    subclasses = {sub: cls for cls, subs in _BUILTIN.items() for sub in subs}
    return Taxonomy(classes=tuple(_BUILTIN), subclasses=subclasses)


def load_taxonomy(path: str | Path) -> Taxonomy:
    """Read a (subclass, class) CSV override; header row required."""
    subclasses: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or {"subclass", "class"} - set(reader.fieldnames):
            raise ValidationError(f"{path}: taxonomy CSV needs 'subclass' and 'class' columns")
        for i, row in enumerate(reader, start=2):
            sub, cls = row["subclass"].strip(), row["class"].strip()
            if not sub or not cls:
                raise ValidationError(f"{path}: empty subclass or class at row {i}")
            if sub in subclasses and subclasses[sub] != cls:
                raise ValidationError(f"{path}: subclass {sub!r} mapped to two classes (row {i})")
            subclasses[sub] = cls
    classes = tuple(dict.fromkeys(subclasses.values()))
    return Taxonomy(classes=classes, subclasses=subclasses)
