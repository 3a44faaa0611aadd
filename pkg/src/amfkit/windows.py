"""Weekly calendar grid and rolling sub-period enumeration.

The observation grid is calendar Fridays.  All date arithmetic runs on
integer days since the Unix epoch (1970-01-01 was a Thursday, so Fridays
are exactly the days congruent to 1 mod 7), which keeps enumeration of a
full study span well under a millisecond.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WEEK_DAYS = 7
_FRIDAY_MOD = 1  # day-number mod 7 of every Friday


def _day_number(date: np.datetime64) -> int:
    return int(date.astype("datetime64[D]").astype(np.int64))


def _to_date(day: int) -> np.datetime64:
    return np.datetime64(int(day), "D")


def friday_on_or_after(day: int) -> int:
    return day + (_FRIDAY_MOD - day) % WEEK_DAYS


def friday_on_or_before(day: int) -> int:
    return day - (day - _FRIDAY_MOD) % WEEK_DAYS


def week_slot(date: np.datetime64) -> np.datetime64:
    """Map an observation date to its Friday grid slot.

    Trading-week dates (Mon-Fri) map to the Friday closing that week;
    weekend dates map back to the Friday that just ended.
    """
    day = _day_number(date)
    weekday = (day + 3) % 7  # Monday == 0
    if weekday <= 4:
        return _to_date(friday_on_or_after(day))
    return _to_date(friday_on_or_before(day))


def friday_grid(start: np.datetime64, end: np.datetime64) -> np.ndarray:
    """All Fridays in [start, end], as datetime64[D]."""
    a = friday_on_or_after(_day_number(start))
    b = friday_on_or_before(_day_number(end))
    if a > b:
        return np.empty(0, dtype="datetime64[D]")
    return np.arange(a, b + 1, WEEK_DAYS).astype("datetime64[D]")


def _count_fridays(day_a: int, day_b: int) -> int:
    a = friday_on_or_after(day_a)
    if a > day_b:
        return 0
    return (day_b - a) // WEEK_DAYS + 1


@dataclass(frozen=True, order=True)
class Window:
    """A calendar sub-period running Jan 1 of ``start_year`` through Dec 31
    of ``end_year``.

    ``mid`` is the timestamp midpoint rounded down to the Friday grid and
    ``n`` the number of weekly grid slots inside the window.
    """

    start_year: int
    end_year: int
    start: np.datetime64
    end: np.datetime64
    mid: np.datetime64
    n: int

    @property
    def years(self) -> int:
        return self.end_year - self.start_year + 1

    def label(self) -> str:
        return f"{self.start_year}-{self.end_year}"


def make_window(start_year: int, end_year: int) -> Window:
    if end_year < start_year:
        raise ValueError("end_year before start_year")
    start = np.datetime64(f"{start_year}-01-01", "D")
    end = np.datetime64(f"{end_year}-12-31", "D")
    a, b = _day_number(start), _day_number(end)
    mid = friday_on_or_before((a + b) // 2)
    return Window(
        start_year=start_year,
        end_year=end_year,
        start=start,
        end=end,
        mid=_to_date(mid),
        n=_count_fridays(a, b),
    )


def enumerate_windows(first_year: int, last_year: int, min_len: int = 3) -> list[Window]:
    """All [start_year, end_year] sub-periods of length >= ``min_len`` years,
    sorted by (start_year, end_year).  Empty when no window fits.
    """
    windows: list[Window] = []
    for s in range(first_year, last_year + 1):
        for e in range(s + min_len - 1, last_year + 1):
            windows.append(make_window(s, e))
    return windows
