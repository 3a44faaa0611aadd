import numpy as np
import pytest
from hypothesis import given, strategies as st

from amfkit.windows import (
    enumerate_windows,
    friday_grid,
    make_window,
    week_slot,
)


def brute_force_count(first, last, min_len):
    return sum(
        1
        for s in range(first, last + 1)
        for e in range(s, last + 1)
        if e - s + 1 >= min_len
    )


def test_full_study_span_has_55_windows():
    assert len(enumerate_windows(2007, 2018, 3)) == 55


def test_single_admissible_window():
    ws = enumerate_windows(2007, 2009, 3)
    assert len(ws) == 1
    assert (ws[0].start_year, ws[0].end_year) == (2007, 2009)


def test_six_year_span_has_10_windows():
    # brute force: sum over lengths 3..6 of (6 - L + 1)
    assert len(enumerate_windows(2007, 2012, 3)) == 10
    assert brute_force_count(2007, 2012, 3) == 10


@given(span=st.integers(0, 19), min_len=st.integers(1, 6))
def test_cardinality_matches_brute_force(span, min_len):
    first, last = 2000, 2000 + span
    got = len(enumerate_windows(first, last, min_len))
    assert got == brute_force_count(first, last, min_len)


def test_windows_sorted_and_bounded():
    ws = enumerate_windows(2007, 2018, 3)
    keys = [(w.start_year, w.end_year) for w in ws]
    assert keys == sorted(keys)
    for w in ws:
        assert str(w.start) == f"{w.start_year}-01-01"
        assert str(w.end) == f"{w.end_year}-12-31"


def test_weekly_count_meets_floor():
    for w in enumerate_windows(2007, 2018, 3):
        assert w.n >= 52 * w.years - 4
        grid = friday_grid(w.start, w.end)
        assert grid.size == w.n


def test_three_year_window_has_at_least_156_weeks():
    for start in range(2007, 2017):
        assert make_window(start, start + 2).n >= 156


def test_mid_is_midpoint_rounded_down_to_friday():
    w = make_window(2011, 2013)
    a = w.start.astype(np.int64)
    b = w.end.astype(np.int64)
    mid = w.mid.astype(np.int64)
    assert mid <= (a + b) // 2 < mid + 7
    assert mid % 7 == 1  # Fridays are day 1 mod 7 since the epoch
    assert str(w.mid).startswith("2012-")


def test_empty_when_nothing_fits():
    assert enumerate_windows(2010, 2011, 3) == []


@pytest.mark.parametrize(
    "date,expected",
    [
        ("2007-01-05", "2007-01-05"),  # Friday stays
        ("2007-01-01", "2007-01-05"),  # Monday maps forward to its Friday
        ("2007-01-04", "2007-01-05"),  # Thursday stands in
        ("2007-01-06", "2007-01-05"),  # Saturday rolls back
        ("2007-01-07", "2007-01-05"),  # Sunday rolls back
        ("2007-01-08", "2007-01-12"),  # next Monday belongs to the next week
    ],
)
def test_week_slot_assignment(date, expected):
    assert str(week_slot(np.datetime64(date))) == expected
