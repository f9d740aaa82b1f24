import io
import math

import numpy as np
import pytest

from rhoq.errors import (
    EmptySeries,
    EmptyWindow,
    MalformedRow,
    NonMonotoneTimestamp,
    NonPositivePrice,
)
from rhoq.ingest import (
    PriceGrid,
    ReturnSeries,
    SessionCalendar,
    TickSeries,
    cumulative_returns,
    drop_break_returns,
    event_window,
    load_returns,
    log_returns,
    parse_ticks,
    resample,
    sniff_format,
    write_ticks,
)
from rhoq.timeutil import format_instant, parse_duration, parse_instant

MON = parse_instant("2022-01-03T00:00:00Z")  # a Monday
MIN = 60_000


def csv(text):
    return io.StringIO(text)


# -- parse_ticks ----------------------------------------------------------------

def test_parse_three_rows():
    ts = parse_ticks(csv(
        "timestamp,price\n"
        "2022-01-03T14:00:00.250Z,100.5\n"
        "2022-01-03T14:00:01.000Z,100.6\n"
        "1641218402000,100.4\n"
    ), "BTC")
    assert len(ts) == 3
    assert ts.times.tolist() == [1641218400250, 1641218401000, 1641218402000]
    assert ts.prices.tolist() == [100.5, 100.6, 100.4]


def test_parse_empty_file():
    assert len(parse_ticks(csv(""), "X")) == 0


def test_parse_header_only():
    assert len(parse_ticks(csv("timestamp,price\n"), "X")) == 0


def test_parse_zero_price():
    with pytest.raises(NonPositivePrice) as info:
        parse_ticks(csv("timestamp,price\n2022-01-03T00:00:00Z,1\n2022-01-03T00:00:01Z,0\n"), "X")
    assert info.value.line == 3


def test_parse_out_of_order():
    with pytest.raises(NonMonotoneTimestamp) as info:
        parse_ticks(csv("timestamp,price\n2000,1\n1000,1\n"), "X")
    assert info.value.line == 3


def test_parse_malformed_reports_line():
    with pytest.raises(MalformedRow) as info:
        parse_ticks(csv("timestamp,price\n1000,1\n2000\n"), "X")
    assert info.value.line == 3
    with pytest.raises(MalformedRow, match="line 2"):
        parse_ticks(csv("timestamp,price\nyesterday,1\n"), "X")
    with pytest.raises(MalformedRow, match="line 2"):
        parse_ticks(csv("timestamp,price\n1000,abc\n"), "X")


def test_parse_bad_header():
    with pytest.raises(MalformedRow):
        parse_ticks(csv("time,px\n1,1\n"), "X")


def test_parse_normalizes_offsets_to_utc():
    ts = parse_ticks(csv("timestamp,price\n2022-01-03T15:00:00.000+01:00,1\n"), "X")
    assert format_instant(ts.times[0]) == "2022-01-03T14:00:00.000Z"


def test_tick_series_invariants():
    with pytest.raises(NonPositivePrice):
        TickSeries("X", [1, 2], [1.0, -1.0])
    with pytest.raises(NonMonotoneTimestamp):
        TickSeries("X", [2, 2], [1.0, 1.0])


# -- resample -------------------------------------------------------------------

def test_resample_locf():
    ts = TickSeries("X", [0, 25_000], [100.0, 101.0])
    grid = resample(ts, 10)
    assert grid.times.tolist() == [0, 10_000, 20_000, 30_000]
    assert grid.prices.tolist() == [100.0, 100.0, 100.0, 101.0]


def test_resample_grid_rounds_up_first_tick():
    ts = TickSeries("X", [3_000, 14_000], [1.0, 2.0])
    grid = resample(ts, 10)
    assert grid.times.tolist() == [10_000, 20_000]
    assert grid.prices.tolist() == [1.0, 2.0]


def test_resample_single_tick():
    grid = resample(TickSeries("X", [MON + 10_000], [5.0]), 10)
    assert len(grid) == 1


def test_resample_empty_rejected():
    with pytest.raises(EmptySeries):
        resample(TickSeries("X", [], []), 10)


def test_resample_skips_daily_break():
    t1 = MON + 20 * 3_600_000 + 10 * MIN  # 20:10
    t2 = MON + 22 * 3_600_000 + 5 * MIN  # 22:05
    grid = resample(TickSeries("X", [t1, t2], [1.0, 2.0]), 10, SessionCalendar())
    brk_lo, brk_hi = MON + 20 * 3_600_000 + 15 * MIN, MON + 22 * 3_600_000
    assert not np.any((grid.times >= brk_lo) & (grid.times < brk_hi))
    assert brk_hi in grid.times.tolist()
    # first post-break point carries the last pre-break quote forward
    assert grid.prices[grid.times.tolist().index(brk_hi)] == 1.0


def test_resample_idempotent_on_uniform_input():
    rng = np.random.default_rng(0)
    times = MON + 10_000 * np.arange(500)
    prices = np.exp(np.cumsum(0.001 * rng.standard_normal(500)))
    grid = resample(TickSeries("X", times, prices), 10)
    np.testing.assert_array_equal(grid.times, times)
    np.testing.assert_array_equal(grid.prices, prices)
    again = resample(TickSeries("X", grid.times, grid.prices), 10)
    np.testing.assert_array_equal(again.prices, grid.prices)


def test_calendar_weekend_closed():
    cal = SessionCalendar()
    fri = parse_instant("2022-01-07T00:00:00Z")
    sun = parse_instant("2022-01-09T00:00:00Z")
    probe = [
        fri + 20 * 3_600_000 + 14 * MIN,  # Fri 20:14 open
        fri + 20 * 3_600_000 + 15 * MIN,  # Fri 20:15 closed
        parse_instant("2022-01-08T12:00:00Z"),  # Saturday
        sun + 21 * 3_600_000 + 59 * MIN,  # Sun 21:59 closed
        sun + 22 * 3_600_000,  # Sun 22:00 open
        parse_instant("2022-01-05T21:00:00Z"),  # Wed in break
        parse_instant("2022-01-05T12:00:00Z"),  # Wed midday
    ]
    assert cal.is_open(probe).tolist() == [True, False, False, False, True, False, True]
    assert SessionCalendar.always_open().is_open(probe).all()


def test_calendar_rejects_overlapping_breaks():
    with pytest.raises(ValueError):
        SessionCalendar(breaks=(("10:00", "12:00"), ("11:00", "13:00")))
    with pytest.raises(ValueError):
        SessionCalendar(breaks=(("23:00", "01:00"),))


# -- log_returns ----------------------------------------------------------------

def test_log_returns_constant():
    rs = log_returns(PriceGrid.uniform([5.0, 5.0, 5.0]))
    assert rs.returns.tolist() == [0.0, 0.0]


def test_log_returns_exponential():
    rs = log_returns(PriceGrid.uniform([1.0, math.e, math.e**2]))
    np.testing.assert_allclose(rs.returns, [1.0, 1.0], rtol=1e-15)


def test_log_returns_direct_formula():
    rs = log_returns(PriceGrid.uniform([100.0, 101.0, 99.0]))
    assert rs.returns[0] == pytest.approx(0.009950330853168092, rel=1e-14)
    assert rs.returns[1] == pytest.approx(-0.020000666706669543, rel=1e-14)


def test_log_returns_needs_two_points():
    with pytest.raises(EmptySeries):
        log_returns(PriceGrid.uniform([1.0]))


def test_break_flags_count_calendar_crossings():
    t = MON + 20 * 3_600_000
    ticks = TickSeries("X", [t, t + 3 * 3_600_000], [1.0, 2.0])  # 20:00 .. 23:00 Monday
    grid = resample(ticks, 60, SessionCalendar())
    rs = log_returns(grid)
    assert len(rs) == len(grid) - 1
    assert int(rs.session_break_flags.sum()) == 1
    k = int(np.flatnonzero(rs.session_break_flags)[0])
    assert rs.start_times[k] == t + 14 * MIN and rs.times[k] == t + 2 * 3_600_000


def test_round_trip_prices():
    rng = np.random.default_rng(1)
    prices = 50 * np.exp(np.cumsum(0.01 * rng.standard_normal(2000)))
    rs = log_returns(PriceGrid.uniform(prices))
    rebuilt = prices[0] * np.exp(np.concatenate(([0.0], cumulative_returns(rs))))
    np.testing.assert_allclose(rebuilt, prices, rtol=1e-10)


# -- cumulative / events / drop -------------------------------------------------

def test_cumulative_zero():
    assert cumulative_returns(ReturnSeries("X", 0, 10, [0.0, 0.0, 0.0])).tolist() == [0, 0, 0]


def test_cumulative_running_sum():
    assert cumulative_returns(ReturnSeries("X", 0, 10, [1.0, -1.0, 2.0])).tolist() == [1, 0, 2]


def test_cumulative_last_is_sum():
    r = np.random.default_rng(2).standard_normal(1000)
    cum = cumulative_returns(ReturnSeries("X", 0, 10, r))
    assert abs(cum[-1] - math.fsum(r)) < 1e-12


def test_event_window_midpoint():
    rs = ReturnSeries("X", MON, 10, np.arange(1.0, 21.0))
    anchor = MON + 10 * 10_000
    trace = event_window(rs, anchor, "10s", "10s")
    assert trace.values.tolist() == [0.0, 10.0, 21.0]
    assert trace.times.tolist() == [anchor - 10_000, anchor, anchor + 10_000]


def test_event_window_before_series():
    rs = ReturnSeries("X", MON, 10, np.ones(20))
    with pytest.raises(EmptyWindow):
        event_window(rs, MON - 3_600_000, "60s", "60s")


def test_event_window_reproduces_step():
    r = np.zeros(100)
    r[50] = 0.05  # return from grid point 50 to 51; anchor at grid point 50
    rs = ReturnSeries("X", MON, 10, r)
    anchor = MON + 50 * 10_000
    trace = event_window(rs, format_instant(anchor), "60s", "300s")
    assert trace.values[0] == 0.0
    before = trace.values[trace.times <= anchor]
    after = trace.values[trace.times > anchor]
    assert np.all(before == 0.0)
    assert np.all(after == 0.05)


def test_drop_breaks_noop():
    rs = ReturnSeries("X", 0, 10, np.ones(5))
    assert drop_break_returns(rs) is rs


def test_drop_breaks_all_flagged():
    rs = ReturnSeries("X", 0, 10, np.ones(4), np.ones(4, dtype=bool))
    assert len(drop_break_returns(rs)) == 0


def test_drop_breaks_one_of_ten():
    flags = np.zeros(10, dtype=bool)
    flags[3] = True
    out = drop_break_returns(ReturnSeries("X", 0, 10, np.arange(10.0), flags))
    assert len(out) == 9
    assert 3.0 not in out.returns.tolist()
    assert not out.session_break_flags.any()


# -- serialization --------------------------------------------------------------

def test_return_series_csv_round_trip(tmp_path):
    r = np.random.default_rng(3).standard_normal(50)
    times = MON + 10_000 * np.concatenate((np.arange(1, 26), np.arange(40, 65)))
    rs = ReturnSeries("ETH", MON, 10, r, times=times)
    assert rs.session_break_flags.sum() == 1
    path = tmp_path / "eth.csv"
    rs.to_csv(path, comments=["generated"])
    assert sniff_format(path) == "returns"
    back = ReturnSeries.from_csv(path)
    assert back.instrument_id == "ETH" and back.t0 == MON and back.dt == 10.0
    np.testing.assert_array_equal(back.returns, r)
    np.testing.assert_array_equal(back.times, times)
    np.testing.assert_array_equal(back.session_break_flags, rs.session_break_flags)


def test_load_returns_from_ticks(tmp_path):
    path = tmp_path / "t.csv"
    write_ticks(path, [MON, MON + 25_000], [100.0, 101.0])
    assert sniff_format(path) == "ticks"
    rs = load_returns(path, "T", dt=10, calendar=SessionCalendar())
    assert len(rs) == 3
    assert rs.returns[-1] == pytest.approx(math.log(101 / 100))


def test_durations():
    assert parse_duration("5d") == 5 * 86_400_000
    assert parse_duration("60s") == 60_000
    assert parse_duration("300") == 300_000
    assert parse_duration("2h") == 7_200_000
    with pytest.raises(ValueError):
        parse_duration("five days")
