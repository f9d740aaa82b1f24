import numpy as np
import pytest

from rhoq.detrended import DetrendConfig, ScaleGrid, rho_q
from rhoq.errors import ConfigError, DtMismatch, EmptyOverlap, MisalignedSeries, SpanTooShort
from rhoq.ingest import ReturnSeries, SessionCalendar, log_returns, resample, TickSeries
from rhoq.rolling import RollingSpec, align, rolling_csv, rolling_json, rolling_rho, windows
from rhoq.synth import as_return_series, gaussian_pair
from rhoq.timeutil import parse_instant

MON = parse_instant("2022-01-03T00:00:00Z")
HOUR = 3_600_000


def series(values, t0=MON, dt=10.0, name="X"):
    return ReturnSeries(name, t0, dt, np.asarray(values, dtype=float))


def test_single_window_covers_everything():
    rs = series(np.zeros(360))  # one hour at 10 s
    wins = windows(rs, RollingSpec(HOUR, HOUR // 4, (12,)))
    assert len(wins) == 1
    assert (wins[0].lo, wins[0].hi) == (0, 360)


def test_window_plus_two_steps():
    step = 600_000  # 10 minutes = 60 samples
    rs = series(np.zeros(360 + 120))
    assert len(windows(rs, RollingSpec(HOUR, step, (12,)))) == 3


@pytest.mark.parametrize("n, window, step", [(1000, 400, 100), (1000, 1000, 7), (999, 300, 300), (5000, 1234, 321)])
def test_window_count_formula(n, window, step):
    rs = series(np.zeros(n))
    spec = RollingSpec(window * 10_000, step * 10_000, (12,))
    wins = windows(rs, spec)
    assert len(wins) == (n - window) // step + 1
    assert all(w.n_samples == window for w in wins)


def test_span_shorter_than_window():
    with pytest.raises(SpanTooShort):
        windows(series(np.zeros(10)), RollingSpec("1h", "10m", (12,)))


def test_weekend_gap_shrinks_and_flags_window():
    # Thursday 00:00 .. next Tuesday 00:00 on the FX calendar, 60 s grid
    thu = parse_instant("2022-01-06T00:00:00Z")
    end = parse_instant("2022-01-11T00:00:00Z")
    ticks = TickSeries("X", [thu, end], [1.0, 1.0])
    rs = log_returns(resample(ticks, 60, SessionCalendar()))
    spec = RollingSpec("2d", "1d", (400,))
    wins = windows(rs, spec)
    nominal = 2 * 1440
    counts = [w.n_samples for w in wins]
    assert max(counts) < nominal  # the daily break always removes some samples
    weekend = [w for w in wins if w.start == parse_instant("2022-01-08T00:00:00Z")][0]  # Sat-Sun
    assert weekend.n_samples < 4 * 400
    assert weekend.short
    assert not wins[0].short


def test_rolling_identity():
    x, _ = gaussian_pair(0.0, 8640 * 3, 1)  # 3 days at 10 s
    a = as_return_series(x, "A", MON)
    res = rolling_rho(a, a, RollingSpec("1d", "12h", (12, 360)), DetrendConfig(2, (1, 4)))
    assert len(res) == 5
    np.testing.assert_allclose(res.rho, 1.0, atol=1e-12)


def test_full_span_window_matches_static_bitwise():
    x, y = gaussian_pair(0.4, 8640 * 2, 2)
    a, b = as_return_series(x, "A", MON), as_return_series(y, "B", MON)
    cfg = DetrendConfig(2, (1.0, 2.0, 4.0))
    res = rolling_rho(a, b, RollingSpec("2d", "1d", (12, 360)), cfg)
    static = rho_q(x, y, ScaleGrid.of([12, 360]), cfg).rho
    assert len(res) == 1
    assert res.rho[0].tobytes() == static.tobytes()


def test_window_slice_equals_static_on_slice():
    x, y = gaussian_pair(0.3, 8640 * 3, 3)
    a, b = as_return_series(x, "A", MON), as_return_series(y, "B", MON)
    spec = RollingSpec("1d", "6h", (12, 48))
    res = rolling_rho(a, b, spec)
    for k, w in enumerate(windows(a, spec)):
        ref = rho_q(x[w.lo:w.hi], y[w.lo:w.hi], ScaleGrid.of([12, 48]), DetrendConfig(q_values=spec.q_values)).rho
        assert res.rho[k].tobytes() == ref.tobytes()


def test_shift_moves_timestamps_only():
    x, y = gaussian_pair(0.3, 8640 * 3, 4)
    spec = RollingSpec("1d", "12h", (12,))
    r0 = rolling_rho(as_return_series(x, "A", MON), as_return_series(y, "B", MON), spec)
    shift = 2 * spec.step
    r1 = rolling_rho(as_return_series(x, "A", MON + shift), as_return_series(y, "B", MON + shift), spec)
    np.testing.assert_array_equal(r1.window_ends - r0.window_ends, shift)
    assert r0.rho.tobytes() == r1.rho.tobytes()


def test_workers_keep_output_identical():
    x, y = gaussian_pair(0.3, 8640 * 3, 5)
    a, b = as_return_series(x, "A", MON), as_return_series(y, "B", MON)
    spec = RollingSpec("1d", "6h", (12, 360))
    assert rolling_csv([rolling_rho(a, b, spec, workers=1)]) == rolling_csv([rolling_rho(a, b, spec, workers=3)])


def test_short_windows_serialize_empty():
    thu = parse_instant("2022-01-06T00:00:00Z")
    end = parse_instant("2022-01-11T00:00:00Z")
    rng = np.random.default_rng(6)
    t = np.arange(thu, end, 30_000)
    px = np.exp(np.cumsum(0.001 * rng.standard_normal(t.size)))
    py = np.exp(np.cumsum(0.001 * rng.standard_normal(t.size)))
    cal = SessionCalendar()
    a = log_returns(resample(TickSeries("A", t, px), 60, cal))
    b = log_returns(resample(TickSeries("B", t, py), 60, cal))
    res = rolling_rho(a, b, RollingSpec("2d", "1d", (400,)))
    assert np.isnan(res.rho).any() and not np.isnan(res.rho).all()
    lines = rolling_csv([res]).splitlines()
    assert lines[0] == "window_end,pair,q,s,rho,n_samples"
    empty = [ln for ln in lines[1:] if ln.split(",")[4] == ""]
    assert empty and all(ln.split(",")[4] != "0" for ln in lines[1:])
    import json

    doc = json.loads(rolling_json([res], {"window": "2d"}))
    assert any(r["rho"] is None for r in doc["rolling"][0]["rows"])


def test_misaligned_rejected():
    a = series(np.zeros(100))
    b = series(np.zeros(100), t0=MON + 10_000)
    with pytest.raises(MisalignedSeries):
        rolling_rho(a, b, RollingSpec("5m", "1m", (12,)))


def test_spec_validation():
    with pytest.raises(ConfigError):
        RollingSpec("1d", "2d")
    with pytest.raises(ConfigError):
        RollingSpec("1h", "10m", (12, 360)).check_scales(10)
    RollingSpec().check_scales(10)


# -- align ----------------------------------------------------------------------

def test_align_identical_grids():
    a = series(np.arange(10.0))
    b = series(np.arange(10.0) * 2)
    x, y = align(a, b)
    assert x is a and y is b


def test_align_trims_late_start():
    a = series(np.arange(100.0))
    b = series(np.arange(90.0), t0=MON + 10 * 10_000, name="Y")
    x, y = align(a, b)
    assert len(x) == len(y) == 90
    assert x.t0 == y.t0 == MON + 100_000
    np.testing.assert_array_equal(x.returns, np.arange(10.0, 100.0))
    np.testing.assert_array_equal(x.times, y.times)


def test_align_disjoint():
    with pytest.raises(EmptyOverlap):
        align(series(np.zeros(10)), series(np.zeros(10), t0=MON + 10**9))


def test_align_dt_mismatch():
    with pytest.raises(DtMismatch):
        align(series(np.zeros(10)), series(np.zeros(10), dt=60))
