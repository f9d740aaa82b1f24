"""Tick files to uniform-interval log-return series.

Pipeline: ``parse_ticks`` -> ``resample`` (last observation carried forward on a
session-aware grid) -> ``log_returns``. Returns that span a closed period of the
calendar are flagged, not removed; ``drop_break_returns`` removes them on request.

All instants are integer UTC epoch milliseconds.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from rhoq.errors import (
    DataError,
    EmptySeries,
    EmptyWindow,
    MalformedRow,
    NoPrecedingTick,
    NonMonotoneTimestamp,
    NonPositivePrice,
)
from rhoq.timeutil import MS_PER_DAY, format_instant, parse_duration, parse_instant

logger = logging.getLogger(__name__)

_WEEKDAYS = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")


def _clock_ms(hhmm: str) -> int:
    hh, mm = hhmm.split(":")
    value = (int(hh) * 60 + int(mm)) * 60_000
    if not 0 <= value <= MS_PER_DAY:
        raise ValueError(f"clock time out of range: {hhmm}")
    return value


@dataclass(frozen=True)
class SessionCalendar:
    """Weekly trading session with daily breaks, evaluated in UTC.

    ``week_open``/``week_close`` are ``(weekday, "HH:MM")`` with Monday = 0; set
    both to ``None`` for a market that never closes for the weekend. ``breaks``
    are half-open daily intervals ``[start, end)``.
    """

    week_open: tuple[int, str] | None = (6, "22:00")
    week_close: tuple[int, str] | None = (4, "20:15")
    breaks: tuple[tuple[str, str], ...] = (("20:15", "22:00"),)
    name: str = "fx"

    def __post_init__(self):
        if (self.week_open is None) != (self.week_close is None):
            raise ValueError("week_open and week_close must both be set or both be None")
        spans = sorted((_clock_ms(a), _clock_ms(b)) for a, b in self.breaks)
        for start, end in spans:
            if not start < end:
                raise ValueError("break intervals must lie within one day (start < end)")
        for (_, e0), (s1, _) in zip(spans, spans[1:]):
            if s1 < e0:
                raise ValueError("break intervals overlap")

    @classmethod
    def always_open(cls) -> "SessionCalendar":
        return cls(week_open=None, week_close=None, breaks=(), name="always")

    @classmethod
    def named(cls, name: str) -> "SessionCalendar":
        if name == "fx":
            return cls()
        if name == "always":
            return cls.always_open()
        raise ValueError(f"unknown calendar {name!r} (expected 'fx' or 'always')")

    def is_open(self, times) -> np.ndarray:
        t = np.asarray(times, dtype=np.int64)
        days, tod = np.divmod(t, MS_PER_DAY)
        open_ = np.ones(t.shape, dtype=bool)
        if self.week_open is not None:
            # 1970-01-01 was a Thursday (weekday 3)
            week_ms = ((days + 3) % 7) * MS_PER_DAY + tod
            close_at = self.week_close[0] * MS_PER_DAY + _clock_ms(self.week_close[1])
            open_at = self.week_open[0] * MS_PER_DAY + _clock_ms(self.week_open[1])
            if close_at < open_at:
                closed = (week_ms >= close_at) & (week_ms < open_at)
            else:
                closed = (week_ms >= close_at) | (week_ms < open_at)
            open_ &= ~closed
        for a, b in self.breaks:
            open_ &= ~((tod >= _clock_ms(a)) & (tod < _clock_ms(b)))
        return open_

    def describe(self) -> dict:
        return {
            "name": self.name,
            "week_open": None if self.week_open is None else f"{_WEEKDAYS[self.week_open[0]]} {self.week_open[1]}",
            "week_close": None if self.week_close is None else f"{_WEEKDAYS[self.week_close[0]]} {self.week_close[1]}",
            "breaks": [f"{a}-{b}" for a, b in self.breaks],
        }


@dataclass
class TickSeries:
    instrument_id: str
    times: np.ndarray  # int64 epoch ms, strictly increasing
    prices: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.int64)
        self.prices = np.asarray(self.prices, dtype=float)
        if self.times.shape != self.prices.shape or self.times.ndim != 1:
            raise DataError("times and prices must be 1-d arrays of equal length")
        bad = np.flatnonzero(~(self.prices > 0))
        if bad.size:
            raise NonPositivePrice(int(bad[0]) + 1, f"non-positive price {self.prices[bad[0]]}")
        bad = np.flatnonzero(np.diff(self.times) <= 0)
        if bad.size:
            raise NonMonotoneTimestamp(int(bad[0]) + 2, "timestamps must be strictly increasing")

    def __len__(self) -> int:
        return self.times.size


@dataclass
class PriceGrid:
    """Prices on a uniform grid, with closed-session grid points removed."""

    instrument_id: str
    times: np.ndarray
    prices: np.ndarray
    dt: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.int64)
        self.prices = np.asarray(self.prices, dtype=float)

    @classmethod
    def uniform(cls, prices, dt: float = 10.0, t0: int = 0, instrument_id: str = "X") -> "PriceGrid":
        prices = np.asarray(prices, dtype=float)
        step = int(round(dt * 1000))
        return cls(instrument_id, t0 + step * np.arange(prices.size, dtype=np.int64), prices, dt)

    def __len__(self) -> int:
        return self.times.size


@dataclass
class ReturnSeries:
    """Log returns on a uniform grid.

    Return ``m`` runs from grid point ``m`` to grid point ``m + 1``; ``times[m]``
    is the instant of its closing grid point and ``t0`` the first grid point.
    Without calendar gaps ``times[m] == t0 + (m + 1) * dt``.
    """

    instrument_id: str
    t0: int
    dt: float
    returns: np.ndarray
    session_break_flags: np.ndarray | None = None
    times: np.ndarray | None = None

    def __post_init__(self):
        self.t0 = int(self.t0)
        self.dt = float(self.dt)
        self.returns = np.asarray(self.returns, dtype=float)
        n = self.returns.size
        if self.returns.ndim != 1:
            raise DataError("returns must be 1-d")
        if self.times is None:
            self.times = self.t0 + self.dt_ms * np.arange(1, n + 1, dtype=np.int64)
        else:
            self.times = np.asarray(self.times, dtype=np.int64)
        if self.session_break_flags is None:
            self.session_break_flags = np.diff(self.grid_times) > self.dt_ms
        else:
            self.session_break_flags = np.asarray(self.session_break_flags, dtype=bool)
        if self.times.size != n or self.session_break_flags.size != n:
            raise DataError("returns, times and flags must have equal lengths")
        if not np.all(np.isfinite(self.returns)):
            raise DataError(f"non-finite return at index {int(np.flatnonzero(~np.isfinite(self.returns))[0])}")
        if n and np.any(np.diff(self.grid_times) <= 0):
            raise DataError("return timestamps must be strictly increasing after t0")

    @property
    def dt_ms(self) -> int:
        return int(round(self.dt * 1000))

    @property
    def grid_times(self) -> np.ndarray:
        return np.concatenate(([self.t0], self.times))

    @property
    def start_times(self) -> np.ndarray:
        """Opening grid instant of each return."""
        return self.grid_times[:-1]

    def __len__(self) -> int:
        return self.returns.size

    def slice(self, start: int, stop: int) -> "ReturnSeries":
        start_times = self.start_times
        t0 = int(start_times[start]) if start < len(self) else int(self.times[-1]) if len(self) else self.t0
        return ReturnSeries(
            self.instrument_id,
            t0,
            self.dt,
            self.returns[start:stop],
            self.session_break_flags[start:stop],
            self.times[start:stop],
        )

    def to_csv(self, target, comments: Sequence[str] = ()) -> None:
        lines = [f"# {c}" for c in comments]
        lines.append("instrument_id,t0,dt")
        lines.append(f"{self.instrument_id},{format_instant(self.t0)},{_fmt_dt(self.dt)}")
        lines.append("timestamp,return,break")
        lines.extend(
            f"{format_instant(t)},{r!r},{int(b)}"
            for t, r, b in zip(self.times.tolist(), self.returns.tolist(), self.session_break_flags.tolist())
        )
        _write_text(target, "\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, source) -> "ReturnSeries":
        rows = list(_numbered_rows(source))
        if len(rows) < 3:
            raise MalformedRow(rows[-1][0] if rows else 1, "return series file needs a 3-line header block")
        (ln, head), (ln2, meta), (ln3, cols) = rows[:3]
        if [h.strip().lower() for h in head] != ["instrument_id", "t0", "dt"] or len(meta) != 3:
            raise MalformedRow(ln, "expected header 'instrument_id,t0,dt'")
        if [h.strip().lower() for h in cols] != ["timestamp", "return", "break"]:
            raise MalformedRow(ln3, "expected column header 'timestamp,return,break'")
        try:
            t0, dt = parse_instant(meta[1]), float(meta[2])
        except ValueError as exc:
            raise MalformedRow(ln2, str(exc)) from None
        times, values, flags = [], [], []
        for ln, row in rows[3:]:
            if len(row) != 3:
                raise MalformedRow(ln, f"expected 3 fields, got {len(row)}")
            try:
                times.append(parse_instant(row[0]))
                values.append(float(row[1]))
                flags.append(row[2].strip() not in ("0", "", "false", "False"))
            except ValueError as exc:
                raise MalformedRow(ln, str(exc)) from None
        return cls(meta[0].strip(), t0, dt, np.array(values, dtype=float), np.array(flags, dtype=bool),
                   np.array(times, dtype=np.int64))


def _fmt_dt(dt: float) -> str:
    return str(int(dt)) if float(dt).is_integer() else repr(float(dt))


def _write_text(target, text: str) -> None:
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", newline="") as fh:
            fh.write(text)


def _open_text(source):
    if hasattr(source, "read"):
        return source, False
    if isinstance(source, (str, os.PathLike)) and not os.path.exists(source):
        raise FileNotFoundError(f"no such file: {source}")
    return open(source, newline=""), True


def _numbered_rows(source) -> Iterable[tuple[int, list[str]]]:
    fh, owned = _open_text(source)
    try:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            yield lineno, next(csv.reader([stripped]))
    finally:
        if owned:
            fh.close()


def sniff_format(source) -> str:
    """``"ticks"`` or ``"returns"``, from the first non-comment line."""
    for _, row in _numbered_rows(source):
        head = [h.strip().lower() for h in row]
        if head == ["timestamp", "price"]:
            return "ticks"
        if head == ["instrument_id", "t0", "dt"]:
            return "returns"
        break
    raise DataError(f"{source}: unrecognised file header")


def parse_ticks(source: str | os.PathLike | IO[str], instrument_id: str) -> TickSeries:
    """Read a ``timestamp,price`` tick CSV.

    Timestamps are ISO-8601 (``Z`` or explicit offset, naive means UTC) or integer
    epoch milliseconds. Errors carry the 1-based line number of the bad row.
    """
    rows = _numbered_rows(source)
    header = next(rows, None)
    if header is None:
        return TickSeries(instrument_id, np.empty(0, np.int64), np.empty(0))
    ln, head = header
    if [h.strip().lower() for h in head] != ["timestamp", "price"]:
        raise MalformedRow(ln, "expected header 'timestamp,price'")

    times: list[int] = []
    prices: list[float] = []
    prev = None
    for ln, row in rows:
        if len(row) != 2:
            raise MalformedRow(ln, f"expected 2 fields, got {len(row)}")
        try:
            t = parse_instant(row[0])
        except ValueError:
            raise MalformedRow(ln, f"bad timestamp {row[0]!r}") from None
        try:
            p = float(row[1])
        except ValueError:
            raise MalformedRow(ln, f"bad price {row[1]!r}") from None
        if not (p > 0) or not math.isfinite(p):
            raise NonPositivePrice(ln, f"non-positive price {row[1]!r}")
        if prev is not None and t <= prev:
            raise NonMonotoneTimestamp(ln, f"timestamp {row[0]} not after previous row")
        prev = t
        times.append(t)
        prices.append(p)
    return TickSeries(instrument_id, np.array(times, dtype=np.int64), np.array(prices, dtype=float))


def resample(ts: TickSeries, dt: float, calendar: SessionCalendar | None = None) -> PriceGrid:
    """Last-observation-carried-forward prices on a ``dt``-second grid.

    Grid instants are whole multiples of ``dt`` from the first tick (rounded up)
    to the last tick (rounded up); instants where ``calendar`` is closed are
    skipped.
    """
    if len(ts) == 0:
        raise EmptySeries(f"{ts.instrument_id}: no ticks to resample")
    if not dt > 0:
        raise ValueError("dt must be positive")
    calendar = calendar or SessionCalendar.always_open()
    step = int(round(dt * 1000))
    first = -(-int(ts.times[0]) // step) * step
    last = -(-int(ts.times[-1]) // step) * step
    grid = np.arange(first, last + 1, step, dtype=np.int64)
    grid = grid[calendar.is_open(grid)]
    if grid.size == 0:
        raise EmptySeries(f"{ts.instrument_id}: every grid point falls in a closed session")
    idx = np.searchsorted(ts.times, grid, side="right") - 1
    if idx[0] < 0:
        raise NoPrecedingTick(f"{ts.instrument_id}: no tick at or before {format_instant(grid[0])}")
    return PriceGrid(ts.instrument_id, grid, ts.prices[idx], float(dt))


def log_returns(grid: PriceGrid) -> ReturnSeries:
    if len(grid) < 2:
        raise EmptySeries("log returns need at least 2 grid points")
    if np.any(grid.prices <= 0):
        raise DataError("prices must be positive")
    logp = np.log(grid.prices)
    return ReturnSeries(grid.instrument_id, int(grid.times[0]), grid.dt, np.diff(logp), times=grid.times[1:])


def cumulative_returns(rs: ReturnSeries) -> np.ndarray:
    return np.cumsum(rs.returns)


@dataclass
class EventTrace:
    instrument_id: str
    anchor: int
    times: np.ndarray  # window start, then the closing instant of each return
    values: np.ndarray  # cumulative log return, values[0] == 0


def event_window(rs: ReturnSeries, anchor: int | str, before, after) -> EventTrace:
    """Cumulative returns over ``[anchor - before, anchor + after]``, starting at 0.

    A return is included when both its opening and closing grid instants lie in
    the window.
    """
    anchor = parse_instant(anchor)
    lo = anchor - parse_duration(before)
    hi = anchor + parse_duration(after)
    starts = rs.start_times
    keep = np.flatnonzero((starts >= lo) & (rs.times <= hi))
    if keep.size == 0:
        raise EmptyWindow(
            f"{rs.instrument_id}: no returns inside [{format_instant(lo)}, {format_instant(hi)}]"
        )
    times = np.concatenate(([starts[keep[0]]], rs.times[keep]))
    values = np.concatenate(([0.0], np.cumsum(rs.returns[keep])))
    return EventTrace(rs.instrument_id, anchor, times, values)


def drop_break_returns(rs: ReturnSeries) -> ReturnSeries:
    keep = ~rs.session_break_flags
    dropped = int(rs.session_break_flags.sum())
    logger.info("%s: dropped %d break-spanning returns", rs.instrument_id, dropped)
    if dropped == 0:
        return rs
    starts = rs.start_times[keep]
    t0 = int(starts[0]) if starts.size else rs.t0
    kept = rs.returns[keep]
    return ReturnSeries(rs.instrument_id, t0, rs.dt, kept, np.zeros(kept.size, dtype=bool), rs.times[keep])


def load_returns(
    path,
    instrument_id: str | None = None,
    dt: float = 10.0,
    calendar: SessionCalendar | None = None,
) -> ReturnSeries:
    """Load either a tick CSV (resampled here) or a return-series CSV."""
    if sniff_format(path) == "returns":
        rs = ReturnSeries.from_csv(path)
        if instrument_id:
            rs.instrument_id = instrument_id
        return rs
    ticks = parse_ticks(path, instrument_id or os.path.splitext(os.path.basename(str(path)))[0])
    return log_returns(resample(ticks, dt, calendar))


def write_ticks(path, times: Sequence[int], prices: Sequence[float]) -> None:
    buf = io.StringIO()
    buf.write("timestamp,price\n")
    for t, p in zip(times, prices):
        buf.write(f"{format_instant(t)},{p!r}\n")
    _write_text(path, buf.getvalue())


__all__ = [
    "SessionCalendar",
    "TickSeries",
    "PriceGrid",
    "ReturnSeries",
    "EventTrace",
    "parse_ticks",
    "resample",
    "log_returns",
    "cumulative_returns",
    "event_window",
    "drop_break_returns",
    "load_returns",
    "sniff_format",
    "write_ticks",
]
