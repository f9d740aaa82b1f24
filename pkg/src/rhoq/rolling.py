"""rho_q(s) in calendar windows sliding over aligned return series."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from rhoq.detrended import DetrendConfig, ScaleGrid, _fmt_num, rho_q
from rhoq.errors import ConfigError, DtMismatch, EmptyOverlap, MisalignedSeries, SpanTooShort
from rhoq.ingest import ReturnSeries
from rhoq.timeutil import format_duration, format_instant, parse_duration

MIN_BOXES = 4


@dataclass(frozen=True)
class RollingSpec:
    """Window and step are durations (``"5d"``, ``"1d"``, or milliseconds as int)."""

    window: int | str = "5d"
    step: int | str = "1d"
    scales: tuple[int, ...] = (12, 360)
    q_values: tuple[float, ...] = (1.0, 4.0)

    def __post_init__(self):
        window = self.window if isinstance(self.window, int) else parse_duration(self.window)
        step = self.step if isinstance(self.step, int) else parse_duration(self.step)
        object.__setattr__(self, "window", window)
        object.__setattr__(self, "step", step)
        object.__setattr__(self, "scales", tuple(sorted(int(s) for s in self.scales)))
        object.__setattr__(self, "q_values", tuple(float(q) for q in self.q_values))
        problems = []
        if window <= 0 or step <= 0:
            problems.append("window and step must be positive")
        if step > window:
            problems.append(f"step {format_duration(step)} longer than window {format_duration(window)}")
        if not self.scales:
            problems.append("at least one scale is required")
        if problems:
            raise ConfigError(problems)

    def check_scales(self, dt: float) -> None:
        nominal = self.window // int(round(dt * 1000))
        too_big = [s for s in self.scales if MIN_BOXES * s > nominal]
        if too_big:
            raise ConfigError(
                f"scales {too_big} exceed 1/{MIN_BOXES} of the {nominal} samples in a "
                f"{format_duration(self.window)} window"
            )

    def describe(self) -> dict:
        return {
            "window": format_duration(self.window),
            "step": format_duration(self.step),
            "scales": list(self.scales),
            "q_values": list(self.q_values),
        }


@dataclass(frozen=True)
class Window:
    start: int
    end: int
    lo: int  # first return index inside the window
    hi: int  # one past the last
    short: bool

    @property
    def n_samples(self) -> int:
        return self.hi - self.lo


def windows(rs: ReturnSeries, spec: RollingSpec) -> list[Window]:
    """Calendar windows ``[t0 + k*step, t0 + k*step + window]``.

    A return belongs to a window when its opening and closing grid instants
    both lie inside. Windows with fewer than 4 * max(scale) returns are short.
    """
    if len(rs) == 0:
        raise SpanTooShort("empty series")
    span = int(rs.times[-1]) - rs.t0
    if span < spec.window:
        raise SpanTooShort(
            f"series spans {format_duration(span)}, shorter than one {format_duration(spec.window)} window"
        )
    count = (span - spec.window) // spec.step + 1
    starts = rs.t0 + spec.step * np.arange(count, dtype=np.int64)
    ends = starts + spec.window
    lo = np.searchsorted(rs.start_times, starts, side="left")
    hi = np.searchsorted(rs.times, ends, side="right")
    need = MIN_BOXES * max(spec.scales)
    return [
        Window(int(a), int(b), int(i), int(j), bool(j - i < need))
        for a, b, i, j in zip(starts, ends, lo, hi)
    ]


def align(x: ReturnSeries, y: ReturnSeries) -> tuple[ReturnSeries, ReturnSeries]:
    """Trim both series to the returns they share (same opening and closing instants)."""
    if x.dt_ms != y.dt_ms:
        raise DtMismatch(f"sampling intervals differ: {x.dt}s vs {y.dt}s")
    if (len(x) == len(y) and x.t0 == y.t0 and np.array_equal(x.times, y.times)):
        return x, y
    _, ix, iy = np.intersect1d(x.times, y.times, assume_unique=True, return_indices=True)
    same_start = x.start_times[ix] == y.start_times[iy]
    ix, iy = ix[same_start], iy[same_start]
    if ix.size == 0:
        raise EmptyOverlap(f"{x.instrument_id} and {y.instrument_id} share no grid steps")
    t0 = int(x.start_times[ix[0]])

    def take(rs, idx):
        return ReturnSeries(rs.instrument_id, t0, rs.dt, rs.returns[idx], rs.session_break_flags[idx], rs.times[idx])

    return take(x, ix), take(y, iy)


@dataclass
class RollingResult:
    pair: str
    q_values: tuple[float, ...]
    scales: tuple[int, ...]
    window_starts: np.ndarray
    window_ends: np.ndarray
    n_samples: np.ndarray
    rho: np.ndarray  # (n_windows, n_q, n_s); NaN marks a short window

    def __len__(self) -> int:
        return self.window_ends.size

    def series(self, q: float, s: int) -> np.ndarray:
        return self.rho[:, self.q_values.index(float(q)), self.scales.index(int(s))]

    def rows(self) -> list[dict]:
        out = []
        for w in range(len(self)):
            for i, q in enumerate(self.q_values):
                for j, s in enumerate(self.scales):
                    v = self.rho[w, i, j]
                    out.append({
                        "window_end": format_instant(self.window_ends[w]),
                        "pair": self.pair,
                        "q": float(q),
                        "s": int(s),
                        "rho": None if np.isnan(v) else float(v),
                        "n_samples": int(self.n_samples[w]),
                    })
        return out


def rolling_csv(results: Sequence[RollingResult], comments: Sequence[str] = ()) -> str:
    """Long-format ``window_end,pair,q,s,rho,n_samples``; short windows leave rho empty."""
    lines = [f"# {c}" for c in comments]
    lines.append("window_end,pair,q,s,rho,n_samples")
    for res in results:
        for r in res.rows():
            rho = "" if r["rho"] is None else repr(r["rho"])
            lines.append(f"{r['window_end']},{r['pair']},{_fmt_num(r['q'])},{r['s']},{rho},{r['n_samples']}")
    return "\n".join(lines) + "\n"


def rolling_json(results: Sequence[RollingResult], config: dict | None = None) -> str:
    doc = {"config": config or {}, "rolling": [{"pair": r.pair, "rows": r.rows()} for r in results]}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def rolling_rho(
    x: ReturnSeries,
    y: ReturnSeries,
    spec: RollingSpec = RollingSpec(),
    cfg: DetrendConfig | None = None,
    workers: int = 1,
    pair: str | None = None,
) -> RollingResult:
    """rho_q(s) per window. ``cfg`` supplies m and, if given, overrides ``spec.q_values``."""
    if x.dt_ms != y.dt_ms or x.t0 != y.t0 or len(x) != len(y) or not np.array_equal(x.times, y.times):
        raise MisalignedSeries("rolling_rho needs aligned series (same t0, dt and grid); use align()")
    cfg = cfg or DetrendConfig(q_values=spec.q_values)
    spec.check_scales(x.dt)
    grid = ScaleGrid.of(spec.scales)
    wins = windows(x, spec)
    out = np.full((len(wins), len(cfg.q_values), len(grid)), np.nan)

    def work(w: Window):
        if w.short:
            return None
        return rho_q(x.returns[w.lo:w.hi], y.returns[w.lo:w.hi], grid, cfg).rho

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            surfaces = list(pool.map(work, wins))
    else:
        surfaces = [work(w) for w in wins]
    for k, surf in enumerate(surfaces):
        if surf is not None:
            out[k] = surf
    return RollingResult(
        pair or f"{x.instrument_id}~{y.instrument_id}",
        cfg.q_values,
        grid.scales,
        np.array([w.start for w in wins], dtype=np.int64),
        np.array([w.end for w in wins], dtype=np.int64),
        np.array([w.n_samples for w in wins], dtype=np.int64),
        out,
    )


__all__ = [
    "MIN_BOXES",
    "RollingSpec",
    "RollingResult",
    "Window",
    "windows",
    "align",
    "rolling_rho",
    "rolling_csv",
    "rolling_json",
]
