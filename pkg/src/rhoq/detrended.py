"""q-dependent detrended cross-correlation coefficient rho_q(s) and DFA scaling.

For two return series x, y of length T and a scale s:

1. Both series are cut into M_s = floor(T/s) boxes of length s from the front
   and another M_s from the back, 2*M_s boxes in total.
2. In every box the returns are integrated (cumulative sum starting inside the
   box) and a least-squares polynomial of order m is subtracted, giving the
   residual profiles X_v(i), Y_v(i).
3. Box (co)variances f2_xy(v) = mean_i X_v(i) * Y_v(i).
4. F_zz(q) = mean_v f2_zz(v)**(q/2) and
   F_xy(q) = mean_v sign(f2_xy(v)) * |f2_xy(v)|**(q/2).
5. rho_q(s) = F_xy(q) / sqrt(F_xx(q) * F_yy(q)).

The polynomial fit uses an orthonormal basis built from Legendre polynomials on
box indices mapped to [-1, 1], so residuals stay accurate at s ~ 10^4..10^5.
Every reduction runs in a fixed order on arrays whose shape depends only on
(T, s); results are bit-identical for any worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from numpy.polynomial import legendre

from rhoq.errors import (
    ConfigError,
    DegenerateVariance,
    InsufficientScales,
    LengthMismatch,
    NonPositiveFluctuation,
    ScaleExceedsLength,
    ScaleTooSmall,
    ZeroDenominator,
)

DEFAULT_Q = (1.0, 2.0, 4.0)
DEFAULT_MIN_SCALE = 12
DEFAULT_MAX_SCALE = 32_000
DEFAULT_POINTS = 24

# residual RMS below this fraction of the profile RMS counts as zero variance
_DEGENERACY_RTOL = 1e3 * np.finfo(float).eps


@dataclass(frozen=True)
class DetrendConfig:
    m: int = 2
    q_values: tuple[float, ...] = DEFAULT_Q

    def __post_init__(self):
        object.__setattr__(self, "q_values", tuple(float(q) for q in self.q_values))
        problems = []
        if not isinstance(self.m, (int, np.integer)) or self.m < 0:
            problems.append(f"detrending order m must be a non-negative integer, got {self.m!r}")
        if not self.q_values:
            problems.append("q_values must not be empty")
        bad = [q for q in self.q_values if not (q > 0 and math.isfinite(q))]
        if bad:
            problems.append(f"q values must be finite and > 0, got {bad}")
        if problems:
            raise ConfigError(problems)


@dataclass(frozen=True)
class ScaleGrid:
    scales: tuple[int, ...]
    min_scale: int
    max_scale: int
    point_count: int

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(int(s) for s in self.scales))
        if not self.scales or any(b <= a for a, b in zip(self.scales, self.scales[1:])):
            raise ConfigError("scales must be a non-empty strictly increasing sequence")

    @classmethod
    def of(cls, scales: Sequence[int]) -> "ScaleGrid":
        scales = tuple(int(s) for s in scales)
        return cls(scales, min(scales), max(scales), len(scales))

    def __len__(self) -> int:
        return len(self.scales)

    def __iter__(self):
        return iter(self.scales)

    def check(self, T: int, m: int) -> None:
        if self.scales[0] < m + 2:
            raise ScaleTooSmall(f"scale {self.scales[0]} < m + 2 = {m + 2}")
        if self.scales[-1] > T:
            raise ScaleExceedsLength(f"scale {self.scales[-1]} exceeds series length {T}")


def make_scale_grid(min_s: int, max_s: int, n_points: int, T: int, m: int = 2) -> ScaleGrid:
    """Log-uniform integer scales from ``min_s`` to ``max_s`` inclusive.

    Rounding may merge neighbouring points at the small end, so the grid can
    hold fewer than ``n_points`` scales.
    """
    problems = []
    if min_s < m + 2:
        problems.append(f"min scale {min_s} < m + 2 = {m + 2}")
    if max_s > T:
        problems.append(f"max scale {max_s} > series length {T}")
    if max_s < min_s:
        problems.append(f"max scale {max_s} < min scale {min_s}")
    if n_points < 1:
        problems.append("need at least one grid point")
    elif n_points == 1 and min_s != max_s:
        problems.append("a one-point grid needs min scale == max scale")
    if problems:
        raise ConfigError(problems)
    if n_points == 1:
        return ScaleGrid((int(min_s),), min_s, max_s, 1)
    raw = np.rint(np.geomspace(min_s, max_s, n_points)).astype(int)
    raw[0], raw[-1] = min_s, max_s
    return ScaleGrid(tuple(int(s) for s in np.unique(raw)), min_s, max_s, n_points)


def default_scale_grid(T: int, m: int = 2) -> ScaleGrid:
    """24 log-spaced scales from 12 to min(32000, T/4)."""
    top = min(DEFAULT_MAX_SCALE, T // 4)
    return make_scale_grid(DEFAULT_MIN_SCALE, top, DEFAULT_POINTS, T, m)


@dataclass(frozen=True)
class BoxLayout:
    T: int
    s: int
    n_boxes: int  # M_s; the layout holds 2 * M_s boxes
    front_starts: np.ndarray
    back_starts: np.ndarray

    @property
    def starts(self) -> np.ndarray:
        """Start offsets of all 2*M_s boxes: front boxes, then back boxes."""
        return np.concatenate((self.front_starts, self.back_starts))


def layout_boxes(T: int, s: int, m: int | None = None) -> BoxLayout:
    if s > T:
        raise ScaleExceedsLength(f"scale {s} exceeds series length {T}")
    if s < 1 or (m is not None and s < m + 2):
        raise ScaleTooSmall(f"scale {s} too small for detrending order {m}")
    M = T // s
    nu = np.arange(M, dtype=np.int64)
    return BoxLayout(T, s, M, nu * s, T - (nu + 1) * s)


@lru_cache(maxsize=256)
def _orthonormal_basis(s: int, m: int) -> np.ndarray:
    """(s, m+1) matrix with orthonormal columns spanning polynomials of order <= m."""
    t = np.linspace(-1.0, 1.0, s) if s > 1 else np.zeros(1)
    q, _ = np.linalg.qr(legendre.legvander(t, m))
    q.setflags(write=False)
    return q


def _project_out(profiles: np.ndarray, basis: np.ndarray) -> np.ndarray:
    # einsum (no BLAS) keeps the summation order fixed regardless of threading
    coef = np.einsum("bs,sk->bk", profiles, basis)
    return profiles - np.einsum("bk,sk->bs", coef, basis)


def detrend_box(x, start: int, s: int, m: int = 2) -> np.ndarray:
    """Residual profile of one box: within-box cumulative sum minus its order-m fit."""
    x = np.asarray(x, dtype=float)
    if s <= m + 1:
        raise ScaleTooSmall(f"box of length {s} cannot be detrended with order {m}")
    if start < 0 or start + s > x.size:
        raise ScaleExceedsLength(f"box [{start}, {start + s}) outside series of length {x.size}")
    profile = np.cumsum(x[start:start + s])[None, :]
    return _project_out(profile, _orthonormal_basis(s, m))[0]


def box_cov(x_res, y_res) -> float:
    x_res = np.asarray(x_res, dtype=float)
    y_res = np.asarray(y_res, dtype=float)
    if x_res.shape != y_res.shape:
        raise LengthMismatch("residual profiles differ in length")
    return float(np.mean(x_res * y_res))


def _box_residuals(x: np.ndarray, s: int, m: int, name: str) -> np.ndarray:
    """Residual profiles of all 2*M_s boxes as a (2*M_s, s) array."""
    T = x.size
    M = T // s
    front = x[: M * s].reshape(M, s)
    back = x[T - M * s:].reshape(M, s)[::-1]
    profiles = np.cumsum(np.concatenate((front, back)), axis=1)
    resid = _project_out(profiles, _orthonormal_basis(s, m))
    f2 = np.mean(resid * resid, axis=1)
    floor = _DEGENERACY_RTOL**2 * np.mean(profiles * profiles, axis=1)
    bad = np.flatnonzero(f2 <= floor)
    if bad.size:
        raise DegenerateVariance(name, s, int(bad[0]))
    return resid


def _q_moments(f2: np.ndarray, q_values: Sequence[float], signed: bool) -> np.ndarray:
    out = np.empty(len(q_values))
    mag = np.abs(f2) if signed else f2
    sign = np.sign(f2) if signed else None
    for i, q in enumerate(q_values):
        powered = mag if q == 2.0 else mag ** (q / 2.0)
        out[i] = np.mean(sign * powered if signed else powered)
    return out


@dataclass
class FluctuationSet:
    """F_xx, F_yy, F_xy for every (q, s); arrays are shaped (n_q, n_s)."""

    q_values: tuple[float, ...]
    scales: tuple[int, ...]
    F_xx: np.ndarray
    F_yy: np.ndarray
    F_xy: np.ndarray
    n_boxes: np.ndarray  # 2 * M_s per scale


def _scale_entry(x: np.ndarray, y: np.ndarray | None, s: int, cfg: DetrendConfig):
    rx = _box_residuals(x, s, cfg.m, "x")
    f2xx = np.mean(rx * rx, axis=1)
    Fxx = _q_moments(f2xx, cfg.q_values, signed=False)
    if y is None:
        return Fxx, Fxx, Fxx, rx.shape[0]
    ry = _box_residuals(y, s, cfg.m, "y")
    f2yy = np.mean(ry * ry, axis=1)
    f2xy = np.mean(rx * ry, axis=1)
    return (
        Fxx,
        _q_moments(f2yy, cfg.q_values, signed=False),
        _q_moments(f2xy, cfg.q_values, signed=True),
        rx.shape[0],
    )


def _prepare(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.ascontiguousarray(getattr(x, "returns", x), dtype=float)
    y = np.ascontiguousarray(getattr(y, "returns", y), dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise LengthMismatch(f"series lengths differ: {x.shape} vs {y.shape}")
    if x.size == 0:
        raise LengthMismatch("empty series")
    return x, y


def fluctuation(x, y, s: int, cfg: DetrendConfig = DetrendConfig()) -> FluctuationSet:
    """Fluctuation functions of every configured q at a single scale."""
    return fluctuation_set(x, y, ScaleGrid.of([s]), cfg)


def fluctuation_set(x, y, grid: ScaleGrid, cfg: DetrendConfig = DetrendConfig(), workers: int = 1) -> FluctuationSet:
    x, y = _prepare(x, y)
    grid.check(x.size, cfg.m)
    same = x is y or np.array_equal(x, y)

    def work(s):
        return _scale_entry(x, None if same else y, s, cfg)

    if workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(work, grid.scales))
    else:
        entries = [work(s) for s in grid.scales]
    stack = lambda k: np.stack([e[k] for e in entries], axis=1)  # noqa: E731
    return FluctuationSet(
        cfg.q_values, grid.scales, stack(0), stack(1), stack(2),
        np.array([e[3] for e in entries], dtype=np.int64),
    )


def _fmt_num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


@dataclass
class RhoSurface:
    """rho_q(s) on a (q, s) grid with optional shuffled-surrogate band."""

    q_values: tuple[float, ...]
    scales: tuple[int, ...]
    rho: np.ndarray  # (n_q, n_s)
    pair: str = "x~y"
    band_mean: np.ndarray | None = None
    band_sigma: np.ndarray | None = None
    m: int = 2
    meta: dict = field(default_factory=dict)

    def value(self, q: float, s: int) -> float:
        return float(self.rho[self.q_values.index(float(q)), self.scales.index(int(s))])

    def rows(self) -> list[dict]:
        out = []
        for i, q in enumerate(self.q_values):
            for j, s in enumerate(self.scales):
                out.append({
                    "pair": self.pair,
                    "q": float(q),
                    "s": int(s),
                    "rho": float(self.rho[i, j]),
                    "band_mean": None if self.band_mean is None else float(self.band_mean[i, j]),
                    "band_sigma": None if self.band_sigma is None else float(self.band_sigma[i, j]),
                })
        return out

    def to_dict(self) -> dict:
        return {
            "pair": self.pair,
            "m": self.m,
            "q_values": [float(q) for q in self.q_values],
            "scales": [int(s) for s in self.scales],
            "rows": self.rows(),
            **({"meta": self.meta} if self.meta else {}),
        }


def rho_csv(surfaces: Sequence[RhoSurface], comments: Sequence[str] = ()) -> str:
    """Long-format CSV ``pair,q,s,rho,band_sigma``; a missing band is an empty field."""
    lines = [f"# {c}" for c in comments]
    lines.append("pair,q,s,rho,band_sigma")
    for surf in surfaces:
        for row in surf.rows():
            sigma = "" if row["band_sigma"] is None else repr(row["band_sigma"])
            lines.append(f"{row['pair']},{_fmt_num(row['q'])},{row['s']},{row['rho']!r},{sigma}")
    return "\n".join(lines) + "\n"


def rho_json(surfaces: Sequence[RhoSurface], config: dict | None = None) -> str:
    doc = {"config": config or {}, "surfaces": [s.to_dict() for s in surfaces]}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def rho_from_fluctuations(fs: FluctuationSet) -> np.ndarray:
    denom = np.sqrt(fs.F_xx * fs.F_yy)
    if np.any(denom == 0):
        i, j = np.argwhere(denom == 0)[0]
        raise ZeroDenominator(f"zero fluctuation product at q={fs.q_values[i]}, s={fs.scales[j]}")
    return fs.F_xy / denom


def rho_q(x, y, grid: ScaleGrid | None = None, cfg: DetrendConfig = DetrendConfig(),
          workers: int = 1, pair: str = "x~y") -> RhoSurface:
    """rho_q(s) for every configured q and every scale of ``grid``.

    ``grid`` defaults to :func:`default_scale_grid` for the series length.
    """
    xa, ya = _prepare(x, y)
    if grid is None:
        grid = default_scale_grid(xa.size, cfg.m)
    fs = fluctuation_set(xa, ya, grid, cfg, workers=workers)
    return RhoSurface(cfg.q_values, grid.scales, rho_from_fluctuations(fs), pair=pair, m=cfg.m)


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r_squared: float
    scales: tuple[int, ...]
    fluctuations: tuple[float, ...]


def scaling_exponent(scales: Sequence[int], F: Sequence[float], q: float = 2.0) -> ScalingFit:
    """OLS slope of log F(s)**(1/q) against log s."""
    s = np.asarray(scales, dtype=float)
    F = np.asarray(F, dtype=float)
    if s.size < 3:
        raise InsufficientScales(f"need at least 3 scales, got {s.size}")
    if np.any(~(F > 0)):
        raise NonPositiveFluctuation("fluctuation function must be positive at every scale")
    lx = np.log(s)
    ly = np.log(F) / q
    dx = lx - lx.mean()
    dy = ly - ly.mean()
    slope = float(np.dot(dx, dy) / np.dot(dx, dx))
    intercept = float(ly.mean() - slope * lx.mean())
    ss_res = float(np.sum((dy - slope * dx) ** 2))
    ss_tot = float(np.dot(dy, dy))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return ScalingFit(slope, intercept, r2, tuple(int(v) for v in scales), tuple(float(v) for v in F))


def dfa_exponent(x, grid: ScaleGrid | None = None, m: int = 2, workers: int = 1) -> ScalingFit:
    """DFA exponent H from the q = 2 fluctuation function of a single series."""
    xa, _ = _prepare(x, x)
    if grid is None:
        grid = default_scale_grid(xa.size, m)
    if len(grid) < 3:
        raise InsufficientScales(f"need at least 3 scales, got {len(grid)}")
    fs = fluctuation_set(xa, xa, grid, DetrendConfig(m=m, q_values=(2.0,)), workers=workers)
    return scaling_exponent(grid.scales, fs.F_xx[0], q=2.0)


__all__ = [
    "DetrendConfig",
    "ScaleGrid",
    "BoxLayout",
    "FluctuationSet",
    "RhoSurface",
    "ScalingFit",
    "make_scale_grid",
    "default_scale_grid",
    "layout_boxes",
    "detrend_box",
    "box_cov",
    "fluctuation",
    "fluctuation_set",
    "rho_q",
    "rho_from_fluctuations",
    "rho_csv",
    "rho_json",
    "scaling_exponent",
    "dfa_exponent",
]
