"""Seeded generators with known correlation structure.

Every generator draws from ``make_rng(seed)`` (PCG64 via SeedSequence), so a
given (algorithm, seed, parameters) triple reproduces bit-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from rhoq.errors import ConfigError
from rhoq.ingest import ReturnSeries
from rhoq.stats import RNG_ALGORITHM, make_rng

KINDS = ("gaussian_pair", "student_t", "ar1", "garch_like", "two_regime_pair")


def _check_length(T: int) -> None:
    if T < 1:
        raise ConfigError(f"length must be >= 1, got {T}")


def gaussian_pair(rho0: float, T: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """i.i.d. standard bivariate normal pairs with correlation ``rho0``."""
    if not abs(rho0) <= 1:
        raise ConfigError(f"|rho0| must be <= 1, got {rho0}")
    _check_length(T)
    z = make_rng(seed).standard_normal((2, T))
    x = z[0]
    y = rho0 * x + math.sqrt(1.0 - rho0 * rho0) * z[1]
    return x, y


def ar1(phi: float, T: int, seed: int) -> np.ndarray:
    """Stationary AR(1) with unit innovations, started from its stationary law."""
    if not abs(phi) < 1:
        raise ConfigError(f"|phi| must be < 1, got {phi}")
    _check_length(T)
    e = make_rng(seed).standard_normal(T)
    e[0] /= math.sqrt(1.0 - phi * phi)
    if phi == 0:
        return e
    return lfilter([1.0], [1.0, -phi], e)


def student_t(nu: float, T: int, seed: int) -> np.ndarray:
    if not nu > 2:
        raise ConfigError(f"degrees of freedom must be > 2, got {nu}")
    _check_length(T)
    return make_rng(seed).standard_t(nu, T)


def garch_like(T: int, seed: int, omega: float = 0.05, alpha: float = 0.10, beta: float = 0.85) -> np.ndarray:
    """GARCH(1,1) returns: h_t = omega + alpha*x_{t-1}^2 + beta*h_{t-1}, x_t = sqrt(h_t) z_t."""
    if omega <= 0 or alpha < 0 or beta < 0 or alpha + beta >= 1:
        raise ConfigError("garch_like needs omega > 0, alpha, beta >= 0 and alpha + beta < 1")
    _check_length(T)
    z = make_rng(seed).standard_normal(T).tolist()
    out = [0.0] * T
    h = omega / (1.0 - alpha - beta)
    prev = 0.0
    for t in range(T):
        if t:
            h = omega + alpha * prev * prev + beta * h
        prev = math.sqrt(h) * z[t]
        out[t] = prev
    return np.array(out)


def two_regime_pair(T: int, split: float | int = 0.5, seed: int = 0,
                    amplitude: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Independent Gaussians before ``split``, identical values from ``split`` on.

    ``split`` is an index (int) or a fraction of T (float). The comonotone
    regime is scaled by ``amplitude``; an amplitude above 1 makes the large
    fluctuations correlated and the small ones independent.
    """
    _check_length(T)
    k = int(split) if isinstance(split, (int, np.integer)) else int(round(float(split) * T))
    if not 0 <= k <= T:
        raise ConfigError(f"split must fall inside [0, {T}], got {split}")
    if not amplitude > 0:
        raise ConfigError("amplitude must be positive")
    z = make_rng(seed).standard_normal((2, T))
    x, y = z[0].copy(), z[1].copy()
    x[k:] *= amplitude
    y[k:] = x[k:]
    return x, y


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    T: int
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown generator kind {self.kind!r}; expected one of {KINDS}")
        _check_length(self.T)

    def generate(self) -> tuple[np.ndarray, ...]:
        p = self.params
        if self.kind == "gaussian_pair":
            return gaussian_pair(p.get("rho0", 0.0), self.T, self.seed)
        if self.kind == "two_regime_pair":
            return two_regime_pair(self.T, p.get("split", 0.5), self.seed, p.get("amplitude", 1.0))
        if self.kind == "ar1":
            return (ar1(p.get("phi", 0.0), self.T, self.seed),)
        if self.kind == "student_t":
            return (student_t(p.get("nu", 3.0), self.T, self.seed),)
        return (garch_like(self.T, self.seed, **{k: p[k] for k in ("omega", "alpha", "beta") if k in p}),)

    def describe(self) -> dict:
        return {"kind": self.kind, "T": self.T, "seed": self.seed, "params": dict(self.params),
                "algorithm": RNG_ALGORITHM}


def as_return_series(values: np.ndarray, instrument_id: str, t0: int = 0, dt: float = 10.0) -> ReturnSeries:
    """Wrap generated values as a gap-free return series."""
    return ReturnSeries(instrument_id, t0, dt, np.asarray(values, dtype=float))


__all__ = [
    "KINDS",
    "GeneratorSpec",
    "gaussian_pair",
    "ar1",
    "student_t",
    "garch_like",
    "two_regime_pair",
    "as_return_series",
]
