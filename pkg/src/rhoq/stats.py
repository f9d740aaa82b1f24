"""Pearson baseline, shuffled-surrogate significance bands, and JB / ARCH-LM diagnostics."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats as _sps

from rhoq.errors import ConfigError, ConstantInput, DataError, LengthMismatch, SingularRegressors

logger = logging.getLogger(__name__)

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"
_SEED_MASK = (1 << 64) - 1

STRENGTH_LABELS = ("insignificant", "small", "medium", "large")


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"pearson needs equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise DataError("pearson needs at least 2 observations")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = np.dot(xc, xc)
    syy = np.dot(yc, yc)
    if sxx == 0 or syy == 0:
        raise ConstantInput("pearson correlation undefined for a constant series")
    c = float(np.dot(xc, yc) / np.sqrt(sxx * syy))
    return min(1.0, max(-1.0, c))


def classify_strength(c: float) -> str:
    """Label |c|: <0.1 insignificant, [0.1,0.3) small, [0.3,0.5) medium, [0.5,1] large."""
    a = abs(c)
    if not a <= 1.0:
        raise ValueError(f"correlation coefficient out of range: {c}")
    if a < 0.1:
        return "insignificant"
    if a < 0.3:
        return "small"
    if a < 0.5:
        return "medium"
    return "large"


def make_rng(seed: int, stream: int | None = None) -> np.random.Generator:
    """PCG64 generator. ``stream`` gives an independent child for realization ``stream``."""
    entropy = [int(seed) & _SEED_MASK] if stream is None else [int(seed) & _SEED_MASK, int(stream)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def shuffle(x, seed: int | np.random.Generator) -> np.ndarray:
    """Uniform random permutation (Fisher-Yates) of ``x``; the input is not modified."""
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    return rng.permutation(np.asarray(x))


@dataclass(frozen=True)
class SurrogateSpec:
    n_realizations: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n_realizations < 2:
            raise ConfigError(f"need at least 2 surrogate realizations, got {self.n_realizations}")


@dataclass
class Band:
    """Mean and standard deviation of a statistic over shuffled surrogates."""

    mean: np.ndarray | float
    sigma: np.ndarray | float
    n_realizations: int
    seed: int
    algorithm: str = RNG_ALGORITHM

    def is_significant(self, observed, k: float = 1.0):
        """|observed| > |mean| + k * sigma, elementwise."""
        out = np.abs(observed) > np.abs(self.mean) + k * np.asarray(self.sigma)
        return bool(out) if np.ndim(out) == 0 else out

    def contains(self, observed, k: float = 1.0):
        out = ~np.asarray(self.is_significant(observed, k))
        return bool(out) if np.ndim(out) == 0 else out


def significance_band(
    x,
    y,
    statistic: Callable[[np.ndarray, np.ndarray], float | np.ndarray],
    spec: SurrogateSpec = SurrogateSpec(),
    shuffle_both: bool = True,
    workers: int = 1,
) -> Band:
    """Evaluate ``statistic`` on ``spec.n_realizations`` shuffled copies of (x, y).

    Realization ``i`` draws from its own generator seeded by ``(spec.seed, i)``;
    x is permuted first, then y (unless ``shuffle_both`` is False). Results are
    aggregated in realization order, so ``workers`` does not affect the output.
    """
    x = np.asarray(getattr(x, "returns", x), dtype=float)
    y = np.asarray(getattr(y, "returns", y), dtype=float)

    def one(i: int):
        rng = make_rng(spec.seed, i)
        xs = rng.permutation(x)
        ys = rng.permutation(y) if shuffle_both else y
        return np.asarray(statistic(xs, ys), dtype=float)

    idx = range(spec.n_realizations)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(one, idx))
    else:
        values = [one(i) for i in idx]
    arr = np.stack(values)
    mean = arr.mean(axis=0)
    sigma = arr.std(axis=0, ddof=1)
    if mean.ndim == 0:
        mean, sigma = float(mean), float(sigma)
    return Band(mean, sigma, spec.n_realizations, spec.seed)


@dataclass
class PearsonMatrix:
    ids: tuple[str, ...]
    C: np.ndarray
    sigma_shuffle: np.ndarray | None = None
    mean_shuffle: np.ndarray | None = None
    significant: np.ndarray | None = None
    k: float = 1.0

    def to_csv(self, comments: Sequence[str] = ()) -> str:
        lines = [f"# {c}" for c in comments]
        lines.append(",".join(("", *self.ids)))
        for name, row in zip(self.ids, self.C):
            lines.append(",".join((name, *(repr(float(v)) for v in row))))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        pairs = []
        n = len(self.ids)
        for i in range(n):
            for j in range(i + 1, n):
                c = float(self.C[i, j])
                entry = {"a": self.ids[i], "b": self.ids[j], "C": c, "strength": classify_strength(c)}
                if self.sigma_shuffle is not None:
                    entry["band_mean"] = float(self.mean_shuffle[i, j])
                    entry["band_sigma"] = float(self.sigma_shuffle[i, j])
                    entry["significant"] = bool(self.significant[i, j])
                pairs.append(entry)
        return {"ids": list(self.ids), "C": self.C.tolist(), "k": self.k, "pairs": pairs}

    def to_json(self, config: dict | None = None) -> str:
        doc = {"config": config or {}, "pearson": self.to_dict()}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def pearson_matrix(
    series: Mapping[str, np.ndarray] | Sequence,
    surrogates: SurrogateSpec | None = None,
    k: float = 1.0,
    workers: int = 1,
) -> PearsonMatrix:
    """All pairwise Pearson coefficients; shuffled-surrogate bands when ``surrogates`` is given."""
    if isinstance(series, Mapping):
        ids = tuple(series)
        arrays = [np.asarray(getattr(v, "returns", v), dtype=float) for v in series.values()]
    else:
        ids = tuple(getattr(s, "instrument_id", f"s{i}") for i, s in enumerate(series))
        arrays = [np.asarray(getattr(s, "returns", s), dtype=float) for s in series]
    if len(arrays) < 2:
        raise DataError("a Pearson matrix needs at least 2 series")
    lengths = {a.size for a in arrays}
    if len(lengths) != 1:
        raise LengthMismatch(f"series lengths differ: {sorted(lengths)}")
    n = len(arrays)
    C = np.eye(n)
    sig = mu = flag = None
    if surrogates is not None:
        sig, mu = np.zeros((n, n)), np.zeros((n, n))
        flag = np.ones((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            C[i, j] = C[j, i] = pearson(arrays[i], arrays[j])
            if surrogates is not None:
                band = significance_band(arrays[i], arrays[j], pearson, surrogates, workers=workers)
                mu[i, j] = mu[j, i] = band.mean
                sig[i, j] = sig[j, i] = band.sigma
                flag[i, j] = flag[j, i] = band.is_significant(C[i, j], k)
    return PearsonMatrix(ids, C, sig, mu, flag, k)


def chi2_critical(df: int, alpha: float = 0.01) -> float:
    return float(_sps.chi2.ppf(1.0 - alpha, df))


@dataclass(frozen=True)
class JarqueBera:
    statistic: float
    skewness: float
    kurtosis: float
    n: int

    def rejects(self, alpha: float = 0.01) -> bool:
        return self.statistic > chi2_critical(2, alpha)


def jarque_bera(x) -> JarqueBera:
    """JB = n/6 * (S^2 + (K - 3)^2 / 4) with biased sample skewness S and kurtosis K."""
    x = np.asarray(getattr(x, "returns", x), dtype=float)
    n = x.size
    if n < 4:
        raise DataError(f"Jarque-Bera needs at least 4 observations, got {n}")
    d = x - x.mean()
    m2 = np.mean(d**2)
    if m2 == 0:
        raise ConstantInput("Jarque-Bera undefined for a constant series")
    S = float(np.mean(d**3) / m2**1.5)
    K = float(np.mean(d**4) / m2**2)
    return JarqueBera(n / 6.0 * (S * S + (K - 3.0) ** 2 / 4.0), S, K, n)


@dataclass(frozen=True)
class ArchLM:
    statistic: float
    r_squared: float
    lags: int
    n: int

    def rejects(self, alpha: float = 0.01) -> bool:
        return self.statistic > chi2_critical(self.lags, alpha)


def arch_lm(x, lags: int = 5) -> ArchLM:
    """Engle's ARCH LM test: regress x_t^2 on a constant and p lags, LM = (n - p) R^2."""
    x = np.asarray(getattr(x, "returns", x), dtype=float)
    n = x.size
    if lags < 1:
        raise ValueError("lags must be >= 1")
    if n <= lags + 2:
        raise DataError(f"ARCH LM with {lags} lags needs more than {lags + 2} observations")
    e2 = x * x
    target = e2[lags:]
    design = np.empty((n - lags, lags + 1))
    design[:, 0] = 1.0
    for k in range(1, lags + 1):
        design[:, k] = e2[lags - k:n - k]
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < lags + 1:
        raise SingularRegressors("ARCH LM regressor matrix is singular (constant squared series?)")
    resid = target - design @ coef
    tc = target - target.mean()
    sst = float(np.dot(tc, tc))
    if sst == 0:
        raise SingularRegressors("squared series is constant")
    r2 = 1.0 - float(np.dot(resid, resid)) / sst
    return ArchLM((n - lags) * r2, r2, lags, n)


__all__ = [
    "RNG_ALGORITHM",
    "Band",
    "SurrogateSpec",
    "PearsonMatrix",
    "JarqueBera",
    "ArchLM",
    "pearson",
    "classify_strength",
    "make_rng",
    "shuffle",
    "significance_band",
    "pearson_matrix",
    "chi2_critical",
    "jarque_bera",
    "arch_lm",
]
