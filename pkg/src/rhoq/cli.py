"""Command-line entry point: ``rhoq {pearson,rho,rolling,events,synth,diag}``.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
from typing import Callable, Sequence

import numpy as np

from rhoq import __version__
from rhoq.config import RunConfig
from rhoq.detrended import (
    DEFAULT_MAX_SCALE,
    DetrendConfig,
    make_scale_grid,
    rho_csv,
    rho_json,
    rho_q,
)
from rhoq.errors import ConfigError, DataError, NumericalError, RhoqError
from rhoq.ingest import (
    ReturnSeries,
    SessionCalendar,
    drop_break_returns,
    event_window,
    load_returns,
)
from rhoq.rolling import RollingSpec, align, rolling_csv, rolling_json, rolling_rho
from rhoq.stats import (
    RNG_ALGORITHM,
    SurrogateSpec,
    arch_lm,
    chi2_critical,
    jarque_bera,
    pearson_matrix,
    significance_band,
)
from rhoq.synth import GeneratorSpec, as_return_series
from rhoq.timeutil import format_instant, parse_instant

logger = logging.getLogger("rhoq")

COMMANDS = ("pearson", "rho", "rolling", "events", "synth", "diag")


# -- shared plumbing ----------------------------------------------------------

def _header(command: str, cfg: RunConfig) -> list[str]:
    return [
        f"rhoq {__version__} {command}",
        "config: " + json.dumps(cfg.echo(), sort_keys=True, separators=(",", ":")),
    ]


def _write(cfg: RunConfig, name: str, text: str) -> str:
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, name)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    logger.info("wrote %s", path)
    return path


def _json_doc(command: str, cfg: RunConfig, body: dict) -> str:
    doc = {"tool": "rhoq", "version": __version__, "command": command, "config": cfg.echo(), **body}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _load_all(cfg: RunConfig) -> list[ReturnSeries]:
    cal = SessionCalendar.named(cfg.calendar)
    out = []
    for name, path in cfg.inputs.items():
        rs = load_returns(path, name, cfg.dt, cal)
        if cfg.drop_breaks:
            rs = drop_break_returns(rs)
        if abs(rs.dt - cfg.dt) > 1e-9:
            raise DataError(f"{path}: sampled at dt={rs.dt}s but config has dt={cfg.dt}s")
        out.append(rs)
    return out


def _align_all(series: Sequence[ReturnSeries]) -> list[ReturnSeries]:
    common = series[0]
    for other in series[1:]:
        common, _ = align(common, other)
    return [align(s, common)[0] for s in series]


def _grid(cfg: RunConfig, T: int):
    smax = cfg.smax or min(DEFAULT_MAX_SCALE, T // 4)
    return make_scale_grid(cfg.smin, smax, cfg.spoints, T, cfg.m)


def _surrogates(cfg: RunConfig) -> SurrogateSpec | None:
    return SurrogateSpec(cfg.surrogates, cfg.seed) if cfg.surrogates else None


# -- commands -----------------------------------------------------------------

def cmd_pearson(cfg: RunConfig) -> list[str]:
    series = _align_all(_load_all(cfg))
    pm = pearson_matrix(series, _surrogates(cfg), k=cfg.k, workers=cfg.workers)
    body = {"pearson": pm.to_dict(), "rng": RNG_ALGORITHM, "n_samples": len(series[0])}
    written = []
    if cfg.format == "csv":
        written.append(_write(cfg, "pearson.csv", pm.to_csv(_header("pearson", cfg))))
    written.append(_write(cfg, "pearson.json", _json_doc("pearson", cfg, body)))
    return written


def cmd_rho(cfg: RunConfig) -> list[str]:
    series = _load_all(cfg)
    dcfg = DetrendConfig(cfg.m, cfg.q)
    spec = _surrogates(cfg)
    surfaces = []
    for a, b in itertools.combinations(series, 2):
        x, y = align(a, b)
        grid = _grid(cfg, len(x))
        surf = rho_q(x, y, grid, dcfg, workers=cfg.workers, pair=f"{a.instrument_id}~{b.instrument_id}")
        if spec is not None:
            band = significance_band(
                x.returns, y.returns, lambda u, v: rho_q(u, v, grid, dcfg).rho, spec, workers=cfg.workers
            )
            surf.band_mean, surf.band_sigma = band.mean, band.sigma
        surf.meta = {"n_samples": len(x), "scales": list(grid.scales)}
        surfaces.append(surf)
    written = []
    if cfg.format == "csv":
        written.append(_write(cfg, "rho.csv", rho_csv(surfaces, _header("rho", cfg))))
    else:
        body = json.loads(rho_json(surfaces))
        written.append(_write(cfg, "rho.json", _json_doc("rho", cfg, {"surfaces": body["surfaces"],
                                                                        "rng": RNG_ALGORITHM})))
    return written


def cmd_rolling(cfg: RunConfig) -> list[str]:
    series = _load_all(cfg)
    spec = RollingSpec(cfg.window, cfg.step, cfg.rolling_scales, cfg.q)
    dcfg = DetrendConfig(cfg.m, cfg.q)
    results = []
    for a, b in itertools.combinations(series, 2):
        x, y = align(a, b)
        results.append(rolling_rho(x, y, spec, dcfg, workers=cfg.workers))
    if cfg.format == "csv":
        return [_write(cfg, "rolling.csv", rolling_csv(results, _header("rolling", cfg)))]
    body = json.loads(rolling_json(results))
    return [_write(cfg, "rolling.json", _json_doc("rolling", cfg, {"rolling": body["rolling"],
                                                                  "spec": spec.describe()}))]


def cmd_events(cfg: RunConfig) -> list[str]:
    series = _load_all(cfg)
    rows = []
    for anchor in cfg.anchors:
        a = parse_instant(anchor)
        for rs in series:
            trace = event_window(rs, a, cfg.before, cfg.after)
            for t, v in zip(trace.times.tolist(), trace.values.tolist()):
                rows.append((format_instant(a), rs.instrument_id, format_instant(t), (t - a) / 1000.0, v))
    if cfg.format == "csv":
        lines = [f"# {c}" for c in _header("events", cfg)]
        lines.append("anchor,instrument,timestamp,offset_s,cum_return")
        lines.extend(f"{a},{i},{t},{o!r},{v!r}" for a, i, t, o, v in rows)
        return [_write(cfg, "events.csv", "\n".join(lines) + "\n")]
    body = [{"anchor": a, "instrument": i, "timestamp": t, "offset_s": o, "cum_return": v} for a, i, t, o, v in rows]
    return [_write(cfg, "events.json", _json_doc("events", cfg, {"events": body}))]


def cmd_synth(cfg: RunConfig) -> list[str]:
    params = {
        "gaussian_pair": {"rho0": cfg.rho0},
        "two_regime_pair": {"split": cfg.split, "amplitude": cfg.amplitude},
        "ar1": {"phi": cfg.phi},
        "student_t": {"nu": cfg.nu},
        "garch_like": {"omega": cfg.omega, "alpha": cfg.alpha, "beta": cfg.beta},
    }[cfg.kind]
    gen = GeneratorSpec(cfg.kind, cfg.length, cfg.seed, params)
    arrays = gen.generate()
    ids = list(cfg.ids) or (["x", "y"] if len(arrays) == 2 else [cfg.kind])
    if len(ids) != len(arrays):
        raise ConfigError(f"{cfg.kind} emits {len(arrays)} series but {len(ids)} ids were given")
    t0 = parse_instant(cfg.t0)
    comments = _header("synth", cfg) + ["generator: " + json.dumps(gen.describe(), sort_keys=True)]
    written = []
    for name, values in zip(ids, arrays):
        path = os.path.join(cfg.out, f"{name}.csv")
        os.makedirs(cfg.out, exist_ok=True)
        as_return_series(values, name, t0, cfg.dt).to_csv(path, comments)
        written.append(path)
    return written


def cmd_diag(cfg: RunConfig) -> list[str]:
    series = _load_all(cfg)
    jb_crit = chi2_critical(2)
    arch_crit = chi2_critical(cfg.lags)
    rows = []
    for rs in series:
        jb = jarque_bera(rs.returns)
        lm = arch_lm(rs.returns, cfg.lags)
        rows.append({
            "instrument": rs.instrument_id,
            "n": len(rs),
            "jb": jb.statistic,
            "skewness": jb.skewness,
            "kurtosis": jb.kurtosis,
            "jb_critical_1pct": jb_crit,
            "jb_reject": jb.statistic > jb_crit,
            "arch_lm": lm.statistic,
            "arch_r2": lm.r_squared,
            "arch_lags": lm.lags,
            "arch_critical_1pct": arch_crit,
            "arch_reject": lm.statistic > arch_crit,
        })
    if cfg.format == "csv":
        cols = list(rows[0])
        lines = [f"# {c}" for c in _header("diag", cfg)]
        lines.append(",".join(cols))
        for r in rows:
            lines.append(",".join(
                str(int(v)) if isinstance(v, (bool, np.bool_)) else repr(v) if isinstance(v, float) else str(v)
                for v in r.values()
            ))
        return [_write(cfg, "diag.csv", "\n".join(lines) + "\n")]
    return [_write(cfg, "diag.json", _json_doc("diag", cfg, {"diagnostics": rows}))]


HANDLERS: dict[str, Callable[[RunConfig], list[str]]] = {
    "pearson": cmd_pearson,
    "rho": cmd_rho,
    "rolling": cmd_rolling,
    "events": cmd_events,
    "synth": cmd_synth,
    "diag": cmd_diag,
}


# -- argument parsing ---------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="flat key = value config file")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--input", action="append", metavar="ID=PATH", help="input series (repeatable)")
    p.add_argument("--dt", help="sampling interval in seconds")
    p.add_argument("--calendar", choices=("fx", "always"))
    p.add_argument("--drop-breaks", action="store_const", const="true", dest="drop_breaks")
    p.add_argument("--m", help="detrending polynomial order")
    p.add_argument("--q", help="comma-separated q values, e.g. 1,2,4")
    p.add_argument("--smin")
    p.add_argument("--smax")
    p.add_argument("--spoints")
    p.add_argument("--surrogates", help="shuffled realizations for significance bands (0 disables)")
    p.add_argument("--k", help="band multiplier for the significance flag")
    p.add_argument("--window", help="rolling window, e.g. 5d")
    p.add_argument("--step", help="rolling step, e.g. 1d")
    p.add_argument("--rolling-scales", dest="rolling_scales", help="e.g. 12,360")
    p.add_argument("--anchor", action="append", help="event anchor instant (repeatable)")
    p.add_argument("--before")
    p.add_argument("--after")
    p.add_argument("--lags", help="ARCH LM lag count")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rhoq", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rhoq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "pearson": "Pearson correlation matrix with shuffled-surrogate bands",
        "rho": "rho_q(s) surface for every input pair",
        "rolling": "rho_q(s) in sliding calendar windows",
        "events": "cumulative returns around event anchors",
        "synth": "write synthetic return series",
        "diag": "Jarque-Bera and ARCH LM diagnostics",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        _common(p)
        if name == "synth":
            p.add_argument("--kind")
            p.add_argument("--length")
            for key in ("rho0", "phi", "nu", "split", "amplitude", "omega", "alpha", "beta"):
                p.add_argument(f"--{key}")
            p.add_argument("--t0")
            p.add_argument("--ids", help="comma-separated output ids")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("config", "command", "verbose", "input", "anchor") and v is not None}
    if args.input:
        overrides["inputs"] = ", ".join(args.input)
    if args.anchor:
        overrides["anchors"] = ", ".join(args.anchor)
    return cfg.updated({k: v if isinstance(v, str) else str(v) for k, v in overrides.items()})


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        cfg.validate(args.command)
        written = HANDLERS[args.command](cfg)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"rhoq: config error: {problem}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as exc:
        print(f"rhoq: data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"rhoq: numerical error: {exc}", file=sys.stderr)
        return 4
    except RhoqError as exc:
        print(f"rhoq: error: {exc}", file=sys.stderr)
        return exc.exit_code
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
