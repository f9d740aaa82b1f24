"""Run configuration: a flat ``key = value`` file, overridable by command-line flags.

Example::

    inputs = BTC=data/btc.csv, NQ100=data/nq100.csv
    dt = 10
    calendar = fx
    q = 1, 2, 4
    smin = 12
    smax = 32000
    spoints = 24
    surrogates = 100
    seed = 7
    window = 5d
    step = 1d
    rolling_scales = 12, 360
    anchors = 2022-10-13T12:30:00Z
    before = 60s
    after = 300s

Lines starting with ``#`` or ``;`` are comments. Unknown keys are errors.
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field, fields
from typing import Any

from rhoq.errors import ConfigError
from rhoq.synth import KINDS
from rhoq.timeutil import parse_duration, parse_instant

# keys left out of the echo embedded in outputs: they do not affect results
NON_ECHO_KEYS = ("workers", "out")


@dataclass
class RunConfig:
    inputs: dict = field(default_factory=dict)
    dt: float = 10.0
    calendar: str = "fx"
    drop_breaks: bool = False
    m: int = 2
    q: tuple = (1.0, 2.0, 4.0)
    smin: int = 12
    smax: int = 0  # 0: min(32000, T/4)
    spoints: int = 24
    surrogates: int = 100
    k: float = 1.0
    seed: int = 0
    workers: int = 1
    window: str = "5d"
    step: str = "1d"
    rolling_scales: tuple = (12, 360)
    anchors: tuple = ()
    before: str = "60s"
    after: str = "300s"
    lags: int = 5
    out: str = "out"
    format: str = "csv"
    kind: str = "gaussian_pair"
    length: int = 131072
    rho0: float = 0.5
    phi: float = 0.0
    nu: float = 3.0
    split: float = 0.5
    amplitude: float = 1.0
    omega: float = 0.05
    alpha: float = 0.10
    beta: float = 0.85
    t0: str = "2022-01-03T00:00:00.000Z"
    ids: tuple = ()

    # -- parsing --------------------------------------------------------------

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                           inline_comment_prefixes=("#",), delimiters=("=",))
        parser.optionxform = str
        try:
            parser.read_string("[run]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from None
        return cls.from_mapping(dict(parser["run"]))

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path) as fh:
            return cls.from_text(fh.read())

    @classmethod
    def from_mapping(cls, raw: dict[str, Any]) -> "RunConfig":
        cfg = cls()
        return cfg.updated(raw)

    def updated(self, raw: dict[str, Any]) -> "RunConfig":
        """Copy with the given keys replaced; string values are parsed by field type."""
        known = {f.name: f for f in fields(self)}
        problems, values = [], {}
        for key, value in raw.items():
            if value is None:
                continue
            if key not in known:
                problems.append(f"unknown config key {key!r}")
                continue
            try:
                values[key] = _coerce(key, known[key].default if known[key].default is not dataclasses.MISSING
                                      else known[key].default_factory(), value)
            except (TypeError, ValueError) as exc:
                problems.append(f"{key}: {exc}")
        if problems:
            raise ConfigError(problems)
        return dataclasses.replace(self, **values)

    # -- validation -----------------------------------------------------------

    def problems(self, command: str) -> list[str]:
        """Every validation failure for ``command``, collected before any work starts."""
        out = []
        needs_inputs = command != "synth"
        if needs_inputs:
            min_inputs = 1 if command in ("events", "diag") else 2
            if len(self.inputs) < min_inputs:
                out.append(f"{command} needs at least {min_inputs} input series (inputs = ID=PATH, ...)")
            for name, path in self.inputs.items():
                if not os.path.isfile(path):
                    out.append(f"input {name}: file not found: {path}")
        if self.dt <= 0:
            out.append("dt must be positive")
        if self.calendar not in ("fx", "always"):
            out.append(f"calendar must be 'fx' or 'always', got {self.calendar!r}")
        if self.m < 0:
            out.append("m must be >= 0")
        if not self.q or any(not q > 0 for q in self.q):
            out.append(f"q values must all be > 0, got {list(self.q)}")
        if self.smin < self.m + 2:
            out.append(f"smin {self.smin} < m + 2")
        if self.smax and self.smax < self.smin:
            out.append(f"smax {self.smax} < smin {self.smin}")
        if self.spoints < 1:
            out.append("spoints must be >= 1")
        if self.surrogates == 1 or self.surrogates < 0:
            out.append("surrogates must be 0 (disabled) or >= 2")
        if self.k < 0:
            out.append("k must be >= 0")
        if self.workers < 1:
            out.append("workers must be >= 1")
        if self.format not in ("csv", "json"):
            out.append(f"format must be csv or json, got {self.format!r}")
        if self.lags < 1:
            out.append("lags must be >= 1")
        for key in ("window", "step", "before", "after"):
            try:
                parse_duration(getattr(self, key))
            except ValueError as exc:
                out.append(f"{key}: {exc}")
        if not out and parse_duration(self.step) > parse_duration(self.window):
            out.append("step must not exceed window")
        if any(s < self.m + 2 for s in self.rolling_scales):
            out.append(f"rolling scales must be >= m + 2, got {list(self.rolling_scales)}")
        for a in self.anchors:
            try:
                parse_instant(a)
            except ValueError:
                out.append(f"bad anchor instant {a!r}")
        if command == "events" and not self.anchors:
            out.append("events needs at least one anchor")
        if command == "synth":
            if self.kind not in KINDS:
                out.append(f"kind must be one of {KINDS}, got {self.kind!r}")
            if self.length < 1:
                out.append("length must be >= 1")
            try:
                parse_instant(self.t0)
            except ValueError:
                out.append(f"bad t0 {self.t0!r}")
        return out

    def validate(self, command: str) -> None:
        problems = self.problems(command)
        if problems:
            raise ConfigError(problems)

    # -- serialization --------------------------------------------------------

    def echo(self) -> dict:
        d = {}
        for f in fields(self):
            if f.name in NON_ECHO_KEYS:
                continue
            v = getattr(self, f.name)
            d[f.name] = dict(v) if isinstance(v, dict) else list(v) if isinstance(v, tuple) else v
        return d

    def to_text(self, include_all: bool = True) -> str:
        lines = []
        for f in fields(self):
            if not include_all and f.name in NON_ECHO_KEYS:
                continue
            lines.append(f"{f.name} = {_render(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


def _render(v) -> str:
    if isinstance(v, dict):
        return ", ".join(f"{k}={p}" for k, p in v.items())
    if isinstance(v, tuple):
        return ", ".join(_render(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return str(int(v)) if v.is_integer() else repr(v)
    return str(v)


def _split(text: str) -> list[str]:
    return [p.strip() for p in text.replace("\n", ",").split(",") if p.strip()]


def _coerce(key: str, default, value):
    if not isinstance(value, str):
        if isinstance(default, tuple):
            return tuple(value)
        if isinstance(default, dict):
            return dict(value)
        return type(default)(value)
    if isinstance(default, bool):
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {value!r}")
    if isinstance(default, dict):
        out = {}
        for item in _split(value):
            if "=" not in item:
                raise ValueError(f"expected ID=PATH, got {item!r}")
            name, path = item.split("=", 1)
            out[name.strip()] = path.strip()
        return out
    if isinstance(default, tuple):
        if key == "q":
            return tuple(float(v) for v in _split(value))
        if key == "rolling_scales":
            return tuple(int(v) for v in _split(value))
        return tuple(_split(value))
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value.strip()
