"""UTC instants as integer epoch milliseconds, and duration strings."""

from __future__ import annotations

import re
from datetime import datetime, timezone

MS_PER_SECOND = 1000
MS_PER_DAY = 86_400_000

_DURATION_UNITS = {
    "ms": 1,
    "s": MS_PER_SECOND,
    "m": 60 * MS_PER_SECOND,
    "min": 60 * MS_PER_SECOND,
    "h": 3_600 * MS_PER_SECOND,
    "d": MS_PER_DAY,
    "w": 7 * MS_PER_DAY,
}
_DURATION_RE = re.compile(r"^\s*(\d+(?:\.\d*)?)\s*(ms|s|min|m|h|d|w)?\s*$")


def parse_instant(text: str | int) -> int:
    """Parse ISO-8601 (naive means UTC) or integer epoch milliseconds."""
    if isinstance(text, (int,)):
        return int(text)
    text = text.strip()
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    delta = dt - datetime(1970, 1, 1, tzinfo=timezone.utc)
    return (delta.days * 86_400 + delta.seconds) * 1000 + delta.microseconds // 1000


def format_instant(ms: int) -> str:
    ms = int(ms)
    dt = datetime.fromtimestamp(ms // 1000, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S") + f".{ms % 1000:03d}Z"


def parse_duration(text: str | float | int) -> int:
    """Duration to milliseconds. Bare numbers are seconds: ``"5d"``, ``"60s"``, ``10``."""
    if isinstance(text, (int, float)):
        return int(round(float(text) * MS_PER_SECOND))
    m = _DURATION_RE.match(text)
    if m is None:
        raise ValueError(f"unparseable duration {text!r}")
    value, unit = m.groups()
    return int(round(float(value) * _DURATION_UNITS[unit or "s"]))


def format_duration(ms: int) -> str:
    for unit in ("w", "d", "h", "m", "s"):
        size = _DURATION_UNITS[unit]
        if ms % size == 0 and ms >= size:
            return f"{ms // size}{unit}"
    return f"{ms}ms"
