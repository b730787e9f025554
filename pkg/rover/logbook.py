"""Append-only mission log in ``t=<ms> seq=<n> ev=<IDENT> k=v ...`` line format."""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from .common import format_number

_EVENT_RE = re.compile(r"^[A-Z][A-Z0-9_]*$")
_KEY_RE = re.compile(r"^[a-z][a-z0-9_]*$")
RESERVED_KEYS = {"t", "seq", "ev"}


class LogFormatError(Exception):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


@dataclass(frozen=True)
class LogRecord:
    t_ms: int
    seq: int
    event: str
    fields: tuple[tuple[str, str], ...] = ()

    def get(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.fields:
            if k == key:
                return v
        return default

    def __getitem__(self, key: str) -> str:
        value = self.get(key)
        if value is None:
            raise KeyError(key)
        return value

    def as_dict(self) -> dict[str, str]:
        return dict(self.fields)


def format_value(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_number(value)
    if isinstance(value, (tuple, list)):
        return ",".join(format_value(v) for v in value)
    if value is None:
        return "none"
    text = str(value)
    if not text or any(ch.isspace() for ch in text):
        raise ValueError(f"log values must be non-empty without whitespace, got {text!r}")
    return text


def format_record(record: LogRecord) -> str:
    parts = [f"t={record.t_ms}", f"seq={record.seq}", f"ev={record.event}"]
    parts.extend(f"{k}={v}" for k, v in record.fields)
    return " ".join(parts)


def parse_record(line: str, lineno: int | None = None) -> LogRecord:
    tokens = line.strip().split(" ")
    if len(tokens) < 3:
        raise LogFormatError(f"record needs t, seq and ev, got {line.strip()!r}", lineno)
    pairs: list[tuple[str, str]] = []
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep or not key or not value:
            raise LogFormatError(f"malformed field {token!r}", lineno)
        pairs.append((key, value))
    if [k for k, _ in pairs[:3]] != ["t", "seq", "ev"]:
        raise LogFormatError("record must start with t=, seq=, ev=", lineno)
    try:
        t_ms = int(pairs[0][1])
        seq = int(pairs[1][1])
    except ValueError as exc:
        raise LogFormatError("t and seq must be integers", lineno) from exc
    event = pairs[2][1]
    if not _EVENT_RE.match(event):
        raise LogFormatError(f"bad event identifier {event!r}", lineno)
    return LogRecord(t_ms=t_ms, seq=seq, event=event, fields=tuple(pairs[3:]))


def parse_log(text: str) -> list[LogRecord]:
    records: list[LogRecord] = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if line.strip():
            records.append(parse_record(line, lineno))
    return records


def read_log(path: str | Path) -> list[LogRecord]:
    return parse_log(Path(path).read_text(encoding="utf-8"))


class MissionLog:
    """Records are numbered from 0 and never go back in time."""

    def __init__(self) -> None:
        self.records: list[LogRecord] = []
        self._listeners: list[Callable[[LogRecord], None]] = []

    def subscribe(self, listener: Callable[[LogRecord], None]) -> None:
        self._listeners.append(listener)

    @property
    def last_t_ms(self) -> int:
        return self.records[-1].t_ms if self.records else 0

    def append(self, t_ms: int, event: str, /, **fields: object) -> LogRecord:
        if not _EVENT_RE.match(event):
            raise ValueError(f"bad event identifier {event!r}")
        if self.records and t_ms < self.records[-1].t_ms:
            raise ValueError(f"record at t={t_ms} precedes t={self.records[-1].t_ms}")
        pairs = []
        for key, value in fields.items():
            if key in RESERVED_KEYS or not _KEY_RE.match(key):
                raise ValueError(f"bad field key {key!r}")
            pairs.append((key, format_value(value)))
        record = LogRecord(t_ms=int(t_ms), seq=len(self.records), event=event, fields=tuple(pairs))
        self.records.append(record)
        for listener in self._listeners:
            listener(record)
        return record

    def events(self, event: str) -> list[LogRecord]:
        return [r for r in self.records if r.event == event]

    def text(self) -> str:
        return "".join(format_record(r) + "\n" for r in self.records)

    def write(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.text(), encoding="utf-8")
        return path


def write_records(path: str | Path, records: Iterable[LogRecord]) -> None:
    Path(path).write_text("".join(format_record(r) + "\n" for r in records), encoding="utf-8")
