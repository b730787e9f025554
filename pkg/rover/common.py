"""Shared plumbing for the sectioned ``key = value`` text formats.

Site specs, sensor calibrations, assay parameters and mission plans all use
one grammar: ``#`` starts a comment, ``[kind NAME]`` or ``[kind]`` opens a
section, and ``key = value`` lines fill it.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

_HEADER_RE = re.compile(r"^\[\s*([A-Za-z0-9_.-]+)(?:\s+([A-Za-z0-9_.-]+))?\s*\]$")
_KEY_RE = re.compile(r"^[A-Za-z0-9_]+$")


class SpecError(Exception):
    pass


class SpecSyntaxError(SpecError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class SpecValueError(SpecError):
    def __init__(self, key: str, message: str, line: int | None = None) -> None:
        self.key = key
        self.message = message
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{key}: {message}")


@dataclass
class Entry:
    key: str
    value: str
    line: int


@dataclass
class Section:
    kind: str
    name: str | None
    line: int
    entries: list[Entry] = field(default_factory=list)

    def values(self, key: str) -> list[Entry]:
        return [e for e in self.entries if e.key == key]

    def last(self, key: str) -> Entry | None:
        found = self.values(key)
        return found[-1] if found else None

    def duplicates(self) -> list[Entry]:
        """Entries shadowed by a later entry with the same key."""
        seen: dict[str, Entry] = {}
        shadowed: list[Entry] = []
        for entry in self.entries:
            if entry.key in seen:
                shadowed.append(seen[entry.key])
            seen[entry.key] = entry
        return shadowed


def parse_sections(text: str) -> list[Section]:
    sections: list[Section] = []
    current: Section | None = None
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            match = _HEADER_RE.match(line)
            if match is None:
                raise SpecSyntaxError(f"malformed section header {line!r}", lineno)
            current = Section(kind=match.group(1).lower(), name=match.group(2), line=lineno)
            sections.append(current)
            continue
        if "=" not in line:
            raise SpecSyntaxError(f"expected 'key = value', got {line!r}", lineno)
        if current is None:
            raise SpecSyntaxError("key outside of any section", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not _KEY_RE.match(key):
            raise SpecSyntaxError(f"invalid key {key!r}", lineno)
        if not value:
            raise SpecSyntaxError(f"missing value for {key!r}", lineno)
        current.entries.append(Entry(key=key, value=value, line=lineno))
    return sections


def read_text(path: str | Path) -> str:
    return Path(path).read_text(encoding="utf-8")


def parse_floats(entry: Entry, count: int) -> list[float]:
    parts = entry.value.split()
    if len(parts) != count:
        raise SpecValueError(entry.key, f"expected {count} numbers, got {len(parts)}", entry.line)
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise SpecValueError(entry.key, f"not a number: {entry.value!r}", entry.line) from exc
    if not all(math.isfinite(v) for v in values):
        raise SpecValueError(entry.key, "values must be finite", entry.line)
    return values


def parse_float(entry: Entry) -> float:
    return parse_floats(entry, 1)[0]


def parse_int(entry: Entry) -> int:
    try:
        return int(entry.value)
    except ValueError as exc:
        raise SpecValueError(entry.key, f"not an integer: {entry.value!r}", entry.line) from exc


def parse_bool(entry: Entry) -> bool:
    lowered = entry.value.lower()
    if lowered == "true":
        return True
    if lowered == "false":
        return False
    raise SpecValueError(entry.key, f"expected true|false, got {entry.value!r}", entry.line)


def require_range(
    entry_or_key: Entry | str,
    value: float,
    lo: float | None,
    hi: float | None,
    line: int | None = None,
) -> float:
    if isinstance(entry_or_key, Entry):
        key, line = entry_or_key.key, entry_or_key.line
    else:
        key = entry_or_key
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        lo_text = "-inf" if lo is None else f"{lo:g}"
        hi_text = "inf" if hi is None else f"{hi:g}"
        raise SpecValueError(key, f"{value:g} outside [{lo_text}, {hi_text}]", line)
    return value


def round_half_away(value: float) -> int:
    """Round to the nearest integer, halves away from zero."""
    if value >= 0:
        return int(math.floor(value + 0.5))
    return -int(math.floor(-value + 0.5))


def clamp(value: float, lo: float, hi: float) -> float:
    return max(lo, min(hi, value))


def format_number(value: float) -> str:
    """Fixed notation used in mission logs and spec serialization."""
    text = f"{value:.4f}"
    return "0.0000" if text == "-0.0000" else text


def parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise ValueError(f"endpoint must be HOST:PORT, got {text!r}")
    try:
        port_number = int(port)
    except ValueError as exc:
        raise ValueError(f"invalid port in {text!r}") from exc
    if not 0 <= port_number <= 65535:
        raise ValueError(f"port out of range in {text!r}")
    return host, port_number
