from __future__ import annotations

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from mission_policy import DUTY_POLICY
from report import MISSION_LOG_NAME
from rover import LogFormatError, LogRecord, read_log


def _on_time(intervals: list[tuple[int, int]], start: int, end: int) -> int:
    return sum(max(0, min(b, end) - max(a, start)) for a, b in intervals)


def duty_violations(records: list[LogRecord], window_ms: int, max_on_ms: int) -> list[str]:
    intervals: dict[str, list[tuple[int, int]]] = {}
    errors: list[str] = []
    for record in records:
        if record.event != "ACTUATOR":
            continue
        try:
            actuator, start, end = record["id"], int(record["start"]), int(record["end"])
        except (KeyError, ValueError):
            errors.append(f"seq {record.seq}: malformed ACTUATOR record")
            continue
        if end <= start:
            errors.append(f"seq {record.seq}: empty on-interval for {actuator}")
            continue
        intervals.setdefault(actuator, []).append((start, end))

    for actuator, spans in sorted(intervals.items()):
        spans.sort()
        for (_, prev_end), (start, _) in zip(spans, spans[1:]):
            if start < prev_end:
                errors.append(f"{actuator}: overlapping on-intervals at t={start}")
        # The on-time of any window peaks when the window opens at an interval
        # start or closes at an interval end.
        candidates = {a for a, _ in spans} | {b - window_ms for _, b in spans}
        for window_start in sorted(candidates):
            used = _on_time(spans, window_start, window_start + window_ms)
            if used > max_on_ms:
                errors.append(
                    f"{actuator}: {used} ms on within [{window_start}, {window_start + window_ms}) "
                    f"exceeds {max_on_ms} ms"
                )
                break
    return errors


def ordering_violations(records: list[LogRecord]) -> list[str]:
    errors: list[str] = []
    last_t = None
    for index, record in enumerate(records):
        if record.seq != index:
            errors.append(f"record {index}: seq={record.seq}, expected {index}")
        if last_t is not None and record.t_ms < last_t:
            errors.append(f"seq {record.seq}: clock went back from {last_t} to {record.t_ms}")
        last_t = record.t_ms
    return errors


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Audit a mission log for clock order and actuator duty limits.")
    parser.add_argument("--log", required=True, help="Mission log file, or a directory holding mission.log.")
    parser.add_argument("--window-ms", type=int, default=DUTY_POLICY["window_ms"], help="Rolling window length.")
    parser.add_argument("--max-on-ms", type=int, default=DUTY_POLICY["max_on_ms"], help="Allowed on-time per window.")
    args = parser.parse_args(argv)

    path = Path(args.log)
    if path.is_dir():
        path = path / MISSION_LOG_NAME
    if not path.is_file():
        print(f"Log check failed: {path} not found.")
        return 1
    try:
        records = read_log(path)
    except LogFormatError as exc:
        print(f"Log check failed: {exc}")
        return 1

    errors = ordering_violations(records) + duty_violations(records, args.window_ms, args.max_on_ms)
    actuators = sorted({r.get("id") for r in records if r.event == "ACTUATOR"})
    print(f"Records: {len(records)}")
    print(f"Actuators: {', '.join(a for a in actuators if a) or 'none'}")
    if errors:
        print("Log check failures:")
        for err in errors:
            print(f"- {err}")
        return 1
    print("Log check passed.")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
