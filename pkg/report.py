"""Rebuild mission summaries from log records alone and render them for operators."""
from __future__ import annotations

import json
from pathlib import Path

from mission_policy import METHOD_VERSION
from models import AssayTiming, DutyUtilization, MissionSummary, RockSummary, TargetSummary
from rover import AXES, SUCTION, DutyBudget, LogFormatError, LogRecord, format_number, parse_log, peak_window_on_ms

MISSION_LOG_NAME = "mission.log"
SUMMARY_NAME = "summary.json"


class ReplayError(Exception):
    def __init__(self, message: str, seq: int | None = None) -> None:
        self.seq = seq
        prefix = f"seq {seq}: " if seq is not None else ""
        super().__init__(f"{prefix}{message}")


def duty_utilization(actuator_id: str, intervals: list[tuple[int, int]], budget: DutyBudget) -> DutyUtilization:
    peak = peak_window_on_ms(intervals, budget.window_ms)
    return DutyUtilization(
        actuator=actuator_id,
        total_on_ms=sum(e - s for s, e in intervals),
        peak_window_on_ms=peak,
        max_on_ms=budget.max_on_ms,
        utilization_pct=round(100.0 * peak / budget.max_on_ms, 2),
    )


def _field(record: LogRecord, key: str) -> str:
    value = record.get(key)
    if value is None:
        raise ReplayError(f"{record.event} record lacks {key}", record.seq)
    return value


def _int(record: LogRecord, key: str) -> int:
    try:
        return int(_field(record, key))
    except ValueError as exc:
        raise ReplayError(f"{record.event}.{key} is not an integer", record.seq) from exc


def _float(record: LogRecord, key: str) -> float | None:
    text = _field(record, key)
    if text == "none":
        return None
    try:
        return float(text)
    except ValueError as exc:
        raise ReplayError(f"{record.event}.{key} is not a number", record.seq) from exc


def _bool(record: LogRecord, key: str) -> bool:
    text = _field(record, key)
    if text not in ("true", "false"):
        raise ReplayError(f"{record.event}.{key} is not a boolean", record.seq)
    return text == "true"


def check_ordering(records: list[LogRecord]) -> None:
    if not records:
        raise ReplayError("log is empty")
    previous: LogRecord | None = None
    for index, record in enumerate(records):
        if record.seq != index:
            raise ReplayError(f"ordering error: expected seq {index}", record.seq)
        if previous is not None and record.t_ms < previous.t_ms:
            raise ReplayError(f"ordering error: t={record.t_ms} precedes t={previous.t_ms}", record.seq)
        previous = record
    if records[0].event != "MISSION_START":
        raise ReplayError("log does not begin with MISSION_START", records[0].seq)
    if records[-1].event != "MISSION_END":
        raise ReplayError(f"log truncated after seq {records[-1].seq}", records[-1].seq)


def replay(records: list[LogRecord], budget: DutyBudget | None = None) -> MissionSummary:
    check_ordering(records)
    budget = budget or DutyBudget()
    start = records[0]
    targets: dict[str, TargetSummary] = {}
    pending: dict[str, list[AssayTiming]] = {}
    rocks: dict[str, RockSummary] = {}
    intervals: dict[str, list[tuple[int, int]]] = {actuator: [] for actuator in (*AXES, SUCTION)}
    status = "completed"

    for record in records:
        event = record.event
        if event == "TARGET_BEGIN":
            name = _field(record, "target")
            if _field(record, "kind") == "rock":
                rocks[name] = RockSummary(target=name, rock_id=_field(record, "rock"))
            else:
                targets[name] = TargetSummary(target=name)
                pending[name] = []
        elif event == "PH":
            targets[_field(record, "target")].ph = _float(record, "ph")
        elif event == "ERROR":
            name = _field(record, "target")
            if name in targets:
                targets[name].attempts += 1
                pending[name] = []
        elif event == "ASSAY":
            pending[_field(record, "target")].append(
                AssayTiming(
                    kind=_field(record, "kind"),
                    detected=_bool(record, "detected"),
                    bin_index=_int(record, "bin"),
                    elapsed_ms=_int(record, "elapsed"),
                    completed_ms=_int(record, "completed"),
                    contaminated=_bool(record, "contaminated"),
                )
            )
        elif event == "VERDICT":
            name = _field(record, "target")
            summary = targets[name]
            summary.verdict = _field(record, "verdict")
            summary.contaminated = _bool(record, "contaminated")
            summary.partial = _bool(record, "partial")
            summary.attempts += 1
            summary.assays = pending[name]
        elif event == "SKIP":
            name = _field(record, "target")
            if _field(record, "kind") == "rock":
                rocks[name].skipped = True
            else:
                targets[name].skipped = True
                targets[name].ph = None
        elif event == "ROCK_CLASS":
            rock = rocks[_field(record, "target")]
            rock.rock_type = _field(record, "type")
            rock.fossil_prediction = _bool(record, "fossil")
            rock.classifier_id = _field(record, "classifier")
        elif event == "ACTUATOR":
            actuator = _field(record, "id")
            intervals.setdefault(actuator, []).append((_int(record, "start"), _int(record, "end")))
        elif event == "MISSION_END":
            status = _field(record, "status")

    try:
        return MissionSummary(
            site=_field(start, "site"),
            seed=_int(start, "seed"),
            status=status,
            end_t_ms=records[-1].t_ms,
            method_version=start.get("method", METHOD_VERSION),
            targets=list(targets.values()),
            rocks=list(rocks.values()),
            duty=[duty_utilization(actuator, spans, budget) for actuator, spans in intervals.items()],
        )
    except KeyError as exc:
        raise ReplayError(f"record names unknown target {exc}") from exc


def replay_text(text: str) -> MissionSummary:
    try:
        records = parse_log(text)
    except LogFormatError as exc:
        raise ReplayError(f"malformed record: {exc}") from exc
    try:
        return replay(records)
    except KeyError as exc:
        raise ReplayError(f"record names unknown target {exc}") from exc


def mission_log_path(log_dir: str | Path) -> Path:
    path = Path(log_dir) / MISSION_LOG_NAME
    if not path.is_file():
        raise ReplayError(f"no {MISSION_LOG_NAME} in {log_dir}")
    return path


def replay_dir(log_dir: str | Path) -> MissionSummary:
    return replay_text(mission_log_path(log_dir).read_text(encoding="utf-8"))


def write_summary(summary: MissionSummary, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary.model_dump(mode="json"), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _value(value: object) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_number(value)
    return str(value)


def _line(kind: str, /, **fields: object) -> str:
    return " ".join([kind, *(f"{k}={_value(v)}" for k, v in fields.items())])


def render_report(summary: MissionSummary) -> str:
    lines = [
        _line(
            "mission",
            site=summary.site,
            seed=summary.seed,
            status=summary.status,
            end_t_ms=summary.end_t_ms,
            method=summary.method_version,
        )
    ]
    for target in summary.targets:
        lines.append(
            _line(
                "target",
                name=target.target,
                verdict=target.verdict,
                skipped=target.skipped,
                attempts=target.attempts,
                contaminated=target.contaminated,
                partial=target.partial,
                ph=target.ph,
            )
        )
        for assay in target.assays:
            lines.append(
                _line(
                    "assay",
                    target=target.target,
                    kind=assay.kind,
                    detected=assay.detected,
                    bin=assay.bin_index,
                    elapsed_ms=assay.elapsed_ms,
                    completed_ms=assay.completed_ms,
                    contaminated=assay.contaminated,
                )
            )
    for rock in summary.rocks:
        lines.append(
            _line(
                "rock",
                name=rock.target,
                rock_id=rock.rock_id,
                type=rock.rock_type,
                fossil=rock.fossil_prediction,
                classifier=rock.classifier_id,
                skipped=rock.skipped,
            )
        )
    for duty in summary.duty:
        lines.append(
            _line(
                "duty",
                actuator=duty.actuator,
                total_on_ms=duty.total_on_ms,
                peak_window_on_ms=duty.peak_window_on_ms,
                max_on_ms=duty.max_on_ms,
                utilization_pct=duty.utilization_pct,
            )
        )
    return "\n".join(lines) + "\n"
