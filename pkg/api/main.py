from __future__ import annotations

import json
import os
import re
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from mission_policy import METHOD_VERSION, duty_policy_payload, step_table_payload
from models import StationStatus
from report import ReplayError, replay_dir
from rover import LogFormatError, read_log
from sensor_catalog import sensor_catalog_payload
from telemetry.station import ABORT_NAME, STATUS_NAME

DEFAULT_STORE_DIR = Path("store")
DEFAULT_LOG_DIR = Path("logs")
STORE_FILE_RE = re.compile(r"^rover-\d{4,}\.log$")

app = FastAPI(title="Astrolab Ground Station API", version=METHOD_VERSION)


class AbortRequest(BaseModel):
    reason: str = Field(default="operator", min_length=1, max_length=200)


def store_dir() -> Path:
    return Path(os.getenv("ASTROLAB_STORE_DIR", DEFAULT_STORE_DIR))


def log_dir() -> Path:
    return Path(os.getenv("ASTROLAB_LOG_DIR", DEFAULT_LOG_DIR))


def _load_json(path: Path, default: dict | list) -> dict | list:
    if not path.exists():
        return default
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except Exception:
        return default


@app.get("/v1/station/status")
def station_status() -> dict:
    payload = _load_json(store_dir() / STATUS_NAME, {})
    if not payload:
        raise HTTPException(status_code=404, detail="Ground station has not written a status file.")
    validated = StationStatus.model_validate(payload)
    return validated.model_dump(mode="json")


@app.get("/v1/store/files")
def store_files() -> dict:
    root = store_dir()
    if not root.is_dir():
        return {"items": []}
    items = [
        {"name": path.name, "bytes": path.stat().st_size}
        for path in sorted(root.iterdir())
        if STORE_FILE_RE.match(path.name)
    ]
    return {"items": items}


@app.get("/v1/store/{name}/records")
def store_records(name: str) -> dict:
    if not STORE_FILE_RE.match(name):
        raise HTTPException(status_code=404, detail="Unknown store file.")
    path = store_dir() / name
    if not path.is_file():
        raise HTTPException(status_code=404, detail="Unknown store file.")
    try:
        records = read_log(path)
    except LogFormatError as exc:
        raise HTTPException(status_code=500, detail=f"Store file is malformed: {exc}") from exc
    items = [
        {"t_ms": record.t_ms, "seq": record.seq, "event": record.event, "fields": record.as_dict()}
        for record in records
    ]
    return {"name": name, "items": items}


@app.get("/v1/missions/summary")
def missions_summary() -> dict:
    try:
        summary = replay_dir(log_dir())
    except ReplayError as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc
    return summary.model_dump(mode="json")


@app.get("/v1/sensors/catalog")
def sensors_catalog() -> dict:
    return {"items": sensor_catalog_payload()}


@app.get("/v1/methodology")
def methodology() -> dict:
    return {
        "summary": "Simulated rover science cycle: soil assays classified for life, rocks classified for fossils.",
        "method_version": METHOD_VERSION,
        "steps": step_table_payload(),
        "duty_policy": duty_policy_payload(),
        "limitations": [
            "Sensor curves and colour charts are simulator defaults, not field calibrations.",
            "A positive verdict is evidence for planning, not a confirmed biosignature.",
            "Contaminated beakers are flagged, never silently discarded.",
        ],
    }


@app.post("/v1/commands/abort", status_code=202)
def command_abort(request: AbortRequest | None = None) -> dict:
    reason = (request or AbortRequest()).reason.strip() or "operator"
    root = store_dir()
    root.mkdir(parents=True, exist_ok=True)
    (root / ABORT_NAME).write_text(reason + "\n", encoding="utf-8")
    return {"queued": True, "reason": reason}
