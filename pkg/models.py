from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

Verdict = Literal["Extant", "Extinct", "NPL"]
MissionStatus = Literal["completed", "aborted", "config_error"]


class AssayTiming(BaseModel):
    kind: Literal["carbohydrate", "protein", "ammonia"]
    detected: bool
    bin_index: int
    elapsed_ms: int
    completed_ms: int
    contaminated: bool = False


class TargetSummary(BaseModel):
    target: str
    verdict: Verdict | None = None
    contaminated: bool = False
    partial: bool = False
    skipped: bool = False
    attempts: int = 0
    ph: float | None = None
    assays: list[AssayTiming] = Field(default_factory=list)


class RockSummary(BaseModel):
    target: str
    rock_id: str
    rock_type: Literal["IgneousMetamorphic", "Shale"] | None = None
    fossil_prediction: bool | None = None
    classifier_id: str | None = None
    skipped: bool = False


class DutyUtilization(BaseModel):
    actuator: str
    total_on_ms: int
    peak_window_on_ms: int
    max_on_ms: int
    utilization_pct: float


class MissionSummary(BaseModel):
    site: str
    seed: int
    status: MissionStatus
    end_t_ms: int
    method_version: str
    targets: list[TargetSummary] = Field(default_factory=list)
    rocks: list[RockSummary] = Field(default_factory=list)
    duty: list[DutyUtilization] = Field(default_factory=list)


class ConnectionStatus(BaseModel):
    connection_id: int
    peer: str
    store_file: str
    accepted: int = 0
    rejected: int = 0
    last_ack: int | None = None
    open: bool = True


class StationStatus(BaseModel):
    listen: str
    started_at: str
    updated_at: str
    accepted_total: int = 0
    rejected_total: int = 0
    aborts_sent: int = 0
    connections: list[ConnectionStatus] = Field(default_factory=list)
