"""Mission sequencer: plan parsing, the eighteen-step table and the deterministic run loop.

Everything runs on a virtual clock. Given the same plan, site, calibration,
parameters and seed, ``run_mission`` emits a byte-identical mission log.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from mission_policy import METHOD_VERSION, ROVER_DEFAULTS, STEP_TABLE
from models import AssayTiming, MissionSummary, RockSummary, TargetSummary
from report import duty_utilization
from rover import (
    AssayConfig,
    AssayError,
    AssayKind,
    AssayResult,
    BaselineConfig,
    DutyBudget,
    LogRecord,
    MechanismConfig,
    MechanismError,
    MissionLog,
    Point,
    SamplingMechanism,
    SensorCalibration,
    SensorError,
    SensorPoller,
    SiteError,
    SiteModel,
    SoilSample,
    SpecError,
    SpecSyntaxError,
    SpecValueError,
    VirtualClock,
    WaitUntil,
    capture_image,
    classify_life,
    classify_rock,
    distance,
    is_registered,
    load_assay_sections,
    load_baseline_section,
    merge_samples,
    parse_endpoint,
    parse_float,
    parse_int,
    parse_sections,
    peak_window_on_ms,
    read_ph,
    read_text,
    rock_at,
    run_assay,
)

logger = logging.getLogger(__name__)

PLAN_MISSION_KEYS = {"site", "seed", "classifier", "telemetry"}
PLAN_TARGET_KEYS = {"position", "depths", "assays", "mass_g"}
PLAN_ROCK_KEYS = {"id"}
PARAM_SECTIONS = {"benedict", "ninhydrin", "nessler", "baseline", "mechanism", "rover"}
MAX_SEED = 2**64 - 1

# Recoverable sub-operation failures; anything else is a defect and propagates.
TARGET_ERRORS = (MechanismError, AssayError, SensorError, SiteError)


class MissionConfigError(Exception):
    def __init__(self, message: str, log: MissionLog | None = None) -> None:
        self.log = log
        super().__init__(message)


class IllegalTransition(Exception):
    def __init__(self, step_index: int, event: str) -> None:
        self.step_index = step_index
        self.event = event
        super().__init__(f"event {event!r} is not legal at step {step_index}")


class MissionAborted(Exception):
    def __init__(self, reason: str) -> None:
        self.reason = reason
        super().__init__(f"mission aborted: {reason}")


# Plan ------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleTarget:
    name: str
    position: Point
    depths_cm: tuple[float, ...]
    assays: tuple[AssayKind, ...] = tuple(AssayKind)
    mass_g: float | None = None


@dataclass(frozen=True)
class PlanWarning:
    """A key given more than once; the last occurrence wins."""

    section: str
    name: str | None
    key: str
    line: int
    superseded_by: int

    def __str__(self) -> str:
        where = f"[{self.section} {self.name}]" if self.name else f"[{self.section}]"
        return f"line {self.line}: {where} {self.key} overridden by line {self.superseded_by}"


@dataclass(frozen=True)
class RockTarget:
    name: str
    rock_id: str


@dataclass(frozen=True)
class MissionPlan:
    site: str | None
    seed: int
    targets: tuple[SampleTarget, ...]
    rock_targets: tuple[RockTarget, ...] = ()
    classifier_id: str = "baseline"
    telemetry: tuple[str, int] | None = None
    warnings: tuple[PlanWarning, ...] = field(default=(), compare=False)
    base_dir: Path | None = field(default=None, compare=False)

    def site_path(self) -> Path | None:
        if self.site is None:
            return None
        path = Path(self.site)
        if not path.is_absolute() and self.base_dir is not None:
            path = self.base_dir / path
        return path


def _last(section, key: str, warnings: list[PlanWarning], required: bool = True):
    found = section.values(key)
    for shadowed in found[:-1]:
        warnings.append(PlanWarning(section.kind, section.name, key, shadowed.line, found[-1].line))
    if not found:
        if required:
            raise SpecValueError(key, f"missing in [{section.kind}] section", section.line)
        return None
    return found[-1]


def _check_plan_keys(section, allowed: set[str]) -> None:
    for entry in section.entries:
        if entry.key not in allowed:
            raise SpecValueError(entry.key, f"unknown key in [{section.kind}]", entry.line)


def _parse_assays(entry) -> tuple[AssayKind, ...]:
    names = [name.strip() for name in entry.value.split(",")]
    kinds: list[AssayKind] = []
    for name in names:
        try:
            kind = AssayKind(name)
        except ValueError as exc:
            raise SpecValueError(entry.key, f"unknown assay {name!r}", entry.line) from exc
        if kind in kinds:
            raise SpecValueError(entry.key, f"assay {name!r} listed twice", entry.line)
        kinds.append(kind)
    return tuple(kinds)


def _parse_target(section, warnings: list[PlanWarning]) -> SampleTarget:
    _check_plan_keys(section, PLAN_TARGET_KEYS)
    position_entry = _last(section, "position", warnings)
    parts = position_entry.value.split()
    if len(parts) != 2:
        raise SpecValueError("position", "expected 2 numbers", position_entry.line)
    x, y = (parse_float(replace(position_entry, value=p)) for p in parts)

    depths_entry = _last(section, "depths", warnings)
    depths = tuple(parse_float(replace(depths_entry, value=p)) for p in depths_entry.value.split())
    if not depths:
        raise SpecValueError("depths", "at least one depth is required", depths_entry.line)
    if any(d <= 0 for d in depths):
        raise SpecValueError("depths", "depths must be positive", depths_entry.line)

    assays_entry = _last(section, "assays", warnings, required=False)
    assays = _parse_assays(assays_entry) if assays_entry else tuple(AssayKind)

    mass_entry = _last(section, "mass_g", warnings, required=False)
    mass = parse_float(mass_entry) if mass_entry else None
    if mass is not None and mass <= 0:
        raise SpecValueError("mass_g", "must be positive", mass_entry.line)
    return SampleTarget(name=section.name, position=(x, y), depths_cm=depths, assays=assays, mass_g=mass)


def parse_plan(text: str, base_dir: Path | None = None) -> MissionPlan:
    warnings: list[PlanWarning] = []
    mission_section = None
    targets: list[SampleTarget] = []
    rocks: list[RockTarget] = []
    names: set[str] = set()
    for section in parse_sections(text):
        if section.kind == "mission":
            if mission_section is not None:
                raise SpecSyntaxError("[mission] given more than once", section.line)
            mission_section = section
            continue
        if section.kind not in ("target", "rock"):
            raise SpecSyntaxError(f"unknown section [{section.kind}]", section.line)
        if not section.name:
            raise SpecSyntaxError(f"[{section.kind}] needs a name", section.line)
        if section.name in names:
            raise SpecValueError(section.kind, f"duplicate name {section.name}", section.line)
        names.add(section.name)
        if section.kind == "target":
            targets.append(_parse_target(section, warnings))
        else:
            _check_plan_keys(section, PLAN_ROCK_KEYS)
            rock_id = _last(section, "id", warnings).value
            rocks.append(RockTarget(name=section.name, rock_id=rock_id))

    if mission_section is None:
        raise SpecValueError("mission", "missing [mission] section")
    _check_plan_keys(mission_section, PLAN_MISSION_KEYS)
    site_entry = _last(mission_section, "site", warnings, required=False)
    seed_entry = _last(mission_section, "seed", warnings)
    seed = parse_int(seed_entry)
    if not 0 <= seed <= MAX_SEED:
        raise SpecValueError("seed", "must be an unsigned 64-bit integer", seed_entry.line)
    classifier_entry = _last(mission_section, "classifier", warnings, required=False)
    telemetry_entry = _last(mission_section, "telemetry", warnings, required=False)
    telemetry = None
    if telemetry_entry is not None:
        try:
            telemetry = parse_endpoint(telemetry_entry.value)
        except ValueError as exc:
            raise SpecValueError("telemetry", str(exc), telemetry_entry.line) from exc
    if not targets and not rocks:
        raise SpecValueError("target", "plan needs at least one [target] or [rock]")

    return MissionPlan(
        site=site_entry.value if site_entry else None,
        seed=seed,
        targets=tuple(targets),
        rock_targets=tuple(rocks),
        classifier_id=classifier_entry.value if classifier_entry else "baseline",
        telemetry=telemetry,
        warnings=tuple(warnings),
        base_dir=base_dir,
    )


def load_plan_file(path: str | Path) -> MissionPlan:
    path = Path(path)
    return parse_plan(read_text(path), base_dir=path.parent)


def plan_to_text(plan: MissionPlan) -> str:
    lines = ["[mission]"]
    if plan.site is not None:
        lines.append(f"site = {plan.site}")
    lines.append(f"seed = {plan.seed}")
    lines.append(f"classifier = {plan.classifier_id}")
    if plan.telemetry is not None:
        lines.append(f"telemetry = {plan.telemetry[0]}:{plan.telemetry[1]}")
    for target in plan.targets:
        lines += [
            "",
            f"[target {target.name}]",
            f"position = {target.position[0]!r} {target.position[1]!r}",
            "depths = " + " ".join(repr(d) for d in target.depths_cm),
            "assays = " + ",".join(kind.value for kind in target.assays),
        ]
        if target.mass_g is not None:
            lines.append(f"mass_g = {target.mass_g!r}")
    for rock in plan.rock_targets:
        lines += ["", f"[rock {rock.name}]", f"id = {rock.rock_id}"]
    return "\n".join(lines) + "\n"


# Parameters ------------------------------------------------------------------


@dataclass(frozen=True)
class RoverConfig:
    speed_m_per_s: float = ROVER_DEFAULTS["speed_m_per_s"]
    max_attempts: int = ROVER_DEFAULTS["max_attempts"]

    def __post_init__(self) -> None:
        if self.speed_m_per_s <= 0:
            raise SpecValueError("speed_m_per_s", "must be positive")
        if self.max_attempts < 1:
            raise SpecValueError("max_attempts", "must be at least 1")


@dataclass(frozen=True)
class MissionParams:
    assays: AssayConfig
    baseline: BaselineConfig = field(default_factory=BaselineConfig)
    mechanism: MechanismConfig = field(default_factory=MechanismConfig)
    rover: RoverConfig = field(default_factory=RoverConfig)


def _rover_section(section) -> RoverConfig:
    if section is None:
        return RoverConfig()
    values: dict = {}
    for entry in section.entries:
        if entry.key == "speed_m_per_s":
            values[entry.key] = parse_float(entry)
        elif entry.key == "max_attempts":
            values[entry.key] = parse_int(entry)
        else:
            raise SpecValueError(entry.key, "unknown key in [rover]", entry.line)
    return RoverConfig(**values)


def load_params(text: str) -> MissionParams:
    sections = parse_sections(text)
    by_kind: dict[str, object] = {}
    for section in sections:
        if section.kind not in PARAM_SECTIONS:
            raise SpecSyntaxError(f"unknown section [{section.kind}]", section.line)
        if section.kind in by_kind:
            raise SpecSyntaxError(f"[{section.kind}] given more than once", section.line)
        by_kind[section.kind] = section
    return MissionParams(
        assays=load_assay_sections(sections),
        baseline=load_baseline_section(by_kind.get("baseline")),
        mechanism=MechanismConfig.from_section(by_kind.get("mechanism")),
        rover=_rover_section(by_kind.get("rover")),
    )


def load_params_file(path: str | Path) -> MissionParams:
    return load_params(read_text(path))


# Step table ------------------------------------------------------------------

STEP_EVENTS = {row["step"]: row["event"] for row in STEP_TABLE}

TRANSITIONS: dict[tuple[int, str], int] = {
    (0, "deploy"): 1,
    (1, "survey"): 2,
    (2, "select_region"): 3,
    (2, "position_rock"): 15,
    (2, "transmit"): 18,
    (3, "init_gear"): 4,
    (4, "measure_ph"): 5,
    (5, "suction"): 6,
    (6, "iterate"): 8,
    (6, "deposit"): 7,
    (8, "suction"): 6,
    (7, "rotate"): 9,
    (9, "suction"): 6,
    (9, "reposition"): 10,
    (10, "transport"): 11,
    (11, "dispense"): 12,
    (12, "dispense"): 12,
    (12, "capture_color"): 13,
    (13, "capture_color"): 13,
    (13, "classify_sample"): 14,
    (14, "survey"): 2,
    (14, "position_rock"): 15,
    (14, "transmit"): 18,
    (15, "rock_sensors"): 16,
    (16, "classify_rock"): 17,
    (17, "position_rock"): 15,
    (17, "transmit"): 18,
}
for _step in range(3, 14):
    TRANSITIONS[(_step, "retry")] = 2
    TRANSITIONS[(_step, "skip_target")] = 14
for _step in (15, 16):
    TRANSITIONS[(_step, "skip_rock")] = 17


@dataclass(frozen=True)
class MissionState:
    """``step_index`` is the last completed step; 0 means not yet deployed."""

    step_index: int = 0
    rover_pose: Point = (0.0, 0.0)
    clock_ms: int = 0
    pending_slots: tuple[int, ...] = ()
    verdicts: tuple = ()
    rock_results: tuple = ()
    aborted: bool = False


def step(state: MissionState, event: str) -> MissionState:
    if state.aborted:
        raise IllegalTransition(state.step_index, event)
    if event == "abort":
        return replace(state, aborted=True)
    next_step = TRANSITIONS.get((state.step_index, event))
    if next_step is None:
        raise IllegalTransition(state.step_index, event)
    return replace(state, step_index=next_step)


def legal_events(state: MissionState) -> list[str]:
    if state.aborted:
        return []
    return sorted({event for (index, event) in TRANSITIONS if index == state.step_index} | {"abort"})


# Engine ----------------------------------------------------------------------


@dataclass
class TargetOutcome:
    target: SampleTarget
    attempts: int = 0
    ph: float | None = None
    results: list[AssayResult] = field(default_factory=list)
    verdict: object | None = None
    partial: bool = False
    skipped: bool = False


@dataclass
class RockOutcome:
    target: RockTarget
    rock_class: object | None = None
    skipped: bool = False


@dataclass
class MissionResult:
    log: MissionLog
    summary: MissionSummary
    status: str


class MissionEngine:
    def __init__(
        self,
        plan: MissionPlan,
        site: SiteModel,
        calib: SensorCalibration,
        params: MissionParams,
        abort_check: Callable[[], str | None] | None = None,
        log: MissionLog | None = None,
    ) -> None:
        self.plan = plan
        self.site = site
        self.calib = calib
        self.params = params
        self.abort_check = abort_check
        self.log = log or MissionLog()
        self.clock = VirtualClock()
        self.mechanism = SamplingMechanism(params.mechanism, DutyBudget())
        self.poller = SensorPoller(site, calib, plan.seed)
        self.state = MissionState(rover_pose=(site.extent.x0, site.extent.y0))
        self.targets: list[TargetOutcome] = []
        self.rocks: list[RockOutcome] = []
        self._current: str = "-"

    # plumbing

    def _record(self, event: str, /, **fields: object) -> LogRecord:
        return self.log.append(self.clock.now_ms, event, **fields)

    def _advance(self, event: str) -> None:
        if self.abort_check is not None:
            reason = self.abort_check()
            if reason:
                raise MissionAborted(reason)
        self.state = replace(step(self.state, event), clock_ms=self.clock.now_ms)
        self._record("STEP", step=self.state.step_index, event=event, target=self._current)

    def _set_pose(self, pose: Point) -> None:
        self.state = replace(self.state, rover_pose=pose)

    def _move_to(self, position: Point) -> None:
        start = self.state.rover_pose
        meters = distance(start, position)
        duration = math.ceil(meters / self.params.rover.speed_m_per_s * 1000.0 - 1e-9)
        if not self.site.extent.contains(position):
            raise SiteError(f"position {position} outside site extent")
        self._record("MOVE", src=start, dst=position, ms=duration)
        self.clock.advance(duration)
        self._set_pose(position)

    def _poll(self, probe_deployed: bool = False, probe_depth_cm: float = 0.0):
        frame = self.poller.poll(self.state.rover_pose, self.clock.now_ms, probe_deployed, probe_depth_cm)
        self.clock.advance_to(frame.t_ms)
        self._record(
            "FRAME",
            rgb=frame.rgb,
            alcohol=frame.alcohol_detected,
            co2=frame.co2_ppm,
            hcho=frame.formaldehyde_ppm,
            humidity=frame.humidity_pct,
            nh3=frame.ammonia_ppm,
            moisture=frame.soil_moisture_pct,
            ph=frame.ph,
            faults=",".join(frame.faults) or "none",
        )
        return frame

    def _record_grant(self, actuator_id: str, start_ms: int, end_ms: int) -> None:
        if end_ms > start_ms:
            self._record("ACTUATOR", id=actuator_id, start=start_ms, end=end_ms)

    def _position_pump(self, targets: tuple[float, float, float]) -> None:
        while True:
            outcome = self.mechanism.position_pump(targets, self.clock.now_ms)
            if isinstance(outcome, WaitUntil):
                self._record("DUTY_WAIT", id="axes", until=outcome.t_ms)
                self.clock.advance_to(outcome.t_ms)
                continue
            for move in outcome.moves:
                self._record_grant(move.actuator_id, outcome.start_ms, outcome.start_ms + move.duration_ms)
            self.clock.advance_to(outcome.end_ms)
            return

    def _suction(self, position: Point, depth_cm: float, duration_ms: int) -> SoilSample:
        self._position_pump(self.mechanism.pump_targets(depth_cm))
        while True:
            start = self.clock.now_ms
            try:
                sample = self.mechanism.run_suction(self.site, position, depth_cm, duration_ms, start)
            except MechanismError as exc:
                wait = getattr(exc, "wait_until_ms", None)
                if wait is None:
                    raise
                self._record("DUTY_WAIT", id="suction", until=wait)
                self.clock.advance_to(wait)
                continue
            self._record_grant("suction", start, start + duration_ms)
            self.clock.advance(duration_ms)
            self._record("SUCTION", target=self._current, depth=depth_cm, mass=sample.mass_g, ms=duration_ms)
            return sample

    def _rotate(self, n_slots: int) -> None:
        if n_slots <= 0:
            return
        table = self.mechanism.advance_turntable(n_slots)
        self.clock.advance(self.mechanism.rotation_ms(n_slots))
        self._record("ROTATE", slots=n_slots, steps=table.motor_steps_taken, slot=table.current_slot)

    def _reset_beakers(self) -> None:
        for index in range(self.mechanism.turntable.slot_count):
            self.mechanism.replace_beaker(index)
        table = self.mechanism.turntable
        self._rotate((table.slot_count - table.current_slot) % table.slot_count)
        self.mechanism.stow_probe()
        self.state = replace(self.state, pending_slots=())

    # target cycle

    def _attempt_target(self, target: SampleTarget, outcome: TargetOutcome) -> None:
        assay_params = self.params.assays.params
        charts = self.params.assays.charts
        mechanism = self.mechanism

        if self.state.step_index != 2:
            self._advance("survey")
        self._poll()

        self._advance("select_region")
        self._move_to(target.position)

        self._advance("init_gear")
        mechanism.init_extraction_gear()

        self._advance("measure_ph")
        self.clock.advance(mechanism.deploy_probe())
        rng = np.random.default_rng([self.plan.seed, self.clock.now_ms])
        outcome.ph = read_ph(self.site, target.position, target.depths_cm[0], self.calib, mechanism.probe_deployed, rng)
        self._record("PH", target=target.name, ph=outcome.ph, depth=target.depths_cm[0])
        mechanism.stow_probe()

        slots: dict[AssayKind, int] = {}
        for kind in target.assays:
            mass = target.mass_g if target.mass_g is not None else assay_params[kind].nominal_mass_g
            per_depth_ms = mechanism.suction_ms_for(mass / len(target.depths_cm))
            pieces = []
            for index, depth in enumerate(target.depths_cm):
                if index:
                    self._advance("iterate")
                self._advance("suction")
                pieces.append(self._suction(target.position, depth, per_depth_ms))
            composite = merge_samples(pieces)

            self._advance("deposit")
            slot = mechanism.turntable.current_slot
            mechanism.deposit_sample(composite, slot)
            self.clock.advance(mechanism.config.deposit_ms)
            stored = mechanism.turntable.slots[slot].sample
            self._record(
                "DEPOSIT", target=target.name, kind=kind.value, slot=slot, mass=stored.mass_g, contaminated=stored.contaminated
            )
            slots[kind] = slot
            self.state = replace(self.state, pending_slots=tuple(slots.values()))

            self._advance("rotate")
            self._rotate(1)

        self._advance("reposition")
        point = mechanism.config.sample_point_mm
        self._position_pump((point, point, 0.0))

        self._advance("transport")
        self.clock.advance(mechanism.config.transport_ms)

        started: dict[AssayKind, int] = {}
        for kind in target.assays:
            self._advance("dispense")
            slot = slots[kind]
            table = mechanism.turntable
            self._rotate((slot - table.current_slot) % table.slot_count)
            lines = [(kind.reagent, assay_params[kind].reagent_ml)]
            if assay_params[kind].water_ml > 0:
                lines.append(("water", assay_params[kind].water_ml))
            for pump_id, volume in lines:
                record = mechanism.begin_dispense(pump_id, volume, slot)
                self.clock.advance(record.duration_ms)
                mechanism.finish_dispense()
                self._record("DISPENSE", target=target.name, pump=pump_id, volume=volume, slot=slot, ms=record.duration_ms)
            started[kind] = self.clock.now_ms

        def completion(kind: AssayKind) -> int:
            sample = mechanism.turntable.slots[slots[kind]].sample
            return started[kind] + assay_params[kind].required_ms(sample.mass_g)

        results: dict[AssayKind, AssayResult] = {}
        order = list(AssayKind)
        for kind in sorted(target.assays, key=lambda k: (completion(k), order.index(k))):
            self._advance("capture_color")
            slot = mechanism.turntable.slots[slots[kind]]
            result = run_assay(kind, slot, assay_params[kind], charts[kind], self.clock, started_ms=started[kind])
            results[kind] = result
            self._record(
                "ASSAY",
                target=target.name,
                kind=kind.value,
                detected=result.detected,
                bin=result.bin_index,
                elapsed=result.elapsed_ms,
                completed=result.completed_ms,
                rgb=result.observed_rgb,
                contaminated=result.contaminated_input,
            )

        self._advance("classify_sample")

        def hit(kind: AssayKind) -> bool:
            return kind in results and results[kind].detected

        contaminated = any(r.contaminated_input for r in results.values())
        verdict = classify_life(hit(AssayKind.PROTEIN), hit(AssayKind.CARBOHYDRATE), hit(AssayKind.AMMONIA), contaminated)
        partial = len(target.assays) < len(AssayKind)
        self._record(
            "VERDICT",
            target=target.name,
            verdict=verdict.life.value,
            contaminated=verdict.contaminated_evidence,
            partial=partial,
            protein=hit(AssayKind.PROTEIN),
            carbohydrate=hit(AssayKind.CARBOHYDRATE),
            ammonia=hit(AssayKind.AMMONIA),
        )
        outcome.results = list(results.values())
        outcome.verdict = verdict
        outcome.partial = partial
        self.state = replace(self.state, verdicts=self.state.verdicts + ((target.name, verdict),))

    def _run_target(self, target: SampleTarget) -> TargetOutcome:
        outcome = TargetOutcome(target=target)
        self.targets.append(outcome)
        self._current = target.name
        self._record("TARGET_BEGIN", target=target.name, kind="sample", position=target.position)
        max_attempts = self.params.rover.max_attempts
        while True:
            try:
                self._attempt_target(target, outcome)
                outcome.attempts += 1
                self._reset_beakers()
                break
            except TARGET_ERRORS as exc:
                outcome.attempts += 1
                failed_at = self.state.step_index
                logger.warning("target %s attempt %d failed at step %d: %s", target.name, outcome.attempts, failed_at, exc)
                self._record(
                    "ERROR", target=target.name, attempt=outcome.attempts, step=failed_at, error=type(exc).__name__
                )
                self._reset_beakers()
                if outcome.attempts >= max_attempts:
                    self._advance("skip_target")
                    self._record("SKIP", target=target.name, kind="sample", attempts=outcome.attempts)
                    outcome.skipped = True
                    outcome.results = []
                    break
                self._advance("retry")
        self._current = "-"
        return outcome

    # rocks

    def _run_rock(self, rock: RockTarget) -> RockOutcome:
        outcome = RockOutcome(target=rock)
        self.rocks.append(outcome)
        self._current = rock.name
        self._record("TARGET_BEGIN", target=rock.name, kind="rock", rock=rock.rock_id)
        if self.state.step_index == 1:
            self._advance("survey")
            self._poll()
        try:
            self._advance("position_rock")
            properties = rock_at(self.site, rock.rock_id)
            self._move_to(properties.position)

            self._advance("rock_sensors")
            frame = self._poll()
            capture = capture_image(self.site, rock.rock_id, self.state.rover_pose, self.clock.now_ms, self.calib)
            self._record(
                "ROCK_CAPTURE",
                target=rock.name,
                rock=rock.rock_id,
                color=capture.mean_color,
                layered=capture.layered,
                alcohol=frame.alcohol_detected,
                hcho=frame.formaldehyde_ppm,
            )

            self._advance("classify_rock")
            result = classify_rock(
                capture,
                frame.alcohol_detected,
                frame.formaldehyde_ppm or 0.0,
                self.plan.classifier_id,
                self.params.baseline,
            )
            self._record(
                "ROCK_CLASS",
                target=rock.name,
                rock=rock.rock_id,
                type=result.rock_type.value,
                fossil=result.fossil_prediction,
                classifier=result.classifier_id,
            )
            outcome.rock_class = result
            self.state = replace(self.state, rock_results=self.state.rock_results + (result,))
        except TARGET_ERRORS as exc:
            logger.warning("rock %s failed at step %d: %s", rock.name, self.state.step_index, exc)
            self._record("ERROR", target=rock.name, attempt=1, step=self.state.step_index, error=type(exc).__name__)
            self._advance("skip_rock")
            self._record("SKIP", target=rock.name, kind="rock", attempts=1)
            outcome.skipped = True
        self._current = "-"
        return outcome

    # run

    def _validate(self) -> None:
        extent = self.site.extent
        for target in self.plan.targets:
            if not extent.contains(target.position):
                raise MissionConfigError(f"target {target.name} lies outside the site extent")
            if len(target.assays) > self.mechanism.turntable.slot_count:
                raise MissionConfigError(f"target {target.name} needs more beakers than the turntable holds")
        for rock in self.plan.rock_targets:
            try:
                rock_at(self.site, rock.rock_id)
            except SiteError as exc:
                raise MissionConfigError(f"rock target {rock.name}: {exc}") from exc
        if not is_registered(self.plan.classifier_id):
            raise MissionConfigError(f"no rock classifier registered as {self.plan.classifier_id!r}")

    def run(self) -> MissionResult:
        plan = self.plan
        self._record(
            "MISSION_START",
            site=_token(self.site.name),
            seed=plan.seed,
            targets=len(plan.targets),
            rocks=len(plan.rock_targets),
            classifier=plan.classifier_id,
            method=METHOD_VERSION,
        )
        for warning in plan.warnings:
            logger.warning("plan: %s", warning)
            self._record(
                "PLAN_WARNING",
                section=warning.section,
                key=warning.key,
                line=warning.line,
                winner=warning.superseded_by,
            )
        try:
            self._validate()
        except MissionConfigError as exc:
            logger.error("mission config error: %s", exc)
            self._record("ABORT", reason="config_error")
            self._record("MISSION_END", status="config_error")
            raise MissionConfigError(str(exc), log=self.log) from exc

        status = "completed"
        try:
            self._advance("deploy")
            for target in plan.targets:
                self._run_target(target)
            for rock in plan.rock_targets:
                self._run_rock(rock)
            self._advance("transmit")
            verdicts = [o.verdict.life.value for o in self.targets if o.verdict is not None]
            self._record(
                "SUMMARY",
                targets=len(self.targets),
                extant=verdicts.count("Extant"),
                extinct=verdicts.count("Extinct"),
                npl=verdicts.count("NPL"),
                skipped=sum(1 for o in self.targets if o.skipped),
                rocks=len(self.rocks),
            )
        except MissionAborted as exc:
            logger.warning("%s", exc)
            self.state = step(self.state, "abort")
            self._record("ABORT", reason=_token(exc.reason))
            status = "aborted"
        self._record("MISSION_END", status=status)
        return MissionResult(log=self.log, summary=self.summary(status), status=status)

    def summary(self, status: str) -> MissionSummary:
        targets = [
            TargetSummary(
                target=o.target.name,
                verdict=o.verdict.life.value if o.verdict is not None else None,
                contaminated=o.verdict.contaminated_evidence if o.verdict is not None else False,
                partial=o.partial,
                skipped=o.skipped,
                attempts=o.attempts,
                ph=round(o.ph, 4) if o.ph is not None and not o.skipped else None,
                assays=[
                    AssayTiming(
                        kind=r.kind.value,
                        detected=r.detected,
                        bin_index=r.bin_index,
                        elapsed_ms=r.elapsed_ms,
                        completed_ms=r.completed_ms,
                        contaminated=r.contaminated_input,
                    )
                    for r in o.results
                ],
            )
            for o in self.targets
        ]
        rocks = [
            RockSummary(
                target=o.target.name,
                rock_id=o.target.rock_id,
                rock_type=o.rock_class.rock_type.value if o.rock_class is not None else None,
                fossil_prediction=o.rock_class.fossil_prediction if o.rock_class is not None else None,
                classifier_id=o.rock_class.classifier_id if o.rock_class is not None else None,
                skipped=o.skipped,
            )
            for o in self.rocks
        ]
        duty = [
            duty_utilization(actuator.id, actuator.on_intervals, self.mechanism.budget)
            for actuator in self.mechanism.actuators
        ]
        return MissionSummary(
            site=_token(self.site.name),
            seed=self.plan.seed,
            status=status,
            end_t_ms=self.clock.now_ms,
            method_version=METHOD_VERSION,
            targets=targets,
            rocks=rocks,
            duty=duty,
        )


def _token(text: str) -> str:
    return "_".join(text.split()) or "unspecified"


def run_mission(
    plan: MissionPlan,
    site: SiteModel,
    calib: SensorCalibration,
    params: MissionParams,
    abort_check: Callable[[], str | None] | None = None,
    listeners: tuple[Callable[[LogRecord], None], ...] = (),
) -> MissionResult:
    log = MissionLog()
    for listener in listeners:
        log.subscribe(listener)
    return MissionEngine(plan, site, calib, params, abort_check=abort_check, log=log).run()


__all__ = [
    "IllegalTransition",
    "MissionAborted",
    "MissionConfigError",
    "MissionEngine",
    "MissionParams",
    "MissionPlan",
    "MissionResult",
    "MissionState",
    "RockTarget",
    "RoverConfig",
    "SampleTarget",
    "SpecError",
    "TRANSITIONS",
    "legal_events",
    "load_params",
    "load_params_file",
    "load_plan_file",
    "parse_plan",
    "plan_to_text",
    "run_mission",
    "step",
]
