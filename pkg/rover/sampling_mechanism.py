"""Physical sample path: pump positioning, suction, funnel drop, turntable, dispensing.

All durations are virtual milliseconds. Every duty-limited actuator keeps its
granted on-intervals so the rolling-window budget can be checked and audited.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

from mission_policy import DUTY_POLICY, MECHANISM_DEFAULTS

from .common import Section, SpecValueError, parse_float, require_range
from .env_model import soil_at
from .types import BeakerSlot, Point, SiteModel, SoilComposition, SoilSample

AXES = ("axis_x", "axis_y", "axis_z")
SUCTION = "suction"
WATER = "water"
REAGENT_LINES = ("benedict", "ninhydrin", "nessler")


class MechanismError(Exception):
    pass


class StrokeError(MechanismError):
    pass


class RequestTooLong(MechanismError):
    pass


class DutyBudgetExhausted(MechanismError):
    def __init__(self, actuator_id: str, wait_until_ms: int) -> None:
        self.actuator_id = actuator_id
        self.wait_until_ms = wait_until_ms
        super().__init__(f"{actuator_id} duty budget exhausted until t={wait_until_ms}")


class ReachError(MechanismError):
    pass


class PumpNotPositioned(MechanismError):
    pass


class SlotMisaligned(MechanismError):
    pass


class SlotOccupied(MechanismError):
    pass


class EmptyBeaker(MechanismError):
    pass


class ReservoirEmpty(MechanismError):
    pass


class TurntableBusy(MechanismError):
    pass


@dataclass(frozen=True)
class DutyBudget:
    window_ms: int = DUTY_POLICY["window_ms"]
    max_on_ms: int = DUTY_POLICY["max_on_ms"]


@dataclass(frozen=True)
class Allowed:
    pass


@dataclass(frozen=True)
class WaitUntil:
    t_ms: int


DutyDecision = Union[Allowed, WaitUntil]
ALLOWED = Allowed()


@dataclass
class ActuatorState:
    id: str
    position_mm: float = 0.0
    on_intervals: list[tuple[int, int]] = field(default_factory=list)

    def record_on(self, start_ms: int, end_ms: int) -> None:
        if end_ms <= start_ms:
            return
        if self.on_intervals and start_ms < self.on_intervals[-1][1]:
            raise MechanismError(f"{self.id}: interval starting {start_ms} overlaps a granted interval")
        self.on_intervals.append((start_ms, end_ms))


def on_time_in_window(intervals: list[tuple[int, int]], start_ms: int, end_ms: int) -> int:
    total = 0
    for s, e in intervals:
        overlap = min(e, end_ms) - max(s, start_ms)
        if overlap > 0:
            total += overlap
    return total


def peak_window_on_ms(intervals: list[tuple[int, int]], window_ms: int) -> int:
    """Largest on-time inside any window of length ``window_ms``.

    The maximum is always reached by a window that starts at an interval
    start or ends at an interval end, so only those candidates are scanned.
    """
    best = 0
    for s, e in intervals:
        best = max(
            best,
            on_time_in_window(intervals, s, s + window_ms),
            on_time_in_window(intervals, e - window_ms, e),
        )
    return best


def duty_check(
    actuator: ActuatorState,
    now_ms: int,
    requested_on_ms: int,
    budget: DutyBudget = DutyBudget(),
) -> DutyDecision:
    if requested_on_ms > budget.max_on_ms:
        raise RequestTooLong(f"{actuator.id}: {requested_on_ms} ms exceeds the {budget.max_on_ms} ms budget")
    if requested_on_ms < 0:
        raise ValueError("requested_on_ms must be non-negative")

    intervals = actuator.on_intervals
    earliest = now_ms
    if intervals and intervals[-1][1] > now_ms:
        earliest = intervals[-1][1]
    limit = budget.max_on_ms - requested_on_ms

    def on_at(t_ms: int) -> int:
        return on_time_in_window(intervals, t_ms - budget.window_ms, t_ms)

    if on_at(earliest) <= limit:
        return ALLOWED if earliest == now_ms else WaitUntil(earliest)

    # All intervals end by ``earliest``, so on_at is non-increasing from there on.
    lo, hi = earliest, intervals[-1][1] + budget.window_ms
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if on_at(mid) <= limit:
            hi = mid
        else:
            lo = mid
    return WaitUntil(hi)


def travel_ms(distance_mm: float, speed_mm_per_s: float) -> int:
    return math.ceil(abs(distance_mm) / speed_mm_per_s * 1000.0 - 1e-9)


@dataclass(frozen=True)
class Move:
    actuator_id: str
    from_mm: float
    to_mm: float
    duration_ms: int


@dataclass(frozen=True)
class MotionPlan:
    start_ms: int
    end_ms: int
    moves: tuple[Move, ...]


def position_pump(
    actuators: list[ActuatorState],
    targets: tuple[float, float, float],
    now_ms: int,
    speed_mm_per_s: float = MECHANISM_DEFAULTS["actuator_speed_mm_per_s"],
    stroke_mm: float = MECHANISM_DEFAULTS["stroke_mm"],
    budget: DutyBudget = DutyBudget(),
) -> MotionPlan | WaitUntil:
    """Drive the three linear actuators to ``targets`` concurrently.

    Nothing moves unless every actuator's travel fits its duty budget.
    """
    if len(actuators) != len(targets):
        raise MechanismError("one target per actuator is required")
    for actuator, target in zip(actuators, targets):
        if not 0.0 <= target <= stroke_mm:
            raise StrokeError(f"{actuator.id}: target {target:g} mm outside [0, {stroke_mm:g}] mm stroke")

    moves = [
        Move(a.id, a.position_mm, float(t), travel_ms(t - a.position_mm, speed_mm_per_s))
        for a, t in zip(actuators, targets)
    ]
    waits = []
    for actuator, move in zip(actuators, moves):
        if move.duration_ms == 0:
            continue
        decision = duty_check(actuator, now_ms, move.duration_ms, budget)
        if isinstance(decision, WaitUntil):
            waits.append(decision.t_ms)
    if waits:
        return WaitUntil(max(waits))

    for actuator, move in zip(actuators, moves):
        actuator.record_on(now_ms, now_ms + move.duration_ms)
        actuator.position_mm = move.to_mm
    end_ms = now_ms + max((m.duration_ms for m in moves), default=0)
    return MotionPlan(start_ms=now_ms, end_ms=end_ms, moves=tuple(moves))


@dataclass
class TurntableState:
    slot_count: int = MECHANISM_DEFAULTS["slot_count"]
    steps_per_slot: int = MECHANISM_DEFAULTS["steps_per_slot"]
    motor_steps_taken: int = 0
    current_slot: int = 0
    slots: list[BeakerSlot] = field(default_factory=list)
    busy: str | None = None

    def __post_init__(self) -> None:
        if not self.slots:
            self.slots = [BeakerSlot() for _ in range(self.slot_count)]

    @property
    def aligned_slot(self) -> BeakerSlot:
        return self.slots[self.current_slot]


@dataclass(frozen=True)
class DispenseRecord:
    pump_id: str
    volume_ml: float
    slot_index: int
    duration_ms: int


@dataclass(frozen=True)
class MechanismConfig:
    stroke_mm: float = MECHANISM_DEFAULTS["stroke_mm"]
    actuator_speed_mm_per_s: float = MECHANISM_DEFAULTS["actuator_speed_mm_per_s"]
    collection_rate_g_per_s: float = MECHANISM_DEFAULTS["collection_rate_g_per_s"]
    max_reach_cm: float = MECHANISM_DEFAULTS["max_reach_cm"]
    mm_per_depth_cm: float = MECHANISM_DEFAULTS["mm_per_depth_cm"]
    sample_point_mm: float = MECHANISM_DEFAULTS["sample_point_mm"]
    slot_count: int = MECHANISM_DEFAULTS["slot_count"]
    steps_per_slot: int = MECHANISM_DEFAULTS["steps_per_slot"]
    stepper_steps_per_s: int = MECHANISM_DEFAULTS["stepper_steps_per_s"]
    deposit_ms: int = MECHANISM_DEFAULTS["deposit_ms"]
    dispense_ml_per_s: float = MECHANISM_DEFAULTS["dispense_ml_per_s"]
    reagent_reservoir_ml: float = MECHANISM_DEFAULTS["reagent_reservoir_ml"]
    water_reservoir_ml: float = MECHANISM_DEFAULTS["water_reservoir_ml"]
    ph_settle_ms: int = MECHANISM_DEFAULTS["ph_settle_ms"]
    transport_ms: int = MECHANISM_DEFAULTS["transport_ms"]

    def __post_init__(self) -> None:
        if self.max_reach_cm <= 5:
            raise SpecValueError("max_reach_cm", "suction reach must exceed 5 cm")
        if self.max_reach_cm * self.mm_per_depth_cm > self.stroke_mm:
            raise SpecValueError("max_reach_cm", "reach does not fit the actuator stroke")
        for key in ("actuator_speed_mm_per_s", "collection_rate_g_per_s", "dispense_ml_per_s", "stepper_steps_per_s"):
            if getattr(self, key) <= 0:
                raise SpecValueError(key, "must be positive")
        if self.slot_count < 1 or self.steps_per_slot < 1:
            raise SpecValueError("slot_count", "turntable needs at least one slot and one step per slot")

    @classmethod
    def from_section(cls, section: Section | None) -> MechanismConfig:
        if section is None:
            return cls()
        values: dict = {}
        for entry in section.entries:
            if entry.key not in cls.__dataclass_fields__:
                raise SpecValueError(entry.key, "unknown key in [mechanism]", entry.line)
            value = require_range(entry, parse_float(entry), 0, None)
            default = MECHANISM_DEFAULTS[entry.key]
            values[entry.key] = int(value) if isinstance(default, int) else value
        return cls(**values)


def merge_samples(samples: list[SoilSample]) -> SoilSample:
    """Composite of several suction runs; mass adds, composition is mass-weighted."""
    if not samples:
        raise MechanismError("nothing to merge")
    total = sum(s.mass_g for s in samples)

    def weighted(attr: str) -> float:
        if total == 0:
            return getattr(samples[0].composition, attr)
        return sum(getattr(s.composition, attr) * s.mass_g for s in samples) / total

    composition = SoilComposition(
        protein_mg_per_g=weighted("protein_mg_per_g"),
        carbohydrate_mg_per_g=weighted("carbohydrate_mg_per_g"),
        ammonia_mg_per_g=weighted("ammonia_mg_per_g"),
        moisture_pct=weighted("moisture_pct"),
        ph=weighted("ph"),
    )
    return SoilSample(
        mass_g=total,
        source_position=samples[0].source_position,
        depth_cm=max(s.depth_cm for s in samples),
        composition=composition,
        sterile_chain=all(s.sterile_chain for s in samples),
        contaminated=any(s.contaminated for s in samples),
    )


class SamplingMechanism:
    """Single state machine for the sample path, mutated by one mission thread."""

    def __init__(self, config: MechanismConfig | None = None, budget: DutyBudget | None = None) -> None:
        self.config = config or MechanismConfig()
        self.budget = budget or DutyBudget()
        self.axes = [ActuatorState(axis) for axis in AXES]
        self.suction = ActuatorState(SUCTION)
        self.turntable = TurntableState(slot_count=self.config.slot_count, steps_per_slot=self.config.steps_per_slot)
        self.reservoirs: dict[str, float] = {line: self.config.reagent_reservoir_ml for line in REAGENT_LINES}
        self.reservoirs[WATER] = self.config.water_reservoir_ml
        self.sterile = False
        self.probe_deployed = False

    @property
    def actuators(self) -> list[ActuatorState]:
        return [*self.axes, self.suction]

    def init_extraction_gear(self) -> None:
        self.sterile = True

    def break_sterile_chain(self) -> None:
        self.sterile = False

    def deploy_probe(self) -> int:
        self.probe_deployed = True
        return self.config.ph_settle_ms

    def stow_probe(self) -> None:
        self.probe_deployed = False

    def pump_targets(self, depth_cm: float) -> tuple[float, float, float]:
        point = self.config.sample_point_mm
        return point, point, depth_cm * self.config.mm_per_depth_cm

    def position_pump(self, targets: tuple[float, float, float], now_ms: int) -> MotionPlan | WaitUntil:
        return position_pump(
            self.axes,
            targets,
            now_ms,
            speed_mm_per_s=self.config.actuator_speed_mm_per_s,
            stroke_mm=self.config.stroke_mm,
            budget=self.budget,
        )

    def suction_ms_for(self, mass_g: float) -> int:
        return math.ceil(mass_g / self.config.collection_rate_g_per_s * 1000.0 - 1e-9)

    def run_suction(
        self,
        site: SiteModel,
        position: Point,
        depth_cm: float,
        duration_ms: int,
        now_ms: int,
    ) -> SoilSample:
        if depth_cm < 0:
            raise ReachError(f"depth {depth_cm:g} cm is negative")
        if depth_cm > self.config.max_reach_cm:
            raise ReachError(f"depth {depth_cm:g} cm beyond {self.config.max_reach_cm:g} cm reach")
        expected = self.pump_targets(depth_cm)
        if any(abs(a.position_mm - t) > 1e-9 for a, t in zip(self.axes, expected)):
            raise PumpNotPositioned(f"pump not positioned for {depth_cm:g} cm")
        decision = duty_check(self.suction, now_ms, duration_ms, self.budget)
        if isinstance(decision, WaitUntil):
            raise DutyBudgetExhausted(SUCTION, decision.t_ms)
        composition = soil_at(site, position, depth_cm)
        self.suction.record_on(now_ms, now_ms + duration_ms)
        return SoilSample(
            mass_g=self.config.collection_rate_g_per_s * duration_ms / 1000.0,
            source_position=position,
            depth_cm=depth_cm,
            composition=composition,
            sterile_chain=self.sterile,
        )

    def _check_idle(self) -> None:
        if self.turntable.busy is not None:
            raise TurntableBusy(f"turntable busy with {self.turntable.busy}")

    def _aligned(self, slot_index: int) -> BeakerSlot:
        table = self.turntable
        if not 0 <= slot_index < table.slot_count:
            raise SlotMisaligned(f"slot {slot_index} does not exist")
        if table.current_slot != slot_index:
            raise SlotMisaligned(f"slot {slot_index} is not under the funnel (slot {table.current_slot} is)")
        return table.slots[slot_index]

    def deposit_sample(self, sample: SoilSample, slot_index: int) -> TurntableState:
        self._check_idle()
        slot = self._aligned(slot_index)
        if not slot.occupied:
            raise EmptyBeaker(f"slot {slot_index} has no beaker")
        if slot.sample is not None:
            raise SlotOccupied(f"slot {slot_index} already holds a sample")
        if slot.cover_open_at_alignment:
            slot.contaminated = True
        slot.funnel_cover_open = True
        slot.sample = replace(sample, contaminated=sample.contaminated or slot.contaminated)
        slot.funnel_cover_open = False
        return self.turntable

    def open_cover(self, slot_index: int) -> None:
        self.turntable.slots[slot_index].funnel_cover_open = True

    def advance_turntable(self, n_slots: int) -> TurntableState:
        if n_slots <= 0:
            raise MechanismError(f"advance needs a positive slot count, got {n_slots}")
        self._check_idle()
        table = self.turntable
        table.motor_steps_taken += n_slots * table.steps_per_slot
        table.current_slot = (table.current_slot + n_slots) % table.slot_count
        aligned = table.aligned_slot
        aligned.cover_open_at_alignment = aligned.funnel_cover_open
        return table

    def rotation_ms(self, n_slots: int) -> int:
        steps = n_slots * self.turntable.steps_per_slot
        return math.ceil(steps * 1000 / self.config.stepper_steps_per_s)

    def realign(self) -> int:
        """Rotate forward until slot 0 is under the funnel; returns slots advanced."""
        table = self.turntable
        n_slots = (table.slot_count - table.current_slot) % table.slot_count
        if n_slots:
            self.advance_turntable(n_slots)
        return n_slots

    def begin_dispense(self, pump_id: str, volume_ml: float, slot_index: int) -> DispenseRecord:
        """Start pumping into the aligned beaker; the turntable stays locked until ``finish_dispense``."""
        if pump_id not in self.reservoirs:
            raise MechanismError(f"unknown pump line {pump_id!r}")
        if volume_ml <= 0:
            raise MechanismError(f"dispense volume must be positive, got {volume_ml:g}")
        self._check_idle()
        slot = self._aligned(slot_index)
        if slot.sample is None:
            raise EmptyBeaker(f"slot {slot_index} holds no sample")
        if self.reservoirs[pump_id] < volume_ml:
            raise ReservoirEmpty(f"{pump_id} reservoir has {self.reservoirs[pump_id]:g} ml, {volume_ml:g} ml requested")
        self.turntable.busy = "dispense"
        self.reservoirs[pump_id] -= volume_ml
        slot.prep.append((pump_id, volume_ml))
        duration = math.ceil(volume_ml / self.config.dispense_ml_per_s * 1000.0 - 1e-9)
        return DispenseRecord(pump_id=pump_id, volume_ml=volume_ml, slot_index=slot_index, duration_ms=duration)

    def finish_dispense(self) -> None:
        if self.turntable.busy != "dispense":
            raise MechanismError("no dispense in progress")
        self.turntable.busy = None

    def dispense(self, pump_id: str, volume_ml: float, slot_index: int) -> DispenseRecord:
        record = self.begin_dispense(pump_id, volume_ml, slot_index)
        self.finish_dispense()
        return record

    def replace_beaker(self, slot_index: int) -> None:
        self.turntable.slots[slot_index] = BeakerSlot()
