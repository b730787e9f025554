from __future__ import annotations

import unittest
from pathlib import Path

import numpy as np

from rover import (
    ALLOWED,
    ActuatorState,
    DutyBudget,
    DutyBudgetExhausted,
    MechanismConfig,
    MechanismError,
    SamplingMechanism,
    SoilComposition,
    SoilSample,
    SpecValueError,
    WaitUntil,
    duty_check,
    load_site_file,
    merge_samples,
    peak_window_on_ms,
    position_pump,
)
from rover.sampling_mechanism import (
    EmptyBeaker,
    PumpNotPositioned,
    ReachError,
    RequestTooLong,
    ReservoirEmpty,
    SlotMisaligned,
    SlotOccupied,
    StrokeError,
    TurntableBusy,
)

DEMO_SITE = Path("config/demo_site.conf")


def earliest_start(intervals: list[tuple[int, int]], now_ms: int, requested_ms: int, budget: DutyBudget) -> int:
    """Millisecond-by-millisecond search for the first admissible start."""
    last_end = intervals[-1][1] if intervals else now_ms
    horizon = max(now_ms, last_end) + budget.window_ms + 2
    occupied = np.zeros(horizon, dtype=np.int64)
    for start, end in intervals:
        occupied[start:end] = 1
    prefix = np.concatenate(([0], np.cumsum(occupied)))
    for t in range(max(now_ms, last_end), horizon):
        used = int(prefix[t] - prefix[max(0, t - budget.window_ms)])
        if used <= budget.max_on_ms - requested_ms:
            return t
    raise AssertionError("no admissible start inside the horizon")


def brute_peak(intervals: list[tuple[int, int]], window_ms: int) -> int:
    end = max(e for _, e in intervals)
    occupied = np.zeros(end + window_ms, dtype=np.int64)
    for s, e in intervals:
        occupied[s:e] = 1
    return int(np.convolve(occupied, np.ones(window_ms, dtype=np.int64), mode="valid").max())


class DutyCycleTests(unittest.TestCase):
    def test_reference_example_waits_a_full_window(self) -> None:
        actuator = ActuatorState("suction")
        actuator.record_on(0, 120_000)
        self.assertEqual(WaitUntil(1_200_001), duty_check(actuator, 120_000, 1))

    def test_full_budget_from_idle_is_allowed(self) -> None:
        self.assertEqual(ALLOWED, duty_check(ActuatorState("axis_x"), 0, 120_000))

    def test_request_longer_than_budget_is_rejected(self) -> None:
        with self.assertRaises(RequestTooLong):
            duty_check(ActuatorState("axis_x"), 0, 120_001)

    def test_wait_until_end_of_running_interval(self) -> None:
        actuator = ActuatorState("axis_z")
        actuator.record_on(100, 600)
        self.assertEqual(WaitUntil(600), duty_check(actuator, 300, 10))

    def test_randomized_schedules_match_brute_force(self) -> None:
        budget = DutyBudget(window_ms=100, max_on_ms=20)
        rng = np.random.default_rng(2024)
        decisions = 0
        for _ in range(1000):
            actuator = ActuatorState("suction")
            now = 0
            for _ in range(10):
                now += int(rng.integers(0, 30))
                requested = int(rng.integers(1, budget.max_on_ms + 1))
                expected = earliest_start(actuator.on_intervals, now, requested, budget)
                decision = duty_check(actuator, now, requested, budget)
                if expected == now:
                    self.assertEqual(ALLOWED, decision)
                else:
                    self.assertEqual(WaitUntil(expected), decision)
                    self.assertEqual(ALLOWED, duty_check(actuator, expected, requested, budget))
                actuator.record_on(expected, expected + requested)
                self.assertLessEqual(peak_window_on_ms(actuator.on_intervals, budget.window_ms), budget.max_on_ms)
                now = expected + int(rng.integers(0, requested + 1))
                decisions += 1
            self.assertEqual(
                brute_peak(actuator.on_intervals, budget.window_ms),
                peak_window_on_ms(actuator.on_intervals, budget.window_ms),
            )
        self.assertEqual(10_000, decisions)


class PumpPositioningTests(unittest.TestCase):
    def setUp(self) -> None:
        self.axes = [ActuatorState(name) for name in ("axis_x", "axis_y", "axis_z")]

    def test_no_move_is_immediate(self) -> None:
        plan = position_pump(self.axes, (0, 0, 0), 500)
        self.assertEqual(500, plan.start_ms)
        self.assertEqual(500, plan.end_ms)
        self.assertEqual([[], [], []], [a.on_intervals for a in self.axes])

    def test_full_stroke_takes_ten_seconds(self) -> None:
        plan = position_pump(self.axes, (100, 50, 0), 0)
        self.assertEqual(10_000, plan.end_ms)
        self.assertEqual([(0, 10_000)], self.axes[0].on_intervals)
        self.assertEqual([(0, 5_000)], self.axes[1].on_intervals)
        self.assertEqual([], self.axes[2].on_intervals)
        self.assertEqual([100.0, 50.0, 0.0], [a.position_mm for a in self.axes])

    def test_target_outside_stroke(self) -> None:
        for targets in ((101, 0, 0), (0, -1, 0)):
            with self.subTest(targets=targets):
                with self.assertRaises(StrokeError):
                    position_pump(self.axes, targets, 0)

    def test_wait_leaves_every_axis_untouched(self) -> None:
        self.axes[2].record_on(0, 120_000)
        outcome = position_pump(self.axes, (50, 50, 10), 120_000)
        self.assertEqual(WaitUntil(1_201_000), outcome)
        self.assertEqual([0.0, 0.0, 0.0], [a.position_mm for a in self.axes])
        self.assertEqual([], self.axes[0].on_intervals)
        self.assertEqual([(0, 120_000)], self.axes[2].on_intervals)


class SamplingMechanismTests(unittest.TestCase):
    def setUp(self) -> None:
        self.site = load_site_file(DEMO_SITE)
        self.mechanism = SamplingMechanism()

    def _positioned(self, depth_cm: float) -> int:
        plan = self.mechanism.position_pump(self.mechanism.pump_targets(depth_cm), 0)
        return plan.end_ms

    def _sample(self, slot: int = 0) -> SoilSample:
        now = self._positioned(2)
        sample = self.mechanism.run_suction(self.site, (15, 15), 2, 20_000, now)
        self.mechanism.deposit_sample(sample, slot)
        return sample

    def test_suction_collects_half_a_gram_per_second(self) -> None:
        now = self._positioned(2)
        self.assertEqual(5_000, now)
        sample = self.mechanism.run_suction(self.site, (15, 15), 2, 20_000, now)
        self.assertEqual(10.0, sample.mass_g)
        self.assertEqual(2.0, sample.composition.protein_mg_per_g)
        self.assertFalse(sample.sterile_chain)
        self.assertEqual([(5_000, 25_000)], self.mechanism.suction.on_intervals)
        self.assertEqual(20_000, self.mechanism.suction_ms_for(10.0))

    def test_reach_limit(self) -> None:
        now = self._positioned(6)
        self.assertEqual(0.5, self.mechanism.run_suction(self.site, (15, 15), 6, 1_000, now).mass_g)
        now = self.mechanism.position_pump(self.mechanism.pump_targets(9), now + 1_000).end_ms
        with self.assertRaises(ReachError):
            self.mechanism.run_suction(self.site, (15, 15), 9, 1_000, now)

    def test_suction_requires_positioned_pump(self) -> None:
        with self.assertRaises(PumpNotPositioned):
            self.mechanism.run_suction(self.site, (15, 15), 2, 1_000, 0)

    def test_suction_duty_budget(self) -> None:
        now = self._positioned(2)
        self.mechanism.run_suction(self.site, (15, 15), 2, 120_000, now)
        with self.assertRaises(DutyBudgetExhausted) as ctx:
            self.mechanism.run_suction(self.site, (15, 15), 2, 1, now + 120_000)
        self.assertEqual(now + 1_200_001, ctx.exception.wait_until_ms)

    def test_deposit_rules(self) -> None:
        self._sample(0)
        sample = self.mechanism.turntable.slots[0].sample
        with self.assertRaises(SlotOccupied):
            self.mechanism.deposit_sample(sample, 0)
        with self.assertRaises(SlotMisaligned):
            self.mechanism.deposit_sample(sample, 1)
        with self.assertRaises(SlotMisaligned):
            self.mechanism.deposit_sample(sample, 5)
        self.mechanism.turntable.slots[1].occupied = False
        self.mechanism.advance_turntable(1)
        with self.assertRaises(EmptyBeaker):
            self.mechanism.deposit_sample(sample, 1)

    def test_open_cover_at_alignment_contaminates_until_replaced(self) -> None:
        self.mechanism.open_cover(1)
        self.mechanism.advance_turntable(1)
        self._sample(1)
        slot = self.mechanism.turntable.slots[1]
        self.assertTrue(slot.contaminated)
        self.assertTrue(slot.sample.contaminated)
        self.mechanism.advance_turntable(3)
        self.assertTrue(self.mechanism.turntable.slots[1].contaminated)
        self.mechanism.replace_beaker(1)
        self.assertFalse(self.mechanism.turntable.slots[1].contaminated)
        self.assertIsNone(self.mechanism.turntable.slots[1].sample)

    def test_closed_cover_keeps_sample_clean(self) -> None:
        self._sample(0)
        self.assertFalse(self.mechanism.turntable.slots[0].contaminated)

    def test_turntable_steps_track_advances(self) -> None:
        rng = np.random.default_rng(9)
        total = 0
        for _ in range(50):
            n = int(rng.integers(1, 8))
            table = self.mechanism.advance_turntable(n)
            total += n
            self.assertEqual(total % 3, table.current_slot)
            self.assertEqual(200 * total, table.motor_steps_taken)
        for n in (0, -1):
            with self.assertRaises(MechanismError):
                self.mechanism.advance_turntable(n)
        self.assertEqual(1_000, self.mechanism.rotation_ms(1))

    def test_realign_returns_to_slot_zero(self) -> None:
        self.mechanism.advance_turntable(2)
        self.assertEqual(1, self.mechanism.realign())
        self.assertEqual(0, self.mechanism.turntable.current_slot)
        self.assertEqual(0, self.mechanism.realign())

    def test_dispense(self) -> None:
        with self.assertRaises(EmptyBeaker):
            self.mechanism.dispense("ninhydrin", 20, 0)
        self._sample(0)
        record = self.mechanism.dispense("ninhydrin", 20, 0)
        self.assertEqual(4_000, record.duration_ms)
        self.assertEqual(480.0, self.mechanism.reservoirs["ninhydrin"])
        self.assertEqual([("ninhydrin", 20)], self.mechanism.turntable.slots[0].prep)
        with self.assertRaises(MechanismError):
            self.mechanism.dispense("acid", 5, 0)
        with self.assertRaises(MechanismError):
            self.mechanism.dispense("water", 0, 0)

    def test_turntable_is_locked_while_dispensing(self) -> None:
        self._sample(0)
        record = self.mechanism.begin_dispense("benedict", 20, 0)
        self.assertEqual("dispense", self.mechanism.turntable.busy)
        with self.assertRaises(TurntableBusy):
            self.mechanism.advance_turntable(1)
        with self.assertRaises(TurntableBusy):
            self.mechanism.dispense("water", 10, 0)
        self.assertEqual(0, self.mechanism.turntable.current_slot)
        self.mechanism.finish_dispense()
        self.assertIsNone(self.mechanism.turntable.busy)
        self.assertEqual(4_000, record.duration_ms)
        self.assertEqual(1, self.mechanism.advance_turntable(1).current_slot)
        with self.assertRaises(MechanismError):
            self.mechanism.finish_dispense()

    def test_reservoir_runs_dry(self) -> None:
        self.mechanism = SamplingMechanism(MechanismConfig(reagent_reservoir_ml=30))
        self._sample(0)
        self.mechanism.dispense("benedict", 20, 0)
        with self.assertRaises(ReservoirEmpty):
            self.mechanism.dispense("benedict", 20, 0)

    def test_reach_must_exceed_five_centimetres(self) -> None:
        with self.assertRaises(SpecValueError):
            MechanismConfig(max_reach_cm=5)


class MergeSamplesTests(unittest.TestCase):
    def test_composite_conserves_analyte_mass(self) -> None:
        top = SoilSample(5.0, (15, 15), 2, SoilComposition(protein_mg_per_g=2.0, ph=7.0), True)
        deep = SoilSample(3.0, (15, 15), 6, SoilComposition(protein_mg_per_g=0.4, ph=8.0), True, contaminated=True)
        merged = merge_samples([top, deep])
        self.assertEqual(8.0, merged.mass_g)
        self.assertAlmostEqual(5.0 * 2.0 + 3.0 * 0.4, merged.composition.protein_mg_per_g * merged.mass_g)
        self.assertAlmostEqual(7.375, merged.composition.ph)
        self.assertEqual(6, merged.depth_cm)
        self.assertTrue(merged.contaminated)
        self.assertTrue(merged.sterile_chain)

    def test_nothing_to_merge(self) -> None:
        with self.assertRaises(MechanismError):
            merge_samples([])


if __name__ == "__main__":
    unittest.main()
