from __future__ import annotations

import contextlib
import io
import runpy
import tempfile
import unittest
from pathlib import Path

from mission import load_params_file, load_plan_file, run_mission
from rover import LogRecord, load_calibration_file, load_site_file

SCRIPT_PATH = Path("scripts/check_mission_log.py")


def actuator(seq: int, start: int, end: int, name: str = "suction") -> LogRecord:
    return LogRecord(t_ms=end, seq=seq, event="ACTUATOR", fields=(("id", name), ("start", str(start)), ("end", str(end))))


class CheckMissionLogTests(unittest.TestCase):
    def _load_module(self) -> dict:
        return runpy.run_path(str(SCRIPT_PATH))

    def test_demo_log_passes(self) -> None:
        plan = load_plan_file("config/demo_plan.conf")
        result = run_mission(
            plan,
            load_site_file(plan.site_path()),
            load_calibration_file("config/calibration.conf"),
            load_params_file("config/params.conf"),
        )
        main = self._load_module()["main"]
        with tempfile.TemporaryDirectory() as tmp:
            result.log.write(Path(tmp) / "mission.log")
            out = io.StringIO()
            with contextlib.redirect_stdout(out):
                code = main(["--log", tmp])
        self.assertEqual(0, code)
        self.assertIn("Log check passed.", out.getvalue())
        self.assertIn("suction", out.getvalue().splitlines()[1])

    def test_duty_violation_is_reported(self) -> None:
        duty_violations = self._load_module()["duty_violations"]
        ok = [actuator(0, 0, 60_000), actuator(1, 1_140_000, 1_200_000)]
        self.assertEqual([], duty_violations(ok, 1_200_000, 120_000))
        tight = [actuator(0, 0, 60_000), actuator(1, 1_139_999, 1_200_000)]
        errors = duty_violations(tight, 1_200_000, 120_000)
        self.assertEqual(1, len(errors))
        self.assertIn("120001 ms on", errors[0])

    def test_overlapping_and_empty_intervals(self) -> None:
        duty_violations = self._load_module()["duty_violations"]
        errors = duty_violations([actuator(0, 0, 10), actuator(1, 5, 20), actuator(2, 30, 30)], 1_200_000, 120_000)
        self.assertEqual(2, len(errors))
        self.assertIn("empty on-interval", errors[0])
        self.assertIn("overlapping", errors[1])

    def test_ordering_violations(self) -> None:
        ordering_violations = self._load_module()["ordering_violations"]
        records = [
            LogRecord(t_ms=10, seq=0, event="MISSION_START"),
            LogRecord(t_ms=5, seq=2, event="STEP"),
        ]
        errors = ordering_violations(records)
        self.assertEqual(2, len(errors))

    def test_missing_log_fails(self) -> None:
        main = self._load_module()["main"]
        with tempfile.TemporaryDirectory() as tmp:
            out = io.StringIO()
            with contextlib.redirect_stdout(out):
                code = main(["--log", tmp])
        self.assertEqual(1, code)
        self.assertIn("not found", out.getvalue())


if __name__ == "__main__":
    unittest.main()
