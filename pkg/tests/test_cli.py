from __future__ import annotations

import asyncio
import contextlib
import io
import socket
import tempfile
import threading
import unittest
from pathlib import Path

from cli import main
from rover import read_log
from telemetry import GroundStation
from telemetry.station import ABORT_NAME

DEMO_PLAN = Path("config/demo_plan.conf")
DEMO_SITE = Path("config/demo_site.conf").resolve()
TYPED_EVENTS = {"SENSOR_FRAME", "ASSAY_RESULT", "LIFE_VERDICT"}


def run_cli(*argv: str) -> tuple[int, str, str]:
    stdout, stderr = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
        code = main(list(argv))
    return code, stdout.getvalue(), stderr.getvalue()


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class StationThread:
    """Ground station on its own event loop, for driving the synchronous CLI against it."""

    def __init__(self, store: Path) -> None:
        self.loop = asyncio.new_event_loop()
        self.thread = threading.Thread(target=self.loop.run_forever, daemon=True)
        self.station = GroundStation("127.0.0.1", 0, store, abort_poll_s=0.05)

    def __enter__(self) -> GroundStation:
        self.thread.start()
        asyncio.run_coroutine_threadsafe(self.station.start(), self.loop).result(5)
        return self.station

    def __exit__(self, *exc_info) -> None:
        asyncio.run_coroutine_threadsafe(self.station.stop(), self.loop).result(5)
        self.loop.call_soon_threadsafe(self.loop.stop)
        self.thread.join(5)
        self.loop.close()


class CliRunTests(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self) -> None:
        self._tmp.cleanup()

    def _rock_plan(self) -> Path:
        plan = self.tmp / "rock_plan.conf"
        plan.write_text(f"[mission]\nsite = {DEMO_SITE}\nseed = 8\n\n[rock shale]\nid = shale_01\n", encoding="utf-8")
        return plan

    def test_demo_run_writes_log_and_summary(self) -> None:
        logs = self.tmp / "logs"
        code, out, _ = run_cli("run", "--plan", str(DEMO_PLAN), "--log", str(logs))
        self.assertEqual(0, code)
        self.assertTrue((logs / "mission.log").is_file())
        self.assertTrue((logs / "summary.json").is_file())
        self.assertTrue(out.startswith("mission site=demo_site seed=42 status=completed"))
        self.assertIn("target name=albumin_1 verdict=Extant", out)

        code, first, _ = run_cli("report", "--log", str(logs))
        self.assertEqual(0, code)
        self.assertEqual(out, first)
        self.assertEqual(first, run_cli("report", "--log", str(logs))[1])

        code, replayed, _ = run_cli("replay", "--log", str(logs))
        self.assertEqual(0, code)
        self.assertEqual((logs / "summary.json").read_text(encoding="utf-8"), replayed)

    def test_seed_override(self) -> None:
        code, out, _ = run_cli("run", "--plan", str(self._rock_plan()), "--seed", "77", "--log", str(self.tmp))
        self.assertEqual(0, code)
        self.assertIn("seed=77", out.splitlines()[0])
        code, _, err = run_cli("run", "--plan", str(self._rock_plan()), "--seed", "-1", "--log", str(self.tmp))
        self.assertEqual(2, code)
        self.assertIn("config error", err)

    def test_missing_site_is_config_error(self) -> None:
        plan = self.tmp / "plan.conf"
        plan.write_text("[mission]\nseed = 1\n[rock r]\nid = shale_01\n", encoding="utf-8")
        self.assertEqual(2, run_cli("run", "--plan", str(plan), "--log", str(self.tmp))[0])
        code, _, err = run_cli("run", "--plan", str(plan), "--site", str(self.tmp / "nope.conf"), "--log", str(self.tmp))
        self.assertEqual(2, code)
        self.assertIn("config error", err)

    def test_out_of_extent_target_writes_config_error_log(self) -> None:
        plan = self.tmp / "plan.conf"
        plan.write_text(
            f"[mission]\nsite = {DEMO_SITE}\nseed = 1\n[target far]\nposition = 500 500\ndepths = 2\n",
            encoding="utf-8",
        )
        self.assertEqual(2, run_cli("run", "--plan", str(plan), "--log", str(self.tmp))[0])
        records = read_log(self.tmp / "mission.log")
        self.assertEqual(("MISSION_END", "config_error"), (records[-1].event, records[-1]["status"]))

    def test_report_on_empty_directory(self) -> None:
        code, _, err = run_cli("report", "--log", str(self.tmp))
        self.assertEqual(2, code)
        self.assertIn("mission.log", err)

    def test_unreachable_telemetry_endpoint(self) -> None:
        port = free_port()
        code, _, err = run_cli(
            "run", "--plan", str(self._rock_plan()), "--log", str(self.tmp), "--telemetry", f"127.0.0.1:{port}"
        )
        self.assertEqual(2, code)
        self.assertIn("unreachable", err)

    def test_groundstation_port_in_use(self) -> None:
        with socket.socket() as busy:
            busy.bind(("127.0.0.1", 0))
            busy.listen()
            port = busy.getsockname()[1]
            code, _, err = run_cli("groundstation", "--listen", f"127.0.0.1:{port}", "--store", str(self.tmp))
        self.assertEqual(2, code)
        self.assertIn("cannot listen", err)


class CliTelemetryTests(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        self.store = self.tmp / "store"
        self.logs = self.tmp / "logs"
        self.plan = self.tmp / "plan.conf"
        self.plan.write_text(
            f"[mission]\nsite = {DEMO_SITE}\nseed = 2\n\n[rock shale]\nid = shale_01\n\n[rock basalt]\nid = basalt_01\n",
            encoding="utf-8",
        )

    def tearDown(self) -> None:
        self._tmp.cleanup()

    def test_run_streams_every_record_in_order(self) -> None:
        with StationThread(self.store) as station:
            code, _, _ = run_cli(
                "run", "--plan", str(self.plan), "--log", str(self.logs), "--telemetry", f"127.0.0.1:{station.bound_port}"
            )
        self.assertEqual(0, code)
        mission = read_log(self.logs / "mission.log")
        stored = read_log(self.store / "rover-0001.log")
        self.assertEqual([r.event for r in mission], [r.event for r in stored if r.event not in TYPED_EVENTS])
        self.assertEqual(
            len([r for r in mission if r.event == "FRAME"]),
            len([r for r in stored if r.event == "SENSOR_FRAME"]),
        )
        self.assertEqual(list(range(len(stored))), [r.seq for r in stored])

    def test_abort_dropped_before_connect_stops_mission(self) -> None:
        self.store.mkdir(parents=True)
        (self.store / ABORT_NAME).write_text("operator\n", encoding="utf-8")
        with StationThread(self.store) as station:
            code, _, err = run_cli(
                "run", "--plan", str(self.plan), "--log", str(self.logs), "--telemetry", f"127.0.0.1:{station.bound_port}"
            )
        self.assertEqual(3, code)
        self.assertIn("aborted", err)
        records = read_log(self.logs / "mission.log")
        self.assertEqual(["MISSION_START", "ABORT", "MISSION_END"], [r.event for r in records])
        self.assertEqual("aborted", records[-1]["status"])


if __name__ == "__main__":
    unittest.main()
