from __future__ import annotations

import json
import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

from mission import load_params_file, parse_plan, run_mission
from models import StationStatus
from rover import load_calibration_file, load_site_file

try:
    from fastapi.testclient import TestClient
    from api.main import app

    FASTAPI_AVAILABLE = True
except ImportError:
    FASTAPI_AVAILABLE = False
    TestClient = None  # type: ignore[assignment]
    app = None  # type: ignore[assignment]


@unittest.skipUnless(FASTAPI_AVAILABLE, "fastapi is not installed")
class ApiContractTests(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        root = Path(self._tmp.name)
        self.store_dir = root / "store"
        self.log_dir = root / "logs"
        self.store_dir.mkdir()

        status = StationStatus(
            listen="127.0.0.1:7400",
            started_at="2026-10-01T00:00:00+00:00",
            updated_at="2026-10-01T00:05:00+00:00",
            accepted_total=2,
        )
        (self.store_dir / "status.json").write_text(json.dumps(status.model_dump(mode="json")), encoding="utf-8")
        (self.store_dir / "rover-0001.log").write_text(
            "t=0 seq=0 ev=MISSION_START site=demo_site seed=1\nt=5 seq=1 ev=MISSION_END status=completed\n",
            encoding="utf-8",
        )
        (self.store_dir / "notes.txt").write_text("ignored", encoding="utf-8")

        plan = parse_plan("[mission]\nseed = 1\n[rock shale]\nid = shale_01\n")
        result = run_mission(
            plan,
            load_site_file("config/demo_site.conf"),
            load_calibration_file("config/calibration.conf"),
            load_params_file("config/params.conf"),
        )
        result.log.write(self.log_dir / "mission.log")

        env = {"ASTROLAB_STORE_DIR": str(self.store_dir), "ASTROLAB_LOG_DIR": str(self.log_dir)}
        self._env = patch.dict(os.environ, env)
        self._env.start()
        self.client = TestClient(app)

    def tearDown(self) -> None:
        self._env.stop()
        self._tmp.cleanup()

    def test_station_status_endpoint(self) -> None:
        resp = self.client.get("/v1/station/status")
        self.assertEqual(200, resp.status_code)
        body = resp.json()
        self.assertEqual("127.0.0.1:7400", body["listen"])
        self.assertEqual(2, body["accepted_total"])
        self.assertEqual([], body["connections"])

    def test_station_status_missing(self) -> None:
        (self.store_dir / "status.json").unlink()
        self.assertEqual(404, self.client.get("/v1/station/status").status_code)

    def test_store_listing_and_records(self) -> None:
        resp = self.client.get("/v1/store/files")
        self.assertEqual(200, resp.status_code)
        self.assertEqual(["rover-0001.log"], [item["name"] for item in resp.json()["items"]])

        resp = self.client.get("/v1/store/rover-0001.log/records")
        self.assertEqual(200, resp.status_code)
        items = resp.json()["items"]
        self.assertEqual(["MISSION_START", "MISSION_END"], [item["event"] for item in items])
        self.assertEqual({"site": "demo_site", "seed": "1"}, items[0]["fields"])

    def test_store_records_rejects_unknown_names(self) -> None:
        self.assertEqual(404, self.client.get("/v1/store/notes.txt/records").status_code)
        self.assertEqual(404, self.client.get("/v1/store/rover-0002.log/records").status_code)

    def test_malformed_store_file(self) -> None:
        (self.store_dir / "rover-0003.log").write_text("garbage\n", encoding="utf-8")
        self.assertEqual(500, self.client.get("/v1/store/rover-0003.log/records").status_code)

    def test_mission_summary_endpoint(self) -> None:
        resp = self.client.get("/v1/missions/summary")
        self.assertEqual(200, resp.status_code)
        body = resp.json()
        self.assertEqual("completed", body["status"])
        self.assertEqual("Shale", body["rocks"][0]["rock_type"])
        self.assertTrue(body["rocks"][0]["fossil_prediction"])

    def test_mission_summary_without_log(self) -> None:
        (self.log_dir / "mission.log").unlink()
        self.assertEqual(404, self.client.get("/v1/missions/summary").status_code)

    def test_sensor_catalog_endpoint(self) -> None:
        resp = self.client.get("/v1/sensors/catalog")
        self.assertEqual(200, resp.status_code)
        sensors = [item["sensor"] for item in resp.json()["items"]]
        self.assertIn("MQ137", sensors)
        self.assertIn("TCS3200", sensors)

    def test_methodology_endpoint(self) -> None:
        resp = self.client.get("/v1/methodology")
        self.assertEqual(200, resp.status_code)
        body = resp.json()
        self.assertEqual("v1.0.0", body["method_version"])
        self.assertEqual(18, len(body["steps"]))
        self.assertEqual(1_200_000, body["duty_policy"]["window_ms"])
        self.assertIn("limitations", body)

    def test_abort_command_drops_file(self) -> None:
        resp = self.client.post("/v1/commands/abort", json={"reason": "dust storm"})
        self.assertEqual(202, resp.status_code)
        self.assertEqual({"queued": True, "reason": "dust storm"}, resp.json())
        self.assertEqual("dust storm\n", (self.store_dir / "ABORT").read_text(encoding="utf-8"))

    def test_abort_reason_is_validated(self) -> None:
        self.assertEqual(422, self.client.post("/v1/commands/abort", json={"reason": ""}).status_code)


if __name__ == "__main__":
    unittest.main()
