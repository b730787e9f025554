from __future__ import annotations

import argparse
import asyncio
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from mission import MAX_SEED, MissionConfigError, load_params_file, load_plan_file, run_mission
from mission_policy import EXIT_CODES
from report import MISSION_LOG_NAME, SUMMARY_NAME, ReplayError, render_report, replay_dir, write_summary
from rover import SpecError, load_calibration_file, load_site_file, parse_endpoint
from rover.logbook import LogFormatError
from telemetry import TelemetryLink, serve

logger = logging.getLogger("astrolab")

ROOT = Path(__file__).resolve().parent
CONFIG_ENV = "ASTROLAB_CONFIG_DIR"
CALIBRATION_NAME = "calibration.conf"
PARAMS_NAME = "params.conf"

OK = EXIT_CODES["ok"]
FAILURE = EXIT_CODES["failure"]
CONFIG_ERROR = EXIT_CODES["config_error"]
ABORTED = EXIT_CODES["aborted"]


def config_dir() -> Path:
    override = os.environ.get(CONFIG_ENV)
    return Path(override) if override else ROOT / "config"


def _endpoint(text: str) -> tuple[str, int]:
    try:
        return parse_endpoint(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def cmd_run(args: argparse.Namespace) -> int:
    configs = config_dir()
    calib_path = Path(args.calib) if args.calib else configs / CALIBRATION_NAME
    params_path = Path(args.params) if args.params else configs / PARAMS_NAME
    try:
        plan = load_plan_file(args.plan)
        if args.seed is not None:
            if not 0 <= args.seed <= MAX_SEED:
                raise SpecError(f"seed {args.seed} is not an unsigned 64-bit integer")
            plan = replace(plan, seed=args.seed)
        site_path = Path(args.site) if args.site else plan.site_path()
        if site_path is None:
            raise SpecError("no site given on the command line or in the plan")
        site = load_site_file(site_path)
        calib = load_calibration_file(calib_path)
        params = load_params_file(params_path)
    except (SpecError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return CONFIG_ERROR

    endpoint = args.telemetry or plan.telemetry
    link: TelemetryLink | None = None
    if endpoint is not None:
        link = TelemetryLink(*endpoint)
        try:
            link.start()
        except OSError as exc:
            print(f"config error: telemetry endpoint {endpoint[0]}:{endpoint[1]} unreachable: {exc}", file=sys.stderr)
            return CONFIG_ERROR

    log_dir = Path(args.log)
    try:
        result = run_mission(
            plan,
            site,
            calib,
            params,
            abort_check=link.abort_reason if link else None,
            listeners=(link.on_record,) if link else (),
        )
    except MissionConfigError as exc:
        if exc.log is not None:
            exc.log.write(log_dir / MISSION_LOG_NAME)
        print(f"config error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    finally:
        if link is not None:
            link.close()

    result.log.write(log_dir / MISSION_LOG_NAME)
    write_summary(result.summary, log_dir / SUMMARY_NAME)
    sys.stdout.write(render_report(result.summary))
    if result.status == "aborted":
        print("mission aborted by ground station", file=sys.stderr)
        return ABORTED
    return OK


def cmd_report(args: argparse.Namespace) -> int:
    try:
        summary = replay_dir(args.log)
    except (ReplayError, LogFormatError, OSError) as exc:
        print(f"report error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    sys.stdout.write(render_report(summary))
    return OK


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        summary = replay_dir(args.log)
    except (ReplayError, LogFormatError, OSError) as exc:
        print(f"replay error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    print(json.dumps(summary.model_dump(mode="json"), indent=2, sort_keys=True))
    return OK


def cmd_groundstation(args: argparse.Namespace) -> int:
    host, port = args.listen
    try:
        asyncio.run(serve(host, port, args.store))
    except OSError as exc:
        print(f"ground station error: cannot listen on {host}:{port}: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    except KeyboardInterrupt:
        logger.info("ground station interrupted")
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="astrolab", description="Rover life-detection mission simulator.")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug diagnostics on stderr.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run a mission plan and write its log.")
    run.add_argument("--plan", required=True, help="Mission plan file.")
    run.add_argument("--site", help="Site file; defaults to the plan's site key.")
    run.add_argument("--calib", help=f"Sensor calibration; defaults to ${CONFIG_ENV}/{CALIBRATION_NAME}.")
    run.add_argument("--params", help=f"Assay and mechanism parameters; defaults to ${CONFIG_ENV}/{PARAMS_NAME}.")
    run.add_argument("--seed", type=int, help="Replace the plan seed.")
    run.add_argument("--log", default="logs", help="Directory for mission.log and summary.json.")
    run.add_argument("--telemetry", type=_endpoint, help="Ground station HOST:PORT.")
    run.set_defaults(handler=cmd_run)

    report = sub.add_parser("report", help="Print the summary rebuilt from a mission log.")
    report.add_argument("--log", required=True, help="Directory holding mission.log.")
    report.set_defaults(handler=cmd_report)

    replay = sub.add_parser("replay", help="Print the replayed summary as JSON.")
    replay.add_argument("--log", required=True, help="Directory holding mission.log.")
    replay.set_defaults(handler=cmd_replay)

    station = sub.add_parser("groundstation", help="Run the ground station until interrupted.")
    station.add_argument("--listen", type=_endpoint, required=True, help="HOST:PORT to listen on.")
    station.add_argument("--store", required=True, help="Directory for per-connection store files.")
    station.set_defaults(handler=cmd_groundstation)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except Exception:
        logger.exception("unexpected failure")
        return FAILURE


if __name__ == "__main__":
    raise SystemExit(main())
