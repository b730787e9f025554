from __future__ import annotations

from copy import deepcopy

METHOD_VERSION = "v1.0.0"

# "2 minutes on, 18 minutes off", enforced as a rolling window per actuator.
DUTY_POLICY: dict = {
    "window_ms": 1_200_000,
    "max_on_ms": 120_000,
}

MECHANISM_DEFAULTS: dict = {
    "stroke_mm": 100.0,
    "actuator_speed_mm_per_s": 10.0,
    "collection_rate_g_per_s": 0.5,
    "max_reach_cm": 8.0,
    "mm_per_depth_cm": 10.0,
    "sample_point_mm": 50.0,
    "slot_count": 3,
    "steps_per_slot": 200,
    "stepper_steps_per_s": 200,
    "deposit_ms": 2000,
    "dispense_ml_per_s": 5.0,
    "reagent_reservoir_ml": 500.0,
    "water_reservoir_ml": 1000.0,
    "ph_settle_ms": 5000,
    "transport_ms": 5000,
}

ROVER_DEFAULTS: dict = {
    "speed_m_per_s": 0.1,
    "max_attempts": 3,
}

# "Wait 2 seconds for sensor setup", then one frame per period.
POLLER_DEFAULTS: dict = {
    "warmup_ms": 2000,
    "period_ms": 1000,
    "rock_radius_m": 0.5,
}

STEP_TABLE: list[dict] = [
    {"step": 1, "event": "deploy", "label": "deploy rover at the exploration site"},
    {"step": 2, "event": "survey", "label": "survey terrain with cameras and sensors"},
    {"step": 3, "event": "select_region", "label": "select sampling region and drive there"},
    {"step": 4, "event": "init_gear", "label": "initialize soil extraction gear"},
    {"step": 5, "event": "measure_ph", "label": "measure initial pH at the sample location"},
    {"step": 6, "event": "suction", "label": "suction-collect soil at one depth"},
    {"step": 7, "event": "deposit", "label": "deposit composite sample into a beaker"},
    {"step": 8, "event": "iterate", "label": "iterate to the next depth"},
    {"step": 9, "event": "rotate", "label": "rotate sample plate to the next beaker"},
    {"step": 10, "event": "reposition", "label": "retract gear and reposition rover"},
    {"step": 11, "event": "transport", "label": "transport samples to the analysis station"},
    {"step": 12, "event": "dispense", "label": "dispense reagent and water"},
    {"step": 13, "event": "capture_color", "label": "capture reaction colour"},
    {"step": 14, "event": "classify_sample", "label": "classify sample with the life decision tree"},
    {"step": 15, "event": "position_rock", "label": "position over a rock"},
    {"step": 16, "event": "rock_sensors", "label": "collect multi-sensor rock data"},
    {"step": 17, "event": "classify_rock", "label": "classify rock"},
    {"step": 18, "event": "transmit", "label": "transmit summary to the ground station"},
]

EXIT_CODES: dict[str, int] = {
    "ok": 0,
    "failure": 1,
    "config_error": 2,
    "aborted": 3,
}


def duty_policy_payload() -> dict:
    return deepcopy(DUTY_POLICY)


def step_table_payload() -> list[dict]:
    return deepcopy(STEP_TABLE)
