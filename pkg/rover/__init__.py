from .assay_engine import (
    AssayConfig,
    AssayError,
    AssayProtocolParams,
    ColorChart,
    MissingReagent,
    interpret_color,
    load_assay_params,
    load_assay_params_file,
    load_assay_sections,
    reaction_color,
    run_assay,
)
from .clock import VirtualClock
from .common import (
    SpecError,
    SpecSyntaxError,
    SpecValueError,
    format_number,
    parse_endpoint,
    parse_float,
    parse_int,
    parse_sections,
    read_text,
)
from .env_model import SiteError, gas_at, load_site, load_site_file, rock_at, site_to_text, soil_at
from .life_classifier import (
    BaselineConfig,
    UnknownClassifier,
    classify_life,
    classify_rock,
    is_registered,
    load_baseline_section,
    register_classifier,
    registered_classifiers,
    unregister_classifier,
)
from .logbook import LogFormatError, LogRecord, MissionLog, format_record, parse_log, parse_record, read_log
from .sampling_mechanism import (
    ALLOWED,
    AXES,
    SUCTION,
    ActuatorState,
    Allowed,
    DutyBudget,
    DutyBudgetExhausted,
    MechanismConfig,
    MechanismError,
    SamplingMechanism,
    WaitUntil,
    duty_check,
    merge_samples,
    on_time_in_window,
    peak_window_on_ms,
    position_pump,
)
from .sensor_suite import (
    SensorCalibration,
    SensorError,
    SensorPoller,
    capture_image,
    gas_ppm,
    load_calibration,
    load_calibration_file,
    map_color_raw,
    poll_frame,
    read_ph,
)
from .types import (
    AssayKind,
    AssayResult,
    ImageCapture,
    LifeClass,
    LifeVerdict,
    Point,
    RockClass,
    RockType,
    SensorFrame,
    SiteModel,
    SoilComposition,
    SoilSample,
    distance,
)

__all__ = [
    "ALLOWED",
    "AXES",
    "SUCTION",
    "ActuatorState",
    "Allowed",
    "AssayConfig",
    "AssayError",
    "AssayKind",
    "AssayProtocolParams",
    "AssayResult",
    "BaselineConfig",
    "ColorChart",
    "DutyBudget",
    "DutyBudgetExhausted",
    "ImageCapture",
    "LifeClass",
    "LifeVerdict",
    "LogFormatError",
    "LogRecord",
    "MechanismConfig",
    "MechanismError",
    "MissingReagent",
    "MissionLog",
    "Point",
    "RockClass",
    "RockType",
    "SamplingMechanism",
    "SensorCalibration",
    "SensorError",
    "SensorFrame",
    "SensorPoller",
    "SiteError",
    "SiteModel",
    "SoilComposition",
    "SoilSample",
    "SpecError",
    "SpecSyntaxError",
    "SpecValueError",
    "UnknownClassifier",
    "VirtualClock",
    "WaitUntil",
    "capture_image",
    "classify_life",
    "classify_rock",
    "distance",
    "duty_check",
    "format_number",
    "format_record",
    "gas_at",
    "gas_ppm",
    "interpret_color",
    "is_registered",
    "load_assay_params",
    "load_assay_params_file",
    "load_assay_sections",
    "load_baseline_section",
    "load_calibration",
    "load_calibration_file",
    "load_site",
    "load_site_file",
    "map_color_raw",
    "merge_samples",
    "on_time_in_window",
    "parse_endpoint",
    "parse_float",
    "parse_int",
    "parse_log",
    "parse_record",
    "parse_sections",
    "peak_window_on_ms",
    "poll_frame",
    "position_pump",
    "reaction_color",
    "read_log",
    "read_ph",
    "read_text",
    "register_classifier",
    "registered_classifiers",
    "rock_at",
    "run_assay",
    "site_to_text",
    "soil_at",
    "unregister_classifier",
]
