"""Bio-sensor transfer functions and the per-cycle frame poller.

Raw transducer signals are synthesized from site ground truth through the
inverse transfer functions, perturbed by seeded zero-mean uniform noise, and
converted back through the forward functions below. With zero noise the
round trip is the identity up to floating point.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mission_policy import POLLER_DEFAULTS

from .common import (
    Section,
    SpecSyntaxError,
    SpecValueError,
    clamp,
    parse_float,
    parse_floats,
    parse_int,
    parse_sections,
    read_text,
    require_range,
    round_half_away,
)
from .env_model import gas_at, rock_at, soil_at
from .types import RGB, ImageCapture, Point, RockProperties, SensorFrame, SiteModel, distance

logger = logging.getLogger(__name__)

GAS_SECTIONS = ("mq135", "mq137", "mq138")
CALIBRATION_SECTIONS = ("color", *GAS_SECTIONS, "mq3", "hr202", "yl69", "ph", "poller")

# Fixed draw layout so the noise stream does not depend on which amplitudes are set.
_NOISE_SLOTS = ("r", "g", "b", "co2", "formaldehyde", "ammonia", "humidity", "moisture", "ph")


class SensorError(Exception):
    pass


class SignalFault(SensorError):
    pass


class ProbeNotDeployed(SensorError):
    pass


class RoverNotAtRock(SensorError):
    pass


@dataclass(frozen=True)
class GasCurve:
    """Metal-oxide sensor model: ppm = curve_a * (Rs/Ro) ** curve_b."""

    rl_ohms: float
    ro_ohms: float
    curve_a: float
    curve_b: float
    vc_volts: float = 5.0
    noise_volts: float = 0.0

    def __post_init__(self) -> None:
        if self.rl_ohms <= 0 or self.ro_ohms <= 0:
            raise SpecValueError("rl_ohms/ro_ohms", "load and baseline resistance must be positive")
        if self.vc_volts <= 0:
            raise SpecValueError("vc_volts", "supply voltage must be positive")
        if self.curve_a <= 0:
            raise SpecValueError("curve_a", "power-law coefficient must be positive")
        if self.curve_b == 0:
            raise SpecValueError("curve_b", "power-law exponent must be non-zero")


@dataclass(frozen=True)
class LinearChannel:
    raw_min: float
    raw_max: float
    noise: float = 0.0


@dataclass(frozen=True)
class SensorCalibration:
    color_f_min: tuple[float, float, float]
    color_f_max: tuple[float, float, float]
    mq135: GasCurve
    mq137: GasCurve
    mq138: GasCurve
    hr202: LinearChannel
    yl69: LinearChannel
    alcohol_threshold: int = 512
    alcohol_max_level: int = 1023
    color_noise_hz: float = 0.0
    ph_noise: float = 0.0
    warmup_ms: int = POLLER_DEFAULTS["warmup_ms"]
    period_ms: int = POLLER_DEFAULTS["period_ms"]
    rock_radius_m: float = POLLER_DEFAULTS["rock_radius_m"]

    def __post_init__(self) -> None:
        for lo, hi in zip(self.color_f_min, self.color_f_max):
            if hi <= lo:
                raise SpecValueError("f_max", "colour f_max must exceed f_min on every channel")
        if self.hr202.raw_max <= self.hr202.raw_min:
            raise SpecValueError("raw_max", "[hr202] raw_max must exceed raw_min")
        if self.yl69.raw_max == self.yl69.raw_min:
            raise SpecValueError("raw_max", "[yl69] raw_max must differ from raw_min")
        if not 0 <= self.alcohol_threshold <= self.alcohol_max_level:
            raise SpecValueError("threshold", "[mq3] threshold must lie in [0, max_level]")


def _section_map(text: str) -> dict[str, Section]:
    sections: dict[str, Section] = {}
    for section in parse_sections(text):
        if section.kind not in CALIBRATION_SECTIONS:
            raise SpecSyntaxError(f"unknown calibration section [{section.kind}]", section.line)
        if section.kind in sections:
            raise SpecSyntaxError(f"[{section.kind}] given more than once", section.line)
        sections[section.kind] = section
    return sections


def _get(section: Section | None, key: str):
    if section is None:
        return None
    return section.last(key)


def _need(sections: dict[str, Section], kind: str, key: str):
    entry = _get(sections.get(kind), key)
    if entry is None:
        raise SpecValueError(key, f"missing in [{kind}]")
    return entry


def _opt_float(sections: dict[str, Section], kind: str, key: str, default: float, lo: float | None = 0) -> float:
    entry = _get(sections.get(kind), key)
    if entry is None:
        return default
    return require_range(entry, parse_float(entry), lo, None)


def _gas_curve(sections: dict[str, Section], kind: str) -> GasCurve:
    try:
        return GasCurve(
            rl_ohms=parse_float(_need(sections, kind, "rl_ohms")),
            ro_ohms=parse_float(_need(sections, kind, "ro_ohms")),
            curve_a=parse_float(_need(sections, kind, "curve_a")),
            curve_b=parse_float(_need(sections, kind, "curve_b")),
            vc_volts=_opt_float(sections, kind, "vc_volts", 5.0),
            noise_volts=_opt_float(sections, kind, "noise", 0.0),
        )
    except SpecValueError as exc:
        raise SpecValueError(f"{kind}.{exc.key}", exc.message, exc.line) from exc


def _linear(sections: dict[str, Section], kind: str) -> LinearChannel:
    return LinearChannel(
        raw_min=parse_float(_need(sections, kind, "raw_min")),
        raw_max=parse_float(_need(sections, kind, "raw_max")),
        noise=_opt_float(sections, kind, "noise", 0.0),
    )


def load_calibration(text: str) -> SensorCalibration:
    sections = _section_map(text)
    f_min = parse_floats(_need(sections, "color", "f_min"), 3)
    f_max = parse_floats(_need(sections, "color", "f_max"), 3)
    return SensorCalibration(
        color_f_min=(f_min[0], f_min[1], f_min[2]),
        color_f_max=(f_max[0], f_max[1], f_max[2]),
        color_noise_hz=_opt_float(sections, "color", "noise", 0.0),
        mq135=_gas_curve(sections, "mq135"),
        mq137=_gas_curve(sections, "mq137"),
        mq138=_gas_curve(sections, "mq138"),
        alcohol_threshold=parse_int(_need(sections, "mq3", "threshold")),
        alcohol_max_level=int(_opt_float(sections, "mq3", "max_level", 1023)),
        hr202=_linear(sections, "hr202"),
        yl69=_linear(sections, "yl69"),
        ph_noise=_opt_float(sections, "ph", "noise", 0.0),
        warmup_ms=int(_opt_float(sections, "poller", "warmup_ms", POLLER_DEFAULTS["warmup_ms"])),
        period_ms=int(_opt_float(sections, "poller", "period_ms", POLLER_DEFAULTS["period_ms"], lo=1)),
        rock_radius_m=_opt_float(sections, "poller", "rock_radius_m", POLLER_DEFAULTS["rock_radius_m"]),
    )


def load_calibration_file(path: str | Path) -> SensorCalibration:
    return load_calibration(read_text(path))


# Forward transfer functions --------------------------------------------------


def map_color_raw(raw_freq: tuple[float, float, float], calib: SensorCalibration) -> RGB:
    channels = []
    for raw, lo, hi in zip(raw_freq, calib.color_f_min, calib.color_f_max):
        value = round_half_away(255.0 * (raw - lo) / (hi - lo))
        channels.append(int(clamp(value, 0, 255)))
    return channels[0], channels[1], channels[2]


def gas_ppm(v_out: float, curve: GasCurve) -> float:
    if not 0 < v_out < curve.vc_volts:
        raise SignalFault(f"sensor output {v_out:.6g} V outside (0, {curve.vc_volts:g}) V")
    rs = curve.rl_ohms * (curve.vc_volts - v_out) / v_out
    ratio = rs / curve.ro_ohms
    return curve.curve_a * ratio**curve.curve_b


def alcohol_detected(raw_digital: int, calib: SensorCalibration) -> bool:
    return raw_digital >= calib.alcohol_threshold


def _linear_pct(raw: float, channel: LinearChannel) -> float:
    pct = 100.0 * (raw - channel.raw_min) / (channel.raw_max - channel.raw_min)
    return clamp(pct, 0.0, 100.0)


def humidity_pct(raw: float, calib: SensorCalibration) -> float:
    return _linear_pct(raw, calib.hr202)


def soil_moisture_pct(raw: float, calib: SensorCalibration) -> float:
    return _linear_pct(raw, calib.yl69)


# Inverse transfer functions --------------------------------------------------


def color_raw(rgb: RGB, calib: SensorCalibration) -> tuple[float, float, float]:
    values = [lo + (channel / 255.0) * (hi - lo) for channel, lo, hi in zip(rgb, calib.color_f_min, calib.color_f_max)]
    return values[0], values[1], values[2]


def gas_v_out(ppm: float, curve: GasCurve) -> float:
    if ppm <= 0:
        raise ValueError("inverse transfer needs a positive concentration")
    ratio = (ppm / curve.curve_a) ** (1.0 / curve.curve_b)
    rs = ratio * curve.ro_ohms
    return curve.vc_volts * curve.rl_ohms / (curve.rl_ohms + rs)


def linear_raw(pct: float, channel: LinearChannel) -> float:
    return channel.raw_min + (pct / 100.0) * (channel.raw_max - channel.raw_min)


# Probes and imaging ----------------------------------------------------------


def read_ph(
    site: SiteModel,
    position: Point,
    depth_cm: float,
    calib: SensorCalibration,
    probe_deployed: bool,
    rng: np.random.Generator | None = None,
) -> float:
    if not probe_deployed:
        raise ProbeNotDeployed("pH probe is stowed")
    value = soil_at(site, position, depth_cm).ph
    if calib.ph_noise > 0 and rng is not None:
        value += float(rng.uniform(-calib.ph_noise, calib.ph_noise))
    return clamp(value, 0.0, 14.0)


def nearest_rock(site: SiteModel, pose: Point, radius_m: float) -> RockProperties | None:
    best: RockProperties | None = None
    best_distance = radius_m
    for rock in site.rocks:
        d = distance(rock.position, pose)
        if d <= best_distance:
            best, best_distance = rock, d
    return best


def capture_image(site: SiteModel, rock_id: str, pose: Point, t_ms: int, calib: SensorCalibration) -> ImageCapture:
    rock = rock_at(site, rock_id)
    if distance(rock.position, pose) > calib.rock_radius_m:
        raise RoverNotAtRock(f"rover at {pose} is not over rock {rock_id}")
    # Only observable features; the fossil ground truth never leaves the site model.
    return ImageCapture(rock_id=rock.id, mean_color=rock.mean_color, layered=rock.layered, t_ms=t_ms)


# Frame polling ---------------------------------------------------------------


def _read_gas(truth_ppm: float, curve: GasCurve, noise: float, channel: str, faults: list[str]) -> float | None:
    if truth_ppm <= 0:
        return 0.0
    v_out = gas_v_out(truth_ppm, curve) + noise * curve.noise_volts
    try:
        return gas_ppm(v_out, curve)
    except SignalFault as exc:
        logger.debug("%s channel fault: %s", channel, exc)
        faults.append(channel)
        return None


def poll_frame(
    site: SiteModel,
    rover_pose: Point,
    t_ms: int,
    calib: SensorCalibration,
    seed: int,
    probe_deployed: bool = False,
    probe_depth_cm: float = 0.0,
) -> SensorFrame:
    """One bio-sensor polling cycle at virtual time ``t_ms``; pure in its arguments."""
    draws = np.random.default_rng([seed, t_ms]).uniform(-1.0, 1.0, size=len(_NOISE_SLOTS))
    noise = dict(zip(_NOISE_SLOTS, (float(d) for d in draws)))
    faults: list[str] = []

    rock = nearest_rock(site, rover_pose, calib.rock_radius_m)
    if rock is not None:
        target_rgb, alcohol, formaldehyde = rock.mean_color, rock.surface_alcohol, rock.surface_formaldehyde_ppm
    else:
        target_rgb, alcohol, formaldehyde = site.ambient.ground_color, False, 0.0

    raw_rgb = color_raw(target_rgb, calib)
    raw_rgb = (
        raw_rgb[0] + noise["r"] * calib.color_noise_hz,
        raw_rgb[1] + noise["g"] * calib.color_noise_hz,
        raw_rgb[2] + noise["b"] * calib.color_noise_hz,
    )
    co2, humidity = gas_at(site, rover_pose)
    surface = soil_at(site, rover_pose, 0.0)

    ph: float | None = None
    if probe_deployed:
        ph_truth = soil_at(site, rover_pose, probe_depth_cm).ph
        ph = clamp(ph_truth + noise["ph"] * calib.ph_noise, 0.0, 14.0)

    raw_digital = calib.alcohol_max_level if alcohol else 0
    return SensorFrame(
        t_ms=t_ms,
        rgb=map_color_raw(raw_rgb, calib),
        alcohol_detected=alcohol_detected(raw_digital, calib),
        co2_ppm=_read_gas(co2, calib.mq135, noise["co2"], "co2", faults),
        formaldehyde_ppm=_read_gas(formaldehyde, calib.mq138, noise["formaldehyde"], "formaldehyde", faults),
        humidity_pct=humidity_pct(linear_raw(humidity, calib.hr202) + noise["humidity"] * calib.hr202.noise, calib),
        ammonia_ppm=_read_gas(site.ambient.ammonia_ppm, calib.mq137, noise["ammonia"], "ammonia", faults),
        soil_moisture_pct=soil_moisture_pct(
            linear_raw(surface.moisture_pct, calib.yl69) + noise["moisture"] * calib.yl69.noise, calib
        ),
        ph=ph,
        faults=tuple(faults),
    )


class SensorPoller:
    """Owns the polling cadence for one logical thread of control.

    The first frame lands after the warm-up delay; every later frame is one
    poll period after the previous one, so timestamps strictly increase.
    """

    def __init__(self, site: SiteModel, calib: SensorCalibration, seed: int, start_ms: int = 0) -> None:
        self.site = site
        self.calib = calib
        self.seed = seed
        self._next_ms = start_ms + calib.warmup_ms
        self._last_ms: int | None = None

    def poll(self, pose: Point, now_ms: int, probe_deployed: bool = False, probe_depth_cm: float = 0.0) -> SensorFrame:
        t_ms = max(now_ms, self._next_ms)
        if self._last_ms is not None and t_ms <= self._last_ms:
            t_ms = self._last_ms + 1
        frame = poll_frame(self.site, pose, t_ms, self.calib, self.seed, probe_deployed, probe_depth_cm)
        self._last_ms = t_ms
        self._next_ms = t_ms + self.calib.period_ms
        return frame
