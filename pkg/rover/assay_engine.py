"""Colorimetric assays: reaction colour from analyte load, chart interpretation, timed runs."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .clock import VirtualClock
from .common import Section, SpecValueError, parse_float, parse_floats, parse_sections, read_text, require_range
from .types import RGB, AssayKind, AssayResult, BeakerSlot, SoilSample

PARAM_KEYS = {
    "label",
    "bin",
    "lod_mg",
    "react_ms",
    "small_react_ms",
    "small_lod_factor",
    "nominal_mass_g",
    "reagent_ml",
    "water_ml",
}
REAGENT_SECTIONS = {kind.reagent: kind for kind in AssayKind}


class AssayError(Exception):
    pass


class MissingReagent(AssayError):
    pass


@dataclass(frozen=True)
class AssayProtocolParams:
    kind: AssayKind
    nominal_mass_g: float
    reagent_ml: float
    react_time_ms: int
    small_sample_react_time_ms: int
    lod_mg: float
    small_sample_lod_factor: float = 1.0
    water_ml: float = 0.0
    label: str = ""

    def __post_init__(self) -> None:
        for key in ("nominal_mass_g", "reagent_ml", "react_time_ms", "small_sample_react_time_ms", "lod_mg"):
            if getattr(self, key) <= 0:
                raise SpecValueError(f"{self.kind.reagent}.{key}", "must be positive")
        if self.small_sample_lod_factor < 1:
            raise SpecValueError(f"{self.kind.reagent}.small_lod_factor", "must be at least 1")
        if self.kind is AssayKind.PROTEIN and self.small_sample_react_time_ms < self.react_time_ms:
            raise SpecValueError("ninhydrin.small_react_ms", "must not be shorter than react_ms")

    def is_small(self, mass_g: float) -> bool:
        return mass_g < self.nominal_mass_g

    def required_ms(self, mass_g: float) -> int:
        return self.small_sample_react_time_ms if self.is_small(mass_g) else self.react_time_ms

    def effective_lod_mg(self, mass_g: float) -> float:
        return self.lod_mg * (self.small_sample_lod_factor if self.is_small(mass_g) else 1.0)


@dataclass(frozen=True)
class ColorChart:
    kind: AssayKind
    bins: tuple[tuple[float, RGB], ...]

    def __post_init__(self) -> None:
        if len(self.bins) < 2:
            raise SpecValueError(f"{self.kind.reagent}.bin", "a chart needs at least two entries")
        uppers = [upper for upper, _ in self.bins]
        if any(b <= a for a, b in zip(uppers, uppers[1:])):
            raise SpecValueError(f"{self.kind.reagent}.bin", "bin bounds must be strictly increasing")

    @property
    def negative(self) -> RGB:
        return self.bins[0][1]

    def bin_for(self, analyte_mg: float) -> int:
        """Half-open bins: bin k holds [upper_{k-1}, upper_k); overflow lands in the last bin."""
        for index, (upper, _) in enumerate(self.bins):
            if analyte_mg < upper:
                return index
        return len(self.bins) - 1


@dataclass(frozen=True)
class AssayConfig:
    params: dict[AssayKind, AssayProtocolParams]
    charts: dict[AssayKind, ColorChart]


def _chart_bin(entry) -> tuple[float, RGB]:
    upper, r, g, b = parse_floats(entry, 4)
    require_range(entry, upper, 0, None)
    for channel in (r, g, b):
        require_range(entry, channel, 0, 255)
        if channel != int(channel):
            raise SpecValueError(entry.key, "colour channels must be integers", entry.line)
    return upper, (int(r), int(g), int(b))


def _assay_section(kind: AssayKind, section: Section) -> tuple[AssayProtocolParams, ColorChart]:
    values: dict[str, float] = {}
    label = kind.reagent
    for entry in section.entries:
        if entry.key not in PARAM_KEYS:
            raise SpecValueError(entry.key, f"unknown key in [{section.kind}]", entry.line)
        if entry.key == "label":
            label = entry.value
        elif entry.key != "bin":
            values[entry.key] = parse_float(entry)

    def need(key: str) -> float:
        if key not in values:
            raise SpecValueError(f"{section.kind}.{key}", "missing", section.line)
        return values[key]

    react_ms = int(need("react_ms"))
    params = AssayProtocolParams(
        kind=kind,
        nominal_mass_g=need("nominal_mass_g"),
        reagent_ml=need("reagent_ml"),
        react_time_ms=react_ms,
        small_sample_react_time_ms=int(values.get("small_react_ms", react_ms)),
        lod_mg=need("lod_mg"),
        small_sample_lod_factor=values.get("small_lod_factor", 1.0),
        water_ml=values.get("water_ml", 0.0),
        label=label,
    )
    chart = ColorChart(kind=kind, bins=tuple(_chart_bin(entry) for entry in section.values("bin")))
    return params, chart


def load_assay_sections(sections: list[Section]) -> AssayConfig:
    params: dict[AssayKind, AssayProtocolParams] = {}
    charts: dict[AssayKind, ColorChart] = {}
    for section in sections:
        kind = REAGENT_SECTIONS.get(section.kind)
        if kind is None:
            continue
        if kind in params:
            raise SpecValueError(section.kind, "section given more than once", section.line)
        params[kind], charts[kind] = _assay_section(kind, section)
    for kind in AssayKind:
        if kind not in params:
            raise SpecValueError(kind.reagent, "missing assay section")
    return AssayConfig(params=params, charts=charts)


def load_assay_params(text: str) -> AssayConfig:
    return load_assay_sections(parse_sections(text))


def load_assay_params_file(path: str | Path) -> AssayConfig:
    return load_assay_params(read_text(path))


def analyte_mg(kind: AssayKind, sample: SoilSample) -> float:
    return kind.analyte(sample.composition) * sample.mass_g


def reaction_color(
    kind: AssayKind,
    sample: SoilSample,
    reagent_ml: float,
    water_ml: float,
    elapsed_ms: int,
    params: AssayProtocolParams,
    chart: ColorChart,
) -> RGB:
    # water only dilutes; it never changes the outcome
    if reagent_ml <= 0:
        raise AssayError(f"{kind.value}: reagent volume must be positive")
    if sample.mass_g <= 0:
        raise AssayError(f"{kind.value}: sample mass must be positive")
    if elapsed_ms < params.required_ms(sample.mass_g):
        return chart.negative
    load = analyte_mg(kind, sample)
    if load < params.effective_lod_mg(sample.mass_g):
        return chart.negative
    return chart.bins[chart.bin_for(load)][1]


def interpret_color(kind: AssayKind, observed: RGB, chart: ColorChart) -> tuple[bool, int]:
    references = np.array([rgb for _, rgb in chart.bins], dtype=np.int64)
    distances = ((references - np.array(observed, dtype=np.int64)) ** 2).sum(axis=1)
    # argmin returns the first minimum, so ties go to the lower bin
    bin_index = int(np.argmin(distances))
    return bin_index > 0, bin_index


def prep_volumes(slot: BeakerSlot, reagent: str) -> tuple[float, float]:
    reagent_ml = sum(volume for pump, volume in slot.prep if pump == reagent)
    water_ml = sum(volume for pump, volume in slot.prep if pump == "water")
    return reagent_ml, water_ml


def run_assay(
    kind: AssayKind,
    slot: BeakerSlot,
    params: AssayProtocolParams,
    chart: ColorChart,
    clock: VirtualClock,
    started_ms: int | None = None,
) -> AssayResult:
    """Read the beaker once its reaction time has elapsed.

    ``started_ms`` defaults to now; the clock is moved forward to the
    completion time unless it is already past it, so several assays can be
    started together and collected in any order.
    """
    if slot.sample is None:
        raise AssayError(f"{kind.value}: beaker holds no sample")
    reagent_ml, water_ml = prep_volumes(slot, kind.reagent)
    if reagent_ml <= 0:
        raise MissingReagent(f"{kind.value}: no {kind.reagent} dispensed")
    start = clock.now_ms if started_ms is None else started_ms
    required = params.required_ms(slot.sample.mass_g)
    observed = reaction_color(kind, slot.sample, reagent_ml, water_ml, required, params, chart)
    detected, bin_index = interpret_color(kind, observed, chart)
    completed = start + required
    if completed > clock.now_ms:
        clock.advance_to(completed)
    return AssayResult(
        kind=kind,
        detected=detected,
        bin_index=bin_index,
        elapsed_ms=required,
        contaminated_input=slot.contaminated or slot.sample.contaminated,
        observed_rgb=observed,
        completed_ms=completed,
    )
