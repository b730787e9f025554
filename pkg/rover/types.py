from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

Point = tuple[float, float]
RGB = tuple[int, int, int]


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    def contains(self, point: Point) -> bool:
        x, y = point
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def contains_rect(self, other: Rect) -> bool:
        return self.x0 <= other.x0 and self.y0 <= other.y0 and other.x1 <= self.x1 and other.y1 <= self.y1

    def overlaps(self, other: Rect) -> bool:
        """True when the two rectangles share positive area; touching edges do not count."""
        return self.x0 < other.x1 and other.x0 < self.x1 and self.y0 < other.y1 and other.y0 < self.y1


def distance(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


@dataclass(frozen=True)
class SoilComposition:
    protein_mg_per_g: float = 0.0
    carbohydrate_mg_per_g: float = 0.0
    ammonia_mg_per_g: float = 0.0
    moisture_pct: float = 0.0
    ph: float = 7.0


EMPTY_SOIL = SoilComposition()


@dataclass(frozen=True)
class SoilPatch:
    name: str
    region: Rect
    composition_by_depth: tuple[tuple[float, SoilComposition], ...]


@dataclass(frozen=True)
class RockProperties:
    id: str
    position: Point
    mean_color: RGB
    layered: bool
    surface_alcohol: bool
    surface_formaldehyde_ppm: float
    fossilized: bool


@dataclass(frozen=True)
class AmbientConditions:
    co2_ppm: float = 400.0
    humidity_pct: float = 0.0
    ammonia_ppm: float = 0.0
    ground_color: RGB = (150, 90, 60)


@dataclass(frozen=True)
class SiteModel:
    name: str
    extent: Rect
    patches: tuple[SoilPatch, ...]
    rocks: tuple[RockProperties, ...]
    ambient: AmbientConditions


@dataclass(frozen=True)
class SensorFrame:
    t_ms: int
    rgb: RGB
    alcohol_detected: bool
    co2_ppm: float | None
    formaldehyde_ppm: float | None
    humidity_pct: float
    ammonia_ppm: float | None
    soil_moisture_pct: float
    ph: float | None
    faults: tuple[str, ...] = ()


@dataclass(frozen=True)
class ImageCapture:
    rock_id: str
    mean_color: RGB
    layered: bool
    t_ms: int


@dataclass(frozen=True)
class SoilSample:
    mass_g: float
    source_position: Point
    depth_cm: float
    composition: SoilComposition
    sterile_chain: bool
    contaminated: bool = False


class AssayKind(Enum):
    CARBOHYDRATE = "carbohydrate"
    PROTEIN = "protein"
    AMMONIA = "ammonia"

    @property
    def reagent(self) -> str:
        return _REAGENTS[self]

    def analyte(self, composition: SoilComposition) -> float:
        if self is AssayKind.CARBOHYDRATE:
            return composition.carbohydrate_mg_per_g
        if self is AssayKind.PROTEIN:
            return composition.protein_mg_per_g
        return composition.ammonia_mg_per_g


_REAGENTS = {
    AssayKind.CARBOHYDRATE: "benedict",
    AssayKind.PROTEIN: "ninhydrin",
    AssayKind.AMMONIA: "nessler",
}


@dataclass(frozen=True)
class AssayResult:
    kind: AssayKind
    detected: bool
    bin_index: int
    elapsed_ms: int
    contaminated_input: bool
    observed_rgb: RGB = (0, 0, 0)
    completed_ms: int = 0


class LifeClass(Enum):
    EXTANT = "Extant"
    EXTINCT = "Extinct"
    NO_PRESENCE_OF_LIFE = "NPL"


@dataclass(frozen=True)
class LifeVerdict:
    life: LifeClass
    contaminated_evidence: bool = False


class RockType(Enum):
    IGNEOUS_METAMORPHIC = "IgneousMetamorphic"
    SHALE = "Shale"


@dataclass(frozen=True)
class RockClass:
    rock_type: RockType
    fossil_prediction: bool
    classifier_id: str


@dataclass
class BeakerSlot:
    occupied: bool = True
    sample: SoilSample | None = None
    funnel_cover_open: bool = False
    contaminated: bool = False
    cover_open_at_alignment: bool = False
    prep: list[tuple[str, float]] = field(default_factory=list)
