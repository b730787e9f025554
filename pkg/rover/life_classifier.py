"""Life verdict decision tree and the rock classifier registry."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .common import Section, SpecValueError, parse_float, parse_floats, require_range
from .types import RGB, ImageCapture, LifeClass, LifeVerdict, RockClass, RockType


class UnknownClassifier(Exception):
    pass


class Node:
    def __init__(self, value: LifeClass | None = None, decision: Split | None = None) -> None:
        self.value = value
        self.decision = decision

    def traverse(self, features: dict[str, bool]) -> LifeClass:
        current = self
        while current.decision is not None:
            current = current.decision.select_child(features)
        assert current.value is not None
        return current.value


class Split:
    def __init__(self, feature_name: str, true_child: Node, false_child: Node) -> None:
        self.feature_name = feature_name
        self.true_child = true_child
        self.false_child = false_child

    def select_child(self, features: dict[str, bool]) -> Node:
        return self.true_child if features[self.feature_name] else self.false_child


# protein outranks carbohydrate, which outranks ammonia; ammonia alone is inconclusive
LIFE_TREE = Node(
    decision=Split(
        "protein",
        Node(LifeClass.EXTANT),
        Node(
            decision=Split(
                "carbohydrate",
                Node(LifeClass.EXTINCT),
                Node(
                    decision=Split(
                        "ammonia",
                        Node(LifeClass.NO_PRESENCE_OF_LIFE),
                        Node(LifeClass.NO_PRESENCE_OF_LIFE),
                    )
                ),
            )
        ),
    )
)


def classify_life(protein: bool, carbohydrate: bool, ammonia: bool, contaminated: bool = False) -> LifeVerdict:
    features = {"protein": protein, "carbohydrate": carbohydrate, "ammonia": ammonia}
    return LifeVerdict(life=LIFE_TREE.traverse(features), contaminated_evidence=contaminated)


@dataclass(frozen=True)
class BaselineConfig:
    color_min: RGB = (90, 80, 60)
    color_max: RGB = (200, 190, 160)
    formaldehyde_ppm: float = 1.0

    def __post_init__(self) -> None:
        if any(lo > hi for lo, hi in zip(self.color_min, self.color_max)):
            raise SpecValueError("color_min", "must not exceed color_max on any channel")
        if self.formaldehyde_ppm < 0:
            raise SpecValueError("formaldehyde_ppm", "must be non-negative")

    def in_box(self, color: RGB) -> bool:
        return all(lo <= c <= hi for lo, c, hi in zip(self.color_min, color, self.color_max))


def load_baseline_section(section: Section | None) -> BaselineConfig:
    if section is None:
        return BaselineConfig()
    values: dict = {}
    for entry in section.entries:
        if entry.key in ("color_min", "color_max"):
            rgb = parse_floats(entry, 3)
            for channel in rgb:
                require_range(entry, channel, 0, 255)
            values[entry.key] = tuple(int(c) for c in rgb)
        elif entry.key == "formaldehyde_ppm":
            values[entry.key] = parse_float(entry)
        else:
            raise SpecValueError(entry.key, "unknown key in [baseline]", entry.line)
    return BaselineConfig(**values)


RockClassifier = Callable[[ImageCapture, bool, float, BaselineConfig], RockClass]
BASELINE_ID = "baseline"


def baseline_classifier(
    capture: ImageCapture,
    alcohol: bool,
    formaldehyde_ppm: float,
    config: BaselineConfig,
) -> RockClass:
    shale = capture.layered and config.in_box(capture.mean_color)
    fossil = shale and (alcohol or formaldehyde_ppm >= config.formaldehyde_ppm)
    return RockClass(
        rock_type=RockType.SHALE if shale else RockType.IGNEOUS_METAMORPHIC,
        fossil_prediction=fossil,
        classifier_id=BASELINE_ID,
    )


_REGISTRY: dict[str, RockClassifier] = {BASELINE_ID: baseline_classifier}


def register_classifier(classifier_id: str, classifier: RockClassifier) -> None:
    if classifier_id == BASELINE_ID:
        raise ValueError("the baseline classifier cannot be replaced")
    _REGISTRY[classifier_id] = classifier


def unregister_classifier(classifier_id: str) -> None:
    if classifier_id != BASELINE_ID:
        _REGISTRY.pop(classifier_id, None)


def registered_classifiers() -> list[str]:
    return sorted(_REGISTRY)


def is_registered(classifier_id: str) -> bool:
    return classifier_id in _REGISTRY


def classify_rock(
    capture: ImageCapture,
    alcohol: bool,
    formaldehyde_ppm: float,
    classifier_id: str = BASELINE_ID,
    config: BaselineConfig | None = None,
) -> RockClass:
    classifier = _REGISTRY.get(classifier_id)
    if classifier is None:
        raise UnknownClassifier(f"no rock classifier registered as {classifier_id!r}")
    result = classifier(capture, alcohol, formaldehyde_ppm, config or BaselineConfig())
    if result.classifier_id != classifier_id:
        result = RockClass(result.rock_type, result.fossil_prediction, classifier_id)
    return result
