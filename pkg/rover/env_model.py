"""Simulated exploration site: soil layers, ambient gases and rocks."""
from __future__ import annotations

from pathlib import Path

from .common import (
    Section,
    SpecSyntaxError,
    SpecValueError,
    parse_bool,
    parse_float,
    parse_floats,
    parse_sections,
    read_text,
    require_range,
)
from .types import (
    EMPTY_SOIL,
    AmbientConditions,
    Point,
    Rect,
    RockProperties,
    SiteModel,
    SoilComposition,
    SoilPatch,
)

PATCH_KEYS = {"region", "layer"}
ROCK_KEYS = {"position", "color", "layered", "alcohol", "formaldehyde_ppm", "fossilized"}
AMBIENT_KEYS = {"co2_ppm", "humidity_pct", "extent", "ammonia_ppm", "ground_color"}


class SiteError(Exception):
    pass


def _rect(entry) -> Rect:
    x0, y0, x1, y1 = parse_floats(entry, 4)
    if x1 <= x0 or y1 <= y0:
        raise SpecValueError(entry.key, "rectangle must have x1 > x0 and y1 > y0", entry.line)
    return Rect(x0, y0, x1, y1)


def _rgb(entry) -> tuple[int, int, int]:
    values = parse_floats(entry, 3)
    for value in values:
        require_range(entry, value, 0, 255)
        if value != int(value):
            raise SpecValueError(entry.key, "colour channels must be integers", entry.line)
    return int(values[0]), int(values[1]), int(values[2])


def _check_keys(section: Section, allowed: set[str]) -> None:
    for entry in section.entries:
        if entry.key not in allowed:
            raise SpecValueError(entry.key, f"unknown key in [{section.kind}]", entry.line)


def _single(section: Section, key: str, required: bool = True):
    found = section.values(key)
    if len(found) > 1:
        raise SpecValueError(key, "given more than once", found[1].line)
    if not found:
        if required:
            raise SpecValueError(key, f"missing in [{section.kind}] section", section.line)
        return None
    return found[0]


def _layer(entry) -> tuple[float, SoilComposition]:
    depth, protein, carb, ammonia, moisture, ph = parse_floats(entry, 6)
    line = entry.line
    require_range("depth_cm", depth, 0, None, line)
    require_range("protein", protein, 0, None, line)
    require_range("carbohydrate", carb, 0, None, line)
    require_range("ammonia", ammonia, 0, None, line)
    require_range("moisture", moisture, 0, 100, line)
    require_range("ph", ph, 0, 14, line)
    return depth, SoilComposition(protein, carb, ammonia, moisture, ph)


def _patch(section: Section) -> SoilPatch:
    _check_keys(section, PATCH_KEYS)
    region = _rect(_single(section, "region"))
    layers: list[tuple[float, SoilComposition]] = []
    for entry in section.values("layer"):
        depth, composition = _layer(entry)
        if layers and depth <= layers[-1][0]:
            raise SpecValueError("layer", "depths must be strictly increasing", entry.line)
        layers.append((depth, composition))
    if not layers:
        raise SpecValueError("layer", f"patch {section.name} needs at least one layer", section.line)
    return SoilPatch(name=section.name or "", region=region, composition_by_depth=tuple(layers))


def _rock(section: Section) -> RockProperties:
    _check_keys(section, ROCK_KEYS)
    x, y = parse_floats(_single(section, "position"), 2)
    formaldehyde_entry = _single(section, "formaldehyde_ppm", required=False)
    formaldehyde = parse_float(formaldehyde_entry) if formaldehyde_entry else 0.0
    if formaldehyde_entry:
        require_range(formaldehyde_entry, formaldehyde, 0, None)

    def flag(key: str) -> bool:
        entry = _single(section, key, required=False)
        return parse_bool(entry) if entry else False

    return RockProperties(
        id=section.name or "",
        position=(x, y),
        mean_color=_rgb(_single(section, "color")),
        layered=flag("layered"),
        surface_alcohol=flag("alcohol"),
        surface_formaldehyde_ppm=formaldehyde,
        fossilized=flag("fossilized"),
    )


def _ambient(section: Section) -> tuple[Rect, AmbientConditions]:
    _check_keys(section, AMBIENT_KEYS)
    defaults = AmbientConditions()
    extent = _rect(_single(section, "extent"))
    values: dict[str, float] = {}
    for key, lo, hi in (("co2_ppm", 0, None), ("humidity_pct", 0, 100), ("ammonia_ppm", 0, None)):
        entry = _single(section, key, required=False)
        if entry is not None:
            values[key] = require_range(entry, parse_float(entry), lo, hi)
    color_entry = _single(section, "ground_color", required=False)
    return extent, AmbientConditions(
        co2_ppm=values.get("co2_ppm", defaults.co2_ppm),
        humidity_pct=values.get("humidity_pct", defaults.humidity_pct),
        ammonia_ppm=values.get("ammonia_ppm", defaults.ammonia_ppm),
        ground_color=_rgb(color_entry) if color_entry else defaults.ground_color,
    )


def load_site(text: str, name: str = "site") -> SiteModel:
    patches: list[SoilPatch] = []
    rocks: list[RockProperties] = []
    ambient: tuple[Rect, AmbientConditions] | None = None
    for section in parse_sections(text):
        if section.kind == "patch":
            if not section.name:
                raise SpecSyntaxError("[patch] needs a name", section.line)
            if any(p.name == section.name for p in patches):
                raise SpecValueError("patch", f"duplicate patch {section.name}", section.line)
            patches.append(_patch(section))
        elif section.kind == "rock":
            if not section.name:
                raise SpecSyntaxError("[rock] needs a name", section.line)
            if any(r.id == section.name for r in rocks):
                raise SpecValueError("rock", f"duplicate rock {section.name}", section.line)
            rocks.append(_rock(section))
        elif section.kind == "ambient":
            if ambient is not None:
                raise SpecSyntaxError("[ambient] given more than once", section.line)
            ambient = _ambient(section)
        else:
            raise SpecSyntaxError(f"unknown section [{section.kind}]", section.line)

    if ambient is None:
        raise SpecValueError("extent", "missing [ambient] section with extent")
    extent, conditions = ambient

    for index, patch in enumerate(patches):
        if not extent.contains_rect(patch.region):
            raise SpecValueError("region", f"patch {patch.name} lies outside the site extent")
        for other in patches[index + 1:]:
            if patch.region.overlaps(other.region):
                raise SpecValueError("region", f"patches {patch.name} and {other.name} overlap")
    for rock in rocks:
        if not extent.contains(rock.position):
            raise SpecValueError("position", f"rock {rock.id} lies outside the site extent")

    return SiteModel(name=name, extent=extent, patches=tuple(patches), rocks=tuple(rocks), ambient=conditions)


def load_site_file(path: str | Path) -> SiteModel:
    path = Path(path)
    return load_site(read_text(path), name=path.stem)


def site_to_text(site: SiteModel) -> str:
    """Serialize a site back into the site file grammar; ``load_site`` inverts it exactly."""

    def nums(*values: float) -> str:
        return " ".join(repr(float(v)) for v in values)

    e = site.extent
    a = site.ambient
    lines = [
        "[ambient]",
        f"extent = {nums(e.x0, e.y0, e.x1, e.y1)}",
        f"co2_ppm = {nums(a.co2_ppm)}",
        f"humidity_pct = {nums(a.humidity_pct)}",
        f"ammonia_ppm = {nums(a.ammonia_ppm)}",
        "ground_color = {} {} {}".format(*a.ground_color),
    ]
    for patch in site.patches:
        r = patch.region
        lines += ["", f"[patch {patch.name}]", f"region = {nums(r.x0, r.y0, r.x1, r.y1)}"]
        for depth, c in patch.composition_by_depth:
            values = nums(depth, c.protein_mg_per_g, c.carbohydrate_mg_per_g, c.ammonia_mg_per_g, c.moisture_pct, c.ph)
            lines.append(f"layer = {values}")
    for rock in site.rocks:
        lines += [
            "",
            f"[rock {rock.id}]",
            f"position = {nums(*rock.position)}",
            "color = {} {} {}".format(*rock.mean_color),
            f"layered = {str(rock.layered).lower()}",
            f"alcohol = {str(rock.surface_alcohol).lower()}",
            f"formaldehyde_ppm = {nums(rock.surface_formaldehyde_ppm)}",
            f"fossilized = {str(rock.fossilized).lower()}",
        ]
    return "\n".join(lines) + "\n"


def _require_in_extent(site: SiteModel, position: Point) -> None:
    if not site.extent.contains(position):
        raise SiteError(f"position {position} outside site extent")


def soil_at(site: SiteModel, position: Point, depth_cm: float) -> SoilComposition:
    _require_in_extent(site, position)
    if depth_cm < 0:
        raise SiteError(f"depth must be non-negative, got {depth_cm}")
    for patch in site.patches:
        if not patch.region.contains(position):
            continue
        chosen: SoilComposition | None = None
        for layer_depth, composition in patch.composition_by_depth:
            if layer_depth <= depth_cm:
                chosen = composition
            else:
                break
        return chosen if chosen is not None else EMPTY_SOIL
    return EMPTY_SOIL


def gas_at(site: SiteModel, position: Point) -> tuple[float, float]:
    _require_in_extent(site, position)
    return site.ambient.co2_ppm, site.ambient.humidity_pct


def rock_at(site: SiteModel, rock_id: str) -> RockProperties:
    for rock in site.rocks:
        if rock.id == rock_id:
            return rock
    raise SiteError(f"unknown rock id {rock_id!r}")


def patch_at(site: SiteModel, position: Point) -> SoilPatch | None:
    for patch in site.patches:
        if patch.region.contains(position):
            return patch
    return None
