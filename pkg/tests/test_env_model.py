from __future__ import annotations

import unittest
from pathlib import Path

from rover import (
    SiteError,
    SpecSyntaxError,
    SpecValueError,
    gas_at,
    load_site,
    load_site_file,
    rock_at,
    site_to_text,
    soil_at,
)
from rover.env_model import patch_at
from rover.types import EMPTY_SOIL

DEMO_SITE = Path("config/demo_site.conf")

LAYERED_SITE = """
[ambient]
extent = 0 0 50 50
co2_ppm = 410
humidity_pct = 35

[patch column]   # three layers
region = 10 10 20 20
layer = 0 1.0 0 0 10 6.5
layer = 5 0 1.5 0 12 7.0
layer = 10 0 0 0.5 14 7.5

[patch late]
region = 30 30 40 40
layer = 3 2.0 0 0 10 6.0

[rock r1]
position = 5 45
color = 120 110 100
layered = true
formaldehyde_ppm = 2.5
fossilized = true
"""


class EnvModelTests(unittest.TestCase):
    def setUp(self) -> None:
        self.site = load_site(LAYERED_SITE, name="layered")

    def test_load_demo_site(self) -> None:
        site = load_site_file(DEMO_SITE)
        self.assertEqual("demo_site", site.name)
        self.assertEqual(["albumin", "dextrose", "ammonia"], [p.name for p in site.patches])
        self.assertEqual(["shale_01", "basalt_01"], [r.id for r in site.rocks])
        self.assertEqual(400.0, site.ambient.co2_ppm)

    def test_soil_at_first_layer_at_depth_zero(self) -> None:
        soil = soil_at(self.site, (15, 15), 0)
        self.assertEqual(1.0, soil.protein_mg_per_g)
        self.assertEqual(6.5, soil.ph)

    def test_soil_at_between_layers_uses_shallower_layer(self) -> None:
        self.assertEqual(1.5, soil_at(self.site, (15, 15), 7).carbohydrate_mg_per_g)
        self.assertEqual(1.5, soil_at(self.site, (15, 15), 5).carbohydrate_mg_per_g)
        self.assertEqual(0.5, soil_at(self.site, (15, 15), 10).ammonia_mg_per_g)
        self.assertEqual(0.5, soil_at(self.site, (15, 15), 40).ammonia_mg_per_g)

    def test_soil_at_outside_patches_is_zero_composition(self) -> None:
        soil = soil_at(self.site, (45, 5), 2)
        self.assertEqual(EMPTY_SOIL, soil)
        self.assertEqual(7.0, soil.ph)
        self.assertEqual(0.0, soil.moisture_pct)

    def test_soil_above_first_layer_is_zero_composition(self) -> None:
        self.assertEqual(EMPTY_SOIL, soil_at(self.site, (35, 35), 1))
        self.assertEqual(2.0, soil_at(self.site, (35, 35), 3).protein_mg_per_g)

    def test_soil_at_is_pure(self) -> None:
        self.assertEqual(soil_at(self.site, (12, 18), 6), soil_at(self.site, (12, 18), 6))

    def test_soil_at_outside_extent_raises(self) -> None:
        with self.assertRaises(SiteError):
            soil_at(self.site, (60, 10), 1)
        with self.assertRaises(SiteError):
            soil_at(self.site, (10, 10), -1)

    def test_gas_at_is_uniform(self) -> None:
        self.assertEqual((410.0, 35.0), gas_at(self.site, (1, 1)))
        self.assertEqual(gas_at(self.site, (1, 1)), gas_at(self.site, (49, 20)))
        with self.assertRaises(SiteError):
            gas_at(self.site, (-1, 0))

    def test_rock_at(self) -> None:
        rock = rock_at(self.site, "r1")
        self.assertEqual((120, 110, 100), rock.mean_color)
        self.assertTrue(rock.layered)
        self.assertFalse(rock.surface_alcohol)
        self.assertIs(rock, rock_at(self.site, "r1"))
        with self.assertRaises(SiteError):
            rock_at(self.site, "r2")

    def test_patch_at(self) -> None:
        self.assertEqual("column", patch_at(self.site, (10, 10)).name)
        self.assertIsNone(patch_at(self.site, (25, 25)))

    def test_serialize_then_load_is_idempotent(self) -> None:
        for site in (self.site, load_site_file(DEMO_SITE)):
            with self.subTest(site=site.name):
                reloaded = load_site(site_to_text(site), name=site.name)
                self.assertEqual(site, reloaded)
                self.assertEqual(site_to_text(site), site_to_text(reloaded))

    def test_defaults_when_ambient_keys_omitted(self) -> None:
        site = load_site("[ambient]\nextent = 0 0 1 1\n")
        self.assertEqual(400.0, site.ambient.co2_ppm)
        self.assertEqual(0.0, site.ambient.humidity_pct)
        self.assertEqual((150, 90, 60), site.ambient.ground_color)

    def test_syntax_errors_carry_line_numbers(self) -> None:
        with self.assertRaises(SpecSyntaxError) as ctx:
            load_site("[ambient]\nextent = 0 0 1 1\nthis line has no equals\n")
        self.assertEqual(3, ctx.exception.line)
        with self.assertRaises(SpecSyntaxError):
            load_site("[ambient]\nextent = 0 0 1 1\n[volcano v]\n")

    def test_semantic_errors(self) -> None:
        cases = {
            "missing ambient": "[patch p]\nregion = 0 0 1 1\nlayer = 0 0 0 0 0 7\n",
            "overlap": (
                "[ambient]\nextent = 0 0 10 10\n"
                "[patch a]\nregion = 0 0 5 5\nlayer = 0 0 0 0 0 7\n"
                "[patch b]\nregion = 4 4 8 8\nlayer = 0 0 0 0 0 7\n"
            ),
            "outside extent": "[ambient]\nextent = 0 0 10 10\n[patch a]\nregion = 5 5 15 15\nlayer = 0 0 0 0 0 7\n",
            "descending layers": (
                "[ambient]\nextent = 0 0 10 10\n"
                "[patch a]\nregion = 1 1 2 2\nlayer = 5 0 0 0 0 7\nlayer = 2 0 0 0 0 7\n"
            ),
            "ph out of range": "[ambient]\nextent = 0 0 10 10\n[patch a]\nregion = 1 1 2 2\nlayer = 0 0 0 0 0 15\n",
            "negative protein": "[ambient]\nextent = 0 0 10 10\n[patch a]\nregion = 1 1 2 2\nlayer = 0 -1 0 0 0 7\n",
            "bad bool": "[ambient]\nextent = 0 0 10 10\n[rock r]\nposition = 1 1\ncolor = 1 2 3\nlayered = maybe\n",
            "rock outside": "[ambient]\nextent = 0 0 10 10\n[rock r]\nposition = 11 1\ncolor = 1 2 3\n",
            "unknown key": "[ambient]\nextent = 0 0 10 10\nwind = 3\n",
        }
        for label, text in cases.items():
            with self.subTest(case=label):
                with self.assertRaises(SpecValueError):
                    load_site(text)

    def test_touching_patches_are_allowed(self) -> None:
        site = load_site(
            "[ambient]\nextent = 0 0 10 10\n"
            "[patch a]\nregion = 0 0 5 5\nlayer = 0 1 0 0 0 7\n"
            "[patch b]\nregion = 5 0 10 5\nlayer = 0 0 1 0 0 7\n"
        )
        self.assertEqual(2, len(site.patches))


if __name__ == "__main__":
    unittest.main()
