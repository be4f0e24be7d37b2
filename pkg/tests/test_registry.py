from __future__ import annotations

import json
import os
import tempfile
import unittest

from factorcopula.registry import (
    load_candidates,
    load_candidates_payload,
    load_presets,
    load_presets_payload,
)


def _preset(**overrides: object) -> dict[str, object]:
    preset: dict[str, object] = {
        "name": "small",
        "variables": [
            {"name": "a", "margin": {"kind": "continuous"}, "f1": {"copula": "gumbel", "tau": 0.5}},
            {"name": "b", "margin": {"kind": "ordinal", "categories": 3}, "f1": {"copula": "frank", "tau": 0.3}},
        ],
    }
    preset.update(overrides)
    return preset


class CandidateTests(unittest.TestCase):
    def test_packaged_defaults(self) -> None:
        sets = load_candidates()
        self.assertEqual(sets.positive[0], "bvn")
        self.assertIn("joe_r1", sets.negative)
        self.assertIn("bb8", sets.for_variable(negative=False, continuous=True))
        self.assertNotIn("bb8", sets.for_variable(negative=False, continuous=False))
        self.assertEqual(sets.for_variable(negative=True, continuous=True), sets.negative)

    def test_wrong_direction(self) -> None:
        with self.assertRaises(RuntimeError) as ctx:
            load_candidates_payload({"positive": ["gumbel_r1"], "negative": ["frank"]})
        self.assertIn("cannot reach positive", str(ctx.exception))

    def test_duplicate_candidate(self) -> None:
        with self.assertRaises(RuntimeError) as ctx:
            load_candidates_payload({"positive": ["frank", "FRANK"], "negative": ["frank"]})
        self.assertIn("Duplicate candidate", str(ctx.exception))

    def test_unknown_family(self) -> None:
        with self.assertRaises(RuntimeError) as ctx:
            load_candidates_payload({"positive": ["clayton"], "negative": ["frank"]})
        self.assertIn("clayton", str(ctx.exception))

    def test_empty_set(self) -> None:
        with self.assertRaises(RuntimeError) as ctx:
            load_candidates_payload({"positive": [], "negative": ["frank"]})
        self.assertIn("candidates JSON schema", str(ctx.exception))

    def test_missing_file(self) -> None:
        with self.assertRaises(RuntimeError) as ctx:
            load_candidates("/nonexistent/candidates.json")
        self.assertIn("not found", str(ctx.exception))

    def test_file_override(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "candidates.json")
            with open(path, "w", encoding="utf-8") as handle:
                json.dump({"positive": ["frank"], "negative": ["frank"]}, handle)
            sets = load_candidates(path)
        self.assertEqual(sets.positive, ("frank",))


class PresetTests(unittest.TestCase):
    def test_packaged_presets(self) -> None:
        presets = load_presets()
        self.assertEqual(presets.get("swiss-2f").factors, 2)
        self.assertTrue(presets.get("gss-1f").reconstructed)

    def test_unknown_preset(self) -> None:
        with self.assertRaises(RuntimeError) as ctx:
            load_presets().get("missing")
        self.assertIn("political-1f", str(ctx.exception))

    def test_duplicate_preset(self) -> None:
        with self.assertRaises(RuntimeError) as ctx:
            load_presets_payload({"presets": [_preset(), _preset()]})
        self.assertIn("Duplicate preset", str(ctx.exception))

    def test_two_factor_needs_f2(self) -> None:
        with self.assertRaises(RuntimeError) as ctx:
            load_presets_payload({"presets": [_preset(factors=2)]})
        self.assertIn("needs an f2 link", str(ctx.exception))

    def test_link_needs_strength(self) -> None:
        preset = _preset()
        preset["variables"][0]["f1"] = {"copula": "gumbel"}  # type: ignore[index]
        with self.assertRaises(RuntimeError) as ctx:
            load_presets_payload({"presets": [preset]})
        self.assertIn("tau or params", str(ctx.exception))


if __name__ == "__main__":
    unittest.main()
