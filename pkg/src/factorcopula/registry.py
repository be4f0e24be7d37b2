"""Candidate-set and scenario-preset configuration.

Loads and validates the copula candidate sets used by selection and the
simulation scenario presets, from the packaged JSON files or from files
named in the environment.
"""

from __future__ import annotations

import json
import os
from collections.abc import Mapping
from dataclasses import dataclass
from importlib import resources

from .copulas import parse_copula_name
from .errors import ConfigError
from .schemas import CandidateSetsPayload, PresetCollection, ScenarioPreset

_PACKAGE = "factorcopula"
CANDIDATES_FILE = "candidates.json"
PRESETS_FILE = "presets.json"


@dataclass(frozen=True)
class CandidateSets:
    """Ordered candidate copula names per dependence sign.

    Continuous columns use the ``*_continuous`` lists when non-empty; list
    order is the tie-break order of selection.
    """

    positive: tuple[str, ...]
    negative: tuple[str, ...]
    positive_continuous: tuple[str, ...] = ()
    negative_continuous: tuple[str, ...] = ()

    def for_variable(self, negative: bool, continuous: bool) -> tuple[str, ...]:
        if negative:
            return self.negative_continuous if continuous and self.negative_continuous else self.negative
        return self.positive_continuous if continuous and self.positive_continuous else self.positive


def _check_direction(name: str, negative: bool) -> str:
    name = name.strip().lower()
    if not name:
        raise ConfigError("Candidate copula names must be non-empty")
    family, variant = parse_copula_name(name)
    if family.comprehensive:
        return name
    if variant.negates_tau != negative:
        direction = "negative" if negative else "positive"
        raise ConfigError(f"Candidate {name!r} cannot reach {direction} dependence")
    return name


def _unique(names: list[str], label: str, negative: bool) -> tuple[str, ...]:
    seen: list[str] = []
    for raw in names:
        name = _check_direction(raw, negative)
        if name in seen:
            raise ConfigError(f"Duplicate candidate {name!r} in {label} set")
        seen.append(name)
    return tuple(seen)


def load_candidates_payload(payload: Mapping[str, object]) -> CandidateSets:
    try:
        sets = CandidateSetsPayload.model_validate(payload)
    except Exception as exc:
        raise ConfigError(f"Invalid candidates JSON schema: {exc}") from exc
    return CandidateSets(
        positive=_unique(sets.positive, "positive", False),
        negative=_unique(sets.negative, "negative", True),
        positive_continuous=_unique(sets.positive_continuous, "positive_continuous", False),
        negative_continuous=_unique(sets.negative_continuous, "negative_continuous", True),
    )


@dataclass(frozen=True)
class ResolvedPresets:
    presets_by_name: dict[str, ScenarioPreset]

    def get(self, name: str) -> ScenarioPreset:
        try:
            return self.presets_by_name[name]
        except KeyError:
            known = ", ".join(sorted(self.presets_by_name))
            raise ConfigError(f"Unknown preset {name!r}; available: {known}") from None


def load_presets_payload(payload: Mapping[str, object]) -> ResolvedPresets:
    try:
        collection = PresetCollection.model_validate(payload)
    except Exception as exc:
        raise ConfigError(f"Invalid presets JSON schema: {exc}") from exc

    by_name: dict[str, ScenarioPreset] = {}
    for preset in collection.presets:
        name = preset.name.strip()
        if not name:
            raise ConfigError("Preset name must be non-empty")
        if name in by_name:
            raise ConfigError(f"Duplicate preset {name!r} in presets JSON")
        for var in preset.variables:
            parse_copula_name(var.f1.copula)
            if preset.factors == 2 and var.f2 is None:
                raise ConfigError(f"Preset {name!r} variable {var.name!r} needs an f2 link")
            if var.f2 is not None:
                parse_copula_name(var.f2.copula)
            if var.f1.tau is None and var.f1.params is None:
                raise ConfigError(f"Preset {name!r} variable {var.name!r} needs tau or params")
        by_name[name] = preset
    return ResolvedPresets(by_name)


def _read_json(path: str | None, default_file: str, label: str) -> object:
    if path is None:
        text = (resources.files(_PACKAGE) / "data" / default_file).read_text(encoding="utf-8")
        return json.loads(text)
    if not os.path.exists(path):
        raise ConfigError(f"{label} JSON not found at {path!r}")
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except Exception as exc:
        raise ConfigError(f"Failed to read {label} JSON at {path!r}: {exc}") from exc


def load_candidates(path: str | None = None) -> CandidateSets:
    """Candidate sets from ``path``, or the packaged defaults."""
    payload = _read_json(path, CANDIDATES_FILE, "Candidates")
    if not isinstance(payload, Mapping):
        raise ConfigError("Candidates JSON must be an object")
    return load_candidates_payload(payload)


def load_presets(path: str | None = None) -> ResolvedPresets:
    """Scenario presets from ``path``, or the packaged presets."""
    payload = _read_json(path, PRESETS_FILE, "Presets")
    if not isinstance(payload, Mapping):
        raise ConfigError("Presets JSON must be an object")
    return load_presets_payload(payload)
