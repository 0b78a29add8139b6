"""Run configuration (YAML or JSON) and its provenance echo."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from finex.composite import WeightScheme
from finex.errors import InvalidConfigError
from finex.index import ScoringSettings
from finex.infrastructure import AlternativeSet, ScoreTable
from finex.scenario import BoundsPolicy, ScenarioSpec

INPUT_KEYS = ("areas", "infrastructure", "study_area", "area_polygons", "ward_lookup", "historical_ranks")
REQUIRED_INPUTS = ("areas", "infrastructure")

NNI_AREA_MODES = ("study_area", "bbox")
MISSING_POLICIES = ("abort", "impute_median")

_KNOWN_KEYS = {
    "crs", "inputs", "output_dir", "catchment_radius_m", "lonely_threshold_m", "alternative_set",
    "score_table", "weights", "jenks_k", "nni_area", "dedup_cashback", "missing_values",
    "full_precision", "scenario", "bounds_policy",
}


@dataclass(frozen=True)
class RunConfig:
    crs: str
    inputs: dict
    output_dir: Path
    scoring: ScoringSettings = field(default_factory=ScoringSettings)
    nni_area: str = "study_area"
    dedup_cashback: bool = True
    missing_values: str = "abort"
    full_precision: bool = False
    scenario: ScenarioSpec | None = None
    bounds_policy: BoundsPolicy = BoundsPolicy.FROZEN_BASELINE

    def input_path(self, key: str) -> Path | None:
        return self.inputs.get(key)

    def echo(self) -> dict:
        """Config as written into every run report.

        Input paths are reduced to file names so that relocating a dataset
        does not change the outputs.
        """
        return {
            "crs": self.crs,
            "inputs": {k: Path(v).name for k, v in sorted(self.inputs.items())},
            **self.scoring.to_dict(),
            "nni_area": self.nni_area,
            "dedup_cashback": self.dedup_cashback,
            "missing_values": self.missing_values,
            "full_precision": self.full_precision,
            "bounds_policy": self.bounds_policy.value,
            "scenario": self.scenario.to_dict() if self.scenario else None,
            "catchment_boundary": "inclusive (distance <= radius)",
        }

    def with_overrides(self, radius=None, lonely_threshold=None, jenks_k=None, output_dir=None) -> "RunConfig":
        scoring = self.scoring
        if radius is not None:
            scoring = replace(scoring, radius=_positive(radius, "radius"))
        if lonely_threshold is not None:
            scoring = replace(scoring, lonely_threshold=_positive(lonely_threshold, "lonely threshold"))
        if jenks_k is not None:
            scoring = replace(scoring, jenks_k=_jenks_k(jenks_k))
        cfg = replace(self, scoring=scoring)
        if output_dir is not None:
            cfg = replace(cfg, output_dir=Path(output_dir))
        return cfg


def _positive(v, name) -> float:
    try:
        v = float(v)
    except (TypeError, ValueError):
        raise InvalidConfigError(f"{name} must be a number, got {v!r}") from None
    if not (math.isfinite(v) and v > 0):
        raise InvalidConfigError(f"{name} must be > 0, got {v}")
    return v


def _jenks_k(v) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise InvalidConfigError(f"jenks_k must be a positive integer, got {v!r}")
    return v


def _choice(v, options, name):
    if v not in options:
        raise InvalidConfigError(f"{name} must be one of {options}, got {v!r}")
    return v


def read_config_file(path: Path) -> dict:
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text) if path.suffix.lower() == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise InvalidConfigError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise InvalidConfigError(f"config {path} must be a mapping")
    return data


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise InvalidConfigError(f"config file not found: {path}")
    return config_from_dict(read_config_file(path), base_dir=path.parent)


def config_from_dict(data: dict, base_dir=".") -> RunConfig:
    base_dir = Path(base_dir)
    unknown = sorted(set(data) - _KNOWN_KEYS)
    if unknown:
        raise InvalidConfigError(f"unknown config keys: {unknown}")
    if not data.get("crs"):
        raise InvalidConfigError("config must declare the projected CRS of all inputs ('crs')")

    raw_inputs = data.get("inputs") or {}
    bad = sorted(set(raw_inputs) - set(INPUT_KEYS))
    if bad:
        raise InvalidConfigError(f"unknown input keys: {bad}")
    inputs = {}
    for key, rel in raw_inputs.items():
        if rel is None:
            continue
        p = Path(rel)
        if not p.is_absolute():
            p = base_dir / p
        if not p.is_file():
            raise InvalidConfigError(f"input '{key}' not found: {p}")
        inputs[key] = p
    for key in REQUIRED_INPUTS:
        if key not in inputs:
            raise InvalidConfigError(f"missing required input '{key}'")

    out = Path(data.get("output_dir", "finex_out"))
    if not out.is_absolute():
        out = base_dir / out

    try:
        table = ScoreTable().with_overrides(data.get("score_table") or {})
        alt = AlternativeSet.parse(data.get("alternative_set", "any_atm"))
    except ValueError as exc:
        raise InvalidConfigError(str(exc)) from None
    weights = WeightScheme.from_mapping(data["weights"]) if data.get("weights") else WeightScheme.default()
    scoring = ScoringSettings(
        radius=_positive(data.get("catchment_radius_m", 500.0), "catchment_radius_m"),
        lonely_threshold=_positive(data.get("lonely_threshold_m", 250.0), "lonely_threshold_m"),
        alternative_set=alt,
        score_table=table,
        weights=weights,
        jenks_k=_jenks_k(data.get("jenks_k", 5)),
    )

    policy = BoundsPolicy.parse(data.get("bounds_policy", "frozen_baseline"))
    scenario = None
    if data.get("scenario"):
        sc = dict(data["scenario"])
        sc.setdefault("bounds_policy", policy)
        try:
            scenario = ScenarioSpec(
                interventions=tuple(sc.pop("interventions", ())),
                **{k: v for k, v in sc.items()},
            )
        except TypeError as exc:
            raise InvalidConfigError(f"bad scenario block: {exc}") from None

    nni_area = _choice(data.get("nni_area", "study_area"), NNI_AREA_MODES, "nni_area")
    if nni_area == "study_area" and "study_area" not in inputs:
        raise InvalidConfigError("nni_area 'study_area' requires inputs.study_area (or set nni_area: bbox)")

    return RunConfig(
        crs=str(data["crs"]),
        inputs=inputs,
        output_dir=out,
        scoring=scoring,
        nni_area=nni_area,
        dedup_cashback=bool(data.get("dedup_cashback", True)),
        missing_values=_choice(data.get("missing_values", "abort"), MISSING_POLICIES, "missing_values"),
        full_precision=bool(data.get("full_precision", False)),
        scenario=scenario,
        bounds_policy=policy,
    )
