"""End-to-end scoring of one dataset: catchments -> indicators -> normalised
components -> composite score -> natural-breaks class."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Sequence

from finex.composite import IndexResult, JenksResult, WeightScheme, aggregate, jenks_breaks
from finex.geometry import ProjPoint
from finex.indicators import (
    IndicatorVector,
    NormalizationBounds,
    NormalizedTable,
    align_polarity,
    normalize,
)
from finex.infrastructure import (
    AlternativeSet,
    CatchmentProfile,
    InfrastructurePoint,
    LonelyResult,
    ScoreTable,
    build_profiles,
    lonely_atms,
)


@dataclass(frozen=True)
class AreaRecord:
    area_id: str
    centroid: ProjPoint
    indicators: IndicatorVector
    # GeoJSON geometry dict in the dataset CRS, when supplied
    polygon: dict | None = None
    external_label: str | None = None


@dataclass(frozen=True)
class ScoringSettings:
    radius: float = 500.0
    lonely_threshold: float = 250.0
    alternative_set: AlternativeSet = AlternativeSet.ANY_ATM
    score_table: ScoreTable = field(default_factory=ScoreTable)
    weights: WeightScheme = field(default_factory=WeightScheme.default)
    jenks_k: int = 5

    def to_dict(self) -> dict:
        return {
            "catchment_radius_m": self.radius,
            "lonely_threshold_m": self.lonely_threshold,
            "alternative_set": self.alternative_set.value,
            "score_table": self.score_table.to_dict(),
            "weights": self.weights.to_dict(),
            "jenks_k": self.jenks_k,
        }


def fingerprint(payload) -> str:
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass
class IndexRun:
    settings: ScoringSettings
    profiles: list[CatchmentProfile]
    vectors: list[IndicatorVector]
    oriented: dict
    normalized: NormalizedTable
    results: list[IndexResult]
    lonely: list[LonelyResult]
    jenks: JenksResult | None = None
    fingerprint: str = ""

    @property
    def bounds(self) -> NormalizationBounds:
        return self.normalized.bounds

    def scores(self) -> dict:
        return {r.area_id: r.score for r in self.results}


def compute_index(
    areas: Sequence[AreaRecord],
    points: Sequence[InfrastructurePoint],
    settings: ScoringSettings | None = None,
    bounds: NormalizationBounds | None = None,
    classify: bool = True,
) -> IndexRun:
    """Score every area. Results come back in ascending area-id order.

    With ``bounds`` (e.g. frozen from a baseline run) normalisation reuses
    them and clamps to [0, 1]; otherwise bounds come from this dataset.
    """
    settings = settings or ScoringSettings()
    settings.weights.validate()
    areas = sorted(areas, key=lambda a: a.area_id)
    profiles = build_profiles(
        [(a.area_id, a.centroid) for a in areas],
        points,
        radius=settings.radius,
        table=settings.score_table,
        lonely_threshold=settings.lonely_threshold,
        alternative_set=settings.alternative_set,
    )
    vectors = [
        replace(a.indicators, avcash_raw=p.avcash_raw, lonely_count=p.lonely_free_atms)
        for a, p in zip(areas, profiles)
    ]
    oriented = {v.area_id: align_polarity(v) for v in vectors}
    table = normalize(oriented, bounds)
    fp = fingerprint({"settings": settings.to_dict(), "bounds": table.bounds.to_dict()})
    results = [
        IndexResult(area_id, comps, aggregate(comps, settings.weights), None, fp)
        for area_id, comps in zip(table.area_ids, table.components)
    ]
    jr = None
    if classify:
        jr = jenks_breaks([r.score for r in results], settings.jenks_k)
        results = [replace(r, jenks_class=c) for r, c in zip(results, jr.labels)]
    lonely = lonely_atms(points, settings.lonely_threshold, settings.alternative_set)
    return IndexRun(settings, profiles, vectors, oriented, table, results, lonely, jr, fp)
