"""What-if interventions and per-area score deltas.

Each intervention is a pure transform touching disjoint state:

* PayPoint banking  -> the score table (PayPoints score like Post Offices)
* cash recyclers    -> the point set (lonely free ATMs become recyclers)
* digital inclusion -> area IUC levels

so any application order gives the same final dataset.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

from finex.errors import InvalidConfigError, MissingBaselineError
from finex.index import AreaRecord, IndexRun, ScoringSettings, compute_index
from finex.indicators import IndicatorVector
from finex.infrastructure import (
    AlternativeSet,
    InfraKind,
    InfrastructurePoint,
    ScoreTable,
    lonely_atms,
)

AFFECTED_EPS = 1e-9


class Intervention(str, Enum):
    PAYPOINT_BANKING = "paypoint_banking"
    CASH_RECYCLERS = "cash_recyclers"
    DIGITAL_INCLUSION = "digital_inclusion"

    @classmethod
    def parse(cls, text) -> "Intervention":
        if isinstance(text, cls):
            return text
        key = "".join(ch for ch in str(text).lower() if ch.isalnum())
        for m in cls:
            if m.value.replace("_", "") == key:
                return m
        raise InvalidConfigError(f"unknown intervention {text!r}")


class BoundsPolicy(str, Enum):
    FROZEN_BASELINE = "frozen_baseline"
    RECOMPUTE = "recompute"

    @classmethod
    def parse(cls, text) -> "BoundsPolicy":
        if isinstance(text, cls):
            return text
        key = "".join(ch for ch in str(text).lower() if ch.isalnum())
        for m in cls:
            if m.value.replace("_", "") == key:
                return m
        raise InvalidConfigError(f"unknown bounds policy {text!r}")


@dataclass(frozen=True)
class ScenarioSpec:
    interventions: tuple = ()
    recycler_lonely_threshold: float = 250.0
    digital_from: int = 10
    digital_to: int = 7
    bounds_policy: BoundsPolicy = BoundsPolicy.FROZEN_BASELINE

    def __post_init__(self):
        ivs = tuple(Intervention.parse(i) for i in self.interventions)
        if len(set(ivs)) != len(ivs):
            raise InvalidConfigError("an intervention is listed twice")
        object.__setattr__(self, "interventions", ivs)
        object.__setattr__(self, "bounds_policy", BoundsPolicy.parse(self.bounds_policy))
        if not self.recycler_lonely_threshold > 0:
            raise InvalidConfigError("recycler_lonely_threshold must be > 0")
        for lvl in (self.digital_from, self.digital_to):
            if lvl not in range(1, 11):
                raise InvalidConfigError(f"IUC level {lvl} outside 1..10")
        # IUC 10 is the least engaged, so an upgrade lowers the level
        if not self.digital_to < self.digital_from:
            raise InvalidConfigError("digital_to must be below digital_from")

    def to_dict(self) -> dict:
        return {
            "interventions": [i.value for i in self.interventions],
            "recycler_lonely_threshold": self.recycler_lonely_threshold,
            "digital_from": self.digital_from,
            "digital_to": self.digital_to,
            "bounds_policy": self.bounds_policy.value,
        }


@dataclass(frozen=True)
class ScenarioDataset:
    areas: tuple
    points: tuple
    score_table: ScoreTable


def apply_paypoint(table: ScoreTable) -> ScoreTable:
    """PayPoints offer Post-Office-style banking: score them as Post Offices.

    Points keep their PayPoint kind; only the table changes.
    """
    return table.with_overrides({InfraKind.PAYPOINT: table[InfraKind.POST_OFFICE]})


def apply_recyclers(points: Sequence[InfrastructurePoint], threshold: float = 250.0) -> list[InfrastructurePoint]:
    """Convert every free ATM with no free alternative within ``threshold`` into a recycler."""
    flags = lonely_atms(points, threshold, AlternativeSet.FREE_ONLY)
    convert = {r.point_id for r in flags if r.lonely and r.kind is InfraKind.FREE_ATM}
    return [replace(p, kind=InfraKind.RECYCLER) if p.id in convert else p for p in points]


def apply_digital(vectors: Sequence[IndicatorVector], from_level: int = 10, to_level: int = 7) -> list[IndicatorVector]:
    return [replace(v, iuc_score=to_level) if v.iuc_score == from_level else v for v in vectors]


def apply_intervention(data: ScenarioDataset, which: Intervention, spec: ScenarioSpec) -> ScenarioDataset:
    which = Intervention.parse(which)
    if which is Intervention.PAYPOINT_BANKING:
        return replace(data, score_table=apply_paypoint(data.score_table))
    if which is Intervention.CASH_RECYCLERS:
        return replace(data, points=tuple(apply_recyclers(data.points, spec.recycler_lonely_threshold)))
    upgraded = apply_digital([a.indicators for a in data.areas], spec.digital_from, spec.digital_to)
    areas = tuple(replace(a, indicators=v) for a, v in zip(data.areas, upgraded))
    return replace(data, areas=areas)


def transform(data: ScenarioDataset, spec: ScenarioSpec) -> ScenarioDataset:
    for which in spec.interventions:
        data = apply_intervention(data, which, spec)
    return data


@dataclass(frozen=True)
class AreaDelta:
    area_id: str
    baseline_score: float
    scenario_score: float
    delta: float


@dataclass
class ScenarioReport:
    spec: ScenarioSpec
    rows: list[AreaDelta]
    summary: dict
    run: IndexRun
    dataset: ScenarioDataset
    notes: list[str] = field(default_factory=list)

    def deltas(self) -> dict:
        return {r.area_id: r.delta for r in self.rows}


def summarize(rows: Sequence[AreaDelta]) -> dict:
    if not rows:
        return {"max_delta": 0.0, "mean_delta": 0.0, "areas_affected": 0}
    ds = [r.delta for r in rows]
    return {
        "max_delta": max(ds),
        "mean_delta": math.fsum(ds) / len(ds),
        "areas_affected": sum(1 for d in ds if abs(d) > AFFECTED_EPS),
    }


def run_scenario(
    spec: ScenarioSpec,
    areas: Sequence[AreaRecord],
    points: Sequence[InfrastructurePoint],
    settings: ScoringSettings | None = None,
    baseline: IndexRun | None = None,
) -> ScenarioReport:
    """Apply ``spec`` to the dataset, re-score, and diff against the baseline.

    Under the frozen-baseline policy the baseline run supplies the
    normalisation bounds and is required. Under recompute, a missing baseline
    is computed here.
    """
    settings = settings or (baseline.settings if baseline else ScoringSettings())
    if baseline is None:
        if spec.bounds_policy is BoundsPolicy.FROZEN_BASELINE:
            raise MissingBaselineError("frozen-baseline scenario needs a baseline run with recorded bounds")
        baseline = compute_index(areas, points, settings, classify=False)

    data = ScenarioDataset(tuple(areas), tuple(points), settings.score_table)
    data = transform(data, spec)
    scen_settings = replace(settings, score_table=data.score_table)
    bounds = baseline.bounds if spec.bounds_policy is BoundsPolicy.FROZEN_BASELINE else None
    run = compute_index(data.areas, data.points, scen_settings, bounds=bounds, classify=False)

    base_scores = baseline.scores()
    rows = []
    for r in run.results:
        b = base_scores[r.area_id]
        rows.append(AreaDelta(r.area_id, b, r.score, r.score - b))

    notes = []
    converted = sorted(p.id for p in data.points if p.kind is InfraKind.RECYCLER)
    if Intervention.CASH_RECYCLERS in spec.interventions:
        notes.append(f"recyclers: {len(converted)} ATM(s) converted: {', '.join(converted) or '-'}")
    if Intervention.DIGITAL_INCLUSION in spec.interventions:
        upgraded = [a.area_id for a in sorted(areas, key=lambda a: a.area_id) if a.indicators.iuc_score == spec.digital_from]
        notes.append(f"digital inclusion: {len(upgraded)} area(s) upgraded: {', '.join(upgraded) or '-'}")
    return ScenarioReport(spec, rows, summarize(rows), run, data, notes)
