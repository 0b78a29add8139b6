"""Stage orchestration: ingest -> catchment -> nni -> index -> validate -> scenario -> report.

Outputs are written to a staging directory and only moved into place once
every requested stage has succeeded, so a failed run leaves no partial files.
"""
from __future__ import annotations

import logging
import shutil
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from finex import __version__
from finex.config import RunConfig
from finex.errors import InsufficientPointsError, StageError
from finex.geometry import StudyArea
from finex.index import IndexRun, compute_index
from finex.indicators import correlation_screen
from finex.infrastructure import AlternativeSet, InfraKind, bin_summary, lonely_atms, nn_stats
from finex.ingest import Dataset, ingest
from finex.outputs import (
    Formatter,
    catchments_rows,
    feature_collection,
    index_properties,
    index_rows,
    nnstats_rows,
    scenario_properties,
    scenario_rows,
    validation_rows,
    write_csv,
    write_json,
)
from finex.scenario import Intervention, ScenarioReport, ScenarioSpec, run_scenario
from finex.validation import RankComparison, rank_and_compare, ward_medians

log = logging.getLogger(__name__)

STAGES = ("catchment", "nni", "index", "validate", "scenario")

ARTIFACTS = (
    "catchments.csv",
    "nnstats.csv",
    "index.csv",
    "index.geojson",
    "validation.csv",
    "scenario_delta.csv",
    "scenario_delta.geojson",
    "run_report.json",
)

# nearest-neighbour statistics are reported for ingested kinds only
NN_KINDS = tuple(k for k in InfraKind if k is not InfraKind.RECYCLER)


@dataclass
class PipelineResult:
    dataset: Dataset
    run: IndexRun | None = None
    nn: dict = field(default_factory=dict)
    comparison: RankComparison | None = None
    medians: dict | None = None
    scenario: ScenarioReport | None = None
    per_intervention: dict = field(default_factory=dict)
    written: list[str] = field(default_factory=list)
    report: dict = field(default_factory=dict)


@contextmanager
def stage(name: str):
    log.info("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def compute_nn_table(points, study_area: StudyArea | None, mode: str) -> tuple[dict, list[str]]:
    stats, notes = {}, []
    for kind in NN_KINDS:
        locs = [p.location for p in points if p.kind is kind]
        if len(locs) < 2:
            if locs:
                notes.append(f"nearest-neighbour statistics skipped for {kind.value}: only {len(locs)} point")
            continue
        if mode == "bbox":
            xs = {p.x for p in locs}
            ys = {p.y for p in locs}
            if len(xs) < 2 or len(ys) < 2:
                notes.append(f"nearest-neighbour statistics skipped for {kind.value}: degenerate bounding box")
                continue
            area = StudyArea.bounding_box(locs)
        else:
            area = study_area
        try:
            stats[kind] = nn_stats(locs, area)
        except InsufficientPointsError as exc:
            notes.append(f"{kind.value}: {exc}")
    return stats, notes


def _nn_display(stats: dict) -> list[dict]:
    return [
        {
            "kind": k.value,
            "n_points": s.n_points,
            "expected_mean_m": round(s.expected_mean_m, 1),
            "observed_mean_m": round(s.observed_mean_m, 1),
            "nni": round(s.nni, 1),
            "z_score": round(s.z_score, 2),
            "interpretation": s.interpretation,
        }
        for k, s in stats.items()
    ]


def run_pipeline(config: RunConfig, stages=STAGES) -> PipelineResult:
    """Run the requested stages and write their artifacts plus run_report.json."""
    stages = [s for s in STAGES if s in set(stages)]
    fmt = Formatter(config.full_precision)
    out_dir = Path(config.output_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".finex-staging-", dir=out_dir.parent))
    try:
        result = _run(config, stages, fmt, staging)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name in ARTIFACTS:
            stale = out_dir / name
            if stale.exists():
                stale.unlink()
        for name in result.written:
            shutil.move(str(staging / name), str(out_dir / name))
        return result
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def run_all(config: RunConfig) -> PipelineResult:
    return run_pipeline(config, STAGES)


def _run(config: RunConfig, stages, fmt: Formatter, staging: Path) -> PipelineResult:
    with stage("ingest"):
        data = ingest(config)
    res = PipelineResult(data)
    notes = list(data.notes)

    def emit_csv(name, header_rows):
        write_csv(staging / name, *header_rows)
        res.written.append(name)

    def emit_json(name, payload):
        write_json(staging / name, payload)
        res.written.append(name)

    needs_index = any(s in stages for s in ("catchment", "index", "validate", "scenario"))
    if needs_index:
        with stage("index"):
            res.run = compute_index(data.areas, data.points, config.scoring)
            notes.extend(res.run.normalized.notes)

    if "catchment" in stages:
        with stage("catchment"):
            emit_csv("catchments.csv", catchments_rows(res.run.profiles, fmt))

    if "nni" in stages:
        with stage("nni"):
            res.nn, nn_notes = compute_nn_table(data.points, data.study_area, config.nni_area)
            notes.extend(nn_notes)
            emit_csv("nnstats.csv", nnstats_rows(res.nn, fmt))

    if "index" in stages:
        with stage("index"):
            emit_csv("index.csv", index_rows(res.run, data.areas, fmt))
            emit_json("index.geojson", feature_collection(config.crs, data.areas, index_properties(res.run, data.areas, fmt)))

    if "validate" in stages and data.ward_lookup is not None:
        with stage("validate"):
            res.medians = ward_medians(res.run.results, data.ward_lookup)
            if data.historical_ranks is not None:
                res.comparison = rank_and_compare(res.medians, data.historical_ranks, data.ward_lookup)
            else:
                notes.append("no historical ranks supplied; validation.csv carries current ranks only")
            emit_csv("validation.csv", validation_rows(res.comparison, res.medians, data.ward_lookup, fmt))

    if "scenario" in stages and config.scenario is not None:
        with stage("scenario"):
            spec = config.scenario
            res.scenario = run_scenario(spec, data.areas, data.points, config.scoring, baseline=res.run)
            if len(spec.interventions) > 1:
                # canonical order so artifacts do not depend on how the config lists them
                for which in [i for i in Intervention if i in spec.interventions]:
                    single = ScenarioSpec(
                        (which,), spec.recycler_lonely_threshold, spec.digital_from, spec.digital_to, spec.bounds_policy
                    )
                    rep = run_scenario(single, data.areas, data.points, config.scoring, baseline=res.run)
                    res.per_intervention[which.value] = rep.deltas()
            notes.extend(res.scenario.notes)
            emit_csv("scenario_delta.csv", scenario_rows(res.scenario, res.per_intervention, fmt))
            emit_json(
                "scenario_delta.geojson",
                feature_collection(config.crs, data.areas, scenario_properties(res.scenario, res.per_intervention, fmt)),
            )

    with stage("report"):
        res.report = build_report(config, res, notes)
        res.written.append("run_report.json")
        write_json(staging / "run_report.json", {**res.report, "artifacts": sorted(res.written)})
    return res


def build_report(config: RunConfig, res: PipelineResult, notes: list[str]) -> dict:
    data = res.dataset
    report = {
        "tool": "finex",
        "version": __version__,
        "config": config.echo(),
        "counts": {
            "areas": len(data.areas),
            "points": {k.value: sum(1 for p in data.points if p.kind is k) for k in InfraKind},
            "dropped_points": data.dropped_points,
        },
        "notes": notes,
    }
    w = config.scoring.weights
    report["weights"] = {
        **w.to_dict(),
        "percent_2dp": w.percentages(2),
        "sum": sum(w.sub_weights().values()),
    }
    run = res.run
    if run is not None:
        report["fingerprint"] = run.fingerprint
        report["normalization_bounds"] = run.bounds.to_dict()
        report["correlation_screen"] = (
            correlation_screen([run.oriented[a] for a in sorted(run.oriented)]).to_dict()
            if len(run.oriented) >= 3 else None
        )
        report["jenks"] = {"k": run.jenks.k, "breaks": run.jenks.breaks, "ssd": run.jenks.ssd} if run.jenks else None
        thr = config.scoring.lonely_threshold
        report["lonely_atms"] = {
            "threshold_m": thr,
            "index_alternative_set": config.scoring.alternative_set.value,
            "any_atm": bin_summary(lonely_atms(data.points, thr, AlternativeSet.ANY_ATM)),
            "free_only": bin_summary(lonely_atms(data.points, thr, AlternativeSet.FREE_ONLY)),
        }
    if res.nn:
        report["nn_table"] = _nn_display(res.nn)
    if res.medians is not None:
        report["validation"] = {
            "wards": len(res.medians),
            "spearman": res.comparison.spearman if res.comparison else None,
            "pearson_medians_vs_historical": res.comparison.pearson_medians if res.comparison else None,
            "rank_direction": "1 = lowest median score (most excluded)",
        }
    if res.scenario is not None:
        report["scenario"] = {
            "spec": res.scenario.spec.to_dict(),
            "summary": res.scenario.summary,
            "per_intervention_max_delta": {
                n: max(d.values()) if d else 0.0 for n, d in res.per_intervention.items()
            },
        }
    return report
