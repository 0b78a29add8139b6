"""CSV / GeoJSON / JSON writers. Everything written here is deterministic:
fixed column order, rows sorted by key, fixed float formatting."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from finex.indicators import VARIABLES
from finex.infrastructure import InfraKind
from finex.validation import average_ranks

GEOJSON_NS = "finex:"


class Formatter:
    """Scores at 4 d.p. by default; full repr precision on request."""

    def __init__(self, full_precision: bool = False, places: int = 4):
        self.full = full_precision
        self.places = places

    def num(self, v) -> str:
        if v is None:
            return ""
        if isinstance(v, bool):
            return str(v).lower()
        if isinstance(v, int):
            return str(v)
        if not math.isfinite(v):
            return "inf" if v > 0 else "-inf" if v < 0 else "nan"
        if self.full:
            return repr(float(v) + 0.0)
        s = f"{v:.{self.places}f}"
        # avoid "-0.0000"
        if s.lstrip("-").strip("0.") == "":
            s = s.lstrip("-")
        return s

    def json_num(self, v):
        if v is None:
            return None
        if isinstance(v, (bool, int)):
            return v
        if not math.isfinite(v):
            return None
        return float(v) + 0.0 if self.full else float(self.num(v))


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)


def write_json(path: Path, payload) -> None:
    text = json.dumps(payload, indent=2, allow_nan=False, ensure_ascii=False)
    path.write_text(text + "\n", encoding="utf-8")


def catchments_rows(profiles, fmt: Formatter):
    header = ["area_id"] + [f"n_{k.value}" for k in InfraKind] + ["avcash_raw", "lonely_free_atms"]
    rows = [
        [p.area_id] + [p.counts[k] for k in InfraKind] + [fmt.num(p.avcash_raw), p.lonely_free_atms]
        for p in sorted(profiles, key=lambda p: p.area_id)
    ]
    return header, rows


def nnstats_rows(stats: dict, fmt: Formatter):
    header = ["kind", "n_points", "area_m2", "expected_mean_m", "observed_mean_m", "nni", "z_score", "interpretation"]
    rows = []
    for kind in InfraKind:
        s = stats.get(kind)
        if s is None:
            continue
        rows.append([
            kind.value, s.n_points, fmt.num(s.area_m2), fmt.num(s.expected_mean_m),
            fmt.num(s.observed_mean_m), fmt.num(s.nni), fmt.num(s.z_score), s.interpretation,
        ])
    return header, rows


def index_rows(run, areas, fmt: Formatter):
    labels = {a.area_id: a.external_label for a in areas}
    with_label = any(labels.values())
    header = ["area_id"] + [f"c_{v}" for v in VARIABLES] + ["score", "jenks_class"]
    if with_label:
        header.append("label")
    header.append("config_fingerprint")
    rows = []
    for r in run.results:
        row = [r.area_id] + [fmt.num(r.components[v]) for v in VARIABLES] + [fmt.num(r.score), r.jenks_class]
        if with_label:
            row.append(labels.get(r.area_id) or "")
        row.append(r.config_fingerprint)
        rows.append(row)
    return header, rows


def _geometry(area):
    if area.polygon is not None:
        return area.polygon
    return {"type": "Point", "coordinates": [area.centroid.x, area.centroid.y]}


def feature_collection(crs: str, areas, props_by_area: dict) -> dict:
    feats = []
    for a in sorted(areas, key=lambda a: a.area_id):
        props = {GEOJSON_NS + "area_id": a.area_id}
        props.update({GEOJSON_NS + k: v for k, v in props_by_area[a.area_id].items()})
        feats.append({"type": "Feature", "id": a.area_id, "geometry": _geometry(a), "properties": props})
    return {
        "type": "FeatureCollection",
        "crs": {"type": "name", "properties": {"name": crs}},
        "features": feats,
    }


def index_properties(run, areas, fmt: Formatter) -> dict:
    labels = {a.area_id: a.external_label for a in areas}
    prof = {p.area_id: p for p in run.profiles}
    out = {}
    for r in run.results:
        props = {
            "score": fmt.json_num(r.score),
            "class": r.jenks_class,
            "avcash_raw": fmt.json_num(prof[r.area_id].avcash_raw),
            "lonely_free_atms": prof[r.area_id].lonely_free_atms,
        }
        props.update({f"c_{v}": fmt.json_num(r.components[v]) for v in VARIABLES})
        if labels.get(r.area_id):
            props["label"] = labels[r.area_id]
        out[r.area_id] = props
    return out


def validation_rows(comparison, medians, lookup, fmt: Formatter):
    header = ["ward_id", "ward_name", "median_score", "rank_now", "rank_then", "delta"]
    if comparison is None:
        wards = sorted(medians)
        ranks = average_ranks([medians[w] for w in wards])
        rows = [[w, lookup.name(w), fmt.num(medians[w]), _rank(r), "", ""] for w, r in zip(wards, ranks)]
        return header, rows
    rows = [
        [w.ward_id, w.name, fmt.num(w.median_score), _rank(w.rank_now), _rank(w.rank_then), _rank(w.delta)]
        for w in comparison.wards
    ]
    return header, rows


def _rank(r: float) -> str:
    # ranks are integers unless tied
    return str(int(r)) if float(r).is_integer() else f"{r:.1f}"


def scenario_rows(report, per_intervention: dict, fmt: Formatter):
    names = list(per_intervention)
    header = ["area_id", "baseline_score", "scenario_score", "delta"] + [f"delta_{n}" for n in names]
    rows = []
    for r in report.rows:
        row = [r.area_id, fmt.num(r.baseline_score), fmt.num(r.scenario_score), fmt.num(r.delta)]
        row += [fmt.num(per_intervention[n][r.area_id]) for n in names]
        rows.append(row)
    return header, rows


def scenario_properties(report, per_intervention: dict, fmt: Formatter) -> dict:
    out = {}
    for r in report.rows:
        props = {
            "baseline_score": fmt.json_num(r.baseline_score),
            "scenario_score": fmt.json_num(r.scenario_score),
            "delta": fmt.json_num(r.delta),
        }
        for n, d in per_intervention.items():
            props[f"delta_{n}"] = fmt.json_num(d[r.area_id])
        out[r.area_id] = props
    return out
