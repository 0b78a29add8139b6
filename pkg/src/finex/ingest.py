"""Load and validate input files.

Areas, infrastructure, ward lookups and historical ranks are CSV; polygons
are GeoJSON carrying a top-level ``crs`` member that must name the same
projected CRS as the run config. Geographic (lon/lat) CRSs are refused.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from finex.config import RunConfig
from finex.errors import InvalidParameterError, SchemaError
from finex.geometry import ProjPoint, StudyArea
from finex.index import AreaRecord
from finex.indicators import IndicatorVector, impute_missing
from finex.infrastructure import InfraKind, InfrastructurePoint, OperatorClass
from finex.validation import WardLookup

log = logging.getLogger(__name__)

AREA_COLUMNS = (
    "area_id", "x", "y", "claimant_pct", "median_income", "rented_or_shared_pct",
    "lone_parent_pct", "iuc_score", "car_access_pct",
)
POINT_COLUMNS = ("id", "kind", "x", "y")
WARD_COLUMNS = ("area_id", "ward_id")
RANK_COLUMNS = ("ward_id", "rank")

GEOGRAPHIC_CRS = {"EPSG:4326", "EPSG:4258", "EPSG:4269", "EPSG:4277", "OGC:CRS84", "CRS84", "EPSG:4979"}

TRUE_STRINGS = {"1", "true", "yes", "y", "t"}
FALSE_STRINGS = {"0", "false", "no", "n", "f", ""}


def normalize_crs(name: str) -> str:
    s = str(name).strip().upper()
    m = re.match(r"^URN:OGC:DEF:CRS:([A-Z]+):[^:]*:(\w+)$", s)
    if m:
        s = f"{m.group(1)}:{m.group(2)}"
    if s in ("CRS84", "OGC:1.3:CRS84"):
        s = "OGC:CRS84"
    return s


def check_projected(crs: str, where: str) -> str:
    norm = normalize_crs(crs)
    if norm in GEOGRAPHIC_CRS:
        raise SchemaError(f"CRS {crs} is geographic (lon/lat); inputs must be in a projected metric CRS", file=where)
    return norm


def normalize_postcode(pc: str | None) -> str | None:
    if pc is None:
        return None
    s = "".join(pc.split()).upper()
    return s or None


@dataclass
class Dataset:
    areas: list[AreaRecord]
    points: list[InfrastructurePoint]
    study_area: StudyArea | None = None
    ward_lookup: WardLookup | None = None
    historical_ranks: dict | None = None
    notes: list[str] = field(default_factory=list)
    dropped_points: list[str] = field(default_factory=list)


def _read_csv(path: Path, required) -> list[tuple[int, dict]]:
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"missing columns {missing}", file=path.name, row=1, column=missing[0])
        reader.fieldnames = header
        rows = []
        for row in reader:
            if None in row:
                raise SchemaError("too many fields", file=path.name, row=reader.line_num)
            rows.append((reader.line_num, {k: (v.strip() if v is not None else "") for k, v in row.items()}))
    return rows


def _number(row, col, path, line, optional=False):
    text = row.get(col, "")
    if text == "":
        if optional:
            return None
        raise SchemaError("missing value", file=path.name, row=line, column=col)
    try:
        v = float(text)
    except ValueError:
        raise SchemaError(f"not a number: {text!r}", file=path.name, row=line, column=col) from None
    if not math.isfinite(v):
        raise SchemaError(f"non-finite value {text!r}", file=path.name, row=line, column=col)
    return v


def _integer(row, col, path, line, optional=False):
    v = _number(row, col, path, line, optional)
    if v is None:
        return None
    if v != int(v):
        raise SchemaError(f"not an integer: {row[col]!r}", file=path.name, row=line, column=col)
    return int(v)


def _flag(row, col, path, line) -> bool:
    text = row.get(col, "").lower()
    if text in TRUE_STRINGS:
        return True
    if text in FALSE_STRINGS:
        return False
    raise SchemaError(f"not a boolean: {row[col]!r}", file=path.name, row=line, column=col)


def read_areas(path: Path) -> list[AreaRecord]:
    out, seen = [], {}
    for line, row in _read_csv(path, AREA_COLUMNS):
        area_id = row["area_id"]
        if not area_id:
            raise SchemaError("empty area_id", file=path.name, row=line, column="area_id")
        if area_id in seen:
            raise SchemaError(f"duplicate area_id {area_id!r} (first at row {seen[area_id]})",
                              file=path.name, row=line, column="area_id")
        seen[area_id] = line
        vec = IndicatorVector(
            area_id=area_id,
            claimant_pct=_number(row, "claimant_pct", path, line, optional=True),
            median_income=_number(row, "median_income", path, line, optional=True),
            rented_or_shared_pct=_number(row, "rented_or_shared_pct", path, line, optional=True),
            lone_parent_pct=_number(row, "lone_parent_pct", path, line, optional=True),
            iuc_score=_integer(row, "iuc_score", path, line, optional=True),
            car_access_pct=_number(row, "car_access_pct", path, line, optional=True),
        )
        try:
            vec.validate()
        except InvalidParameterError as exc:
            raise SchemaError(str(exc), file=path.name, row=line) from None
        out.append(AreaRecord(
            area_id=area_id,
            centroid=ProjPoint(_number(row, "x", path, line), _number(row, "y", path, line)),
            indicators=vec,
            external_label=row.get("label") or None,
        ))
    return sorted(out, key=lambda a: a.area_id)


def read_points(path: Path) -> list[tuple[int, InfrastructurePoint, bool]]:
    """Rows as (line, point, major_supermarket flag), in file order."""
    out, seen = [], {}
    for line, row in _read_csv(path, POINT_COLUMNS):
        pid = row["id"]
        if not pid:
            raise SchemaError("empty id", file=path.name, row=line, column="id")
        if pid in seen:
            raise SchemaError(f"duplicate point id {pid!r} (first at row {seen[pid]})",
                              file=path.name, row=line, column="id")
        seen[pid] = line
        try:
            kind = InfraKind.parse(row["kind"])
        except ValueError as exc:
            raise SchemaError(str(exc), file=path.name, row=line, column="kind") from None
        if kind is InfraKind.RECYCLER:
            raise SchemaError("recycler points are produced by scenarios, not ingested",
                              file=path.name, row=line, column="kind")
        op = None
        if row.get("operator_class"):
            try:
                op = OperatorClass.parse(row["operator_class"])
            except ValueError as exc:
                raise SchemaError(str(exc), file=path.name, row=line, column="operator_class") from None
        point = InfrastructurePoint(
            id=pid,
            kind=kind,
            location=ProjPoint(_number(row, "x", path, line), _number(row, "y", path, line)),
            postcode=normalize_postcode(row.get("postcode")),
            operator_class=op,
        )
        out.append((line, point, _flag(row, "major_supermarket", path, line)))
    return out


def dedup_cashback(rows) -> tuple[list[InfrastructurePoint], list[str]]:
    """Drop major-supermarket cashback rows that share a postcode with a free ATM.

    Those retailers do not offer cashback where a free ATM is present.
    Returns kept points and one note per dropped row.
    """
    atm_postcodes = {p.postcode for _, p, _ in rows if p.kind is InfraKind.FREE_ATM and p.postcode}
    kept, notes = [], []
    for line, p, major in rows:
        if p.kind is InfraKind.CASHBACK and major and p.postcode in atm_postcodes:
            # the row number goes to the log only: notes must not depend on row order
            log.info("dropping cashback %s from row %d", p.id, line)
            notes.append(f"dropped cashback {p.id}: major supermarket sharing postcode {p.postcode} with a free ATM")
            continue
        kept.append(p)
    return kept, notes


def _load_geojson(path: Path, crs: str) -> dict:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}", file=path.name) from None
    try:
        declared = doc["crs"]["properties"]["name"]
    except (KeyError, TypeError):
        raise SchemaError("GeoJSON must declare its projected CRS in a top-level 'crs' member", file=path.name) from None
    norm = check_projected(declared, path.name)
    if norm != normalize_crs(crs):
        raise SchemaError(f"CRS {declared} differs from the run CRS {crs}", file=path.name)
    return doc


def _features(doc, path):
    kind = doc.get("type")
    if kind == "FeatureCollection":
        return doc.get("features", [])
    if kind == "Feature":
        return [doc]
    if kind in ("Polygon", "MultiPolygon"):
        return [{"type": "Feature", "properties": {}, "geometry": doc}]
    raise SchemaError(f"unsupported GeoJSON type {kind!r}", file=path.name)


def read_study_area(path: Path, crs: str) -> StudyArea:
    doc = _load_geojson(path, crs)
    feats = _features(doc, path)
    if len(feats) != 1:
        raise SchemaError(f"study area must hold exactly one polygon, found {len(feats)} features", file=path.name)
    geom = feats[0].get("geometry") or {}
    if geom.get("type") != "Polygon":
        raise SchemaError("study area geometry must be a single Polygon", file=path.name)
    ring = geom["coordinates"][0]
    try:
        return StudyArea.from_ring(ProjPoint(float(x), float(y)) for x, y, *_ in ring)
    except InvalidParameterError as exc:
        raise SchemaError(str(exc), file=path.name) from None


def read_area_polygons(path: Path, crs: str) -> dict:
    doc = _load_geojson(path, crs)
    out = {}
    for i, feat in enumerate(_features(doc, path)):
        area_id = (feat.get("properties") or {}).get("area_id")
        if not area_id:
            raise SchemaError("feature without properties.area_id", file=path.name, row=i)
        geom = feat.get("geometry") or {}
        if geom.get("type") not in ("Polygon", "MultiPolygon"):
            raise SchemaError(f"area {area_id}: geometry must be Polygon or MultiPolygon", file=path.name, row=i)
        if area_id in out:
            raise SchemaError(f"duplicate polygon for area {area_id}", file=path.name, row=i)
        out[str(area_id)] = geom
    return out


def read_ward_lookup(path: Path) -> WardLookup:
    mapping, names = {}, {}
    for line, row in _read_csv(path, WARD_COLUMNS):
        a, w = row["area_id"], row["ward_id"]
        if not a or not w:
            raise SchemaError("empty area_id or ward_id", file=path.name, row=line)
        if a in mapping:
            raise SchemaError(f"area {a} mapped twice", file=path.name, row=line, column="area_id")
        mapping[a] = w
        if row.get("ward_name"):
            names[w] = row["ward_name"]
    return WardLookup(mapping, names)


def read_historical_ranks(path: Path) -> dict:
    out = {}
    for line, row in _read_csv(path, RANK_COLUMNS):
        w = row["ward_id"]
        if w in out:
            raise SchemaError(f"ward {w} ranked twice", file=path.name, row=line, column="ward_id")
        out[w] = _number(row, "rank", path, line)
    return out


def ingest(config: RunConfig) -> Dataset:
    check_projected(config.crs, "config")
    notes = []

    areas = sorted(read_areas(config.inputs["areas"]), key=lambda a: a.area_id)
    missing = [(a.area_id, a.indicators.missing()) for a in areas if a.indicators.missing()]
    if missing:
        if config.missing_values != "impute_median":
            first = missing[0]
            raise SchemaError(
                f"{len(missing)} area(s) have missing indicator values, e.g. {first[0]}: {first[1]}; "
                "set missing_values: impute_median to fill them",
                file=config.inputs["areas"].name,
            )
        filled, imp_notes = impute_missing([a.indicators for a in areas])
        areas = [AreaRecord(a.area_id, a.centroid, v, a.polygon, a.external_label) for a, v in zip(areas, filled)]
        notes.extend(imp_notes)

    if "area_polygons" in config.inputs:
        polys = read_area_polygons(config.inputs["area_polygons"], config.crs)
        unknown = sorted(set(polys) - {a.area_id for a in areas})
        if unknown:
            raise SchemaError(f"polygons for unknown areas: {unknown}", file=config.inputs["area_polygons"].name)
        areas = [AreaRecord(a.area_id, a.centroid, a.indicators, polys.get(a.area_id), a.external_label) for a in areas]

    rows = read_points(config.inputs["infrastructure"])
    dropped = []
    if config.dedup_cashback:
        points, drop_notes = dedup_cashback(rows)
        notes.extend(drop_notes)
        kept = {p.id for p in points}
        dropped = sorted(p.id for _, p, _ in rows if p.id not in kept)
    else:
        points = [p for _, p, _ in rows]
    points.sort(key=lambda p: p.id)

    study = read_study_area(config.inputs["study_area"], config.crs) if "study_area" in config.inputs else None
    lookup = read_ward_lookup(config.inputs["ward_lookup"]) if "ward_lookup" in config.inputs else None
    hist = read_historical_ranks(config.inputs["historical_ranks"]) if "historical_ranks" in config.inputs else None

    by_kind = {k.value: sum(1 for p in points if p.kind is k) for k in InfraKind}
    log.info("loaded %d areas, %d infrastructure points %s", len(areas), len(points), by_kind)
    return Dataset(areas, points, study, lookup, hist, notes, dropped)
