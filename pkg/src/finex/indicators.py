"""Per-area indicators: polarity alignment, min-max normalisation and the
multicollinearity screen.

After alignment every variable reads "higher = more financially included".
"""
from __future__ import annotations

import math
import statistics
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from finex.errors import InvalidParameterError, SchemaError

# Fixed variable order; also the summation order used by the aggregator.
VARIABLES = ("avcash", "loneliness", "claimant", "income", "housing", "lone_parents", "iuc", "car")

# raw IndicatorVector field feeding each variable
SOURCE_FIELDS = {
    "avcash": "avcash_raw",
    "loneliness": "lonely_count",
    "claimant": "claimant_pct",
    "income": "median_income",
    "housing": "rented_or_shared_pct",
    "lone_parents": "lone_parent_pct",
    "iuc": "iuc_score",
    "car": "car_access_pct",
}

PERCENT_FIELDS = ("claimant_pct", "rented_or_shared_pct", "lone_parent_pct", "car_access_pct")
DEMOGRAPHIC_FIELDS = PERCENT_FIELDS + ("median_income", "iuc_score")

CORRELATION_THRESHOLD = 0.95


class DegenerateVariableWarning(UserWarning):
    pass


@dataclass(frozen=True)
class IndicatorVector:
    area_id: str
    claimant_pct: float | None
    median_income: float | None
    rented_or_shared_pct: float | None
    lone_parent_pct: float | None
    iuc_score: int | None
    car_access_pct: float | None
    avcash_raw: float = 0.0
    lonely_count: int = 0

    def missing(self) -> list[str]:
        return [f for f in DEMOGRAPHIC_FIELDS if getattr(self, f) is None]

    def validate(self) -> None:
        for f in PERCENT_FIELDS:
            v = getattr(self, f)
            if v is not None and not 0 <= v <= 100:
                raise InvalidParameterError(f"{self.area_id}: {f}={v} outside [0, 100]")
        if self.iuc_score is not None and self.iuc_score not in range(1, 11):
            raise InvalidParameterError(f"{self.area_id}: iuc_score={self.iuc_score} outside 1..10")
        if self.median_income is not None and self.median_income < 0:
            raise InvalidParameterError(f"{self.area_id}: median_income is negative")
        if self.lonely_count < 0:
            raise InvalidParameterError(f"{self.area_id}: lonely_count is negative")


def impute_missing(vectors: Sequence[IndicatorVector]) -> tuple[list[IndicatorVector], list[str]]:
    """Fill missing demographic values with the dataset median of that field.

    Returns the filled vectors and one note per imputed value. IUC medians are
    rounded half-up to stay on the 1..10 scale.
    """
    notes = []
    medians = {}
    for f in DEMOGRAPHIC_FIELDS:
        present = [getattr(v, f) for v in vectors if getattr(v, f) is not None]
        if not present:
            raise SchemaError(f"column {f} has no values to impute from", column=f)
        m = statistics.median(present)
        medians[f] = int(math.floor(m + 0.5)) if f == "iuc_score" else float(m)
    out = []
    for v in vectors:
        fills = {f: medians[f] for f in v.missing()}
        for f, m in fills.items():
            notes.append(f"imputed {v.area_id}.{f} = {m} (dataset median)")
        out.append(replace(v, **fills) if fills else v)
    return out, notes


def align_polarity(v: IndicatorVector) -> dict:
    """Orient raw values so that higher always means more included.

    Percent risks become ``100 - value``, IUC becomes ``11 - iuc`` and the
    lonely-ATM count is negated.
    """
    if v.missing():
        raise InvalidParameterError(f"{v.area_id}: missing values for {v.missing()}")
    return {
        "avcash": float(v.avcash_raw),
        "loneliness": -float(v.lonely_count),
        "claimant": 100.0 - v.claimant_pct,
        "income": float(v.median_income),
        "housing": 100.0 - v.rented_or_shared_pct,
        "lone_parents": 100.0 - v.lone_parent_pct,
        "iuc": float(11 - v.iuc_score),
        "car": float(v.car_access_pct),
    }


@dataclass(frozen=True)
class NormalizationBounds:
    """Per-variable (min, max) in oriented raw units."""

    bounds: Mapping[str, tuple[float, float]]
    source: str = "baseline"

    def __post_init__(self):
        for name, (lo, hi) in self.bounds.items():
            if not lo <= hi:
                raise InvalidParameterError(f"bounds for {name}: min {lo} > max {hi}")

    @classmethod
    def from_rows(cls, rows: Sequence[Mapping[str, float]], source: str = "baseline") -> "NormalizationBounds":
        if not rows:
            raise InvalidParameterError("cannot derive bounds from zero areas")
        return cls({n: (min(r[n] for r in rows), max(r[n] for r in rows)) for n in VARIABLES}, source)

    def __getitem__(self, name):
        return self.bounds[name]

    def to_dict(self) -> dict:
        return {n: {"min": lo, "max": hi} for n, (lo, hi) in self.bounds.items()}


def minmax(values: Sequence[float], lo: float, hi: float, clamp: bool = False) -> list[float]:
    """(x - lo) / (hi - lo). A degenerate range (hi == lo) yields all zeros and a warning."""
    if hi == lo:
        warnings.warn(f"degenerate variable: min == max == {lo}", DegenerateVariableWarning, stacklevel=2)
        return [0.0] * len(values)
    span = hi - lo
    out = [(x - lo) / span for x in values]
    if clamp:
        out = [min(1.0, max(0.0, x)) for x in out]
    return out


@dataclass
class NormalizedTable:
    area_ids: list[str]
    components: list[dict]
    bounds: NormalizationBounds
    notes: list[str] = field(default_factory=list)


def normalize(
    oriented: Mapping[str, Mapping[str, float]],
    bounds: NormalizationBounds | None = None,
    clamp: bool | None = None,
) -> NormalizedTable:
    """Min-max normalise every variable across areas.

    Without ``bounds`` they are derived from ``oriented`` itself. With foreign
    (frozen) bounds, results are clamped to [0, 1] unless ``clamp=False``.
    """
    area_ids = sorted(oriented)
    rows = [oriented[a] for a in area_ids]
    own = bounds is None
    if own:
        bounds = NormalizationBounds.from_rows(rows)
    if clamp is None:
        clamp = not own
    notes = []
    columns = {}
    for name in VARIABLES:
        lo, hi = bounds[name]
        if lo == hi:
            notes.append(f"degenerate variable '{name}': min == max == {lo}; normalised to 0")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateVariableWarning)
            columns[name] = minmax([r[name] for r in rows], lo, hi, clamp=clamp)
    components = [{n: columns[n][i] for n in VARIABLES} for i in range(len(area_ids))]
    return NormalizedTable(area_ids, components, bounds, notes)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Pearson r, or None when either column has zero variance."""
    if len(set(xs)) < 2 or len(set(ys)) < 2:
        return None
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        return None
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


@dataclass
class CorrelationReport:
    variables: list[str]
    matrix: list[list[float | None]]
    flagged: list[tuple[str, str, float]]
    undefined: list[str]
    threshold: float = CORRELATION_THRESHOLD

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "variables": self.variables,
            "matrix": self.matrix,
            "flagged": [{"a": a, "b": b, "r": r} for a, b, r in self.flagged],
            "undefined": self.undefined,
        }


def correlation_screen(
    rows: Sequence[Mapping[str, float]],
    variables: Sequence[str] = VARIABLES,
    threshold: float = CORRELATION_THRESHOLD,
) -> CorrelationReport:
    """Pairwise Pearson matrix; pairs with |r| > threshold are flagged.

    Flagged pairs are only reported. Every correlation involving a
    zero-variance column, its diagonal included, is ``None``.
    """
    if len(rows) < 3:
        raise InvalidParameterError(f"correlation screen needs >= 3 areas, got {len(rows)}")
    variables = list(variables)
    cols = {v: [float(r[v]) for r in rows] for v in variables}
    undefined = [v for v in variables if len(set(cols[v])) == 1]
    k = len(variables)
    matrix: list[list[float | None]] = [[None] * k for _ in range(k)]
    flagged = []
    for i in range(k):
        matrix[i][i] = None if variables[i] in undefined else 1.0
        for j in range(i + 1, k):
            r = pearson(cols[variables[i]], cols[variables[j]])
            matrix[i][j] = matrix[j][i] = r
            if r is not None and abs(r) > threshold:
                flagged.append((variables[i], variables[j], r))
    return CorrelationReport(variables, matrix, flagged, undefined, threshold)
