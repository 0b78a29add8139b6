"""Cash-access infrastructure: catchment counts, AvCash scores, lonely ATMs,
and Clark-Evans nearest-neighbour statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from finex.errors import InsufficientPointsError, InvalidConfigError, InvalidParameterError
from finex.geometry import GridIndex, ProjPoint, StudyArea, distance, points_within


class InfraKind(str, Enum):
    FREE_ATM = "free_atm"
    POST_OFFICE = "post_office"
    BRANCH = "branch"
    CASHBACK = "cashback"
    CHARGING_ATM = "charging_atm"
    PAYPOINT = "paypoint"
    # only ever produced by the cash-recycler intervention
    RECYCLER = "recycler"

    @classmethod
    def parse(cls, text: str) -> "InfraKind":
        key = "".join(ch for ch in str(text).lower() if ch.isalnum())
        for kind in cls:
            if kind.value.replace("_", "") == key:
                return kind
        raise ValueError(f"unknown infrastructure kind {text!r}")


class OperatorClass(str, Enum):
    BANK = "bank"
    IAD = "iad"
    OTHER = "other"

    @classmethod
    def parse(cls, text: str) -> "OperatorClass":
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            raise ValueError(f"unknown operator class {text!r}") from None


ATM_KINDS = (InfraKind.FREE_ATM, InfraKind.CHARGING_ATM)


class AlternativeSet(str, Enum):
    """Which neighbours count as an alternative when judging loneliness."""

    ANY_ATM = "any_atm"
    FREE_ONLY = "free_only"

    @classmethod
    def parse(cls, text) -> "AlternativeSet":
        if isinstance(text, cls):
            return text
        key = "".join(ch for ch in str(text).lower() if ch.isalnum())
        for m in cls:
            if m.value.replace("_", "") == key:
                return m
        raise ValueError(f"unknown alternative set {text!r}")

    def neighbour_kinds(self) -> frozenset:
        # a recycler still dispenses cash, free of charge
        if self is AlternativeSet.ANY_ATM:
            return frozenset({InfraKind.FREE_ATM, InfraKind.CHARGING_ATM, InfraKind.RECYCLER})
        return frozenset({InfraKind.FREE_ATM, InfraKind.RECYCLER})


@dataclass(frozen=True)
class InfrastructurePoint:
    id: str
    kind: InfraKind
    location: ProjPoint
    postcode: str | None = None
    operator_class: OperatorClass | None = None


DEFAULT_SCORES = {
    InfraKind.FREE_ATM: 3.0,
    InfraKind.POST_OFFICE: 2.0,
    InfraKind.BRANCH: 1.0,
    InfraKind.CASHBACK: 0.5,
    InfraKind.CHARGING_ATM: -0.5,
    InfraKind.PAYPOINT: 0.0,
    InfraKind.RECYCLER: 4.0,
}


@dataclass(frozen=True)
class ScoreTable:
    """Per-unit availability-of-cash score for each kind."""

    scores: Mapping[InfraKind, float] = field(default_factory=lambda: dict(DEFAULT_SCORES))

    def __post_init__(self):
        missing = [k.value for k in InfraKind if k not in self.scores]
        if missing:
            raise InvalidConfigError(f"score table missing kinds: {missing}")
        for k, v in self.scores.items():
            if not math.isfinite(v):
                raise InvalidConfigError(f"score for {k.value} is not finite")
        # freeze into a plain dict in enum order
        object.__setattr__(self, "scores", {k: float(self.scores[k]) for k in InfraKind})

    def __getitem__(self, kind: InfraKind) -> float:
        return self.scores[kind]

    def with_overrides(self, overrides: Mapping) -> "ScoreTable":
        merged = dict(self.scores)
        for k, v in overrides.items():
            kind = k if isinstance(k, InfraKind) else InfraKind.parse(k)
            try:
                merged[kind] = float(v)
            except (TypeError, ValueError):
                raise InvalidConfigError(f"score for {kind.value} must be a number, got {v!r}") from None
        return ScoreTable(merged)

    def to_dict(self) -> dict:
        return {k.value: v for k, v in self.scores.items()}


def zero_counts() -> dict:
    return {k: 0 for k in InfraKind}


@dataclass(frozen=True)
class CatchmentProfile:
    area_id: str
    counts: Mapping[InfraKind, int]
    avcash_raw: float
    lonely_free_atms: int


def build_catchment(centroid: ProjPoint, radius: float, points: Sequence[InfrastructurePoint]) -> dict:
    """Count each kind of infrastructure within ``radius`` of ``centroid``.

    Co-located units are counted separately.
    """
    hits = points_within(centroid, radius, [p.location for p in points])
    counts = zero_counts()
    for i in hits:
        counts[points[i].kind] += 1
    return counts


def avcash(counts: Mapping[InfraKind, int], table: ScoreTable | None = None) -> float:
    table = table or ScoreTable()
    total = 0.0
    for kind in InfraKind:
        n = counts.get(kind, 0)
        if n < 0:
            raise InvalidParameterError(f"negative count for {kind.value}")
        total += n * table[kind]
    return total


DISTANCE_BINS = ((100.0, "<=100"), (250.0, "100-250"), (500.0, "250-500"))
OVER_LAST_BIN = ">500"


def distance_bin(d: float) -> str:
    for upper, label in DISTANCE_BINS:
        if d <= upper:
            return label
    return OVER_LAST_BIN


@dataclass(frozen=True)
class LonelyResult:
    point_id: str
    kind: InfraKind
    neighbour_id: str | None
    neighbour_distance: float
    lonely: bool
    bin: str


def lonely_atms(
    points: Sequence[InfrastructurePoint],
    threshold: float = 250.0,
    alternative_set: AlternativeSet = AlternativeSet.ANY_ATM,
) -> list[LonelyResult]:
    """Nearest-alternative distance and loneliness flag for every ATM.

    Subjects are free and charging ATMs; other kinds in ``points`` are ignored
    except recyclers, which act as (free) alternatives. An ATM with no eligible
    alternative at all is lonely, with infinite distance.
    """
    if not threshold > 0:
        raise InvalidParameterError(f"threshold must be > 0, got {threshold}")
    alternative_set = AlternativeSet.parse(alternative_set)
    eligible = alternative_set.neighbour_kinds()
    neighbours = [i for i, p in enumerate(points) if p.kind in eligible]
    out = []
    for i, p in enumerate(points):
        if p.kind not in ATM_KINDS:
            continue
        best_j, best_d = -1, math.inf
        for j in neighbours:
            if j == i:
                continue
            d = distance(p.location, points[j].location)
            if d < best_d:
                best_j, best_d = j, d
        out.append(
            LonelyResult(
                point_id=p.id,
                kind=p.kind,
                neighbour_id=points[best_j].id if best_j >= 0 else None,
                neighbour_distance=best_d,
                lonely=best_d > threshold,
                bin=distance_bin(best_d),
            )
        )
    return out


def bin_summary(results: Iterable[LonelyResult]) -> dict:
    """Counts per distance bin, split by ATM kind, plus lonely totals."""
    labels = [label for _, label in DISTANCE_BINS] + [OVER_LAST_BIN]
    summary = {}
    for kind in (*ATM_KINDS, None):
        rows = [r for r in results if kind is None or r.kind is kind]
        name = "all" if kind is None else kind.value
        summary[name] = {
            "n": len(rows),
            "bins": {label: sum(1 for r in rows if r.bin == label) for label in labels},
            "lonely": sum(1 for r in rows if r.lonely),
        }
    return summary


def build_profiles(
    areas: Sequence[tuple[str, ProjPoint]],
    points: Sequence[InfrastructurePoint],
    radius: float = 500.0,
    table: ScoreTable | None = None,
    lonely_threshold: float = 250.0,
    alternative_set: AlternativeSet = AlternativeSet.ANY_ATM,
) -> list[CatchmentProfile]:
    """One profile per area, in ascending area-id order."""
    table = table or ScoreTable()
    flags = lonely_atms(points, lonely_threshold, alternative_set)
    lonely_ids = {r.point_id for r in flags if r.lonely and r.kind is InfraKind.FREE_ATM}
    lonely_locs = [p.location for p in points if p.id in lonely_ids]
    profiles = []
    for area_id, centroid in sorted(areas, key=lambda a: a[0]):
        counts = build_catchment(centroid, radius, points)
        n_lonely = len(points_within(centroid, radius, lonely_locs))
        profiles.append(CatchmentProfile(area_id, counts, avcash(counts, table), n_lonely))
    return profiles


# Clark & Evans (1954): standard error constant of the mean NN distance under CSR
CLARK_EVANS_SE = 0.26136


@dataclass(frozen=True)
class NNStats:
    n_points: int
    area_m2: float
    observed_mean_m: float
    expected_mean_m: float
    nni: float
    z_score: float

    @property
    def interpretation(self) -> str:
        return interpret_nni(self.nni)


def interpret_nni(nni: float) -> str:
    if nni < 0.5:
        return "Very clustered"
    if nni < 0.95:
        return "Quite clustered"
    if nni <= 1.05:
        return "Random"
    if nni < 1.5:
        return "More regular"
    return "Very regular"


def expected_mean_distance(n: int, area_m2: float) -> float:
    return 0.5 / math.sqrt(n / area_m2)


def clark_evans_se(n: int, area_m2: float) -> float:
    return CLARK_EVANS_SE / math.sqrt(n * n / area_m2)


def nn_stats_from_means(n: int, area_m2: float, observed_mean: float) -> NNStats:
    expected = expected_mean_distance(n, area_m2)
    return NNStats(
        n_points=n,
        area_m2=area_m2,
        observed_mean_m=observed_mean,
        expected_mean_m=expected,
        nni=observed_mean / expected,
        z_score=(observed_mean - expected) / clark_evans_se(n, area_m2),
    )


def nn_stats(points: Sequence[ProjPoint], area: StudyArea | float) -> NNStats:
    """Clark-Evans statistics of a point pattern over ``area``.

    ``area`` may be a StudyArea or a bare area in square metres.
    """
    n = len(points)
    if n < 2:
        raise InsufficientPointsError(f"nearest-neighbour statistics need >= 2 points, got {n}")
    area_m2 = area.area_m2 if isinstance(area, StudyArea) else float(area)
    if not area_m2 > 0:
        raise InvalidParameterError("area must be > 0")
    index = GridIndex(points)
    dists = [index.nearest(i)[1] for i in range(n)]
    return nn_stats_from_means(n, area_m2, math.fsum(dists) / n)
