"""Ward-level aggregation and comparison against an external ward ranking.

Rank 1 is the lowest median score, i.e. the most excluded ward.
"""
from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from finex.errors import InvalidParameterError, MissingLookupError, WardSetMismatchError
from finex.indicators import pearson


@dataclass(frozen=True)
class WardLookup:
    area_to_ward: Mapping[str, str]
    ward_names: Mapping[str, str] = field(default_factory=dict)

    def ward_of(self, area_id: str) -> str:
        try:
            return self.area_to_ward[area_id]
        except KeyError:
            raise MissingLookupError(f"area {area_id!r} has no ward in the lookup") from None

    def name(self, ward_id: str) -> str:
        return self.ward_names.get(ward_id, ward_id)


def _scores_of(results) -> dict:
    if isinstance(results, Mapping):
        return dict(results)
    return {r.area_id: r.score for r in results}


def ward_medians(results, lookup: WardLookup) -> dict:
    """Median area score per ward, keyed by ward id in ascending order.

    ``results`` is a sequence of IndexResult or a mapping area_id -> score.
    """
    scores = _scores_of(results)
    unmapped = sorted(a for a in scores if a not in lookup.area_to_ward)
    if unmapped:
        raise MissingLookupError(f"areas missing from ward lookup: {', '.join(unmapped)}")
    by_ward: dict[str, list[float]] = {}
    for area_id in sorted(scores):
        by_ward.setdefault(lookup.ward_of(area_id), []).append(scores[area_id])
    return {w: statistics.median(by_ward[w]) for w in sorted(by_ward)}


def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ascending ranks; tied values share the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    p = 0
    while p < len(order):
        q = p
        while q + 1 < len(order) and values[order[q + 1]] == values[order[p]]:
            q += 1
        r = (p + q) / 2 + 1
        for t in range(p, q + 1):
            ranks[order[t]] = r
        p = q + 1
    return ranks


def spearman(a: Sequence[float], b: Sequence[float]) -> float | None:
    """Spearman rho: Pearson correlation of the average ranks."""
    if len(a) != len(b):
        raise InvalidParameterError("rank vectors differ in length")
    if len(a) < 2:
        raise InvalidParameterError("Spearman needs at least 2 observations")
    return pearson(average_ranks(a), average_ranks(b))


@dataclass(frozen=True)
class WardRank:
    ward_id: str
    name: str
    median_score: float
    rank_now: float
    rank_then: float
    # positive = moved away from rank 1 (less excluded than before)
    delta: float


@dataclass(frozen=True)
class RankComparison:
    wards: list[WardRank]
    spearman: float | None
    pearson_medians: float | None


def rank_and_compare(
    medians: Mapping[str, float],
    historical: Mapping[str, float],
    lookup: WardLookup | None = None,
) -> RankComparison:
    """Rank wards by median score and compare with a historical ranking."""
    now_set, then_set = set(medians), set(historical)
    if now_set != then_set:
        only_now = sorted(now_set - then_set)
        only_then = sorted(then_set - now_set)
        raise WardSetMismatchError(
            f"ward sets differ: only scored {only_now}; only historical {only_then}"
        )
    wards = sorted(medians)
    med = [medians[w] for w in wards]
    hist = [float(historical[w]) for w in wards]
    now_r = average_ranks(med)
    then_r = average_ranks(hist)
    rows = [
        WardRank(
            ward_id=w,
            name=lookup.name(w) if lookup else w,
            median_score=m,
            rank_now=rn,
            rank_then=rt,
            delta=rn - rt,
        )
        for w, m, rn, rt in zip(wards, med, now_r, then_r)
    ]
    return RankComparison(rows, pearson(now_r, then_r), pearson(med, hist))
