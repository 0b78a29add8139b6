"""Weighted additive aggregation into a 0-100 index, and natural-breaks classing."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from typing import Mapping, Sequence

from finex.errors import InfeasibleClassingError, InvalidConfigError, InvalidParameterError
from finex.indicators import VARIABLES

DOMAINS = {
    "supply": ("avcash", "loneliness"),
    "demand": ("claimant", "income", "housing", "lone_parents"),
    "alternatives": ("iuc", "car"),
}

WEIGHT_TOLERANCE = 1e-9

_DEFAULT_FRACTIONS = {
    "avcash": Fraction(4, 15),
    "loneliness": Fraction(1, 15),
    "claimant": Fraction(2, 21),
    "income": Fraction(2, 21),
    "housing": Fraction(2, 21),
    "lone_parents": Fraction(1, 21),
    "iuc": Fraction(1, 6),
    "car": Fraction(1, 6),
}


@dataclass(frozen=True)
class WeightScheme:
    supply: float
    demand: float
    alternatives: float
    avcash: float
    loneliness: float
    claimant: float
    income: float
    housing: float
    lone_parents: float
    iuc: float
    car: float

    @classmethod
    def default(cls) -> "WeightScheme":
        subs = {k: float(v) for k, v in _DEFAULT_FRACTIONS.items()}
        doms = {d: float(sum(_DEFAULT_FRACTIONS[v] for v in vs)) for d, vs in DOMAINS.items()}
        return cls(**doms, **subs)

    @classmethod
    def from_mapping(cls, data: Mapping) -> "WeightScheme":
        """Build from ``{"variables": {...}, "domains": {...}}`` or a flat mapping.

        Missing domain weights are taken as the sum of their sub-weights.
        """
        data = dict(data)
        subs = dict(data.get("variables", {}))
        doms = dict(data.get("domains", {}))
        for k, v in data.items():
            if k in VARIABLES:
                subs[k] = v
            elif k in DOMAINS:
                doms[k] = v
            elif k not in ("variables", "domains"):
                raise InvalidConfigError(f"unknown weight key {k!r}")
        missing = [v for v in VARIABLES if v not in subs]
        if missing:
            raise InvalidConfigError(f"weights missing for {missing}")
        for d, vs in DOMAINS.items():
            doms.setdefault(d, math.fsum(float(subs[v]) for v in vs))
        w = cls(**{k: float(v) for k, v in {**doms, **subs}.items()})
        w.validate()
        return w

    def sub_weights(self) -> dict:
        return {v: getattr(self, v) for v in VARIABLES}

    def domain_weights(self) -> dict:
        return {d: getattr(self, d) for d in DOMAINS}

    def validate(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidConfigError(f"weight {f.name}={v} must be finite and >= 0")
        total = math.fsum(self.sub_weights().values())
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise InvalidConfigError(f"variable weights sum to {total!r}, not 1")
        for d, vs in DOMAINS.items():
            s = math.fsum(getattr(self, v) for v in vs)
            if abs(s - getattr(self, d)) > WEIGHT_TOLERANCE:
                raise InvalidConfigError(f"{d} sub-weights sum to {s!r} but domain weight is {getattr(self, d)!r}")

    def scaled(self, c: float) -> "WeightScheme":
        return replace(self, **{f.name: getattr(self, f.name) * c for f in fields(self)})

    def renormalized(self) -> "WeightScheme":
        total = math.fsum(self.sub_weights().values())
        if total <= 0:
            raise InvalidConfigError("cannot renormalise all-zero weights")
        return self.scaled(1.0 / total)

    def to_dict(self) -> dict:
        return {"domains": self.domain_weights(), "variables": self.sub_weights()}

    def percentages(self, places: int = 2) -> dict:
        return {v: round(100 * w, places) for v, w in self.sub_weights().items()}


def aggregate(components: Mapping[str, float], weights: WeightScheme) -> float:
    """100 x the weighted sum of the components, summed in variable-name order."""
    weights.validate()
    total = 0.0
    for name in sorted(VARIABLES):
        total += getattr(weights, name) * components[name]
    return 100.0 * total


@dataclass(frozen=True)
class IndexResult:
    area_id: str
    components: Mapping[str, float]
    score: float
    jenks_class: int | None = None
    config_fingerprint: str = ""


@dataclass(frozen=True)
class JenksResult:
    k: int
    breaks: list[float]
    labels: list[int]
    ssd: float
    class_ssd: list[float] = field(default_factory=list)

    def intervals(self) -> list[tuple[float, float]]:
        return list(zip(self.breaks[:-1], self.breaks[1:]))


def _segment_ssd(s: Sequence[float]) -> list[list[float]]:
    """ssd[i][j] = within-segment sum of squared deviations of s[i:j]."""
    n = len(s)
    ssd = [[0.0] * (n + 1) for _ in range(n + 1)]
    for i in range(n):
        mean = 0.0
        m2 = 0.0
        for j in range(i, n):
            # Welford update
            cnt = j - i + 1
            delta = s[j] - mean
            mean += delta / cnt
            m2 += delta * (s[j] - mean)
            ssd[i][j + 1] = m2
    return ssd


def jenks_breaks(values: Sequence[float], k: int) -> JenksResult:
    """Exact natural breaks: the contiguous k-partition of the sorted values
    with minimum total within-class sum of squared deviations.

    Classes never split equal values. Among equally good partitions the one
    with the lowest break values wins. ``labels`` are 1..k in input order,
    1 being the lowest class; ``breaks`` holds k+1 boundaries
    (minimum, then each class maximum).
    """
    if k < 1:
        raise InvalidParameterError(f"k must be >= 1, got {k}")
    vals = [float(v) for v in values]
    n = len(vals)
    distinct = len(set(vals))
    if k > distinct:
        raise InfeasibleClassingError(f"cannot form {k} classes from {distinct} distinct values")

    order = sorted(range(n), key=lambda i: (vals[i], i))
    s = [vals[i] for i in order]
    cuts = [j for j in range(1, n) if s[j - 1] < s[j]]
    ssd = _segment_ssd(s)

    inf = math.inf
    # best[m][i]: least cost for s[i:] in m classes, starting at a legal cut
    best = [[inf] * (n + 1) for _ in range(k + 1)]
    starts = [0] + cuts
    for i in starts:
        best[1][i] = ssd[i][n]
    for m in range(2, k + 1):
        for i in starts:
            b = inf
            for j in cuts:
                if j <= i or best[m - 1][j] == inf:
                    continue
                c = ssd[i][j] + best[m - 1][j]
                if c < b:
                    b = c
            best[m][i] = b

    bounds = [0]
    i = 0
    for m in range(k, 1, -1):
        target = best[m][i]
        tol = 1e-12 * max(1.0, abs(target))
        for j in cuts:
            if j <= i or best[m - 1][j] == inf:
                continue
            if ssd[i][j] + best[m - 1][j] <= target + tol:
                bounds.append(j)
                i = j
                break
    bounds.append(n)

    sorted_labels = [0] * n
    class_ssd = []
    breaks = [s[0]]
    for c in range(k):
        lo, hi = bounds[c], bounds[c + 1]
        for p in range(lo, hi):
            sorted_labels[p] = c + 1
        class_ssd.append(ssd[lo][hi])
        breaks.append(s[hi - 1])
    labels = [0] * n
    for p, idx in enumerate(order):
        labels[idx] = sorted_labels[p]
    return JenksResult(k, breaks, labels, math.fsum(class_ssd), class_ssd)


def classify(results: Sequence[IndexResult], k: int = 5) -> list[IndexResult]:
    """Attach a natural-breaks class (1 = lowest scores) to every result."""
    if len(results) < k:
        raise InfeasibleClassingError(f"need at least {k} areas to form {k} classes, got {len(results)}")
    jr = jenks_breaks([r.score for r in results], k)
    return [replace(r, jenks_class=label) for r, label in zip(results, jr.labels)]
