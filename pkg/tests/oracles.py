"""Brute-force reference computations used to freeze expected values.

Nothing here imports ``finex``: every quantity is recomputed from the raw
files / inputs with numpy and exhaustive enumeration.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

SCORES = {
    "free_atm": 3.0, "post_office": 2.0, "branch": 1.0, "cashback": 0.5,
    "charging_atm": -0.5, "paypoint": 0.0, "recycler": 4.0,
}
KINDS = list(SCORES)
WEIGHTS = {
    "avcash": Fraction(4, 15), "loneliness": Fraction(1, 15), "claimant": Fraction(2, 21),
    "income": Fraction(2, 21), "housing": Fraction(2, 21), "lone_parents": Fraction(1, 21),
    "iuc": Fraction(1, 6), "car": Fraction(1, 6),
}
VARS = list(WEIGHTS)


# -- generic oracles ---------------------------------------------------------

def brute_within(center, radius, pts):
    if len(pts) == 0:
        return []
    a = np.asarray(pts, dtype=float).reshape(-1, 2)
    d = np.hypot(a[:, 0] - center[0], a[:, 1] - center[1])
    return [int(i) for i in np.nonzero(d <= radius)[0]]


def brute_nn(q, pts):
    a = np.asarray(pts, dtype=float)
    d = np.hypot(a[:, 0] - a[q, 0], a[:, 1] - a[q, 1])
    d[q] = np.inf
    i = int(np.argmin(d))  # argmin returns the first (lowest) index on ties
    return i, float(d[i])


def ssd(vals):
    v = np.asarray(vals, dtype=float)
    return float(((v - v.mean()) ** 2).sum())


def jenks_exhaustive(values, k):
    """Try every contiguous k-partition of the sorted values.

    Returns (best_ssd, cut positions) with the lexicographically smallest
    cuts among exact ties.
    """
    s = sorted(values)
    n = len(s)
    best, best_cuts = math.inf, None
    for cuts in itertools.combinations(range(1, n), k - 1):
        b = (0, *cuts, n)
        total = sum(ssd(s[b[i]:b[i + 1]]) for i in range(k))
        if total < best:
            best, best_cuts = total, cuts
    return best, best_cuts


def pearson_textbook(x, y):
    n = len(x)
    sx, sy = sum(x), sum(y)
    sxx = sum(a * a for a in x)
    syy = sum(b * b for b in y)
    sxy = sum(a * b for a, b in zip(x, y))
    return (n * sxy - sx * sy) / math.sqrt((n * sxx - sx * sx) * (n * syy - sy * sy))


def spearman_textbook(rank_a, rank_b):
    """1 - 6 sum d^2 / (n (n^2 - 1)), valid for untied permutation ranks."""
    n = len(rank_a)
    d2 = sum((a - b) ** 2 for a, b in zip(rank_a, rank_b))
    return 1 - 6 * d2 / (n * (n * n - 1))


def rank_ascending(values):
    order = sorted(range(len(values)), key=lambda i: values[i])
    r = [0] * len(values)
    for pos, i in enumerate(order):
        r[i] = pos + 1
    return r


# -- golden-fixture oracle ---------------------------------------------------

def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def load_fixture(folder):
    folder = Path(folder)
    areas = sorted(_rows(folder / "areas.csv"), key=lambda r: r["area_id"])
    pts = _rows(folder / "infrastructure.csv")
    free_pcs = {r["postcode"].replace(" ", "").upper() for r in pts if r["kind"] == "free_atm"}
    kept = [
        r for r in pts
        if not (r["kind"] == "cashback" and r["major_supermarket"] == "true"
                and r["postcode"].replace(" ", "").upper() in free_pcs)
    ]
    kept.sort(key=lambda r: r["id"])
    wards = {r["area_id"]: r["ward_id"] for r in _rows(folder / "ward_lookup.csv")}
    hist = {r["ward_id"]: float(r["rank"]) for r in _rows(folder / "historical_ranks.csv")}
    return areas, kept, wards, hist


def lonely_free_ids(points, threshold, mode):
    xy = np.array([[float(p["x"]), float(p["y"])] for p in points])
    kinds = [p["kind"] for p in points]
    neigh = {"any_atm": {"free_atm", "charging_atm", "recycler"}, "free_only": {"free_atm", "recycler"}}[mode]
    out = set()
    for i, p in enumerate(points):
        if kinds[i] != "free_atm":
            continue
        ds = [math.dist(xy[i], xy[j]) for j in range(len(points)) if j != i and kinds[j] in neigh]
        if not ds or min(ds) > threshold:
            out.add(p["id"])
    return out


def score_areas(areas, points, scores, radius=500.0, threshold=250.0, mode="any_atm", bounds=None):
    xy = np.array([[float(p["x"]), float(p["y"])] for p in points])
    lonely = lonely_free_ids(points, threshold, mode)
    out = {}
    raw = {}
    for a in areas:
        c = (float(a["x"]), float(a["y"]))
        d = np.hypot(xy[:, 0] - c[0], xy[:, 1] - c[1])
        inside = d <= radius
        counts = {k: int(sum(1 for i in np.nonzero(inside)[0] if points[i]["kind"] == k)) for k in KINDS}
        av = float(sum(counts[k] * scores[k] for k in KINDS))
        nl = int(sum(1 for i in np.nonzero(inside)[0] if points[i]["id"] in lonely))
        raw[a["area_id"]] = {
            "avcash": av,
            "loneliness": -nl,
            "claimant": 100 - float(a["claimant_pct"]),
            "income": float(a["median_income"]),
            "housing": 100 - float(a["rented_or_shared_pct"]),
            "lone_parents": 100 - float(a["lone_parent_pct"]),
            "iuc": 11 - int(a["iuc_score"]),
            "car": float(a["car_access_pct"]),
        }
        out[a["area_id"]] = {"counts": counts, "avcash_raw": av, "lonely_free_atms": nl}
    ids = [a["area_id"] for a in areas]
    own = bounds is None
    if own:
        bounds = {v: (min(raw[i][v] for i in ids), max(raw[i][v] for i in ids)) for v in VARS}
    w = np.array([float(WEIGHTS[v]) for v in VARS])
    for i in ids:
        comps = []
        for v in VARS:
            lo, hi = bounds[v]
            x = 0.0 if hi == lo else (raw[i][v] - lo) / (hi - lo)
            if not own:
                x = min(1.0, max(0.0, x))
            comps.append(x)
        out[i]["components"] = dict(zip(VARS, comps))
        out[i]["score"] = float(100 * np.dot(w, comps))
    return out, bounds


def golden_expected(folder):
    areas, points, wards, hist = load_fixture(folder)
    base, bounds = score_areas(areas, points, SCORES)
    ids = sorted(base)
    scores = [base[i]["score"] for i in ids]

    best, cuts = jenks_exhaustive(scores, 5)
    s_sorted = sorted(scores)
    edges = [s_sorted[c] for c in cuts]  # first value of classes 2..5
    for i in ids:
        base[i]["jenks_class"] = 1 + sum(1 for e in edges if base[i]["score"] >= e)

    by_ward = {}
    for i in ids:
        by_ward.setdefault(wards[i], []).append(base[i]["score"])
    medians = {}
    for w, vals in by_ward.items():
        v = sorted(vals)
        m = len(v) // 2
        medians[w] = v[m] if len(v) % 2 else (v[m - 1] + v[m]) / 2
    wl = sorted(medians)
    now = rank_ascending([medians[w] for w in wl])
    then = rank_ascending([hist[w] for w in wl])

    def scenario(paypoint, recyclers, digital):
        sc = dict(SCORES)
        pts = [dict(p) for p in points]
        ars = [dict(a) for a in areas]
        if paypoint:
            sc["paypoint"] = sc["post_office"]
        if recyclers:
            conv = lonely_free_ids(points, 250.0, "free_only")
            for p in pts:
                if p["id"] in conv:
                    p["kind"] = "recycler"
        if digital:
            for a in ars:
                if a["iuc_score"] == "10":
                    a["iuc_score"] = "7"
        res, _ = score_areas(ars, pts, sc, bounds=bounds)
        return {i: res[i]["score"] for i in ids}

    scen = {
        "paypoint_banking": scenario(True, False, False),
        "cash_recyclers": scenario(False, True, False),
        "digital_inclusion": scenario(False, False, True),
        "all": scenario(True, True, True),
    }
    return {
        "areas": {i: base[i] for i in ids},
        "bounds": {v: list(b) for v, b in bounds.items()},
        "jenks_ssd": best,
        "jenks_cuts": list(cuts),
        "ward_medians": medians,
        "ward_rank_now": dict(zip(wl, now)),
        "ward_rank_then": dict(zip(wl, then)),
        "spearman": spearman_textbook(now, then),
        "recyclers": sorted(lonely_free_ids(points, 250.0, "free_only")),
        "scenario_scores": scen,
    }


if __name__ == "__main__":
    here = Path(__file__).parent / "data" / "golden"
    exp = golden_expected(here)
    (here / "expected.json").write_text(json.dumps(exp, indent=1, sort_keys=True) + "\n")
    for i, a in exp["areas"].items():
        print(i, a["counts"], a["avcash_raw"], a["lonely_free_atms"], round(a["score"], 4), a["jenks_class"])
    print("recyclers", exp["recyclers"])
    for k, v in exp["scenario_scores"].items():
        print(k, {i: round(v[i] - exp["areas"][i]["score"], 4) for i in v})
