import itertools

import pytest

from finex.errors import InvalidConfigError, MissingBaselineError
from finex.geometry import ProjPoint
from finex.index import AreaRecord, ScoringSettings, compute_index
from finex.indicators import IndicatorVector
from finex.infrastructure import InfraKind, InfrastructurePoint, ScoreTable
from finex.scenario import (
    BoundsPolicy,
    Intervention,
    ScenarioDataset,
    ScenarioSpec,
    apply_digital,
    apply_paypoint,
    apply_recyclers,
    run_scenario,
    transform,
)

K = InfraKind
ALL = tuple(Intervention)


def area(aid, x, y, iuc=5, claimant=10.0, income=400.0):
    v = IndicatorVector(aid, claimant, income, 30.0, 5.0, iuc, 60.0)
    return AreaRecord(aid, ProjPoint(x, y), v)


def pt(pid, kind, x, y):
    return InfrastructurePoint(pid, kind, ProjPoint(x, y))


@pytest.fixture
def small():
    areas = [
        area("A1", 0, 0, iuc=10, claimant=5, income=600),
        area("A2", 2000, 0, iuc=3, claimant=20, income=300),
        area("A3", 4000, 0, iuc=10, claimant=12, income=450),
        area("A4", 6000, 0, iuc=1, claimant=8, income=500),
        area("A5", 8000, 0, iuc=7, claimant=15, income=350),
    ]
    points = [
        pt("F1", K.FREE_ATM, 0, 100),        # isolated: becomes a recycler
        pt("F2", K.FREE_ATM, 2000, 0),
        pt("F3", K.FREE_ATM, 2100, 0),
        pt("C1", K.CHARGING_ATM, 4000, 50),
        pt("F4", K.FREE_ATM, 4100, 0),       # lonely under free-only only
        pt("P1", K.PAYPOINT, 6000, 200),
        pt("P2", K.PAYPOINT, 0, -200),
        pt("O1", K.POST_OFFICE, 8000, 0),
        pt("B1", K.BRANCH, 6000, 0),
    ]
    return areas, points


def test_paypoint_table_override():
    t = apply_paypoint(ScoreTable())
    assert t[K.PAYPOINT] == 2.0
    assert t[K.POST_OFFICE] == 2.0 and t[K.FREE_ATM] == 3.0


def test_paypoint_avcash_example(small):
    areas, points = small
    base = compute_index(areas, points)
    rep = run_scenario(ScenarioSpec((Intervention.PAYPOINT_BANKING,)), areas, points, baseline=base)
    before = {p.area_id: p.avcash_raw for p in base.profiles}
    after = {p.area_id: p.avcash_raw for p in rep.run.profiles}
    assert before["A4"] == 1.0 and after["A4"] == 3.0
    assert after["A2"] == before["A2"]
    # points keep their kind
    assert sorted(p.kind.value for p in rep.dataset.points) == sorted(p.kind.value for p in points)


def test_paypoint_identity_without_paypoints(small):
    areas, points = small
    points = [p for p in points if p.kind is not K.PAYPOINT]
    base = compute_index(areas, points)
    rep = run_scenario(ScenarioSpec((Intervention.PAYPOINT_BANKING,)), areas, points, baseline=base)
    assert all(d == 0 for d in rep.deltas().values())


def test_recyclers_isolated_atm(small):
    areas, points = small
    out = apply_recyclers(points)
    kinds = {p.id: p.kind for p in out}
    assert kinds["F1"] is K.RECYCLER and kinds["F4"] is K.RECYCLER
    assert kinds["F2"] is K.FREE_ATM and kinds["C1"] is K.CHARGING_ATM
    base = compute_index(areas, points)
    rep = run_scenario(ScenarioSpec((Intervention.CASH_RECYCLERS,)), areas, points, baseline=base)
    before = {p.area_id: p for p in base.profiles}
    after = {p.area_id: p for p in rep.run.profiles}
    assert after["A1"].avcash_raw - before["A1"].avcash_raw == 1.0
    assert after["A1"].lonely_free_atms == 0


def test_recyclers_colocated_not_converted():
    pts = [pt("a", K.FREE_ATM, 0, 0), pt("b", K.FREE_ATM, 0, 0)]
    assert [p.kind for p in apply_recyclers(pts)] == [K.FREE_ATM, K.FREE_ATM]


def test_digital_selective():
    vs = [IndicatorVector("a", 1, 1, 1, 1, 10, 1), IndicatorVector("b", 1, 1, 1, 1, 9, 1)]
    out = apply_digital(vs)
    assert [v.iuc_score for v in out] == [7, 9]


def test_digital_closed_form(small):
    areas, points = small
    base = compute_index(areas, points)
    lo, hi = base.bounds["iuc"]
    rep = run_scenario(ScenarioSpec((Intervention.DIGITAL_INCLUSION,)), areas, points, baseline=base)
    w = base.settings.weights.iuc
    expected = 100 * w * ((4 - lo) / (hi - lo) - (1 - lo) / (hi - lo))
    d = rep.deltas()
    assert d["A1"] == pytest.approx(expected, abs=1e-9)
    assert d["A3"] == pytest.approx(expected, abs=1e-9)
    assert [a for a, x in d.items() if abs(x) > 1e-12] == ["A1", "A3"]
    assert rep.summary["areas_affected"] == 2


def test_empty_spec_is_identity(small):
    areas, points = small
    base = compute_index(areas, points)
    rep = run_scenario(ScenarioSpec(), areas, points, baseline=base)
    assert all(d == 0 for d in rep.deltas().values())
    assert rep.summary == {"max_delta": 0.0, "mean_delta": 0.0, "areas_affected": 0}


def test_frozen_needs_baseline(small):
    areas, points = small
    with pytest.raises(MissingBaselineError):
        run_scenario(ScenarioSpec(ALL), areas, points)


def test_recompute_policy_without_baseline(small):
    areas, points = small
    rep = run_scenario(ScenarioSpec(ALL, bounds_policy=BoundsPolicy.RECOMPUTE), areas, points, ScoringSettings())
    assert len(rep.rows) == 5
    assert rep.run.bounds.source == "baseline"


def test_deltas_nonnegative_under_frozen_bounds(small):
    areas, points = small
    base = compute_index(areas, points)
    for r in range(1, 4):
        for combo in itertools.combinations(ALL, r):
            rep = run_scenario(ScenarioSpec(combo), areas, points, baseline=base)
            assert all(d >= -1e-12 for d in rep.deltas().values()), combo


def test_interventions_commute(small):
    areas, points = small
    data = ScenarioDataset(tuple(areas), tuple(points), ScoreTable())
    finals = [transform(data, ScenarioSpec(order)) for order in itertools.permutations(ALL)]
    assert all(f == finals[0] for f in finals)
    base = compute_index(areas, points)
    scores = {
        tuple(sorted(run_scenario(ScenarioSpec(o), areas, points, baseline=base).deltas().items()))
        for o in itertools.permutations(ALL)
    }
    assert len(scores) == 1


@pytest.mark.parametrize("kw", [
    {"interventions": ("cash_recyclers", "cash_recyclers")},
    {"interventions": ("teleport",)},
    {"digital_from": 7, "digital_to": 10},
    {"digital_from": 11},
    {"recycler_lonely_threshold": 0},
    {"bounds_policy": "whatever"},
])
def test_spec_validation(kw):
    with pytest.raises(InvalidConfigError):
        ScenarioSpec(**kw)


def test_spec_to_dict_roundtrip():
    s = ScenarioSpec(("digital_inclusion", "paypoint_banking"))
    d = s.to_dict()
    assert d["interventions"] == ["digital_inclusion", "paypoint_banking"]
    assert ScenarioSpec(**{**d, "interventions": tuple(d["interventions"])}) == s
