import csv
import json
import random

import pytest
import yaml

from finex.cli import main
from finex.config import load_config
from finex.errors import StageError
from finex.pipeline import ARTIFACTS, run_all, run_pipeline
from conftest import GOLDEN

EXPECTED = json.loads((GOLDEN / "expected.json").read_text())


def _set(cfg_path, **changes):
    data = yaml.safe_load(cfg_path.read_text())
    data.update(changes)
    cfg_path.write_text(yaml.safe_dump(data))
    return cfg_path


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _snapshot(out_dir):
    return {p.name: p.read_bytes() for p in sorted(out_dir.iterdir())}


@pytest.fixture
def golden_result(golden_copy):
    return run_all(load_config(golden_copy)), golden_copy.parent / "out"


def test_golden_scores_match_oracle(golden_result):
    res, _ = golden_result
    exp = EXPECTED["areas"]
    for r in res.run.results:
        e = exp[r.area_id]
        assert r.score == pytest.approx(e["score"], abs=1e-9)
        assert r.jenks_class == e["jenks_class"]
        for v, c in e["components"].items():
            assert r.components[v] == pytest.approx(c, abs=1e-9)
    for p in res.run.profiles:
        e = exp[p.area_id]
        assert {k.value: n for k, n in p.counts.items()} == e["counts"]
        assert p.avcash_raw == e["avcash_raw"]
        assert p.lonely_free_atms == e["lonely_free_atms"]
    assert res.run.jenks.ssd == pytest.approx(EXPECTED["jenks_ssd"], rel=1e-9, abs=1e-9)
    bounds = res.run.bounds
    for v, (lo, hi) in EXPECTED["bounds"].items():
        assert bounds[v] == (lo, hi)


def test_golden_validation_and_scenario(golden_result):
    res, _ = golden_result
    for w, m in EXPECTED["ward_medians"].items():
        assert res.medians[w] == pytest.approx(m, abs=1e-9)
    ranks = {w.ward_id: w for w in res.comparison.wards}
    for w, r in EXPECTED["ward_rank_now"].items():
        assert ranks[w].rank_now == r
        assert ranks[w].rank_then == EXPECTED["ward_rank_then"][w]
    assert res.comparison.spearman == pytest.approx(EXPECTED["spearman"], abs=1e-12)
    for r in res.scenario.rows:
        assert r.scenario_score == pytest.approx(EXPECTED["scenario_scores"]["all"][r.area_id], abs=1e-9)
    for name, deltas in res.per_intervention.items():
        for a, d in deltas.items():
            base = EXPECTED["areas"][a]["score"]
            assert d == pytest.approx(EXPECTED["scenario_scores"][name][a] - base, abs=1e-9)
    converted = sorted(p.id for p in res.scenario.dataset.points if p.kind.value == "recycler")
    assert converted == EXPECTED["recyclers"]


def test_golden_artifacts(golden_result):
    res, out = golden_result
    assert sorted(p.name for p in out.iterdir()) == sorted(ARTIFACTS)
    rows = _read_csv(out / "index.csv")
    assert [r["area_id"] for r in rows] == sorted(EXPECTED["areas"])
    assert rows[0]["score"] == f"{EXPECTED['areas']['E01000001']['score']:.4f}"
    gj = json.loads((out / "index.geojson").read_text())
    assert gj["crs"]["properties"]["name"] == "EPSG:27700"
    props = gj["features"][0]["properties"]
    assert all(k.startswith("finex:") for k in props)
    assert gj["features"][0]["geometry"]["type"] == "Polygon"
    report = json.loads((out / "run_report.json").read_text())
    assert report["weights"]["percent_2dp"]["avcash"] == 26.67
    assert abs(report["weights"]["sum"] - 1) <= 1e-9
    assert report["artifacts"] == sorted(ARTIFACTS)
    assert report["config"]["catchment_radius_m"] == 500.0
    assert report["counts"]["dropped_points"] == ["K01"]
    assert {r["kind"] for r in report["nn_table"]} >= {"free_atm", "charging_atm"}
    scen = _read_csv(out / "scenario_delta.csv")
    assert set(scen[0]) >= {"delta_paypoint_banking", "delta_cash_recyclers", "delta_digital_inclusion"}
    assert all(float(r["delta"]) >= 0 for r in scen)


def test_full_precision_flag(golden_copy):
    _set(golden_copy, full_precision=True)
    run_all(load_config(golden_copy))
    rows = _read_csv(golden_copy.parent / "out" / "index.csv")
    for r in rows:
        assert float(r["score"]) == pytest.approx(EXPECTED["areas"][r["area_id"]]["score"], abs=1e-12)


def test_rerun_is_byte_identical(golden_copy):
    cfg = load_config(golden_copy)
    run_all(cfg)
    first = _snapshot(cfg.output_dir)
    run_all(cfg)
    assert _snapshot(cfg.output_dir) == first


def _shuffle_rows(path, rng):
    lines = path.read_text().splitlines()
    body = lines[1:]
    rng.shuffle(body)
    path.write_text("\n".join([lines[0]] + body) + "\n")


@pytest.mark.parametrize("seed", range(3))
def test_row_permutation_is_byte_identical(golden_copy, tmp_path, seed):
    cfg = load_config(golden_copy)
    run_all(cfg)
    first = _snapshot(cfg.output_dir)
    rng = random.Random(seed)
    for name in ("areas.csv", "infrastructure.csv", "ward_lookup.csv", "historical_ranks.csv"):
        _shuffle_rows(golden_copy.parent / name, rng)
    run_all(cfg)
    assert _snapshot(cfg.output_dir) == first


def test_without_ward_files(golden_copy):
    data = yaml.safe_load(golden_copy.read_text())
    del data["inputs"]["ward_lookup"]
    del data["inputs"]["historical_ranks"]
    golden_copy.write_text(yaml.safe_dump(data))
    res = run_all(load_config(golden_copy))
    assert "validation.csv" not in res.written
    assert res.medians is None
    assert not (golden_copy.parent / "out" / "validation.csv").exists()


def test_without_historical_ranks(golden_copy):
    data = yaml.safe_load(golden_copy.read_text())
    del data["inputs"]["historical_ranks"]
    golden_copy.write_text(yaml.safe_dump(data))
    res = run_all(load_config(golden_copy))
    rows = _read_csv(golden_copy.parent / "out" / "validation.csv")
    assert len(rows) == 4 and all(r["rank_then"] == "" for r in rows)
    assert any("historical" in n for n in res.report["notes"])


def test_failure_leaves_no_partial_outputs(golden_copy):
    cfg = load_config(golden_copy)
    # drop one area from the ward lookup: validate fails after index has succeeded
    lookup = golden_copy.parent / "ward_lookup.csv"
    lines = lookup.read_text().splitlines()
    lookup.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(StageError) as exc:
        run_all(cfg)
    assert exc.value.stage == "validate"
    out = golden_copy.parent / "out"
    assert not out.exists() or list(out.iterdir()) == []
    assert not list(golden_copy.parent.glob(".finex-staging-*"))


def test_failed_rerun_keeps_previous_outputs(golden_copy):
    cfg = load_config(golden_copy)
    run_all(cfg)
    before = _snapshot(cfg.output_dir)
    (golden_copy.parent / "ward_lookup.csv").write_text("area_id,ward_id,ward_name\n")
    with pytest.raises(StageError):
        run_all(cfg)
    assert _snapshot(cfg.output_dir) == before


def test_single_stage_clears_stale_artifacts(golden_copy):
    cfg = load_config(golden_copy)
    run_all(cfg)
    run_pipeline(cfg, ["nni"])
    assert sorted(p.name for p in cfg.output_dir.iterdir()) == ["nnstats.csv", "run_report.json"]


def test_bbox_nni_mode(golden_copy):
    _set(golden_copy, nni_area="bbox")
    res = run_pipeline(load_config(golden_copy), ["nni"])
    assert res.nn
    for s in res.nn.values():
        assert s.area_m2 < 6_300_000.0


def test_radius_changes_fingerprint(golden_copy):
    a = run_pipeline(load_config(golden_copy), ["index"]).run.fingerprint
    b = run_pipeline(load_config(golden_copy).with_overrides(radius=600), ["index"]).run.fingerprint
    assert a != b and len(a) == 16


# -- CLI -----------------------------------------------------------------------

def test_cli_run_all(golden_copy, capsys):
    assert main(["run-all", "--config", str(golden_copy)]) == 0
    printed = capsys.readouterr().out.split()
    assert len(printed) == len(ARTIFACTS)


def test_cli_ingest_check(golden_copy, capsys):
    assert main(["ingest-check", "--config", str(golden_copy)]) == 0
    out = capsys.readouterr().out
    assert "areas: 10" in out and "points: 38" in out
    assert not (golden_copy.parent / "out").exists()


@pytest.mark.parametrize("sub,artifact", [
    ("catchment", "catchments.csv"), ("nni", "nnstats.csv"), ("index", "index.csv"),
    ("validate", "validation.csv"), ("scenario", "scenario_delta.csv"),
])
def test_cli_subcommands(golden_copy, tmp_path, sub, artifact):
    out = tmp_path / "o"
    assert main([sub, "--config", str(golden_copy), "--out", str(out)]) == 0
    assert (out / artifact).exists() and (out / "run_report.json").exists()


def test_cli_overrides_reach_report(golden_copy, tmp_path):
    out = tmp_path / "o"
    args = ["index", "--config", str(golden_copy), "--out", str(out), "--radius", "650",
            "--lonely-threshold", "300", "--jenks-k", "3"]
    assert main(args) == 0
    rep = json.loads((out / "run_report.json").read_text())
    assert rep["config"]["catchment_radius_m"] == 650.0
    assert rep["config"]["lonely_threshold_m"] == 300.0
    assert rep["jenks"]["k"] == 3
    assert {r["jenks_class"] for r in _read_csv(out / "index.csv")} == {"1", "2", "3"}


def test_cli_errors(golden_copy, tmp_path, capsys):
    assert main(["index", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert "error:" in capsys.readouterr().err
    assert main(["index", "--config", str(golden_copy), "--jenks-k", "11"]) == 2
    assert "stage 'index'" in capsys.readouterr().err
    _set(golden_copy, crs="EPSG:4326")
    assert main(["run-all", "--config", str(golden_copy)]) == 2
    assert "geographic" in capsys.readouterr().err
