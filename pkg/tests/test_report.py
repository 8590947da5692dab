import csv
import json
import re

import numpy as np
import pytest

from blindredact import report, synth
from blindredact.evaluate import CVResult, EvalConfig, ScoreTriple
from blindredact.redact import RedactionMatrix, RedactionPlan, run_plan
from blindredact.table import CATEGORICAL, NUMERIC, Column, Table

CFG = EvalConfig(k=5, seed=9)


@pytest.fixture(scope="module")
def three_by_three():
    t = synth.generate(synth.SynthSpec(600, 2, (
        synth.ColumnSpec("a", "uniform-categorical", {"labels": 3}),
        synth.ColumnSpec("b", "copy-of", {"source": "a", "noise": 0.2}),
        synth.ColumnSpec("c", "uniform-categorical", {"labels": 2}),
    )))
    plan = RedactionPlan(("a", "b", "c"), ("a", "b", "c"), CFG, ("A x", "B per Discharge", "C"))
    return run_plan(t, plan)


def fake_result(target, accs, kappas):
    folds = [{"fold": i, "accuracy": a, "kappa": k} for i, (a, k) in enumerate(zip(accs, kappas))]
    return CVResult(target, ["f"], ScoreTriple.of(accs), ScoreTriple.of(kappas), folds)


def negative_matrix():
    plan = RedactionPlan(("x", "y"), ("x", "y"), CFG)
    cells = {("x", "x"): None, ("y", "y"): None,
             ("x", "y"): fake_result("y", [40.0, 45.5], [-0.25, -0.1]),
             ("y", "x"): fake_result("x", [12.345, 50.0], [-0.333, 0.2])}
    return RedactionMatrix(plan, cells)


def test_csv_shape_and_na_diagonal(three_by_three, tmp_path):
    m, _ = three_by_three
    paths = report.emit_all_matrices(m, tmp_path)
    assert len(paths) == 6
    lines = sum(len(p.read_text().splitlines()) for p in paths)
    assert lines == 6 * 4
    rows = list(csv.reader(open(tmp_path / "accuracy_mikro.csv")))
    assert rows[0] == ["", "Accuracy MIKRO", "a", "b", "c"]
    assert [r[1] for r in rows[1:]] == ["A x", "B per Discharge", "C"]
    for i, r in enumerate(rows[1:]):
        assert all(len(x) == 5 for x in rows)
        assert r[0] == "BLIND"
        for j, v in enumerate(r[2:]):
            assert (v == "N/A") == (i == j)
            if v != "N/A":
                assert re.fullmatch(r"-?\d+\.\d\d", v)


def test_csv_reemission_identical(three_by_three, tmp_path):
    m, _ = three_by_three
    a = report.emit_matrix_csv(m, "kappa", "minus", tmp_path / "a.csv").read_bytes()
    b = report.emit_matrix_csv(m, "kappa", "minus", tmp_path / "b.csv").read_bytes()
    assert a == b


def test_negative_kappa_round_trip(tmp_path):
    m = negative_matrix()
    path = report.emit_matrix_csv(m, "kappa", "minus", tmp_path / "k.csv")
    back = report.read_matrix_csv(path)
    assert back["values"] == [[None, -0.25], [-0.333, None]]
    back = report.read_matrix_csv(report.emit_matrix_csv(m, "accuracy", "minus", tmp_path / "a.csv"))
    assert back["values"][1][0] == 12.35  # two decimals


def test_four_charts(three_by_three, tmp_path):
    m, base = three_by_three
    paths = report.emit_charts(m, base, tmp_path)
    assert [p.name for p in paths] == [f"{stem}.svg" for stem, _, _ in report.CHARTS]
    for p in paths:
        svg = p.read_text()
        assert svg.lstrip().startswith("<?xml")
        # 6 computed cells x 3 statistics
        assert len(re.findall(r'id="(accuracy|kappa)\|', svg)) == 18
    by_target = list(csv.DictReader(open(tmp_path / "graph2_accuracy_by_target.csv")))
    by_blind = list(csv.DictReader(open(tmp_path / "graph4_accuracy_by_blind.csv")))
    assert len(by_target) == len(by_blind) == 6
    key = lambda r: (r["blind"], r["target"], r["minus"], r["plus"], r["mikro"])
    assert sorted(map(key, by_target)) == sorted(map(key, by_blind))
    assert [key(r) for r in by_target] != [key(r) for r in by_blind]


def test_charts_deterministic(three_by_three, tmp_path):
    m, base = three_by_three
    a = report.emit_charts(m, base, tmp_path / "1")
    b = report.emit_charts(m, base, tmp_path / "2")
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()


def test_negative_kappa_bars(tmp_path):
    m = negative_matrix()
    groups = report.bar_groups(m, {}, "kappa", "target")
    assert min(g["minus"] for g in groups) < 0
    report.emit_charts(m, {}, tmp_path)
    rows = list(csv.DictReader(open(tmp_path / "graph3_kappa_by_target.csv")))
    assert any(float(r["minus"]) < 0 for r in rows)
    assert all(r["baseline_mikro"] == "" for r in rows)


def test_short_label():
    assert report.short_label("Charge per Discharge") == "Charge PP"
    assert report.short_label("Facility Total Loss") == "Loss Total"
    assert report.short_label("ZIP") == "ZIP"


def test_summary_chart(tmp_path):
    cols = {
        "INorOUTPT": ["OUT", "IN", "OUT", "IN", "IN"],
        "Facility Total Charge": [10.0, 20.0, 30.0, 40.0, 50.0],
        "Facility Total Payment": [10.0, 15.0, 30.0, 30.0, 50.0],
        "Facility Total Loss": [0.0, 5.0, 0.0, 10.0, 0.0],
        "Discharges": [1.0, 2.0, 3.0, 4.0, 5.0],
    }
    t = Table("t", [Column(k, CATEGORICAL if k == "INorOUTPT" else NUMERIC, v) for k, v in cols.items()])
    data = report.emit_summary_chart(t, tmp_path / "g1.svg")
    assert data["order"].tolist() == [1, 3, 4, 0, 2]
    assert data["n_inpatient"] == 3
    assert len(data["Facility Total Loss"]) == 5
    assert data["Facility Total Loss"].tolist() == [5.0, 10.0, 0.0, 0.0, 0.0]
    assert (tmp_path / "g1.svg").stat().st_size > 0


def test_report_json_round_trip(three_by_three, tmp_path):
    m, base = three_by_three
    rep = report.build_report(m, base, {"k": 5}, {"rows": 600}, timestamp="2011-01-01T00:00:00+00:00")
    path = report.emit_run_json(rep, tmp_path / "run.json")
    loaded = report.load_report(path)
    m2, base2 = report.matrix_from_report(loaded)
    assert m2.plan == m.plan
    for key, r in m.cells.items():
        r2 = m2.cells[key]
        assert (r is None) == (r2 is None)
        if r is not None:
            assert r2.accuracy == r.accuracy and r2.kappa == r.kappa
    assert base2.keys() == base.keys()
    cells = [r for _, _, r in m.computed()]
    assert abs(loaded["summary"]["mean_accuracy_mikro"] - np.mean([r.accuracy.mikro for r in cells])) < 1e-9
    assert report.report_json_text(loaded) == path.read_text()


def test_run_id_tracks_content(three_by_three):
    m, base = three_by_three
    a = report.build_report(m, base, {"k": 5}, {"sha": "x"}, timestamp="t1")
    b = report.build_report(m, base, {"k": 5}, {"sha": "x"}, timestamp="t2")
    c = report.build_report(m, base, {"k": 5}, {"sha": "y"}, timestamp="t1")
    assert a["run_id"] == b["run_id"] != c["run_id"]


def test_report_without_fold_scores_rejected(three_by_three):
    m, base = three_by_three
    rep = json.loads(report.report_json_text(report.build_report(m, base, {}, {}, timestamp="t")))
    for c in rep["cells"]:
        c.pop("per_fold", None)
    with pytest.raises(report.ReportError, match="per-fold"):
        report.matrix_from_report(rep)


def test_report_missing_cells_rejected(three_by_three):
    m, base = three_by_three
    rep = json.loads(report.report_json_text(report.build_report(m, base, {}, {}, timestamp="t")))
    rep["cells"] = rep["cells"][:-1]
    with pytest.raises(report.ReportError):
        report.matrix_from_report(rep)


def test_load_report_errors(tmp_path):
    with pytest.raises(report.ReportError):
        report.load_report(tmp_path / "none.json")
    (tmp_path / "bad.json").write_text("[")
    with pytest.raises(report.ReportError):
        report.load_report(tmp_path / "bad.json")
