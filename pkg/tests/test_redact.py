import numpy as np
import pytest

from blindredact import synth
from blindredact.errors import ConfigError, DataError
from blindredact.evaluate import EvalConfig, Prepared
from blindredact.redact import (
    CellError,
    RedactionPlan,
    added_value_deltas,
    cell_seed,
    plan_default_medicare,
    run_cell,
    run_matrix,
    run_plan,
)
from blindredact.table import Table

from conftest import cat

CFG = EvalConfig(k=10, seed=2011)

TABLE_ONE_ROWS = [
    "Charge per Discharge", "Facility Total Charge", "CITY", "DISCHARGE", "DRG", "INorOUTPT",
    "Loss per Discharge", "Facility total Loss", "Payment per Discharge", "Facility Total Payment",
    "PROVIDER", "STATE", "ZIP",
]
TABLE_ONE_COLUMNS = [
    "Charge per Discharge", "Facility Total Charge", "Discharges", "DRG", "Loss per Discharge",
    "Facility Total Loss", "Payment per Discharge", "Facility Total Payment", "State", "ZIP",
]


def test_default_plan_layout(small_medicare):
    plan = plan_default_medicare(small_medicare)
    assert len(plan.blind) == 13 and len(plan.targets) == 10
    assert list(plan.blind_labels) == TABLE_ONE_ROWS
    assert list(plan.target_labels) == TABLE_ONE_COLUMNS
    assert plan.blind[TABLE_ONE_ROWS.index("DISCHARGE")] == "Discharges"


def test_default_plan_missing_column(small_medicare):
    with pytest.raises(DataError, match="ZIP"):
        plan_default_medicare(small_medicare.drop("ZIP"))


def test_plan_rejects_duplicates():
    with pytest.raises(ConfigError):
        RedactionPlan(("a", "a"), ("b",))


def test_two_column_table_is_prior_only():
    labels = ["a"] * 60 + ["b"] * 25 + ["c"] * 15
    other = list(np.random.default_rng(0).choice(list("xyz"), 100))
    t = Table("t", [cat("x", other), cat("y", labels)])
    r = run_cell(t, "x", "y", CFG)
    assert r.features == []
    assert r.accuracy.mikro == 60.0


def test_blind_equal_target_rejected(planted_table):
    with pytest.raises(DataError):
        run_cell(planted_table, "target", "target", CFG)


def test_blinded_column_physically_absent(planted_table, monkeypatch):
    seen = {}
    import blindredact.redact as mod

    real = mod.cross_validate

    def spy(prepared, target, config, features):
        seen["names"] = prepared.names
        return real(prepared, target, config, features)

    monkeypatch.setattr(mod, "cross_validate", spy)
    run_cell(planted_table, "source", "target", CFG)
    assert "source" not in seen["names"]
    with pytest.raises(DataError):
        Prepared.from_table(planted_table).select(seen["names"])["source"]


def test_planted_copy_attribution():
    # copy-of target with 10% noise, 4 labels; one noise column
    spec = synth.SynthSpec(4000, 3, (
        synth.ColumnSpec("A", "uniform-categorical", {"labels": 4}),
        synth.ColumnSpec("T", "copy-of", {"source": "A", "noise": 0.1}),
        synth.ColumnSpec("N", "uniform-categorical", {"labels": 4}),
    ))
    t = synth.generate(spec)
    assert run_cell(t, "A", "T", CFG).accuracy.mikro <= 30
    assert run_cell(t, "N", "T", CFG).accuracy.mikro >= 85


def test_cell_seed_depends_on_names_only():
    assert cell_seed(1, "a", "b") == cell_seed(1, "a", "b")
    assert len({cell_seed(1, "a", "b"), cell_seed(1, "b", "a"), cell_seed(2, "a", "b"), cell_seed(1, None, "b")}) == 4


def test_three_column_matrix_has_na_diagonal():
    t = synth.generate(synth.SynthSpec(300, 1, (
        synth.ColumnSpec("a", "uniform-categorical", {"labels": 3}),
        synth.ColumnSpec("b", "copy-of", {"source": "a", "noise": 0.2}),
        synth.ColumnSpec("c", "uniform-categorical", {"labels": 2}),
    )))
    plan = RedactionPlan(("a", "b", "c"), ("a", "b", "c"), CFG)
    m = run_matrix(t, plan)
    grid = m.grid("accuracy", "mikro")
    for i in range(3):
        for j in range(3):
            assert (grid[i][j] is None) == (i == j)
    assert len(m.computed()) == 6


def test_plan_row_order_does_not_change_cells(planted_table):
    plan = RedactionPlan(tuple(planted_table.names[:4]), ("target", "noise1"), CFG)
    reordered = plan.reordered(tuple(reversed(plan.blind)))
    a = run_matrix(planted_table, plan)
    b = run_matrix(planted_table, reordered)
    assert a.cells.keys() == b.cells.keys()
    for key, r in a.cells.items():
        other = b.cells[key]
        assert (r is None) == (other is None)
        if r is not None:
            assert r.per_fold == other.per_fold


def test_medicare_matrix_layout(small_medicare):
    plan = plan_default_medicare(small_medicare, EvalConfig(k=3, seed=1))
    m, base = run_plan(small_medicare, plan)
    na = [(b, t) for (b, t), r in m.cells.items() if r is None]
    assert len(m.cells) == 130
    assert len(na) == 10
    assert all(b == t for b, t in na)
    assert set(base) == set(plan.targets)


def test_deltas(planted_table):
    plan = RedactionPlan(("source", "noise1", "noise2"), ("target",), CFG)
    m, base = run_plan(planted_table, plan)
    deltas = added_value_deltas(m, base)
    assert abs(deltas[("noise1", "target")]["accuracy"]) < 2
    assert abs(deltas[("noise2", "target")]["accuracy"]) < 2
    assert 55 < deltas[("source", "target")]["accuracy"] < 75
    assert ("target", "target") not in deltas


def test_sibling_exclusion(small_medicare):
    plan = plan_default_medicare(small_medicare, EvalConfig(k=3, seed=1), exclude_siblings=True)
    assert set(plan.exclude["Charge per Discharge"]) == {
        "Payment per Discharge", "Loss per Discharge", "Facility Total Charge", "Discharges"}
    r = run_cell(small_medicare, "ZIP", "Charge per Discharge", plan.config, plan.columns,
                 plan.exclude["Charge per Discharge"])
    assert "Loss per Discharge" not in r.features


def test_failed_cell_reports_context():
    # a numeric column that is entirely missing cannot be binned as a target
    from blindredact.table import NUMERIC, Column

    t = Table("t", [cat("a", list("xyxyxyxyxy")), Column("b", NUMERIC, [float("nan")] * 10)])
    plan = RedactionPlan(("a",), ("b", "a"), EvalConfig(k=2, seed=0))
    with pytest.raises(CellError) as info:
        run_matrix(t, plan)
    assert info.value.target == "b"


def test_near_chance_floor(planted_table):
    plan = RedactionPlan(tuple(planted_table.names), tuple(planted_table.names), CFG)
    m = run_matrix(planted_table, plan)
    for b, t, r in m.computed():
        labels = planted_table.column(t).values
        _, counts = np.unique(labels, return_counts=True)
        majority = 100.0 * counts.max() / counts.sum()
        assert r.accuracy.mikro >= majority - 3
