import json
import subprocess
import sys
from pathlib import Path

import pytest

from blindredact import cli, synth
from blindredact.table import read_table, write_table

DATA = Path(__file__).parent / "data"
MAPPING = Path(__file__).parents[1] / "configs" / "cms2011_mapping.json"


def ingest(tmp_path, name="derived.csv", mapping=MAPPING):
    out = tmp_path / name
    code = cli.main(["ingest", str(DATA / "inpatient_sample.csv"), str(DATA / "outpatient_sample.csv"),
                     str(mapping), str(out)])
    return code, out


def test_ingest_sample(tmp_path):
    code, out = ingest(tmp_path)
    assert code == 0
    t = read_table(out, categorical=["PROVIDER", "ZIP"])
    assert len(t.names) == 13
    assert t.row_count == 6  # one zero-discharge row dropped
    assert "01234" not in t.column("PROVIDER").values.tolist()  # the dropped row
    assert t.column("ZIP").values.tolist()[:3] == ["36301", "35957", "35631"]
    drops = Path(str(out) + ".drops.txt").read_text()
    assert "discharges_missing_or_below_1\t1" in drops


def test_ingest_rerun_identical(tmp_path):
    _, a = ingest(tmp_path, "a.csv")
    _, b = ingest(tmp_path, "b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_ingest_missing_mapping_fails(tmp_path, capsys):
    code, _ = ingest(tmp_path, mapping=tmp_path / "nope.json")
    assert code == 2
    assert "nope.json" in capsys.readouterr().err


def write_config(tmp_path, **extra):
    table = synth.generate(synth.SynthSpec(400, 5, (
        synth.ColumnSpec("a", "uniform-categorical", {"labels": 3}),
        synth.ColumnSpec("b", "copy-of", {"source": "a", "noise": 0.2}),
        synth.ColumnSpec("c", "lognormal-numeric", {"round": 2}),
    )))
    write_table(table, tmp_path / "data.csv")
    cfg = {"data": "data.csv", "categorical": ["a", "b"], "plan": {"blind": "all", "targets": "all"},
           "k": 4, "output_dir": "out", **extra}
    (tmp_path / "run.json").write_text(json.dumps(cfg))
    return tmp_path / "run.json"


def test_run_three_by_three(tmp_path):
    config = write_config(tmp_path)
    assert cli.main(["run", str(config)]) == 0
    out = tmp_path / "out"
    names = sorted(p.name for p in out.iterdir())
    assert names == sorted([f"{m}_{s}.csv" for m in ("accuracy", "kappa") for s in ("minus", "plus", "mikro")]
                           + ["baseline.csv", "run.json"])
    lines = (out / "accuracy_mikro.csv").read_text().splitlines()
    assert lines[0] == ",Accuracy MIKRO,a,b,c"
    assert len(lines) == 4
    assert sum(line.count("N/A") for line in lines) == 3
    run = json.loads((out / "run.json").read_text())
    assert run["config"]["seed"] == 2011 and run["config"]["k"] == 4
    assert run["rng"]["algorithm"] == "numpy.random.PCG64"
    assert len(run["dataset"]["file_sha256"]) == 64


def test_run_repeatable_apart_from_timestamp(tmp_path):
    config = write_config(tmp_path)
    assert cli.main(["run", str(config), "--out", str(tmp_path / "r1")]) == 0
    assert cli.main(["run", str(config), "--out", str(tmp_path / "r2")]) == 0
    for p in (tmp_path / "r1").iterdir():
        other = tmp_path / "r2" / p.name
        if p.name == "run.json":
            a, b = json.loads(p.read_text()), json.loads(other.read_text())
            assert a.pop("timestamp") and b.pop("timestamp")
            a["config"].pop("output_dir"), b["config"].pop("output_dir")
            assert a == b
        else:
            assert p.read_bytes() == other.read_bytes()


def test_parallel_matches_serial(tmp_path):
    config = write_config(tmp_path)
    assert cli.main(["run", str(config), "--out", str(tmp_path / "p1"), "--parallel", "1"]) == 0
    assert cli.main(["run", str(config), "--out", str(tmp_path / "p8"), "--parallel", "8"]) == 0
    for p in (tmp_path / "p1").glob("*.csv"):
        assert p.read_bytes() == (tmp_path / "p8" / p.name).read_bytes()


def test_flags_override_config(tmp_path):
    config = write_config(tmp_path, seed=1)
    assert cli.main(["run", str(config), "--seed", "7", "--k", "3", "--bins", "4", "--fit-scope", "global"]) == 0
    run = json.loads((tmp_path / "out" / "run.json").read_text())
    assert run["config"]["seed"] == 7 and run["config"]["k"] == 3
    assert run["config"]["binning"] == {"method": "equal-frequency", "k_bins": 4, "fit_scope": "global"}


def test_env_output_dir(tmp_path, monkeypatch):
    config = write_config(tmp_path)
    monkeypatch.setenv(cli.OUT_DIR_ENV, str(tmp_path / "from_env"))
    assert cli.main(["run", str(config)]) == 0
    assert (tmp_path / "from_env" / "run.json").is_file()
    assert not (tmp_path / "out").exists()


def test_report_from_run_json(tmp_path):
    config = write_config(tmp_path)
    assert cli.main(["run", str(config)]) == 0
    assert cli.main(["report", str(tmp_path / "out" / "run.json"), str(tmp_path / "charts")]) == 0
    svgs = sorted(p.name for p in (tmp_path / "charts").glob("*.svg"))
    assert svgs == ["graph2_accuracy_by_target.svg", "graph3_kappa_by_target.svg",
                    "graph4_accuracy_by_blind.svg", "graph5_kappa_by_blind.svg"]


def test_report_with_summary_table(tmp_path):
    code, derived = ingest(tmp_path)
    cfg = {"data": str(derived), "k": 2, "output_dir": "out",
           "plan": {"blind": ["DRG", "STATE"], "targets": ["INorOUTPT"]}}
    (tmp_path / "run.json").write_text(json.dumps(cfg))
    assert cli.main(["run", str(tmp_path / "run.json")]) == 0
    assert cli.main(["report", str(tmp_path / "out" / "run.json"), str(tmp_path / "charts"),
                     "--table", str(derived)]) == 0
    assert (tmp_path / "charts" / "graph1_summary.svg").is_file()


def test_synth_command(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(synth.planted_spec(n=100).to_dict()))
    assert cli.main(["synth", str(spec), str(tmp_path / "s.csv")]) == 0
    assert read_table(tmp_path / "s.csv").row_count == 100
    assert cli.main(["synth", str(tmp_path / "m.csv"), "--medicare-like", "50"]) == 0
    assert len(read_table(tmp_path / "m.csv").names) == 13


def test_config_errors_exit_2(tmp_path, capsys):
    config = write_config(tmp_path, bogus=1)
    assert cli.main(["run", str(config)]) == 2
    assert "bogus" in capsys.readouterr().err
    config = write_config(tmp_path, k=1)
    assert cli.main(["run", str(config)]) == 2
    config = write_config(tmp_path, plan={"blind": ["zzz"], "targets": ["a"]})
    assert cli.main(["run", str(config)]) in (2, 3)
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["nonsense"]) == 2


def test_medicare_default_plan_needs_schema(tmp_path, capsys):
    config = write_config(tmp_path, plan="medicare-default")
    assert cli.main(["run", str(config)]) == 3
    assert "absent from the data" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    result = subprocess.run([sys.executable, "-m", "blindredact", "--help"], capture_output=True, text=True)
    assert result.returncode == 0
    assert "ingest" in result.stdout
