import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from blindredact import synth  # noqa: E402
from blindredact.table import CATEGORICAL, NUMERIC, Column, Table  # noqa: E402


@pytest.fixture(scope="session")
def planted_spec():
    return synth.planted_spec(n=5000, seed=2011)


@pytest.fixture(scope="session")
def planted_table(planted_spec):
    return synth.generate(planted_spec)


@pytest.fixture(scope="session")
def small_medicare():
    return synth.medicare_like(3000, seed=5, providers=120, drgs=20, states=8, zips=90, cities=40,
                               outpatient_codes=5)


def cat(name, values):
    return Column(name, CATEGORICAL, values)


def num(name, values):
    return Column(name, NUMERIC, values)


def make_table(**columns):
    cols = []
    for name, values in columns.items():
        kind = NUMERIC if all(isinstance(v, (int, float)) or v is None for v in values) else CATEGORICAL
        if kind == NUMERIC:
            values = [float("nan") if v is None else v for v in values]
        cols.append(Column(name, kind, values))
    return Table("t", cols)


# ---------------------------------------------------------------- acceptance gate summary

_criteria: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "status": "PASS", "seconds": 0.0})
    entry["seconds"] += rep.duration
    if rep.skipped and entry["status"] == "PASS":
        entry["status"] = "SKIP"
    elif rep.failed:
        entry["status"] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {e['status']:4}  {e['title']}  ({e['seconds']:.1f} s)")
