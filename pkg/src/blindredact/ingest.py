"""Join the inpatient/outpatient Medicare charge files and derive the analysis columns.

Both CMS files publish discharge-averaged money fields.  The joined table
stacks them, tags each row IN or OUT, and reconstructs facility totals as
average x discharges.  Money is handled in whole cents so that
``loss + payment == charge`` holds exactly.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .table import CATEGORICAL, MISSING, NUMERIC, Column, Table, parse_number

logger = logging.getLogger(__name__)

DRG = "DRG"
PROVIDER = "PROVIDER"
CITY = "CITY"
STATE = "STATE"
ZIP = "ZIP"
INOROUT = "INorOUTPT"
DISCHARGES = "Discharges"
CHARGE_PD = "Charge per Discharge"
PAYMENT_PD = "Payment per Discharge"
LOSS_PD = "Loss per Discharge"
TOTAL_CHARGE = "Facility Total Charge"
TOTAL_PAYMENT = "Facility Total Payment"
TOTAL_LOSS = "Facility Total Loss"

#: Fields each raw file must supply, keyed by canonical name.
SOURCE_FIELDS = (DRG, PROVIDER, CITY, STATE, ZIP, DISCHARGES, CHARGE_PD, PAYMENT_PD)
CATEGORICAL_FIELDS = (DRG, PROVIDER, CITY, STATE, ZIP, INOROUT)
MONEY_FIELDS = (CHARGE_PD, PAYMENT_PD, LOSS_PD, TOTAL_CHARGE, TOTAL_PAYMENT, TOTAL_LOSS)

#: The thirteen analysis columns, in output order.
SCHEMA_COLUMNS = (
    DRG, PROVIDER, CITY, STATE, ZIP, INOROUT, DISCHARGES,
    CHARGE_PD, PAYMENT_PD, LOSS_PD, TOTAL_CHARGE, TOTAL_PAYMENT, TOTAL_LOSS,
)
SCHEMA_KINDS = {n: (CATEGORICAL if n in CATEGORICAL_FIELDS else NUMERIC) for n in SCHEMA_COLUMNS}

#: facility total -> per-discharge column it is reconstructed from
TOTALS = {TOTAL_CHARGE: CHARGE_PD, TOTAL_PAYMENT: PAYMENT_PD, TOTAL_LOSS: LOSS_PD}

CODE_PREFIX = {"IN": "DRG:", "OUT": "APC:"}

_MONEY_JUNK = re.compile(r"[$,\s]")


def load_mapping(path: str | Path) -> dict:
    """Read a column-name correspondence file.

    The file is JSON: ``{"inpatient": {canonical: source, ...}, "outpatient": {...}}``.
    """
    path = Path(path)
    try:
        mapping = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read mapping file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"mapping file {path} is not valid JSON: {exc}") from exc
    for side in ("inpatient", "outpatient"):
        if not isinstance(mapping.get(side), dict):
            raise ConfigError(f"mapping file {path} lacks an object for {side!r}")
        absent = [f for f in SOURCE_FIELDS if f not in mapping[side]]
        if absent:
            raise ConfigError(f"mapping for {side!r} does not assign {absent}")
    return mapping


def _to_number_column(name: str, column: Column) -> Column:
    if column.is_numeric:
        return column.renamed(name)
    out = []
    for i, v in enumerate(column.values):
        if v is None:
            out.append(np.nan)
            continue
        parsed = parse_number(_MONEY_JUNK.sub("", v))
        if parsed is None:
            raise DataError(f"column {column.name!r} row {i}: {v!r} is not a number")
        out.append(parsed)
    return Column(name, NUMERIC, out)


def _relabel(table: Table, mapping: dict, flag: str) -> Table:
    cols = []
    for canonical in SOURCE_FIELDS:
        source = mapping[canonical]
        if source not in table:
            raise DataError(f"{table.name}: mapped column {source!r} (for {canonical}) is absent")
        col = table.column(source)
        if canonical in CATEGORICAL_FIELDS:
            col = col.as_categorical().renamed(canonical)
            if canonical == DRG:
                col = Column(DRG, CATEGORICAL, [None if v is None else CODE_PREFIX[flag] + v for v in col.values])
            col = col.fill_missing(MISSING)
        else:
            col = _to_number_column(canonical, col)
        cols.append(col)
    cols.append(Column(INOROUT, CATEGORICAL, [flag] * table.row_count))
    return Table(table.name, cols)


def harmonize_join(inpatient: Table, outpatient: Table, mapping: dict) -> Table:
    """Stack both files under canonical names, inpatient rows first.

    Only renames, the DRG/APC code prefix, missing-token fill and the IN/OUT
    flag are applied; money units are whatever the files carry.
    """
    for side in ("inpatient", "outpatient"):
        if side not in mapping:
            raise ConfigError(f"mapping lacks {side!r}")
    parts = [_relabel(inpatient, mapping["inpatient"], "IN"), _relabel(outpatient, mapping["outpatient"], "OUT")]
    cols = []
    for name in [*SOURCE_FIELDS, INOROUT]:
        a, b = (p.column(name) for p in parts)
        cols.append(Column(name, a.kind, np.concatenate([a.values, b.values])))
    return Table("joined", cols)


@dataclass
class DropReport:
    rows_in: int
    rows_out: int
    dropped: dict[str, int] = field(default_factory=dict)

    @property
    def total_dropped(self) -> int:
        return self.rows_in - self.rows_out

    def to_text(self) -> str:
        lines = [f"rows_in\t{self.rows_in}", f"rows_out\t{self.rows_out}", f"dropped\t{self.total_dropped}"]
        lines += [f"dropped:{reason}\t{n}" for reason, n in self.dropped.items()]
        return "\n".join(lines) + "\n"


def _cents(values: np.ndarray) -> np.ndarray:
    return np.rint(values * 100.0).astype(np.int64)


def derive_columns(joined: Table) -> tuple[Table, DropReport]:
    """Add loss and facility-total columns; drop rows they are undefined on.

    Rows with missing or < 1 discharges, or a missing charge/payment, are
    dropped rather than imputed.  Returns the 13-column table and a count of
    dropped rows per reason.
    """
    for name in (DISCHARGES, CHARGE_PD, PAYMENT_PD):
        if name not in joined:
            raise DataError(f"required column {name!r} missing from {joined.name!r}")
        if not joined.column(name).is_numeric:
            raise DataError(f"required column {name!r} is not numeric")
    discharges = joined.column(DISCHARGES).values
    charge = joined.column(CHARGE_PD).values
    payment = joined.column(PAYMENT_PD).values

    bad_discharges = np.isnan(discharges) | (discharges < 1)
    bad_money = np.isnan(charge) | np.isnan(payment)
    keep = ~(bad_discharges | bad_money)
    report = DropReport(
        rows_in=joined.row_count,
        rows_out=int(keep.sum()),
        dropped={
            "discharges_missing_or_below_1": int(bad_discharges.sum()),
            "money_missing": int((bad_money & ~bad_discharges).sum()),
        },
    )
    if report.total_dropped:
        logger.info("dropped %d of %d rows", report.total_dropped, report.rows_in)

    kept = joined.take(np.flatnonzero(keep))
    d = kept.column(DISCHARGES).values
    charge_c = _cents(kept.column(CHARGE_PD).values)
    payment_c = _cents(kept.column(PAYMENT_PD).values)
    loss_c = charge_c - payment_c
    # totals are exact in cents only for whole discharge counts
    whole = np.all(d == np.rint(d))
    per = {CHARGE_PD: charge_c, PAYMENT_PD: payment_c, LOSS_PD: loss_c}
    money = {name: c / 100.0 for name, c in per.items()}
    for total, source in TOTALS.items():
        if whole:
            money[total] = (per[source] * d.astype(np.int64)) / 100.0
        else:
            money[total] = np.rint(per[source] * d) / 100.0

    cols = {name: kept.column(name) for name in CATEGORICAL_FIELDS if name in kept}
    if INOROUT not in cols:
        raise DataError(f"required column {INOROUT!r} missing from {joined.name!r}")
    cols[DISCHARGES] = kept.column(DISCHARGES)
    for name, values in money.items():
        cols[name] = Column(name, NUMERIC, values)
    missing = [n for n in SCHEMA_COLUMNS if n not in cols]
    if missing:
        raise DataError(f"required columns missing from {joined.name!r}: {missing}")
    return Table("derived", [cols[n] for n in SCHEMA_COLUMNS]), report


@dataclass
class InvariantResult:
    name: str
    passed: bool
    checked: int
    violations: int
    rows: list[int]

    @property
    def pass_rate(self) -> float:
        return 1.0 if self.checked == 0 else 1.0 - self.violations / self.checked


@dataclass
class ValidationReport:
    results: list[InvariantResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name: str) -> InvariantResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "invariants": [
                {"name": r.name, "passed": r.passed, "checked": r.checked,
                 "violations": r.violations, "pass_rate": r.pass_rate, "rows": r.rows}
                for r in self.results
            ],
        }


def _result(name: str, bad: np.ndarray, checked: int | None = None) -> InvariantResult:
    rows = np.flatnonzero(bad)
    return InvariantResult(
        name=name,
        passed=len(rows) == 0,
        checked=len(bad) if checked is None else checked,
        violations=len(rows),
        rows=[int(i) for i in rows[:100]],
    )


def validate_schema(table: Table, schema: dict[str, str] = SCHEMA_KINDS) -> ValidationReport:
    """Check a derived table against the transaction schema; never raises."""
    results = []
    absent = [n for n in schema if n not in table]
    wrong_kind = [n for n in schema if n in table and table.column(n).kind != schema[n]]
    results.append(InvariantResult("columns_present", not absent, len(schema), len(absent), []))
    results.append(InvariantResult("column_kinds", not wrong_kind, len(schema), len(wrong_kind), []))
    if absent or wrong_kind:
        return ValidationReport(results)

    n = table.row_count
    d = table.column(DISCHARGES).values
    results.append(_result("discharges_at_least_1", ~(d >= 1)))
    flags = table.column(INOROUT).values
    results.append(_result("inoroutpt_in_or_out", np.array([f not in ("IN", "OUT") for f in flags], dtype=bool)))
    money = {name: table.column(name).values for name in MONEY_FIELDS}
    missing_money = np.zeros(n, dtype=bool)
    for values in money.values():
        missing_money |= np.isnan(values)
    results.append(_result("money_present", missing_money))

    with np.errstate(invalid="ignore"):
        loss_ok = _cents(money[LOSS_PD]) + _cents(money[PAYMENT_PD]) == _cents(money[CHARGE_PD])
        results.append(_result("loss_equals_charge_minus_payment", ~loss_ok | missing_money))
        for total, source in TOTALS.items():
            ok = np.abs(money[total] - money[source] * d) <= 1.0 * np.maximum(d, 1) + 1e-6
            results.append(_result(f"{total.lower().replace(' ', '_')}_consistent", ~ok | missing_money))
    return ValidationReport(results)
