"""Rectangular tables of named categorical / numeric columns, and their delimited-text IO."""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

CATEGORICAL = "categorical"
NUMERIC = "numeric"

#: Token standing in for a missing categorical value once it enters modelling.
MISSING = "«missing»"


@dataclass(frozen=True)
class CsvFormat:
    delimiter: str = ","
    quotechar: str = '"'
    header: bool = True
    encoding: str = "utf-8"


@dataclass(eq=False)
class Column:
    """One named column.

    Numeric values live in a float64 array with NaN as the missing marker;
    categorical values live in an object array of ``str`` with ``None`` as
    the missing marker.
    """

    name: str
    kind: str
    values: np.ndarray

    def __post_init__(self):
        if self.kind == NUMERIC:
            values = np.asarray(self.values, dtype=np.float64)
            if np.isinf(values).any():
                raise DataError(f"numeric column {self.name!r} contains a non-finite value")
        elif self.kind == CATEGORICAL:
            values = np.empty(len(self.values), dtype=object)
            values[:] = [None if v is None else str(v).strip() for v in self.values]
        else:
            raise ValueError(f"unknown column kind {self.kind!r}")
        self.values = values

    def __len__(self) -> int:
        return len(self.values)

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC

    def missing_mask(self) -> np.ndarray:
        if self.is_numeric:
            return np.isnan(self.values)
        return np.array([v is None for v in self.values], dtype=bool)

    def take(self, index) -> "Column":
        return Column(self.name, self.kind, self.values[index])

    def renamed(self, name: str) -> "Column":
        return Column(name, self.kind, self.values)

    def as_categorical(self) -> "Column":
        """Text view of the column; numeric values are rendered as in files."""
        if not self.is_numeric:
            return self
        return Column(self.name, CATEGORICAL, [None if math.isnan(v) else format_number(v) for v in self.values])

    def fill_missing(self, token: str = MISSING) -> "Column":
        if self.is_numeric:
            raise DataError(f"cannot fill numeric column {self.name!r} with a token")
        return Column(self.name, CATEGORICAL, [token if v is None else v for v in self.values])

    def equals(self, other: "Column") -> bool:
        if self.name != other.name or self.kind != other.kind or len(self) != len(other):
            return False
        if self.is_numeric:
            return bool(np.array_equal(self.values, other.values, equal_nan=True))
        return list(self.values) == list(other.values)


@dataclass(eq=False)
class Table:
    name: str
    columns: list[Column] = field(default_factory=list)

    def __post_init__(self):
        names = [c.name for c in self.columns]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise DataError(f"duplicate column names: {dupes}")
        lengths = {len(c) for c in self.columns}
        if len(lengths) > 1:
            raise DataError(f"table {self.name!r} is not rectangular: column lengths {sorted(lengths)}")

    @property
    def row_count(self) -> int:
        return len(self.columns[0]) if self.columns else 0

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def __contains__(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise DataError(f"table {self.name!r} has no column {name!r}")

    def select(self, names: Sequence[str]) -> "Table":
        return Table(self.name, [self.column(n) for n in names])

    def drop(self, *names: str) -> "Table":
        for n in names:
            self.column(n)
        return Table(self.name, [c for c in self.columns if c.name not in names])

    def take(self, index) -> "Table":
        return Table(self.name, [c.take(index) for c in self.columns])

    def with_column(self, column: Column) -> "Table":
        """Append ``column``, or replace the existing column of the same name in place."""
        if column.name in self:
            cols = [column if c.name == column.name else c for c in self.columns]
        else:
            cols = self.columns + [column]
        return Table(self.name, cols)

    def rows(self) -> Iterable[tuple]:
        return zip(*(c.values for c in self.columns))

    def equals(self, other: "Table") -> bool:
        return self.names == other.names and all(a.equals(b) for a, b in zip(self.columns, other.columns))


def parse_number(text: str) -> float | None:
    """Parse a finite number, or return None when ``text`` is not one."""
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def format_number(value: float) -> str:
    if math.isnan(value):
        return ""
    if value.is_integer() and abs(value) < 2**53:
        return str(int(value))
    return repr(float(value))


def _infer_column(name: str, raw: list[str], force_categorical: bool) -> Column:
    cells = [None if s.strip() == "" else s.strip() for s in raw]
    if not force_categorical:
        parsed = []
        for s in cells:
            if s is None:
                parsed.append(math.nan)
                continue
            v = parse_number(s)
            if v is None:
                break
            parsed.append(v)
        else:
            return Column(name, NUMERIC, parsed)
    return Column(name, CATEGORICAL, cells)


def read_table(
    source: str | Path | io.TextIOBase,
    fmt: CsvFormat = CsvFormat(),
    categorical: Iterable[str] = (),
    name: str | None = None,
) -> Table:
    """Load a delimited text file into a :class:`Table`.

    A column is numeric iff every non-empty cell parses as a finite number;
    names listed in ``categorical`` are kept as text regardless (ZIP codes,
    provider ids).  Row order is preserved.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            handle = open(path, newline="", encoding=fmt.encoding)
        except OSError as exc:
            raise DataError(f"cannot read {path}: {exc}") from exc
        name = name or path.stem
    else:
        handle = source
        name = name or "table"
    with handle:
        reader = csv.reader(handle, delimiter=fmt.delimiter, quotechar=fmt.quotechar)
        try:
            records = list(reader)
        except csv.Error as exc:
            raise DataError(f"{name}: malformed delimited text: {exc}") from exc

    records = [r for r in records if r]
    if not records:
        raise DataError(f"{name}: file is empty")
    if fmt.header:
        header = [h.strip() for h in records[0]]
        body = records[1:]
        first_line = 2
    else:
        header = [f"col{i}" for i in range(len(records[0]))]
        body = records
        first_line = 1
    seen = set()
    for h in header:
        if h in seen:
            raise DataError(f"{name}: duplicate header name {h!r}")
        seen.add(h)
    for i, record in enumerate(body):
        if len(record) != len(header):
            raise DataError(
                f"{name}: ragged row {i + first_line}: expected {len(header)} fields, got {len(record)}"
            )
    force = set(categorical)
    raw_cols = list(zip(*body)) if body else [() for _ in header]
    columns = [_infer_column(h, list(raw), h in force) for h, raw in zip(header, raw_cols)]
    return Table(name, columns)


def dump_table(table: Table, fmt: CsvFormat = CsvFormat()) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=fmt.delimiter, quotechar=fmt.quotechar, lineterminator="\n")
    writer.writerow(table.names)
    formatters = [
        (lambda v: format_number(v)) if c.is_numeric else (lambda v: "" if v is None else v)
        for c in table.columns
    ]
    for row in table.rows():
        writer.writerow([f(v) for f, v in zip(formatters, row)])
    return buf.getvalue()


def write_table(table: Table, path: str | Path, fmt: CsvFormat = CsvFormat()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_table(table, fmt), encoding=fmt.encoding)
    return path


def table_fingerprint(table: Table) -> dict:
    """Row count, column names and a hash of the canonical serialization."""
    digest = hashlib.sha256(dump_table(table).encode("utf-8")).hexdigest()
    return {
        "row_count": table.row_count,
        "columns": table.names,
        "kinds": [c.kind for c in table.columns],
        "sha256": digest,
    }
