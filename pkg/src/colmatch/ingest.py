"""Load CSV-backed databases and profile their columns.

A database is a directory of ``<table>.csv`` files (UTF-8, RFC-4180, first
row is the header). An empty cell or a literal ``NULL`` (any case) is a
null. Columns are identified by name: a column that appears in several
tables of the same database is treated as one column whose values are
pooled across those tables.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from datetime import date, datetime
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator


class IngestError(Exception):
    """Raised for malformed database layouts or unknown columns."""


class DataType(str, Enum):
    INTEGER = "integer"
    FLOAT = "float"
    TIMESTAMP = "timestamp"
    TEXT = "text"
    MIXED = "mixed"


@dataclass(frozen=True)
class TableDescriptor:
    """A table's name and header-derived column names, in header order."""

    name: str
    columns: tuple[str, ...]


@dataclass(frozen=True)
class DatabaseHandle:
    """An immutable view of a loaded database; safe to share read-only."""

    name: str
    root: Path
    tables: tuple[TableDescriptor, ...]

    def column_names(self) -> list[str]:
        names: set[str] = set()
        for table in self.tables:
            names.update(table.columns)
        return sorted(names)

    def tables_for(self, column_name: str) -> tuple[str, ...]:
        """Sorted names of the tables containing `column_name`."""
        return tuple(
            table.name for table in self.tables if column_name in table.columns
        )


@dataclass(frozen=True)
class ColumnRef:
    """Identity of a column: database, name, and its containing tables."""

    database: str
    column_name: str
    tables: tuple[str, ...]

    def key(self) -> str:
        return f"{self.database}__{self.column_name}"

    def sort_key(self) -> tuple[str, str]:
        return (self.database, self.column_name)


@dataclass(frozen=True)
class ColumnProfile:
    ref: ColumnRef
    dtype: DataType
    unique_values: tuple[str, ...]
    total_count: int
    null_count: int


_INT_RE = re.compile(r"^[+-]?[0-9]+$")
_FLOAT_RE = re.compile(r"^[+-]?([0-9]+\.?[0-9]*|\.[0-9]+)([eE][+-]?[0-9]+)?$")


def is_null(cell: str) -> bool:
    stripped = cell.strip()
    return stripped == "" or stripped.upper() == "NULL"


def _parses_as_timestamp(value: str) -> bool:
    candidate = value[:-1] + "+00:00" if value.endswith("Z") else value
    try:
        datetime.fromisoformat(candidate)
    except ValueError:
        return False
    return True


def infer_dtype(values: Iterable[str]) -> DataType:
    """Classify a pooled set of text values.

    All integers -> integer; all numbers -> float; all ISO-8601 -> timestamp;
    a mix of numeric and non-numeric -> mixed; anything else -> text.
    """
    vals = list(values)
    if not vals:
        return DataType.TEXT
    if all(_INT_RE.match(v) for v in vals):
        return DataType.INTEGER
    numeric = [bool(_FLOAT_RE.match(v)) for v in vals]
    if all(numeric):
        return DataType.FLOAT
    if all(_parses_as_timestamp(v) for v in vals):
        return DataType.TIMESTAMP
    if any(numeric):
        return DataType.MIXED
    return DataType.TEXT


def cast_value_to_text(raw: object) -> str:
    """Render a non-null cell value as canonical text.

    Integers use their base-10 form (no plus sign, no leading zeros),
    floats the shortest representation that round-trips, timestamps
    ISO-8601; text is passed through with surrounding whitespace trimmed.
    """
    if raw is None:
        raise ValueError("cast_value_to_text called with a null value")
    if isinstance(raw, str):
        return raw.strip()
    if isinstance(raw, bool):
        return str(raw).lower()
    if isinstance(raw, int):
        return str(raw)
    if isinstance(raw, float):
        return repr(raw)
    if isinstance(raw, (datetime, date)):
        return raw.isoformat()
    return str(raw).strip()


def load_database(root: Path | str, name: str) -> DatabaseHandle:
    """Scan `root` for table CSVs and read their headers.

    No cell values are read; profiling happens lazily per column.
    """
    root = Path(root)
    if not root.is_dir():
        raise IngestError(f"database root not found: {root}")
    files = sorted(
        (p for p in root.iterdir() if p.is_file() and p.suffix.lower() == ".csv"),
        key=lambda p: p.stem,
    )
    if not files:
        raise IngestError(f"no table files (*.csv) in {root}")

    tables = []
    seen: set[str] = set()
    for path in files:
        table_name = path.stem
        if table_name in seen:
            raise IngestError(f"duplicate table name: {table_name}")
        seen.add(table_name)
        tables.append(TableDescriptor(name=table_name, columns=_read_header(path)))
    return DatabaseHandle(name=name, root=root, tables=tuple(tables))


def _read_header(path: Path) -> tuple[str, ...]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"malformed header in {path.name}: file is empty") from None
    columns = tuple(cell.strip() for cell in header)
    if not columns or any(not c for c in columns):
        raise IngestError(f"malformed header in {path.name}: empty column name")
    if len(set(columns)) != len(columns):
        raise IngestError(f"malformed header in {path.name}: duplicate column name")
    return columns


def _iter_cells(db: DatabaseHandle, table: TableDescriptor, column_name: str) -> Iterator[str]:
    index = table.columns.index(column_name)
    path = db.root / f"{table.name}.csv"
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)  # header
        for row in reader:
            yield row[index] if index < len(row) else ""


def profile_column(db: DatabaseHandle, column_name: str) -> ColumnProfile:
    """Pool a column's cells across all tables sharing its name.

    Nulls are skipped and counted; surviving values are cast to text and
    deduplicated in first-seen order. Tables are visited in name order so
    the profile is stable across runs.
    """
    containing = db.tables_for(column_name)
    if not containing:
        raise IngestError(f"unknown column: {column_name} in database {db.name}")

    unique: dict[str, None] = {}
    total = 0
    nulls = 0
    for table in db.tables:
        if column_name not in table.columns:
            continue
        for cell in _iter_cells(db, table, column_name):
            total += 1
            if is_null(cell):
                nulls += 1
                continue
            unique.setdefault(cast_value_to_text(cell))

    values = tuple(unique)
    return ColumnProfile(
        ref=ColumnRef(database=db.name, column_name=column_name, tables=containing),
        dtype=infer_dtype(values),
        unique_values=values,
        total_count=total,
        null_count=nulls,
    )


def list_column_refs(db: DatabaseHandle) -> list[ColumnRef]:
    """One ref per distinct column name, sorted by column name."""
    return [
        ColumnRef(database=db.name, column_name=name, tables=db.tables_for(name))
        for name in db.column_names()
    ]


def profile_database(db: DatabaseHandle) -> list[ColumnProfile]:
    """Profile every distinct column of `db`, in column-name order."""
    return [profile_column(db, ref.column_name) for ref in list_column_refs(db)]
