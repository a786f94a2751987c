"""Self-describing CSV and JSON tables.

CSV files start with ``# key = value`` metadata lines followed by a header
row. JSON files hold the same content under ``metadata``, ``columns`` and
``rows``. Floats are written with ``repr`` so they round-trip exactly, and
no timestamps are written, so identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

SCHEMA_VERSION = 1


@dataclass
class Table:
    columns: list[str]
    rows: list[list[Any]]
    metadata: list[tuple[str, str]] = field(default_factory=list)

    def column(self, name: str) -> list[Any]:
        k = self.columns.index(name)
        return [row[k] for row in self.rows]


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) or hasattr(value, "dtype"):
        return repr(float(value))
    return str(value)


def _json_cell(value: Any) -> Any:
    if value is None or isinstance(value, (bool, int, str)):
        return value
    x = float(value)
    return x if math.isfinite(x) else repr(x)


def to_csv(table: Table) -> str:
    buf = io.StringIO()
    buf.write(f"# schema_version = {SCHEMA_VERSION}\n")
    for key, value in table.metadata:
        buf.write(f"# {key} = {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def to_json(table: Table) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "metadata": {k: v for k, v in table.metadata},
        "columns": list(table.columns),
        "rows": [[_json_cell(v) for v in row] for row in table.rows],
    }
    return json.dumps(doc, indent=1) + "\n"


def render(table: Table, fmt: str = "csv") -> str:
    if fmt == "csv":
        return to_csv(table)
    if fmt == "json":
        return to_json(table)
    raise ValueError(f"unknown output format {fmt!r}")


def write(table: Table, path: str | Path, fmt: str = "csv") -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render(table, fmt))
    return path


def _parse_cell(text: str) -> Any:
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_csv(text: str) -> Table:
    """Inverse of :func:`to_csv`; numeric cells come back as int or float."""
    lines = text.splitlines()
    meta: list[tuple[str, str]] = []
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        key, _, value = lines[k][1:].partition("=")
        meta.append((key.strip(), value.strip()))
        k += 1
    reader = csv.reader(lines[k:])
    columns = next(reader)
    rows = [[_parse_cell(c) for c in row] for row in reader]
    return Table(columns, rows, [m for m in meta if m[0] != "schema_version"])


def parse_json(text: str) -> Table:
    doc = json.loads(text)
    return Table(doc["columns"], doc["rows"], list(doc["metadata"].items()))


def read(path: str | Path) -> Table:
    text = Path(path).read_text(encoding="utf-8")
    return parse_json(text) if text.lstrip().startswith("{") else parse_csv(text)


def sibling(path: str | Path, suffix: str, fmt: str = "csv") -> Path:
    """``out/report.csv`` -> ``out/report_<suffix>.csv``."""
    path = Path(path)
    return path.with_name(f"{path.stem}_{suffix}.{fmt}")


def series_table(columns: Sequence[str], arrays: Sequence[Sequence[float]],
                 metadata: list[tuple[str, str]] | None = None) -> Table:
    rows = [list(r) for r in zip(*arrays)]
    return Table(list(columns), rows, list(metadata or []))
