"""CSV / JSON table output with a fixed column order and round-trip floats."""
from __future__ import annotations

import csv
import io
import json
from typing import Sequence


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _clean(value):
    # numpy scalars -> plain Python so json and repr behave
    if hasattr(value, "item"):
        return value.item()
    return value


def to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(columns)
    for row in rows:
        out.writerow([_cell(_clean(row.get(c))) for c in columns])
    return buf.getvalue()


def to_json(rows: Sequence[dict], columns: Sequence[str], meta: dict | None = None) -> str:
    doc = {
        "meta": meta or {},
        "columns": list(columns),
        "rows": [{c: _clean(row.get(c)) for c in columns} for row in rows],
    }
    return json.dumps(doc, indent=2) + "\n"


def parse_cell(text: str):
    if text == "":
        return None
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def from_csv(text: str) -> tuple[list[str], list[dict]]:
    reader = csv.reader(io.StringIO(text))
    columns = next(reader)
    return columns, [dict(zip(columns, map(parse_cell, row))) for row in reader]


def render(rows: Sequence[dict], columns: Sequence[str], fmt: str, meta: dict | None = None) -> str:
    if fmt == "csv":
        return to_csv(rows, columns)
    if fmt == "json":
        return to_json(rows, columns, meta)
    raise ValueError(f"unknown format {fmt!r}")
