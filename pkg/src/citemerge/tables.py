"""Flat CSV tables: the on-disk format of every stage artifact."""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Iterable, Sequence
from pathlib import Path


def fmt(value: object) -> str:
    """Stable text form: shortest round-trip repr for floats, '' for missing."""
    if value is None:
        return ""
    if isinstance(value, float):
        # float() drops numpy's repr wrapper
        return "" if math.isnan(value) else repr(float(value))
    return str(value)


def write_table(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
            n += 1
    return n


def write_int_columns(path: str | Path, header: Sequence[str], *columns) -> None:
    """Fast path for large all-integer tables (edge lists)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(zip(*(c.tolist() if hasattr(c, "tolist") else c for c in columns)))


def read_table(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, list(r)


def read_dicts(path: str | Path) -> list[dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path: str | Path, payload: object) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
