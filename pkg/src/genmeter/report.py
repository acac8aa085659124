"""Named metric results and their CSV serialization."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

REPORT_COLUMNS = ("metric_name", "value", "params", "seed")


def format_value(v) -> str:
    """Shortest round-trip text for floats; stable across runs."""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def format_params(params: dict) -> str:
    return ";".join(f"{k}={format_value(v)}" for k, v in params.items())


@dataclass
class MetricReport:
    rows: list = field(default_factory=list)

    def add(self, name: str, value, params: dict | None = None, seed=None):
        self.rows.append((name, float(value), format_params(params or {}), "" if seed is None else seed))

    def __getitem__(self, name):
        for row in self.rows:
            if row[0] == name:
                return row[1]
        raise KeyError(name)

    def names(self):
        return [r[0] for r in self.rows]

    def to_csv(self) -> str:
        return rows_to_csv(REPORT_COLUMNS, self.rows)


def rows_to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row {row!r} does not match columns {columns}")
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()
