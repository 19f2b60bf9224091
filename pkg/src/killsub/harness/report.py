"""Checks, run reports and deterministic JSON / CSV emission."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from .statements import statement_for


@dataclass
class Check:
    """One named pass/fail verdict with its numeric evidence.

    ``relation`` reads ``value <relation> threshold`` (``"<="``, ``">="``,
    ``">"``, ``"=="`` for exact categorical agreement).
    """

    name: str
    passed: bool
    value: float | str | None = None
    threshold: float | str | None = None
    relation: str = "<="
    detail: dict = field(default_factory=dict)
    expected_failure: bool = False

    @property
    def statement(self) -> str:
        return statement_for(self.name)

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "value": self.value,
                "threshold": self.threshold, "relation": self.relation,
                "statement": self.statement, "expected_failure": self.expected_failure,
                "detail": self.detail}


def compare(name: str, value: float, threshold: float, relation: str = "<=", **detail) -> Check:
    value = float(value)
    if relation == "<=":
        ok = value <= threshold
    elif relation == ">=":
        ok = value >= threshold
    elif relation == ">":
        ok = value > threshold
    elif relation == "<":
        ok = value < threshold
    else:
        raise ValueError(f"unknown relation {relation!r}")
    ok = bool(ok and math.isfinite(value))
    return Check(name, ok, value, float(threshold), relation, detail)


def equals(name: str, value, expected, **detail) -> Check:
    return Check(name, value == expected, value, expected, "==", detail)


@dataclass
class Table:
    """A CSV artifact: header plus rows of scalars."""

    name: str
    header: list
    rows: list = field(default_factory=list)

    def add(self, *row) -> None:
        if len(row) != len(self.header):
            raise ValueError(f"table {self.name}: row has {len(row)} fields, header {len(self.header)}")
        self.rows.append(list(row))


@dataclass
class RunReport:
    scenario: str
    command: str
    model: str
    surface: str | None
    seed: int
    checks: list = field(default_factory=list)
    evidence: dict = field(default_factory=dict)
    tables: list = field(default_factory=list)
    error: str | None = None
    wall_clock: float = 0.0
    config_hash: str = ""
    version: str = __version__

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {"scenario": self.scenario, "command": self.command, "model": self.model,
                "surface": self.surface, "seed": self.seed, "passed": self.passed,
                "checks": [c.as_dict() for c in self.checks], "evidence": self.evidence,
                "artifacts": [t.name for t in self.tables], "error": self.error,
                "wall_clock": self.wall_clock, "config_hash": self.config_hash,
                "version": self.version}


# ---------------------------------------------------------------------------
# serialisation


def plain(obj):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if hasattr(obj, "value") and hasattr(obj, "name") and not isinstance(obj, (str, int)):
        return obj.value  # enums
    return obj


def dumps_json(obj) -> str:
    return json.dumps(plain(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".12g")
    return str(value)


def table_csv(table: Table) -> str:
    """RFC-4180 text: CRLF line ends, minimal quoting, '.' decimal separator."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(table.header)
    for row in table.rows:
        w.writerow([format_cell(v) for v in row])
    return buf.getvalue()


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def write_report(report: RunReport, out_dir, *, json_name: str | None = None,
                 csv_prefix: str | None = None) -> list:
    """Write ``<scenario>.json`` and one CSV per table; returns the written paths."""
    out_dir = Path(out_dir)
    written = []
    jp = out_dir / (json_name or f"{report.scenario}.json")
    write_text(jp, dumps_json(report.as_dict()))
    written.append(jp)
    prefix = csv_prefix or report.scenario
    for t in report.tables:
        cp = out_dir / f"{prefix}__{t.name}.csv"
        write_text(cp, table_csv(t))
        written.append(cp)
    return written
