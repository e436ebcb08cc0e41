"""Structured experiment reports with deterministic JSON and CSV output.

A report holds named tables (lists of flat rows), measured constants and
assertions.  Every assertion stores its margin: positive means the
inequality holds with room to spare.

CSV layout: one file per table, ``<stem>.<table>.csv``, whose header is the
sorted union of the row keys; complex numbers are written as two columns
``<key>_re`` and ``<key>_im``.  A ``<stem>.assertions.csv`` file lists
``name, passed, margin, detail``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def _clean(x):
    """Turn numpy scalars, complex numbers and tuples into JSON-ready values."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": _clean(float(x.real)), "im": _clean(float(x.imag))}
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


@dataclass
class Assertion:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class Report:
    experiment: str
    inputs: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)
    truncated: bool = False
    wall_time: float | None = None

    # ------------------------------------------------------------ building

    def add_row(self, table: str, **row) -> None:
        self.tables.setdefault(table, []).append(row)

    def check(self, name: str, margin: float, detail: str = "") -> bool:
        """Record an assertion that holds iff ``margin >= 0``."""
        margin = float(margin)
        ok = bool(margin >= 0) and not math.isnan(margin)
        self.assertions.append(Assertion(name, ok, margin, detail))
        return ok

    def check_le(self, name: str, lhs: float, rhs: float, detail: str = "") -> bool:
        return self.check(name, rhs - lhs, detail or f"{lhs:.6g} <= {rhs:.6g}")

    def check_ge(self, name: str, lhs: float, rhs: float, detail: str = "") -> bool:
        return self.check(name, lhs - rhs, detail or f"{lhs:.6g} >= {rhs:.6g}")

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def assertion(self, name: str) -> Assertion:
        for a in self.assertions:
            if a.name == name:
                return a
        raise KeyError(name)

    def merge(self, other: "Report", prefix: str) -> None:
        """Fold another report in, namespacing its entries with ``prefix``."""
        for k, rows in other.tables.items():
            self.tables[f"{prefix}.{k}"] = rows
        for k, v in other.constants.items():
            self.constants[f"{prefix}.{k}"] = v
        for a in other.assertions:
            self.assertions.append(Assertion(f"{prefix}.{a.name}", a.passed, a.margin, a.detail))
        self.truncated = self.truncated or other.truncated

    # ------------------------------------------------------------ io

    def to_dict(self, include_timing: bool = True) -> dict:
        return _clean(
            {
                "experiment": self.experiment,
                "inputs": self.inputs,
                "tables": self.tables,
                "constants": self.constants,
                "assertions": [a.__dict__ for a in self.assertions],
                "passed": self.passed,
                "truncated": self.truncated,
                "wall_time": self.wall_time if include_timing else None,
            }
        )

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        return cls(
            experiment=d["experiment"],
            inputs=d.get("inputs", {}),
            tables=d.get("tables", {}),
            constants=d.get("constants", {}),
            assertions=[Assertion(**a) for a in d.get("assertions", [])],
            truncated=d.get("truncated", False),
            wall_time=d.get("wall_time"),
        )

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), sort_keys=True, indent=1) + "\n"

    def summary(self) -> str:
        lines = [f"[{'PASS' if self.passed else 'FAIL'}] {self.experiment}"]
        for a in self.assertions:
            lines.append(f"  {'ok  ' if a.passed else 'FAIL'} {a.name}: margin {a.margin:.4g}  {a.detail}")
        return "\n".join(lines)


def parse_report(text: str) -> Report:
    return Report.from_dict(json.loads(text))


def _flatten_row(row: dict) -> dict:
    out = {}
    for k, v in _clean(row).items():
        if isinstance(v, dict) and set(v) == {"re", "im"}:
            out[f"{k}_re"], out[f"{k}_im"] = v["re"], v["im"]
        elif isinstance(v, (list, dict)):
            out[k] = json.dumps(v, sort_keys=True)
        else:
            out[k] = v
    return out


def table_csv(rows: list) -> str:
    flat = [_flatten_row(r) for r in rows]
    keys = sorted({k for r in flat for k in r})
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in flat:
        w.writerow({k: r.get(k, "") for k in keys})
    return buf.getvalue()


def emit_report(report: Report, out: str | Path, formats=("json", "csv"), include_timing: bool = False) -> list[Path]:
    """Write ``<out>.json`` and/or the CSV tables; returns the written paths.

    Output is byte-for-byte deterministic for a given report unless
    ``include_timing`` adds the wall time.
    """
    out = Path(out)
    if out.suffix == ".json":
        out = out.with_suffix("")
    out.parent.mkdir(parents=True, exist_ok=True)
    paths = []
    unknown = set(formats) - {"json", "csv"}
    if unknown:
        raise ValueError(f"unknown report formats {sorted(unknown)}")
    if "json" in formats:
        p = out.with_name(out.name + ".json")
        p.write_text(report.to_json(include_timing))
        paths.append(p)
    if "csv" in formats:
        for name in sorted(report.tables):
            p = out.with_name(f"{out.name}.{name}.csv")
            p.write_text(table_csv(report.tables[name]))
            paths.append(p)
        p = out.with_name(f"{out.name}.assertions.csv")
        p.write_text(table_csv([a.__dict__ for a in report.assertions]))
        paths.append(p)
    return paths


__all__ = ["Assertion", "Report", "emit_report", "parse_report", "table_csv"]
