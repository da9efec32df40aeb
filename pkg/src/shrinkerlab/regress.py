"""Numeric diff of an experiment output directory against a golden copy."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SchemaMismatch


@dataclass
class Difference:
    file: str
    key: str  # "row:column" for CSV, dotted path for JSON
    run: str
    golden: str
    error: float  # abs diff scaled by max(1, |golden|); inf for non-numeric mismatches
    tol: float

    @property
    def exceeds(self) -> bool:
        return self.error > self.tol


@dataclass
class RegressionReport:
    differences: list = field(default_factory=list)

    @property
    def failures(self) -> list:
        return [d for d in self.differences if d.exceeds]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def worst(self) -> Difference | None:
        return max(self.differences, key=lambda d: d.error / d.tol if d.tol else d.error, default=None)

    def summary(self) -> str:
        if not self.differences:
            return "identical"
        w = self.worst
        state = "PASS" if self.passed else "FAIL"
        return (f"{state}: {len(self.failures)} of {len(self.differences)} differing values exceed tolerance; "
                f"largest offender {w.file} [{w.key}] run={w.run} golden={w.golden} error={w.error:.3g} tol={w.tol:.3g}")


def _files(root: Path) -> set:
    return {str(p.relative_to(root)) for p in root.rglob("*") if p.is_file()}


def _as_float(text):
    try:
        return float(text)
    except (TypeError, ValueError):
        return None


def _compare_value(report, file, key, a, b, tol):
    if a == b:
        return
    fa, fb = _as_float(a), _as_float(b)
    if fa is None or fb is None:
        report.differences.append(Difference(file, key, str(a), str(b), float("inf"), tol))
        return
    err = abs(fa - fb) / max(1.0, abs(fb))
    report.differences.append(Difference(file, key, str(a), str(b), err, tol))


def _tol_for(column: str, tolerances: dict, default: float) -> float:
    return float(tolerances.get(column, default))


def _compare_csv(report, rel, run_path, gold_path, tolerances, default):
    with open(run_path, newline="") as fh:
        run_rows = list(csv.reader(fh))
    with open(gold_path, newline="") as fh:
        gold_rows = list(csv.reader(fh))
    comment = lambda rows: [r for r in rows if r and r[0].startswith("#")]
    if comment(run_rows) != comment(gold_rows):
        raise SchemaMismatch(f"{rel}: header comment lines differ")
    run_rows = [r for r in run_rows if r and not r[0].startswith("#")]
    gold_rows = [r for r in gold_rows if r and not r[0].startswith("#")]
    if len(run_rows) != len(gold_rows):
        raise SchemaMismatch(f"{rel}: {len(run_rows)} rows in run, {len(gold_rows)} in golden")
    header = gold_rows[0] if gold_rows and all(_as_float(c) is None for c in gold_rows[0]) else None
    if header is not None and run_rows[0] != header:
        raise SchemaMismatch(f"{rel}: columns {run_rows[0]} != golden {header}")
    start = 1 if header is not None else 0
    for i, (ra, rb) in enumerate(zip(run_rows[start:], gold_rows[start:])):
        if len(ra) != len(rb):
            raise SchemaMismatch(f"{rel}: row {i} has {len(ra)} cells in run, {len(rb)} in golden")
        for j, (a, b) in enumerate(zip(ra, rb)):
            col = header[j] if header is not None else str(j)
            _compare_value(report, rel, f"{i}:{col}", a, b, _tol_for(col, tolerances, default))


def _walk_json(report, rel, a, b, path, tolerances, default):
    if isinstance(b, dict):
        if not isinstance(a, dict) or set(a) != set(b):
            raise SchemaMismatch(f"{rel}: keys differ at '{path or '.'}'")
        for k in b:
            _walk_json(report, rel, a[k], b[k], f"{path}.{k}" if path else k, tolerances, default)
    elif isinstance(b, list):
        if not isinstance(a, list) or len(a) != len(b):
            raise SchemaMismatch(f"{rel}: list length differs at '{path}'")
        for i, (x, y) in enumerate(zip(a, b)):
            _walk_json(report, rel, x, y, f"{path}[{i}]", tolerances, default)
    else:
        leaf = path.rsplit(".", 1)[-1].split("[")[0]
        _compare_value(report, rel, path, a, b, _tol_for(leaf, tolerances, default))


def regression_compare(run_dir, golden_dir, tolerances: dict | None = None, default_tol: float = 1e-4) -> RegressionReport:
    """Compare every file under ``run_dir`` with its counterpart in ``golden_dir``.

    ``tolerances`` maps CSV column or JSON key names to relative tolerances;
    anything else uses ``default_tol``.  Differences in file layout, columns
    or row counts raise SchemaMismatch.
    """
    run_dir, golden_dir = Path(run_dir), Path(golden_dir)
    tolerances = tolerances or {}
    for d in (run_dir, golden_dir):
        if not d.is_dir():
            raise SchemaMismatch(f"{d} is not a directory")
    run_files, gold_files = _files(run_dir), _files(golden_dir)
    if run_files != gold_files:
        missing = sorted(gold_files - run_files)
        extra = sorted(run_files - gold_files)
        raise SchemaMismatch(f"file sets differ; missing from run: {missing}; unexpected in run: {extra}")
    report = RegressionReport()
    for rel in sorted(gold_files):
        a, b = run_dir / rel, golden_dir / rel
        if rel.endswith(".json"):
            _walk_json(report, rel, json.loads(a.read_text()), json.loads(b.read_text()), "", tolerances, default_tol)
        elif rel.endswith(".csv"):
            _compare_csv(report, rel, a, b, tolerances, default_tol)
        elif a.read_bytes() != b.read_bytes():
            report.differences.append(Difference(rel, "<bytes>", "", "", float("inf"), default_tol))
    return report
