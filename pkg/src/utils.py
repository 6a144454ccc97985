"""
Utility functions module.

This module provides the CSV and JSON writers behind every command-line
artifact, plus small formatting helpers for reports.
"""

import csv
import json
import logging
import math
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence

import numpy as np

from src.fields import RadialField
from src.models import CheckResult, ScanTable, SolveReport

logger = logging.getLogger(__name__)

REPORT_VERSION = 1


def _format_number(value: Any) -> str:
    """Full-precision decimal text; inf and nan spelled out."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def _jsonable(value: Any) -> Any:
    """Recursively convert numpy values and non-finite floats into JSON-safe objects."""
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isfinite(value):
            return value
        return _format_number(value)
    return value


def write_csv(
    rows: Iterable[Sequence[Any]], header: Sequence[str], file_path: Path
) -> Optional[Path]:
    """
    Write rows as comma-separated text with a header and LF line endings.

    Args:
        rows: Row values in column order
        header: Column names
        file_path: Destination file

    Returns:
        Optional[Path]: Path to the written file, or None if the write failed
    """
    try:
        file_path = Path(file_path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        count = 0
        with open(file_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_format_number(value) for value in row])
                count += 1
        logger.debug(f"Wrote {count} rows to {file_path}")
        return file_path

    except OSError as e:
        logger.error(f"Error writing CSV {file_path}: {e}")
        return None


def write_field_csv(field: RadialField, file_path: Path) -> Optional[Path]:
    """Snapshot of a density or potential as (r, value) rows."""
    rows = zip(field.grid.nodes.tolist(), field.values.tolist())
    return write_csv(rows, ("r", "value"), file_path)


def save_json_report(
    payload: dict, file_path: Path, timestamp: Optional[str] = None
) -> Optional[Path]:
    """
    Save a report as JSON with sorted keys, a version field and a timestamp.

    The timestamp is the only field that differs between identical runs.

    Returns:
        Optional[Path]: Path to the saved file, or None if save failed
    """
    try:
        file_path = Path(file_path)
        file_path.parent.mkdir(parents=True, exist_ok=True)

        document = _jsonable(payload)
        document["spec_version"] = REPORT_VERSION
        document["timestamp"] = timestamp or datetime.now().isoformat(timespec="seconds")

        with open(file_path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(document, f, indent=2, sort_keys=True, ensure_ascii=False)
            f.write("\n")

        logger.info(f"Saved report to {file_path}")
        return file_path

    except (OSError, TypeError, ValueError) as e:
        logger.error(f"Error saving report to JSON: {e}")
        return None


def solve_report_payload(report: SolveReport) -> dict:
    """Scalars and residual history of a solve (the density goes to CSV)."""
    return {
        "converged": report.converged,
        "iterations": report.iterations,
        "anderson_steps": report.anderson_steps,
        "pressure": report.pressure,
        "residual": report.residual,
        "tolerance": report.tolerance,
        "residual_history": list(report.residual_history),
        "hartree": report.hartree,
        "particle_number": report.particle_number,
        "functional_terms": dict(report.functional_terms),
    }


def scan_rows(table: ScanTable) -> List[List[Any]]:
    """Convergence CSV rows: members in schedule order, then the limit row."""
    rows = [
        [row.beta, row.pressure, row.limit_pressure, row.rel_gap, row.converged, row.error or ""]
        for row in table.rows
    ]
    limit_gap = 0.0 if table.limit_converged else None
    limit_error = "" if table.limit_converged else "limit branch not converged"
    rows.append(
        [table.limit_beta, table.limit_pressure, table.limit_pressure, limit_gap, table.limit_converged, limit_error]
    )
    return rows


def format_check_table(results: Sequence[CheckResult]) -> str:
    """
    Format self-test results as a human-readable pass/fail table.
    """
    width = max([len(result.name) for result in results] + [10])
    lines = ["=" * 70, "SELF-TEST RESULTS", "=" * 70]
    for result in results:
        mark = "✓" if result.passed else "❌"
        lines.append(
            f"{mark} {result.name:<{width}}  {result.module:<8} "
            f"measured={result.measured:.3e}  tol={result.tolerance:.3e}"
        )
        if result.error:
            lines.append(f"    error: {result.error}")
    passed = sum(1 for result in results if result.passed)
    lines.append("=" * 70)
    lines.append(f"{passed}/{len(results)} checks passed")
    return "\n".join(lines)
