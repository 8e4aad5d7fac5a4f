"""TraceSet export and import in the analyzer's CSV and JSON formats."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import numpy as np

from quadrature.grid import FrequencyGrid

from .sweep import TRACE_NAMES, TraceSet

CSV_COLUMNS = ("frequency_hz", "var_xsum_db", "var_ydiff_db", "duan", "tms_db", "reid_product")


def format_number(value: float) -> str:
    """Locale-independent, round-trippable formatting."""
    return format(float(value), ".17g")


def _json_number(value: float) -> Optional[float]:
    return float(value) if math.isfinite(value) else None


def traces_to_csv(traces: TraceSet) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for index, frequency in enumerate(traces.grid.points):
        row = [format_number(frequency)]
        row.extend(format_number(traces[name][index]) for name in CSV_COLUMNS[1:])
        writer.writerow(row)
    return buffer.getvalue()


def traces_to_json(traces: TraceSet, experiment_config: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    """JSON-serializable mirror of the trace set; non-finite values become null."""
    document: Dict[str, Any] = {
        "frequency_hz": traces.grid.to_list(),
        "traces": {name: [_json_number(v) for v in traces[name]] for name in TRACE_NAMES},
    }
    if experiment_config is not None:
        document["config"] = dict(experiment_config)
    return document


def read_traces_csv(path: Path) -> TraceSet:
    """Load a trace CSV written by :func:`traces_to_csv`."""
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))
    if not rows:
        raise ValueError(f"No data rows in {path}")
    columns: Dict[str, List[float]] = {name: [] for name in CSV_COLUMNS}
    for line, row in enumerate(rows, start=2):
        for name in CSV_COLUMNS:
            try:
                columns[name].append(float(row[name]))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{line}: invalid or missing column {name!r}") from exc
    grid = FrequencyGrid.from_points(columns["frequency_hz"])
    size = len(grid)
    traces = {name: np.asarray(columns[name]) for name in CSV_COLUMNS[1:]}
    traces["vacuum_db"] = np.zeros(size)
    traces["dark_db"] = np.full(size, np.nan)
    return TraceSet(grid, traces)
