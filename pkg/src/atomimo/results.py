"""Machine-readable result files: flat CSV, JSON records, trace CSVs.

The CSV layout is one row per (record, metric) with the exact header
``experiment,sweep_value,trial,metric,value,seed``.  JSON is an array
of record objects carrying the same field names with the metrics kept
as a map.  All numbers are serialized with 17 significant digits so
binary64 values round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .experiments import TrialRecord

__all__ = [
    "CSV_COLUMNS",
    "render_results",
    "emit_results",
    "load_records",
    "render_trace_csv",
    "emit_trace_csv",
    "load_trace_csv",
]

CSV_COLUMNS = ("experiment", "sweep_value", "trial", "metric", "value", "seed")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def render_results(records, format: str = "csv") -> str:
    """Serialize records to a CSV or JSON string."""
    records = list(records)
    if not records:
        raise ValueError("no records to emit")
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            for metric in sorted(rec.metrics):
                writer.writerow([rec.experiment, _fmt(rec.sweep_value), rec.trial,
                                 metric, _fmt(rec.metrics[metric]), rec.seed])
        return buf.getvalue()
    if format == "json":
        items = []
        for rec in records:
            metrics = ", ".join(
                f"{json.dumps(k)}: {_fmt(v)}" for k, v in sorted(rec.metrics.items()))
            items.append(
                f'  {{"experiment": {json.dumps(rec.experiment)}, '
                f'"sweep_value": {_fmt(rec.sweep_value)}, '
                f'"trial": {rec.trial}, '
                f'"metrics": {{{metrics}}}, '
                f'"seed": {rec.seed}}}')
        return "[\n" + ",\n".join(items) + "\n]\n"
    raise ValueError(f"unknown format {format!r}")


def emit_results(records, format: str, path) -> None:
    """Write records to ``path``; refuses to create a file for no records."""
    text = render_results(records, format)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def load_records(path) -> list[TrialRecord]:
    """Read back records from a CSV or JSON result file."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("["):
        return [TrialRecord(experiment=doc["experiment"],
                            sweep_value=float(doc["sweep_value"]),
                            trial=int(doc["trial"]),
                            metrics={k: float(v) for k, v in doc["metrics"].items()},
                            seed=int(doc["seed"]))
                for doc in json.loads(text)]
    rows = list(csv.DictReader(io.StringIO(text)))
    grouped: dict[tuple, dict[str, float]] = {}
    for row in rows:
        key = (row["experiment"], float(row["sweep_value"]), int(row["trial"]),
               int(row["seed"]))
        grouped.setdefault(key, {})[row["metric"]] = float(row["value"])
    return [TrialRecord(experiment=k[0], sweep_value=k[1], trial=k[2],
                        metrics=metrics, seed=k[3])
            for k, metrics in grouped.items()]


def render_trace_csv(objectives) -> str:
    """Iteration-indexed objective trace as ``iteration,objective`` CSV."""
    lines = ["iteration,objective"]
    for i, obj in enumerate(np.asarray(objectives, dtype=float)):
        lines.append(f"{i},{_fmt(obj)}")
    return "\n".join(lines) + "\n"


def emit_trace_csv(objectives, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_trace_csv(objectives))


def load_trace_csv(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([float(r["objective"]) for r in rows])
