"""
Reporting Module

Writers for the trace CSV and the JSON reports. Numbers in the CSV carry 17
significant digits, so a trace written twice from the same seed is byte-identical.

Dependencies:
    - csv for the trace file
    - config_loader.canonical_json for the reports
    - Logging for written files
"""
import csv
import json
import logging
from pathlib import Path

from pydantic import BaseModel

from config import CSV_SIGNIFICANT_DIGITS, TRACE_CSV_HEADER
from app.config_loader import canonical_json
from models.models import Trace


def _fmt(value: float) -> str:
    return f"{value:.{CSV_SIGNIFICANT_DIGITS}g}"


def trace_rows(trace: Trace):
    """Yield one CSV row per (step, node), offsets taken against the reference node."""
    offsets = trace.offset_to_leader
    for k in range(trace.steps):
        for idx, node in enumerate(trace.node_ids):
            yield [k, _fmt(trace.times[k]), node, _fmt(offsets[k, idx]), _fmt(trace.s[k, idx]), _fmt(trace.y[k, idx])]


def write_trace_csv(trace: Trace, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TRACE_CSV_HEADER)
        writer.writerows(trace_rows(trace))
    logging.info(f"Wrote trace {path} ({trace.steps} steps)")
    return path


def write_report(report: BaseModel, path: str | Path) -> Path:
    """Write a report model as canonical JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(report), encoding="utf-8")
    logging.info(f"Wrote report {path}")
    return path


def write_schemas(schemas: dict[str, type[BaseModel]], out_dir: str | Path) -> list[Path]:
    """Write the JSON schema of each model as <name>.schema.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, model in schemas.items():
        path = out_dir / f"{name}.schema.json"
        path.write_text(json.dumps(model.model_json_schema(by_alias=True), sort_keys=True, indent=2) + "\n",
                        encoding="utf-8")
        written.append(path)
    logging.info(f"Wrote {len(written)} schemas to {out_dir}")
    return written
