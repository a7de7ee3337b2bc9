"""Run-report aggregation and serialization: speedup comparisons, CSV/JSON
export, and the matching importers (exports must round-trip exactly)."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import MismatchedRuns, SchemaError
from .episodes import EventRecord, RunReport

REPORT_CSV_HEADER = ["index", "modality", "placement", "latency_s", "cumulative_s", "recommendation"]


@dataclass(frozen=True)
class Comparison:
    episode_id: str
    baseline_total_s: float
    emsserve_total_s: float
    speedup: float
    per_event_delta: tuple[float, ...]


def speedup(base: RunReport, ems: RunReport) -> Comparison:
    """Baseline-over-cached total ratio plus per-event cumulative deltas.

    Both reports must come from the same episode and configuration; only the
    serving mode may differ.
    """
    if base.mode != "baseline" or ems.mode != "emsserve":
        raise MismatchedRuns(f"expected baseline vs emsserve, got {base.mode} vs {ems.mode}")
    if base.episode_id != ems.episode_id:
        raise MismatchedRuns(f"different episodes: {base.episode_id} vs {ems.episode_id}")
    if base.config_fingerprint != ems.config_fingerprint:
        raise MismatchedRuns("reports come from different configurations")
    if len(base.per_event) != len(ems.per_event):
        raise MismatchedRuns("reports cover different event counts")
    if ems.total_s <= 0 or base.total_s <= 0:
        raise MismatchedRuns("totals must be positive to compare")
    deltas = tuple(
        b.cumulative_s - e.cumulative_s for b, e in zip(base.per_event, ems.per_event)
    )
    return Comparison(
        episode_id=base.episode_id,
        baseline_total_s=base.total_s,
        emsserve_total_s=ems.total_s,
        speedup=base.total_s / ems.total_s,
        per_event_delta=deltas,
    )


# --- JSON ---------------------------------------------------------------------


def report_to_json(report: RunReport) -> str:
    doc = {
        "schema": 1,
        "mode": report.mode,
        "episode_id": report.episode_id,
        "config_fingerprint": report.config_fingerprint,
        "total_s": report.total_s,
        "per_event": [
            {
                "index": r.index,
                "modality": r.modality,
                "placement": r.placement,
                "latency_s": r.latency_s,
                "cumulative_s": r.cumulative_s,
                "recommendation": r.recommendation,
            }
            for r in report.per_event
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def report_from_json(text: str) -> RunReport:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid report JSON: {exc}") from exc
    try:
        per_event = tuple(
            EventRecord(
                index=int(r["index"]),
                modality=r["modality"],
                placement=r["placement"],
                latency_s=float(r["latency_s"]),
                cumulative_s=float(r["cumulative_s"]),
                recommendation=r["recommendation"],
            )
            for r in doc["per_event"]
        )
        return RunReport(
            mode=doc["mode"],
            episode_id=doc["episode_id"],
            per_event=per_event,
            total_s=float(doc["total_s"]),
            config_fingerprint=doc["config_fingerprint"],
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"report JSON missing key: {exc}") from exc


def comparison_to_json(cmp: Comparison) -> str:
    doc = {
        "schema": 1,
        "episode_id": cmp.episode_id,
        "baseline_total_s": cmp.baseline_total_s,
        "emsserve_total_s": cmp.emsserve_total_s,
        "speedup": cmp.speedup,
        "per_event_delta": list(cmp.per_event_delta),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def comparison_from_json(text: str) -> Comparison:
    doc = json.loads(text)
    return Comparison(
        episode_id=doc["episode_id"],
        baseline_total_s=float(doc["baseline_total_s"]),
        emsserve_total_s=float(doc["emsserve_total_s"]),
        speedup=float(doc["speedup"]),
        per_event_delta=tuple(float(d) for d in doc["per_event_delta"]),
    )


# --- CSV ----------------------------------------------------------------------


def report_to_csv(report: RunReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(REPORT_CSV_HEADER)
    for r in report.per_event:
        writer.writerow(
            [
                r.index,
                r.modality,
                r.placement,
                repr(r.latency_s),
                repr(r.cumulative_s),
                "pending" if r.recommendation is None else r.recommendation,
            ]
        )
    return out.getvalue()


def events_from_csv(text: str) -> tuple[EventRecord, ...]:
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows or rows[0] != REPORT_CSV_HEADER:
        raise SchemaError(f"CSV header must be {','.join(REPORT_CSV_HEADER)}")
    records = []
    for row in rows[1:]:
        if not row:
            continue
        records.append(
            EventRecord(
                index=int(row[0]),
                modality=row[1],
                placement=row[2],
                latency_s=float(row[3]),
                cumulative_s=float(row[4]),
                recommendation=None if row[5] == "pending" else int(row[5]),
            )
        )
    return tuple(records)


def export(obj: RunReport | Comparison, fmt: str, path: str | Path) -> None:
    """Write a report or comparison as csv or json; importers round-trip."""
    if fmt not in ("csv", "json"):
        raise SchemaError(f"unknown export format {fmt!r}")
    if isinstance(obj, RunReport):
        text = report_to_csv(obj) if fmt == "csv" else report_to_json(obj)
    elif isinstance(obj, Comparison):
        if fmt == "csv":
            out = io.StringIO()
            writer = csv.writer(out)
            writer.writerow(["episode_id", "baseline_total_s", "emsserve_total_s", "speedup"])
            writer.writerow(
                [obj.episode_id, repr(obj.baseline_total_s), repr(obj.emsserve_total_s), repr(obj.speedup)]
            )
            text = out.getvalue()
        else:
            text = comparison_to_json(obj)
    else:
        raise SchemaError(f"cannot export object of type {type(obj).__name__}")
    Path(path).write_text(text)


def load_report(path: str | Path) -> RunReport:
    return report_from_json(Path(path).read_text())
