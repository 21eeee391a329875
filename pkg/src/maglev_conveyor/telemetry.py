"""Run records, run summaries and rolling z-score anomaly flags."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

CSV_HEADER = ("t", "mover", "position", "velocity", "gap", "lev_current", "drive_iq", "event")


@dataclass(frozen=True)
class TelemetryRecord:
    t: float
    mover: str
    position: float
    velocity: float
    gap: float
    lev_current: float
    drive_iq: float
    event: str = ""


@dataclass
class RunSummary:
    jobs_completed: int = 0
    throughput: float = 0.0
    distance_per_mover: dict[str, float] = field(default_factory=dict)
    energy_proxy: float = 0.0
    headway_interventions: int = 0

    def to_json(self) -> dict:
        return asdict(self)


def zscore_anomalies(series: Sequence[float], window: int, threshold: float) -> list[int]:
    """Indices whose value lies more than ``threshold`` standard deviations
    from the mean of the ``window`` values before it.

    Population standard deviation is used. A window with zero spread treats
    any non-zero deviation as infinitely many sigmas, so it is flagged for
    every finite threshold. The first ``window`` points are never flagged.
    """
    if window < 2:
        raise ValueError("window must be at least 2")
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    x = np.asarray(series, dtype=float)
    if len(x) <= window:
        return []
    windows = np.lib.stride_tricks.sliding_window_view(x[:-1], window)
    current = x[window:]
    mean = windows.mean(axis=1)
    std = windows.std(axis=1)
    flat = windows.min(axis=1) == windows.max(axis=1)
    mean[flat] = windows[flat, 0]
    std[flat] = 0.0
    dev = np.abs(current - mean)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(std > 0, dev / np.where(std > 0, std, 1.0), np.where(dev > 0, np.inf, 0.0))
    return [int(i) + window for i in np.flatnonzero(z > threshold)]


def _kind(event) -> str:
    return event["kind"] if isinstance(event, dict) else event.kind


def summarize(
    records: Sequence[TelemetryRecord], events: Iterable = (), duration: float | None = None
) -> RunSummary:
    """Aggregate a run.

    Distance is the summed absolute position change per mover; the energy
    proxy integrates lev_current^2 + drive_iq^2 with the left rectangle rule
    at the record cadence. ``duration`` defaults to the span of record times.
    """
    events = list(events)
    jobs = sum(1 for e in events if _kind(e) == "completion")
    headway = sum(1 for e in events if _kind(e) == "headway")
    streams: dict[str, list[TelemetryRecord]] = {}
    for r in records:
        streams.setdefault(r.mover, []).append(r)
    distance = {}
    energy = 0.0
    for mover in sorted(streams):
        rows = streams[mover]
        d = 0.0
        for prev, cur in zip(rows, rows[1:]):
            d += abs(cur.position - prev.position)
            energy += (prev.lev_current**2 + prev.drive_iq**2) * (cur.t - prev.t)
        distance[mover] = d
    if duration is None:
        duration = (max(r.t for r in records) - min(r.t for r in records)) if records else 0.0
    throughput = jobs / duration if duration > 0 else 0.0
    return RunSummary(jobs, throughput, distance, energy, headway)


def _fmt(value) -> str:
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError("telemetry values must be finite")
        return repr(value)
    return str(value)


def trajectory_csv(records: Iterable[TelemetryRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])
    return buf.getvalue()


def read_trajectory_csv(text: str) -> list[TelemetryRecord]:
    rows = csv.DictReader(io.StringIO(text))
    if tuple(rows.fieldnames or ()) != CSV_HEADER:
        raise ValueError(f"unexpected header {rows.fieldnames}")
    out = []
    for row in rows:
        out.append(
            TelemetryRecord(
                float(row["t"]), row["mover"], float(row["position"]), float(row["velocity"]),
                float(row["gap"]), float(row["lev_current"]), float(row["drive_iq"]), row["event"],
            )
        )
    return out


def dumps(obj) -> str:
    """Stable JSON text (fixed key order, trailing newline)."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
