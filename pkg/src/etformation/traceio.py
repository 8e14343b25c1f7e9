"""CSV serialization of traces and trigger logs.

Values are written with 12 significant digits by default; the environment
variable ETFORMATION_PRECISION overrides the digit count. Headers are
mandatory and agent/edge labels are 1-based, matching the scenario files.
"""

from __future__ import annotations

import csv
import os
from pathlib import Path

import numpy as np

from .engine import ScenarioConfig, Trace
from .errors import ValidationError
from .triggering import TriggerRecord

PRECISION_ENV = "ETFORMATION_PRECISION"
DEFAULT_PRECISION = 12


def output_precision() -> int:
    raw = os.environ.get(PRECISION_ENV)
    if raw is None:
        return DEFAULT_PRECISION
    try:
        digits = int(raw)
    except ValueError:
        raise ValidationError(f"{PRECISION_ENV}={raw!r} is not an integer") from None
    if not 3 <= digits <= 17:
        raise ValidationError(f"{PRECISION_ENV} must lie in [3, 17], got {digits}")
    return digits


def _fmt(value: float, digits: int) -> str:
    return format(float(value), f".{digits}g")


def trace_header(n: int, p: int, edges, mode: str) -> list[str]:
    cols = ["t"]
    cols += [f"x{i + 1}_{k + 1}" for i in range(n) for k in range(p)]
    if mode == "double":
        cols += [f"q{i + 1}_{k + 1}" for i in range(n) for k in range(p)]
    cols += [f"dist_{i + 1}_{j + 1}" for i, j in edges]
    return cols


def triggers_header(p: int, mode: str) -> list[str]:
    cols = ["agent", "t"] + [f"u_{k + 1}" for k in range(p)]
    if mode == "double":
        cols += [f"q_{k + 1}" for k in range(p)]
    cols += ["err_norm"]
    return cols


def write_trace_csv(path, trace: Trace, edges, mode: str) -> None:
    digits = output_precision()
    n, p = trace.x.shape[1], trace.x.shape[2]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trace_header(n, p, edges, mode))
        for s in range(trace.times.size):
            row = [_fmt(trace.times[s], digits)]
            row += [_fmt(v, digits) for v in trace.x[s].ravel()]
            if mode == "double":
                row += [_fmt(v, digits) for v in trace.q[s].ravel()]
            row += [_fmt(v, digits) for v in trace.edge_dist[s]]
            writer.writerow(row)


def write_triggers_csv(path, triggers: list[TriggerRecord], p: int, mode: str) -> None:
    digits = output_precision()
    ordered = sorted(triggers, key=lambda rec: (rec.time, rec.agent))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(triggers_header(p, mode))
        for rec in ordered:
            row = [str(rec.agent + 1), _fmt(rec.time, digits)]
            row += [_fmt(v, digits) for v in rec.control]
            if mode == "double":
                row += [_fmt(v, digits) for v in rec.velocity]
            row.append(_fmt(rec.error_norm, digits))
            writer.writerow(row)


def _read_rows(path, expected_header: list[str]) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path} is empty") from None
        if header != expected_header:
            raise ValidationError(
                f"{path} header mismatch: expected {expected_header}, got {header}"
            )
        try:
            rows = [[float(v) for v in row] for row in reader if row]
        except ValueError as exc:
            raise ValidationError(f"{path}: non-numeric value ({exc})") from exc
    if not rows:
        raise ValidationError(f"{path} has no data rows")
    arr = np.array(rows)
    if arr.shape[1] != len(expected_header):
        raise ValidationError(f"{path}: ragged rows")
    return arr


def read_trace_csv(path, config: ScenarioConfig) -> Trace:
    """Rebuild a Trace from trace.csv; derived columns are recomputed from states."""
    spec = config.formation
    n, p = spec.graph.n, spec.p
    header = trace_header(n, p, spec.graph.edges, config.mode)
    arr = _read_rows(path, header)
    times = arr[:, 0]
    if np.any(np.diff(times) <= 0):
        raise ValidationError(f"{path}: times must be strictly increasing")
    x = arr[:, 1:1 + n * p].reshape(-1, n, p)
    q = None
    col = 1 + n * p
    if config.mode == "double":
        q = arr[:, col:col + n * p].reshape(-1, n, p)
    idx = np.array(spec.graph.edges)
    evec = x[:, idx[:, 0], :] - x[:, idx[:, 1], :]
    return Trace(
        times=times,
        x=x,
        q=q,
        edge_dist=np.linalg.norm(evec, axis=2),
        edge_offset=np.linalg.norm(evec - spec.displacements[None], axis=2),
        error_norms=np.zeros((times.size, n)),
        thresholds=np.asarray(config.threshold.value(times)),
    )


def read_triggers_csv(path, config: ScenarioConfig) -> list[TriggerRecord]:
    p = config.formation.p
    header = triggers_header(p, config.mode)
    arr = _read_rows(path, header)
    records = []
    for row in arr:
        agent = int(row[0]) - 1
        if not 0 <= agent < config.formation.graph.n:
            raise ValidationError(f"{path}: agent id {int(row[0])} out of range")
        velocity = row[2 + p:2 + 2 * p] if config.mode == "double" else None
        records.append(TriggerRecord(
            agent=agent,
            time=float(row[1]),
            control=np.array(row[2:2 + p]),
            error_norm=float(row[-1]),
            rel_payload={},
            velocity=np.array(velocity) if velocity is not None else None,
        ))
    return records
