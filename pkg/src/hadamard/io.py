"""CSV/JSON serialization for traces, samples, lift reports and bench tables.

Floats are written with ``repr`` so every file parses back to the exact
in-memory values.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .descent import TRACE_HEADER, DescentTrace, IterationRecord, SolveReport, check_trace
from .right_inverse import CompactSample, LiftReport, RightInverseState

LIFT_HEADER = ("t", "lift_error")


def _write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _read_csv(path, header):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        found = tuple(next(reader))
        if found != tuple(header):
            raise ValueError(f"{path}: expected header {','.join(header)}, got {','.join(found)}")
        return list(reader)


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")
    return path


def write_trace_csv(trace: DescentTrace, path):
    return _write_csv(path, TRACE_HEADER, trace.rows())


def read_trace_csv(path) -> list[tuple]:
    """Parse a trace CSV back into ``(record, cum_path)`` pairs."""
    out = []
    for row in _read_csv(path, TRACE_HEADER):
        it, t, before, after, step, cum, back = row
        record = IterationRecord(int(it), float(before), float(t), float(step), float(after), int(back))
        out.append((record, float(cum)))
    return out


def trace_to_dict(trace: DescentTrace) -> dict:
    return {
        "initial_merit": trace.initial_merit,
        "cumulative_path_length": trace.cumulative_path_length,
        "converged": trace.converged,
        "status": trace.status.value if trace.status else None,
        "records": [dict(zip(TRACE_HEADER, row)) for row in trace.rows()],
    }


def solve_report_to_dict(report: SolveReport, bound: float | None = None, decrease_fraction: float = 0.5) -> dict:
    return {
        "status": report.status.value,
        "solution": report.solution.tolist(),
        "residual_norm": report.residual_norm,
        "iterations": report.trace.iterations,
        "initial_merit": report.trace.initial_merit,
        "path_length": report.trace.cumulative_path_length,
        "inverse_bound": bound,
        "checks": check_trace(report.trace, bound, decrease_fraction),
    }


def sample_to_dict(sample: CompactSample, g_values=None) -> dict:
    out = {
        "targets": sample.targets.tolist(),
        "anchor_index": sample.anchor_index,
        "anchor_point": None if sample.anchor_point is None else sample.anchor_point.tolist(),
    }
    if g_values is not None:
        out["g_values"] = np.asarray(g_values).tolist()
    return out


def state_to_dict(state: RightInverseState) -> dict:
    out = sample_to_dict(state.sample, state.g_values)
    out["merit"] = state.merit
    return out


def sample_from_dict(obj: dict) -> tuple[CompactSample, np.ndarray | None]:
    """Inverse of :func:`sample_to_dict`; returns the sample and any stored ``g_values``."""
    if "targets" not in obj:
        raise ValueError("sample JSON needs a 'targets' list")
    sample = CompactSample(obj["targets"], obj.get("anchor_index"), obj.get("anchor_point"))
    g = obj.get("g_values")
    return sample, None if g is None else np.array(g, dtype=float)


def write_lift(report: LiftReport, csv_path, json_path):
    _write_csv(csv_path, LIFT_HEADER, zip(report.t_grid, report.lift_errors))
    write_json(json_path, report.summary())


def read_lift_csv(path) -> tuple[list, list]:
    rows = _read_csv(path, LIFT_HEADER)
    return [float(r[0]) for r in rows], [float(r[1]) for r in rows]


def write_table_csv(path, header, rows):
    return _write_csv(path, header, rows)


def read_table_csv(path, header) -> list[list[str]]:
    return _read_csv(path, header)
