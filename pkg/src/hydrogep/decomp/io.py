"""Run artifacts: convergence trace CSV and incumbent solution JSON.

Trace layout: ``#`` comment lines carrying ``key=value`` provenance, then a
header and one row per iteration.  Floats use ``repr`` so a trace read back
reproduces the run exactly.
"""

from __future__ import annotations

import csv
import json
from typing import Optional

import numpy as np

from ..model import CompactTwoStage
from .solvers import SolveReport

TRACE_SCHEMA = "gep-trace/1"
SOLUTION_SCHEMA = "gep-solution/1"
TRACE_COLUMNS = ["iteration", "seconds", "lb", "ub", "best_ub", "gap", "method", "master_count", "lb_raw"]


class ArtifactError(ValueError):
    pass


def _num(v: float) -> str:
    return repr(float(v))


def write_trace(path, report: SolveReport, header: Optional[dict] = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# schema={TRACE_SCHEMA}\n")
        for k, v in (header or {}).items():
            fh.write(f"# {k}={v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in report.records:
            w.writerow([r.iteration, _num(r.seconds), _num(r.lb), _num(r.ub), _num(r.best_ub), _num(r.gap),
                        report.method, report.master_count, _num(r.lb_raw)])


def read_trace(path):
    """(header dict, list of row dicts with numeric fields converted)."""
    header, rows = {}, []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            header[k] = v
        elif line:
            body.append(line)
    if not body or body[0].split(",") != TRACE_COLUMNS:
        raise ArtifactError(f"{path}: not a convergence trace")
    for rec in csv.DictReader(body):
        rows.append({k: (v if k == "method" else int(v) if k in ("iteration", "master_count") else float(v))
                     for k, v in rec.items()})
    return header, rows


def solution_document(cm: CompactTwoStage, report: SolveReport, header: Optional[dict] = None) -> dict:
    if report.x is None:
        raise ArtifactError("the run produced no incumbent")
    lay = cm.layout
    x = report.x
    inv = [int(round(v)) for v in x[lay.inv]]
    ldr = []
    b0, B = lay.intercepts(x), lay.slopes(x)
    for t in range(lay.n_stages):
        for h, name in enumerate(lay.hydro_names):
            ldr.append({"hydro": name, "stage": t + 1, "intercept": float(b0[t, h]),
                        "slopes": {lay.hydro_names[j]: float(B[t, h, j]) for j in range(lay.n_hydro)}})
    return {
        "schema": SOLUTION_SCHEMA, **(header or {}),
        "method": report.method, "termination": report.termination,
        "objective": float(report.objective), "lower_bound": float(report.lb), "gap": float(report.gap),
        "iterations": report.iterations,
        "units": list(lay.unit_names), "investments": inv,
        "investment_cost": float(cm.first_cost[lay.inv] @ x[lay.inv]),
        "decision_rule": ldr,
        "x": [float(v) for v in x],
    }


def write_solution(path, cm: CompactTwoStage, report: SolveReport, header: Optional[dict] = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(solution_document(cm, report, header), fh, indent=2)
        fh.write("\n")


def read_solution(path, cm: Optional[CompactTwoStage] = None) -> dict:
    """Load a solution; with ``cm`` also check it fits that model and rebuild ``x``."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema") != SOLUTION_SCHEMA:
        raise ArtifactError(f"{path}: not a {SOLUTION_SCHEMA} document")
    x = np.asarray(doc["x"], float)
    if cm is not None:
        if doc.get("system_fingerprint") and doc["system_fingerprint"] != cm.system_fingerprint:
            raise ArtifactError("solution was computed for a different system")
        if x.shape != (cm.n1,):
            raise ArtifactError(f"solution has {x.size} first-stage entries, the model needs {cm.n1}")
        if list(doc["units"]) != list(cm.layout.unit_names):
            raise ArtifactError("solution units do not match the system")
    doc["x"] = x
    return doc
