"""Telemetry records, trace files (JSONL / CSV) and episode reports.

A trace file holds one header object, one record per control tick and a
closing summary. Floats are written with ``repr`` precision, so reading a
file and writing it back reproduces it byte for byte.
"""
import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from enum import Enum
from pathlib import Path
from typing import List, Optional

from .exceptions import ParseError

SCHEMA_VERSION = 1
CONVERGENCE_TOL = 0.05
CONVERGENCE_TICKS = 10
STEADY_STATE_WINDOW_S = 1.0


class Verdict(str, Enum):
    SUCCESS = "Success"
    OBJECT_DROPPED = "ObjectDropped"
    GRIPPER_LIMIT_REACHED = "GripperLimitReached"


EXIT_CODES = {Verdict.SUCCESS: 0, Verdict.OBJECT_DROPPED: 2, Verdict.GRIPPER_LIMIT_REACHED: 3}


@dataclass
class TelemetryRecord:
    t: float
    phase: str
    x_g: float
    f_mer_n: float
    f_mer_t: float
    mu_hat: float
    ci_low: float
    ci_high: float
    ess: float
    cf_raw: float
    cf_clamped: float
    delta_x: float
    slip_fraction: float
    macro_slip: float
    true_mu: float
    mass: float


RECORD_FIELDS = [f.name for f in fields(TelemetryRecord)]
_FLOAT_FIELDS = [n for n in RECORD_FIELDS if n != "phase"]


@dataclass
class EpisodeReport:
    verdict: str
    convergence_time_s: Optional[float]
    steady_state_cf_error: Optional[float]
    peak_grip_force: float
    total_macro_slip: float
    ticks_over_budget: Optional[int] = None


@dataclass
class TelemetryTrace:
    header: dict
    records: List[TelemetryRecord]
    verdict: Verdict
    report: Optional[EpisodeReport] = None

    def column(self, name):
        return [getattr(r, name) for r in self.records]


def compute_report(trace: TelemetryTrace, ticks_over_budget=None) -> EpisodeReport:
    """Derive the episode metrics from the recorded ticks alone."""
    recs = trace.records
    cf_target = trace.header["cf_target"]
    rate = trace.header["rate_hz"]

    convergence = None
    run = 0
    for i, r in enumerate(recs):
        active = r.phase != "reach"
        run = run + 1 if active and abs(r.mu_hat - r.true_mu) < CONVERGENCE_TOL else 0
        if run == CONVERGENCE_TICKS:
            convergence = recs[i - CONVERGENCE_TICKS + 1].t
            break

    window = max(1, int(round(STEADY_STATE_WINDOW_S * rate)))
    hold = [r for r in recs if r.phase == "hold"]
    if not hold:
        hold = [r for r in recs if r.phase != "reach"]
    tail = hold[-window:]
    steady = sum(abs(r.cf_clamped - cf_target) for r in tail) / len(tail) if tail else None

    return EpisodeReport(
        verdict=Verdict(trace.verdict).value,
        convergence_time_s=convergence,
        steady_state_cf_error=steady,
        peak_grip_force=max((r.f_mer_n for r in recs), default=0.0),
        total_macro_slip=recs[-1].macro_slip if recs else 0.0,
        ticks_over_budget=ticks_over_budget,
    )


def _check_record(rec: TelemetryRecord):
    for name in _FLOAT_FIELDS:
        if not math.isfinite(getattr(rec, name)):
            raise ValueError(f"telemetry field {name} is not finite at t={rec.t}")


def _summary(trace):
    report = asdict(trace.report) if trace.report is not None else None
    if report is not None:
        report.pop("ticks_over_budget")  # wall-clock dependent, kept out of files
    return {"type": "summary", "verdict": Verdict(trace.verdict).value, "report": report}


def dumps_jsonl(trace: TelemetryTrace) -> str:
    lines = [json.dumps({"type": "header", "schema_version": SCHEMA_VERSION, **trace.header})]
    for rec in trace.records:
        _check_record(rec)
        lines.append(json.dumps({"type": "tick", **asdict(rec)}))
    lines.append(json.dumps(_summary(trace)))
    return "\n".join(lines) + "\n"


def dumps_csv(trace: TelemetryTrace) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps({"schema_version": SCHEMA_VERSION, **trace.header}) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_FIELDS)
    for rec in trace.records:
        _check_record(rec)
        writer.writerow([repr(v) if isinstance(v, float) else v for v in asdict(rec).values()])
    buf.write("# " + json.dumps(_summary(trace)) + "\n")
    return buf.getvalue()


def _report_from(obj):
    if obj is None:
        return None
    return EpisodeReport(**obj)


def _record_from(values: dict, where):
    try:
        kwargs = {name: values[name] for name in RECORD_FIELDS}
    except KeyError as e:
        raise ParseError("missing telemetry field", field=e.args[0], line=where)
    try:
        for name in _FLOAT_FIELDS:
            kwargs[name] = float(kwargs[name])
        kwargs["phase"] = str(kwargs["phase"])
    except (TypeError, ValueError) as e:
        raise ParseError(str(e), line=where)
    return TelemetryRecord(**kwargs)


def loads_jsonl(text: str) -> TelemetryTrace:
    header, records, summary = None, [], None
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", line=lineno)
        kind = obj.pop("type", None)
        if kind == "header":
            if obj.pop("schema_version", None) != SCHEMA_VERSION:
                raise ParseError("unsupported schema_version", field="schema_version", line=lineno)
            header = obj
        elif kind == "tick":
            records.append(_record_from(obj, lineno))
        elif kind == "summary":
            summary = obj
        else:
            raise ParseError(f"unknown record type {kind!r}", field="type", line=lineno)
    return _assemble(header, records, summary)


def loads_csv(text: str) -> TelemetryTrace:
    lines = text.splitlines()
    if len(lines) < 3 or not lines[0].startswith("# ") or not lines[-1].startswith("# "):
        raise ParseError("CSV telemetry needs a header comment, a column row and a summary comment")
    try:
        header = json.loads(lines[0][2:])
        summary = json.loads(lines[-1][2:])
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON comment: {e.msg}")
    if header.pop("schema_version", None) != SCHEMA_VERSION:
        raise ParseError("unsupported schema_version", field="schema_version", line=1)
    summary.pop("type", None)
    reader = csv.DictReader(lines[1:-1])
    records = [_record_from(row, i + 3) for i, row in enumerate(reader)]
    return _assemble(header, records, summary)


def _assemble(header, records, summary):
    if header is None:
        raise ParseError("telemetry has no header line")
    if summary is None:
        raise ParseError("telemetry has no summary line (incomplete episode?)")
    for a, b in zip(records, records[1:]):
        if not b.t > a.t:
            raise ParseError(f"timestamps not strictly increasing at t={b.t}", field="t")
    try:
        verdict = Verdict(summary["verdict"])
    except (KeyError, ValueError):
        raise ParseError("summary has no valid verdict", field="verdict")
    return TelemetryTrace(header, records, verdict, _report_from(summary.get("report")))


def write_trace(trace: TelemetryTrace, path, fmt=None):
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix == ".csv" else "jsonl")
    text = dumps_csv(trace) if fmt == "csv" else dumps_jsonl(trace)
    path.write_text(text)


def read_trace(path) -> TelemetryTrace:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ParseError(str(e), path=path)
    try:
        if text.startswith("# "):
            return loads_csv(text)
        return loads_jsonl(text)
    except ParseError as e:
        if e.path is None:
            raise ParseError(str(e), path=path)
        raise


def plot_columns(trace: TelemetryTrace) -> str:
    """Columnar CSV for plotting force, estimate band and cf against time."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "f_mer_n", "f_mer_t", "mu_hat", "ci_low", "ci_high", "true_mu", "cf_clamped", "phase"])
    for r in trace.records:
        writer.writerow([r.t, r.f_mer_n, r.f_mer_t, r.mu_hat, r.ci_low, r.ci_high, r.true_mu, r.cf_clamped, r.phase])
    return buf.getvalue()
