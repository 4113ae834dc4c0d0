"""CSV artifacts: trace, evaluations and summary files."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from pathlib import Path

from .driver import SummaryRow, TraceRecord

TRACE_FIXED = ["family", "replication", "iteration", "eval_count", "hv_indicator", "acq_value"]
SUMMARY_COLUMNS = ["family", "eval_count", "n_reps", "mean", "half_width", "lower", "upper"]


class TraceFormatError(ValueError):
    pass


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    v = float(v)
    if math.isnan(v):
        return "nan"
    return format(v, ".17g")


def write_atomic(path, text: str):
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def trace_header(p: int):
    return TRACE_FIXED + [f"nu_{j + 1}" for j in range(p)] + [f"noise_{j + 1}" for j in range(p)]


def trace_csv(records, p: int) -> str:
    rows = []
    for r in records:
        nu = list(r.nu) if r.nu else [None] * p
        noise = list(r.noise) if r.noise else [None] * p
        rows.append([r.family, r.replication, r.iteration, r.eval_count, fmt(r.hv_indicator),
                     fmt(r.acq_value)] + [fmt(v) for v in nu] + [fmt(v) for v in noise])
    return _csv_text(trace_header(p), rows)


def evaluations_csv(records, d: int, p: int) -> str:
    header = (["family", "replication", "eval_count"] + [f"x_{i + 1}" for i in range(d)]
              + [f"y_{j + 1}" for j in range(p)])
    rows = [[r.family, r.replication, r.eval_count] + [fmt(v) for v in r.x] + [fmt(v) for v in r.y]
            for r in records]
    return _csv_text(header, rows)


def summary_csv(rows) -> str:
    return _csv_text(SUMMARY_COLUMNS, [
        [s.family, s.eval_count, s.n_reps, fmt(s.mean), fmt(s.half_width), fmt(s.lower), fmt(s.upper)]
        for s in rows
    ])


def _float(text, where):
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        raise TraceFormatError(f"{where}: not a number: {text!r}") from None


def _int(text, where):
    try:
        return int(text)
    except ValueError:
        raise TraceFormatError(f"{where}: not an integer: {text!r}") from None


def read_trace(path):
    """Parse a trace CSV back into :class:`TraceRecord` objects.

    Raises:
        TraceFormatError: on missing columns, bad values or an empty trace.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = list(reader)
    except OSError as exc:
        raise TraceFormatError(f"cannot read {path}: {exc}") from None
    if not header or header[: len(TRACE_FIXED)] != TRACE_FIXED:
        raise TraceFormatError(f"{path}: header must start with {','.join(TRACE_FIXED)}")
    extra = header[len(TRACE_FIXED):]
    if len(extra) % 2:
        raise TraceFormatError(f"{path}: expected matching nu_j and noise_j columns")
    p = len(extra) // 2
    if extra != trace_header(p)[len(TRACE_FIXED):]:
        raise TraceFormatError(f"{path}: unexpected columns {extra}")
    records = []
    for i, row in enumerate(rows, start=2):
        where = f"{path}:{i}"
        if len(row) != len(header):
            raise TraceFormatError(f"{where}: expected {len(header)} fields, got {len(row)}")
        hv = _float(row[4], where)
        if hv is None:
            raise TraceFormatError(f"{where}: hv_indicator is empty")
        nu = [_float(v, where) for v in row[6 : 6 + p]]
        noise = [_float(v, where) for v in row[6 + p :]]
        records.append(TraceRecord(
            family=row[0], replication=_int(row[1], where), iteration=_int(row[2], where),
            eval_count=_int(row[3], where), hv_indicator=hv, acq_value=_float(row[5], where),
            nu=tuple(nu) if any(v is not None for v in nu) else (),
            noise=tuple(noise) if any(v is not None for v in noise) else (),
        ))
    if not records:
        raise TraceFormatError(f"{path}: trace has no rows")
    return records


def read_evaluations(path):
    """Map ``(family, replication)`` to the ordered list of objective vectors."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None) or []
        ycols = [i for i, h in enumerate(header) if h.startswith("y_")]
        if header[:3] != ["family", "replication", "eval_count"] or not ycols:
            raise TraceFormatError(f"{path}: not an evaluations file")
        out: dict = {}
        for i, row in enumerate(reader, start=2):
            key = (row[0], _int(row[1], f"{path}:{i}"))
            out.setdefault(key, []).append(
                (_int(row[2], f"{path}:{i}"), [_float(row[c], f"{path}:{i}") for c in ycols]))
    return out
