"""File formats: CSV series, JSON configs and fit-report documents.

All frequencies in files are linear Hz; the angular convention exists only
inside the library. JSON documents are written key-sorted with a
write-to-temp + atomic-rename discipline so no command leaves partial
output behind. The acquisition timestamp is isolated in the single
``generated_at`` key so everything else is byte-stable for fixed inputs.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import os
import tempfile
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import TraceFormatError
from .fluxfit import FluxMapPoint
from .simulate import ComplexTrace

TRACE_HEADER = ["frequency_hz", "s21_real", "s21_imag"]
FLUXMAP_HEADER = ["control_value", "f0_hz"]
FLUXMAP_HEADER_ERR = ["control_value", "f0_hz", "f0_err_hz"]
SQUEEZING_HEADER = ["pump_power_dbm", "squeezing_db", "purity"]

SCHEMA_VERSION = 1


def _decode(data) -> str:
    if isinstance(data, (bytes, bytearray)):
        text = data.decode("utf-8")
    else:
        text = data
    return text.lstrip("﻿")


def _read_rows(text: str, expected_headers, what: str):
    """Validate the header against the accepted variants and parse float cells."""
    reader = csv.reader(_io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise TraceFormatError(f"empty {what} file") from None
    header = [h.strip() for h in header]
    accepted = [list(h) for h in expected_headers]
    if header not in accepted:
        raise TraceFormatError(
            f"bad {what} header {header!r}; expected "
            + " or ".join(repr(",".join(h)) for h in accepted), row=1)
    width = len(header)
    rows = []
    for lineno, cells in enumerate(reader, start=2):
        if not cells or all(not c.strip() for c in cells):
            continue
        if len(cells) != width:
            raise TraceFormatError(
                f"expected {width} cells, found {len(cells)}", row=lineno)
        values = []
        for col, cell in enumerate(cells, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise TraceFormatError(
                    f"non-numeric cell {cell!r}", row=lineno, column=col) from None
            if not math.isfinite(v):
                raise TraceFormatError(
                    f"non-finite cell {cell!r}", row=lineno, column=col)
            values.append(v)
        rows.append(values)
    return header, rows


def parse_trace_csv(data) -> ComplexTrace:
    """Parse a reflection-trace CSV (header ``frequency_hz,s21_real,s21_imag``).

    Rows out of frequency order are sorted with a warning; duplicate
    frequencies and traces shorter than 3 rows are rejected.
    """
    _, rows = _read_rows(_decode(data), [TRACE_HEADER], "trace")
    if len(rows) < 3:
        raise TraceFormatError(f"trace needs at least 3 rows, got {len(rows)}")
    arr = np.array(rows, dtype=float)
    f, re, im = arr[:, 0], arr[:, 1], arr[:, 2]
    if len(np.unique(f)) != len(f):
        dup = f[np.where(np.diff(np.sort(f)) == 0)[0][0]] if len(f) else None
        raise TraceFormatError(f"duplicate frequency {dup!r}")
    if np.any(np.diff(f) < 0):
        warnings.warn("trace rows were not sorted by frequency; reordering",
                      RuntimeWarning, stacklevel=2)
        order = np.argsort(f)
        f, re, im = f[order], re[order], im[order]
    return ComplexTrace(f, re + 1j * im)


def write_trace_csv(trace: ComplexTrace, path) -> None:
    lines = [",".join(TRACE_HEADER)]
    for f, s in zip(trace.frequencies, trace.samples):
        lines.append(f"{float(f)!r},{float(s.real)!r},{float(s.imag)!r}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def parse_fluxmap_csv(data) -> list[FluxMapPoint]:
    """Parse a flux-map CSV (``control_value,f0_hz[,f0_err_hz]``)."""
    header, rows = _read_rows(_decode(data), [FLUXMAP_HEADER, FLUXMAP_HEADER_ERR],
                              "flux map")
    points = []
    for lineno, row in enumerate(rows, start=2):
        err = row[2] if len(row) == 3 else None
        try:
            points.append(FluxMapPoint(control=row[0], f0=row[1], f0_err=err))
        except ValueError as exc:
            raise TraceFormatError(str(exc), row=lineno) from None
    return points


def write_fluxmap_csv(points, path) -> None:
    with_err = any(p.f0_err is not None for p in points)
    header = FLUXMAP_HEADER_ERR if with_err else FLUXMAP_HEADER
    lines = [",".join(header)]
    for p in points:
        cells = [repr(float(p.control)), repr(float(p.f0))]
        if with_err:
            cells.append(repr(float(p.f0_err) if p.f0_err is not None else 0.0))
        lines.append(",".join(cells))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def parse_squeezing_csv(data) -> list[tuple[float, float, float]]:
    """Parse a squeezing-data CSV (``pump_power_dbm,squeezing_db,purity``)."""
    _, rows = _read_rows(_decode(data), [SQUEEZING_HEADER], "squeezing data")
    return [(r[0], r[1], r[2]) for r in rows]


def write_squeezing_csv(rows, path) -> None:
    lines = [",".join(SQUEEZING_HEADER)]
    for power, s_db, mu in rows:
        lines.append(f"{float(power)!r},{float(s_db)!r},{float(mu)!r}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def sha256_digest(path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def load_run_config(path) -> dict:
    """Load and schema-check a run configuration."""
    cfg = load_json(path)
    if not isinstance(cfg, dict):
        raise TraceFormatError("config must be a JSON object")
    version = cfg.get("schema_version")
    if version != SCHEMA_VERSION:
        raise TraceFormatError(
            f"unsupported schema_version {version!r}; this tool supports {SCHEMA_VERSION}")
    return cfg


def build_report_document(command, input_digests: dict, payload: dict,
                          warnings_list=()) -> dict:
    """Assemble the standard fit-report document around a result payload."""
    return {
        "tool": {"name": "jpdkit", "version": __version__},
        "schema_version": SCHEMA_VERSION,
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "command": list(command),
        "input_digest": dict(input_digests),
        "warnings": list(warnings_list),
        "result": payload,
    }


def load_report_document(path) -> dict:
    doc = load_json(path)
    for key in ("tool", "schema_version", "command", "input_digest", "result"):
        if key not in doc:
            raise TraceFormatError(f"report document missing key {key!r}")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise TraceFormatError(
            f"unsupported schema_version {doc['schema_version']!r}")
    return doc


def _jsonify(obj):
    """Convert numpy scalars/arrays and infinities to JSON-safe values."""
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def save_json_atomic(doc: dict, path) -> None:
    text = json.dumps(_jsonify(doc), sort_keys=True, indent=1)
    _atomic_write_text(path, text + "\n")


def _atomic_write_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."),
                               prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
