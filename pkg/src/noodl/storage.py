"""On-disk formats: binary matrices, CSV exports, trace files.

The binary matrix format is fixed and endian-stable: the magic bytes
``NDLM``, two little-endian u32 dimensions, then the float64 payload in
column-major order. CSV exports carry one schema-version comment line
followed by a fixed header row; all floats are written with ``repr``
precision so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .model import SparseCoefficientBatch
from .runner import IterationTrace, TRACE_FIELDS

__all__ = [
    "MATRIX_MAGIC",
    "save_matrix",
    "load_matrix",
    "save_matrix_csv",
    "load_matrix_csv",
    "save_batch_csv",
    "load_batch_csv",
    "write_trace_csv",
    "write_trace_json",
    "read_trace_csv",
]

MATRIX_MAGIC = b"NDLM"
TRACE_SCHEMA = "noodl-trace-v1"
BATCH_SCHEMA = "noodl-coeff-batch-v1"


def save_matrix(path, mat: np.ndarray) -> None:
    """Write a dense matrix in the binary container format."""
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {mat.shape}")
    rows, cols = mat.shape
    if rows >= 2**32 or cols >= 2**32:
        raise ValueError("matrix dimensions exceed the u32 header")
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<II", rows, cols))
        fh.write(np.asfortranarray(mat).astype("<f8").tobytes(order="F"))


def load_matrix(path) -> np.ndarray:
    """Read a matrix written by ``save_matrix``; validates magic and size."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != MATRIX_MAGIC:
        raise ValueError(f"{path}: not a matrix container (bad magic)")
    rows, cols = struct.unpack("<II", raw[4:12])
    expect = 12 + rows * cols * 8
    if len(raw) != expect:
        raise ValueError(f"{path}: truncated payload, expected {expect} bytes, got {len(raw)}")
    flat = np.frombuffer(raw, dtype="<f8", offset=12)
    return flat.reshape((rows, cols), order="F").astype(np.float64)


def save_matrix_csv(path, mat: np.ndarray) -> None:
    """Plain CSV export of a dense matrix, one data row per matrix row."""
    mat = np.asarray(mat, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in mat:
            writer.writerow([repr(float(v)) for v in row])


def load_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    return np.asarray(rows, dtype=np.float64)


def save_batch_csv(path, batch: SparseCoefficientBatch) -> None:
    """Sparse batch as (column, row, value) triplets, column-major order."""
    coo = batch.csc.tocoo()
    cols, rows, vals = coo.col, coo.row, coo.data
    order = np.lexsort((rows, cols))
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {BATCH_SCHEMA} shape={batch.m}x{batch.p}\n")
        writer = csv.writer(fh)
        writer.writerow(["col", "row", "value"])
        for i in order:
            writer.writerow([int(cols[i]), int(rows[i]), repr(float(vals[i]))])


def load_batch_csv(path) -> SparseCoefficientBatch:
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if not header.startswith(f"# schema: {BATCH_SCHEMA}"):
            raise ValueError(f"{path}: unexpected schema line {header!r}")
        shape = header.rsplit("shape=", 1)[1]
        m, p = (int(v) for v in shape.split("x"))
        reader = csv.reader(fh)
        next(reader)  # column header
        cols, rows, vals = [], [], []
        for rec in reader:
            if not rec:
                continue
            cols.append(int(rec[0]))
            rows.append(int(rec[1]))
            vals.append(float(rec[2]))
    mat = sp.coo_array((vals, (rows, cols)), shape=(m, p))
    return SparseCoefficientBatch(sp.csc_array(mat))


def _format_value(v: float) -> str:
    return repr(float(v))


def write_trace_csv(path, trace: list[IterationTrace]) -> None:
    """Trace export with the fixed column set, one row per iteration."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {TRACE_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(TRACE_FIELDS)
        for row in trace:
            t, *vals = row.as_row()
            writer.writerow([t] + [_format_value(v) for v in vals])


def read_trace_csv(path) -> list[dict]:
    """Read a trace CSV back as a list of field dicts (floats, NaN kept)."""
    with open(path, newline="") as fh:
        schema = fh.readline().strip()
        if schema != f"# schema: {TRACE_SCHEMA}":
            raise ValueError(f"{path}: unexpected schema line {schema!r}")
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_FIELDS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        out = []
        for rec in reader:
            row = {"t": int(rec["t"])}
            for name in TRACE_FIELDS[1:]:
                row[name] = float(rec[name])
            out.append(row)
    return out


def _json_safe(v: float):
    return None if np.isnan(v) else v


def write_trace_json(path, trace: list[IterationTrace]) -> None:
    """Trace export as JSON; NaN fields (truth-free runs) become null."""
    rows = []
    for row in trace:
        t, *vals = row.as_row()
        rows.append({"t": t, **{name: _json_safe(v) for name, v in zip(TRACE_FIELDS[1:], vals)}})
    payload = {"schema": TRACE_SCHEMA, "rows": rows}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
