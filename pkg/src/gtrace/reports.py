"""Deterministic report files: JSON envelopes, CSV tables and a binary matrix container.

Every write goes to a temporary file in the target directory followed by
an atomic rename.  JSON uses sorted keys and CSV a fixed float format, so
identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DomainError

SCHEMA = "gtrace-report/1"
MATRIX_MAGIC = b"GTRM"
MATRIX_VERSION = 1


def _plain(obj):
    """Convert numpy containers and scalars to JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _plain(float(np.real(obj))), "im": _plain(float(np.imag(obj)))}
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isnan(x):
            return "nan"
        if np.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical JSON form of ``cfg``."""
    return hashlib.sha256(json.dumps(_plain(cfg), sort_keys=True).encode()).hexdigest()


def atomic_write(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def envelope(command: str, cfg: dict, result: dict) -> dict:
    return {"schema": SCHEMA, "version": __version__, "command": command,
            "config": cfg, "config_hash": config_hash(cfg), "result": result}


def write_json(path, obj) -> Path:
    return atomic_write(path, canonical_json(obj).encode())


def format_value(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x)) if np.isfinite(x) else str(float(x))
    return str(x)


def csv_text(header, rows, comments=()) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise DomainError("row length does not match header")
        w.writerow([format_value(v) for v in row])
    for key, val in comments:
        buf.write(f"# {key}={format_value(val)}\n")
    return buf.getvalue()


def write_csv(path, header, rows, comments=()) -> Path:
    """CSV table with optional trailing ``# key=value`` lines (fits, summaries)."""
    return atomic_write(path, csv_text(header, rows, comments).encode())


def read_csv(path) -> tuple[list, list, dict]:
    header, rows, comments = None, [], {}
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                comments[k] = v
                continue
            vals = next(csv.reader([line]))
            if header is None:
                header = vals
            else:
                rows.append(vals)
    return header, rows, comments


def matrix_bytes(matrix, row_index=None, col_index=None) -> bytes:
    """Binary container: magic, version, rows, cols, index dim, indices, complex128 row-major data.

    Row and column indices (e.g. frequencies or grid nodes) are float64
    arrays of shape ``(rows, k)`` and ``(cols, k)``; ``k = 0`` when absent.
    """
    m = np.ascontiguousarray(np.asarray(matrix, dtype=np.complex128))
    if m.ndim != 2:
        raise DomainError("matrix must be two-dimensional")
    r, c = m.shape
    ri = np.zeros((r, 0)) if row_index is None else np.asarray(row_index, float).reshape(r, -1)
    ci = np.zeros((c, 0)) if col_index is None else np.asarray(col_index, float).reshape(c, -1)
    if ri.shape[1] != ci.shape[1]:
        raise DomainError("row and column indices need the same width")
    head = MATRIX_MAGIC + struct.pack("<IQQI", MATRIX_VERSION, r, c, ri.shape[1])
    return head + ri.astype("<f8").tobytes() + ci.astype("<f8").tobytes() + m.astype("<c16").tobytes()


def write_matrix(path, matrix, row_index=None, col_index=None) -> Path:
    return atomic_write(path, matrix_bytes(matrix, row_index, col_index))


def read_matrix(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != MATRIX_MAGIC:
        raise DomainError("not a matrix container")
    ver, r, c, k = struct.unpack("<IQQI", data[4:28])
    if ver != MATRIX_VERSION:
        raise DomainError(f"unsupported container version {ver}")
    off = 28
    ri = np.frombuffer(data, "<f8", r * k, off).reshape(r, k)
    off += 8 * r * k
    ci = np.frombuffer(data, "<f8", c * k, off).reshape(c, k)
    off += 8 * c * k
    m = np.frombuffer(data, "<c16", r * c, off).reshape(r, c)
    return m.copy(), ri.copy(), ci.copy()
