"""Deterministic binary storage for matrices and named array bundles.

Two file kinds share one layout philosophy: a small self-describing header
followed by raw C-order array bytes. Files contain no timestamps, so equal
inputs produce byte-identical files (required for reproducibility checks
and cheap content hashing).

Matrix file (one array, e.g. a cached feature matrix or a score matrix):
    magic b"FBM1" | dtype string | ndim | dims (uint64 LE each) | raw bytes

Bundle file (named arrays plus a JSON metadata blob, e.g. a checkpoint):
    magic b"FBB1" | meta JSON | count | count * (name | matrix block)
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

_MATRIX_MAGIC = b"FBM1"
_BUNDLE_MAGIC = b"FBB1"


def _write_str(fh, s: str) -> None:
    raw = s.encode("utf-8")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)


def _read_str(fh) -> str:
    (n,) = struct.unpack("<I", fh.read(4))
    return fh.read(n).decode("utf-8")


def _write_array(fh, arr: np.ndarray) -> None:
    arr = np.asarray(arr)
    _write_str(fh, arr.dtype.str)
    fh.write(struct.pack("<I", arr.ndim))
    for d in arr.shape:
        fh.write(struct.pack("<Q", d))
    fh.write(arr.tobytes(order="C"))


def _read_array(fh) -> np.ndarray:
    dtype = np.dtype(_read_str(fh))
    (ndim,) = struct.unpack("<I", fh.read(4))
    shape = tuple(struct.unpack("<Q", fh.read(8))[0] for _ in range(ndim))
    count = int(np.prod(shape)) if shape else 1
    data = fh.read(count * dtype.itemsize)
    return np.frombuffer(data, dtype=dtype).reshape(shape).copy()


def save_matrix(path, arr: np.ndarray) -> None:
    """Write one array, row-major, with a dims + dtype header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_MATRIX_MAGIC)
        _write_array(fh, np.asarray(arr))


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MATRIX_MAGIC:
            raise ValueError(f"{path}: not a matrix file (magic {magic!r})")
        return _read_array(fh)


def save_bundle(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Write named arrays and a JSON metadata blob; key order is sorted."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_BUNDLE_MAGIC)
        _write_str(fh, json.dumps(meta or {}, sort_keys=True))
        names = sorted(arrays)
        fh.write(struct.pack("<I", len(names)))
        for name in names:
            _write_str(fh, name)
            _write_array(fh, np.asarray(arrays[name]))


def load_bundle(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _BUNDLE_MAGIC:
            raise ValueError(f"{path}: not a bundle file (magic {magic!r})")
        meta = json.loads(_read_str(fh))
        (count,) = struct.unpack("<I", fh.read(4))
        arrays = {}
        for _ in range(count):
            name = _read_str(fh)
            arrays[name] = _read_array(fh)
    return arrays, meta


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
