"""Binary matrix container used to persist dense matrices between CLI stages.

Layout: magic bytes ``ZGEM``, version (u32 LE), rows (u64 LE), cols (u64 LE),
then rows*cols float64 values, row-major, little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DataError

MAGIC = b"ZGEM"
VERSION = 1

_HEADER = struct.Struct("<4sIQQ")


def write_matrix(path: str | Path, mat: np.ndarray) -> None:
    """Write a 2-D float array to `path` in the ZGEM container format."""
    mat = np.ascontiguousarray(mat, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {mat.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, mat.shape[0], mat.shape[1]))
        fh.write(mat.astype("<f8", copy=False).tobytes())


def read_matrix(path: str | Path) -> np.ndarray:
    """Read a ZGEM file back into a C-contiguous float64 matrix."""
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise DataError(f"{path}: truncated header")
        magic, version, rows, cols = _HEADER.unpack(header)
        if magic != MAGIC:
            raise DataError(f"{path}: bad magic bytes {magic!r}, expected {MAGIC!r}")
        if version != VERSION:
            raise DataError(f"{path}: unsupported container version {version}")
        payload = fh.read(rows * cols * 8)
        if len(payload) != rows * cols * 8:
            raise DataError(f"{path}: truncated payload ({len(payload)} bytes)")
        if fh.read(1):
            raise DataError(f"{path}: trailing bytes after payload")
    out = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return np.ascontiguousarray(out.reshape(rows, cols))


def write_csr(prefix: str | Path, mat: sp.csr_matrix) -> None:
    """Persist a CSR matrix as three ZGEM files (indptr/indices/data).

    Index arrays are stored as float64 rows; exact below 2**53, far above
    any graph size this package handles.
    """
    prefix = str(prefix)
    mat = mat.tocsr()
    write_matrix(prefix + ".indptr.zgem", mat.indptr.astype(np.float64)[None, :])
    write_matrix(prefix + ".indices.zgem", mat.indices.astype(np.float64)[None, :])
    write_matrix(prefix + ".data.zgem", mat.data.astype(np.float64)[None, :])
    write_matrix(prefix + ".shape.zgem", np.array([mat.shape], dtype=np.float64))


def read_csr(prefix: str | Path) -> sp.csr_matrix:
    """Read a CSR matrix written by :func:`write_csr`."""
    prefix = str(prefix)
    indptr = read_matrix(prefix + ".indptr.zgem").ravel().astype(np.int64)
    indices = read_matrix(prefix + ".indices.zgem").ravel().astype(np.int64)
    data = read_matrix(prefix + ".data.zgem").ravel()
    shape = read_matrix(prefix + ".shape.zgem").ravel().astype(np.int64)
    return sp.csr_matrix((data, indices, indptr), shape=tuple(shape))
