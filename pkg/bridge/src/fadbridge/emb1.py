"""EMB1 writer (little-endian).

Layout: magic 'FEMB' | version u32 = 1 | dim u32 | count u32
| id-table length u32 | UTF-8 ids joined by '\\n' (no trailing newline)
| count * dim float32 values, row-major, row i <-> id i.

Standalone on purpose: the bridge talks to the main toolkit only through
this byte format, never through imports.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"FEMB"
VERSION = 1


def write_emb1(path: str | Path, ids: list[str], matrix: np.ndarray) -> None:
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    if matrix.ndim != 2 or matrix.shape[0] != len(ids):
        raise ValueError("matrix rows must match ids")
    id_blob = "\n".join(ids).encode("utf-8")
    header = MAGIC + struct.pack("<IIII", VERSION, matrix.shape[1], len(ids), len(id_blob))
    Path(path).write_bytes(header + id_blob + matrix.tobytes())
