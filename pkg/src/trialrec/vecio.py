"""Line-oriented vector store files: a JSON header line, then one
``<id>\\t<space-separated floats>`` row per vector.

Floats are written with 9 significant digits, which round-trips float32
exactly, so save/load is lossless and rewrites are byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class VectorFileError(Exception):
    pass


def format_vector(vec: np.ndarray) -> str:
    return " ".join("%.8e" % float(x) for x in vec)


def write_vectors(path: str | Path, kind: str, ids: list[str], matrix: np.ndarray,
                  extra_header: dict | None = None) -> None:
    if len(ids) != matrix.shape[0]:
        raise VectorFileError("id list and matrix row count differ")
    header = {"kind": kind, "dim": int(matrix.shape[1]), "count": len(ids)}
    if extra_header:
        header.update(extra_header)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for i, name in enumerate(ids):
            fh.write(f"{name}\t{format_vector(matrix[i])}\n")


def read_vectors(path: str | Path) -> tuple[dict, list[str], np.ndarray]:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        try:
            header = json.loads(first)
            dim = int(header["dim"])
            count = int(header["count"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise VectorFileError(f"{path}:1: malformed vector-store header") from exc
        ids: list[str] = []
        matrix = np.empty((count, dim), dtype=np.float32)
        row = 0
        for lineno, line in enumerate(fh, 2):
            line = line.rstrip("\n")
            if not line:
                continue
            name, _, rest = line.partition("\t")
            if not rest:
                raise VectorFileError(f"{path}:{lineno}: missing vector payload")
            try:
                values = np.array(rest.split(" "), dtype=np.float32)
            except ValueError as exc:
                raise VectorFileError(f"{path}:{lineno}: non-numeric vector entry") from exc
            if values.shape[0] != dim:
                raise VectorFileError(
                    f"{path}:{lineno}: expected {dim} floats, got {values.shape[0]}"
                )
            if row >= count:
                raise VectorFileError(f"{path}:{lineno}: more rows than header count")
            ids.append(name)
            matrix[row] = values
            row += 1
    if row != count:
        raise VectorFileError(f"{path}: header count {count} but {row} rows")
    return header, ids, matrix
