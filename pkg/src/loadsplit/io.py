"""Plain-text persistence: matrices as CSV plus a JSON sidecar, and tables."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .exceptions import MalformedRow

FLOAT_FMT = "%.17g"


def fmt(x) -> str:
    """Shortest round-trip text of a float."""
    return repr(float(x))


def sidecar(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_matrix(path, M, *, rows=None, columns=None, **meta) -> None:
    """Write ``M`` as headerless CSV and its dimensions and labels beside it."""
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in M:
            w.writerow([fmt(v) for v in row])
    info = {"shape": list(M.shape)}
    if rows is not None:
        info["rows"] = [str(r) for r in rows]
    if columns is not None:
        info["columns"] = [str(c) for c in columns]
    info.update(meta)
    write_json(sidecar(path), info)


def read_matrix(path) -> tuple[np.ndarray, dict]:
    """Inverse of :func:`write_matrix`; the sidecar is optional."""
    path = Path(path)
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise MalformedRow(f"{path}:{lineno}: {exc}") from exc
    meta = {}
    if sidecar(path).exists():
        meta = json.loads(sidecar(path).read_text(encoding="utf-8"))
    M = np.array(rows, dtype=np.float64)
    if "shape" in meta:
        M = M.reshape(meta["shape"])
    return M, meta


def write_table(path, header, rows) -> None:
    """CSV with a header; floats written in round-trip form."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_table(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
