"""Reading and writing piecewise-linear paths.

CSV layout: header ``t,x1,...,xd``, one row per timestamp.  Several paths
may share one file through an optional leading ``path`` column holding an
integer path id; rows of one path must be contiguous.

Binary layout (little-endian), repeated per path: ``uint32`` point count,
``uint32`` dimension ``d``, then the points as ``float64`` rows
``(t, x1, ..., xd)``.
"""

from __future__ import annotations

import csv
import io
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError
from .signature import PiecewisePath

_HEADER = struct.Struct("<II")


def _parse_header(header: list[str]) -> tuple[bool, int]:
    cols = [h.strip() for h in header]
    has_id = bool(cols) and cols[0] == "path"
    rest = cols[1:] if has_id else cols
    if not rest or rest[0] != "t":
        raise InvalidInputError("CSV header must start with 't' (optionally after 'path')")
    d = len(rest) - 1
    if d < 1 or rest[1:] != [f"x{i}" for i in range(1, d + 1)]:
        raise InvalidInputError("CSV header must read t,x1,...,xd")
    return has_id, d


def parse_paths_csv(text: str) -> list[PiecewisePath]:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise InvalidInputError("empty path file")
    has_id, d = _parse_header(rows[0])
    width = d + 1 + has_id
    groups: dict[str, list[list[float]]] = {}
    order: list[str] = []
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != width:
            raise InvalidInputError(f"line {lineno}: expected {width} fields, got {len(r)}")
        key = r[0].strip() if has_id else "0"
        try:
            vals = [float(c) for c in r[has_id:]]
        except ValueError:
            raise InvalidInputError(f"line {lineno}: non-numeric field") from None
        if key not in groups:
            groups[key] = []
            order.append(key)
        elif order[-1] != key:
            raise InvalidInputError(f"line {lineno}: rows of path {key} are not contiguous")
        groups[key].append(vals)
    if not order:
        raise InvalidInputError("path file has a header but no rows")
    paths = []
    for key in order:
        arr = np.array(groups[key])
        paths.append(PiecewisePath(arr[:, 0], arr[:, 1:]))
    return paths


def read_paths_csv(path: str | Path) -> list[PiecewisePath]:
    return parse_paths_csv(Path(path).read_text())


def format_paths_csv(paths: Sequence[PiecewisePath]) -> str:
    if not paths:
        raise InvalidInputError("nothing to write")
    d = paths[0].d
    if any(p.d != d for p in paths):
        raise InvalidInputError("paths have different dimensions")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    multi = len(paths) > 1
    w.writerow((["path"] if multi else []) + ["t"] + [f"x{i}" for i in range(1, d + 1)])
    for i, p in enumerate(paths):
        for t, x in zip(p.times, p.values):
            w.writerow(([i] if multi else []) + [repr(float(t))] + [repr(float(v)) for v in x])
    return buf.getvalue()


def write_paths_csv(paths: Sequence[PiecewisePath], path: str | Path) -> None:
    Path(path).write_text(format_paths_csv(paths))


def encode_paths_binary(paths: Iterable[PiecewisePath]) -> bytes:
    out = bytearray()
    for p in paths:
        pts = np.column_stack([p.times, p.values]).astype("<f8")
        out += _HEADER.pack(pts.shape[0], p.d)
        out += pts.tobytes()
    return bytes(out)


def decode_paths_binary(data: bytes) -> list[PiecewisePath]:
    paths, pos = [], 0
    while pos < len(data):
        if pos + _HEADER.size > len(data):
            raise InvalidInputError("truncated path record header")
        n, d = _HEADER.unpack_from(data, pos)
        pos += _HEADER.size
        nbytes = 8 * n * (d + 1)
        if pos + nbytes > len(data):
            raise InvalidInputError("truncated path record body")
        pts = np.frombuffer(data, dtype="<f8", count=n * (d + 1), offset=pos).reshape(n, d + 1)
        pos += nbytes
        paths.append(PiecewisePath(pts[:, 0].copy(), pts[:, 1:].copy()))
    return paths


def read_paths(path: str | Path) -> list[PiecewisePath]:
    """Dispatch on extension: ``.csv`` is text, anything else binary."""
    p = Path(path)
    if p.suffix.lower() == ".csv":
        return read_paths_csv(p)
    return decode_paths_binary(p.read_bytes())
