"""Packing file format.

One JSON document, one center per line::

    {
      "version": 1,
      "dimension": 2,
      "body": {"kind": "ball", "dimension": 2, "radius": 1.0},
      "rho": 6.0,
      "centers": [
        [0.0, 0.0],
        [2.0, 0.0]
      ],
      "metadata": {"seed": 0}
    }

Floats are written by ``repr``, the shortest string that round-trips.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Body, GeometryError, Packing

FORMAT_VERSION = 1


class PackingFileError(ValueError):
    """Parse failure with the offending field and, for JSON syntax errors, line and column."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None, column: int | None = None):
        self.field = field
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}, column {column}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({'; '.join(where)})" if where else message)

    def to_dict(self) -> dict:
        return {"error": str(self), "field": self.field, "line": self.line, "column": self.column}


@dataclass
class PackingFile:
    packing: Packing
    metadata: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION


def parse_body_spec(spec: str) -> Body:
    """``disk:r``, ``ball:r`` (3D), ``square:h``, ``hexagon:R``, ``polygon:k:R``, ``cube:h``, ``octahedron:r``."""
    parts = spec.strip().split(":")
    name = parts[0].lower()
    try:
        args = [float(p) for p in parts[1:]]
    except ValueError as exc:
        raise ValueError(f"bad body parameters in {spec!r}") from exc
    size = args[0] if args else 1.0
    if name == "disk":
        return Body.ball(size, 2)
    if name == "ball":
        return Body.ball(size, 3)
    if name == "square":
        return Body.square(size)
    if name == "hexagon":
        return Body.regular_polygon(6, size)
    if name == "polygon":
        if len(args) != 2 or args[0] != int(args[0]):
            raise ValueError("polygon spec is polygon:k:circumradius")
        return Body.regular_polygon(int(args[0]), args[1])
    if name == "cube":
        return Body.cube(size)
    if name == "octahedron":
        return Body.octahedron(size)
    raise ValueError(f"unknown body {name!r}")


def _num(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("non-finite number in packing")
    return repr(x)


def dumps(pf: PackingFile | Packing, metadata: dict | None = None) -> str:
    if isinstance(pf, Packing):
        pf = PackingFile(pf, dict(metadata or {}))
    P = pf.packing
    body = P.body.to_dict()
    if "radius" in body:
        body_txt = '{"kind": %s, "dimension": %d, "radius": %s}' % (json.dumps(body["kind"]), body["dimension"], _num(body["radius"]))
    else:
        verts = ", ".join("[" + ", ".join(_num(v) for v in row) + "]" for row in body["vertices"])
        body_txt = '{"kind": %s, "dimension": %d, "vertices": [%s]}' % (json.dumps(body["kind"]), body["dimension"], verts)
    rows = ",\n".join("    [" + ", ".join(_num(v) for v in c) + "]" for c in P.centers)
    lines = [
        "{",
        f'  "version": {pf.version},',
        f'  "dimension": {P.dim},',
        f'  "body": {body_txt},',
        f'  "rho": {_num(P.rho)},',
        '  "centers": [' + ("\n" + rows + "\n  ]," if len(P.centers) else "],"),
        f'  "metadata": {json.dumps(pf.metadata, sort_keys=True)}',
        "}",
    ]
    return "\n".join(lines) + "\n"


def loads(text: str) -> PackingFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PackingFileError(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    if not isinstance(doc, dict):
        raise PackingFileError("top level must be an object")
    for key in ("version", "dimension", "body", "rho", "centers"):
        if key not in doc:
            raise PackingFileError("missing field", field=key)
    if doc["version"] != FORMAT_VERSION:
        raise PackingFileError(f"unsupported version {doc['version']!r}", field="version")
    d = doc["dimension"]
    if not isinstance(d, int) or isinstance(d, bool) or d not in (2, 3):
        raise PackingFileError("dimension must be 2 or 3", field="dimension")
    if not isinstance(doc["body"], dict):
        raise PackingFileError("body must be an object", field="body")
    try:
        body = Body.from_dict(doc["body"])
    except (GeometryError, KeyError, TypeError, ValueError) as exc:
        raise PackingFileError(f"invalid body: {exc}", field="body") from exc
    if body.dim != d:
        raise PackingFileError("body dimension differs from the file dimension", field="body")
    rho = doc["rho"]
    if not _is_number(rho) or not rho >= 1:
        raise PackingFileError("rho must be a number >= 1", field="rho")
    centers = doc["centers"]
    if not isinstance(centers, list):
        raise PackingFileError("centers must be a list", field="centers")
    for k, c in enumerate(centers):
        if not isinstance(c, list) or len(c) != d or not all(_is_number(x) for x in c):
            raise PackingFileError(f"center {k} must be {d} finite numbers", field=f"centers[{k}]")
    meta = doc.get("metadata", {})
    if not isinstance(meta, dict):
        raise PackingFileError("metadata must be an object", field="metadata")
    P = Packing(body, float(rho), np.array(centers, dtype=float).reshape(-1, d))
    return PackingFile(P, meta, doc["version"])


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def read_packing(path) -> PackingFile:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise PackingFileError(f"cannot read {path}: {exc.strerror}") from exc
    return loads(text)


def write_packing(path, pf: PackingFile | Packing, metadata: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(pf, metadata))
