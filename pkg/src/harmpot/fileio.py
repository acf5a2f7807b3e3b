"""Mesh, report and cochain persistence plus legacy VTK export."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import simplices as sx
from .derham import Cochain, DeRhamComplex, permutation_sign, whitney_eval
from .errors import FormatVersionMismatch, MismatchedComplex, ParseError
from .meshgen import MarkedMesh

MESH_MAGIC = "harmpot-mesh"
MESH_VERSION = 1
REPORT_SEPARATOR = "# --- machine-readable ---"


# ---------------------------------------------------------------------------
# mesh files


def format_mesh(mesh: MarkedMesh) -> str:
    out = [f"{MESH_MAGIC} {MESH_VERSION}", "metadata " + json.dumps({"name": mesh.name, **mesh.metadata}, sort_keys=True)]
    out.append(f"vertices {mesh.n_vertices}")
    out += [" ".join(repr(float(c)) for c in p) for p in mesh.vertices]
    out.append(f"tets {mesh.n_tets}")
    out += [" ".join(str(int(v)) for v in t) for t in mesh.tets]
    out.append(f"boundary_components {len(mesh.boundary_components)}")
    for comp in mesh.boundary_components:
        out.append(f"faces {len(comp)}")
        out += [" ".join(str(int(v)) for v in t) for t in comp]
    out.append(f"tunnel_loops {len(mesh.tunnel_loops)}")
    for loop in mesh.tunnel_loops:
        edges = sx.cycle_edges([int(v) for v in loop])
        out.append(f"edges {len(edges)}")
        # sorted edge plus orientation sign, in loop order
        out += [f"{min(u, v)} {max(u, v)} {1 if u < v else -1}" for u, v in edges]
    out.append(f"cut_surfaces {len(mesh.cut_surfaces)}")
    for surf in mesh.cut_surfaces:
        out.append(f"faces {len(surf)}")
        signs = permutation_sign(surf)
        srt = np.sort(surf, axis=1)
        out += [f"{a} {b} {c} {s}" for (a, b, c), s in zip(srt.tolist(), signs.tolist())]
    out.append("end")
    return "\n".join(out) + "\n"


def save_mesh(mesh: MarkedMesh, path) -> None:
    Path(path).write_text(format_mesh(mesh))


class _Reader:
    def __init__(self, text):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self):
        if self.pos >= len(self.lines):
            raise ParseError("unexpected end of file", self.pos + 1, 1)
        self.pos += 1
        return self.lines[self.pos - 1]

    def header(self, key):
        line = self.next()
        parts = line.split()
        if len(parts) != 2 or parts[0] != key:
            raise ParseError(f"expected '{key} <count>'", self.pos, 1)
        return self.count(parts[1], line)

    def count(self, token, line):
        try:
            n = int(token)
        except ValueError:
            raise ParseError(f"bad count {token!r}", self.pos, line.find(token) + 1) from None
        if n < 0:
            raise ParseError("negative count", self.pos, line.find(token) + 1)
        return n

    def row(self, width, kind):
        line = self.next()
        parts = line.split()
        if len(parts) != width:
            raise ParseError(f"expected {width} values, got {len(parts)}", self.pos, 1)
        out = []
        col = 0
        for p in parts:
            col = line.index(p, col)
            try:
                out.append(kind(p))
            except ValueError:
                raise ParseError(f"bad value {p!r}", self.pos, col + 1) from None
            col += len(p)
        return out


def parse_mesh(text: str) -> MarkedMesh:
    r = _Reader(text)
    first = r.next().split()
    if len(first) != 2 or first[0] != MESH_MAGIC:
        raise ParseError(f"missing '{MESH_MAGIC}' header", 1, 1)
    if first[1] != str(MESH_VERSION):
        raise FormatVersionMismatch(f"mesh format version {first[1]}, expected {MESH_VERSION}")
    line = r.next()
    if not line.startswith("metadata "):
        raise ParseError("expected metadata line", r.pos, 1)
    try:
        meta = json.loads(line[len("metadata "):])
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad metadata: {exc.msg}", r.pos, len("metadata ") + exc.pos + 1) from None
    name = meta.pop("name", "")
    nv = r.header("vertices")
    vertices = [r.row(3, float) for _ in range(nv)]
    nt = r.header("tets")
    tets = [r.row(4, int) for _ in range(nt)]
    comps = []
    for _ in range(r.header("boundary_components")):
        comps.append([r.row(3, int) for _ in range(r.header("faces"))])
    loops = []
    for _ in range(r.header("tunnel_loops")):
        n = r.header("edges")
        cyc = []
        for _ in range(n):
            a, b, s = r.row(3, int)
            cyc.append(a if s > 0 else b)
        loops.append(cyc)
    surfaces = []
    for _ in range(r.header("cut_surfaces")):
        rows = []
        for _ in range(r.header("faces")):
            a, b, c, s = r.row(4, int)
            rows.append([a, b, c] if s > 0 else [a, c, b])
        surfaces.append(rows)
    if r.next().strip() != "end":
        raise ParseError("expected 'end'", r.pos, 1)
    for t in tets:
        if min(t) < 0 or max(t) >= nv:
            raise ParseError("tet refers to a missing vertex")
    return MarkedMesh(
        vertices=np.array(vertices, dtype=float).reshape(-1, 3),
        tets=np.array(tets, dtype=np.int64).reshape(-1, 4),
        boundary_components=[np.array(c, dtype=np.int64).reshape(-1, 3) for c in comps],
        tunnel_loops=[np.array(l, dtype=np.int64) for l in loops],
        cut_surfaces=[np.array(s, dtype=np.int64).reshape(-1, 3) for s in surfaces],
        name=name,
        metadata=meta,
    )


def load_mesh(path) -> MarkedMesh:
    return parse_mesh(Path(path).read_text())


# ---------------------------------------------------------------------------
# cochains and reports


def save_cochain(values, path) -> None:
    """Plain text ``index value`` lines with full precision."""
    values = np.asarray(values, dtype=float)
    Path(path).write_text("".join(f"{i} {v!r}\n" for i, v in enumerate(values.tolist())))


def load_cochain(path) -> np.ndarray:
    rows = [line.split() for line in Path(path).read_text().splitlines() if line.strip()]
    return np.array([float(v) for _, v in rows])


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def format_report(data: dict, title="harmpot report") -> str:
    """Readable summary followed by one ``key = json`` line per entry."""
    data = _jsonable(data)
    lines = [f"# {title}"]
    for key, value in data.items():
        if isinstance(value, list) and value and isinstance(value[0], list):
            lines.append(f"{key}:")
            lines += ["    " + "  ".join(f"{v:>12.6g}" if isinstance(v, float) else f"{v!s:>12}" for v in row) for row in value]
        else:
            lines.append(f"{key}: {value}")
    lines.append(REPORT_SEPARATOR)
    lines += [f"{key} = {json.dumps(value, sort_keys=True)}" for key, value in data.items()]
    return "\n".join(lines) + "\n"


def save_report(data: dict, path, title="harmpot report") -> None:
    Path(path).write_text(format_report(data, title))


def parse_report(text: str) -> dict:
    lines = text.splitlines()
    try:
        start = lines.index(REPORT_SEPARATOR) + 1
    except ValueError:
        raise ParseError("report has no machine-readable section") from None
    out = {}
    for n, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        key, sep, value = line.partition(" = ")
        if not sep:
            raise ParseError("expected 'key = value'", n, 1)
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad value: {exc.msg}", n, len(key) + 4 + exc.pos) from None
    return out


def load_report(path) -> dict:
    return parse_report(Path(path).read_text())


# ---------------------------------------------------------------------------
# VTK


def write_vtk(cx: DeRhamComplex, cochains: dict, path, title="harmpot") -> None:
    """Legacy ASCII unstructured grid with cochains as point or cell data.

    0-cochains become point scalars, 1- and 2-cochains cell vectors (the
    Whitney reconstruction at each cell barycenter), 3-cochains cell scalars
    (cell integral divided by volume). Fields are written in name order.
    """
    point, cell = [], []
    for name in sorted(cochains):
        c = cochains[name]
        if not isinstance(c, Cochain):
            raise TypeError(f"{name}: expected a Cochain")
        if len(c) != cx.counts[c.degree]:
            raise MismatchedComplex(f"{name}: {c.degree}-cochain does not match the complex")
        if " " in name:
            raise ValueError("VTK field names cannot contain spaces")
        if c.degree == 0:
            point.append((name, c.values))
        else:
            cell.append((name, whitney_eval(cx, c.degree, c.values)))
    out = ["# vtk DataFile Version 2.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    out.append(f"POINTS {cx.counts[0]} double")
    out += [" ".join(repr(float(v)) for v in p) for p in cx.vertices]
    cells = cx.cells.copy()
    # VTK expects positively oriented tets
    vol = sx.signed_volumes(cx.vertices, cells)
    cells[vol < 0] = cells[vol < 0][:, [0, 1, 3, 2]]
    out.append(f"CELLS {len(cells)} {5 * len(cells)}")
    out += ["4 " + " ".join(str(int(v)) for v in t) for t in cells]
    out.append(f"CELL_TYPES {len(cells)}")
    out += ["10"] * len(cells)
    if point:
        out.append(f"POINT_DATA {cx.counts[0]}")
        for name, vals in point:
            out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            out += [repr(float(v)) for v in vals]
    if cell:
        out.append(f"CELL_DATA {len(cells)}")
        for name, vals in cell:
            if vals.ndim == 1:
                out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                out += [repr(float(v)) for v in vals]
            else:
                out.append(f"VECTORS {name} double")
                out += [" ".join(repr(float(x)) for x in v) for v in vals]
    Path(path).write_text("\n".join(out) + "\n")


def read_vtk(path) -> dict:
    """Parse files written by :func:`write_vtk` (not a general VTK reader)."""
    tokens = Path(path).read_text().split("\n")
    i = 4
    out = {"points": None, "cells": None, "point_data": {}, "cell_data": {}}
    target = None
    while i < len(tokens):
        line = tokens[i].split()
        i += 1
        if not line:
            continue
        key = line[0]
        if key == "POINTS":
            n = int(line[1])
            out["points"] = np.array([[float(x) for x in tokens[i + k].split()] for k in range(n)])
            i += n
        elif key == "CELLS":
            n = int(line[1])
            out["cells"] = np.array([[int(x) for x in tokens[i + k].split()[1:]] for k in range(n)])
            i += n
        elif key == "CELL_TYPES":
            i += int(line[1])
        elif key in ("POINT_DATA", "CELL_DATA"):
            target = out["point_data" if key == "POINT_DATA" else "cell_data"]
            count = int(line[1])
        elif key == "SCALARS":
            i += 1
            target[line[1]] = np.array([float(tokens[i + k]) for k in range(count)])
            i += count
        elif key == "VECTORS":
            target[line[1]] = np.array([[float(x) for x in tokens[i + k].split()] for k in range(count)])
            i += count
        else:
            raise ParseError(f"unexpected keyword {key!r}", i, 1)
    return out
