"""ASCII OFF reading and writing."""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from ..errors import ParseError
from .mesh import Mesh, build_mesh


def _tokens(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def load_off(path, repair: bool = True, name=None) -> Mesh:
    """Read a triangle mesh from an ASCII OFF file.

    Flipped faces are re-oriented when ``repair`` is true; a mesh that is
    not closed raises :class:`~geomlab.errors.ValidationError`.
    """
    path = Path(path)
    lines = _tokens(path.read_text())
    try:
        lineno, head = next(lines)
    except StopIteration:
        raise ParseError("empty file", line=1) from None
    if head[0] != "OFF":
        raise ParseError(f"expected 'OFF' header, got {head[0]!r}", line=lineno)
    counts = head[1:]
    if not counts:
        try:
            lineno, counts = next(lines)
        except StopIteration:
            raise ParseError("missing element counts", line=lineno) from None
    try:
        nv, nf = int(counts[0]), int(counts[1])
    except (ValueError, IndexError):
        raise ParseError(f"bad element counts {' '.join(counts)!r}", line=lineno) from None
    verts = np.empty((nv, 3))
    for i in range(nv):
        try:
            lineno, tok = next(lines)
        except StopIteration:
            raise ParseError(f"expected {nv} vertices, file ended after {i}", line=lineno) from None
        try:
            verts[i] = [float(t) for t in tok[:3]]
        except ValueError:
            raise ParseError(f"bad vertex {' '.join(tok)!r}", line=lineno) from None
        if len(tok) < 3:
            raise ParseError("vertex needs three coordinates", line=lineno)
    faces = np.empty((nf, 3), dtype=np.int64)
    for i in range(nf):
        try:
            lineno, tok = next(lines)
        except StopIteration:
            raise ParseError(f"expected {nf} faces, file ended after {i}", line=lineno) from None
        try:
            ids = [int(t) for t in tok]
        except ValueError:
            raise ParseError(f"bad face {' '.join(tok)!r}", line=lineno) from None
        if not ids or ids[0] != 3 or len(ids) < 4:
            raise ParseError("only triangular faces are supported", line=lineno)
        if min(ids[1:4]) < 0 or max(ids[1:4]) >= nv:
            raise ParseError("face index out of range", line=lineno)
        faces[i] = ids[1:4]
    return build_mesh(verts, faces, name=name or path.stem, repair=repair)


def format_off(mesh: Mesh) -> str:
    out = ["OFF", f"{mesh.nv} {mesh.nf} 0"]
    out.extend(f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices)
    out.extend(f"3 {a} {b} {c}" for a, b, c in mesh.faces)
    return "\n".join(out) + "\n"


def atomic_write_text(path, text: str):
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_off(mesh: Mesh, path):
    atomic_write_text(path, format_off(mesh))
