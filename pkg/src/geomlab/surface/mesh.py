"""Closed oriented triangle meshes in R^3.

A :class:`Mesh` is immutable once built. Construction validates that the
faces describe a closed, consistently and outwardly oriented 2-manifold
without degenerate triangles; :func:`build_mesh` can additionally repair
flipped faces before validating.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from ..errors import ValidationError

DEGENERATE_FACE_RTOL = 1e-14


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _undirected_keys(faces, nv):
    he = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    lo = np.minimum(he[:, 0], he[:, 1])
    hi = np.maximum(he[:, 0], he[:, 1])
    return he, lo.astype(np.int64) * nv + hi


def _signed_volumes(vertices, faces):
    a, b, c = (vertices[faces[:, k]] for k in range(3))
    return np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0


def check_closed(faces, nv):
    """Raise :class:`ValidationError` unless every edge has exactly two faces."""
    _, keys = _undirected_keys(faces, nv)
    uniq, counts = np.unique(keys, return_counts=True)
    bad = counts != 2
    if np.any(bad):
        k = int(uniq[np.argmax(bad)])
        kind = "boundary" if counts[np.argmax(bad)] == 1 else "non-manifold"
        raise ValidationError(
            f"mesh is not closed: {kind} edge ({k // nv}, {k % nv}) "
            f"shared by {int(counts[np.argmax(bad)])} face(s)"
        )


def is_consistently_oriented(faces, nv):
    he, _ = _undirected_keys(faces, nv)
    directed = he[:, 0].astype(np.int64) * nv + he[:, 1]
    return np.unique(directed).size == directed.size


def face_components(faces, nv):
    """Connected components of the face set (label per face)."""
    nf = len(faces)
    owner = np.repeat(np.arange(nf), 3)
    verts = faces.reshape(-1)
    inc = sparse.csr_matrix((np.ones(3 * nf), (owner, verts)), shape=(nf, nv))
    adj = inc @ inc.T
    _, labels = csgraph.connected_components(adj, directed=False)
    return labels


def repair_orientation(vertices, faces):
    """Make face orientation consistent and outward per connected component.

    Orientation is propagated breadth-first over the face adjacency graph:
    a neighbour that traverses a shared edge in the same direction as the
    current face is flipped. A conflict (non-orientable input) raises
    :class:`ValidationError`. Each component is finally flipped as a whole
    if its signed enclosed volume is negative.
    """
    faces = np.array(faces, dtype=np.int64, copy=True)
    nv = len(vertices)
    nf = len(faces)
    check_closed(faces, nv)
    edge_faces = {}
    for fi, (a, b, c) in enumerate(faces):
        for u, v in ((a, b), (b, c), (c, a)):
            edge_faces.setdefault((min(u, v), max(u, v)), []).append(fi)

    def has_directed(fi, u, v):
        a, b, c = faces[fi]
        return (a, b) == (u, v) or (b, c) == (u, v) or (c, a) == (u, v)

    visited = np.zeros(nf, dtype=bool)
    for seed in range(nf):
        if visited[seed]:
            continue
        visited[seed] = True
        queue = deque([seed])
        while queue:
            fi = queue.popleft()
            a, b, c = faces[fi]
            for u, v in ((a, b), (b, c), (c, a)):
                for fj in edge_faces[(min(u, v), max(u, v))]:
                    if fj == fi:
                        continue
                    same = has_directed(fj, u, v)
                    if visited[fj]:
                        if same:
                            raise ValidationError(
                                f"mesh is not orientable (conflict at face {fj})"
                            )
                        continue
                    if same:
                        faces[fj] = faces[fj][::-1]
                    visited[fj] = True
                    queue.append(fj)

    labels = face_components(faces, nv)
    vols = _signed_volumes(np.asarray(vertices, dtype=float), faces)
    for lab in np.unique(labels):
        sel = labels == lab
        if vols[sel].sum() < 0:
            faces[sel] = faces[sel][:, ::-1]
    return faces


@dataclass(frozen=True, eq=False)
class Mesh:
    """Oriented closed triangulated surface immersed in R^3.

    Parameters
    ----------
    vertices : array_like, shape (V, 3)
        Vertex positions.
    faces : array_like, shape (F, 3)
        Vertex index triples, counter-clockwise seen from outside.
    level : int, optional
        Subdivision level for generated meshes; used to scale the
        discretization allowance of certification checks.
    name : str
        Free-form tag carried into reports.

    Raises
    ------
    ValidationError
        If the mesh is not closed, not consistently oriented, has
        degenerate faces, or encloses a non-positive signed volume.
    """

    vertices: np.ndarray
    faces: np.ndarray
    level: Optional[int] = None
    name: str = "mesh"
    n: int = field(default=2, init=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        f = np.asarray(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValidationError("vertices must have shape (V, 3)")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValidationError("faces must have shape (F, 3)")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValidationError("face index out of range")
        if not np.all(np.isfinite(v)):
            raise ValidationError("non-finite vertex coordinate")
        object.__setattr__(self, "vertices", _readonly(v))
        object.__setattr__(self, "faces", _readonly(f))
        self._validate()

    def _validate(self):
        nv = len(self.vertices)
        check_closed(self.faces, nv)
        if not is_consistently_oriented(self.faces, nv):
            raise ValidationError("faces are not consistently oriented")
        fa = self.face_areas
        tiny = fa <= DEGENERATE_FACE_RTOL * fa.mean()
        if np.any(tiny):
            raise ValidationError(f"degenerate face {int(np.argmax(tiny))}")
        if self.enclosed_volume <= 0:
            raise ValidationError("mesh is inward oriented (signed volume <= 0)")

    # -- derived geometry -------------------------------------------------

    @property
    def nv(self):
        return len(self.vertices)

    @property
    def nf(self):
        return len(self.faces)

    @cached_property
    def _face_cross(self):
        v, f = self.vertices, self.faces
        return np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])

    @cached_property
    def face_areas(self):
        return _readonly(0.5 * np.linalg.norm(self._face_cross, axis=1))

    @cached_property
    def face_normals(self):
        return _readonly(self._face_cross / (2.0 * self.face_areas[:, None]))

    @cached_property
    def vertex_areas(self):
        """Lumped vertex weights: one third of the incident face areas."""
        w = np.bincount(
            self.faces.reshape(-1),
            weights=np.repeat(self.face_areas / 3.0, 3),
            minlength=self.nv,
        )
        return _readonly(w)

    @cached_property
    def vertex_normals(self):
        """Area-weighted unit vertex normals (outward)."""
        acc = np.zeros((self.nv, 3))
        for k in range(3):
            np.add.at(acc, self.faces[:, k], self._face_cross)
        return _readonly(acc / np.linalg.norm(acc, axis=1)[:, None])

    @cached_property
    def area(self):
        return float(self.face_areas.sum())

    @cached_property
    def enclosed_volume(self):
        return float(_signed_volumes(self.vertices, self.faces).sum())

    @cached_property
    def center_of_mass(self):
        """Area-weighted mean position using the lumped vertex weights."""
        w = self.vertex_areas
        return _readonly(w @ self.vertices / w.sum())

    @cached_property
    def edges(self):
        """Unique undirected edges as sorted index pairs, shape (E, 2)."""
        _, keys = _undirected_keys(self.faces, self.nv)
        uniq = np.unique(keys)
        return _readonly(np.column_stack([uniq // self.nv, uniq % self.nv]))

    @cached_property
    def adjacency(self):
        """Symmetric vertex adjacency as a boolean CSR matrix."""
        e = self.edges
        a = sparse.coo_matrix(
            (np.ones(2 * len(e), dtype=bool), (e.reshape(-1), e[:, ::-1].reshape(-1))),
            shape=(self.nv, self.nv),
        )
        return a.tocsr()

    @cached_property
    def mean_edge_length(self):
        e = self.edges
        return float(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1).mean())

    @cached_property
    def n_components(self):
        n, _ = csgraph.connected_components(self.adjacency, directed=False)
        return int(n)

    # -- transforms -------------------------------------------------------

    def with_vertices(self, vertices, name=None):
        """Same connectivity, new positions (validated)."""
        return Mesh(vertices, self.faces, level=self.level, name=name or self.name)

    def scaled(self, c):
        return self.with_vertices(c * self.vertices, name=f"{self.name}*{c:g}")

    def translated(self, shift):
        return self.with_vertices(self.vertices + np.asarray(shift, dtype=float))


def build_mesh(vertices, faces, *, level=None, name="mesh", repair=True):
    """Construct a :class:`Mesh`, optionally repairing face orientation first."""
    vertices = np.asarray(vertices, dtype=float)
    faces = np.asarray(faces, dtype=np.int64)
    if repair:
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ValidationError("faces must have shape (F, 3)")
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise ValidationError("face index out of range")
        nv = len(vertices)
        if not is_consistently_oriented(faces, nv) or _signed_volumes(vertices, faces).sum() <= 0:
            faces = repair_orientation(vertices, faces)
    return Mesh(vertices, faces, level=level, name=name)


def area(mesh: Mesh) -> float:
    return mesh.area


def enclosed_volume(mesh: Mesh) -> float:
    return mesh.enclosed_volume


def center_of_mass(mesh: Mesh) -> np.ndarray:
    return mesh.center_of_mass


def disjoint_union(a: Mesh, b: Mesh, name="union") -> Mesh:
    """Two meshes as one (disconnected) mesh."""
    return Mesh(
        np.vstack([a.vertices, b.vertices]),
        np.vstack([a.faces, b.faces + a.nv]),
        level=a.level,
        name=name,
    )
