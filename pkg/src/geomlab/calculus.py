"""Volume-normalized integrals and norms, position-vector diagnostics, distances.

Every integral uses the lumped vertex (or quadrature) weights, so identities
shared with :mod:`geomlab.spectral` cancel in exact arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .curvature import CurvatureField, generalized_hs, resolve_tensor, shape_operator
from .errors import InvalidArgument
from .surface.analytic import AnalyticHypersurface
from .surface.mesh import Mesh


def weights_of(measure):
    """Area weights of a mesh, analytic surface, curvature field or raw array."""
    if isinstance(measure, Mesh):
        return measure.vertex_areas
    if isinstance(measure, (AnalyticHypersurface, CurvatureField)):
        return measure.weights
    w = np.asarray(measure, dtype=float)
    if w.ndim != 1:
        raise InvalidArgument("weights must be one-dimensional")
    return w


def points_of(surface):
    if isinstance(surface, Mesh):
        return surface.vertices
    return surface.points


def _magnitude(field):
    f = np.asarray(field, dtype=float)
    return np.abs(f) if f.ndim == 1 else np.linalg.norm(f, axis=-1)


def integrate(field, measure) -> float:
    """``int f`` with lumped weights (vector fields integrate componentwise)."""
    w = weights_of(measure)
    return w @ np.asarray(field, dtype=float)


def mean(field, measure):
    w = weights_of(measure)
    return (w @ np.asarray(field, dtype=float)) / w.sum()


def lp_norm(field, p, measure) -> float:
    """``((1/V) int |f|^p)^(1/p)``; ``p = inf`` gives the pointwise max.

    Vector fields are measured by their Euclidean magnitude.
    """
    if not p >= 1:
        raise InvalidArgument(f"norm exponent must be >= 1, got {p!r}")
    a = _magnitude(field)
    if np.isinf(p):
        return float(a.max())
    w = weights_of(measure)
    m = a.max()
    if m == 0:
        return 0.0
    # factor out the max so large p does not overflow
    return float(m * ((w @ (a / m) ** p) / w.sum()) ** (1.0 / p))


def center_of_mass(surface):
    X = points_of(surface)
    w = weights_of(surface)
    return (w @ X) / w.sum()


def recentered(surface):
    """Positions minus the center of mass, and the shift that was removed."""
    c = center_of_mass(surface)
    return points_of(surface) - c, c


# -- Hsiung-Minkowski -------------------------------------------------------


@dataclass(frozen=True)
class HMResidual:
    """Normalized ``(1/V)|int <X, H_T> + tr T|`` by two routes.

    ``weak`` uses the discrete ``H_T = -M^{-1} K_T X``; ``algebraic`` uses
    ``H_T = -tr(T B) nu`` from the curvature estimate. ``scale`` is
    ``(1/V) int tr T`` for relative comparisons.
    """

    weak: float
    algebraic: float
    scale: float

    @property
    def weak_relative(self):
        return self.weak / abs(self.scale)

    @property
    def algebraic_relative(self):
        return self.algebraic / abs(self.scale)


def hsiung_minkowski_residual(mesh, T=None, curvature: Optional[CurvatureField] = None, pair=None) -> HMResidual:
    from .spectral import assemble, discrete_HT

    field = curvature if curvature is not None else shape_operator(mesh)
    Tf = resolve_tensor(field, T)
    w = field.weights
    V = w.sum()
    X = points_of(mesh)
    trT = w @ Tf.trace()
    H_alg = generalized_hs(field, Tf)
    alg = abs(w @ np.einsum("ij,ij->i", X, H_alg) + trT) / V
    if isinstance(mesh, Mesh):
        pair = pair if pair is not None else assemble(mesh, Tf, curvature=field)
        H_weak = discrete_HT(pair, mesh).vectors
        weak = abs(w @ np.einsum("ij,ij->i", X, H_weak) + trT) / V
    else:
        weak = float("nan")
    return HMResidual(weak=float(weak), algebraic=float(alg), scale=float(trT / V))


# -- position vector ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TangentialPart:
    """``X^T = X - <X, nu> nu`` of the recentered position vector."""

    field: np.ndarray
    shift: np.ndarray
    l2: float
    linf: float


def tangential_part(surface, normals=None, curvature: Optional[CurvatureField] = None) -> TangentialPart:
    """Tangential part of ``X - Xbar``.

    Normals default to the curvature field's (fitted) normals for meshes and
    the exact normals for analytic surfaces.
    """
    X, c = recentered(surface)
    if normals is None:
        if isinstance(surface, Mesh):
            field = curvature if curvature is not None else shape_operator(surface)
            normals = field.normals
        else:
            normals = surface.normals
    nu = np.asarray(normals, dtype=float)
    XT = X - np.einsum("ij,ij->i", X, nu)[:, None] * nu
    return TangentialPart(field=XT, shift=c, l2=lp_norm(XT, 2, surface), linf=lp_norm(XT, np.inf, surface))


def radial_deviation(surface, r: float, center=None) -> float:
    """``max | |X - c| - r |`` over the sample points (c defaults to Xbar)."""
    if not r > 0:
        raise InvalidArgument(f"radius must be positive, got {r!r}")
    c = center_of_mass(surface) if center is None else np.asarray(center, dtype=float)
    d = np.linalg.norm(points_of(surface) - c, axis=1)
    return float(np.abs(d - r).max())


# -- distances ---------------------------------------------------------------


def point_triangle_distance(p, a, b, c):
    """Euclidean distance from points p to triangles (a, b, c), all (N, 3).

    Closest-point classification over the seven Voronoi regions of the
    triangle, vectorized.
    """
    p, a, b, c = (np.asarray(x, dtype=float) for x in (p, a, b, c))
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = 1.0 / (va + vb + vc)
        v = vb * denom
        w = vc * denom
        q = a + ab * v[:, None] + ac * w[:, None]
        # edge regions
        t_ab = d1 / (d1 - d3)
        t_ac = d2 / (d2 - d6)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
    r_a = (d1 <= 0) & (d2 <= 0)
    r_b = (d3 >= 0) & (d4 <= d3)
    r_c = (d6 >= 0) & (d5 <= d6)
    r_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0) & ~r_a & ~r_b
    r_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0) & ~r_a & ~r_c
    r_bc = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0) & ~r_b & ~r_c
    q = np.where(r_bc[:, None], b + (c - b) * t_bc[:, None], q)
    q = np.where(r_ac[:, None], a + ac * t_ac[:, None], q)
    q = np.where(r_ab[:, None], a + ab * t_ab[:, None], q)
    q = np.where(r_c[:, None], c, q)
    q = np.where(r_b[:, None], b, q)
    q = np.where(r_a[:, None], a, q)
    return np.linalg.norm(p - q, axis=1)


def fibonacci_sphere(count: int):
    """Near-uniform unit vectors on S^2 (golden-angle spiral)."""
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    rho = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def sphere_sample_count(mesh: Mesh, r: float, oversample: float = 1.0) -> int:
    """Sample size whose spacing on S(c, r) matches half the mesh edge length."""
    h = 0.5 * mesh.mean_edge_length / oversample
    return max(64, int(np.ceil(4.0 * np.pi * r * r / (h * h))))


def distance_to_mesh(points, mesh: Mesh, candidates: int = 12):
    """Distance from points to the triangle set, via nearest-centroid candidates."""
    P = mesh.vertices[mesh.faces]
    tree = cKDTree(P.mean(axis=1))
    k = min(candidates, mesh.nf)
    _, idx = tree.query(points, k=k)
    idx = idx.reshape(len(points), k)
    best = np.full(len(points), np.inf)
    for j in range(k):
        f = idx[:, j]
        d = point_triangle_distance(points, P[f, 0], P[f, 1], P[f, 2])
        best = np.minimum(best, d)
    return best


def hausdorff_to_sphere(mesh: Mesh, center, r: float, samples: Optional[int] = None) -> float:
    """Hausdorff distance between the polyhedral surface and the sphere S(center, r).

    The mesh-to-sphere term is exact (the farthest point of a triangle from
    the sphere is a vertex or its point nearest the center). The
    sphere-to-mesh term is the max over a Fibonacci sample of the sphere.
    """
    if not r > 0:
        raise InvalidArgument(f"radius must be positive, got {r!r}")
    c = np.asarray(center, dtype=float)
    X = mesh.vertices
    outer = np.linalg.norm(X - c, axis=1).max() - r
    P = X[mesh.faces]
    cc = np.broadcast_to(c, (mesh.nf, 3))
    inner = r - point_triangle_distance(cc, P[:, 0], P[:, 1], P[:, 2]).min()
    n = samples if samples is not None else sphere_sample_count(mesh, r)
    S = c + r * fibonacci_sphere(n)
    back = distance_to_mesh(S, mesh).max()
    return float(max(outer, inner, back, 0.0))


# -- Sobolev ratio -----------------------------------------------------------


def pl_gradient_norm_integral(mesh: Mesh, f) -> float:
    """``int |grad f|`` for the piecewise-linear interpolant of vertex values."""
    from .spectral import hat_gradients

    G = hat_gradients(mesh)
    g = np.einsum("fa,fai->fi", np.asarray(f, dtype=float)[mesh.faces], G)
    return float(mesh.face_areas @ np.linalg.norm(g, axis=1))


def sobolev_ratio(mesh: Mesh, f=None, curvature: Optional[CurvatureField] = None) -> float:
    """``(int f^{n/(n-1)})^{(n-1)/n} / int (|grad f| + |H| f)`` with unnormalized integrals.

    ``f`` defaults to the constant 1. ``H`` is the normalized mean
    curvature ``H_1``.
    """
    field = curvature if curvature is not None else shape_operator(mesh)
    n = field.n
    f = np.ones(mesh.nv) if f is None else np.asarray(f, dtype=float)
    if f.shape != (mesh.nv,):
        raise InvalidArgument("f must have one value per vertex")
    if not np.all(f > 0):
        raise InvalidArgument("Sobolev ratio needs a strictly positive function")
    w = field.weights
    num = (w @ f ** (n / (n - 1.0))) ** ((n - 1.0) / n)
    den = pl_gradient_norm_integral(mesh, f) + w @ (np.abs(field.mean_curvature) * f)
    return float(num / den)


def volume_lower_bound(K: float, mesh: Mesh, curvature: Optional[CurvatureField] = None) -> float:
    """``1 / (K ||H||_inf)^n``: the volume bound implied by a Sobolev constant K."""
    field = curvature if curvature is not None else shape_operator(mesh)
    Hinf = np.abs(field.mean_curvature).max()
    return float(1.0 / (K * Hinf) ** field.n)
