"""Quadrature-sampled parametric hypersurfaces with exact curvature.

Every surface is parametrized over the unit sphere S^n (n in {2, 3}). A
tensor-product Gauss grid on S^n integrates polynomials in the coordinates
exactly, so integrals of smooth quantities over ellipsoids converge
spectrally in the grid resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import roots_chebyu, roots_legendre

from ..errors import InvalidArgument


def sphere_quadrature(n: int, resolution: int):
    """Nodes on S^n and positive weights summing to the area of S^n.

    n = 2 uses Gauss-Legendre in ``cos(theta)`` times a uniform azimuth
    rule; n = 3 prepends a Gauss-Chebyshev (second kind) rule in
    ``cos(chi)`` for the weight ``sin(chi)**2``.
    """
    if n not in (2, 3):
        raise InvalidArgument(f"analytic backend supports n in {{2, 3}}, got n={n}")
    if resolution < 2:
        raise InvalidArgument("grid resolution must be >= 2")
    x, wx = roots_legendre(resolution)
    nphi = 2 * resolution
    phi = 2.0 * np.pi * (np.arange(nphi) + 0.5) / nphi
    s = np.sqrt(1.0 - x ** 2)
    u2 = np.stack(
        [
            (s[:, None] * np.cos(phi)[None, :]).ravel(),
            (s[:, None] * np.sin(phi)[None, :]).ravel(),
            np.repeat(x, nphi),
        ],
        axis=1,
    )
    w2 = np.repeat(wx, nphi) * (2.0 * np.pi / nphi)
    if n == 2:
        return u2, w2
    y, wy = roots_chebyu(resolution)
    # roots_chebyu weights integrate against sqrt(1 - y^2) on [-1, 1]
    sy = np.sqrt(1.0 - y ** 2)
    u = np.concatenate(
        [np.repeat(sy, len(u2))[:, None] * np.tile(u2, (resolution, 1)), np.repeat(y, len(u2))[:, None]],
        axis=1,
    )
    w = np.repeat(wy, len(w2)) * np.tile(w2, resolution)
    return u, w


def tangent_frames(normals):
    """Orthonormal tangent frames, shape (N, n+1, n), via Householder reflections."""
    nu = np.asarray(normals, dtype=float)
    N, d = nu.shape
    k = np.argmax(np.abs(nu), axis=1)
    s = np.sign(nu[np.arange(N), k])
    v = nu.copy()
    v[np.arange(N), k] += s
    H = np.eye(d)[None] - 2.0 * v[:, :, None] * v[:, None, :] / np.einsum("ij,ij->i", v, v)[:, None, None]
    # H e_k = -s nu; the remaining columns span the tangent space
    cols = np.ones((N, d), dtype=bool)
    cols[np.arange(N), k] = False
    frames = H.transpose(0, 2, 1)[cols].reshape(N, d - 1, d).transpose(0, 2, 1)
    return frames


@dataclass(frozen=True, eq=False)
class AnalyticHypersurface:
    """Sampled hypersurface in R^(n+1) with per-node exact geometry.

    Attributes
    ----------
    kind : str
        ``"sphere"``, ``"ellipsoid"`` or ``"radial-graph"``.
    params : dict
        Construction parameters (axes, amplitude, ...).
    nodes : ndarray, shape (N, n+1)
        Parameter nodes on the unit sphere S^n.
    points : ndarray, shape (N, n+1)
        Embedded positions X.
    weights : ndarray, shape (N,)
        Area weights (quadrature weight times area element).
    normals : ndarray, shape (N, n+1)
        Outward unit normals.
    frames : ndarray, shape (N, n+1, n)
        Orthonormal tangent frames.
    shape_operator : ndarray, shape (N, n, n)
        Second fundamental form in the tangent frame, positive on spheres.
    sphere_weights : ndarray, shape (N,)
        Quadrature weights on S^n itself.
    """

    kind: str
    params: dict
    nodes: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    frames: np.ndarray
    shape_operator: np.ndarray
    sphere_weights: np.ndarray
    resolution: int
    n: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "n", self.points.shape[1] - 1)
        for name in ("nodes", "points", "weights", "normals", "frames", "shape_operator", "sphere_weights"):
            getattr(self, name).setflags(write=False)

    @property
    def area(self):
        return float(self.weights.sum())

    @property
    def vertex_areas(self):
        return self.weights

    @property
    def center_of_mass(self):
        return self.weights @ self.points / self.weights.sum()

    @property
    def name(self):
        extra = ",".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.kind}(n={self.n};{extra};N={self.resolution})"


def gen_analytic_ellipsoid(axes, resolution: int = 48) -> AnalyticHypersurface:
    """Ellipsoid with semi-axes ``a_1..a_{n+1}`` sampled on the S^n Gauss grid.

    Parametrized as ``X = a * u`` for ``u`` on S^n. The area element is
    ``prod(a) |u / a|``, the normal is ``(u/a)/|u/a|`` and the shape
    operator is ``E^T diag(a**-2) E / |X / a**2|`` in the tangent frame E.
    """
    a = np.asarray(axes, dtype=float)
    if a.ndim != 1 or len(a) - 1 not in (2, 3):
        raise InvalidArgument(f"analytic ellipsoid needs n+1 in {{3, 4}} axes, got {len(np.atleast_1d(a))}")
    if not np.all(a > 0):
        raise InvalidArgument("ellipsoid semi-axes must be positive")
    n = len(a) - 1
    u, w = sphere_quadrature(n, resolution)
    x = u * a
    g = u / a
    gn = np.linalg.norm(g, axis=1)
    nu = g / gn[:, None]
    weights = w * np.prod(a) * gn
    E = tangent_frames(nu)
    # gradient of sum(x^2/a^2) is 2 x/a^2, Hessian 2 diag(a^-2)
    grad = np.linalg.norm(x / a ** 2, axis=1)
    B = np.einsum("nik,i,nil->nkl", E, a ** -2.0, E) / grad[:, None, None]
    B = 0.5 * (B + B.transpose(0, 2, 1))
    kind = "sphere" if np.allclose(a, a[0], rtol=0, atol=0) else "ellipsoid"
    return AnalyticHypersurface(
        kind=kind,
        params={"axes": tuple(float(t) for t in a)},
        nodes=u,
        points=x,
        weights=weights,
        normals=nu,
        frames=E,
        shape_operator=B,
        sphere_weights=w,
        resolution=resolution,
    )


def gen_analytic_sphere(n: int = 2, radius: float = 1.0, resolution: int = 48) -> AnalyticHypersurface:
    if not radius > 0:
        raise InvalidArgument("radius must be positive")
    return gen_analytic_ellipsoid([radius] * (n + 1), resolution)


def gen_analytic_radial_graph(
    rho: Callable[[np.ndarray], np.ndarray],
    resolution: int = 48,
    h: float = 2e-4,
    params: Optional[dict] = None,
) -> AnalyticHypersurface:
    """Star-shaped surface ``X(u) = rho(u) u`` over S^2.

    Geometry comes from central differences of ``X`` in the geodesic-normal
    chart ``s -> normalize(u + s1 e1 + s2 e2)``, which is isometric to first
    order at ``s = 0``; ``rho`` must be smooth and positive.
    """
    u, w = sphere_quadrature(2, resolution)
    E0 = tangent_frames(u)
    e1, e2 = E0[:, :, 0], E0[:, :, 1]

    def X(s1, s2):
        p = u + s1 * e1 + s2 * e2
        p = p / np.linalg.norm(p, axis=1)[:, None]
        return rho(p)[:, None] * p

    X0 = X(0.0, 0.0)
    Xp1, Xm1 = X(h, 0.0), X(-h, 0.0)
    Xp2, Xm2 = X(0.0, h), X(0.0, -h)
    X1 = (Xp1 - Xm1) / (2 * h)
    X2 = (Xp2 - Xm2) / (2 * h)
    X11 = (Xp1 - 2 * X0 + Xm1) / h ** 2
    X22 = (Xp2 - 2 * X0 + Xm2) / h ** 2
    X12 = (X(h, h) - X(h, -h) - X(-h, h) + X(-h, -h)) / (4 * h ** 2)
    c = np.cross(X1, X2)
    jac = np.linalg.norm(c, axis=1)
    nu = c / jac[:, None]
    flip = np.einsum("ij,ij->i", nu, u) < 0
    nu[flip] *= -1
    J = np.stack([X1, X2], axis=2)
    g = np.einsum("nik,nil->nkl", J, J)
    b = -np.stack(
        [
            np.stack([np.einsum("ij,ij->i", X11, nu), np.einsum("ij,ij->i", X12, nu)], axis=1),
            np.stack([np.einsum("ij,ij->i", X12, nu), np.einsum("ij,ij->i", X22, nu)], axis=1),
        ],
        axis=1,
    )
    evals, evecs = np.linalg.eigh(g)
    g_isqrt = np.einsum("nik,nk,njk->nij", evecs, evals ** -0.5, evecs)
    frames = np.einsum("nik,nkj->nij", J, g_isqrt)
    B = np.einsum("nik,nkl,nlj->nij", g_isqrt, b, g_isqrt)
    B = 0.5 * (B + B.transpose(0, 2, 1))
    return AnalyticHypersurface(
        kind="radial-graph",
        params=dict(params or {}),
        nodes=u,
        points=X0,
        weights=w * jac,
        normals=nu,
        frames=frames,
        shape_operator=B,
        sphere_weights=w,
        resolution=resolution,
    )


def gen_analytic_perturbed_sphere(t: float, lmax: int = 4, seed: int = 0, resolution: int = 48):
    """Analytic twin of :func:`~geomlab.surface.generate.perturbed_sphere`."""
    from .generate import HarmonicField

    phi = HarmonicField(lmax, seed)
    return gen_analytic_radial_graph(
        lambda p: 1.0 + t * phi(p),
        resolution=resolution,
        params={"t": t, "lmax": lmax, "seed": seed},
    )
