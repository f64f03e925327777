"""Second fundamental form and the symmetric-function curvatures built from it.

Sign convention: normals point outward and the shape operator is positive
on round spheres (``kappa_i = 1/rho``, ``H_r = rho**-r``). With it the
generalized mean curvature vector of a symmetric tensor S is
``H_S = -tr(S B) nu``; every quantity that is odd in B (H, H_S, H_{2k+1})
flips sign under the opposite convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Union

import numpy as np
from scipy import sparse

from .errors import EstimationError, InvalidArgument
from .surface.analytic import AnalyticHypersurface, tangent_frames
from .surface.mesh import Mesh

FIT_RCOND = 1e-10
FIT_ITERATIONS = 2
JET_DEGREE = 4


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CurvatureField:
    """Per-point second fundamental form with its frame and weights.

    ``shape_operator[i]`` is the symmetric n x n matrix of B at point i in
    the orthonormal tangent frame ``frames[i]`` (columns in R^(n+1)).
    ``principal`` holds the eigenvalues sorted ascending.
    """

    shape_operator: np.ndarray
    principal: np.ndarray
    normals: np.ndarray
    frames: np.ndarray
    weights: np.ndarray
    points: np.ndarray
    source: str = "mesh"

    @property
    def n(self):
        return self.shape_operator.shape[1]

    @property
    def npoints(self):
        return self.shape_operator.shape[0]

    @property
    def area(self):
        return float(self.weights.sum())

    def ambient(self, tensors):
        """Lift frame tensors (N, n, n) to ambient tangential tensors (N, n+1, n+1)."""
        F = self.frames
        return np.einsum("nik,nkl,njl->nij", F, tensors, F)

    def integrate(self, values):
        return float(self.weights @ np.asarray(values, dtype=float))

    @property
    def mean_curvature(self):
        return self.principal.mean(axis=1)

    @property
    def second_fundamental_norm_sq(self):
        return np.einsum("nij,nij->n", self.shape_operator, self.shape_operator)


@dataclass(frozen=True, eq=False)
class NewtonTensorField:
    """Newton tensor ``T_r`` per point, in the frames of its CurvatureField."""

    order: int
    tensors: np.ndarray
    field: CurvatureField

    @property
    def n(self):
        return self.tensors.shape[1]

    def trace(self):
        return np.einsum("nii->n", self.tensors)

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.tensors)

    def is_positive_definite(self, rtol=0.0):
        ev = self.eigenvalues()
        scale = np.abs(ev).max() if ev.size else 1.0
        return bool(np.all(ev > rtol * scale))

    def ambient(self):
        return self.field.ambient(self.tensors)

    @property
    def label(self):
        return "id" if self.order == 0 else f"T{self.order}"


TensorLike = Union[str, NewtonTensorField, None]


def _finish(B, normals, frames, weights, points, source):
    B = 0.5 * (B + np.swapaxes(B, 1, 2))
    kappa = np.linalg.eigvalsh(B)
    return CurvatureField(
        shape_operator=_readonly(B),
        principal=_readonly(kappa),
        normals=_readonly(normals),
        frames=_readonly(frames),
        weights=_readonly(np.asarray(weights, dtype=float)),
        points=_readonly(np.asarray(points, dtype=float)),
        source=source,
    )


def two_ring_pairs(mesh: Mesh):
    """(center, neighbour) index pairs of the closed 2-ring, centre excluded."""
    A = mesh.adjacency.astype(np.int8) + sparse.identity(mesh.nv, dtype=np.int8, format="csr")
    A2 = (A @ A).tocoo()
    keep = A2.row != A2.col
    order = np.lexsort((A2.col[keep], A2.row[keep]))
    return A2.row[keep][order], A2.col[keep][order]


def _monomials(x, y, degree):
    # ordered so that the first five columns are x^2, xy, y^2, x, y
    xp = [np.ones_like(x), x]
    yp = [np.ones_like(y), y]
    for _ in range(2, degree + 1):
        xp.append(xp[-1] * x)
        yp.append(yp[-1] * y)
    cols = [xp[2], x * y, yp[2], x, y]
    for d in range(3, degree + 1):
        cols.extend(xp[d - k] * yp[k] for k in range(d + 1))
    return np.stack(cols, axis=1)


def _jet_fit(mesh, rows, cols, normals, degree):
    """Least-squares height function over the 2-ring in the tangent plane.

    Returns the frames, the gradient (d, e), the Hessian and a mask of
    vertices whose normal equations were numerically rank deficient.
    """
    V = mesh.nv
    X = mesh.vertices
    E = tangent_frames(normals)
    e1, e2 = E[:, :, 0], E[:, :, 1]
    d = X[cols] - X[rows]
    x = np.einsum("ij,ij->i", d, e1[rows])
    y = np.einsum("ij,ij->i", d, e2[rows])
    z = np.einsum("ij,ij->i", d, normals[rows])
    # per-vertex length scale keeps the normal equations well conditioned
    s = np.sqrt(np.bincount(rows, weights=x * x + y * y, minlength=V) / np.bincount(rows, minlength=V))
    sr = s[rows]
    x, y, z = x / sr, y / sr, z / sr
    D = _monomials(x, y, degree)
    # rows are sorted, so pad each vertex's neighbourhood into a dense block
    counts = np.bincount(rows, minlength=V)
    start = np.concatenate([[0], np.cumsum(counts)[:-1]])
    slot = np.arange(len(rows)) - start[rows]
    Dp = np.zeros((V, counts.max(), D.shape[1]))
    zp = np.zeros((V, counts.max()))
    Dp[rows, slot] = D
    zp[rows, slot] = z
    DpT = Dp.transpose(0, 2, 1)
    AtA = DpT @ Dp
    Atz = (DpT @ zp[:, :, None])[:, :, 0]
    ev = np.linalg.eigvalsh(AtA)
    bad = ev[:, 0] <= FIT_RCOND * ev[:, -1]
    AtA[bad] = np.eye(AtA.shape[1])
    coef = np.linalg.solve(AtA, Atz[:, :, None])[:, :, 0]
    grad = coef[:, 3:5]
    hess = np.stack(
        [np.stack([2 * coef[:, 0], coef[:, 1]], axis=1), np.stack([coef[:, 1], 2 * coef[:, 2]], axis=1)],
        axis=1,
    ) / s[:, None, None]
    return E, grad, hess, bad


def _fit(mesh, rows, cols, normals):
    E, g, hess, bad = _jet_fit(mesh, rows, cols, normals, JET_DEGREE)
    if np.any(bad):
        # sparse 2-rings cannot support the quartic jet; use the quadric there
        E2, g2, hess2, bad2 = _jet_fit(mesh, rows, cols, normals, 2)
        if np.any(bad & bad2):
            v = int(np.argmax(bad & bad2))
            raise EstimationError(f"rank-deficient quadric fit at vertex {v} (colinear neighbourhood)", vertex=v)
        g[bad], hess[bad] = g2[bad], hess2[bad]
    return E, g, hess


def _mesh_shape_operator(mesh: Mesh) -> CurvatureField:
    rows, cols = two_ring_pairs(mesh)
    normals = np.array(mesh.vertex_normals)
    for _ in range(FIT_ITERATIONS):
        E, g, hess = _fit(mesh, rows, cols, normals)
        nu = normals - g[:, 0:1] * E[:, :, 0] - g[:, 1:2] * E[:, :, 1]
        normals = nu / np.linalg.norm(nu, axis=1)[:, None]
    E, g, hess = _fit(mesh, rows, cols, normals)
    # Weingarten map of the fitted graph at the origin in an orthonormal frame
    q = np.sqrt(1.0 + np.einsum("ij,ij->i", g, g))
    I = np.eye(2)[None] + g[:, :, None] * g[:, None, :]
    w, U = np.linalg.eigh(I)
    I_isqrt = np.einsum("nik,nk,njk->nij", U, w ** -0.5, U)
    B = -np.einsum("nik,nkl,nlj->nij", I_isqrt, hess / q[:, None, None], I_isqrt)
    t1 = E[:, :, 0] + g[:, 0:1] * normals
    t2 = E[:, :, 1] + g[:, 1:2] * normals
    frames = np.einsum("nik,nkj->nij", np.stack([t1, t2], axis=2), I_isqrt)
    nu = normals - g[:, 0:1] * E[:, :, 0] - g[:, 1:2] * E[:, :, 1]
    nu /= q[:, None]
    return _finish(B, nu, frames, mesh.vertex_areas, mesh.vertices, "mesh")


def shape_operator(surface) -> CurvatureField:
    """Estimate (mesh) or evaluate (analytic surface) the shape operator.

    For meshes the operator comes from a least-squares height-function fit
    over the 2-ring of each vertex in its estimated tangent plane. The fit
    is a full quartic jet, falling back to a quadric where the 2-ring is too
    small; the normal is re-estimated from the fitted gradient twice before
    the final fit.

    Raises
    ------
    EstimationError
        If a 2-ring is too degenerate to determine a quadric.
    """
    if isinstance(surface, Mesh):
        return _mesh_shape_operator(surface)
    if isinstance(surface, AnalyticHypersurface):
        return _finish(
            np.array(surface.shape_operator),
            surface.normals,
            surface.frames,
            surface.weights,
            surface.points,
            "analytic",
        )
    raise InvalidArgument(f"cannot compute curvature of {type(surface).__name__}")


# -- symmetric functions ---------------------------------------------------


def elementary_symmetric(kappa, r: int):
    """r-th elementary symmetric polynomial of the last axis of ``kappa``.

    Uses the one-pass recurrence ``e_k <- e_k + x e_{k-1}`` that builds the
    coefficients of ``prod(1 + x_i t)``; ``S_0 = 1`` and ``S_{n+1} = 0``.
    """
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    if not isinstance(r, (int, np.integer)) or not 0 <= r <= n + 1:
        raise InvalidArgument(f"order r must be in [0, {n + 1}], got {r!r}")
    if r == n + 1:
        return np.zeros(kappa.shape[:-1])
    e = [np.ones(kappa.shape[:-1])] + [np.zeros(kappa.shape[:-1]) for _ in range(r)]
    for i in range(n):
        x = kappa[..., i]
        for k in range(min(i + 1, r), 0, -1):
            e[k] = e[k] + x * e[k - 1]
    return e[r]


def all_elementary_symmetric(kappa):
    """``S_0 .. S_{n+1}`` stacked along a new last axis."""
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    e = np.zeros(kappa.shape[:-1] + (n + 2,))
    e[..., 0] = 1.0
    for i in range(n):
        x = kappa[..., i]
        for k in range(i + 1, 0, -1):
            e[..., k] = e[..., k] + x * e[..., k - 1]
    return e


def higher_mean_curvatures(kappa):
    """``H_0 .. H_{n+1}`` from principal curvatures (``H_{n+1} = 0``)."""
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    S = all_elementary_symmetric(kappa)
    norm = np.array([comb(n, r) for r in range(n + 1)] + [1], dtype=float)
    return S / norm


def mean_curvature_hr(field: CurvatureField, r: int):
    """Pointwise ``H_r = S_r(kappa) / binom(n, r)``."""
    n = field.n
    if not isinstance(r, (int, np.integer)) or not 0 <= r <= n + 1:
        raise InvalidArgument(f"order r must be in [0, {n}], got {r!r}")
    if r == n + 1:
        return np.zeros(field.npoints)
    return elementary_symmetric(field.principal, r) / comb(n, r)


def c_of_r(n: int, r: int) -> int:
    """``c(r) = (n - r) binom(n, r)``, the trace factor of ``T_r``."""
    if not 0 <= r <= n:
        raise InvalidArgument(f"c(r) needs 0 <= r <= n, got r={r}, n={n}")
    return (n - r) * comb(n, r)


def newton_tensors_from_matrix(B, r: int):
    """Newton tensor ``T_r`` of symmetric matrices ``B`` (..., n, n).

    ``T_0 = Id``, ``T_k = S_k Id - B T_{k-1}`` with ``S_k`` from the
    eigenvalues of B; symmetrized after every step.
    """
    B = np.asarray(B, dtype=float)
    n = B.shape[-1]
    if not 0 <= r <= n - 1:
        raise InvalidArgument(f"Newton tensor order must be in [0, {n - 1}], got {r!r}")
    S = all_elementary_symmetric(np.linalg.eigvalsh(B))
    eye = np.broadcast_to(np.eye(n), B.shape)
    T = np.array(eye)
    for k in range(1, r + 1):
        T = S[..., k, None, None] * eye - B @ T
        T = 0.5 * (T + np.swapaxes(T, -1, -2))
    return T


def newton_tensor(field: CurvatureField, r: int) -> NewtonTensorField:
    if not isinstance(r, (int, np.integer)) or not 0 <= r <= field.n - 1:
        raise InvalidArgument(f"Newton tensor order must be in [0, {field.n - 1}], got {r!r}")
    T = newton_tensors_from_matrix(field.shape_operator, int(r))
    return NewtonTensorField(order=int(r), tensors=_readonly(T), field=field)


def identity_tensor(field: CurvatureField) -> NewtonTensorField:
    return newton_tensor(field, 0)


def resolve_tensor(field: CurvatureField, spec: TensorLike) -> NewtonTensorField:
    """Accept ``None``/``"id"``, ``"t<r>"``/``"tr<r>"`` or an existing tensor field."""
    if spec is None:
        return identity_tensor(field)
    if isinstance(spec, NewtonTensorField):
        return spec
    if isinstance(spec, (int, np.integer)):
        return newton_tensor(field, int(spec))
    s = str(spec).strip().lower()
    if s in ("id", "identity", "t0", "tr0"):
        return identity_tensor(field)
    for prefix in ("tr", "t"):
        if s.startswith(prefix) and s[len(prefix):].isdigit():
            return newton_tensor(field, int(s[len(prefix):]))
    raise InvalidArgument(f"unknown tensor selector {spec!r}; use 'id' or 't<r>'")


def custom_tensor(field: CurvatureField, tensors, label="custom") -> NewtonTensorField:
    """Wrap arbitrary per-point frame tensors; symmetry is checked by consumers."""
    t = np.asarray(tensors, dtype=float)
    if t.shape != field.shape_operator.shape:
        raise InvalidArgument(f"custom tensor must have shape {field.shape_operator.shape}")
    tf = NewtonTensorField(order=-1, tensors=_readonly(t), field=field)
    object.__setattr__(tf, "_label", label)
    return tf


def tensor_label(T: NewtonTensorField) -> str:
    return getattr(T, "_label", None) or T.label


def trace_sb(field: CurvatureField, S: NewtonTensorField):
    return np.einsum("nij,nji->n", S.tensors, field.shape_operator)


def generalized_hs(field: CurvatureField, S: TensorLike = None):
    """Algebraic ``H_S = -tr(S B) nu``, shape (N, n+1).

    For ``S = T_r`` this is ``-c(r) H_{r+1} nu``; sign-sensitive (see module
    docstring).
    """
    S = resolve_tensor(field, S)
    return -trace_sb(field, S)[:, None] * field.normals


# -- Newton-Maclaurin inequalities ----------------------------------------


@dataclass(frozen=True)
class MaclaurinReport:
    """Outcome of the Newton-Maclaurin chain over a batch of spectra.

    ``newton_ok`` covers ``H_r H_{r+2} <= H_{r+1}^2`` for all r, which holds
    for every real spectrum. For each order r the root chain
    ``H_{r+1}^{1/(r+1)} <= ... <= H_1`` and ``H_{r+2} <= H_1 H_{r+1}`` are
    asserted only at points with ``H_1, ..., H_{r+1} > 0``;
    ``chain_checked[r]`` counts those points. Violations are relative to the
    magnitude of the compared terms.
    """

    npoints: int
    newton_ok: bool
    chain_ok: bool
    chain_checked: tuple
    max_violation: float
    max_equality_gap: float
    tol: float

    @property
    def ok(self):
        return self.newton_ok and self.chain_ok


def _compare(lhs, rhs):
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), np.finfo(float).tiny)
    return np.maximum(lhs - rhs, 0.0) / scale, np.abs(lhs - rhs) / scale


def maclaurin_check(kappa, tol: float = 1e-12) -> MaclaurinReport:
    """Check the Newton-Maclaurin inequalities for one spectrum or a batch (..., n)."""
    kappa = np.asarray(kappa, dtype=float)
    n = kappa.shape[-1]
    kappa = kappa.reshape(-1, n)
    H = higher_mean_curvatures(kappa)
    newton_v = np.zeros(len(kappa))
    chain_v = np.zeros(len(kappa))
    gap = np.zeros(len(kappa))
    for r in range(n):
        v, g = _compare(H[:, r] * H[:, r + 2], H[:, r + 1] ** 2)
        newton_v = np.maximum(newton_v, v)
        if r + 2 <= n:
            gap = np.maximum(gap, g)
    checked = []
    for r in range(n):
        gate = np.all(H[:, 1:r + 2] > 0, axis=1)
        checked.append(int(gate.sum()))
        if not gate.any():
            continue
        Hg = H[gate]
        worst = np.zeros(len(Hg))
        for s in range(1, r + 1):
            v, g = _compare(Hg[:, s + 1] ** (1.0 / (s + 1)), Hg[:, s] ** (1.0 / s))
            worst = np.maximum(worst, v)
            gap[gate] = np.maximum(gap[gate], g)
        v, _ = _compare(Hg[:, r + 2], Hg[:, 1] * Hg[:, r + 1])
        worst = np.maximum(worst, v)
        chain_v[gate] = np.maximum(chain_v[gate], worst)
    return MaclaurinReport(
        npoints=len(kappa),
        newton_ok=bool(newton_v.max() <= tol),
        chain_ok=bool(chain_v.max() <= tol),
        chain_checked=tuple(checked),
        max_violation=float(max(newton_v.max(), chain_v.max())),
        max_equality_gap=float(gap.max()),
        tol=tol,
    )
