"""Jacobi form of the r-area functionals and the almost-stability deficit.

Conventions: variations are ``X_t = X + t f nu`` with the outward normal,
so ``d/dt int S_r = +(r+1) int f S_{r+1}`` (the sign flips for the inner
normal). The Jacobi form is

    J_r f = (r+1) [ int <T_r grad f, grad f>
                    + int (c(r+1) H_{r+2} - n c(r)/(r+1) H H_{r+1}) f^2 ],

with ``(r+1)`` multiplying the whole bracket. On the unit 2-sphere this is
``int |grad f|^2 - 2 int f^2 = int |grad f|^2 - |B|^2 f^2`` for r = 0; the
finite-difference check in :func:`variation_check` pins the sign and
normalization.
"""

from __future__ import annotations

from math import comb
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg as sla
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from .context import SurfaceContext
from .curvature import c_of_r, mean_curvature_hr
from .errors import HypothesisError, InvalidArgument, SolverError, StepError, ValidationError
from .spectral import DENSE_LIMIT, SEED
from .surface.generate import HarmonicField
from .surface.mesh import Mesh

CHAIN_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class JacobiForm:
    """``J_r(f) = f^T A f`` with ``A = (r+1)(K_{T_r} + M diag(potential))``."""

    r: int
    A: sparse.csr_matrix
    mass: np.ndarray
    potential: np.ndarray
    stiffness: sparse.csr_matrix

    def __call__(self, f):
        f = np.asarray(f, dtype=float)
        return float(f @ (self.A @ f))


def jacobi_potential(field, r: int):
    n = field.n
    H = mean_curvature_hr(field, 1)
    Hr1 = mean_curvature_hr(field, r + 1)
    Hr2 = mean_curvature_hr(field, r + 2) if r + 2 <= n else np.zeros_like(H)
    c_next = c_of_r(n, r + 1) if r + 1 <= n else 0
    return c_next * Hr2 - (n * c_of_r(n, r) / (r + 1.0)) * H * Hr1


def assemble_jacobi(mesh, r: int) -> JacobiForm:
    ctx = SurfaceContext.of(mesh)
    field = ctx.curvature
    if not isinstance(r, (int, np.integer)) or not 0 <= r <= field.n - 1:
        raise InvalidArgument(f"r must be in [0, {field.n - 1}], got {r!r}")
    P = ctx.pair(f"t{r}")
    pot = jacobi_potential(field, r)
    A = (r + 1.0) * (P.stiffness + sparse.diags(P.mass * pot))
    return JacobiForm(r=int(r), A=A.tocsr(), mass=P.mass, potential=pot, stiffness=P.stiffness)


def _constrained_lowest(A, W, m, k, sigma):
    """Lowest k eigenpairs of ``A x = mu W x`` subject to ``m . x = 0``."""
    N = A.shape[0]
    if N <= DENSE_LIMIT:
        # orthonormal basis of the constraint complement
        Q, _ = np.linalg.qr(np.column_stack([m, np.eye(N)[:, : N - 1]]))
        Z = Q[:, 1:]
        Ad = Z.T @ A.toarray() @ Z
        Wd = Z.T @ (W[:, None] * Z)
        vals, vecs = sla.eigh(Ad, Wd, subset_by_index=[0, k - 1])
        return vals, Z @ vecs
    Bd = sparse.bmat([[A - sigma * sparse.diags(W), m[:, None]], [m[None, :], None]], format="csc")
    lu = splu(Bd)

    def solve(b):
        return lu.solve(np.append(b, 0.0))[:N]

    op = LinearOperator((N, N), matvec=solve, dtype=float)
    # start vector must satisfy the constraint
    v0 = np.random.default_rng(SEED).standard_normal(N)
    v0 -= m * (m @ v0) / (m @ m)
    try:
        vals, vecs = eigsh(A, k=k, M=sparse.diags(W).tocsc(), sigma=sigma, OPinv=op, which="LM", v0=v0)
    except Exception as exc:  # ARPACK raises several unrelated types
        raise SolverError(f"constrained Jacobi eigensolve failed: {exc}", residual=float("inf")) from exc
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


@dataclass
class StabilityReport:
    r: int
    mu_min: float
    deficit: float
    positive: bool
    constancy: float
    lambda1: float
    chain_weighted_ok: bool
    chain_constant_lhs: float
    chain_constant_rhs: float
    chain_constant_applicable: bool
    chain_constant_ok: bool
    mesh: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def stability_deficit(mesh, r: int = 0, k: int = 3) -> StabilityReport:
    """``eps* = max(0, -mu_min)`` of ``J_r`` against ``int f^2 H_{r+1}^{(r+2)/(r+1)}``.

    Also evaluates the eigenvalue chain: for every mean-zero f,
    ``J_r f >= -eps* int f^2 H_{r+1}^a`` with the first ``L_r``
    eigenfunction gives
    ``lambda_1(L_r) >= (c(r) - eps*/(r+1)) int H_{r+1}^a f^2 / int f^2``
    wherever the Maclaurin bounds hold pointwise, and the constant-curvature
    form with the mean of ``H_{r+1}^a``, which is meaningful when ``H_{r+1}``
    is constant to 1%.

    Raises
    ------
    HypothesisError
        If ``H_{r+1} <= 0`` somewhere.
    """
    ctx = SurfaceContext.of(mesh)
    field = ctx.curvature
    J = assemble_jacobi(ctx, r)
    Hr1 = mean_curvature_hr(field, r + 1)
    if not np.all(Hr1 > 0):
        raise HypothesisError(f"H_{r + 1} must be positive everywhere (min {Hr1.min():.3g})")
    a = (r + 2.0) / (r + 1.0)
    Ha = Hr1 ** a
    W = J.mass * Ha
    m = J.mass
    # K_{T_r} is PSD here, so mu >= (r+1) min(pot / H^a); shift below that
    lb = (r + 1.0) * float(np.min(J.potential / Ha))
    sigma = lb - 0.1 * abs(lb) - 1e-3
    vals, _ = _constrained_lowest(J.A, W, m, k, sigma)
    mu = float(vals[0])
    eps = max(0.0, -mu)
    w = field.weights
    mean_h = w @ Hr1 / w.sum()
    spread = float(np.sqrt(w @ (Hr1 - mean_h) ** 2 / w.sum()) / mean_h)
    lam = ctx.lambda1(f"t{r}")
    f = ctx.first_eigenfunction(f"t{r}")
    cr = c_of_r(field.n, r)
    ff = float(m @ f ** 2)
    rhs_w = (cr - eps / (r + 1.0)) * float(m @ (Ha * f ** 2)) / ff
    rhs_c = (1.0 - eps / ((r + 1.0) * cr)) * cr * float(w @ Ha / w.sum())
    return StabilityReport(
        r=int(r),
        mu_min=mu,
        deficit=eps,
        positive=True,
        constancy=spread,
        lambda1=lam,
        chain_weighted_ok=bool(lam >= rhs_w - CHAIN_RTOL * abs(rhs_w)),
        chain_constant_lhs=lam,
        chain_constant_rhs=float(rhs_c),
        chain_constant_applicable=bool(spread < 0.01),
        chain_constant_ok=bool(lam >= rhs_c - CHAIN_RTOL * abs(rhs_c)),
        mesh=ctx.metadata(),
    )


# -- finite-difference variations ---------------------------------------------


def total_mean_curvature(mesh: Mesh) -> float:
    """``int S_1 = sum_e |e| theta_e`` (Steiner edge formula, theta = signed dihedral angle)."""
    f = mesh.faces
    he = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    face_of = np.tile(np.arange(mesh.nf), 3)
    nv = mesh.nv
    key = he[:, 0] * nv + he[:, 1]
    rev = he[:, 1] * nv + he[:, 0]
    order = np.argsort(key)
    twin = order[np.searchsorted(key[order], rev)]
    keep = he[:, 0] < he[:, 1]
    a, b = he[keep, 0], he[keep, 1]
    n1 = mesh.face_normals[face_of[keep]]
    n2 = mesh.face_normals[face_of[twin[keep]]]
    X = mesh.vertices
    e = X[b] - X[a]
    L = np.linalg.norm(e, axis=1)
    sin = np.einsum("ij,ij->i", np.cross(n1, n2), e / L[:, None])
    cos = np.clip(np.einsum("ij,ij->i", n1, n2), -1.0, 1.0)
    theta = np.arctan2(sin, cos)
    # sign: faces folding away from the outward normal (convex edge) give theta > 0
    return float(L @ theta)


def r_area(mesh: Mesh, r: int) -> float:
    """Discrete ``A_r = int S_r``: the area for r = 0, the Steiner edge sum for r = 1."""
    if r == 0:
        return float(mesh.area)
    if r == 1:
        return total_mean_curvature(mesh)
    raise InvalidArgument(f"discrete r-area is available for r in {{0, 1}} on surfaces, got {r}")


def smooth_test_function(mesh: Mesh, lmax: int = 3, seed: int = 3):
    """Smooth vertex function from low-degree harmonics, lumped-mean zero."""
    u = mesh.vertices - mesh.center_of_mass
    f = HarmonicField(lmax, seed)(u)
    return f - (mesh.vertex_areas @ f) / mesh.area


@dataclass
class VariationReport:
    r: int
    h: float
    dA: float
    dA_expected: float
    dA_scale: float
    dV: float
    dV_expected: float
    dV_scale: float
    order_A: float
    order_V: float
    second: Optional[float]
    jacobi: Optional[float]
    second_rel_error: Optional[float]

    @property
    def first_error_A(self):
        """``|dA - expected|`` relative to ``(r+1) int |f S_{r+1}|``."""
        return abs(self.dA - self.dA_expected) / self.dA_scale

    @property
    def first_error_V(self):
        """``|dV - int f|`` relative to ``int |f|``."""
        return abs(self.dV - self.dV_expected) / self.dV_scale

    def to_dict(self):
        d = asdict(self)
        d.update(first_error_A=self.first_error_A, first_error_V=self.first_error_V)
        return d


def _displaced(mesh, dX, t):
    try:
        return mesh.with_vertices(mesh.vertices + t * dX)
    except ValidationError as exc:
        raise StepError(f"displacement t={t:g} degenerates the mesh: {exc}") from exc


def _observed_order(D):
    """``log2 |D(h) - D(h/2)| / |D(h/2) - D(h/4)|`` with a round-off floor."""
    d1, d2 = abs(D[0] - D[1]), abs(D[1] - D[2])
    floor = 1e-13 * max(abs(D[2]), 1.0)
    if d2 <= floor:
        return float("inf") if d1 <= 4 * floor else 2.0
    return float(np.log2(d1 / d2))


def variation_check(mesh, r: int = 0, f=None, h: float = 1e-3, second: bool = True) -> VariationReport:
    """Finite-difference checks of the first and second variation formulas.

    First variations use central differences at steps h, h/2 and h/4; the
    observed order comes from their successive differences. The second
    variation of ``A_r - (r+1) mean(S_{r+1}) V`` is compared with ``J_r f``.

    Raises
    ------
    StepError
        If a displaced mesh fails validation.
    """
    ctx = SurfaceContext.of(mesh)
    m = ctx.mesh
    field = ctx.curvature
    f = smooth_test_function(m) if f is None else np.asarray(f, dtype=float)
    dX = f[:, None] * field.normals
    w = field.weights
    Sr1 = mean_curvature_hr(field, r + 1) * comb(field.n, r + 1)

    def A(t):
        return r_area(_displaced(m, dX, t), r)

    def V(t):
        return _displaced(m, dX, t).enclosed_volume

    D_A, D_V = [], []
    for s in (h, h / 2, h / 4):
        D_A.append((A(s) - A(-s)) / (2 * s))
        D_V.append((V(s) - V(-s)) / (2 * s))
    sec = jac = rel = None
    if second:
        lag = (r + 1.0) * float(w @ Sr1) / float(w.sum())

        def L(t):
            mt = _displaced(m, dX, t)
            return r_area(mt, r) - lag * mt.enclosed_volume

        sec = (L(h) - 2 * L(0.0) + L(-h)) / h ** 2
        jac = assemble_jacobi(ctx, r)(f)
        rel = abs(sec - jac) / abs(jac)
    return VariationReport(
        r=int(r),
        h=float(h),
        dA=float(D_A[-1]),
        dA_expected=float((r + 1) * (w @ (f * Sr1))),
        dA_scale=float((r + 1) * (w @ np.abs(f * Sr1))),
        dV=float(D_V[-1]),
        dV_expected=float(w @ f),
        dV_scale=float(w @ np.abs(f)),
        order_A=_observed_order(D_A),
        order_V=_observed_order(D_V),
        second=sec,
        jacobi=jac,
        second_rel_error=rel,
    )
