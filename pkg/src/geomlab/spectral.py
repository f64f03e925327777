"""Piecewise-linear Galerkin discretization of ``L_T u = -div(T grad u)``.

The stiffness ``K_T[a, b] = sum_f area_f <T_f grad phi_a, grad phi_b>`` uses
one constant tensor per face. Each vertex tensor is carried into the face
plane by the minimal rotation taking the vertex normal to the face normal
(trace preserving), and the three rotated tensors are averaged. The mass
matrix is lumped, ``M = diag(vertex_areas)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg as sla
from scipy import sparse
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from .curvature import CurvatureField, NewtonTensorField, resolve_tensor, shape_operator, tensor_label
from .errors import DegenerateSpectrumError, InvalidArgument, NotApplicable, SolverError
from .surface.mesh import Mesh

SEED = 0x5EED
MAX_K = 12
ZERO_THRESHOLD = 1e-6
# below this size a dense generalized eigensolve is cheaper and more robust
DENSE_LIMIT = 400
SYMMETRY_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class GalerkinPair:
    """Stiffness ``K_T`` and lumped mass of ``L_T`` on one mesh.

    ``elliptic`` is false when some vertex tensor is not positive definite;
    inequalities that need ellipticity refuse to certify in that case.
    """

    stiffness: sparse.csr_matrix
    mass: np.ndarray
    label: str
    order: int
    elliptic: bool
    mesh: Mesh

    @property
    def mass_matrix(self):
        return sparse.diags(self.mass, format="csr")

    @property
    def size(self):
        return len(self.mass)

    @property
    def lambda_ref(self):
        return float(self.stiffness.diagonal().sum() / self.mass.sum())

    def quadratic(self, f):
        f = np.asarray(f, dtype=float)
        return float(f @ (self.stiffness @ f))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Lowest generalized eigenpairs ``K v = lam M v`` with M-orthonormal vectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    threshold: float
    residuals: np.ndarray

    @property
    def k(self):
        return len(self.eigenvalues)

    @property
    def max_residual(self):
        return float(self.residuals.max()) if self.residuals.size else 0.0

    @property
    def kernel_dimension(self):
        return int(np.sum(self.eigenvalues < self.threshold))


def _rotations(a, b):
    """Minimal rotations R with ``R a = b`` for unit vectors (N, 3)."""
    v = np.cross(a, b)
    c = np.einsum("ij,ij->i", a, b)
    vx = np.zeros((len(a), 3, 3))
    vx[:, 0, 1], vx[:, 0, 2] = -v[:, 2], v[:, 1]
    vx[:, 1, 0], vx[:, 1, 2] = v[:, 2], -v[:, 0]
    vx[:, 2, 0], vx[:, 2, 1] = -v[:, 1], v[:, 0]
    return np.eye(3)[None] + vx + (vx @ vx) / (1.0 + c)[:, None, None]


def hat_gradients(mesh: Mesh):
    """Per-face gradients of the three hat functions, shape (F, 3, 3)."""
    P = mesh.vertices[mesh.faces]
    n = mesh.face_normals
    A2 = 2.0 * mesh.face_areas
    edges = np.stack([P[:, 2] - P[:, 1], P[:, 0] - P[:, 2], P[:, 1] - P[:, 0]], axis=1)
    return np.cross(n[:, None, :], edges) / A2[:, None, None]


def face_tensors(mesh: Mesh, T: NewtonTensorField):
    """Per-face tangential 3x3 coefficient tensors."""
    field = T.field
    amb = field.ambient(T.tensors)
    nf = mesh.face_normals
    out = np.zeros((mesh.nf, 3, 3))
    for k in range(3):
        v = mesh.faces[:, k]
        R = _rotations(field.normals[v], nf)
        out += R @ amb[v] @ R.transpose(0, 2, 1)
    out /= 3.0
    P = np.eye(3)[None] - nf[:, :, None] * nf[:, None, :]
    out = P @ out @ P
    return 0.5 * (out + out.transpose(0, 2, 1))


def _check_symmetric(T: NewtonTensorField):
    t = T.tensors
    asym = np.abs(t - np.swapaxes(t, 1, 2)).max()
    scale = max(np.abs(t).max(), np.finfo(float).tiny)
    if asym > SYMMETRY_RTOL * scale:
        raise InvalidArgument(f"coefficient tensor {tensor_label(T)} is not symmetric (asymmetry {asym:.3g})")


def assemble(
    mesh: Mesh,
    T=None,
    curvature: Optional[CurvatureField] = None,
) -> GalerkinPair:
    """Assemble the Galerkin pair of ``L_T`` on ``mesh``.

    Parameters
    ----------
    mesh : Mesh
    T : None, str or NewtonTensorField
        ``None``/``"id"`` for the Laplace-Beltrami operator, ``"t<r>"`` for
        Newton tensors, or a tensor field defined on ``mesh``'s vertices.
    curvature : CurvatureField, optional
        Reused when T needs curvature; estimated from ``mesh`` otherwise.

    Raises
    ------
    InvalidArgument
        If T is not symmetric or not defined on the mesh vertices.
    """
    if not isinstance(mesh, Mesh):
        raise NotApplicable("finite-element assembly is only available for triangle meshes")
    identity = T is None or (isinstance(T, str) and T.strip().lower() in ("id", "identity", "t0", "tr0"))
    G = hat_gradients(mesh)
    if identity and curvature is None:
        label, order, elliptic = "id", 0, True
        C = np.einsum("fai,fbi->fab", G, G)
    else:
        field = curvature if curvature is not None else shape_operator(mesh)
        Tf = resolve_tensor(field, T)
        if Tf.tensors.shape[0] != mesh.nv:
            raise InvalidArgument("coefficient tensor must be given at every mesh vertex")
        _check_symmetric(Tf)
        label, order = tensor_label(Tf), Tf.order
        elliptic = Tf.is_positive_definite()
        A = face_tensors(mesh, Tf)
        C = np.einsum("fai,fij,fbj->fab", G, A, G)
    C *= mesh.face_areas[:, None, None]
    rows = np.repeat(mesh.faces, 3, axis=1).ravel()
    cols = np.tile(mesh.faces, (1, 3)).ravel()
    # fixed row/col order makes the summation, hence the bits, reproducible
    K = sparse.coo_matrix((C.ravel(), (rows, cols)), shape=(mesh.nv, mesh.nv)).tocsr()
    K.sum_duplicates()
    K = (0.5 * (K + K.T)).tocsr()
    return GalerkinPair(
        stiffness=K,
        mass=np.array(mesh.vertex_areas),
        label=label,
        order=order,
        elliptic=bool(elliptic),
        mesh=mesh,
    )


def _residuals(pair, vals, vecs):
    R = pair.stiffness @ vecs - pair.mass[:, None] * vecs * vals[None, :]
    num = np.sqrt(np.einsum("ik,ik->k", R, R / pair.mass[:, None]))
    den = np.sqrt(np.einsum("ik,ik->k", vecs, vecs * pair.mass[:, None]))
    scale = np.maximum(np.abs(vals), ZERO_THRESHOLD * pair.lambda_ref)
    return num / den / scale


def solve_lowest(pair: GalerkinPair, k: int = 6, tol: float = 0.0, maxiter: Optional[int] = None) -> Spectrum:
    """Lowest ``k`` eigenpairs of ``K v = lam M v``.

    Shift-invert Lanczos (ARPACK) about a small negative shift, started from
    a fixed pseudo-random vector so repeated runs agree bitwise. Small
    problems are solved densely.

    Raises
    ------
    SolverError
        If ARPACK does not converge; the residual of the best iterate is
        attached.
    """
    if not 1 <= k <= MAX_K:
        raise InvalidArgument(f"k must be in [1, {MAX_K}], got {k}")
    N = pair.size
    k = min(k, N - 1)
    lam_ref = pair.lambda_ref
    if N <= DENSE_LIMIT:
        vals, vecs = sla.eigh(pair.stiffness.toarray(), np.diag(pair.mass), subset_by_index=[0, k - 1])
    else:
        v0 = np.random.default_rng(SEED).standard_normal(N)
        sigma = -1e-3 * lam_ref
        try:
            vals, vecs = eigsh(
                pair.stiffness.tocsc(),
                k=k,
                M=pair.mass_matrix.tocsc(),
                sigma=sigma,
                which="LM",
                v0=v0,
                tol=tol,
                maxiter=maxiter,
            )
        except ArpackNoConvergence as exc:
            if len(exc.eigenvalues):
                res = _residuals(pair, exc.eigenvalues, exc.eigenvectors).max()
            else:
                res = float("inf")
            raise SolverError(f"eigensolver did not converge for {pair.label}", residual=float(res)) from exc
        except ArpackError as exc:
            raise SolverError(f"eigensolver failed for {pair.label}: {exc}", residual=float("inf")) from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    # M-normalize and fix the sign so the largest entry is positive
    norms = np.sqrt(np.einsum("ik,ik->k", vecs, vecs * pair.mass[:, None]))
    vecs = vecs / norms
    idx = np.argmax(np.abs(vecs), axis=0)
    vecs = vecs * np.sign(vecs[idx, np.arange(vecs.shape[1])])
    res = _residuals(pair, vals, vecs)
    return Spectrum(
        eigenvalues=vals,
        eigenvectors=vecs,
        threshold=ZERO_THRESHOLD * lam_ref,
        residuals=res,
    )


def lambda1(pair: GalerkinPair, spectrum: Optional[Spectrum] = None, k: int = 4) -> float:
    """First eigenvalue above the zero threshold ``1e-6 trace(K)/trace(M)``.

    Raises
    ------
    DegenerateSpectrumError
        If the kernel is not one-dimensional (disconnected input) or no
        computed eigenvalue clears the threshold.
    """
    spec = spectrum if spectrum is not None else solve_lowest(pair, k)
    kdim = spec.kernel_dimension
    if kdim >= spec.k:
        raise DegenerateSpectrumError(
            f"all {spec.k} computed eigenvalues of L_{pair.label} are below the zero threshold {spec.threshold:.3g}"
        )
    if kdim != 1:
        raise DegenerateSpectrumError(
            f"L_{pair.label} has {kdim} near-zero eigenvalues; lambda_1 needs a connected surface"
        )
    return float(spec.eigenvalues[kdim])


def first_eigenpair(pair: GalerkinPair, k: int = 4):
    spec = solve_lowest(pair, k)
    lam = lambda1(pair, spec)
    i = spec.kernel_dimension
    return lam, spec.eigenvectors[:, i], spec


@dataclass(frozen=True, eq=False)
class DiscreteHT:
    """Weak-form ``H_T = -M^{-1} K_T X`` and its normal alignment."""

    vectors: np.ndarray
    normal_alignment: float

    @property
    def magnitude(self):
        return np.linalg.norm(self.vectors, axis=1)


def discrete_HT(pair: GalerkinPair, mesh: Optional[Mesh] = None, normals=None) -> DiscreteHT:
    """Discrete generalized mean curvature vector from ``L_T X = -H_T``.

    ``normal_alignment`` is the largest ratio ``|tangential part| / |H_T|``
    over vertices, measured against ``normals`` (mesh vertex normals by
    default).
    """
    mesh = mesh if mesh is not None else pair.mesh
    X = mesh.vertices
    H = -(pair.stiffness @ X) / pair.mass[:, None]
    nu = mesh.vertex_normals if normals is None else np.asarray(normals)
    tang = H - np.einsum("ij,ij->i", H, nu)[:, None] * nu
    mag = np.linalg.norm(H, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(mag > 0, np.linalg.norm(tang, axis=1) / mag, 0.0)
    return DiscreteHT(vectors=H, normal_alignment=float(ratio.max()))


def weak_trace_integral(pair: GalerkinPair, mesh: Optional[Mesh] = None) -> float:
    """``sum_alpha (X^alpha)^T K_T X^alpha``, the weak form of ``int tr(T)``."""
    mesh = mesh if mesh is not None else pair.mesh
    X = mesh.vertices
    return float(np.einsum("ia,ia->", X, pair.stiffness @ X))


def rayleigh_quotient(pair: GalerkinPair, f) -> float:
    f = np.asarray(f, dtype=float)
    f = f - (pair.mass @ f) / pair.mass.sum()
    return pair.quadratic(f) / float(pair.mass @ (f * f))

