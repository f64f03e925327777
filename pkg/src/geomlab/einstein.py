"""Intrinsic Ricci curvature from the shape operator and almost-Einstein diagnostics.

The Gauss equation for a hypersurface of flat space gives
``Ric = tr(B) B - B^2``, so ``Ric_i = kappa_i (n H - kappa_i)`` in the
principal frame and ``R = 2 S_2 = n(n-1) H_2``. Tensor norms are Frobenius
in an orthonormal frame and every L^p norm is volume normalized.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .calculus import center_of_mass, hausdorff_to_sphere, lp_norm, points_of
from .context import SurfaceContext
from .curvature import CurvatureField, generalized_hs, mean_curvature_hr, resolve_tensor, shape_operator
from .errors import InvalidArgument, NotApplicable, ScanError
from .inequalities import BASE_TOL, InequalityReport
from .pinching import EXPONENT_SLACK, MIN_SCAN_ROWS, alpha_exponent, comparison_radius, fit_exponent
from .surface.generate import FamilySpec
from .surface.mesh import Mesh

EPS_WINDOW = (1e-6, 0.5)


@dataclass(frozen=True, eq=False)
class RicciField:
    """Per-point Ricci tensors in the tangent frames of a curvature field."""

    tensors: np.ndarray
    eigenvalues: np.ndarray
    weights: np.ndarray

    @property
    def n(self):
        return self.tensors.shape[-1]

    @property
    def scalar(self):
        return np.trace(self.tensors, axis1=1, axis2=2)

    @property
    def ric_min(self):
        return self.eigenvalues.min(axis=1)

    @property
    def mean_scalar(self):
        return float(self.weights @ self.scalar / self.weights.sum())


def ricci_from_gauss(field: CurvatureField) -> RicciField:
    B = field.shape_operator
    trB = np.trace(B, axis1=1, axis2=2)
    Ric = trB[:, None, None] * B - B @ B
    Ric = 0.5 * (Ric + np.swapaxes(Ric, 1, 2))
    k = field.principal
    ev = np.sort(k * (k.sum(axis=1, keepdims=True) - k), axis=1)
    return RicciField(tensors=Ric, eigenvalues=ev, weights=field.weights)


def _ricci(obj) -> RicciField:
    if isinstance(obj, RicciField):
        return obj
    if isinstance(obj, CurvatureField):
        return ricci_from_gauss(obj)
    if isinstance(obj, SurfaceContext):
        return ricci_from_gauss(obj.curvature)
    return ricci_from_gauss(shape_operator(obj))


def _deficits(ric: RicciField):
    """Pointwise ``|Ric - (Rbar/n) g|`` and ``|Ric - (R/n) g|``."""
    n = ric.n
    eye = np.eye(n)
    R = ric.scalar
    E = ric.tensors - (ric.mean_scalar / n) * eye
    T0 = ric.tensors - (R / n)[:, None, None] * eye
    return np.linalg.norm(E, axis=(1, 2)), np.linalg.norm(T0, axis=(1, 2))


def deficit_norms(ric, p: float):
    """``(||Ric - (Rbar/n) g||_p, ||Ric - (R/n) g||_p, Rbar)``."""
    ric = _ricci(ric)
    e, t0 = _deficits(ric)
    return lp_norm(e, p, ric.weights), lp_norm(t0, p, ric.weights), ric.mean_scalar


def decomposition_check(ric) -> float:
    """Max violation of ``|Ric - (Rbar/n)g|^2 = |Ric0|^2 + (R - Rbar)^2 / n``."""
    ric = _ricci(ric)
    e, t0 = _deficits(ric)
    R = ric.scalar
    scale = np.maximum(1.0, ric.mean_scalar ** 2)
    return float(np.max(np.abs(e ** 2 - t0 ** 2 - (R - ric.mean_scalar) ** 2 / ric.n)) / scale)


def schur_constant(n: int) -> float:
    return n * n / (n - 2.0) ** 2


def almost_schur_check(ric, p: float = 2.0) -> InequalityReport:
    """Almost-Schur: ``int |Ric - Rbar/n g|^2 <= n^2/(n-2)^2 int |Ric0|^2``.

    For p > 2 the constant is not explicit; the ratio of the two L^p norms
    is reported with ``asserted=False``.

    Raises
    ------
    NotApplicable
        In dimension 2, where the traceless Ricci tensor vanishes.
    """
    ric = _ricci(ric)
    n = ric.n
    if n < 3:
        raise NotApplicable("almost-Schur needs n >= 3")
    if not p >= 2:
        raise InvalidArgument(f"almost-Schur exponent must be >= 2, got {p!r}")
    e, t0 = _deficits(ric)
    w = ric.weights
    hyp = {"ricci_nonnegative": bool(ric.ric_min.min() >= -1e-12 * max(abs(ric.mean_scalar), 1.0))}
    if p == 2:
        lhs = float(w @ e ** 2)
        rhs = schur_constant(n) * float(w @ t0 ** 2)
        rep = InequalityReport("almost_schur(p=2)", lhs, rhs, hyp, BASE_TOL)
    else:
        lhs, rhs = lp_norm(e, p, w), lp_norm(t0, p, w)
        rep = InequalityReport(f"almost_schur(p={p:g})", lhs, rhs, hyp, BASE_TOL, "constant not explicit", False)
    round_off = 1e-12 * abs(ric.mean_scalar)
    if lhs <= round_off ** 2 * w.sum() and rhs <= round_off ** 2 * w.sum() * schur_constant(n):
        # Einstein input: both sides vanish to round-off
        rep.lhs, rep.rhs, rep.notes = 0.0, 0.0, "both sides vanish"
    return rep


def schur_ratio(ric, p: float = 2.0) -> float:
    """``||Ric - Rbar/n g||_p / ||Ric0||_p`` (nan where undefined)."""
    ric = _ricci(ric)
    if ric.n < 3:
        return float("nan")
    e, t0 = _deficits(ric)
    b = lp_norm(t0, p, ric.weights)
    return lp_norm(e, p, ric.weights) / b if b > 0 else float("nan")


@dataclass
class AubryReport:
    lambda1: float
    mean_scalar: float
    gap: float
    deficit: float
    C_hat: Optional[float]
    s: float
    gate_lhs: float
    n: int = 2

    @property
    def relative_gap(self):
        """``gap / (Rbar/(n-1))``; scale free."""
        return self.gap * (self.n - 1) / self.mean_scalar if self.mean_scalar else float("nan")

    def to_dict(self):
        d = asdict(self)
        d["relative_gap"] = self.relative_gap
        return d


def aubry_deficit(mesh, s: float = 2.0) -> AubryReport:
    """``lambda_1 - Rbar/(n-1)`` against ``||Ric - Rbar/n g||_{2s}``.

    ``C_hat = -gap / deficit`` is the smallest constant consistent with the
    lower bound on this mesh. ``gate_lhs`` is the volume average of
    ``(ric_min - (n-1))_-^{2s}`` after rescaling to ``Rbar = n(n-1)``.

    Raises
    ------
    NotApplicable
        For inputs without a finite-element eigenvalue (analytic surfaces).
    """
    if not isinstance(mesh, (Mesh, SurfaceContext)):
        raise NotApplicable("lambda_1 needs a triangle mesh")
    ctx = SurfaceContext.of(mesh)
    ric = ricci_from_gauss(ctx.curvature)
    n = ric.n
    if not s > max(1.0, n / 4.0):
        raise InvalidArgument(f"s must exceed max(1, n/4) = {max(1.0, n / 4.0):g}, got {s!r}")
    lam = ctx.lambda1()
    Rb = ric.mean_scalar
    e, _ = _deficits(ric)
    d = lp_norm(e, 2 * s, ric.weights)
    gap = lam - Rb / (n - 1)
    k = Rb / (n * (n - 1))
    gate = float(ric.weights @ np.maximum((n - 1) - ric.ric_min / k, 0.0) ** (2 * s) / ric.weights.sum()) if k > 0 else float("nan")
    return AubryReport(
        lambda1=lam,
        mean_scalar=Rb,
        gap=gap,
        deficit=d,
        C_hat=(-gap / d) if d > 0 else None,
        s=float(s),
        gate_lhs=gate,
        n=int(n),
    )


# -- report --------------------------------------------------------------------


@dataclass
class EinsteinReport:
    p: float
    q: float
    n: int
    mean_scalar: float
    einstein_deficit: float
    traceless_deficit: float
    eps_E: float
    r: float
    hausdorff_over_r: float
    dev_over_r: float
    schur_ratio: float
    aubry_gap: float
    deficit_2s: float
    alpha: float
    decomposition_violation: float
    gauss_identity_error: float
    chain_H1_ok: bool
    hypotheses: dict
    mesh: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _einstein_radius(surface, field, s):
    """Comparison radius with S = T_1 and norm exponent 2s."""
    if isinstance(surface, (Mesh, SurfaceContext)):
        return comparison_radius(surface, "t1", s)
    S = resolve_tensor(field, "t1")
    w = field.weights
    hs = lp_norm(generalized_hs(field, S), 2 * s, w)
    if not hs > 0:
        raise NotApplicable("H_{T_1} vanishes identically")
    return float(abs(w @ S.trace()) / w.sum() / hs)


def einstein_report(surface, p: float = 4.0, q: float = 4.0) -> EinsteinReport:
    """Almost-Einstein deficit ``eps_E`` and the distance of the surface to ``S(Xbar, r)``.

    Works on meshes and analytic hypersurfaces; the Hausdorff distance and
    the Aubry gap need a mesh and are nan otherwise.
    """
    is_mesh = isinstance(surface, (Mesh, SurfaceContext))
    ctx = SurfaceContext.of(surface) if is_mesh else None
    fld = ctx.curvature if is_mesh else shape_operator(surface)
    n = fld.n
    if not p > max(2.0, n / 2.0):
        raise InvalidArgument(f"p must exceed max(2, n/2) = {max(2.0, n / 2.0):g}, got {p!r}")
    if not q > n:
        raise InvalidArgument(f"q must exceed n = {n}, got {q!r}")
    ric = ricci_from_gauss(fld)
    w = fld.weights
    e, t0 = _deficits(ric)
    ed, td, Rb = lp_norm(e, p, w), lp_norm(t0, p, w), ric.mean_scalar
    R = ric.scalar
    H2 = mean_curvature_hr(fld, 2)
    gauss_err = float(np.max(np.abs(R - n * (n - 1) * H2)) / max(abs(Rb), 1e-300))
    hyp = {"mean_scalar_positive": Rb > 0, "scalar_nonnegative": bool(R.min() >= -1e-12 * abs(Rb))}
    # |H| >= sqrt(H_2) pointwise once H_2 >= 0, so the L^1 chain is exact
    H1 = lp_norm(fld.mean_curvature, 1, w)
    chain = H1 ** 2 >= (w @ np.sqrt(np.maximum(H2, 0.0)) / w.sum()) ** 2 * (1 - 1e-12) if hyp["scalar_nonnegative"] else True
    mesh_obj = ctx.mesh if is_mesh else None
    s = p / 2.0
    r = _einstein_radius(ctx if is_mesh else surface, fld, s)
    X = points_of(mesh_obj if is_mesh else surface)
    c = center_of_mass(fld)
    dev = float(np.abs(np.linalg.norm(X - c, axis=1) - r).max())
    if is_mesh:
        haus = hausdorff_to_sphere(mesh_obj, c, r)
        ab = aubry_deficit(ctx, s)
        gap, d2s = ab.gap, ab.deficit
        meta = ctx.metadata()
    else:
        haus, gap = float("nan"), float("nan")
        d2s = lp_norm(e, 2 * s, w)
        meta = {"name": getattr(surface, "name", "analytic"), "points": int(len(X))}
    return EinsteinReport(
        p=float(p),
        q=float(q),
        n=int(n),
        mean_scalar=Rb,
        einstein_deficit=ed,
        traceless_deficit=td,
        eps_E=ed / Rb if Rb > 0 else float("nan"),
        r=r,
        hausdorff_over_r=haus / r,
        dev_over_r=dev / r,
        schur_ratio=schur_ratio(ric, 2.0),
        aubry_gap=gap,
        deficit_2s=d2s,
        alpha=alpha_exponent(n, q),
        decomposition_violation=decomposition_check(ric),
        gauss_identity_error=gauss_err,
        chain_H1_ok=bool(chain),
        hypotheses=hyp,
        mesh=meta,
    )


EINSTEIN_COLUMNS = ("t", "eps_E", "hausdorff_over_r", "dev_over_r", "schur_ratio", "aubry_gap", "deficit_2s")


@dataclass
class EinsteinScan:
    family: str
    rows: list
    slope: float
    alpha: float
    used: int

    @property
    def passed(self):
        return self.slope >= self.alpha - EXPONENT_SLACK

    def summary(self):
        return {
            "family": self.family,
            "slope": self.slope,
            "alpha": self.alpha,
            "threshold": self.alpha - EXPONENT_SLACK,
            "passed": self.passed,
            "rows_used": self.used,
        }

    def to_csv(self):
        lines = [",".join(EINSTEIN_COLUMNS)]
        for row in self.rows:
            lines.append(",".join(f"{row[c]:.17g}" for c in EINSTEIN_COLUMNS))
        return "\n".join(lines) + "\n"


def einstein_scan(spec: FamilySpec, p: float = 4.0, q: float = 4.0, level: int = 4, threads: int = 1) -> EinsteinScan:
    """Einstein report over a family and the fit ``d_H/r ~ eps_E^beta``.

    Raises
    ------
    ScanError
        If fewer than five rows have eps_E in (1e-6, 0.5).
    """

    def run(i):
        return einstein_report(spec.member(i, level), p, q)

    idx = range(len(spec.amplitudes))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            reps = list(ex.map(run, idx))
    else:
        reps = [run(i) for i in idx]
    rows = [
        {"t": t, **{c: getattr(rep, c) for c in EINSTEIN_COLUMNS[1:]}} for t, rep in zip(spec.amplitudes, reps)
    ]
    use = [row for row in rows if EPS_WINDOW[0] < row["eps_E"] < EPS_WINDOW[1] and row["hausdorff_over_r"] > 0]
    if len(use) < MIN_SCAN_ROWS:
        raise ScanError(f"only {len(use)} usable rows (need {MIN_SCAN_ROWS}) with eps_E in {EPS_WINDOW}")
    slope = fit_exponent([u["eps_E"] for u in use], [u["hausdorff_over_r"] for u in use])
    return EinsteinScan(family=spec.family, rows=rows, slope=slope, alpha=reps[0].alpha, used=len(use))
