"""Pinching of the general Reilly bound and closeness to a comparison sphere.

Within this module ``H_S`` is the weak-form vector ``-M^{-1} K_S X`` and the
normal used for tangential parts is its direction. With lumped weights the
Rayleigh, Cauchy-Schwarz and Hoelder steps behind the constant-free lemmas
hold exactly for these discrete objects, so those checks are asserted at
round-off tolerance.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse import csgraph, csr_matrix

from .calculus import hausdorff_to_sphere, lp_norm
from .context import SurfaceContext
from .curvature import tensor_label
from .errors import InvalidArgument, NotApplicable, ScanError
from .spectral import discrete_HT
from .surface.generate import FamilySpec
from .surface.mesh import Mesh

LEMMA_RTOL = 1e-9
TANG_ATOL = 1e-9
MIN_SCAN_ROWS = 5
EXPONENT_SLACK = 0.02
EPS_WINDOW = (1e-6, 0.5)


def gamma_exponent(n: int, q: float) -> float:
    """``gamma = n q / (2 (q - n))``; needs ``q > n``."""
    if not q > n:
        raise InvalidArgument(f"exponent q must exceed n={n}, got {q!r}")
    return n * q / (2.0 * (q - n))


def alpha_exponent(n: int, q: float) -> float:
    """``alpha = 1 / (2 (gamma + 1))``."""
    return 1.0 / (2.0 * (gamma_exponent(n, q) + 1.0))


@dataclass(frozen=True, eq=False)
class PinchData:
    """Recentered position, weak ``H_S`` and the quantities of the pinching condition."""

    X: np.ndarray
    shift: np.ndarray
    H_S: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    lambda1: float
    int_trS: float
    int_trT: float
    hs_norm: float
    p: float
    elliptic: bool

    @property
    def V(self):
        return float(self.weights.sum())

    @property
    def epsilon(self):
        """Raw ``1 - lambda_1 (int tr S)^2 / ((int tr T) ||H_S||_{2p}^2 V)``."""
        return 1.0 - self.lambda1 * self.int_trS ** 2 / (self.int_trT * self.hs_norm ** 2 * self.V)

    @property
    def radius(self):
        return abs(self.int_trS) / self.V / self.hs_norm

    @property
    def tangential(self):
        nu = self.normals
        return self.X - np.einsum("ij,ij->i", self.X, nu)[:, None] * nu


def pinch_data(mesh, S=None, T=None, p: float = 2.0) -> PinchData:
    ctx = SurfaceContext.of(mesh)
    if not p > 1:
        raise InvalidArgument(f"pinching exponent p must exceed 1, got {p!r}")
    field = ctx.curvature
    Sf, Tf = ctx.tensor(S), ctx.tensor(T)
    PT = ctx.pair(Tf)
    if not PT.elliptic:
        raise InvalidArgument(f"T={tensor_label(Tf)} is not positive definite on {ctx.mesh.name}")
    w = field.weights
    c = (w @ ctx.mesh.vertices) / w.sum()
    X = ctx.mesh.vertices - c
    H = discrete_HT(ctx.pair(Sf), ctx.mesh).vectors
    mag = np.linalg.norm(H, axis=1)
    nu = np.array(field.normals)
    # where H_S vanishes its direction is undefined; the fitted normal stands in
    live = mag > 1e-300
    nu[live] = H[live] / mag[live, None]
    hs = lp_norm(H, 2 * p, w)
    if not hs > 0:
        raise NotApplicable("H_S vanishes identically (tr(S B) must not be identically zero)")
    return PinchData(
        X=X,
        shift=c,
        H_S=H,
        normals=nu,
        weights=w,
        lambda1=ctx.lambda1(Tf),
        int_trS=float(w @ Sf.trace()),
        int_trT=float(w @ Tf.trace()),
        hs_norm=hs,
        p=float(p),
        elliptic=PT.elliptic,
    )


def pinch_epsilon(mesh, S=None, T=None, p: float = 2.0) -> float:
    """Raw pinching deficit; nonnegative up to round-off on every mesh."""
    return pinch_data(mesh, S, T, p).epsilon


def comparison_radius(mesh, S=None, p: float = 2.0) -> float:
    """``r = (1/V) |int tr S| / ||H_S||_{2p}``.

    Raises
    ------
    NotApplicable
        If ``H_S`` vanishes identically.
    """
    ctx = SurfaceContext.of(mesh)
    field = ctx.curvature
    Sf = ctx.tensor(S)
    w = field.weights
    H = discrete_HT(ctx.pair(Sf), ctx.mesh).vectors
    hs = lp_norm(H, 2 * p, w)
    if not hs > 0:
        raise NotApplicable("H_S vanishes identically (tr(S B) must not be identically zero)")
    return float(abs(w @ Sf.trace()) / w.sum() / hs)


def _gate(d: PinchData):
    eps = d.epsilon
    if eps >= 1:
        raise NotApplicable(f"pinching deficit {eps:.4g} >= 1; lemma checks need eps < 1")
    return max(eps, 0.0)


def _le(a, b, rtol=LEMMA_RTOL):
    return bool(a <= b + rtol * max(abs(a), abs(b)))


def check_lemma_XL2(mesh, S=None, T=None, p: float = 2.0, data: Optional[PinchData] = None) -> dict:
    """Both two-sided L^2 bounds on the recentered position vector."""
    d = data if data is not None else pinch_data(mesh, S, T, p)
    eps = _gate(d)
    w = d.weights
    x2 = lp_norm(d.X, 2, w) ** 2
    a = d.int_trT / (d.lambda1 * d.V)
    b = (d.int_trS / d.V) ** 2 / d.hs_norm ** 2
    return {
        "trace_lower": _le(a * (1 - eps) ** 2, x2),
        "trace_upper": _le(x2, a),
        "hs_lower": _le(b * (1 - eps) ** 2, x2),
        "hs_upper": _le(x2, b / (1 - eps)),
    }


def check_lemma_TangL2(mesh, S=None, T=None, p: float = 2.0, data: Optional[PinchData] = None) -> bool:
    """``||X^T||_2^2 <= eps ||X||_2^2``."""
    d = data if data is not None else pinch_data(mesh, S, T, p)
    eps = _gate(d)
    w = d.weights
    lhs = lp_norm(d.tangential, 2, w) ** 2
    rhs = eps * lp_norm(d.X, 2, w) ** 2
    return bool(lhs <= rhs + TANG_ATOL * max(1.0, lp_norm(d.X, 2, w) ** 2))


def check_lemma_L1L2(mesh, S=None, T=None, p: float = 2.0, data: Optional[PinchData] = None) -> bool:
    """``1 - ||X||_1/||X||_2 <= 1 - (1 - eps)^{p/(2(p-1))}``."""
    d = data if data is not None else pinch_data(mesh, S, T, p)
    eps = _gate(d)
    w = d.weights
    lhs = 1.0 - lp_norm(d.X, 1, w) / lp_norm(d.X, 2, w)
    rhs = 1.0 - (1.0 - eps) ** (d.p / (2.0 * (d.p - 1.0)))
    return bool(lhs <= rhs + LEMMA_RTOL)


@dataclass(frozen=True)
class IterationRatios:
    """Empirical stand-ins for the iteration constants (reported, never asserted)."""

    gamma_hat: float
    c_hat: float
    gamma: float
    VHq: float
    VBq: float


def iteration_ratios(mesh, q: float = 4.0, S=None, T=None, p: float = 2.0, data=None) -> IterationRatios:
    """``Gamma_hat`` and ``C_hat`` ratios of the L^2-to-L^infinity estimates.

    Raises
    ------
    NotApplicable
        If a denominator is below 1e-14 (the round-sphere limit).
    """
    ctx = SurfaceContext.of(mesh)
    d = data if data is not None else pinch_data(ctx, S, T, p)
    field = ctx.curvature
    n = field.n
    g = gamma_exponent(n, q)
    w = d.weights
    V = d.V
    VHq = V * lp_norm(field.mean_curvature, q, w) ** n
    VBq = V * lp_norm(np.sqrt(field.second_fundamental_norm_sq), q, w) ** n
    absX = np.linalg.norm(d.X, axis=1)
    x1, x2, xinf = lp_norm(absX, 1, w), lp_norm(absX, 2, w), absX.max()
    XT = d.tangential
    t2, tinf = lp_norm(XT, 2, w), lp_norm(XT, np.inf, w)
    den_g = VHq ** (g / n) * x2 * max(1.0 - x1 / x2, 0.0) ** (1.0 / (2.0 * (g + 1.0)))
    den_c = (VBq * xinf) ** (g / (g + 1.0)) * t2 ** (1.0 / (g + 1.0))
    if den_g < 1e-14 or den_c < 1e-14:
        raise NotApplicable("iteration ratios are 0/0 in the round-sphere limit")
    return IterationRatios(
        gamma_hat=float(np.abs(absX - x2).max() / den_g),
        c_hat=float(tinf / den_c),
        gamma=g,
        VHq=float(VHq),
        VBq=float(VBq),
    )


def is_star_shaped(mesh: Mesh, center=None) -> bool:
    """True when every ray from ``center`` crosses the surface exactly once.

    For a closed embedded polyhedron this holds iff every face plane has the
    center strictly on its inner side, ``<x_f - c, n_f> > 0``.
    """
    c = mesh.center_of_mass if center is None else np.asarray(center, dtype=float)
    P = mesh.vertices[mesh.faces[:, 0]]
    return bool(np.all(np.einsum("ij,ij->i", P - c, mesh.face_normals) > 0))


def _unfolded_diagonals(mesh: Mesh):
    """Straight-line lengths across each edge after unfolding its two faces.

    Only edges whose unfolded quad contains the segment in its interior are
    kept, so each length is realized by a path on the surface.
    """
    f = mesh.faces
    he = np.concatenate([f[:, [0, 1, 2]], f[:, [1, 2, 0]], f[:, [2, 0, 1]]])
    a, b, c = he[:, 0], he[:, 1], he[:, 2]
    nv = mesh.nv
    key = a * nv + b
    rev = b * nv + a
    order = np.argsort(key)
    pos = np.searchsorted(key[order], rev)
    d = c[order[pos]]
    keep = a < b
    a, b, c, d = a[keep], b[keep], c[keep], d[keep]
    X = mesh.vertices
    e = X[b] - X[a]
    L = np.linalg.norm(e, axis=1)
    u = e / L[:, None]

    def planar(v):
        rel = X[v] - X[a]
        s = np.einsum("ij,ij->i", rel, u)
        h = np.linalg.norm(rel - s[:, None] * u, axis=1)
        return s, h

    sc, hc = planar(c)
    sd, hd = planar(d)
    hd = -hd
    # crossing of segment c-d with the edge line, must lie strictly inside the edge
    t = hc / (hc - hd)
    s_cross = sc + t * (sd - sc)
    ok = (s_cross > 0) & (s_cross < L)
    length = np.hypot(sc - sd, hc - hd)
    return c[ok], d[ok], length[ok]


def isometry_distortion(mesh: Mesh, r: float, center=None, pairs: int = 200, seed: int = 0) -> float:
    """Max over sampled vertex pairs of ``|d_sphere(F x1, F x2) - d_M(x1, x2)|``.

    ``F`` is radial projection onto ``S(center, r)``; ``d_M`` is the
    shortest-path metric of the edge graph augmented with unfolded
    across-edge diagonals, an upper bound for the surface distance.
    """
    if not r > 0:
        raise InvalidArgument(f"radius must be positive, got {r!r}")
    c = mesh.center_of_mass if center is None else np.asarray(center, dtype=float)
    if not is_star_shaped(mesh, c):
        raise NotApplicable("radial projection needs a star-shaped mesh")
    rng = np.random.default_rng(seed)
    i = rng.integers(0, mesh.nv, size=pairs)
    j = (i + rng.integers(1, mesh.nv, size=pairs)) % mesh.nv
    src, inv = np.unique(i, return_inverse=True)
    D = csgraph.dijkstra(surface_graph(mesh), directed=False, indices=src)
    dM = D[inv, j]
    U = mesh.vertices - c
    U /= np.linalg.norm(U, axis=1)[:, None]
    cosang = np.clip(np.einsum("ij,ij->i", U[i], U[j]), -1.0, 1.0)
    dS = r * np.arccos(cosang)
    return float(np.abs(dS - dM).max())


def surface_graph(mesh: Mesh) -> csr_matrix:
    """Edge graph plus unfolded diagonals; parallel entries keep the shortest length."""
    E = mesh.edges
    X = mesh.vertices
    i, j = E[:, 0], E[:, 1]
    w = np.linalg.norm(X[i] - X[j], axis=1)
    c, d, L = _unfolded_diagonals(mesh)
    i = np.concatenate([i, np.minimum(c, d)])
    j = np.concatenate([j, np.maximum(c, d)])
    w = np.concatenate([w, L])
    key = np.minimum(i, j) * mesh.nv + np.maximum(i, j)
    order = np.lexsort((w, key))
    key, w = key[order], w[order]
    first = np.concatenate([[True], key[1:] != key[:-1]])
    key, w = key[first], w[first]
    a, b = key // mesh.nv, key % mesh.nv
    return csr_matrix((w, (a, b)), shape=(mesh.nv, mesh.nv))


@dataclass
class PinchReport:
    epsilon: float
    epsilon_clamped: float
    p: float
    q: float
    gamma: float
    alpha: float
    r: float
    X_l2: float
    X_l1: float
    XT_l2: float
    XT_linf: float
    radial_deviation: float
    dev_over_r: float
    hausdorff: float
    hausdorff_over_r: float
    tang_inf_over_r: float
    VBq: float
    VHq: float
    lemma_XL2: dict
    lemma_TangL2: bool
    lemma_L1L2: bool
    gamma_hat: Optional[float]
    c_hat: Optional[float]
    star_shaped: bool
    hypotheses: dict
    S: str = "id"
    T: str = "id"
    mesh: dict = field(default_factory=dict)

    @property
    def lemmas_ok(self):
        return all(self.lemma_XL2.values()) and self.lemma_TangL2 and self.lemma_L1L2

    def to_dict(self):
        return asdict(self)


def pinch_report(mesh, S=None, T=None, p: float = 2.0, q: float = 4.0) -> PinchReport:
    ctx = SurfaceContext.of(mesh)
    field = ctx.curvature
    n = field.n
    g = gamma_exponent(n, q)
    a = alpha_exponent(n, q)
    d = pinch_data(ctx, S, T, p)
    w = d.weights
    r = d.radius
    absX = np.linalg.norm(d.X, axis=1)
    XT = d.tangential
    dev = float(np.abs(absX - r).max())
    haus = hausdorff_to_sphere(ctx.mesh, d.shift, r)
    lemmas_applicable = d.epsilon < 1
    if lemmas_applicable:
        xl2 = check_lemma_XL2(ctx, data=d)
        tang = check_lemma_TangL2(ctx, data=d)
        l1l2 = check_lemma_L1L2(ctx, data=d)
    else:
        xl2, tang, l1l2 = {}, False, False
    try:
        it = iteration_ratios(ctx, q, data=d)
        gh, ch, VHq, VBq = it.gamma_hat, it.c_hat, it.VHq, it.VBq
    except NotApplicable:
        gh = ch = None
        VHq = d.V * lp_norm(field.mean_curvature, q, w) ** n
        VBq = d.V * lp_norm(np.sqrt(field.second_fundamental_norm_sq), q, w) ** n
    hyp = {
        "q_gt_n": q > n,
        "T_positive_definite": d.elliptic,
        "H_S_nonzero": d.hs_norm > 0,
        "epsilon_lt_1": lemmas_applicable,
    }
    return PinchReport(
        epsilon=d.epsilon,
        epsilon_clamped=max(d.epsilon, 0.0),
        p=float(p),
        q=float(q),
        gamma=g,
        alpha=a,
        r=r,
        X_l2=lp_norm(absX, 2, w),
        X_l1=lp_norm(absX, 1, w),
        XT_l2=lp_norm(XT, 2, w),
        XT_linf=lp_norm(XT, np.inf, w),
        radial_deviation=dev,
        dev_over_r=dev / r,
        hausdorff=haus,
        hausdorff_over_r=haus / r,
        tang_inf_over_r=lp_norm(XT, np.inf, w) / r,
        VBq=float(VBq),
        VHq=float(VHq),
        lemma_XL2=xl2,
        lemma_TangL2=tang,
        lemma_L1L2=l1l2,
        gamma_hat=gh,
        c_hat=ch,
        star_shaped=is_star_shaped(ctx.mesh, d.shift),
        hypotheses=hyp,
        S=tensor_label(ctx.tensor(S)),
        T=tensor_label(ctx.tensor(T)),
        mesh=ctx.metadata(),
    )


# -- family scans --------------------------------------------------------------


def fit_exponent(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    slope, _ = np.linalg.lstsq(A, ly, rcond=None)[0]
    return float(slope)


SCAN_COLUMNS = ("t", "epsilon", "dev_over_r", "tang_inf_over_r", "hausdorff_over_r", "gamma", "alpha", "VHq", "VBq")


@dataclass
class ScanResult:
    family: str
    rows: list
    slope: float
    alpha: float
    used: int
    eps_increasing: bool
    dev_monotone: bool
    lemmas_ok: bool

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
            "eps_increasing": self.eps_increasing,
            "dev_monotone": self.dev_monotone,
            "lemmas_ok": self.lemmas_ok,
        }

    def to_csv(self):
        lines = [",".join(SCAN_COLUMNS)]
        for row in self.rows:
            lines.append(",".join(f"{row[c]:.17g}" for c in SCAN_COLUMNS))
        return "\n".join(lines) + "\n"


def family_scan(
    spec: FamilySpec,
    S=None,
    T=None,
    p: float = 2.0,
    q: float = 4.0,
    level: int = 4,
    threads: int = 1,
) -> ScanResult:
    """Pinch every family member and fit ``dev/r ~ eps^beta``.

    Rows with eps outside (1e-6, 0.5) are kept in the table but excluded
    from the fit.

    Raises
    ------
    ScanError
        If fewer than five rows are usable for the fit.
    """

    def run(i):
        rep = pinch_report(spec.member(i, level), S, T, p, q)
        return rep

    idx = range(len(spec.amplitudes))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            reps = list(ex.map(run, idx))
    else:
        reps = [run(i) for i in idx]
    rows = []
    for t, rep in zip(spec.amplitudes, reps):
        rows.append(
            {
                "t": t,
                "epsilon": rep.epsilon,
                "dev_over_r": rep.dev_over_r,
                "tang_inf_over_r": rep.tang_inf_over_r,
                "hausdorff_over_r": rep.hausdorff_over_r,
                "gamma": rep.gamma,
                "alpha": rep.alpha,
                "VHq": rep.VHq,
                "VBq": rep.VBq,
            }
        )
    use = [row for row in rows if EPS_WINDOW[0] < row["epsilon"] < EPS_WINDOW[1] and row["dev_over_r"] > 0]
    if len(use) < MIN_SCAN_ROWS:
        raise ScanError(f"only {len(use)} usable rows (need {MIN_SCAN_ROWS}) with eps in {EPS_WINDOW}")
    slope = fit_exponent([u["epsilon"] for u in use], [u["dev_over_r"] for u in use])
    eps = np.array([row["epsilon"] for row in rows])
    dev = np.array([row["dev_over_r"] for row in rows])
    return ScanResult(
        family=spec.family,
        rows=rows,
        slope=slope,
        alpha=rows[0]["alpha"],
        used=len(use),
        eps_increasing=bool(np.all(np.diff(eps) > 0)),
        dev_monotone=bool(np.all(np.diff(dev) > 0)),
        lemmas_ok=all(rep.lemmas_ok for rep in reps),
    )
