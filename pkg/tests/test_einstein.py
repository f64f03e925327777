import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from geomlab.curvature import elementary_symmetric, shape_operator
from geomlab.einstein import (
    EINSTEIN_COLUMNS,
    RicciField,
    almost_schur_check,
    aubry_deficit,
    decomposition_check,
    deficit_norms,
    einstein_report,
    einstein_scan,
    ricci_from_gauss,
    schur_constant,
    schur_ratio,
)
from geomlab.errors import InvalidArgument, NotApplicable, ScanError
from geomlab.surface import (
    FamilySpec,
    gen_analytic_ellipsoid,
    gen_analytic_sphere,
    gen_icosphere,
)

# eps_E of the spheroid (1, 1, 1.3) at p = 4 from 1-D quadrature of the profile curve
SPHEROID_EPS_E = 0.3272665197832527


def _spheroid_eps_E(c, p):
    S = lambda u: np.sin(u) ** 2 + np.cos(u) ** 2 / c**2
    K = lambda u: 1.0 / (c**2 * S(u) ** 2)
    dA = lambda u: 2 * np.pi * np.sin(u) * np.sqrt(np.cos(u) ** 2 + c**2 * np.sin(u) ** 2)
    A = quad(dA, 0, np.pi, epsabs=1e-13)[0]
    Rb = 2 * quad(lambda u: K(u) * dA(u), 0, np.pi, epsabs=1e-13)[0] / A
    E = quad(lambda u: (np.sqrt(2) * abs(K(u) - Rb / 2)) ** p * dA(u), 0, np.pi, epsabs=1e-13)[0] / A
    return E ** (1 / p) / Rb


def _random_ricci(rng, n, m=50):
    X = rng.normal(size=(m, n, n))
    T = X + np.swapaxes(X, 1, 2)
    return RicciField(tensors=T, eigenvalues=np.linalg.eigvalsh(T), weights=rng.uniform(0.1, 1.0, m))


def test_spheroid_matches_quadrature_oracle():
    assert _spheroid_eps_E(1.3, 4) == pytest.approx(SPHEROID_EPS_E, rel=1e-9)
    rep = einstein_report(gen_analytic_ellipsoid((1.0, 1.0, 1.3), 48))
    assert rep.eps_E == pytest.approx(SPHEROID_EPS_E, rel=1e-10)
    assert rep.mean_scalar == pytest.approx(8 * np.pi / gen_analytic_ellipsoid((1.0, 1.0, 1.3), 48).area, rel=1e-12)


def test_analytic_deficit_resolution_independent():
    a = einstein_report(gen_analytic_ellipsoid((1.0, 1.0, 1.0, 1.2), 12))
    b = einstein_report(gen_analytic_ellipsoid((1.0, 1.0, 1.0, 1.2), 16))
    assert a.eps_E == pytest.approx(b.eps_E, rel=1e-5)
    assert a.schur_ratio == pytest.approx(b.schur_ratio, rel=1e-6)


def test_s3_ricci():
    ric = ricci_from_gauss(shape_operator(gen_analytic_sphere(3, 1.0, 8)))
    np.testing.assert_allclose(ric.tensors, np.broadcast_to(2 * np.eye(3), ric.tensors.shape), atol=1e-13)
    assert ric.mean_scalar == pytest.approx(6.0, rel=1e-13)


@pytest.mark.parametrize("n", [2, 3])
def test_analytic_sphere_is_einstein(n):
    rep = einstein_report(gen_analytic_sphere(n, 1.0, 8))
    assert rep.eps_E < 1e-12
    assert rep.r == pytest.approx(1.0, rel=1e-12)
    assert rep.dev_over_r < 1e-12


def test_icosphere_einstein(sphere4):
    rep = einstein_report(sphere4)
    assert rep.eps_E < 1e-4
    assert rep.traceless_deficit < 1e-12
    assert rep.hausdorff_over_r < 2e-3
    assert rep.gauss_identity_error < 1e-12
    assert rep.decomposition_violation < 1e-12
    assert rep.chain_H1_ok
    assert rep.alpha == pytest.approx(1 / 6)


def test_traceless_vanishes_in_dimension_two(ellipsoid4):
    _, t0, _ = deficit_norms(ellipsoid4, 4.0)
    assert t0 < 1e-12
    assert np.isnan(schur_ratio(ellipsoid4))
    with pytest.raises(NotApplicable):
        almost_schur_check(ellipsoid4)


@settings(max_examples=200)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 5))
def test_decomposition_identity(seed, n):
    assert decomposition_check(_random_ricci(np.random.default_rng(seed), n)) < 1e-10


def test_gauss_scalar_fuzz():
    rng = np.random.default_rng(11)
    for n in (2, 3, 4, 5):
        k = rng.normal(size=(20000, n))
        Q = np.linalg.qr(rng.normal(size=(n, n)))[0]
        B = Q @ (k[:, :, None] * np.eye(n)) @ Q.T
        R = np.trace(np.trace(B, axis1=1, axis2=2)[:, None, None] * B - B @ B, axis1=1, axis2=2)
        np.testing.assert_allclose(R, 2 * elementary_symmetric(k, 2), atol=1e-10 * max(1.0, np.abs(R).max()))


def test_positive_curvature_gives_nonnegative_ricci(ellipsoid4, bumpy_ctx):
    ric = ricci_from_gauss(shape_operator(ellipsoid4))
    assert ric.ric_min.min() > 0
    ric = ricci_from_gauss(bumpy_ctx.curvature)
    k = bumpy_ctx.curvature.principal
    convex = (k > 0).all(axis=1)
    assert (ric.ric_min[convex] > 0).all()


@pytest.mark.parametrize("t", [0.05, 0.1, 0.2, 0.3])
def test_almost_schur_on_ellipsoids(t):
    rep = almost_schur_check(gen_analytic_ellipsoid((1.0, 1.0, 1.0, 1.0 + t), 12))
    assert rep.hypotheses_ok and rep.certified
    # the integral ratio stays below the constant 9
    assert schur_ratio(gen_analytic_ellipsoid((1.0, 1.0, 1.0, 1.0 + t), 12)) ** 2 < schur_constant(3)


def test_almost_schur_higher_p_is_reported_only():
    rep = almost_schur_check(gen_analytic_ellipsoid((1.0, 1.0, 1.0, 1.2), 12), p=4)
    assert rep.asserted is False
    assert rep.lhs > 0 and rep.rhs > 0
    with pytest.raises(InvalidArgument):
        almost_schur_check(gen_analytic_ellipsoid((1.0, 1.0, 1.0, 1.2), 12), p=1.5)


def test_almost_schur_on_round_sphere():
    rep = almost_schur_check(gen_analytic_sphere(3, 2.0, 8))
    assert rep.certified and rep.notes == "both sides vanish"


def test_schur_constant():
    assert schur_constant(3) == 9.0
    assert schur_constant(4) == 4.0


@pytest.mark.parametrize("radius", [0.5, 1.0, 2.0])
def test_aubry_gap_on_spheres(radius):
    rep = aubry_deficit(gen_icosphere(4, radius=radius))
    # discretization leaves lambda_1 slightly above 2 / rho^2
    assert 0 <= rep.gap * radius**2 < 1e-3
    assert rep.relative_gap == pytest.approx(6.272235741450012e-05, rel=1e-6)
    assert rep.gate_lhs < 1e-8


def test_aubry_validation(sphere3):
    with pytest.raises(InvalidArgument):
        aubry_deficit(sphere3, s=1.0)
    with pytest.raises(NotApplicable):
        aubry_deficit(gen_analytic_sphere(2, 1.0, 8))


def test_report_validation(sphere3):
    with pytest.raises(InvalidArgument):
        einstein_report(sphere3, p=2.0)
    with pytest.raises(InvalidArgument):
        einstein_report(sphere3, q=2.0)
    with pytest.raises(InvalidArgument):
        einstein_report(gen_analytic_sphere(3, 1.0, 8), q=3.0)


def test_homothety_invariance(ellipsoid4):
    a = einstein_report(ellipsoid4)
    b = einstein_report(ellipsoid4.scaled(3.0))
    assert b.eps_E == pytest.approx(a.eps_E, rel=1e-9)
    assert b.hausdorff_over_r == pytest.approx(a.hausdorff_over_r, rel=1e-8)
    assert b.r == pytest.approx(3.0 * a.r, rel=1e-9)
    assert aubry_deficit(ellipsoid4.scaled(3.0)).relative_gap == pytest.approx(
        aubry_deficit(ellipsoid4).relative_gap, rel=1e-8
    )


def test_einstein_scan_fit():
    spec = FamilySpec("harmonic", tuple(np.linspace(0.005, 0.05, 6)), lmax=4, seed=0)
    scan = einstein_scan(spec, level=3)
    assert scan.used == 6
    assert scan.passed
    header, *rows = scan.to_csv().strip().split("\n")
    assert header.split(",") == list(EINSTEIN_COLUMNS)
    assert len(rows) == 6
    assert scan.summary()["threshold"] == pytest.approx(1 / 6 - 0.02)


def test_einstein_scan_needs_rows():
    with pytest.raises(ScanError):
        einstein_scan(FamilySpec("ellipsoid-sweep", (0.01, 0.02, 0.03)), level=2)
