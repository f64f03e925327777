import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import sparse

from geomlab.calculus import hsiung_minkowski_residual
from geomlab.context import SurfaceContext
from geomlab.curvature import custom_tensor
from geomlab.errors import DegenerateSpectrumError, InvalidArgument, NotApplicable
from geomlab.spectral import (
    assemble,
    discrete_HT,
    first_eigenpair,
    hat_gradients,
    lambda1,
    rayleigh_quotient,
    solve_lowest,
    weak_trace_integral,
)
from geomlab.surface import disjoint_union, gen_analytic_sphere, gen_icosphere


def cotan_laplacian(mesh):
    """Textbook cotangent stiffness, assembled independently of the package."""
    V, F = mesh.vertices, mesh.faces
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j, o = F[:, k], F[:, (k + 1) % 3], F[:, (k + 2) % 3]
        u, v = V[i] - V[o], V[j] - V[o]
        cot = np.einsum("ij,ij->i", u, v) / np.linalg.norm(np.cross(u, v), axis=1)
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [-0.5 * cot, -0.5 * cot, 0.5 * cot, 0.5 * cot]
    n = mesh.nv
    return sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()


def test_identity_stiffness_matches_cotangent_formula(sphere3):
    K = assemble(sphere3).stiffness
    ref = cotan_laplacian(sphere3)
    assert abs(K - ref).max() < 1e-13


def test_hat_gradients_partition_of_unity(ellipsoid4):
    G = hat_gradients(ellipsoid4)
    np.testing.assert_allclose(G.sum(axis=1), 0.0, atol=1e-12)


@pytest.mark.parametrize("T", ["id", "t1"])
def test_row_sums_and_symmetry(ellipsoid_ctx, bumpy_ctx, T):
    for ctx in (ellipsoid_ctx, bumpy_ctx):
        K = ctx.pair(T).stiffness
        scale = abs(K.diagonal()).max()
        assert np.abs(K @ np.ones(K.shape[0])).max() / scale <= 1e-10
        assert abs(K - K.T).max() == 0.0


def test_sphere_spectrum_level4(ctx4):
    ev = ctx4.spectrum().eigenvalues
    assert abs(ev[0]) < 1e-10
    np.testing.assert_allclose(ev[1:4], 2.0, rtol=1e-3)
    assert ev[4] == pytest.approx(6.0, rel=5e-3)
    assert ctx4.spectrum().max_residual < 1e-8
    assert ctx4.lambda1() == pytest.approx(1.9999994, abs=1e-6)


def test_eigenvalue_scaling():
    lam = lambda1(assemble(gen_icosphere(4, radius=2.0)))
    assert lam == pytest.approx(0.5, rel=1e-5)


def test_eigenvalue_convergence():
    errs = [abs(lambda1(assemble(gen_icosphere(L))) - 2.0) for L in (2, 3, 4)]
    assert errs[0] > errs[1] > errs[2]


def test_dense_and_sparse_paths_agree():
    m = gen_icosphere(2)  # 162 vertices, dense path
    P = assemble(m)
    a = solve_lowest(P, 6).eigenvalues
    b = sorted(np.linalg.eigvals(np.linalg.solve(np.diag(P.mass), P.stiffness.toarray())).real)[:6]
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_eigenvectors_mass_orthonormal(ctx4):
    sp = ctx4.spectrum()
    M = ctx4.pair().mass
    G = sp.eigenvectors.T @ (M[:, None] * sp.eigenvectors)
    np.testing.assert_allclose(G, np.eye(sp.k), atol=1e-8)


def test_first_eigenfunctions_are_linear(ctx4):
    sp = ctx4.spectrum()
    V = sp.eigenvectors[:, 1:4]
    X = ctx4.mesh.vertices
    coef, *_ = np.linalg.lstsq(X, V, rcond=None)
    assert np.linalg.norm(X @ coef - V) / np.linalg.norm(V) < 1e-3


def test_spectrum_is_deterministic(sphere4):
    a = solve_lowest(assemble(sphere4), 6)
    b = solve_lowest(assemble(sphere4), 6)
    np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)
    np.testing.assert_array_equal(a.eigenvectors, b.eigenvectors)


def test_disconnected_mesh_degenerate(sphere3):
    u = disjoint_union(sphere3, sphere3.translated([4.0, 0, 0]))
    with pytest.raises(DegenerateSpectrumError):
        lambda1(assemble(u))


def test_assemble_rejects_analytic():
    with pytest.raises(NotApplicable):
        assemble(gen_analytic_sphere(2, resolution=8))


def test_solve_lowest_k_range(ctx3):
    with pytest.raises(InvalidArgument):
        solve_lowest(ctx3.pair(), 0)


def test_nonsymmetric_tensor_rejected(ctx3):
    f = ctx3.curvature
    A = np.zeros_like(f.shape_operator)
    A[:, 0, 1] = 1.0
    with pytest.raises(InvalidArgument):
        assemble(ctx3.mesh, custom_tensor(f, A + np.eye(2)), curvature=f)


def test_non_elliptic_flag(ctx3):
    f = ctx3.curvature
    P = assemble(ctx3.mesh, custom_tensor(f, -np.broadcast_to(np.eye(2), f.shape_operator.shape)), curvature=f)
    assert not P.elliptic


def test_t1_equals_laplacian_on_unit_sphere(ctx4):
    # T_1 = Id there, so the operators agree up to the curvature error
    K0, K1 = ctx4.pair("id").stiffness, ctx4.pair("t1").stiffness
    assert abs(K1 - K0).max() / abs(K0).max() < 1e-3
    assert ctx4.lambda1("t1") == pytest.approx(2.0, rel=1e-3)


def test_weak_trace_identity(ellipsoid_ctx):
    # sum_a X_a^T K_T X_a equals the integral of tr T up to the face averaging
    for T in ("id", "t1"):
        P = ellipsoid_ctx.pair(T)
        f = ellipsoid_ctx.curvature
        tr = f.weights @ ellipsoid_ctx.tensor(T).trace()
        assert weak_trace_integral(P) == pytest.approx(tr, rel=2e-3)


@pytest.mark.parametrize("T", ["id", "t1"])
def test_weak_hsiung_minkowski_exact(ellipsoid_ctx, bumpy_ctx, T):
    for ctx in (ellipsoid_ctx, bumpy_ctx):
        r = hsiung_minkowski_residual(ctx.mesh, ctx.tensor(T), curvature=ctx.curvature, pair=ctx.pair(T))
        assert r.weak_relative <= 1e-8
        assert r.algebraic_relative <= 5e-3


def test_discrete_mean_curvature_vector_converges():
    # L2 error of H_T against -2 nu halves per level; the pointwise max stalls
    errs = []
    for L in (3, 4, 5):
        m = gen_icosphere(L)
        H = discrete_HT(assemble(m)).vectors
        nu = m.vertices
        e = np.linalg.norm(H + 2 * nu, axis=1)
        errs.append(np.sqrt(m.vertex_areas @ e ** 2 / m.area))
    assert errs[0] / errs[1] > 1.8 and errs[1] / errs[2] > 1.8
    assert errs[1] < 0.02


def test_discrete_ht_alignment(sphere4):
    d = discrete_HT(assemble(sphere4))
    assert d.normal_alignment < 1e-2


def test_first_eigenpair(ctx3):
    lam, f, sp = first_eigenpair(ctx3.pair())
    assert rayleigh_quotient(ctx3.pair(), f) == pytest.approx(lam, rel=1e-10)


_SMALL = SurfaceContext(gen_icosphere(2))


@given(st.integers(0, 2 ** 32 - 1))
def test_rayleigh_quotient_bounds(seed):
    f = np.random.default_rng(seed).standard_normal(_SMALL.mesh.nv)
    q = rayleigh_quotient(_SMALL.pair(), f)
    assert q >= _SMALL.lambda1() * (1 - 1e-10)


@given(st.floats(0.2, 5.0))
def test_stiffness_scale_invariant_in_2d(c):
    # the Dirichlet energy is conformally invariant in two dimensions
    m = gen_icosphere(1)
    a, b = assemble(m).stiffness, assemble(m.scaled(c)).stiffness
    assert abs(a - b).max() < 1e-12
