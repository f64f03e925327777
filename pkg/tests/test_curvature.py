import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from geomlab.curvature import (
    all_elementary_symmetric,
    c_of_r,
    custom_tensor,
    elementary_symmetric,
    generalized_hs,
    higher_mean_curvatures,
    maclaurin_check,
    mean_curvature_hr,
    newton_tensor,
    newton_tensors_from_matrix,
    resolve_tensor,
    shape_operator,
    tensor_label,
    trace_sb,
)
from geomlab.errors import EstimationError, InvalidArgument
from geomlab.surface import build_mesh, gen_analytic_ellipsoid, gen_ellipsoid, gen_icosphere

FUZZ = 100_000


def random_symmetric(rng, count, n, scale=1.0):
    A = rng.standard_normal((count, n, n)) * scale
    return 0.5 * (A + np.swapaxes(A, 1, 2))


def ellipsoid_curvatures(X, axes):
    """Principal curvatures of the level set sum(x^2/a^2) = 1 at X."""
    D = np.diag(np.asarray(axes, dtype=float) ** -2.0)
    g = X @ D
    gn = np.linalg.norm(g, axis=1)
    nu = g / gn[:, None]
    P = np.eye(3)[None] - nu[:, :, None] * nu[:, None, :]
    W = P @ D @ P / gn[:, None, None]
    ev = np.linalg.eigvalsh(W)
    # the normal direction contributes the zero eigenvalue
    idx = np.argsort(np.abs(ev), axis=1)[:, 1:]
    return np.sort(np.take_along_axis(ev, idx, axis=1), axis=1)


# -- mesh estimates -----------------------------------------------------------


def test_icosphere_curvature_error_by_level():
    # frozen values from the quartic jet fit; fourth-order decay
    bounds = {3: 1e-3, 4: 1e-4, 5: 1e-5}
    errs = []
    for level, bound in bounds.items():
        f = shape_operator(gen_icosphere(level))
        err = np.abs(f.principal - 1.0).max()
        assert err < bound
        errs.append(err)
    assert errs[0] / errs[1] > 8 and errs[1] / errs[2] > 8


def test_sphere_radius_scales_curvature():
    f = shape_operator(gen_icosphere(4, radius=3.0))
    np.testing.assert_allclose(f.principal, 1 / 3.0, rtol=2e-4)
    np.testing.assert_allclose(f.mean_curvature, 1 / 3.0, rtol=2e-4)


def test_ellipsoid_mean_curvature_matches_analytic():
    axes = (1.0, 1.0, 1.1)
    m = gen_ellipsoid(axes, 5)
    f = shape_operator(m)
    k = ellipsoid_curvatures(m.vertices, axes)
    H = k.mean(axis=1)
    assert np.abs(f.mean_curvature - H).max() < 1e-3
    assert np.abs(f.principal - k).max() < 1e-3


def test_ellipsoid_pole_curvature():
    m = gen_ellipsoid((1.0, 1.0, 1.2), 4)
    f = shape_operator(m)
    pole = np.argmax(m.vertices[:, 2])
    np.testing.assert_allclose(f.principal[pole], [1.2, 1.2], rtol=1e-3)


def test_normals_are_outward_and_unit(ellipsoid4):
    f = shape_operator(ellipsoid4)
    np.testing.assert_allclose(np.linalg.norm(f.normals, axis=1), 1.0, atol=1e-12)
    assert np.einsum("ij,ij->i", f.normals, ellipsoid4.vertex_normals).min() > 0.999


def test_frames_orthonormal(ellipsoid4):
    f = shape_operator(ellipsoid4)
    G = np.einsum("nij,nik->njk", f.frames, f.frames)
    np.testing.assert_allclose(G, np.broadcast_to(np.eye(2), G.shape), atol=1e-12)
    np.testing.assert_allclose(np.einsum("nij,ni->nj", f.frames, f.normals), 0.0, atol=1e-12)


def test_shape_operator_symmetric(bumpy4):
    B = shape_operator(bumpy4).shape_operator
    np.testing.assert_array_equal(B, np.swapaxes(B, 1, 2))


def test_rigid_motion_invariance(ellipsoid4):
    from scipy.spatial.transform import Rotation

    R = Rotation.from_rotvec([0.3, -0.2, 0.9]).as_matrix()
    moved = ellipsoid4.with_vertices(ellipsoid4.vertices @ R.T + [1.0, 2.0, -0.5])
    a, b = shape_operator(ellipsoid4), shape_operator(moved)
    np.testing.assert_allclose(a.principal, b.principal, atol=1e-9)
    np.testing.assert_allclose(b.normals, a.normals @ R.T, atol=1e-9)


def test_tetrahedron_is_rank_deficient():
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1.0]])
    f = np.array([[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]])
    with pytest.raises(EstimationError) as info:
        shape_operator(build_mesh(v, f))
    assert info.value.vertex is not None


def test_coarse_icosahedron_falls_back_to_quadric():
    f = shape_operator(gen_icosphere(0))
    assert np.all(np.isfinite(f.principal))
    np.testing.assert_allclose(f.principal, f.principal[0, 0])


def test_analytic_shape_operator_matches_level_set():
    axes = (1.0, 1.2, 0.9)
    e = gen_analytic_ellipsoid(axes, 12)
    f = shape_operator(e)
    np.testing.assert_allclose(f.principal, ellipsoid_curvatures(e.points, axes), atol=1e-12)


def test_gauss_bonnet(ellipsoid4, bumpy4):
    for m in (ellipsoid4, bumpy4):
        f = shape_operator(m)
        K = mean_curvature_hr(f, 2)
        assert f.weights @ K == pytest.approx(4 * np.pi, rel=2e-3)


def test_shape_operator_rejects_other_types():
    with pytest.raises(InvalidArgument):
        shape_operator(np.zeros((3, 3)))


# -- symmetric functions (fuzz) -------------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_elementary_symmetric_vs_poly(n, rng):
    k = rng.standard_normal((200, n))
    S = all_elementary_symmetric(k)
    for i in range(len(k)):
        coeffs = np.poly(k[i])
        ref = np.array([(-1) ** r * coeffs[r] for r in range(n + 1)])
        np.testing.assert_allclose(S[i, : n + 1], ref, rtol=1e-12, atol=1e-12)
    assert np.all(S[:, n + 1] == 0)
    for r in range(n + 2):
        np.testing.assert_array_equal(elementary_symmetric(k, r), S[:, r])


def test_elementary_symmetric_order_range():
    with pytest.raises(InvalidArgument):
        elementary_symmetric(np.ones(3), 5)
    with pytest.raises(InvalidArgument):
        c_of_r(2, 3)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_newton_trace_identities_fuzz(n, rng):
    B = random_symmetric(rng, FUZZ, n)
    k = np.linalg.eigvalsh(B)
    H = higher_mean_curvatures(k)
    S = all_elementary_symmetric(k)
    worst_tr = worst_b = 0.0
    for r in range(n):
        T = newton_tensors_from_matrix(B, r)
        tr = np.trace(T, axis1=1, axis2=2)
        scale = np.maximum(np.abs(c_of_r(n, r) * H[:, r]), 1.0)
        worst_tr = max(worst_tr, float(np.max(np.abs(tr - c_of_r(n, r) * H[:, r]) / scale)))
        trb = np.einsum("nij,nji->n", T, B)
        scale = np.maximum(np.abs((r + 1) * S[:, r + 1]), 1.0)
        worst_b = max(worst_b, float(np.max(np.abs(trb - (r + 1) * S[:, r + 1]) / scale)))
    assert worst_tr <= 1e-12
    assert worst_b <= 1e-12


@pytest.mark.parametrize("n", [2, 3, 4])
def test_cayley_hamilton(n, rng):
    # S_n Id - B T_{n-1} = 0
    B = random_symmetric(rng, 2000, n)
    S = all_elementary_symmetric(np.linalg.eigvalsh(B))
    T = newton_tensors_from_matrix(B, n - 1)
    R = S[:, n, None, None] * np.eye(n) - B @ T
    assert np.abs(R).max() < 1e-12 * max(1.0, np.abs(S).max())


@given(hnp.arrays(np.float64, (3,), elements=st.floats(-5, 5)))
def test_newton_tensors_commute_with_B(k):
    Q, _ = np.linalg.qr(np.arange(9.0).reshape(3, 3) + np.eye(3) * 7)
    B = Q @ np.diag(k) @ Q.T
    for r in range(3):
        T = newton_tensors_from_matrix(B, r)
        np.testing.assert_allclose(T @ B, B @ T, atol=1e-10 * (1 + np.abs(k).max()) ** 3)


@pytest.mark.parametrize("n", [2, 3, 4, 6])
def test_maclaurin_positive_spectra_fuzz(n, rng):
    k = rng.exponential(size=(FUZZ, n))
    rep = maclaurin_check(k)
    assert rep.ok
    assert rep.max_violation <= 1e-12
    assert rep.chain_checked == (FUZZ,) * n


def test_maclaurin_real_spectra_newton_only(rng):
    k = rng.standard_normal((FUZZ, 4))
    rep = maclaurin_check(k)
    assert rep.newton_ok
    assert rep.chain_ok


def test_maclaurin_umbilic_equality():
    rep = maclaurin_check(np.full((10, 3), 0.7))
    assert rep.ok
    assert rep.max_equality_gap < 1e-14


def test_maclaurin_negative_umbilic_not_gated():
    # H_2 > 0 but H_1 < 0: the root chain does not apply
    rep = maclaurin_check(np.array([[-1.0, -1.0, -1.0]]))
    assert rep.chain_checked == (0, 0, 0)
    assert rep.ok


@given(hnp.arrays(np.float64, (2, 3), elements=st.floats(1e-3, 1e3)))
def test_maclaurin_property(k):
    assert maclaurin_check(k).ok


# -- tensor fields --------------------------------------------------------------


def test_sphere_newton_tensors(ctx4):
    f = ctx4.curvature
    T1 = newton_tensor(f, 1)
    # T_1 = S_1 Id - B = Id on the unit sphere
    np.testing.assert_allclose(T1.tensors, np.broadcast_to(np.eye(2), T1.tensors.shape), atol=1e-4)
    assert T1.is_positive_definite()
    np.testing.assert_allclose(T1.trace(), c_of_r(2, 1) * mean_curvature_hr(f, 1), rtol=1e-12)


def test_resolve_tensor_selectors(ctx4):
    f = ctx4.curvature
    assert tensor_label(resolve_tensor(f, None)) == tensor_label(resolve_tensor(f, "id"))
    assert resolve_tensor(f, "t1").order == 1
    assert resolve_tensor(f, "tr1").order == 1
    assert resolve_tensor(f, 0).order == 0
    for bad in ("t2", "x", "t-1"):
        with pytest.raises(InvalidArgument):
            resolve_tensor(f, bad)


def test_custom_tensor(ctx4):
    f = ctx4.curvature
    T = custom_tensor(f, 2.0 * newton_tensor(f, 0).tensors, label="twice")
    assert tensor_label(T) == "twice"
    with pytest.raises(InvalidArgument):
        custom_tensor(f, np.zeros((3, 2, 2)))


def test_generalized_hs_sphere(ctx4):
    f = ctx4.curvature
    H = generalized_hs(f, "id")
    np.testing.assert_allclose(H, -2.0 * f.normals, atol=2e-4)
    np.testing.assert_allclose(trace_sb(f, resolve_tensor(f, "t1")), 2 * mean_curvature_hr(f, 2), rtol=1e-12)
