import itertools

import numpy as np
import pytest

from qchlab import tensor as T
from qchlab.errors import ShapeError, SingularMetricError
from qchlab.kahler import STANDARD_J, hermitian_data_at
from qchlab.qch import build_basis

from conftest import random_form, random_spd, random_sym

I4 = np.eye(4)


def e(a, b):
    w = np.zeros((4, 4))
    w[a, b], w[b, a] = 1.0, -1.0
    return w


def flat_basis():
    hd = hermitian_data_at(I4, STANDARD_J, I4[:, :2])
    return hd, build_basis(I4, STANDARD_J, hd.h)


def kn_loop(h, k):
    """Kulkarni-Nomizu product written out entry by entry."""
    out = np.zeros((4, 4, 4, 4))
    for x, y, z, t in itertools.product(range(4), repeat=4):
        out[x, y, z, t] = h[x, z] * k[y, t] + h[y, t] * k[x, z] - h[x, t] * k[y, z] - h[y, z] * k[x, t]
    return out


def test_kn_identity_slot():
    assert T.kulkarni_nomizu_sym(I4, I4)[0, 1, 0, 1] == 2.0


def test_kn_form_slot():
    w = e(0, 1)
    assert T.kulkarni_nomizu_form(w, w)[0, 1, 0, 1] == 2.0


def test_kn_matches_loop(rng):
    h, k = random_sym(rng), random_sym(rng)
    np.testing.assert_allclose(T.kulkarni_nomizu_sym(h, k), kn_loop(h, k), atol=1e-13)


def test_kn_symmetries(rng):
    for _ in range(5):
        res = T.symmetry_residuals(T.kulkarni_nomizu_sym(random_sym(rng), random_sym(rng)))
        assert max(res.values()) < 1e-12


def test_bianchi_of_symmetric_kn_vanishes(rng):
    for _ in range(20):
        assert np.abs(T.bianchi(T.kulkarni_nomizu_sym(random_sym(rng), random_sym(rng)))).max() < 1e-12


def test_bianchi_of_form_kn_is_wedge(rng):
    for _ in range(20):
        w, n = random_form(rng), random_form(rng)
        lhs = T.bianchi(T.kulkarni_nomizu_form(w, n))
        assert np.abs(lhs + 2.0 / 3.0 * T.wedge(w, n)).max() < 1e-12


def test_wedge_is_totally_antisymmetric(rng):
    W = T.wedge(random_form(rng), random_form(rng))
    for perm in itertools.permutations(range(4)):
        sign = np.linalg.det(I4[list(perm)])
        np.testing.assert_allclose(np.transpose(W, perm), sign * W, atol=1e-12)


def test_wedge_volume():
    W = T.wedge(e(0, 1), e(2, 3))
    assert W[0, 1, 2, 3] == 1.0


def test_contraction_of_kn_square_loop_oracle(rng):
    g = random_spd(rng)
    gi = np.linalg.inv(g)
    K = kn_loop(g, g)
    loop = np.zeros((4, 4))
    for y, z, i, j in itertools.product(range(4), repeat=4):
        loop[y, z] += gi[i, j] * K[i, y, z, j]
    np.testing.assert_allclose(T.ricci_contraction(K, g), loop, atol=1e-12)
    np.testing.assert_allclose(loop, -6.0 * g, atol=1e-12)


def test_k_tensor_traceless_and_bianchi():
    _, basis = flat_basis()
    K = basis.k_tensor
    assert np.abs(T.ricci_contraction(K, I4)).max() < 1e-14
    assert np.abs(T.bianchi(K)).max() < 1e-14
    assert np.abs(T.bianchi(basis.psi)).max() < 1e-14


def test_hodge_star_flat():
    np.testing.assert_allclose(T.hodge_star(e(0, 1), I4), e(2, 3), atol=1e-15)
    np.testing.assert_allclose(T.hodge_star(e(0, 1), I4, -1), -e(2, 3), atol=1e-15)


def test_hodge_star_involution_and_isometry(rng):
    g = random_spd(rng)
    a, b = random_form(rng), random_form(rng)
    np.testing.assert_allclose(T.hodge_star(T.hodge_star(a, g), g), a, atol=1e-11)
    assert abs(T.form_inner(T.hodge_star(a, g), T.hodge_star(b, g), g) - T.form_inner(a, b, g)) < 1e-10


def test_kahler_form_self_dual():
    w = T.endomorphism_to_form(STANDARD_J, I4)
    orient = T.orientation_of(w)
    np.testing.assert_allclose(T.hodge_star(w, I4, orient), w, atol=1e-15)
    assert T.form_inner(w, w, I4) == pytest.approx(2.0)


def test_orientation_degenerate_raises():
    with pytest.raises(ShapeError):
        T.orientation_of(e(0, 1))


def test_lambda2_split_flat_standard():
    b = T.lambda2_split(I4)
    np.testing.assert_allclose(b.plus[0], e(0, 1) + e(2, 3))
    np.testing.assert_allclose(b.minus[0], e(0, 1) - e(2, 3))


@pytest.mark.parametrize("orientation", [1, -1])
def test_lambda2_split_duality_and_norms(rng, orientation):
    g = random_spd(rng)
    b = T.lambda2_split(g, orientation)
    for f in b.plus:
        assert np.abs(T.hodge_star(f, g, orientation) - f).max() < 1e-10
    for f in b.minus:
        assert np.abs(T.hodge_star(f, g, orientation) + f).max() < 1e-10
    gram = np.array([[T.form_inner(x, y, g) for y in b.forms] for x in b.forms])
    np.testing.assert_allclose(gram, 2 * np.eye(6), atol=1e-10)
    phi = random_form(rng)
    np.testing.assert_allclose(b.combine(b.coefficients(phi)), phi, atol=1e-10)


def test_curvature_operator_symmetric(rng):
    g = random_spd(rng)
    R = T.kulkarni_nomizu_sym(random_sym(rng), g) + T.kulkarni_nomizu_sym(random_sym(rng), random_sym(rng))
    M = T.curvature_operator(R, g, T.lambda2_split(g))
    np.testing.assert_allclose(M, M.T, atol=1e-10)


def test_curvature_operator_zero():
    assert np.all(T.curvature_operator(np.zeros((4,) * 4), I4, T.lambda2_split(I4)) == 0)


def test_round_sphere_operator_is_identity():
    # unit 4-sphere: R(X,Y,Y,X) = 1 for orthonormal X, Y, i.e. R = -(1/2) g KN g
    R = -0.5 * T.kulkarni_nomizu_sym(I4, I4)
    np.testing.assert_allclose(T.curvature_operator(R, I4, T.lambda2_split(I4)), np.eye(6), atol=1e-14)


def test_k_tensor_spectrum_flat():
    hd, basis = flat_basis()
    split = T.lambda2_split(I4, T.orientation_of(hd.omega))
    M = T.curvature_operator(basis.k_tensor, I4, split)
    assert np.abs(M[:3, :]).max() < 1e-12
    assert np.abs(M[:, :3]).max() < 1e-12
    vals, vecs = np.linalg.eigh(M[3:, 3:])
    np.testing.assert_allclose(np.sort(vals), [-1 / 6, -1 / 6, 1 / 3], atol=1e-12)
    top = split.combine(np.concatenate([np.zeros(3), vecs[:, np.argmax(vals)]]))
    assert abs(abs(T.form_inner(top, hd.omega_bar, I4)) / 2 - 1) < 1e-12


def test_form_endomorphism_round_trip(rng):
    g = random_spd(rng)
    w = random_form(rng)
    np.testing.assert_allclose(T.endomorphism_to_form(T.form_to_endomorphism(w, g), g), w, atol=1e-12)


def test_apply_endomorphism_slot(rng):
    t = rng.normal(size=(4, 4, 4, 4))
    A = rng.normal(size=(4, 4))
    np.testing.assert_allclose(T.apply_endomorphism(t, A, 2), np.einsum("xyau,az->xyzu", t, A))


@pytest.mark.parametrize(
    "bad, exc",
    [(np.ones((3, 3)), ShapeError), (e(0, 1) + np.eye(4), ShapeError)],
)
def test_shape_checks(bad, exc):
    with pytest.raises(exc):
        T.check_two_form(bad)


def test_singular_metric_rejected():
    with pytest.raises(SingularMetricError):
        T.inverse_metric(np.diag([1.0, 1.0, 1.0, 0.0]))
