import json

import numpy as np
import pytest

from qchlab.campaign import structure_at
from qchlab.curvature import conformal_scalar_curvature, curvature_data, curvature_from_riemann, wminus_spectrum
from qchlab.errors import PreconditionError, ZeroVectorError
from qchlab.kahler import STANDARD_J, hermitian_data_at
from qchlab import tensor as T
from qchlab.qch import (
    IdentityResult,
    QchCoefficients,
    VerificationReport,
    basis_for,
    build_basis,
    build_basis_kn,
    complementary_coefficients,
    distribution_from_opposite,
    extract_coefficients,
    extract_coefficients_lstsq,
    full_decomposition_check,
    holomorphic_sectional_curvature,
    kahler_type_residual,
    constant_ratio_fingerprint,
    pseudosymmetry_residual,
    qch_residual,
    ricci_eigen_check,
    wminus_structure_check,
)

from conftest import ALL_FAMILIES, EXPLICIT, ORACLE_FAMILIES, family, family_id, random_sym

I4 = np.eye(4)
QCH_FAMILIES = [("calabi", {}), ("orthotoric", {}), ("orthotoric", {"F": [1, 0, 1, 0, 1], "G": [-8, 0, 1]})]


def flat_data():
    hd = hermitian_data_at(I4, STANDARD_J, I4[:, :2])
    return hd, basis_for(hd)


def point_data(inst, p):
    J, _ = structure_at(inst, p)
    hd = inst.hermitian_at(p, J)
    cd = curvature_data(inst.metric, J, p)
    return cd, hd


def test_basis_values_on_e_and_d():
    hd, basis = flat_data()
    for X, expected in ((I4[2], (1, 0, 0)), (I4[0], (1, 1, 1))):
        got = [holomorphic_sectional_curvature(t, I4, STANDARD_J, X) for t in (basis.pi, basis.phi, basis.psi)]
        np.testing.assert_allclose(got, expected, atol=1e-15)


def test_basis_value_is_polynomial_in_t(rng):
    _, basis = flat_data()
    for _ in range(10):
        X = rng.normal(size=4)
        X /= np.linalg.norm(X)
        t2 = X[0] ** 2 + X[1] ** 2
        assert holomorphic_sectional_curvature(basis.phi, I4, STANDARD_J, X) == pytest.approx(t2, abs=1e-14)
        assert holomorphic_sectional_curvature(basis.psi, I4, STANDARD_J, X) == pytest.approx(t2 * t2, abs=1e-14)


@pytest.mark.parametrize("item", EXPLICIT, ids=family_id)
def test_dual_constructions_agree(item):
    inst = family(*item)
    hd = inst.hermitian_at(inst.sample(1, seed=1)[0])
    a, b = build_basis(hd.g, hd.J, hd.h), build_basis_kn(hd.g, hd.J, hd.h)
    for x, y in ((a.pi, b.pi), (a.phi, b.phi), (a.psi, b.psi)):
        assert np.abs(x - y).max() < 1e-12


@pytest.mark.parametrize("item", EXPLICIT, ids=family_id)
def test_basis_tensors_are_kahler_curvature_tensors(item):
    inst = family(*item)
    hd = inst.hermitian_at(inst.sample(1, seed=1)[0])
    for t in (lambda b: b.pi, lambda b: b.phi, lambda b: b.psi):
        tensor = t(basis_for(hd))
        assert max(T.symmetry_residuals(tensor).values()) < 1e-12
        assert kahler_type_residual(tensor, hd.J) < 1e-12


def test_pi_holomorphic_curvature_homogeneous(rng):
    _, basis = flat_data()
    X = rng.normal(size=4)
    assert holomorphic_sectional_curvature(basis.pi, I4, STANDARD_J, X) == pytest.approx(1.0)
    assert holomorphic_sectional_curvature(basis.pi, I4, STANDARD_J, 2 * X) == pytest.approx(1.0)


def test_zero_vector_rejected():
    with pytest.raises(ZeroVectorError):
        holomorphic_sectional_curvature(np.zeros((4,) * 4), I4, STANDARD_J, np.zeros(4))


def test_space_form_holomorphic_curvature_constant(rng):
    inst = family("space_form")
    values = []
    for p in inst.sample(5, seed=0):
        cd, hd = point_data(inst, p)
        values += [holomorphic_sectional_curvature(cd.riemann, cd.g, hd.J, X) for X in rng.normal(size=(20, 4))]
    assert np.ptp(values) < 1e-8
    assert np.mean(values) == pytest.approx(4.0, abs=1e-9)


def test_extract_from_pi():
    hd, basis = flat_data()
    c = extract_coefficients(basis.pi, I4, STANDARD_J, hd.p_D)
    np.testing.assert_allclose(c.as_tuple(), (1, 0, 0), atol=1e-14)
    assert c.fit_residual < 1e-14


@pytest.mark.parametrize("key", ["space_form", "product_1_1", "product_1_-1"])
def test_extract_matches_brute_force_oracle(oracle, key):
    inst = family(*ORACLE_FAMILIES[key])
    cd, hd = point_data(inst, np.array(oracle[key]["point"]))
    c = extract_coefficients(cd.riemann, cd.g, hd.J, hd.p_D)
    np.testing.assert_allclose(c.as_tuple(), oracle[key]["abc_brute_force"], atol=1e-9)


@pytest.mark.parametrize("item", ALL_FAMILIES, ids=family_id)
def test_lstsq_agrees_with_nodes(item):
    inst = family(*item)
    cd, hd = point_data(inst, inst.sample(1, seed=9)[0])
    a = extract_coefficients(cd.riemann, cd.g, hd.J, hd.p_D)
    b = extract_coefficients_lstsq(cd.riemann, cd.g, hd.J, hd.p_D, rng=np.random.default_rng(1))
    np.testing.assert_allclose(a.as_tuple(), b.as_tuple(), atol=1e-8)


@pytest.mark.parametrize("item", ALL_FAMILIES, ids=family_id)
def test_qch_residual_small(item):
    inst = family(*item)
    tol = 1e-8 if inst.name != "kowalski" else 1e-5
    for p in inst.sample(5, seed=3):
        cd, hd = point_data(inst, p)
        c = extract_coefficients(cd.riemann, cd.g, hd.J, hd.p_D)
        assert c.fit_residual < tol
        assert qch_residual(cd.riemann, c, basis_for(hd)) < tol


def test_derived_quantities():
    c = QchCoefficients(1.0, -2.0, 2.0)
    assert (c.lam, c.mu, c.delta, c.kappa) == (1.0, 1.0, 0.0, 4.0)
    assert QchCoefficients(4.0, 0.0, 0.0).row() == {"a": 4, "b": 0, "c": 0, "lambda": 6, "mu": 6, "delta": 0, "kappa": 0}


def test_complementary_arithmetic():
    for abc in [(1.0, -2.0, 2.0), (3.0, 0.0, 0.0), (0.3, 1.7, -0.4)]:
        c = QchCoefficients(*abc)
        np.testing.assert_allclose(complementary_coefficients(complementary_coefficients(c)).as_tuple(), abc)
    np.testing.assert_allclose(complementary_coefficients(QchCoefficients(1, -2, 2)).as_tuple(), (1, -2, 2))
    np.testing.assert_allclose(complementary_coefficients(QchCoefficients(3, 0, 0)).as_tuple(), (3, 0, 0))


@pytest.mark.parametrize("item", ALL_FAMILIES, ids=family_id)
def test_complementary_distribution(item):
    inst = family(*item)
    tol = 1e-8 if inst.name != "kowalski" else 1e-5
    cd, hd = point_data(inst, inst.sample(1, seed=4)[0])
    c = extract_coefficients(cd.riemann, cd.g, hd.J, hd.p_D)
    sw = hd.swapped()
    assert qch_residual(cd.riemann, complementary_coefficients(c), basis_for(sw)) < tol
    direct = extract_coefficients(cd.riemann, cd.g, hd.J, sw.p_D)
    np.testing.assert_allclose(direct.as_tuple(), complementary_coefficients(c).as_tuple(), atol=tol)


@pytest.mark.parametrize("params, lam, mu", [({"k1": 1, "k2": 1}, 1.0, 1.0), ({"k1": 1, "k2": -1}, -1.0, 1.0)])
def test_ricci_eigenvalues_products(params, lam, mu):
    inst = family("product", params)
    cd, hd = point_data(inst, inst.sample(1, seed=0)[0])
    c = extract_coefficients(cd.riemann, cd.g, hd.J, hd.p_D)
    assert (c.lam, c.mu) == (pytest.approx(lam, abs=1e-9), pytest.approx(mu, abs=1e-9))
    assert max(ricci_eigen_check(cd, hd, c).values()) < 1e-9


def test_operator_spectrum_through_curvature_pipeline():
    hd, basis = flat_data()
    cd = curvature_from_riemann(basis.k_tensor, I4, STANDARD_J)
    assert np.abs(cd.wplus).max() < 1e-14
    np.testing.assert_allclose(cd.wminus, basis.k_tensor, atol=1e-14)
    spec = wminus_spectrum(cd)
    np.testing.assert_allclose(spec.eigenvalues, [1 / 3, -1 / 6, -1 / 6], atol=1e-12)
    assert abs(T.form_inner(spec.simple_form, hd.omega_bar, I4)) / 2 == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("item", QCH_FAMILIES, ids=family_id)
def test_wminus_structure(item):
    inst = family(*item)
    for p in inst.sample(3, seed=5):
        cd, hd = point_data(inst, p)
        c = extract_coefficients(cd.riemann, cd.g, hd.J, hd.p_D)
        wm = wminus_structure_check(cd, hd, c, basis_for(hd))
        assert wm["wminus"] < 1e-7 and wm["spectrum"] < 1e-7
        assert wm["degenerate"] and wm["has_simple"]
        assert wm["alignment"] > 1 - 1e-8


def test_wminus_vanishes_for_c_zero():
    inst = family("product", {"k1": 1, "k2": -1})
    cd, hd = point_data(inst, inst.sample(1, seed=0)[0])
    c = extract_coefficients(cd.riemann, cd.g, hd.J, hd.p_D)
    assert abs(c.c) < 1e-9
    wm = wminus_structure_check(cd, hd, c, basis_for(hd))
    assert wm["wminus"] < 1e-9 and not wm["has_simple"]


@pytest.mark.parametrize("item", QCH_FAMILIES + [("product", {"k1": 1, "k2": 1}), ("space_form", {})], ids=family_id)
def test_reconstruction_from_invariants(item):
    inst = family(*item)
    for p in inst.sample(3, seed=6):
        cd, hd = point_data(inst, p)
        c = extract_coefficients(cd.riemann, cd.g, hd.J, hd.p_D)
        rec = full_decomposition_check(cd, hd)
        np.testing.assert_allclose(rec["coefficients"].as_tuple(), c.as_tuple(), atol=1e-8)


def test_reconstruction_space_form_values():
    inst = family("space_form")
    cd, hd = point_data(inst, inst.sample(1, seed=0)[0])
    rec = full_decomposition_check(cd, hd)
    assert rec["delta"] == pytest.approx(0, abs=1e-12) and rec["kappa"] == pytest.approx(0, abs=1e-10)
    np.testing.assert_allclose(rec["coefficients"].as_tuple(), (cd.tau / 6, 0, 0), atol=1e-10)


def test_reconstruction_precondition(rng):
    hd, _ = flat_data()
    R = T.kulkarni_nomizu_sym(random_sym(rng), I4)
    with pytest.raises(PreconditionError):
        full_decomposition_check(curvature_from_riemann(R, I4, STANDARD_J), hd)


@pytest.mark.parametrize("item", QCH_FAMILIES, ids=family_id)
def test_pseudosymmetry(item):
    inst = family(*item)
    for p in inst.sample(3, seed=7):
        cd, hd = point_data(inst, p)
        c = extract_coefficients(cd.riemann, cd.g, hd.J, hd.p_D)
        assert pseudosymmetry_residual(cd, basis_for(hd), c) < 1e-7
        # the identity is not trivially satisfied by any factor
        assert pseudosymmetry_residual(cd, basis_for(hd), c, factor=(cd.tau - c.kappa) / 6 + 1) > 1e-3


def test_pseudosymmetry_space_form_exact():
    inst = family("space_form")
    cd, hd = point_data(inst, inst.sample(1, seed=0)[0])
    c = extract_coefficients(cd.riemann, cd.g, hd.J, hd.p_D)
    assert pseudosymmetry_residual(cd, basis_for(hd), c) < 1e-12


def _fingerprint(name, n=5):
    inst = family(name)
    coeffs, kappas, taus = [], [], []
    for p in inst.sample(n, seed=1):
        cd, hd = point_data(inst, p)
        c = extract_coefficients(cd.riemann, cd.g, hd.J, hd.p_D)
        coeffs.append(c)
        kappas.append(conformal_scalar_curvature(cd, hd.Jbar))
        taus.append(cd.tau)
    return constant_ratio_fingerprint(coeffs, kappas, taus)


def test_fingerprint_labels():
    assert _fingerprint("space_form")["case"] == "a"
    assert _fingerprint("kowalski")["case"] == "c"
    assert _fingerprint("calabi")["case"] == "other"


@pytest.mark.parametrize("item", QCH_FAMILIES + [("kowalski", {})], ids=family_id)
def test_distribution_from_opposite_structure(item):
    inst = family(*item)
    for p in inst.sample(2, seed=8):
        cd, hd = point_data(inst, p)
        out = distribution_from_opposite(cd.riemann, cd.g, hd.J, inst.jbar_at(p, hd))
        assert out["residual"] < 1e-6
        # both kernels work, since the complement of D is QCH too
        assert max(out["residuals"].values()) < 1e-6


def test_identity_result_and_report_round_trip():
    assert IdentityResult("x", 1e-9, 1e-8).passed
    assert not IdentityResult("x", float("nan"), 1e-8).passed
    rep = VerificationReport("fam", {"k": 1}, 3, {"qch": 1e-8})
    rep.add({"index": 1, "point": [0, 0, 0, 0], "error": None, "residuals": {"qch": 1e-7}})
    rep.add({"index": 0, "point": [0, 0, 0, 1], "error": "DomainError: x", "residuals": {}})
    assert not rep.passed
    assert {f[1] for f in rep.failures()} == {"qch", "error"}
    again = VerificationReport.from_dict(json.loads(json.dumps(rep.to_dict())))
    assert again.to_dict() == rep.to_dict()
    merged = rep.merge(VerificationReport("fam", {"k": 1}, 3, {"qch": 1e-8}))
    assert [r["index"] for r in merged.records] == [0, 1]
