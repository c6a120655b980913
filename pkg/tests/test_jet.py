import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qchlab.errors import DomainError, NonFiniteError
from qchlab.jet import (
    Chart,
    Jet2,
    ScalarField,
    as_point,
    cos,
    evaluate,
    exp,
    fd_derivatives,
    finite_difference_jet,
    float_array,
    jet_array,
    log,
    sin,
    sqrt,
)

from conftest import ALL_FAMILIES, family, family_id


def test_square_exact():
    j = evaluate(ScalarField(lambda x: x[0] ** 2), (3, 0, 0, 0))
    assert j.value == 9
    np.testing.assert_array_equal(j.grad, [6, 0, 0, 0])
    np.testing.assert_array_equal(j.hess, np.diag([2.0, 0, 0, 0]))


def test_sqrt_at_origin():
    j = evaluate(ScalarField(lambda x: sqrt(x[0] ** 2 + x[1] ** 2 + 1)), np.zeros(4))
    assert j.value == 1
    np.testing.assert_allclose(j.grad, 0, atol=1e-15)
    np.testing.assert_allclose(j.hess, np.diag([1.0, 1, 0, 0]), atol=1e-15)


def test_kowalski_component_against_fd():
    f = ScalarField(lambda x: -x[0] + sqrt(x[0] ** 2 + x[1] ** 2 + 1))
    p = (1.0, 2.0, 0.3, -0.4)
    a, b = evaluate(f, p), finite_difference_jet(f, p, 1e-4)
    assert abs(a.value - b.value) < 1e-12
    np.testing.assert_allclose(a.grad, b.grad, atol=1e-6)
    np.testing.assert_allclose(a.hess, b.hess, atol=1e-6)


def test_fd_square_gradient():
    j = finite_difference_jet(ScalarField(lambda x: x[0] * x[0]), (3, 0, 0, 0), 1e-4)
    assert abs(j.grad[0] - 6) < 1e-8


def test_fd_constant():
    j = finite_difference_jet(ScalarField(lambda x: 2.5), (0.1, 0.2, 0.3, 0.4))
    np.testing.assert_allclose(j.grad, 0, atol=1e-12)
    np.testing.assert_allclose(j.hess, 0, atol=1e-6)


def test_elementary_functions():
    p = np.array([0.3, -0.2, 0.5, 0.7])
    f = ScalarField(lambda x: exp(x[0] * x[1]) + log(2 + x[2]) * sin(x[3]) + cos(x[0]) / (1 + x[1] ** 2) + x[2] ** 3)
    a, b = evaluate(f, p), finite_difference_jet(f, p)
    np.testing.assert_allclose(a.grad, b.grad, atol=1e-8)
    np.testing.assert_allclose(a.hess, b.hess, atol=1e-6)


def test_jet_power_with_jet_exponent():
    p = np.array([1.5, 0.5, 0, 0])
    f = ScalarField(lambda x: x[0] ** x[1])
    a, b = evaluate(f, p), finite_difference_jet(f, p)
    np.testing.assert_allclose(a.hess, b.hess, atol=1e-6)


def test_hessian_symmetric_as_stored():
    j = evaluate(ScalarField(lambda x: x[0] * x[1] * x[2] + x[3] / (1 + x[0] ** 2)), (0.1, 0.2, 0.3, 0.4))
    np.testing.assert_array_equal(j.hess, j.hess.T)


def test_domain_error_outside():
    f = ScalarField(lambda x: log(x[0]), Chart((0, -1, -1, -1), (1, 1, 1, 1)))
    with pytest.raises(DomainError):
        evaluate(f, (-0.5, 0, 0, 0))


def test_non_finite_error():
    with pytest.raises(NonFiniteError):
        evaluate(ScalarField(lambda x: 1.0 / x[0]), (0, 0, 0, 0))


@pytest.mark.parametrize("bad", [(1, 2, 3), (0, 0, np.nan, 0), (np.inf, 0, 0, 0)])
def test_point_validation(bad):
    with pytest.raises(DomainError):
        as_point(bad)


def test_fd_stencil_shrinks_near_boundary():
    chart = Chart((0, -1, -1, -1), (1, 1, 1, 1))
    f = ScalarField(lambda x: x[0] ** 2 + x[0] * x[1], chart)
    p = (5e-5, 0.2, 0, 0)
    a, b = evaluate(f, p), finite_difference_jet(f, p, 1e-4)
    np.testing.assert_allclose(a.grad, b.grad, atol=1e-9)
    np.testing.assert_allclose(a.hess, b.hess, atol=1e-4)


def test_fd_stencil_fails_at_boundary():
    chart = Chart((0, -1, -1, -1), (1, 1, 1, 1))
    with pytest.raises(DomainError):
        finite_difference_jet(ScalarField(lambda x: x[0], chart), (1e-7, 0, 0, 0))


def test_chain_rule_affine_pullback(rng):
    A = rng.normal(size=(4, 4))
    c = rng.normal(size=4)
    base = lambda y: sin(y[0]) * y[1] + exp(0.3 * y[2]) * y[3] ** 2
    p = rng.normal(size=4) * 0.3

    def pulled(x):
        y = [sum(A[i, k] * x[k] for k in range(4)) + c[i] for i in range(4)]
        return base(y)

    jf = evaluate(ScalarField(pulled), p)
    jb = evaluate(ScalarField(base), A @ p + c)
    np.testing.assert_allclose(jf.grad, A.T @ jb.grad, atol=1e-12)
    np.testing.assert_allclose(jf.hess, A.T @ jb.hess @ A, atol=1e-12)


def test_jet_array_treats_numbers_as_constants():
    v, d, dd = jet_array(lambda x: [[x[0] * x[1], 3.0], [1.0, x[2]]], (1, 2, 3, 4))
    np.testing.assert_array_equal(v, [[2, 3], [1, 3]])
    np.testing.assert_array_equal(d[0, 0], [2, 1, 0, 0])
    np.testing.assert_array_equal(d[0, 1], 0)


def test_jet_ops_with_arrays():
    x = Jet2.variable(2.0, 0)
    out = x * np.array([1.0, 2.0])
    assert out[1].value == 4.0 and out[1].grad[0] == 2.0


@pytest.mark.parametrize("item", ALL_FAMILIES, ids=family_id)
def test_metric_jets_match_fd(item):
    inst = family(*item)
    for p in inst.sample(5, seed=3):
        g, dg, ddg = inst.metric.jet(p)
        g2, dg2, ddg2 = fd_derivatives(lambda q: float_array(inst.metric.components, q), p, 1e-4, inst.chart.contains)
        np.testing.assert_allclose(g, g2, atol=1e-14)
        np.testing.assert_allclose(dg, dg2, atol=1e-6)
        np.testing.assert_allclose(ddg, ddg2, atol=1e-6)


poly_coef = st.lists(st.floats(-2, 2), min_size=6, max_size=6)


@settings(max_examples=40, deadline=None)
@given(poly_coef, st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_property_jet_vs_fd(cs, p):
    def fn(x):
        return cs[0] * x[0] * x[1] + cs[1] * x[2] ** 3 + cs[2] * sqrt(2 + x[3] ** 2) + cs[3] / (3 + x[0]) + cs[4] * exp(0.5 * x[1]) + cs[5]

    a, b = evaluate(ScalarField(fn), p), finite_difference_jet(ScalarField(fn), p)
    np.testing.assert_allclose(a.grad, b.grad, atol=1e-6)
    np.testing.assert_allclose(a.hess, b.hess, atol=1e-6)
