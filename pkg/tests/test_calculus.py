import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from noetherlab.calculus import (
    DerivativeConfig,
    DiffeoMap,
    FieldFn,
    SingularMapError,
    VectorField,
    adjoint,
    adjoint_inverse,
    bivector_matrix,
    curl_of_adjoint_residual,
    curl_term_adjoint,
    curl_term_differential,
    differential,
    differential_inverse,
    directional_derivative,
    infinitesimal_induced,
    lie_flow,
    lie_series,
    multivector_gradient,
    outermorphism,
    vector_derivative,
)
from noetherlab.ga import Algebra, GradeError, Multivector

A3 = Algebra(3)
e1, e2, e3 = (A3.basis(i) for i in (1, 2, 3))
e12 = A3.parse("e12")

matrices = st.lists(st.floats(-2, 2), min_size=9, max_size=9).map(lambda x: np.array(x).reshape(3, 3))
vectors = st.lists(st.floats(-2, 2), min_size=3, max_size=3)


def nonlinear_map():
    def fwd(q):
        return np.array([q[0] + 0.2 * math.sin(q[1]), q[1] + 0.1 * q[2] ** 2, q[2] + 0.3 * q[0]])

    def jac(q):
        return np.array([[1, 0.2 * math.cos(q[1]), 0], [0, 1, 0.2 * q[2]], [0.3, 0, 1]])

    return DiffeoMap(A3, fwd, jacobian=jac, name="nonlinear")


def test_derivative_config_rejects_bad_step():
    with pytest.raises(ValueError):
        DerivativeConfig(h=0)


def test_directional_derivative_and_gradient():
    F = lambda q: q[0] ** 2 * q[1]
    q = np.array([1.0, 2.0, 0.5])
    assert math.isclose(directional_derivative(F, e1, q), 4.0, rel_tol=1e-8)
    g = vector_derivative(F, q, A3)
    assert g.allclose(A3.vector([4.0, 1.0, 0.0]), atol=1e-8)
    with pytest.raises(GradeError):
        directional_derivative(F, e12, q)


def test_fieldfn_checks_analytic_derivative():
    ok = FieldFn(A3, lambda q: q @ q, lambda q, a: 2 * q @ a)
    assert ok.derivative([1, 0, 0], [0, 1, 0]) == 0.0
    with pytest.raises(ValueError):
        FieldFn(A3, lambda q: q @ q, lambda q, a: 3 * q @ a)


def test_vector_field_checks_jacobian():
    with pytest.raises(ValueError):
        VectorField(A3, lambda q: q ** 2, lambda q: np.eye(3))
    v = VectorField(A3, lambda q: q ** 2, lambda q: np.diag(2 * q))
    assert v.has_jacobian


def test_bivector_matrix_matches_inner_product(rng):
    c = np.zeros(8)
    c[A3.grade_indices(2)] = rng.normal(size=3)
    B = Multivector(A3, c)
    M = bivector_matrix(B)
    for _ in range(5):
        a = rng.normal(size=3)
        assert np.allclose(M @ a, (A3.vector(a) | B).vector_part(), atol=1e-14)


@given(matrices, vectors, vectors)
def test_outermorphism_of_wedge(M, a, b):
    a, b = A3.vector(a), A3.vector(b)
    Ma = A3.vector(M @ a.vector_part())
    Mb = A3.vector(M @ b.vector_part())
    assert outermorphism(M, a ^ b).allclose(Ma ^ Mb, atol=1e-9)
    assert outermorphism(M, A3.scalar(2.5)) == A3.scalar(2.5)


@given(matrices)
def test_outermorphism_pseudoscalar_is_determinant(M):
    I = A3.parse("e123")
    assert outermorphism(M, I).allclose(np.linalg.det(M) * I, atol=1e-9)


def test_adjoint_identity_analytic(rng):
    f = nonlinear_map()
    for _ in range(20):
        q = rng.uniform(-1, 1, 3)
        a, b = A3.vector(rng.normal(size=3)), A3.vector(rng.normal(size=3))
        lhs = (adjoint(f, b, q) | a).scalar
        rhs = (b | differential(f, a, q)).scalar
        assert abs(lhs - rhs) <= 1e-12
        B = a ^ b
        assert (adjoint_inverse(f, adjoint(f, B, q), q)).allclose(B, atol=1e-12)
        assert (differential_inverse(f, differential(f, B, q), q)).allclose(B, atol=1e-12)


def test_singular_jacobian_detected():
    squash = DiffeoMap(A3, lambda q: np.array([q[0], q[1], 0.0]), jacobian=lambda q: np.diag([1.0, 1.0, 0.0]),
                       check=False)
    with pytest.raises(SingularMapError):
        adjoint_inverse(squash, e1, np.zeros(3))


def test_rotation_map_matches_rotor():
    f = DiffeoMap.rotation((math.pi / 2) * e12)
    assert np.allclose(f([1.0, 0, 0]), [0, 1.0, 0])
    c = np.array([1.0, 1.0, 0.0])
    g = DiffeoMap.rotation((math.pi / 2) * e12, center=c)
    assert np.allclose(g(c), c)


def test_newton_inverse():
    f = DiffeoMap(A3, lambda q: q + 0.1 * np.sin(q), check=False)
    q = np.array([0.3, -0.7, 1.2])
    assert np.allclose(f.inverse_point(f(q)), q, atol=1e-12)
    inv = f.inverse()
    assert np.allclose(inv(f(q)), q, atol=1e-12)


def test_lie_flow_of_linear_field_matches_expm(rng):
    M = rng.normal(size=(3, 3)) * 0.5
    v = VectorField.affine(A3, M)
    q = rng.normal(size=3)
    assert np.allclose(lie_flow(v, q, 0.8), expm(0.8 * M) @ q, atol=1e-9)
    assert np.allclose(lie_flow(v, lie_flow(v, q, 0.8), -0.8), q, atol=1e-9)


def test_rotation_generator_flow_is_rigid():
    v = VectorField.rotation(e12)
    q = np.array([1.0, 0.0, 0.3])
    # e1 . e12 = e2, so the flow turns e1 toward e2
    assert np.allclose(v(q), [0.0, 1.0, 0.0])
    out = lie_flow(v, q, math.pi / 2)
    assert np.allclose(out, [0.0, 1.0, 0.3], atol=1e-9)


def test_lie_series_low_order():
    v = VectorField.affine(A3, np.diag([1.0, 0.0, -1.0]))
    q = np.array([1.0, 2.0, 1.0])
    tau = 0.1
    approx = lie_series(v, q, tau, 3)
    exact = np.array([math.exp(tau), 2.0, math.exp(-tau)])
    assert np.allclose(approx, exact, atol=1e-5)


def test_infinitesimal_variants_first_order(rng):
    v = VectorField(A3, lambda q: np.array([math.sin(q[1]), q[0] * q[2], 0.5 * q[0] ** 2]),
                    lambda q: np.array([[0, math.cos(q[1]), 0], [q[2], 0, q[0]], [q[0], 0, 0]]))
    q = rng.uniform(-1, 1, 3)
    B = A3.parse("e12 + 0.5*e23")
    errs = []
    for eps in (1e-2, 1e-3):
        f = DiffeoMap(A3, lambda x, e=eps: x + e * v(x), jacobian=lambda x, e=eps: np.eye(3) + e * v.jacobian(x),
                      check=False)
        e_d = (differential(f, B, q) - infinitesimal_induced(v, B, q, eps, "differential")).norm()
        e_a = (adjoint(f, B, q) - infinitesimal_induced(v, B, q, eps, "adjoint")).norm()
        e_ai = (adjoint_inverse(f, B, q) - infinitesimal_induced(v, B, q, eps, "adjoint_inverse")).norm()
        e_di = (differential_inverse(f, B, q) - infinitesimal_induced(v, B, q, eps, "inverse_differential")).norm()
        errs.append((e_d, e_a, e_ai, e_di))
    for before, after in zip(*errs):
        assert 50 <= before / after <= 200
    with pytest.raises(ValueError):
        infinitesimal_induced(v, B, q, 1e-3, "bogus")


def test_curl_terms_on_vectors(rng):
    K = rng.normal(size=(3, 3))
    v = VectorField.affine(A3, K)
    a = rng.normal(size=3)
    # on a vector the two terms reduce to K a and K^T a
    assert np.allclose(A3.coeffs_to_vectors(curl_term_differential(v, A3.vector(a), np.zeros(3))), K @ a)
    assert np.allclose(A3.coeffs_to_vectors(curl_term_adjoint(v, A3.vector(a), np.zeros(3))), K.T @ a)
    assert not np.any(curl_term_adjoint(v, A3.scalar(1.0), np.zeros(3)))
    assert not np.any(curl_term_differential(v, A3.scalar(1.0), np.zeros(3)))


def test_curl_of_adjoint_vanishes():
    f = nonlinear_map()
    cfg = DerivativeConfig(h=1e-4)
    for A in (e1, e12, A3.parse("e1 + e23")):
        assert curl_of_adjoint_residual(f, A, [0.2, -0.4, 0.7], cfg) <= 1e-4


def test_multivector_gradient_reversed_convention():
    P = A3.parse("0.5*e12 - 1.5*e13 + 2*e23")
    H = lambda q, P: 0.5 * (~P | P).scalar
    g = multivector_gradient(H, P, np.zeros(3))
    assert g.allclose(~P, atol=1e-9)
    with pytest.raises(GradeError):
        multivector_gradient(H, e1 + e12, np.zeros(3))
