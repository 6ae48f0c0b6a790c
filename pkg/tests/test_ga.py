import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import naive_gp
from noetherlab.ga import (
    Algebra,
    AlgebraError,
    Blade,
    GradeError,
    Multivector,
    ShapeError,
    SingularBladeError,
    blade_inverse,
    geometric_product,
    grade_project,
    inner_product,
    magnitude,
    outer_product,
    project,
    reject,
    reverse,
    rotor_apply,
    rotor_exp,
)

A3 = Algebra(3)
e1, e2, e3 = (A3.basis(i) for i in (1, 2, 3))
e12, e13, e123 = A3.parse("e12"), A3.parse("e13"), A3.parse("e123")


def coeff_arrays(n, min_value=-2.0, max_value=2.0):
    return st.lists(st.floats(min_value, max_value), min_size=1 << n, max_size=1 << n).map(np.array)


def test_algebra_cached_and_bounded():
    assert Algebra(3) is Algebra(3)
    with pytest.raises(AlgebraError):
        Algebra(0)
    with pytest.raises(AlgebraError):
        Algebra(13)


def test_multivector_shape_and_immutability():
    with pytest.raises(ShapeError):
        Multivector(A3, np.zeros(4))
    with pytest.raises(AttributeError):
        e1.coeffs = np.zeros(8)
    with pytest.raises(ValueError):
        e1.coeffs[0] = 1.0


def test_mixed_algebras_rejected():
    with pytest.raises(ShapeError):
        geometric_product(e1, Algebra(2).basis(1))


@pytest.mark.parametrize("a, b, want", [
    (e1, e1, "1"),
    (e1, e2, "e12"),
    (1 + e1, 1 + e1, "2 + 2*e1"),
])
def test_geometric_product_examples(a, b, want):
    assert geometric_product(a, b) == A3.parse(want)


def test_inner_product_examples():
    assert inner_product(e1, e1 ^ e2) == e2
    assert inner_product(A3.scalar(3.0), e12) == A3.zero()
    assert inner_product(e12, e12) == A3.scalar(-1.0)
    # oracle: scalar part of the geometric product
    assert inner_product(e12, e12).coeffs[0] == naive_gp(3, e12.coeffs, e12.coeffs)[0]


def test_outer_product_examples():
    assert outer_product(e1, e2) == e12
    assert outer_product(e1, e1) == A3.zero()
    a2 = Algebra(2)
    assert outer_product(a2.parse("e1 + e2"), a2.parse("e12")) == a2.zero()


def test_grade_project_examples():
    A = A3.parse("1 + e1 + e12")
    assert grade_project(A, 1) == e1
    assert grade_project(e12, 0) == A3.zero()
    assert grade_project(e1 * e12, 1) == e2
    with pytest.raises(GradeError):
        grade_project(A, 4)


def test_reverse_examples():
    assert reverse(e12) == -e12
    assert reverse(e123) == -e123
    assert reverse(A3.parse("1 + e1 + e12 + e123")) == A3.parse("1 + e1 - e12 - e123")


def test_magnitude_examples():
    assert magnitude(e12) == 1.0
    assert magnitude(3 * e1 + 4 * e2) == 5.0
    B = 2 * e12 + e13
    assert math.isclose(magnitude(B), math.sqrt(5))
    assert math.isclose(magnitude(B), math.sqrt((~B | B).scalar))


def test_blade_inverse_examples():
    assert blade_inverse(e12) == -e12
    assert blade_inverse(2 * e1) == 0.5 * e1
    assert blade_inverse(2 * e12) == -0.5 * e12
    with pytest.raises(SingularBladeError):
        blade_inverse(A3.zero() * e1)


def test_projection_examples():
    v = e1 + e3
    assert project(v, e12).allclose(e1)
    assert reject(v, e12).allclose(e3)
    assert project(e1, e12).allclose(e1)


def test_blade_constructors():
    b = Blade.from_vectors(e1, e2 + e3)
    assert b.verified and b.grade == 2
    a = Blade.assume(e12 + 2 * e13)
    assert not a.verified
    with pytest.raises(GradeError):
        Blade.assume(e1 + e12)
    with pytest.raises(GradeError):
        Blade.from_vectors(e12)


def test_parse_grammar():
    assert A3.parse("e21") == -e12
    assert A3.parse("1.5*e1 - 2") == 1.5 * e1 - 2
    assert Algebra(10).parse("e1_10").to_pairs() == [((1 << 0) | (1 << 9), 1.0)]
    # a bare exponent is a float literal, not a blade
    assert A3.parse("2e1") == A3.scalar(20.0)
    for bad in ("", "e4", "3*", "e1 ** 2", "x"):
        with pytest.raises(AlgebraError):
            A3.parse(bad)


def test_serialization_pairs():
    A = A3.parse("2 + 1e-31*e1 - 3*e23")
    pairs = A.to_pairs()
    assert pairs == [(0, 2.0), (6, -3.0)]
    assert Multivector.from_pairs(A3, pairs) == A3.parse("2 - 3*e23")


def test_rotor_examples():
    assert rotor_exp(A3.zero() * e12).mv == A3.scalar(1.0)
    R = rotor_exp((math.pi / 2) * e12)
    assert rotor_apply(R, e1).allclose(e2)
    assert rotor_apply(R, e3).allclose(e3)
    for theta in (0.3, 2.0, 7.0):
        assert rotor_apply(rotor_exp(theta * e12), e12).allclose(e12)
    a4 = Algebra(4)
    B1, B2 = a4.parse("0.7*e12"), a4.parse("1.1*e34")
    R = rotor_exp(B1 + B2)
    assert (R.mv * ~R.mv).allclose(a4.scalar(1.0))
    assert R.mv.allclose(rotor_exp(B1).mv * rotor_exp(B2).mv)
    with pytest.raises(GradeError):
        rotor_exp(e1)


def test_rotor_closed_form_angle():
    theta = 0.83
    got = rotor_apply(rotor_exp(theta * e12), e1)
    assert got.allclose(math.cos(theta) * e1 + math.sin(theta) * e2)


def test_large_bivector_scaling_and_squaring():
    B = 4 * math.pi * 0.97 * A3.parse("0.6*e12 + 0.8*e23")
    R = rotor_exp(B)
    assert np.max(np.abs((R.mv * ~R.mv).coeffs - A3.scalar(1.0).coeffs)) <= 1e-12


@given(coeff_arrays(3), coeff_arrays(3))
def test_gp_matches_reference(x, y):
    assert np.allclose(A3.gp(x, y), naive_gp(3, x, y), atol=1e-12)


@given(coeff_arrays(4), coeff_arrays(4), coeff_arrays(4))
def test_gp_associative(x, y, z):
    a4 = Algebra(4)
    assert np.allclose(a4.gp(a4.gp(x, y), z), a4.gp(x, a4.gp(y, z)), atol=1e-10)


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_vector_product_decomposition(a, b):
    a, b = A3.vector(a), A3.vector(b)
    assert (a * b).allclose((a | b) + (a ^ b))
    assert (a ^ b).allclose(-(b ^ a))
    assert (a ^ a).allclose(A3.zero())


@given(coeff_arrays(3), coeff_arrays(3))
def test_reverse_properties(x, y):
    X, Y = Multivector(A3, x), Multivector(A3, y)
    assert ~~X == X
    assert (~(X * Y)).allclose(~Y * ~X, atol=1e-10)
    assert sum((X.grade(r) for r in range(4)), A3.zero()).allclose(X)


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.lists(st.floats(-1, 1), min_size=3, max_size=3),
       st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_rotation_preserves_inner_products(bc, a, b):
    B = Multivector(A3, np.array([0, 0, 0, bc[0], 0, bc[1], bc[2], 0.0]))
    R = rotor_exp(B)
    a, b = A3.vector(a), A3.vector(b)
    assert abs((rotor_apply(R, a) | rotor_apply(R, b)).scalar - (a | b).scalar) <= 1e-12
    assert rotor_apply(R, a).is_grade(1, tol=1e-12) or a.norm() == 0


@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_projection_idempotent_and_complementary(v, w):
    A = Blade.from_vectors(A3.vector([1.0, 0.2, -0.3]), A3.vector([0.1, 1.0, 0.5]))
    v = A3.vector(v)
    P = project(v, A)
    assert (P + reject(v, A)).allclose(v)
    assert project(P, A).allclose(P, atol=1e-10)
    assert abs((reject(v, A) | A3.vector([1.0, 0.2, -0.3])).norm()) <= 1e-10


def test_blade_inverse_property(rng):
    for r in (1, 2, 3):
        for _ in range(20):
            vecs = [A3.vector(rng.normal(size=3)) for _ in range(r)]
            A = Blade.from_vectors(*vecs).mv
            A = A / A.norm()
            assert (A * blade_inverse(A)).allclose(A3.scalar(1.0), atol=1e-12)
