import math

import numpy as np
import pytest

from noetherlab.ga import Algebra, Multivector, rotor_apply, rotor_exp
from noetherlab.suites import (
    TOL_IDENTITY,
    ga_identity_suite,
    induced_map_suite,
    infinitesimal_convergence,
    random_blade,
    random_grade,
    rotor_suite,
    series_apply,
    series_bound,
)


def test_random_grade_is_unit_and_pure(rng):
    alg = Algebra(4)
    X = random_grade(alg, 2, rng, 10)
    assert np.allclose(np.linalg.norm(X, axis=1), 1.0)
    mask = np.zeros(alg.dim, bool)
    mask[alg.grade_indices(2)] = True
    assert not np.any(X[:, ~mask])


def test_random_blade_factorizes(rng):
    alg = Algebra(4)
    for c in random_blade(alg, 2, rng, 10):
        B = Multivector(alg, c)
        # a 2-blade squares to a scalar
        assert (B * B).grade(4).norm() <= 1e-12


@pytest.mark.parametrize("n", [1, 2, 3])
def test_ga_suite_small(n, rng):
    reports = ga_identity_suite(n, 50, rng)
    assert reports and all(r.passed for r in reports)
    assert all(r.tolerance == TOL_IDENTITY for r in reports)


def test_rotor_suite_small(rng):
    reports = rotor_suite(3, 40, rng, scale=3.0)
    assert {r.name.split(":")[-1] for r in reports} == {"rotor-norm", "rotor-isometry", "rotor-subspace",
                                                       "rotor-series-bound", "rotor-series"}
    assert all(r.passed for r in reports)


def test_series_bound_holds():
    alg = Algebra(3)
    B = alg.parse("0.8*e12")
    a = alg.basis(1)
    exact = rotor_apply(rotor_exp(B), a)
    for order in (1, 3, 6):
        err = (series_apply(B, a, order) - exact).norm()
        assert err <= series_bound(B, order)
    assert math.isclose(series_bound(B, 2), 0.8**3 / 6)


def test_induced_suite_small(rng):
    reports = induced_map_suite(3, 6, rng)
    assert all(r.passed for r in reports), [r.line() for r in reports if not r.passed]


def test_infinitesimal_convergence_reports(rng):
    reports = infinitesimal_convergence(Algebra(3), rng, 4)
    assert len(reports) == 4 and all(r.passed for r in reports)
