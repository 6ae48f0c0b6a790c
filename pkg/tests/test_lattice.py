import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noetherlab.dynamics import Potential, SpaceSplit, scalar_field, string
from noetherlab.ga import Algebra
from noetherlab.lattice import (
    FieldSolveError,
    Grid,
    LatticeField,
    LatticeFormatError,
    SurfaceMotion,
    build_field_momentum,
    central_diff,
    el_residual,
    graph_terms,
    solve_field_el,
    surface_residuals,
)

A3 = Algebra(3)
SPLIT = SpaceSplit(A3, [0, 1], [2])


def test_grid_validation_and_refine():
    g = Grid.box(5, [0, 0], [1, 1])
    assert g.h == 0.25 and g.shape == (5, 5)
    assert np.allclose(g.coords()[4, 2], [1.0, 0.5])
    r = g.refine()
    assert r.shape == (9, 9) and r.h == 0.125
    assert np.allclose(r.coords()[8, 8], [1.0, 1.0])
    with pytest.raises(ValueError):
        Grid((4, 5), 0.1)
    with pytest.raises(ValueError):
        Grid((5, 5), 0.0)
    with pytest.raises(ValueError):
        Grid.box(5, [0, 0], [1, 2])


def test_central_diff_exact_on_quadratics():
    g = Grid.box(7, [0, 0], [1, 1])
    x = g.coords()
    f = x[..., 0] ** 2 + 3 * x[..., 1]
    d0 = central_diff(f, 0, g.h)
    assert np.isnan(d0[0]).all() and np.isnan(d0[-1]).all()
    assert np.allclose(d0[1:-1], 2 * x[1:-1, :, 0])
    assert np.allclose(central_diff(f, 1, g.h)[:, 1:-1], 3.0)


def test_field_shape_checks():
    g = Grid.box(5, [0, 0], [1, 1])
    with pytest.raises(ValueError):
        LatticeField(g, np.zeros((5, 6)))
    with pytest.raises(ValueError):
        LatticeField(g, np.full((5, 5), np.nan))
    fld = LatticeField(g, np.zeros((5, 5)))
    assert fld.N == 1 and fld.D == 2
    with pytest.raises(ValueError):
        fld.values[0, 0, 0] = 1.0


def test_points_place_field_on_fiber_axes():
    g = Grid.box(5, [0, 0], [1, 1])
    fld = LatticeField.from_function(g, lambda x: (x[..., 0] + 2 * x[..., 1])[..., None])
    p = fld.points()
    assert np.allclose(p[2, 3], [0.5, 0.75, 2.0])


def test_save_load_roundtrip(tmp_path, rng):
    g = Grid.box(6, [0, 0], [1, 1])
    fld = LatticeField(g, rng.normal(size=(6, 6, 2)))
    path = tmp_path / "f.lat"
    fld.save(path)
    back = LatticeField.load(path)
    assert np.array_equal(back.values, fld.values)
    assert back.grid.h == g.h and back.grid.shape == g.shape


@pytest.mark.parametrize("text, where", [
    ("", "empty"),
    ("2 1 0.25\n", "line 1"),
    ("2 1 x 5,5\n", "line 1"),
    ("2 1 0.25 5\n", "line 1"),
    ("1 1 0.25 5\n1\n2\n3\n4\n", "expected 5"),
    ("1 1 0.25 5\n1\n2\n3 4\n4\n5\n", "line 4"),
    ("1 1 0.25 5\n1\n2\nz\n4\n5\n", "line 4"),
])
def test_load_errors(tmp_path, text, where):
    path = tmp_path / "bad.lat"
    path.write_text(text)
    with pytest.raises(LatticeFormatError, match=where):
        LatticeField.load(path)


def test_laplace_solve_exact_for_harmonic_quadratic():
    # the 5-point Laplacian is exact on x^2 - y^2
    g = Grid.box(17, [0, 0], [1, 1])
    exact = lambda x: x[..., 0] ** 2 - x[..., 1] ** 2
    fld, info = solve_field_el(Potential.zero(), g, exact, split=SPLIT)
    assert info.residual <= 1e-10
    assert np.max(np.abs(fld.values[..., 0] - exact(g.coords()))) <= 1e-10


def test_klein_gordon_solve_is_second_order():
    m = 1.0
    pot = Potential.harmonic(3, [2], m * m)
    exact = lambda x: np.sin(m * (0.6 * x[..., 0] + 0.8 * x[..., 1]))
    errs = []
    for nodes in (9, 17):
        g = Grid.box(nodes, [0, 0], [1, 1])
        fld, _ = solve_field_el(pot, g, exact, split=SPLIT)
        assert np.max(np.abs(el_residual(fld, pot))) <= 1e-10
        errs.append(np.max(np.abs(fld.values[..., 0] - exact(g.coords()))))
    assert 3.2 <= errs[0] / errs[1] <= 4.8


def test_solver_reports_stall():
    g = Grid.box(17, [0, 0], [1, 1])
    with pytest.raises(FieldSolveError) as exc:
        solve_field_el(Potential.zero(), g, lambda x: x[..., 0] * x[..., 1] + 1, split=SPLIT, max_sweeps=2)
    assert len(exc.value.history) == 2


def test_dw_momentum_on_linear_field():
    H = scalar_field(SPLIT)
    alpha = 0.7
    g = Grid.box(7, [0, 0], [1, 1])
    fld = LatticeField.from_function(g, lambda x: (alpha * x[..., 0])[..., None], SPLIT)
    mom = build_field_momentum(H, fld)
    assert not mom.valid[0].any() and mom.valid[1:-1, 1:-1].all()
    P = mom.at((3, 3))
    assert abs(H.value(fld.points()[3, 3], P)) <= 1e-14
    # (~I_x . grad phi) ^ e3 = (-e12 . alpha e1) ^ e3 = alpha e23
    assert np.isclose(P.coeffs[0b110], alpha)
    res = surface_residuals(H, SurfaceMotion.from_field(fld, mom))
    assert res.max <= 1e-12


def test_graph_terms_split_by_field_legs():
    g = Grid.box(7, [0, 0], [1, 1])
    fld = LatticeField.from_function(g, lambda x: (0.5 * x[..., 0] + 0.25 * x[..., 1])[..., None], SPLIT)
    t = graph_terms(fld)
    # (e1 + 0.5 e3) ^ (e2 + 0.25 e3) = e12 + 0.25 e13 - 0.5 e23
    assert np.allclose(t[0][3, 3], A3.parse("e12").coeffs)
    assert np.allclose(t[1][3, 3], A3.parse("0.25*e13 - 0.5*e23").coeffs)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_planes_are_string_solutions(a, b, c):
    H = string(SPLIT)
    g = Grid.box(7, [0, 0], [1, 1])
    fld = LatticeField.from_function(g, lambda x: (a * x[..., 0] + b * x[..., 1] + c)[..., None], SPLIT)
    res = surface_residuals(H, SurfaceMotion.from_field(fld, build_field_momentum(H, fld)))
    assert res.max <= 1e-12 and res.constraint_max <= 1e-12


def test_non_minimal_surface_fails_string_equations():
    H = string(SPLIT)
    g = Grid.box(17, [0, 0], [1, 1])
    fld = LatticeField.from_function(g, lambda x: (x[..., 0] ** 2 + x[..., 1] ** 2)[..., None], SPLIT)
    res = surface_residuals(H, SurfaceMotion.from_field(fld, build_field_momentum(H, fld)))
    assert res.second_max >= 0.1


def test_momentum_rejects_mismatched_split():
    other = SpaceSplit(A3, [1, 2], [0])
    g = Grid.box(5, [0, 0], [1, 1])
    fld = LatticeField(g, np.zeros((5, 5)), SPLIT)
    with pytest.raises(ValueError):
        build_field_momentum(scalar_field(other), fld)
