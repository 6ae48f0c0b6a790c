"""Symmetry criteria and conservation checks.

Symmetries are tested on samples ``(q, P)`` of phase space, either through
the finite criterion ``H(f(q), fbar^-1(P; q)) = H(q, P)`` or its
infinitesimal form

    v . d_q H  -  (d'_q ^ (v' . P)) . d_P H  =  (d'_q ^ W') . d_P H,

with ``W = 0`` for ordinary symmetries.  Conservation is then checked along
motions: ``p . v + W`` along particle trajectories, and the traditional
current ``j(x)`` with ``d_x . j = 0`` on field lattices.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .calculus import (
    DEFAULT_CFG,
    DerivativeConfig,
    DiffeoMap,
    FieldFn,
    SingularMapError,
    VectorField,
    as_point,
    curl_term_adjoint,
    outermorphism_block,
)
from .dynamics import HamiltonianSystem, ParticleTrajectory, solve_constraint
from .ga import Algebra, GradeError, Multivector
from .lattice import FieldMomentum, Grid, LatticeField, central_diff
from .report import TOL_ANALYTIC, TOL_DRIFT, TOL_FD, ConservationReport

FiniteFamily = Callable[[float], DiffeoMap]


class SymmetrySpecError(ValueError):
    """A symmetry specification is inconsistent or incomplete."""


@dataclass(frozen=True)
class SymmetrySpec:
    """Generator ``v`` with optional boundary term and finite form.

    ``W`` is a ``(D-1)``-vector field (scalar for ``D = 1``) given as a
    :class:`FieldFn` or a plain function of the point.  ``finite`` maps
    ``eps`` to a :class:`DiffeoMap` with ``f(q) = q + eps v(q) + O(eps^2)``
    (the flow of ``v`` when omitted); ``F`` is the finite boundary term.
    """

    v: VectorField
    W: FieldFn | Callable | None = None
    finite: FiniteFamily | None = None
    F: FieldFn | Callable | None = None
    name: str = "v"
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if self.check and self.finite is not None:
            self.check_finite_family()

    def family(self, eps: float, cfg: DerivativeConfig = DEFAULT_CFG) -> DiffeoMap:
        if self.finite is not None:
            return self.finite(eps)
        return DiffeoMap.flow(self.v, eps, cfg)

    def check_finite_family(self, samples: int = 8) -> None:
        """``f_eps(q) - q - eps v(q)`` must shrink like ``eps^2``."""
        rng = np.random.default_rng(11)
        qs = rng.uniform(-1, 1, (samples, self.v.algebra.n))

        def err(eps):
            f = self.finite(eps)
            return max(float(np.linalg.norm(f(q) - q - eps * self.v(q))) for q in qs)

        e1, e2 = err(1e-2), err(1e-3)
        if e2 > max(0.05 * e1, 1e-10):
            raise SymmetrySpecError(
                f"finite map of {self.name} does not match its generator to first order ({e1:.2e}, {e2:.2e})")

    @property
    def algebra(self) -> Algebra:
        return self.v.algebra


# -- sampling ---------------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseSamples:
    """Sample points ``q`` (``m x n``) with momentum coefficients (``m x 2^n``)."""

    q: np.ndarray
    P: np.ndarray
    on_shell: bool
    skipped: int = 0

    def __len__(self) -> int:
        return self.q.shape[0]

    def __iter__(self):
        return iter(zip(self.q, self.P))


def sample_phase_space(sys: HamiltonianSystem, count: int, rng: np.random.Generator, on_shell: bool = False,
                       box: float = 1.0) -> PhaseSamples:
    """Uniform ``q`` in ``[-box, box]^n``; standard-normal ``D``-blade coefficients.

    With ``on_shell`` the ``I_x`` coefficient (``e_t`` for particles) is moved
    to solve ``H = 0``; samples without a root are dropped and counted.
    """
    alg = sys.algebra
    qs, Ps = [], []
    skipped = 0
    for _ in range(count):
        q = rng.uniform(-box, box, alg.n)
        c = np.zeros(alg.dim)
        c[sys.split.blades] = rng.normal(size=sys.split.blades.size)
        if on_shell:
            P = solve_constraint(sys, q, Multivector(alg, c))
            if P is None:
                skipped += 1
                continue
            c = P.coeffs
        qs.append(q)
        Ps.append(np.array(c))
    return PhaseSamples(np.array(qs).reshape(-1, alg.n), np.array(Ps).reshape(-1, alg.dim), on_shell, skipped)


def _contract(alg: Algebra, X: np.ndarray, gradP: np.ndarray) -> float:
    # A . d_P H = sum_J A_J dH/dP_J, and d_P H stores dH/dP_J times the reverse sign
    return float(np.dot(X, alg.rev(gradP)))


def _default_tol(sys: HamiltonianSystem, *fields) -> float:
    analytic = sys._gq is not None and sys._gP is not None
    for f in fields:
        if f is None:
            continue
        if isinstance(f, (VectorField, DiffeoMap)) and not f.has_jacobian:
            analytic = False
        if isinstance(f, FieldFn) and f.analytic is None:
            analytic = False
        if callable(f) and not isinstance(f, (VectorField, DiffeoMap, FieldFn)):
            analytic = False
    return TOL_ANALYTIC if analytic else TOL_FD


# -- symmetry criteria ------------------------------------------------------------------------------


def finite_values(sys: HamiltonianSystem, f: DiffeoMap, samples: PhaseSamples, F=None,
                  cfg: DerivativeConfig = DEFAULT_CFG) -> tuple[np.ndarray, int]:
    """Signed ``H(f(q), fbar^-1(P; q)) - H(q, P + d ^ F)``; singular samples are skipped."""
    alg = sys.algebra
    D = sys.D
    ix = alg.grade_indices(D)
    out = []
    skipped = 0
    for q, Pc in samples:
        J = f.jacobian(q, cfg)
        if abs(np.linalg.det(J)) <= 1e-10:
            skipped += 1
            continue
        Pn = np.zeros(alg.dim)
        Pn[ix] = outermorphism_block(np.linalg.inv(J).T, D) @ Pc[ix]
        Pref = Pc if F is None else Pc + exterior_derivative(F, q, alg, cfg)
        out.append(sys.value(f(q), Multivector(alg, Pn)) - sys.value(q, Multivector(alg, Pref)))
    return np.array(out), skipped


def symmetry_residual_finite(sys: HamiltonianSystem, f: DiffeoMap, samples: PhaseSamples, tol: float | None = None,
                             name: str | None = None, cfg: DerivativeConfig = DEFAULT_CFG) -> ConservationReport:
    vals, skipped = finite_values(sys, f, samples, cfg=cfg)
    tol = _default_tol(sys, f) if tol is None else tol
    return ConservationReport.from_residuals(name or f"finite:{f.name or 'f'}", vals, tol, skipped=skipped)


def infinitesimal_lhs(sys: HamiltonianSystem, v: VectorField, samples: PhaseSamples,
                      cfg: DerivativeConfig = DEFAULT_CFG) -> np.ndarray:
    """Signed ``v . d_q H - (d'_q ^ (v' . P)) . d_P H`` per sample."""
    alg = sys.algebra
    out = np.empty(len(samples))
    for k, (q, Pc) in enumerate(samples):
        P = Multivector(alg, Pc)
        X = curl_term_adjoint(v, P, q, cfg)
        gP = sys.grad_P(q, P).coeffs
        out[k] = float(np.dot(v(q), sys.grad_q(q, P))) - _contract(alg, X, gP)
    return out


def symmetry_residual_infinitesimal(sys: HamiltonianSystem, spec: SymmetrySpec, samples: PhaseSamples,
                                    tol: float | None = None, name: str | None = None,
                                    cfg: DerivativeConfig = DEFAULT_CFG) -> ConservationReport:
    vals = infinitesimal_lhs(sys, spec.v, samples, cfg)
    tol = _default_tol(sys, spec.v) if tol is None else tol
    return ConservationReport.from_residuals(name or f"symmetry:{spec.name}", vals, tol)


def exterior_derivative(W, q, alg: Algebra, cfg: DerivativeConfig = DEFAULT_CFG) -> np.ndarray:
    """Coefficients of ``d_q ^ W(q)`` (the gradient when ``W`` is scalar)."""
    q = as_point(q, alg.n)
    out = np.zeros(alg.dim)
    for i in range(alg.n):
        e = np.zeros(alg.n)
        e[i] = 1.0
        if isinstance(W, FieldFn):
            d = W.derivative(q, e, cfg)
        else:
            h = cfg.step(q)
            d = (_as_coeffs(W(q + h * e), alg) - _as_coeffs(W(q - h * e), alg)) / (2 * h)
        ei = np.zeros(alg.dim)
        ei[1 << i] = 1.0
        out += alg.outer(ei, _as_coeffs(d, alg))
    return out


def _as_coeffs(x, alg: Algebra) -> np.ndarray:
    if isinstance(x, Multivector):
        return x.coeffs
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        c = np.zeros(alg.dim)
        c[0] = float(x)
        return c
    return x


def gen_symmetry_values(sys: HamiltonianSystem, spec: SymmetrySpec, samples: PhaseSamples, mode: str = "infinitesimal",
                        eps: float = 1e-4, cfg: DerivativeConfig = DEFAULT_CFG) -> np.ndarray:
    alg = sys.algebra
    if mode == "infinitesimal":
        lhs = infinitesimal_lhs(sys, spec.v, samples, cfg)
        if spec.W is None:
            return lhs
        rhs = np.empty(len(samples))
        for k, (q, Pc) in enumerate(samples):
            gP = sys.grad_P(q, Multivector(alg, Pc)).coeffs
            rhs[k] = _contract(alg, exterior_derivative(spec.W, q, alg, cfg), gP)
        return lhs - rhs
    if mode == "finite":
        if spec.F is None and spec.W is not None:
            raise SymmetrySpecError("finite mode needs the finite boundary term F")
        vals, _ = finite_values(sys, spec.family(eps, cfg), samples, F=spec.F, cfg=cfg)
        return vals
    raise ValueError(f"mode must be 'finite' or 'infinitesimal', got {mode!r}")


def gen_symmetry_residual(sys: HamiltonianSystem, spec: SymmetrySpec, samples: PhaseSamples, mode: str = "infinitesimal",
                          tol: float | None = None, name: str | None = None, eps: float = 1e-4,
                          cfg: DerivativeConfig = DEFAULT_CFG) -> ConservationReport:
    """Generalized criterion; equals :func:`symmetry_residual_infinitesimal` when ``W`` is absent."""
    if mode == "infinitesimal" and spec.W is None and spec.F is not None:
        raise SymmetrySpecError("infinitesimal mode needs W")
    vals = gen_symmetry_values(sys, spec, samples, mode, eps, cfg)
    if tol is None:
        tol = _default_tol(sys, spec.v, spec.W if mode == "infinitesimal" else spec.F)
        if mode == "finite":
            tol = max(tol, TOL_FD)
    return ConservationReport.from_residuals(name or f"gen-symmetry:{spec.name}", vals, tol)


def finite_infinitesimal_consistency(sys: HamiltonianSystem, spec: SymmetrySpec, samples: PhaseSamples,
                                     eps: float = 1e-4, C: float = 10.0,
                                     cfg: DerivativeConfig = DEFAULT_CFG) -> ConservationReport:
    """``|residual_finite(f_eps) / eps - residual_infinitesimal|`` against ``C eps``."""
    fin, _ = finite_values(sys, spec.family(eps, cfg), samples, cfg=cfg)
    inf = infinitesimal_lhs(sys, spec.v, samples, cfg)
    return ConservationReport.from_residuals(f"consistency:{spec.name}", fin / eps - inf, C * eps)


# -- conserved quantities along trajectories --------------------------------------------------------


def conserved_quantity(P: Multivector, v: Multivector) -> Multivector:
    """The ``(D-1)``-vector ``P . v``."""
    if not v.is_grade(1):
        raise GradeError("generator value must be a vector")
    gr = P.grades()
    if len(gr) != 1 or gr[0] < 1:
        raise GradeError(f"momentum must be a single grade >= 1, got {gr}")
    return P | v


def trajectory_values(traj: ParticleTrajectory, spec: SymmetrySpec) -> np.ndarray:
    """``p . v(q) + W(q)`` at every sample."""
    alg = traj.system.algebra
    out = np.empty(len(traj))
    for i, (q, pc) in enumerate(zip(traj.q, traj.p)):
        val = float(np.dot(alg.coeffs_to_vectors(pc), spec.v(q)))
        if spec.W is not None:
            w = spec.W(q)
            val += float(w.scalar if isinstance(w, Multivector) else w)
        out[i] = val
    return out


def trajectory_conservation_check(traj: ParticleTrajectory, spec: SymmetrySpec, tol: float = TOL_DRIFT,
                                  name: str | None = None) -> ConservationReport:
    """Drift of ``p . v + W`` from its initial value."""
    vals = trajectory_values(traj, spec)
    return ConservationReport.from_residuals(name or f"drift:{spec.name}", vals - vals[0], tol)


# -- traditional currents on lattices ---------------------------------------------------------------


def _node_vectors(fld: LatticeField, v) -> np.ndarray:
    """Generator values at every node as ``(..., n)`` components."""
    n = fld.split.algebra.n
    pts = fld.points()
    if isinstance(v, VectorField):
        flat = pts.reshape(-1, n)
        return np.array([v(p) for p in flat]).reshape(pts.shape)
    if isinstance(v, Multivector):
        return np.broadcast_to(v.vector_part(), pts.shape).copy()
    arr = np.asarray(v, dtype=float)
    return np.broadcast_to(arr, pts.shape).copy()


def noether_current_field(fld: LatticeField, mom: FieldMomentum, v) -> np.ndarray:
    """``j = -I_x . [P.v + d'_x ^ (y' . (P.v))]`` per node; NaN off the interior.

    Only ``y`` is differentiated in the second term.  Returns ``(..., n)``
    vector components.
    """
    split = fld.split
    alg = split.algebra
    vc = alg.vectors_to_coeffs(_node_vectors(fld, v))
    M = alg.inner(mom.coeffs, vc)
    pts = fld.points()
    acc = M.copy()
    for k, ax in enumerate(split.base_axes):
        dy = split.field_part(central_diff(pts, k, fld.grid.h))
        ek = np.zeros(alg.dim)
        ek[1 << ax] = 1.0
        acc = acc + alg.outer(ek, alg.inner(alg.vectors_to_coeffs(dy), M))
    j = -alg.inner(split.I_x.coeffs, acc)
    out = alg.coeffs_to_vectors(j)
    out[~mom.valid] = np.nan
    return out


def _lagrangian(fld: LatticeField, potential) -> np.ndarray:
    grads = fld.gradients()
    return 0.5 * np.sum(grads**2, axis=(-1, -2)) - potential(fld.points())


def energy_momentum_tensor(fld: LatticeField, v_x, potential) -> np.ndarray:
    """``j = -v L + sum_a (v . grad phi_a) grad phi_a`` with ``L = |grad phi|^2 / 2 - V``.

    ``v_x`` is a constant spacetime vector or per-node ``(..., n)`` components.
    """
    split = fld.split
    potential = getattr(potential, "potential", potential)
    vx = _node_vectors(fld, v_x)
    if np.any(split.field_part(vx)):
        raise GradeError("energy-momentum tensor needs a spacetime generator")
    gv = fld.gradient_vectors()  # (..., N, n)
    L = _lagrangian(fld, potential)
    proj = np.einsum("...n,...an->...a", vx, gv)
    return -vx * L[..., None] + np.einsum("...a,...an->...n", proj, gv)


def rotation_generator_values(fld: LatticeField, B_x: Multivector, x0) -> np.ndarray:
    """``(x - x0) . B_x`` per node."""
    split = fld.split
    alg = split.algebra
    x = split.base_part(fld.points())
    x0 = as_point(x0, alg.n)
    return alg.coeffs_to_vectors(alg.inner(alg.vectors_to_coeffs(x - x0), B_x.coeffs))


def angular_momentum_tensor(fld: LatticeField, B_x: Multivector, x0, potential) -> np.ndarray:
    """``j_tr(x; (x - x0) . B_x)``."""
    return energy_momentum_tensor(fld, rotation_generator_values(fld, B_x, x0), potential)


def internal_current(fld: LatticeField, B_y: Multivector) -> np.ndarray:
    """``sum_ab ((e_a ^ e_b) . B_y) phi_a grad phi_b``."""
    split = fld.split
    alg = split.algebra
    gv = fld.gradient_vectors()
    out = np.zeros(gv.shape[:-2] + (alg.n,))
    if split.N < 2:
        warnings.warn("internal current vanishes for a single field component", stacklevel=2)
        out[np.isnan(gv[..., 0, 0])] = np.nan
        return out
    for a in range(split.N):
        for b in range(split.N):
            if a == b:
                continue
            w = float((split.e(a + 1) ^ split.e(b + 1)) | B_y)
            if w:
                out += w * fld.values[..., a, None] * gv[..., b, :]
    return out


def divergence(j: np.ndarray, fld_or_grid, split=None) -> np.ndarray:
    """Central-difference ``d_x . j``; NaN where ``j`` or its neighbours are undefined."""
    if isinstance(fld_or_grid, LatticeField):
        grid, split = fld_or_grid.grid, fld_or_grid.split
    else:
        grid = fld_or_grid
    axes = split.base_axes if split is not None else range(grid.D)
    return sum(central_diff(j[..., ax], k, grid.h) for k, ax in enumerate(axes))


def divergence_residual(j: np.ndarray, fld: LatticeField, tol: float, name: str = "divergence",
                        rings: int = 2) -> ConservationReport:
    """Max/RMS of ``d_x . j`` on nodes ``rings`` inside the boundary."""
    div = divergence(j, fld)[fld.grid.inner(rings)]
    return ConservationReport.from_residuals(name, div, tol)


def _face_integral(vals: np.ndarray, h: float) -> float:
    """Trapezoid rule over all axes of a face array."""
    out = vals
    for _ in range(vals.ndim):
        out = h * (np.sum(out, axis=0) - 0.5 * (out[0] + out[-1]))
    return float(out)


def boundary_flux(j: np.ndarray, fld: LatticeField, lo: Sequence[int], hi: Sequence[int]) -> float:
    """Outward flux of ``j`` through the faces of the index box ``[lo, hi]``."""
    grid = fld.grid
    split = fld.split
    lo = tuple(int(i) for i in lo)
    hi = tuple(int(i) for i in hi)
    if len(lo) != grid.D or len(hi) != grid.D:
        raise ValueError("subregion corners need one index per axis")
    for k in range(grid.D):
        if lo[k] < 1 or hi[k] > grid.shape[k] - 2 or hi[k] - lo[k] < 2:
            raise ValueError("subregion must lie strictly inside the lattice and span at least 2 cells")
    box = tuple(slice(a, b + 1) for a, b in zip(lo, hi))
    sub = j[box]
    total = 0.0
    for k, ax in enumerate(split.base_axes):
        comp = sub[..., ax]
        top = np.take(comp, -1, axis=k)
        bot = np.take(comp, 0, axis=k)
        if grid.D == 1:
            total += float(top - bot)
        else:
            total += _face_integral(top, grid.h) - _face_integral(bot, grid.h)
    return total


def _boundary_measure(grid: Grid, lo, hi) -> float:
    ext = [(b - a) * grid.h for a, b in zip(lo, hi)]
    if grid.D == 1:
        return 2.0
    return 2.0 * sum(math.prod(ext[:k] + ext[k + 1:]) for k in range(grid.D))


def w_current(fld: LatticeField, W) -> np.ndarray:
    """Pull-down ``-I_x . [W + d'_x ^ (y' . W)]`` of a ``(D-1)``-vector field ``W``."""
    split = fld.split
    alg = split.algebra
    pts = fld.points()
    flat = pts.reshape(-1, alg.n)
    Wc = np.array([_as_coeffs(W(p), alg) for p in flat]).reshape(pts.shape[:-1] + (alg.dim,))
    acc = Wc.copy()
    for k, ax in enumerate(split.base_axes):
        dy = split.field_part(central_diff(pts, k, fld.grid.h))
        ek = np.zeros(alg.dim)
        ek[1 << ax] = 1.0
        acc = acc + alg.outer(ek, alg.inner(alg.vectors_to_coeffs(dy), Wc))
    return alg.coeffs_to_vectors(-alg.inner(split.I_x.coeffs, acc))


def boundary_flux_check(fld, mom, spec: SymmetrySpec, subregion=None, tol: float = TOL_FD,
                        name: str | None = None) -> ConservationReport:
    """Integral conservation law over a subregion.

    For lattices: ``|oint n.j - (-1)^D oint n.j_W|`` divided by the boundary
    measure, with ``j`` the Noether current of ``spec.v``.  For particle
    trajectories (``mom`` ignored): the endpoint balance of ``p . v + W``
    between sample indices ``subregion = (i1, i2)``.
    """
    if isinstance(fld, ParticleTrajectory):
        i1, i2 = subregion if subregion is not None else (0, len(fld) - 1)
        vals = trajectory_values(fld, spec)
        return ConservationReport.from_residuals(name or f"flux:{spec.name}", [vals[i2] - vals[i1]], tol)
    grid = fld.grid
    if subregion is None:
        lo = tuple(2 for _ in grid.shape)
        hi = tuple(s - 3 for s in grid.shape)
    else:
        lo, hi = subregion
    j = noether_current_field(fld, mom, spec.v)
    lhs = boundary_flux(j, fld, lo, hi)
    rhs = 0.0
    if spec.W is not None:
        rhs = (-1) ** fld.D * boundary_flux(w_current(fld, spec.W), fld, lo, hi)
    res = abs(lhs - rhs) / _boundary_measure(grid, lo, hi)
    return ConservationReport.from_residuals(name or f"flux:{spec.name}", [res], tol)


def flux_orientation_check(nodes: int = 33) -> float:
    """Divergence theorem on a gradient field, the orientation oracle for fluxes.

    Returns ``|oint n . grad chi - int Laplacian chi|`` for
    ``chi = sin(x1) exp(x2 / 2)`` on a subsquare of the unit box.
    """
    from .lattice import default_split

    grid = Grid.box(nodes, [0, 0], [1, 1])
    split = default_split(2, 1)
    fld = LatticeField(grid, np.zeros(grid.shape), split)
    x = grid.coords()
    s, c, e = np.sin(x[..., 0]), np.cos(x[..., 0]), np.exp(x[..., 1] / 2)
    j = np.zeros(grid.shape + (3,))
    j[..., 0] = c * e
    j[..., 1] = 0.5 * s * e
    lap = -s * e + 0.25 * s * e
    lo, hi = (2, 2), (nodes - 3, nodes - 3)
    vol = _face_integral(lap[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1], grid.h)
    return abs(boundary_flux(j, fld, lo, hi) - vol)


__all__ = [
    "PhaseSamples",
    "SymmetrySpec",
    "SymmetrySpecError",
    "angular_momentum_tensor",
    "boundary_flux",
    "boundary_flux_check",
    "conserved_quantity",
    "divergence",
    "divergence_residual",
    "energy_momentum_tensor",
    "exterior_derivative",
    "finite_infinitesimal_consistency",
    "finite_values",
    "flux_orientation_check",
    "gen_symmetry_residual",
    "gen_symmetry_values",
    "infinitesimal_lhs",
    "internal_current",
    "noether_current_field",
    "rotation_generator_values",
    "sample_phase_space",
    "symmetry_residual_finite",
    "symmetry_residual_infinitesimal",
    "trajectory_conservation_check",
    "trajectory_values",
    "w_current",
]
