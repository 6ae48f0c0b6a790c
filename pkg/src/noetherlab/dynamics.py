"""Hamiltonian-constraint systems and their motions.

A system is a scalar function ``H(q, P)`` of a point ``q`` and a grade-``D``
momentum ``P``.  Motions are curves (``D = 1``) integrated from the canonical
equations in the gauge ``lambda = 1``, or ``D``-surfaces sampled on a lattice
(see :mod:`noetherlab.lattice`).

Momentum gradients follow the reversed-blade convention
``d_P H = sum_J ~e_J dH/dP_J``, so that ``A . d_P H = sum_J A_J dH/dP_J``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .calculus import (
    DEFAULT_CFG,
    DerivativeConfig,
    DiffeoMap,
    SingularMapError,
    as_point,
    gradient_wrt_grade,
    outermorphism,
)
from .ga import Algebra, GradeError, Multivector, ShapeError

GRADIENT_CHECK_TOL = 1e-6


class ConstraintError(ValueError):
    """Initial data is off the constraint surface ``H = 0``."""


# -- configuration-space split ---------------------------------------------------


class SpaceSplit:
    """Orthogonal split of configuration space into base and fiber axes.

    The base ("spacetime") axes carry the motion's parameters and define the
    unit ``D``-blade ``I_x``; the fiber ("field") axes span the field space
    with pseudoscalar ``I_y``.  For particle mechanics the single base axis is
    the time axis ``e_t``.
    """

    def __init__(self, algebra: Algebra, base_axes: Sequence[int], field_axes: Sequence[int] | None = None):
        base = tuple(sorted(int(i) for i in base_axes))
        if field_axes is None:
            field_axes = [i for i in range(algebra.n) if i not in base]
        fib = tuple(int(i) for i in field_axes)
        if not base:
            raise ValueError("at least one base axis is required")
        if len(set(base + fib)) != len(base) + len(fib) or any(not 0 <= i < algebra.n for i in base + fib):
            raise ValueError(f"axes {base} and {fib} must be distinct indices below {algebra.n}")
        self.algebra = algebra
        self.base_axes = base
        self.field_axes = fib
        self.D = len(base)
        self.N = len(fib)
        self.blades = algebra.grade_indices(self.D)
        self.x_mask = sum(1 << a for a in base)
        fmask = sum(1 << a for a in fib)
        self._field_legs = np.array([bin(int(J) & fmask).count("1") for J in range(algebra.dim)])

    def __repr__(self) -> str:
        return f"SpaceSplit(n={self.algebra.n}, base={self.base_axes}, fields={self.field_axes})"

    @property
    def I_x(self) -> Multivector:
        return self.algebra.blade(self.x_mask)

    @property
    def I_y(self) -> Multivector:
        return self.algebra.blade(sum(1 << a for a in self.field_axes))

    @property
    def e_t(self) -> Multivector:
        if self.D != 1:
            raise GradeError("a time axis exists only for D = 1")
        return self.algebra.blade(1 << self.base_axes[0])

    def e(self, a: int) -> Multivector:
        """Field-space basis vector ``e_a`` (``a`` counts from 1)."""
        return self.algebra.blade(1 << self.field_axes[a - 1])

    def base_part(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        out = np.zeros_like(q)
        out[..., list(self.base_axes)] = q[..., list(self.base_axes)]
        return out

    def field_part(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        out = np.zeros_like(q)
        if self.field_axes:
            out[..., list(self.field_axes)] = q[..., list(self.field_axes)]
        return out

    def field_legs(self, J: int) -> int:
        return int(self._field_legs[J])

    def truncate_graph(self, coeffs: np.ndarray, keep: int = 1) -> np.ndarray:
        """Zero the blades with more than ``keep`` field-space legs."""
        out = np.array(coeffs, dtype=float, copy=True)
        out[..., self._field_legs > keep] = 0.0
        return out


# -- potentials -------------------------------------------------------------------------


class Potential:
    """Scalar potential ``V(q)``, vectorized over leading axes of ``q``."""

    def __init__(self, value: Callable, gradient: Callable | None = None, name: str = "V",
                 linear_gradient: bool = False):
        self.value = value
        self._grad = gradient
        self.name = name
        # gradient linear in q: relaxation solves get the tighter tolerance
        self.linear_gradient = linear_gradient

    def __call__(self, q) -> np.ndarray | float:
        return self.value(np.asarray(q, dtype=float))

    def gradient(self, q, h: float = 1e-6) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self._grad is not None:
            return np.asarray(self._grad(q), dtype=float)
        g = np.empty_like(q)
        for i in range(q.shape[-1]):
            d = np.zeros(q.shape[-1])
            d[i] = h
            g[..., i] = (self.value(q + d) - self.value(q - d)) / (2 * h)
        return g

    @classmethod
    def zero(cls) -> "Potential":
        return cls(lambda q: np.zeros(q.shape[:-1]) if q.ndim > 1 else 0.0,
                   lambda q: np.zeros_like(q), name="0", linear_gradient=True)

    @classmethod
    def quadratic(cls, K, name: str = "quadratic") -> "Potential":
        """``V(q) = q^T K q / 2`` for a symmetric ``K``."""
        K = np.array(K, dtype=float)
        K = 0.5 * (K + K.T)
        return cls(lambda q: 0.5 * np.einsum("...i,ij,...j->...", q, K, q),
                   lambda q: q @ K, name=name, linear_gradient=True)

    @classmethod
    def harmonic(cls, n: int, axes: Sequence[int], k: float = 1.0) -> "Potential":
        """``k/2 * sum of q_i^2`` over the given axes."""
        K = np.zeros((n, n))
        for i in axes:
            K[i, i] = k
        return cls.quadratic(K, name=f"harmonic(k={k:g})")

    @classmethod
    def phi4(cls, n: int, axes: Sequence[int], m: float = 1.0, g: float = 1.0) -> "Potential":
        """``m^2 |y|^2 / 2 + g |y|^4 / 4`` on the given axes."""
        ax = list(axes)

        def value(q):
            r2 = np.sum(q[..., ax] ** 2, axis=-1)
            return 0.5 * m * m * r2 + 0.25 * g * r2 * r2

        def grad(q):
            out = np.zeros_like(q)
            r2 = np.sum(q[..., ax] ** 2, axis=-1)[..., None]
            out[..., ax] = (m * m + g * r2) * q[..., ax]
            return out

        return cls(value, grad, name=f"phi4(m={m:g}, g={g:g})")


# -- Hamiltonians -----------------------------------------------------------------------------


def _coeffs(P, algebra: Algebra) -> np.ndarray:
    if isinstance(P, Multivector):
        return P.coeffs
    P = np.asarray(P, dtype=float)
    if P.shape[-1] != algebra.dim:
        raise ShapeError(f"momentum needs {algebra.dim} coefficients, got {P.shape[-1]}")
    return P


class HamiltonianSystem:
    """``H(q, P)`` with optional analytic gradients.

    ``H`` takes an ``(n,)`` point and a :class:`Multivector` momentum.
    ``grad_q(q, P)`` returns ``(n,)`` partials; ``grad_P(q, P)`` returns the
    momentum gradient as a multivector.  Supplied gradients are compared with
    central differences at 8 random samples.
    """

    kind = "generic"

    def __init__(self, split: SpaceSplit, H: Callable, grad_q: Callable | None = None,
                 grad_P: Callable | None = None, name: str = "H", cfg: DerivativeConfig = DEFAULT_CFG,
                 check: bool = True, kind: str | None = None):
        self.split = split
        self.algebra = split.algebra
        self._H = H
        self._gq = grad_q
        self._gP = grad_P
        self.name = name
        self.cfg = cfg
        if kind is not None:
            self.kind = kind
        if check and (grad_q is not None or grad_P is not None):
            self.validate_gradients()

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name}, D={self.D})"

    @property
    def D(self) -> int:
        return self.split.D

    def momentum(self, P) -> Multivector:
        return P if isinstance(P, Multivector) else Multivector(self.algebra, P)

    def _check_grade(self, P: Multivector) -> None:
        extra = [g for g in P.grades() if g != self.D]
        if extra:
            raise GradeError(f"momentum must be a {self.D}-vector, found grades {P.grades()}")

    # single-point interface

    def value(self, q, P) -> float:
        return float(self._H(as_point(q, self.algebra.n), self.momentum(P)))

    __call__ = value

    def grad_q(self, q, P) -> np.ndarray:
        q = as_point(q, self.algebra.n)
        P = self.momentum(P)
        if self._gq is not None:
            return np.asarray(self._gq(q, P), dtype=float)
        return self.fd_grad_q(q, P)

    def grad_P(self, q, P) -> Multivector:
        q = as_point(q, self.algebra.n)
        P = self.momentum(P)
        if self._gP is not None:
            return self.momentum(self._gP(q, P))
        return self.fd_grad_P(q, P)

    def fd_grad_q(self, q, P) -> np.ndarray:
        q = as_point(q, self.algebra.n)
        P = self.momentum(P)
        h = self.cfg.step(q)
        g = np.empty(self.algebra.n)
        for i in range(self.algebra.n):
            d = np.zeros(self.algebra.n)
            d[i] = h
            g[i] = (self._H(q + d, P) - self._H(q - d, P)) / (2 * h)
        return g

    def fd_grad_P(self, q, P) -> Multivector:
        return gradient_wrt_grade(self._H, self.momentum(P), self.D, q, self.cfg)

    def contract_P(self, A, q, P) -> float:
        """``A . d_P H`` for a ``D``-vector ``A``."""
        A = self.momentum(A)
        return float(np.dot(A.coeffs, self.grad_P(q, P).coeffs * self.algebra.rev(np.ones(self.algebra.dim))))

    def validate_gradients(self, samples: int = 8, tol: float = GRADIENT_CHECK_TOL) -> None:
        rng = np.random.default_rng(7)
        for _ in range(samples):
            q = rng.uniform(-1, 1, self.algebra.n)
            c = np.zeros(self.algebra.dim)
            c[self.split.blades] = rng.normal(size=self.split.blades.size)
            P = Multivector(self.algebra, c)
            if self._gq is not None:
                a, b = self.grad_q(q, P), self.fd_grad_q(q, P)
                if np.max(np.abs(a - b)) > tol * (1 + np.max(np.abs(b))):
                    raise ValueError(f"{self.name}: analytic q-gradient disagrees with finite differences")
            if self._gP is not None:
                a, b = self.grad_P(q, P).coeffs, self.fd_grad_P(q, P).coeffs
                if np.max(np.abs(a - b)) > tol * (1 + np.max(np.abs(b))):
                    raise ValueError(f"{self.name}: analytic P-gradient disagrees with finite differences")

    # batched interface (loops; subclasses vectorize)

    def value_batch(self, q: np.ndarray, Pc: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        Pc = np.asarray(Pc, dtype=float)
        lead = q.shape[:-1]
        qf, Pf = q.reshape(-1, q.shape[-1]), Pc.reshape(-1, Pc.shape[-1])
        out = np.array([self.value(a, Multivector(self.algebra, b)) for a, b in zip(qf, Pf)])
        return out.reshape(lead)

    def grad_q_batch(self, q: np.ndarray, Pc: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        Pc = np.asarray(Pc, dtype=float)
        qf, Pf = q.reshape(-1, q.shape[-1]), Pc.reshape(-1, Pc.shape[-1])
        out = np.array([self.grad_q(a, Multivector(self.algebra, b)) for a, b in zip(qf, Pf)])
        return out.reshape(q.shape)

    def grad_P_batch(self, q: np.ndarray, Pc: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        Pc = np.asarray(Pc, dtype=float)
        qf, Pf = q.reshape(-1, q.shape[-1]), Pc.reshape(-1, Pc.shape[-1])
        out = np.array([self.grad_P(a, Multivector(self.algebra, b)).coeffs for a, b in zip(qf, Pf)])
        return out.reshape(Pc.shape)


class QuadraticHamiltonian(HamiltonianSystem):
    """``H = l . P + (1/2) P_J Q_JK P_K + c + V(q)`` in blade coefficients.

    ``P_J`` are the coefficients of ``P`` on the grade-``D`` basis blades and
    ``l`` a coefficient vector on the same blades.  Covers the particle,
    scalar-field and string Hamiltonians, all with analytic gradients.
    """

    def __init__(self, split: SpaceSplit, linear, quad, potential: Potential, const: float = 0.0,
                 name: str = "H", kind: str = "quadratic", params: dict | None = None):
        self.blades = split.blades
        k = self.blades.size
        self.lin = np.asarray(linear, dtype=float).reshape(k)
        Q = np.asarray(quad, dtype=float).reshape(k, k)
        self.quad = 0.5 * (Q + Q.T)
        self.const = float(const)
        self.potential = potential
        self.params = dict(params or {})
        super().__init__(split, self._h, self._gq_single, self._gP_single, name=name, check=False, kind=kind)
        self._rev = split.algebra.rev(np.ones(split.algebra.dim))[self.blades]

    def _h(self, q, P):
        return float(self.value_batch(q, _coeffs(P, self.algebra)))

    def _gq_single(self, q, P):
        return self.potential.gradient(q)

    def _gP_single(self, q, P):
        return Multivector(self.algebra, self.grad_P_batch(q, _coeffs(P, self.algebra)))

    def value_batch(self, q, Pc):
        q = np.asarray(q, dtype=float)
        p = np.asarray(Pc, dtype=float)[..., self.blades]
        return p @ self.lin + 0.5 * np.einsum("...j,jk,...k->...", p, self.quad, p) + self.const + self.potential(q)

    def grad_q_batch(self, q, Pc):
        return self.potential.gradient(np.asarray(q, dtype=float))

    def grad_P_batch(self, q, Pc):
        Pc = np.asarray(Pc, dtype=float)
        out = np.zeros(Pc.shape)
        out[..., self.blades] = (self.lin + Pc[..., self.blades] @ self.quad) * self._rev
        return out


def _linear_functional(split: SpaceSplit, fn: Callable[[Multivector], float]) -> np.ndarray:
    """Coefficient vector of a linear functional of ``D``-vectors."""
    alg = split.algebra
    return np.array([fn(alg.blade(int(J))) for J in split.blades])


def nonrelativistic(split: SpaceSplit, potential: Potential | None = None, kinetic_coeff: float = 0.5,
                    name: str = "H_NR") -> QuadraticHamiltonian:
    """``H = p . e_t + c |p_x|^2 + V(x)`` for ``D = 1``; ``c = 1/2`` is the usual kinetic term."""
    if split.D != 1:
        raise ValueError("the non-relativistic Hamiltonian needs D = 1")
    e_t = split.e_t
    lin = _linear_functional(split, lambda b: float(b | e_t))
    Q = np.zeros((split.blades.size,) * 2)
    for k, J in enumerate(split.blades):
        if int(J) != (1 << split.base_axes[0]):
            Q[k, k] = 2.0 * kinetic_coeff
    return QuadraticHamiltonian(split, lin, Q, potential or Potential.zero(), name=name, kind="nonrelativistic",
                                params={"kinetic_coeff": kinetic_coeff})


def scalar_field(split: SpaceSplit, potential: Potential | None = None, name: str = "H_SF") -> QuadraticHamiltonian:
    """``H = P . I_x + (1/2) sum_a (I_x . (P . e_a))^2 + V(y)``."""
    if split.D < 2:
        raise ValueError("the scalar-field Hamiltonian needs D >= 2")
    I_x = split.I_x
    lin = _linear_functional(split, lambda b: float(b | I_x))
    # I_x . (P . e_a) is a vector; its square is the Euclidean norm squared
    Q = np.zeros((split.blades.size,) * 2)
    for a in range(1, split.N + 1):
        M = np.stack([(I_x | (split.algebra.blade(int(J)) | split.e(a))).coeffs for J in split.blades], axis=1)
        Q += M.T @ M
    return QuadraticHamiltonian(split, lin, Q, potential or Potential.zero(), name=name, kind="scalar_field")


def string(split: SpaceSplit, Lambda: float = 1.0, name: str = "H_Str") -> QuadraticHamiltonian:
    """``H = (|P|^2 - Lambda^2) / 2``."""
    if not Lambda > 0:
        raise ValueError("Lambda must be positive")
    k = split.blades.size
    return QuadraticHamiltonian(split, np.zeros(k), np.eye(k), Potential.zero(), const=-0.5 * Lambda**2,
                                name=name, kind="string", params={"Lambda": Lambda})


def constraint_residual(sys: HamiltonianSystem, q, P) -> float:
    """``H(q, P)``; zero on shell."""
    P = sys.momentum(P)
    sys._check_grade(P)
    return sys.value(q, P)


def solve_constraint(sys: HamiltonianSystem, q, P, blade: int | None = None, span: float = 64.0) -> Multivector | None:
    """Move the ``blade`` coefficient of ``P`` so that ``H(q, P) = 0``.

    ``blade`` defaults to ``I_x`` (``e_t`` for ``D = 1``).  The root nearest
    the current coefficient is returned; ``None`` if no sign change is found
    within ``+-span``.
    """
    alg = sys.algebra
    q = as_point(q, alg.n)
    c = _coeffs(P, alg).copy()
    J = sys.split.x_mask if blade is None else int(blade)

    def g(t):
        c2 = c.copy()
        c2[J] = t
        return sys.value(q, Multivector(alg, c2))

    t0 = c[J]
    g0 = g(t0)
    if g0 == 0.0:
        return Multivector(alg, c)
    for r in np.geomspace(1e-3, span, 60):
        for t1 in (t0 - r, t0 + r):
            if np.sign(g(t1)) != np.sign(g0):
                lo, hi = sorted((t0, t1))
                root = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
                c[J] = root
                return Multivector(alg, c)
    return None


# -- particle motions ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ParticleTrajectory:
    """Samples of a ``D = 1`` motion in the gauge ``lambda = gauge * dtau``."""

    tau: np.ndarray
    q: np.ndarray
    p: np.ndarray
    lam: np.ndarray
    gauge: float
    dt: float
    system: HamiltonianSystem = field(repr=False)

    def __len__(self) -> int:
        return self.tau.size

    def constraint_drift(self) -> float:
        vals = self.system.value_batch(self.q, self.p)
        return float(np.max(np.abs(vals)))

    def momentum(self, i: int) -> Multivector:
        return Multivector(self.system.algebra, self.p[i])


def integrate_particle(sys: HamiltonianSystem, q0, p0, tau_end: float, dt: float, gauge: float = 1.0,
                       project: bool = False, tol: float = 1e-10) -> ParticleTrajectory:
    """RK4 integration of ``dq/dtau = lambda d_p H``, ``dp/dtau = -lambda d_q H``.

    ``p0`` must satisfy ``|H(q0, p0)| <= tol``; with ``project=True`` its
    ``e_t`` (base-axis) coefficient is first solved from the constraint.
    """
    if sys.D != 1:
        raise ValueError("integrate_particle handles D = 1 systems")
    if not dt > 0 or not tau_end >= 0:
        raise ValueError("need dt > 0 and tau_end >= 0")
    alg = sys.algebra
    q = as_point(q0, alg.n).copy()
    P0 = p0 if isinstance(p0, Multivector) else alg.vector(p0)
    if project:
        P0 = solve_constraint(sys, q, P0)
        if P0 is None:
            raise ConstraintError("cannot project the initial momentum onto H = 0")
    h0 = sys.value(q, P0)
    if abs(h0) > tol:
        raise ConstraintError(f"initial data violates the constraint: H = {h0:.3e}")
    p = P0.vector_part().copy()
    steps = int(round(tau_end / dt))
    if not math.isclose(steps * dt, tau_end, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError("tau_end must be an integer multiple of dt")

    vec = alg.vectors_to_coeffs

    def rhs(x, y):
        c = vec(y)
        dq = alg.coeffs_to_vectors(sys.grad_P_batch(x, c))
        dp = -sys.grad_q_batch(x, c)
        return gauge * dq, gauge * dp

    qs = np.empty((steps + 1, alg.n))
    ps = np.empty((steps + 1, alg.n))
    qs[0], ps[0] = q, p
    for i in range(steps):
        k1q, k1p = rhs(q, p)
        k2q, k2p = rhs(q + 0.5 * dt * k1q, p + 0.5 * dt * k1p)
        k3q, k3p = rhs(q + 0.5 * dt * k2q, p + 0.5 * dt * k2p)
        k4q, k4p = rhs(q + dt * k3q, p + dt * k3p)
        q = q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
        p = p + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        qs[i + 1], ps[i + 1] = q, p
    tau = dt * np.arange(steps + 1)
    return ParticleTrajectory(tau, qs, vec(ps), np.full(steps + 1, gauge * dt), gauge, dt, sys)


def trajectory_from_samples(sys: HamiltonianSystem, tau, q, p, gauge: float = 1.0) -> ParticleTrajectory:
    """Wrap externally computed samples (uniform ``tau``) as a trajectory."""
    tau = np.asarray(tau, dtype=float)
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if p.shape[-1] == sys.algebra.n:
        p = sys.algebra.vectors_to_coeffs(p)
    dt = float(tau[1] - tau[0])
    return ParticleTrajectory(tau, q, p, np.full(tau.size, gauge * dt), gauge, dt, sys)


# -- canonical residuals ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CanonicalResiduals:
    """Max and RMS of both canonical equations plus the constraint."""

    first_max: float
    first_rms: float
    second_max: float
    second_rms: float
    constraint_max: float
    count: int
    first: np.ndarray = field(repr=False, compare=False, default=None)
    second: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def max(self) -> float:
        return max(self.first_max, self.second_max)

    def as_dict(self) -> dict:
        return {
            "first_max": self.first_max,
            "first_rms": self.first_rms,
            "second_max": self.second_max,
            "second_rms": self.second_rms,
            "constraint_max": self.constraint_max,
            "count": self.count,
        }


def _stats(r: np.ndarray) -> tuple[float, float]:
    if r.size == 0:
        return 0.0, 0.0
    return float(np.max(r)), float(np.sqrt(np.mean(r**2)))


_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def _stencil_derivative(y: np.ndarray, dt: float, idx: np.ndarray) -> np.ndarray:
    """Fourth-order central derivative of samples ``y`` at indices ``idx``."""
    return sum(w * y[idx + k - 2] for k, w in enumerate(_D1) if w) / dt


def trajectory_residuals(sys: HamiltonianSystem, traj: ParticleTrajectory, stride: int = 1) -> CanonicalResiduals:
    """Canonical residuals along a sampled curve, per unit ``dtau``.

    ``|lambda_hat d_p H - q'|`` and ``|-lambda_hat d_q H - p'|`` with
    derivatives from a five-point stencil; the two samples at each end are
    excluded.
    """
    alg = sys.algebra
    m = len(traj)
    if m < 5:
        raise ValueError("need at least 5 samples")
    idx = np.arange(2, m - 2, max(1, int(stride)))
    dq = _stencil_derivative(traj.q, traj.dt, idx)
    dp = _stencil_derivative(alg.coeffs_to_vectors(traj.p), traj.dt, idx)
    lam_hat = traj.gauge
    gP = alg.coeffs_to_vectors(sys.grad_P_batch(traj.q[idx], traj.p[idx]))
    gq = sys.grad_q_batch(traj.q[idx], traj.p[idx])
    r1 = np.linalg.norm(lam_hat * gP - dq, axis=-1)
    r2 = np.linalg.norm(-lam_hat * gq - dp, axis=-1)
    cons = np.abs(sys.value_batch(traj.q[idx], traj.p[idx]))
    a, b = _stats(r1)
    c, d = _stats(r2)
    return CanonicalResiduals(a, b, c, d, float(np.max(cons)), idx.size, r1, r2)


def canonical_residuals(sys: HamiltonianSystem, motion, **kw) -> CanonicalResiduals:
    """Residuals of the canonical equations for a trajectory or surface motion.

    ``motion`` is a :class:`ParticleTrajectory`, a
    :class:`~noetherlab.lattice.SurfaceMotion`, or a
    ``(LatticeField, FieldMomentum)`` pair.
    """
    from . import lattice

    if isinstance(motion, ParticleTrajectory):
        return trajectory_residuals(sys, motion, **kw)
    if isinstance(motion, tuple) and len(motion) == 2:
        motion = lattice.SurfaceMotion.from_field(*motion)
    if isinstance(motion, lattice.SurfaceMotion):
        return lattice.surface_residuals(sys, motion, **kw)
    raise TypeError(f"unsupported motion type {type(motion).__name__}")


# -- covariance ---------------------------------------------------------------------------------


class TransformedSystem(HamiltonianSystem):
    """``H'(q', P') = H(f^-1(q'), fbar(P'; f^-1(q')))``; gradients by finite differences."""

    kind = "transformed"

    def __init__(self, f: DiffeoMap, base: HamiltonianSystem, cfg: DerivativeConfig = DEFAULT_CFG):
        self.f = f
        self.base = base

        def H(qp, Pp):
            q = f.inverse_point(qp)
            return base.value(q, outermorphism(f.jacobian(q).T, Pp))

        split = SpaceSplit(base.algebra, base.split.base_axes, base.split.field_axes)
        super().__init__(split, H, name=f"{base.name}'", cfg=cfg, check=False)


def transform_system(f: DiffeoMap, sys: HamiltonianSystem, cfg: DerivativeConfig = DEFAULT_CFG) -> TransformedSystem:
    return TransformedSystem(f, sys, cfg)


def transform_trajectory(f: DiffeoMap, traj: ParticleTrajectory, cfg: DerivativeConfig = DEFAULT_CFG) -> ParticleTrajectory:
    """Image ``(f(q), fbar^-1(p; q), lambda)`` of a sampled trajectory."""
    alg = traj.system.algebra
    qs = np.array([f(q) for q in traj.q])
    ps = np.empty_like(traj.p)
    for i, q in enumerate(traj.q):
        J = f.jacobian(q, cfg)
        if abs(np.linalg.det(J)) <= 1e-10:
            raise SingularMapError(f"singular Jacobian at sample {i}")
        ps[i] = alg.vectors_to_coeffs(np.linalg.solve(J.T, alg.coeffs_to_vectors(traj.p[i])))
    return ParticleTrajectory(traj.tau, qs, ps, traj.lam, traj.gauge, traj.dt, transform_system(f, traj.system, cfg))


@dataclass(frozen=True)
class CovarianceResult:
    unprimed: CanonicalResiduals
    primed: CanonicalResiduals
    floor: float
    factor: float

    @property
    def ratio(self) -> float:
        return self.primed.max / max(self.unprimed.max, self.floor)

    @property
    def passed(self) -> bool:
        return self.primed.max <= self.factor * max(self.unprimed.max, self.floor)


def covariance_check(f: DiffeoMap, sys: HamiltonianSystem, motion, factor: float = 10.0, floor: float = 1e-6,
                     stride: int = 1, cfg: DerivativeConfig = DEFAULT_CFG, **kw) -> CovarianceResult:
    """Map a motion through ``f`` and compare canonical residuals under ``H'``.

    Passes when the image residual is at most ``factor`` times the pre-image
    residual, with ``floor`` standing in for the finite-difference accuracy of
    ``H'`` gradients.
    """
    from . import lattice

    if isinstance(motion, ParticleTrajectory):
        before = trajectory_residuals(sys, motion, stride=stride)
        image = transform_trajectory(f, motion, cfg)
        after = trajectory_residuals(image.system, image, stride=stride)
    else:
        if isinstance(motion, tuple):
            motion = lattice.SurfaceMotion.from_field(*motion)
        before = lattice.surface_residuals(sys, motion, **kw)
        image = lattice.transform_motion(f, motion, cfg)
        after = lattice.surface_residuals(transform_system(f, sys, cfg), image, **kw)
    return CovarianceResult(before, after, floor, factor)


def random_diffeo(algebra: Algebra, rng: np.random.Generator, strength: float = 0.3,
                  name: str = "random") -> DiffeoMap:
    """Smooth map ``q + M q + b + u * tanh(C q + d)`` with ``|J - 1| <= strength``.

    The bound on the Jacobian's deviation from the identity makes the map a
    global diffeomorphism.  Its Jacobian is analytic; the inverse is found by
    Newton iteration.
    """
    n = algebra.n
    M = rng.normal(size=(n, n))
    M *= 0.5 * strength / np.linalg.norm(M, 2)
    C = rng.normal(size=(n, n))
    C /= np.linalg.norm(C, 2)
    u = rng.normal(size=n)
    u *= 0.5 * strength / np.linalg.norm(u)
    b = rng.normal(size=n) * 0.1
    d = rng.normal(size=n) * 0.5

    def fwd(q):
        return q + M @ q + b + u * np.tanh(C @ q + d)

    def jac(q):
        s = 1.0 / np.cosh(C @ q + d) ** 2
        return np.eye(n) + M + (u * s)[:, None] * C

    return DiffeoMap(algebra, fwd, None, jac, name=name)


__all__ = [
    "CanonicalResiduals",
    "ConstraintError",
    "CovarianceResult",
    "HamiltonianSystem",
    "ParticleTrajectory",
    "Potential",
    "QuadraticHamiltonian",
    "SpaceSplit",
    "TransformedSystem",
    "canonical_residuals",
    "constraint_residual",
    "covariance_check",
    "integrate_particle",
    "nonrelativistic",
    "random_diffeo",
    "scalar_field",
    "solve_constraint",
    "string",
    "trajectory_from_samples",
    "trajectory_residuals",
    "transform_system",
    "transform_trajectory",
]
