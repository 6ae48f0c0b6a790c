"""Geometric calculus on maps of a flat Euclidean configuration space.

Points ``q`` are handled as ``(n,)`` arrays of vector components (a grade-1
:class:`~noetherlab.ga.Multivector` is accepted anywhere a point is).  All
derivatives are central finite differences unless the caller supplies an
analytic oracle, in which case the oracle is cross-checked against finite
differences when the object is built.

Induced mappings are computed from the ``n x n`` Jacobian ``J[i, j] =
d f_i / d q_j``: the differential is the outermorphism of ``J`` and the adjoint
the outermorphism of ``J.T``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ga import Algebra, GradeError, Multivector, ShapeError, rotor_apply, rotor_exp

FD_CHECK_TOL = 1e-6
_CHECK_POINTS = 8


class SingularMapError(ArithmeticError):
    """The Jacobian of a map is (numerically) singular."""


class StepUnderflowError(ArithmeticError):
    """Adaptive integration could not meet its tolerance."""


@dataclass(frozen=True)
class DerivativeConfig:
    """Central-difference settings; the step is ``h * (1 + |q|)`` when scaled."""

    h: float = 1e-5
    scale: bool = True

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"finite-difference step must be positive, got {self.h}")

    def step(self, q: np.ndarray) -> float:
        return self.h * (1.0 + float(np.linalg.norm(q))) if self.scale else self.h


DEFAULT_CFG = DerivativeConfig()


def as_point(q, n: int | None = None) -> np.ndarray:
    if isinstance(q, Multivector):
        if not q.is_grade(1) and np.any(q.coeffs):
            raise GradeError("points must be grade-1 multivectors")
        q = q.vector_part()
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or (n is not None and q.shape[0] != n):
        raise ShapeError(f"expected a point with {n} components, got shape {q.shape}")
    return q


def _check_rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


def _close(a, b, tol: float) -> bool:
    if isinstance(a, Multivector):
        a, b = a.coeffs, b.coeffs
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = 1.0 + max(float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(b), initial=0.0)))
    return float(np.max(np.abs(a - b), initial=0.0)) <= tol * scale


# -- field functions -------------------------------------------------------------


class FieldFn:
    """Scalar- or multivector-valued function on configuration space.

    ``derivative(q, a)``, when given, is the analytic directional derivative
    ``a . d/dq F(q)``; it is compared with central differences on 8 random
    points at construction.
    """

    def __init__(
        self,
        algebra: Algebra,
        fn: Callable,
        derivative: Callable | None = None,
        check: bool = True,
    ) -> None:
        self.algebra = algebra
        self.fn = fn
        self.analytic = derivative
        if derivative is not None and check:
            rng = _check_rng()
            for _ in range(_CHECK_POINTS):
                q = rng.uniform(-1, 1, algebra.n)
                a = rng.normal(size=algebra.n)
                fd = _central(self.fn, q, a, DEFAULT_CFG)
                if not _close(derivative(q, a), fd, FD_CHECK_TOL):
                    raise ValueError("analytic derivative disagrees with finite differences")

    def __call__(self, q):
        return self.fn(as_point(q, self.algebra.n))

    def derivative(self, q, a, cfg: DerivativeConfig = DEFAULT_CFG):
        q = as_point(q, self.algebra.n)
        a = as_point(a, self.algebra.n)
        if self.analytic is not None:
            return self.analytic(q, a)
        return _central(self.fn, q, a, cfg)


class VectorField:
    """Vector field ``v(q)`` returning ``(n,)`` components.

    ``fn`` may return an array or a grade-1 multivector.  An analytic Jacobian
    ``jac(q)[i, j] = d v_i / d q_j`` is optional and cross-checked.
    """

    def __init__(self, algebra: Algebra, fn: Callable, jacobian: Callable | None = None,
                 check: bool = True, name: str = "") -> None:
        self.algebra = algebra
        self._fn = fn
        self._jac = jacobian
        self.name = name
        if jacobian is not None and check:
            rng = _check_rng()
            for _ in range(_CHECK_POINTS):
                q = rng.uniform(-1, 1, algebra.n)
                if not _close(jacobian(q), _fd_jacobian(self, q, DEFAULT_CFG), FD_CHECK_TOL):
                    raise ValueError(f"analytic Jacobian of {name or 'vector field'} disagrees with finite differences")

    def __call__(self, q) -> np.ndarray:
        out = self._fn(as_point(q, self.algebra.n))
        if isinstance(out, Multivector):
            out = out.vector_part()
        return np.asarray(out, dtype=float)

    def mv(self, q) -> Multivector:
        return self.algebra.vector(self(q))

    def jacobian(self, q, cfg: DerivativeConfig = DEFAULT_CFG) -> np.ndarray:
        q = as_point(q, self.algebra.n)
        if self._jac is not None:
            return np.asarray(self._jac(q), dtype=float)
        return _fd_jacobian(self, q, cfg)

    @property
    def has_jacobian(self) -> bool:
        return self._jac is not None

    # common generators

    @classmethod
    def zero(cls, algebra: Algebra) -> "VectorField":
        n = algebra.n
        return cls(algebra, lambda q: np.zeros(n), lambda q: np.zeros((n, n)), name="zero")

    @classmethod
    def constant(cls, v0: Multivector | np.ndarray, algebra: Algebra | None = None, name: str = "") -> "VectorField":
        if isinstance(v0, Multivector):
            algebra = v0.algebra
            v0 = v0.vector_part()
        v0 = np.array(v0, dtype=float)
        n = algebra.n
        return cls(algebra, lambda q: v0.copy(), lambda q: np.zeros((n, n)), check=False, name=name or "constant")

    @classmethod
    def affine(cls, algebra: Algebra, M, b=None, name: str = "") -> "VectorField":
        """``v(q) = M q + b``."""
        M = np.array(M, dtype=float)
        b = np.zeros(algebra.n) if b is None else np.array(b, dtype=float)
        return cls(algebra, lambda q: M @ q + b, lambda q: M.copy(), check=False, name=name or "affine")

    @classmethod
    def rotation(cls, B: Multivector, center=None, offset=None, name: str = "") -> "VectorField":
        """Rigid generator ``v(q) = (q - center) . B + offset``."""
        alg = B.algebra
        M = bivector_matrix(B)
        c = np.zeros(alg.n) if center is None else as_point(center, alg.n)
        v0 = np.zeros(alg.n) if offset is None else as_point(offset, alg.n)
        return cls.affine(alg, M, v0 - M @ c, name=name or "rotation")


def bivector_matrix(B: Multivector) -> np.ndarray:
    """Matrix ``M`` with ``M @ a == (a . B).vector_part()`` for vectors ``a``."""
    alg = B.algebra
    eye = alg.vectors_to_coeffs(np.eye(alg.n))
    return alg.coeffs_to_vectors(alg.inner(eye, B.coeffs)).T


def _central(F: Callable, q: np.ndarray, a: np.ndarray, cfg: DerivativeConfig):
    na = float(np.linalg.norm(a))
    if na == 0:
        raise ValueError("direction must be nonzero")
    h = cfg.step(q) / na
    return (F(q + h * a) - F(q - h * a)) * (1.0 / (2.0 * h))


def _fd_jacobian(fn: Callable, q: np.ndarray, cfg: DerivativeConfig) -> np.ndarray:
    n = q.shape[0]
    h = cfg.step(q)
    J = np.empty((n, n))
    for j in range(n):
        dq = np.zeros(n)
        dq[j] = h
        J[:, j] = (np.asarray(fn(q + dq), dtype=float) - np.asarray(fn(q - dq), dtype=float)) / (2 * h)
    return J


# -- diffeomorphisms ---------------------------------------------------------------


class DiffeoMap:
    """Invertible smooth map ``q -> f(q)`` of configuration space.

    ``inverse`` and ``jacobian`` are optional.  Without an inverse,
    :meth:`inverse_point` solves ``f(q) = q'`` by Newton iteration.
    """

    def __init__(self, algebra: Algebra, forward: Callable, inverse: Callable | None = None,
                 jacobian: Callable | None = None, check: bool = True, name: str = "") -> None:
        self.algebra = algebra
        self._fwd = forward
        self._inv = inverse
        self._jac = jacobian
        self.name = name
        if check:
            rng = _check_rng()
            for _ in range(_CHECK_POINTS):
                q = rng.uniform(-1, 1, algebra.n)
                if inverse is not None and not _close(self.inverse_point(self(q)), q, 1e-10):
                    raise ValueError(f"inverse of {name or 'map'} does not undo the forward map")
                if jacobian is not None and not _close(jacobian(q), _fd_jacobian(self, q, DEFAULT_CFG), FD_CHECK_TOL):
                    raise ValueError(f"analytic Jacobian of {name or 'map'} disagrees with finite differences")

    def __call__(self, q) -> np.ndarray:
        out = self._fwd(as_point(q, self.algebra.n))
        if isinstance(out, Multivector):
            out = out.vector_part()
        return np.asarray(out, dtype=float)

    @property
    def has_jacobian(self) -> bool:
        return self._jac is not None

    def jacobian(self, q, cfg: DerivativeConfig = DEFAULT_CFG) -> np.ndarray:
        q = as_point(q, self.algebra.n)
        if self._jac is not None:
            return np.asarray(self._jac(q), dtype=float)
        return _fd_jacobian(self, q, cfg)

    def inverse_point(self, qp, cfg: DerivativeConfig = DEFAULT_CFG, tol: float = 1e-14,
                      guess=None) -> np.ndarray:
        qp = as_point(qp, self.algebra.n)
        if self._inv is not None:
            out = self._inv(qp)
            return out.vector_part() if isinstance(out, Multivector) else np.asarray(out, dtype=float)
        q = qp.copy() if guess is None else as_point(guess, self.algebra.n).copy()
        for _ in range(60):
            r = self(q) - qp
            if np.linalg.norm(r) <= tol * (1.0 + np.linalg.norm(qp)):
                return q
            q = q - np.linalg.solve(self.jacobian(q, cfg), r)
        if np.linalg.norm(self(q) - qp) > 1e-10 * (1.0 + np.linalg.norm(qp)):
            raise SingularMapError("Newton inversion of the map did not converge")
        return q

    def inverse(self) -> "DiffeoMap":
        def jac(qp):
            return np.linalg.inv(self.jacobian(self.inverse_point(qp)))

        return DiffeoMap(self.algebra, self.inverse_point, self._fwd, jac if self._jac else None,
                         check=False, name=f"inverse({self.name})")

    # common maps

    @classmethod
    def identity(cls, algebra: Algebra) -> "DiffeoMap":
        n = algebra.n
        return cls(algebra, lambda q: q.copy(), lambda q: q.copy(), lambda q: np.eye(n), check=False, name="identity")

    @classmethod
    def translation(cls, v0: Multivector) -> "DiffeoMap":
        alg = v0.algebra
        t = v0.vector_part()
        n = alg.n
        return cls(alg, lambda q: q + t, lambda q: q - t, lambda q: np.eye(n), check=False, name="translation")

    @classmethod
    def linear(cls, algebra: Algebra, M, b=None, name: str = "") -> "DiffeoMap":
        M = np.array(M, dtype=float)
        b = np.zeros(algebra.n) if b is None else np.array(b, dtype=float)
        Minv = np.linalg.inv(M)
        return cls(algebra, lambda q: M @ q + b, lambda q: Minv @ (q - b), lambda q: M.copy(),
                   check=False, name=name or "linear")

    @classmethod
    def rotation(cls, B: Multivector, center=None, name: str = "") -> "DiffeoMap":
        """``f(q) = c + R (q - c) ~R`` with ``R = exp(-B/2)``."""
        alg = B.algebra
        R = rotor_exp(B)
        eye = alg.vectors_to_coeffs(np.eye(alg.n))
        Rc, Rrev = R.mv.coeffs, alg.rev(R.mv.coeffs)
        M = alg.coeffs_to_vectors(alg.gp(alg.gp(Rc, eye), Rrev)).T
        c = np.zeros(alg.n) if center is None else as_point(center, alg.n)
        return cls.linear(alg, M, c - M @ c, name=name or "rotation")

    @classmethod
    def flow(cls, v: VectorField, tau: float, cfg: DerivativeConfig = DEFAULT_CFG) -> "DiffeoMap":
        """Time-``tau`` flow of ``v`` (inverse is the flow for ``-tau``)."""
        alg = v.algebra
        return cls(alg, lambda q: lie_flow(v, q, tau, cfg), lambda q: lie_flow(v, q, -tau, cfg),
                   check=False, name=f"flow({v.name}, {tau:g})")


# -- outermorphisms ----------------------------------------------------------------


def outermorphism_block(M: np.ndarray, k: int) -> np.ndarray:
    """Grade-``k`` block of the outermorphism of ``M``.

    Rows and columns are indexed by grade-``k`` blades in ascending bitmask
    order; entry ``[K, I]`` is the minor ``det(M[K][:, I])``.
    """
    n = M.shape[0]
    if k == 0:
        return np.ones((1, 1))
    if k == 1:
        return M.copy()
    subsets = sorted(itertools.combinations(range(n), k), key=lambda s: sum(1 << i for i in s))
    idx = np.array(subsets)
    sub = M[idx[:, None, :, None], idx[None, :, None, :]]
    return np.linalg.det(sub)


def outermorphism(M: np.ndarray, A: Multivector | np.ndarray, algebra: Algebra | None = None):
    """Apply the outermorphism of the linear map ``M`` to ``A``; scalars are unchanged."""
    as_mv = isinstance(A, Multivector)
    alg = A.algebra if as_mv else algebra
    c = A.coeffs if as_mv else np.asarray(A, dtype=float)
    out = np.zeros(alg.dim)
    for k in range(alg.n + 1):
        ix = alg.grade_indices(k)
        part = c[ix]
        if np.any(part):
            out[ix] = outermorphism_block(M, k) @ part
    return Multivector(alg, out) if as_mv else out


# -- derivative operations -----------------------------------------------------------


def directional_derivative(F, a, q, cfg: DerivativeConfig = DEFAULT_CFG):
    """``a . d/dq F(q)``; uses the analytic oracle of a :class:`FieldFn` if present."""
    if isinstance(a, Multivector) and not a.is_grade(1):
        raise GradeError("direction must be a vector")
    if isinstance(F, FieldFn):
        return F.derivative(q, a, cfg)
    q = as_point(q)
    return _central(F, q, as_point(a, q.shape[0]), cfg)


def vector_derivative(F, q, algebra: Algebra | None = None, cfg: DerivativeConfig = DEFAULT_CFG) -> Multivector:
    """Gradient ``sum_i e_i dF/dq_i`` of a scalar function."""
    alg = algebra or getattr(F, "algebra", None) or (q.algebra if isinstance(q, Multivector) else None)
    if alg is None:
        raise ValueError("cannot infer the algebra; pass algebra=")
    q = as_point(q, alg.n)
    grad = np.empty(alg.n)
    for i in range(alg.n):
        e = np.zeros(alg.n)
        e[i] = 1.0
        grad[i] = float(directional_derivative(F, e, q, cfg))
    return alg.vector(grad)


def differential(f: DiffeoMap, A: Multivector, q, cfg: DerivativeConfig = DEFAULT_CFG) -> Multivector:
    """Induced outermorphism ``f_(A; q)`` (vectors: ``a . d/dq f(q)``)."""
    return outermorphism(f.jacobian(q, cfg), A)


def adjoint(f: DiffeoMap, B: Multivector, q, cfg: DerivativeConfig = DEFAULT_CFG) -> Multivector:
    """Adjoint outermorphism ``f^-(B; q)`` with ``f^-(b) . a = b . f_(a)``."""
    return outermorphism(f.jacobian(q, cfg).T, B)


def _inverse_matrix(J: np.ndarray) -> np.ndarray:
    det = np.linalg.det(J)
    if abs(det) <= 1e-10:
        raise SingularMapError(f"Jacobian determinant {det:.3e} is singular")
    return np.linalg.inv(J)


def adjoint_inverse(f: DiffeoMap, B: Multivector, q, cfg: DerivativeConfig = DEFAULT_CFG) -> Multivector:
    """Covector transport ``f^-^{-1}(B; q)``, the rule momenta follow."""
    return outermorphism(_inverse_matrix(f.jacobian(q, cfg)).T, B)


def differential_inverse(f: DiffeoMap, A: Multivector, q, cfg: DerivativeConfig = DEFAULT_CFG) -> Multivector:
    return outermorphism(_inverse_matrix(f.jacobian(q, cfg)), A)


INDUCED_VARIANTS = ("differential", "adjoint", "inverse_differential", "adjoint_inverse")


def infinitesimal_induced(v: VectorField, A: Multivector, q, eps: float, variant: str = "differential",
                          cfg: DerivativeConfig = DEFAULT_CFG) -> Multivector:
    """First-order induced maps of ``f(q) = q + eps v(q)``.

    ``differential``          ``A + eps (A . d) ^ v``
    ``adjoint``               ``A + eps d' ^ (v' . A)``
    ``inverse_differential``  ``A - eps (A . d) ^ v``
    ``adjoint_inverse``       ``A - eps d' ^ (v' . A)``
    """
    if variant not in INDUCED_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {INDUCED_VARIANTS}")
    alg = A.algebra
    if variant.endswith("differential"):
        term = curl_term_differential(v, A, q, cfg)
    else:
        term = curl_term_adjoint(v, A, q, cfg)
    sign = -1.0 if variant.startswith(("inverse", "adjoint_inverse")) else 1.0
    return Multivector(alg, A.coeffs + sign * eps * term)


def curl_term_differential(v: VectorField, A: Multivector, q, cfg: DerivativeConfig = DEFAULT_CFG) -> np.ndarray:
    """Coefficients of ``(A . d_q) ^ v = sum_i (A . e_i) ^ d_i v``."""
    alg = A.algebra
    K = v.jacobian(q, cfg)
    eye = alg.vectors_to_coeffs(np.eye(alg.n))
    dv = alg.vectors_to_coeffs(K.T)
    return np.sum(alg.outer(alg.inner(A.coeffs, eye), dv), axis=0)


def curl_term_adjoint(v: VectorField, A: Multivector, q, cfg: DerivativeConfig = DEFAULT_CFG) -> np.ndarray:
    """Coefficients of ``d'_q ^ (v' . A) = sum_i e_i ^ (d_i v . A)``."""
    alg = A.algebra
    K = v.jacobian(q, cfg)
    eye = alg.vectors_to_coeffs(np.eye(alg.n))
    dv = alg.vectors_to_coeffs(K.T)
    return np.sum(alg.outer(eye, alg.inner(dv, A.coeffs)), axis=0)


def lie_flow(v: VectorField, q, tau: float, cfg: DerivativeConfig = DEFAULT_CFG, tol: float = 1e-10,
             min_step: float = 1e-12) -> np.ndarray:
    """Integrate ``dq/dt = v(q)`` from 0 to ``tau`` with step-doubling RK4.

    Each accepted step has local error estimate ``<= tol`` (relative to
    ``1 + |q|``).
    """
    q = as_point(q, v.algebra.n).copy()
    if tau == 0:
        return q
    direction = math.copysign(1.0, tau)
    remaining = abs(tau)
    dt = min(remaining, 0.1)

    def rk4(x, h):
        k1 = v(x)
        k2 = v(x + 0.5 * h * k1)
        k3 = v(x + 0.5 * h * k2)
        k4 = v(x + h * k3)
        return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    while remaining > 0:
        dt = min(dt, remaining)
        h = direction * dt
        full = rk4(q, h)
        half = rk4(rk4(q, 0.5 * h), 0.5 * h)
        err = float(np.linalg.norm(half - full)) / 15.0
        if err <= tol * (1.0 + float(np.linalg.norm(q))):
            q = half + (half - full) / 15.0
            remaining -= dt
            if err < tol / 64:
                dt *= 2.0
        else:
            dt *= 0.5
            if dt < min_step:
                raise StepUnderflowError(f"step size underflow at remaining time {remaining:.3e}")
    return q


def lie_series(v: VectorField, q, tau: float, order: int, cfg: DerivativeConfig = DerivativeConfig(h=1e-3)) -> np.ndarray:
    """Truncated Lie series ``q + tau v + tau^2/2! (v . d) v + ...`` up to ``tau^order``.

    Higher terms use nested central differences, so keep ``order`` small.
    """
    q = as_point(q, v.algebra.n)

    def term(k: int) -> Callable:
        if k == 0:
            return lambda x: x
        prev = term(k - 1)
        return lambda x: _central(prev, x, v(x), cfg) if np.any(v(x)) else np.zeros_like(x)

    out = q.copy()
    for k in range(1, order + 1):
        out = out + tau**k / math.factorial(k) * term(k)(q)
    return out


def multivector_gradient(H: Callable, P: Multivector, q, cfg: DerivativeConfig = DEFAULT_CFG) -> Multivector:
    """``d_P H = sum_J ~e_J dH/dP_J`` over the grade-``D`` blades of ``P``.

    The reversed-blade convention makes ``d_P (~P . P / 2) = ~P``.
    """
    grades = P.grades()
    if len(grades) > 1:
        raise GradeError(f"momentum must be single-grade, got {grades}")
    alg = P.algebra
    D = grades[0] if grades else None
    if D is None:
        raise GradeError("cannot infer the grade of a zero momentum; use gradient_wrt_grade")
    return gradient_wrt_grade(H, P, D, q, cfg)


def gradient_wrt_grade(H: Callable, P: Multivector, D: int, q, cfg: DerivativeConfig = DEFAULT_CFG) -> Multivector:
    alg = P.algebra
    q = as_point(q, alg.n)
    h = cfg.h * (1.0 + float(np.linalg.norm(P.coeffs))) if cfg.scale else cfg.h
    out = np.zeros(alg.dim)
    for J in alg.grade_indices(D):
        d = np.zeros(alg.dim)
        d[J] = h
        dH = (H(q, Multivector(alg, P.coeffs + d)) - H(q, Multivector(alg, P.coeffs - d))) / (2 * h)
        out[J] = dH
    return Multivector(alg, alg.rev(out))


def curl_of_adjoint_residual(f: DiffeoMap, A: Multivector, q, cfg: DerivativeConfig = DEFAULT_CFG) -> float:
    """``|d_q ^ f^-(A; q)|`` by nested central differences; zero in exact arithmetic."""
    alg = A.algebra
    q = as_point(q, alg.n)
    h = cfg.step(q)
    out = np.zeros(alg.dim)
    for i in range(alg.n):
        dq = np.zeros(alg.n)
        dq[i] = h
        d_adj = (adjoint(f, A, q + dq, cfg).coeffs - adjoint(f, A, q - dq, cfg).coeffs) / (2 * h)
        ei = np.zeros(alg.dim)
        ei[1 << i] = 1.0
        out += alg.outer(ei, d_adj)
    return float(np.linalg.norm(out))


__all__ = [
    "DEFAULT_CFG",
    "DerivativeConfig",
    "DiffeoMap",
    "FieldFn",
    "SingularMapError",
    "StepUnderflowError",
    "VectorField",
    "adjoint",
    "adjoint_inverse",
    "as_point",
    "bivector_matrix",
    "curl_of_adjoint_residual",
    "differential",
    "differential_inverse",
    "directional_derivative",
    "infinitesimal_induced",
    "lie_flow",
    "gradient_wrt_grade",
    "lie_series",
    "multivector_gradient",
    "outermorphism",
    "outermorphism_block",
    "vector_derivative",
]
