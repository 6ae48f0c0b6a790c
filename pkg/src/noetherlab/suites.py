"""Randomized identity suites for the algebra kernel and induced maps.

Each suite returns :class:`ConservationReport` records, one per identity,
with the absolute error over all samples.
"""

from __future__ import annotations

import math

import numpy as np

from .calculus import (
    DEFAULT_CFG,
    DiffeoMap,
    VectorField,
    adjoint,
    adjoint_inverse,
    curl_of_adjoint_residual,
    differential,
    differential_inverse,
    infinitesimal_induced,
)
from .ga import Algebra, Multivector, rotor_apply, rotor_exp
from .report import ConservationReport, convergence_ratios

TOL_IDENTITY = 1e-12


def random_grade(alg: Algebra, r: int, rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` random unit-magnitude ``r``-vectors as coefficient rows."""
    out = np.zeros((count, alg.dim))
    idx = alg.grade_indices(r)
    c = rng.normal(size=(count, idx.size))
    out[:, idx] = c / np.linalg.norm(c, axis=1, keepdims=True)
    return out


def random_blade(alg: Algebra, r: int, rng: np.random.Generator, count: int) -> np.ndarray:
    """Unit ``r``-blades built as outer products of random vectors."""
    out = np.zeros((count, alg.dim))
    out[:, 0] = 1.0
    for _ in range(r):
        out = alg.outer(out, random_grade(alg, 1, rng, count))
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def _err(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.max(np.abs(a - b), axis=-1)


def _sign(k: int) -> float:
    return -1.0 if k % 2 else 1.0


def ga_identity_suite(n: int, samples: int, rng: np.random.Generator) -> list[ConservationReport]:
    """Reordering, associativity and expansion identities of the inner and outer products."""
    alg = Algebra(n)
    ip, op = alg.inner, alg.outer
    pairs_le = [(r, s) for r in range(1, n + 1) for s in range(r, n + 1)]
    pairs_lt = [(r, s) for r, s in pairs_le if r < s]
    pairs_any = [(r, s) for r in range(0, n + 1) for s in range(0, n + 1)]
    pairs_gt1 = [(r, s) for r, s in pairs_le if r > 1]
    errs: dict[str, list[np.ndarray]] = {k: [] for k in
                                         ("ident0-swap", "ident0-assoc", "ident0-wedge", "ident0-reorder",
                                          "ident1-inner-wedge", "ident1-wedge-inner", "proj-inner")}

    def draw(pairs):
        if not pairs:
            return
        sel = rng.integers(len(pairs), size=samples)
        for k, (r, s) in enumerate(pairs):
            m = int(np.sum(sel == k))
            if m:
                yield r, s, random_grade(alg, r, rng, m), random_grade(alg, s, rng, m), random_grade(alg, 1, rng, m)

    for r, s, A, B, a in draw(pairs_le):
        errs["ident0-swap"].append(_err(ip(A, B), _sign(r * (s - 1)) * ip(B, A)))
    for r, s, A, B, a in draw(pairs_lt):
        errs["ident0-assoc"].append(_err(ip(ip(A, B), a), ip(A, ip(B, a))))
        errs["ident0-wedge"].append(_err(ip(B, op(a, A)), ip(ip(B, a), A)))
        errs["ident0-reorder"].append(_err(ip(ip(B, a), A), _sign(r) * ip(ip(B, A), a)))
    for r, s, A, B, a in draw(pairs_any):
        rhs = op(ip(a, A), B) + _sign(r) * op(A, ip(a, B))
        errs["ident1-inner-wedge"].append(_err(ip(a, op(A, B)), rhs))
    for r, s, A, B, a in draw(pairs_gt1):
        rhs = ip(ip(a, A), B) + _sign(r) * ip(A, op(a, B))
        errs["ident1-wedge-inner"].append(_err(op(a, ip(A, B)), rhs))
    # (A . a) . (b . A^-1) = a . b for a in the subspace of blade A; grade 1 is
    # excluded because A . a is then a scalar and inner products with scalars vanish
    ks = rng.integers(2, n + 1, size=samples) if n >= 2 else np.zeros(0, int)
    for D in np.unique(ks):
        m = int(np.sum(ks == D))
        vecs = [random_grade(alg, 1, rng, m) for _ in range(D)]
        A = np.zeros((m, alg.dim))
        A[:, 0] = 1.0
        for v in vecs:
            A = op(A, v)
        A /= np.linalg.norm(A, axis=1, keepdims=True)
        w = rng.normal(size=(m, D))
        a = sum(w[:, [i]] * vecs[i] for i in range(D))
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        b = random_grade(alg, 1, rng, m)
        Ainv = alg.rev(A) / np.sum(A * A, axis=1, keepdims=True)
        lhs = ip(ip(A, a), ip(b, Ainv))
        ab = np.sum(a * b, axis=1)
        errs["proj-inner"].append(np.abs(lhs[:, 0] - ab) + np.max(np.abs(lhs[:, 1:]), axis=1))
    return [ConservationReport.from_residuals(f"ga:n={n}:{k}", np.concatenate(v) if v else [], TOL_IDENTITY)
            for k, v in errs.items()]


def series_apply(B: Multivector, a: Multivector, order: int) -> Multivector:
    """``a + a.B + (a.B).B / 2! + ...`` truncated after ``order`` terms."""
    term = a
    out = a
    for k in range(1, order + 1):
        term = (term | B) / k
        out = out + term
    return out


def series_bound(B: Multivector, order: int) -> float:
    nb = math.sqrt(max(float((~B | B)), 0.0))
    return nb ** (order + 1) / math.factorial(order + 1)


def rotor_suite(n: int, samples: int, rng: np.random.Generator, scale: float = 1.0,
                order: int = 6) -> list[ConservationReport]:
    """Rotor normalization, isometry, invariant subspaces and the commutator series.

    The series report holds ``max(0, error - bound)`` per sample, where the
    bound is ``|B|^(order+1) / (order+1)!`` for unit vectors; it also checks
    a long truncation against ``1e-12``.
    """
    alg = Algebra(n)
    errs: dict[str, list[float]] = {k: [] for k in ("rotor-norm", "rotor-isometry", "rotor-subspace",
                                                     "rotor-series-bound", "rotor-series")}
    Bs = random_grade(alg, 2, rng, samples) * scale * rng.uniform(0.1, 1.0, (samples, 1))
    for Bc in Bs:
        B = Multivector(alg, Bc)
        R = rotor_exp(B)
        norm = alg.gp(alg.rev(R.mv.coeffs), R.mv.coeffs)
        norm[0] -= 1.0
        errs["rotor-norm"].append(float(np.max(np.abs(norm))))
        a, b = (Multivector(alg, random_grade(alg, 1, rng, 1)[0]) for _ in range(2))
        ra, rb = rotor_apply(R, a), rotor_apply(R, b)
        errs["rotor-isometry"].append(abs((ra | rb).scalar - (a | b).scalar))
        # a simple rotation plane inside a blade: the blade is invariant
        u, w = (Multivector(alg, c) for c in random_grade(alg, 1, rng, 2))
        Bs_ = (u ^ w) * float(rng.uniform(0.1, 3.0))
        A = u ^ w
        if n >= 3:
            A = A ^ Multivector(alg, random_grade(alg, 1, rng, 1)[0])
        errs["rotor-subspace"].append(float(np.max(np.abs(rotor_apply(rotor_exp(Bs_), A).coeffs - A.coeffs))))
        ser = series_apply(B, a, order)
        gap = float(np.linalg.norm(ser.coeffs - ra.coeffs)) - series_bound(B, order)
        errs["rotor-series-bound"].append(max(0.0, gap))
        errs["rotor-series"].append(float(np.max(np.abs(series_apply(B, a, 40).coeffs - ra.coeffs))))
    return [ConservationReport.from_residuals(f"rotor:n={n}:{k}", v, TOL_IDENTITY) for k, v in errs.items()]


def _strip_jacobian(f: DiffeoMap) -> DiffeoMap:
    return DiffeoMap(f.algebra, f._fwd, f._inv, None, check=False, name=f"{f.name}-fd")


def induced_map_suite(n: int, samples: int, rng: np.random.Generator, fd_tol: float = 1e-6,
                      curl_tol: float = 1e-4) -> list[ConservationReport]:
    """Adjoint identities (analytic and finite-difference maps), curl of the adjoint,
    and the ``O(eps^2)`` accuracy of the infinitesimal maps.
    """
    from .dynamics import random_diffeo

    alg = Algebra(n)
    out = []
    maps = [random_diffeo(alg, rng) for _ in range(samples)]
    for label, tol, strip in (("analytic", TOL_IDENTITY, False), ("fd", fd_tol, True)):
        e1, e2 = [], []
        for f in maps:
            g = _strip_jacobian(f) if strip else f
            q = rng.uniform(-1, 1, n)
            r = int(rng.integers(1, n + 1))
            s = int(rng.integers(1, n + 1))
            A = Multivector(alg, random_grade(alg, min(r, s), rng, 1)[0])
            B = Multivector(alg, random_grade(alg, max(r, s), rng, 1)[0])
            # A_r . fbar(B_s) = fbar[f_(A_r) . B_s] for r <= s
            lhs = A | adjoint(g, B, q)
            rhs = adjoint(g, differential(g, A, q) | B, q)
            e1.append(float(np.max(np.abs(lhs.coeffs - rhs.coeffs))))
            # f_(A_r) . B_s = f_[A_r . fbar(B_s)] for r >= s
            lhs = differential(g, B, q) | A
            rhs = differential(g, B | adjoint(g, A, q), q)
            e2.append(float(np.max(np.abs(lhs.coeffs - rhs.coeffs))))
        out.append(ConservationReport.from_residuals(f"induced:n={n}:adjoint-left:{label}", e1, tol))
        out.append(ConservationReport.from_residuals(f"induced:n={n}:adjoint-right:{label}", e2, tol))
    # the fd variant differentiates a finite-difference Jacobian (nested differences)
    for label, strip in (("analytic", False), ("fd", True)):
        curls = []
        for f in maps:
            g = _strip_jacobian(f) if strip else f
            q = rng.uniform(-1, 1, n)
            A = Multivector(alg, random_grade(alg, int(rng.integers(1, n + 1)), rng, 1)[0])
            curls.append(curl_of_adjoint_residual(g, A, q))
        out.append(ConservationReport.from_residuals(f"induced:n={n}:curl-adjoint:{label}", curls, curl_tol))
    out.extend(infinitesimal_convergence(alg, rng, max(4, samples // 4)))
    return out


def infinitesimal_convergence(alg: Algebra, rng: np.random.Generator, samples: int,
                              eps_list=(1e-2, 1e-3, 1e-4), band=(50.0, 200.0)) -> list[ConservationReport]:
    """Error of the first-order induced maps against the exact maps of ``q + eps v``.

    Each decade in ``eps`` must cut the error by ``~100``; the report's
    residual is the distance of ``log10(ratio)`` from the band ``[50, 200]``.
    """
    n = alg.n
    exact = {
        "differential": differential,
        "adjoint": adjoint,
        "inverse_differential": differential_inverse,
        "adjoint_inverse": adjoint_inverse,
    }
    out = []
    fields = []
    for _ in range(samples):
        M = rng.normal(size=(n, n)) * 0.5
        C = rng.normal(size=(n, n)) * 0.5

        def fn(q, M=M, C=C):
            return M @ q + np.sin(C @ q)

        def jac(q, M=M, C=C):
            return M + np.cos(C @ q)[:, None] * C

        fields.append(VectorField(alg, fn, jac, check=False))
    for variant, f_exact in exact.items():
        errs = np.zeros((samples, len(eps_list)))
        for i, v in enumerate(fields):
            q = rng.uniform(-1, 1, n)
            A = Multivector(alg, random_grade(alg, int(rng.integers(1, n + 1)), rng, 1)[0])
            for k, eps in enumerate(eps_list):
                f = DiffeoMap(alg, lambda x, v=v, e=eps: x + e * v(x), None,
                              lambda x, v=v, e=eps: np.eye(n) + e * v.jacobian(x), check=False)
                approx = infinitesimal_induced(v, A, q, eps, variant)
                errs[i, k] = float(np.linalg.norm(f_exact(f, A, q, DEFAULT_CFG).coeffs - approx.coeffs))
        total = errs.max(axis=0)
        ratios = convergence_ratios(list(total))
        lo, hi = band
        res = [max(0.0, math.log10(lo / r), math.log10(r / hi)) if r > 0 else math.inf for r in ratios]
        rep = ConservationReport.from_residuals(f"induced:n={n}:infinitesimal-{variant}", res, 0.0)
        out.append(rep.with_convergence(ratios))
    return out


__all__ = [
    "TOL_IDENTITY",
    "ga_identity_suite",
    "induced_map_suite",
    "infinitesimal_convergence",
    "random_blade",
    "random_grade",
    "rotor_suite",
    "series_apply",
    "series_bound",
]
