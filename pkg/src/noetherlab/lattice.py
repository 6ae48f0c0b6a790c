"""Surfaces sampled on rectangular lattices.

A field ``y(x)`` on a ``D``-dimensional box describes the graph surface
``{x + y(x)}``.  Tangents, momenta and residuals use second-order central
differences, so each derivative costs one ring of nodes: momenta live on the
interior, canonical residuals and divergences on the interior of the interior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .calculus import DEFAULT_CFG, DerivativeConfig, DiffeoMap, SingularMapError, outermorphism_block
from .dynamics import CanonicalResiduals, HamiltonianSystem, SpaceSplit, _stats
from .ga import Algebra, Multivector

MIN_NODES = 5


class LatticeFormatError(ValueError):
    """A lattice file does not follow the documented text format."""


class FieldSolveError(RuntimeError):
    """Relaxation did not reach its tolerance; ``history`` holds residuals per sweep."""

    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


# -- grids and fields ------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular grid with ``shape[k]`` nodes and spacing ``h``."""

    shape: tuple[int, ...]
    h: float
    origin: tuple[float, ...] | None = None

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        object.__setattr__(self, "shape", shape)
        if any(s < MIN_NODES for s in shape):
            raise ValueError(f"need at least {MIN_NODES} nodes per axis, got {shape}")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        origin = (0.0,) * len(shape) if self.origin is None else tuple(float(o) for o in self.origin)
        if len(origin) != len(shape):
            raise ValueError("origin and shape dimensions differ")
        object.__setattr__(self, "origin", origin)

    @classmethod
    def box(cls, nodes: int | Sequence[int], lower: Sequence[float], upper: Sequence[float]) -> "Grid":
        """Grid spanning ``[lower, upper]`` with equal spacing on every axis."""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        nodes = [int(nodes)] * lower.size if np.isscalar(nodes) else [int(k) for k in nodes]
        hs = (upper - lower) / (np.asarray(nodes) - 1)
        if not np.allclose(hs, hs[0], rtol=1e-12, atol=0):
            raise ValueError(f"box and node counts give unequal spacings {hs}")
        return cls(tuple(nodes), float(hs[0]), tuple(lower))

    @property
    def D(self) -> int:
        return len(self.shape)

    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (D,)``."""
        axes = [o + self.h * np.arange(s) for o, s in zip(self.origin, self.shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def inner(self, rings: int = 1) -> tuple[slice, ...]:
        return tuple(slice(rings, s - rings) for s in self.shape)

    def refine(self) -> "Grid":
        """Halve the spacing on the same box."""
        return Grid(tuple(2 * s - 1 for s in self.shape), self.h / 2, self.origin)


def central_diff(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Central difference along ``axis``; the two end slabs become NaN."""
    out = np.full(a.shape, np.nan)
    lo = [slice(None)] * a.ndim
    hi = [slice(None)] * a.ndim
    mid = [slice(None)] * a.ndim
    lo[axis], hi[axis], mid[axis] = slice(None, -2), slice(2, None), slice(1, -1)
    out[tuple(mid)] = (a[tuple(hi)] - a[tuple(lo)]) / (2.0 * h)
    return out


def default_split(D: int, N: int) -> SpaceSplit:
    return SpaceSplit(Algebra(D + N), range(D), range(D, D + N))


class LatticeField:
    """Field values ``y(x)`` (``N`` components per node) on a grid.

    ``split`` places the grid axes and field components in configuration
    space; by default the first ``D`` basis vectors are spacetime and the next
    ``N`` are field directions.
    """

    def __init__(self, grid: Grid, values, split: SpaceSplit | None = None):
        values = np.asarray(values, dtype=float)
        if values.ndim == grid.D:
            values = values[..., None]
        if values.shape[: grid.D] != grid.shape:
            raise ValueError(f"values of shape {values.shape} do not fit grid {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        N = values.shape[-1]
        split = split or default_split(grid.D, N)
        if split.D != grid.D or split.N != N:
            raise ValueError(f"split (D={split.D}, N={split.N}) does not match field (D={grid.D}, N={N})")
        self.grid = grid
        self.values = values
        self.values.setflags(write=False)
        self.split = split

    def __repr__(self) -> str:
        return f"LatticeField(D={self.D}, N={self.N}, shape={self.grid.shape}, h={self.grid.h:g})"

    @property
    def D(self) -> int:
        return self.grid.D

    @property
    def N(self) -> int:
        return self.values.shape[-1]

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable, split: SpaceSplit | None = None) -> "LatticeField":
        """Sample ``fn(x)`` with ``x`` of shape ``(..., D)`` returning ``(..., N)``."""
        return cls(grid, fn(grid.coords()), split)

    def points(self) -> np.ndarray:
        """Configuration-space points ``x + y(x)``, shape ``grid.shape + (n,)``."""
        n = self.split.algebra.n
        out = np.zeros(self.grid.shape + (n,))
        out[..., list(self.split.base_axes)] = self.grid.coords()
        out[..., list(self.split.field_axes)] = self.values
        return out

    def gradients(self) -> np.ndarray:
        """``d_k phi_a``; shape ``grid.shape + (N, D)`` with NaN on the boundary ring."""
        return np.stack([central_diff(self.values, k, self.grid.h) for k in range(self.D)], axis=-1)

    def gradient_vectors(self) -> np.ndarray:
        """``grad phi_a`` as spacetime vectors in ``R^n``; shape ``grid.shape + (N, n)``."""
        g = self.gradients()
        out = np.zeros(g.shape[:-1] + (self.split.algebra.n,))
        out[..., list(self.split.base_axes)] = g
        return out

    # text format: header "D N h nx,ny,...", then one row-major line per node

    def save(self, path: str | Path) -> None:
        g = self.grid
        lines = [f"{self.D} {self.N} {g.h!r} {','.join(str(s) for s in g.shape)}"]
        flat = self.values.reshape(-1, self.N)
        lines += [" ".join(f"{v:.17g}" for v in row) for row in flat]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, split: SpaceSplit | None = None) -> "LatticeField":
        text = Path(path).read_text(encoding="utf-8").splitlines()
        if not text:
            raise LatticeFormatError("empty lattice file")
        head = text[0].split()
        if len(head) != 4:
            raise LatticeFormatError("line 1: header must read 'D N h nx[,ny,...]'")
        try:
            D, N, h = int(head[0]), int(head[1]), float(head[2])
            shape = tuple(int(s) for s in head[3].split(","))
        except ValueError as exc:
            raise LatticeFormatError(f"line 1: {exc}") from None
        if len(shape) != D:
            raise LatticeFormatError(f"line 1: {len(shape)} axis sizes for D = {D}")
        rows = [ln for ln in text[1:] if ln.strip()]
        expected = int(np.prod(shape))
        if len(rows) != expected:
            raise LatticeFormatError(f"expected {expected} node lines, found {len(rows)}")
        vals = np.empty((expected, N))
        for i, ln in enumerate(rows):
            parts = ln.split()
            if len(parts) != N:
                raise LatticeFormatError(f"line {i + 2}: expected {N} values, found {len(parts)}")
            try:
                vals[i] = [float(p) for p in parts]
            except ValueError as exc:
                raise LatticeFormatError(f"line {i + 2}: {exc}") from None
        return cls(Grid(shape, h), vals.reshape(shape + (N,)), split)


# -- momenta and motions ------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldMomentum:
    """Momentum coefficients and gauge ``lambda / |dX|`` per node; NaN where undefined."""

    coeffs: np.ndarray
    lam: np.ndarray
    algebra: Algebra = field(repr=False)

    @property
    def valid(self) -> np.ndarray:
        return np.all(np.isfinite(self.coeffs), axis=-1)

    def at(self, index) -> Multivector:
        return Multivector(self.algebra, self.coeffs[index])


def _wedge_images(alg: Algebra, images: dict[int, np.ndarray], A: np.ndarray) -> np.ndarray:
    """Outermorphism of a constant multivector ``A`` given batched images of basis vectors.

    ``images[i]`` holds the coefficients of the image of ``e_i`` at every node.
    Only blades built from keys of ``images`` may appear in ``A``.
    """
    lead = next(iter(images.values())).shape[:-1]
    out = np.zeros(lead + (alg.dim,))
    for J in np.flatnonzero(A):
        term = np.zeros(lead + (alg.dim,))
        term[..., 0] = A[J]
        for i in range(alg.n):
            if (int(J) >> i) & 1:
                term = alg.outer(term, images[i])
        out += term
    return out


def _tangent_images(split: SpaceSplit, points: np.ndarray, h: float) -> dict[int, np.ndarray]:
    alg = split.algebra
    return {
        ax: alg.vectors_to_coeffs(central_diff(points, k, h))
        for k, ax in enumerate(split.base_axes)
    }


def graph_terms(fld: LatticeField) -> dict[int, np.ndarray]:
    """``g(I_x)`` at every node split by the number of field factors."""
    split = fld.split
    alg = split.algebra
    full = _wedge_images(alg, _tangent_images(split, fld.points(), fld.grid.h), split.I_x.coeffs)
    out = {}
    for k in range(min(split.D, split.N) + 1):
        part = np.zeros_like(full)
        sel = split._field_legs == k
        part[..., sel] = full[..., sel]
        out[k] = part
    return out


def build_field_momentum(sys: HamiltonianSystem, fld: LatticeField) -> FieldMomentum:
    """On-shell momentum for a graph motion, on interior nodes.

    De Donder-Weyl systems (``kind == "scalar_field"``) get
    ``P = alpha I_x + sum_a (~I_x . grad phi_a) ^ e_a`` with ``alpha`` fixed by
    ``H = 0`` and ``lambda = |dX|``.  String systems get
    ``P = Lambda ~I_gamma`` with ``lambda = |dGamma| / Lambda``.
    """
    split = fld.split
    alg = split.algebra
    if sys.algebra is not alg or sys.split.base_axes != split.base_axes:
        raise ValueError("system and field use different configuration-space splits")
    if sys.kind == "scalar_field":
        return _dw_momentum(sys, fld)
    if sys.kind == "string":
        return _string_momentum(sys, fld)
    raise ValueError(f"no momentum construction for systems of kind {sys.kind!r}")


def _dw_momentum(sys: HamiltonianSystem, fld: LatticeField) -> FieldMomentum:
    split = fld.split
    alg = split.algebra
    if split.D < 2:
        raise ValueError("field momenta need D >= 2")
    grads = alg.vectors_to_coeffs(fld.gradient_vectors())  # (..., N, dim)
    It = alg.rev(split.I_x.coeffs)
    P0 = np.zeros(fld.grid.shape + (alg.dim,))
    for a in range(split.N):
        ea = split.e(a + 1).coeffs
        P0 += alg.outer(alg.inner(It, grads[..., a, :]), ea)
    Jx = split.x_mask
    s = float(split.I_x | split.I_x)
    q = fld.points()
    alpha = -s * sys.value_batch(q, np.nan_to_num(P0))
    P = P0.copy()
    P[..., Jx] = alpha
    mask = np.isnan(grads[..., 0, 0])
    P[mask] = np.nan
    lam = np.where(mask, np.nan, 1.0)
    return FieldMomentum(P, lam, alg)


def _string_momentum(sys: HamiltonianSystem, fld: LatticeField) -> FieldMomentum:
    Lam = float(sys.params["Lambda"])
    gI = graph_terms(fld)
    full = sum(gI.values())
    alg = fld.split.algebra
    norm = np.sqrt(np.sum(full**2, axis=-1))
    P = Lam * alg.rev(full) / norm[..., None]
    return FieldMomentum(P, norm / Lam, alg)


class SurfaceMotion:
    """Lattice-parametrized surface ``q(x)`` with momentum and gauge per node."""

    def __init__(self, split: SpaceSplit, grid: Grid, points: np.ndarray, momentum: FieldMomentum):
        self.split = split
        self.grid = grid
        self.points = np.asarray(points, dtype=float)
        self.momentum = momentum

    @classmethod
    def from_field(cls, fld: LatticeField, mom: FieldMomentum) -> "SurfaceMotion":
        return cls(fld.split, fld.grid, fld.points(), mom)


def surface_residuals(sys: HamiltonianSystem, motion: SurfaceMotion, truncate: bool = False,
                      rings: int = 2) -> CanonicalResiduals:
    """Canonical residuals per ``|dX|`` at nodes ``rings`` away from the boundary.

    ``r1 = lam d_P H - g(I_x)`` and
    ``r2 = (-1)^D lam d_q H - sum_i g(I_x . e_i) . d_i P`` where ``g`` pushes
    parameter blades forward along the lattice tangents.  ``truncate`` drops
    blades with two or more field-space legs from the pushed-forward blades.
    """
    split = motion.split
    alg = split.algebra
    D = split.D
    h = motion.grid.h
    imgs = _tangent_images(split, motion.points, h)
    I_x = split.I_x.coeffs
    gI = _wedge_images(alg, imgs, I_x)
    if truncate:
        gI = split.truncate_graph(gI)
    P = motion.momentum.coeffs
    lam = motion.momentum.lam
    inner = motion.grid.inner(rings)
    q = motion.points[inner]
    Pi = P[inner]
    lami = lam[inner][..., None]
    gradP = sys.grad_P_batch(q, Pi)
    r1 = np.sqrt(np.sum((lami * gradP - gI[inner]) ** 2, axis=-1))
    acc = ((-1) ** D) * lami * sys.grad_q_batch(q, Pi)
    for k, ax in enumerate(split.base_axes):
        ei = np.zeros(alg.dim)
        ei[1 << ax] = 1.0
        Ai = alg.inner(I_x, ei)
        gA = _wedge_images(alg, imgs, Ai)
        if truncate:
            gA = split.truncate_graph(gA)
        dP = central_diff(P, k, h)[inner]
        prod = alg.inner(gA[inner], dP) if D > 1 else alg.gp(gA[inner], dP)
        acc = acc - alg.coeffs_to_vectors(prod)
    r2 = np.linalg.norm(acc, axis=-1)
    cons = np.abs(sys.value_batch(q, Pi))
    r1, r2 = r1.ravel(), r2.ravel()
    if not (np.all(np.isfinite(r1)) and np.all(np.isfinite(r2))):
        raise ValueError("momentum undefined on residual nodes; increase rings")
    a, b = _stats(r1)
    c, d = _stats(r2)
    return CanonicalResiduals(a, b, c, d, float(np.max(cons)), r1.size, r1, r2)


def transform_motion(f: DiffeoMap, motion: SurfaceMotion, cfg: DerivativeConfig = DEFAULT_CFG) -> SurfaceMotion:
    """Image ``(f(q), fbar^-1(P; q), lambda)`` of a surface motion."""
    alg = motion.split.algebra
    D = motion.split.D
    ix = alg.grade_indices(D)
    flat_q = motion.points.reshape(-1, alg.n)
    flat_P = motion.momentum.coeffs.reshape(-1, alg.dim)
    new_q = np.empty_like(flat_q)
    new_P = np.full_like(flat_P, np.nan)
    for i, (q, P) in enumerate(zip(flat_q, flat_P)):
        new_q[i] = f(q)
        if np.all(np.isfinite(P)):
            J = f.jacobian(q, cfg)
            if abs(np.linalg.det(J)) <= 1e-10:
                raise SingularMapError(f"singular Jacobian at node {i}")
            new_P[i] = 0.0
            new_P[i, ix] = outermorphism_block(np.linalg.inv(J).T, D) @ P[ix]
    mom = FieldMomentum(new_P.reshape(motion.momentum.coeffs.shape), motion.momentum.lam, alg)
    return SurfaceMotion(motion.split, motion.grid, new_q.reshape(motion.points.shape), mom)


# -- Euler-Lagrange relaxation -------------------------------------------------------------------


@dataclass
class SolveInfo:
    sweeps: int
    residual: float
    history: list[float] = field(repr=False)


def el_residual(fld: LatticeField, potential) -> np.ndarray:
    """``Delta_h phi_a + dV/dphi_a`` on interior nodes, shape ``inner + (N,)``."""
    split = fld.split
    h = fld.grid.h
    v = fld.values
    inner = fld.grid.inner(1)
    lap = -2 * fld.D * v[inner]
    for k in range(fld.D):
        lo = list(inner)
        hi = list(inner)
        lo[k] = slice(0, -2)
        hi[k] = slice(2, None)
        lap = lap + v[tuple(lo)] + v[tuple(hi)]
    grad = potential.gradient(fld.points()[inner])[..., list(split.field_axes)]
    return lap / h**2 + grad


def solve_field_el(sys, grid: Grid, boundary, split: SpaceSplit | None = None, tol: float | None = None,
                   omega: float | None = None, max_sweeps: int = 50000, initial=None,
                   fd_step: float = 1e-6) -> tuple[LatticeField, SolveInfo]:
    """Relax ``Delta phi_a + dV/dphi_a = 0`` with Dirichlet boundary values.

    Red-black successive over-relaxation with a pointwise Newton step in each
    component.  ``boundary`` is a callable ``x -> (..., N)`` or a
    :class:`LatticeField` whose boundary ring is kept.  ``tol`` defaults to
    1e-10 for potentials with linear gradient and 1e-8 otherwise.
    """
    potential = getattr(sys, "potential", sys)
    split = split or getattr(sys, "split", None)
    if isinstance(boundary, LatticeField):
        start = np.array(boundary.values)
        split = split or boundary.split
    else:
        start = np.asarray(boundary(grid.coords()), dtype=float)
        if start.ndim == grid.D:
            start = start[..., None]
    if split is None:
        split = default_split(grid.D, start.shape[-1])
    if initial is not None:
        init = initial.values if isinstance(initial, LatticeField) else np.asarray(initial, dtype=float)
        start[grid.inner(1)] = init[grid.inner(1)]
    else:
        start[grid.inner(1)] = 0.0
    if tol is None:
        tol = 1e-10 if getattr(potential, "linear_gradient", False) else 1e-8
    if omega is None:
        omega = 2.0 / (1.0 + np.sin(np.pi / (max(grid.shape) - 1)))
    D, N, h = grid.D, start.shape[-1], grid.h
    fa = list(split.field_axes)
    inner = grid.inner(1)
    x = grid.coords()[inner]
    q = np.zeros(x.shape[:-1] + (split.algebra.n,))
    q[..., list(split.base_axes)] = x
    parity = (np.indices(grid.shape).sum(axis=0) % 2)[inner]
    v = start
    history: list[float] = []

    def residual_and_slope():
        vi = v[inner]
        lap = -2 * D * vi
        for k in range(D):
            lo = list(inner)
            hi = list(inner)
            lo[k] = slice(0, -2)
            hi[k] = slice(2, None)
            lap = lap + v[tuple(lo)] + v[tuple(hi)]
        q[..., fa] = vi
        g = potential.gradient(q)[..., fa]
        R = lap / h**2 + g
        return R, q

    for sweep in range(1, max_sweeps + 1):
        for color in (0, 1):
            R, qq = residual_and_slope()
            curv = np.empty_like(R)
            for a, ax in enumerate(fa):
                dq = np.zeros(split.algebra.n)
                dq[ax] = fd_step
                curv[..., a] = (potential.gradient(qq + dq)[..., ax] - potential.gradient(qq - dq)[..., ax]) / (2 * fd_step)
            slope = -2 * D / h**2 + curv
            step = np.where((parity == color)[..., None], omega * R / slope, 0.0)
            v[inner] = v[inner] - step
        R, _ = residual_and_slope()
        res = float(np.max(np.abs(R)))
        history.append(res)
        if res <= tol:
            return LatticeField(grid, v, split), SolveInfo(sweep, res, history)
        if not np.isfinite(res):
            break
    raise FieldSolveError(f"relaxation stalled at residual {history[-1]:.3e} after {len(history)} sweeps", history)


__all__ = [
    "FieldMomentum",
    "FieldSolveError",
    "Grid",
    "LatticeField",
    "LatticeFormatError",
    "SolveInfo",
    "SurfaceMotion",
    "build_field_momentum",
    "central_diff",
    "default_split",
    "el_residual",
    "graph_terms",
    "solve_field_el",
    "surface_residuals",
    "transform_motion",
]
