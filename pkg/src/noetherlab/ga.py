"""Dense geometric algebra over Euclidean R^n.

A multivector of ``G(n)`` is stored as ``2**n`` real coefficients indexed by
basis-blade bitmask: bit ``i`` set means ``e_{i+1}`` is a factor, and the
factors inside a blade are kept in ascending index order.  ``e1 -> 0b1``,
``e2 -> 0b10``, ``e12 -> 0b11``.

Products follow the convention used throughout the package: the inner product
of an ``r``-vector and an ``s``-vector is the grade ``|r - s|`` part of their
geometric product, except that any inner product with a scalar vanishes.  The
outer product is the grade ``r + s`` part.

Every kernel on :class:`Algebra` (``gp``, ``inner``, ``outer``, ...) accepts raw
coefficient arrays with arbitrary leading batch dimensions, which is what the
lattice code uses.  :class:`Multivector` wraps a single element and supplies
operator overloading::

    >>> alg = Algebra(3)
    >>> e1, e2 = alg.basis("e1"), alg.basis("e2")
    >>> e1 * e2
    Multivector(1*e12)
    >>> (e1 ^ e2) | e1
    Multivector(-1*e2)
"""

from __future__ import annotations

import math
import re
from typing import Iterable, Sequence

import numpy as np

MAX_DIM = 12
BLADE_EPS = 1e-30
SERIAL_EPS = 1e-30
_EINSUM_MAX_N = 8


class AlgebraError(ValueError):
    """Base class for algebra errors."""


class ShapeError(AlgebraError):
    """Operands live in different algebras or have the wrong shape."""


class GradeError(AlgebraError):
    """A grade requirement was not met."""


class SingularBladeError(AlgebraError, ZeroDivisionError):
    """Attempt to invert a blade of (numerically) zero magnitude."""


def _popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    count = np.zeros_like(x)
    while np.any(x):
        count += x & 1
        x = x >> 1
    return count


class Algebra:
    """Euclidean geometric algebra ``G(n)`` with ``e_i . e_j = delta_ij``.

    Instances are cached per dimension, so ``Algebra(3) is Algebra(3)``.
    """

    _instances: dict[int, "Algebra"] = {}

    def __new__(cls, n: int) -> "Algebra":
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise AlgebraError(f"dimension must be a positive integer, got {n!r}")
        if n > MAX_DIM:
            raise AlgebraError(f"dense representation limited to n <= {MAX_DIM}, got {n}")
        n = int(n)
        inst = cls._instances.get(n)
        if inst is None:
            inst = super().__new__(cls)
            inst._setup(n)
            cls._instances[n] = inst
        return inst

    def _setup(self, n: int) -> None:
        self.n = n
        self.dim = 1 << n
        idx = np.arange(self.dim)
        self.grades = _popcount(idx)
        self._reverse_signs = np.where((self.grades * (self.grades - 1) // 2) % 2, -1.0, 1.0)
        self._tables: dict[str, np.ndarray] | None = None

    def __repr__(self) -> str:
        return f"Algebra({self.n})"

    def __reduce__(self):
        return (Algebra, (self.n,))

    # -- product tables ----------------------------------------------------

    def _sign_table(self) -> np.ndarray:
        # parity of the number of transpositions needed to sort e_I e_J
        idx = np.arange(self.dim)
        left = idx[:, None]
        parity = np.zeros((self.dim, self.dim), dtype=np.uint8)
        for q in range(self.n):
            has_q = ((idx >> q) & 1).astype(np.uint8)[None, :]
            above = (_popcount(left >> (q + 1)) & 1).astype(np.uint8)
            parity ^= has_q & above
        return np.where(parity, -1, 1).astype(np.int8)

    @property
    def tables(self) -> dict[str, np.ndarray]:
        if self._tables is None:
            idx = np.arange(self.dim)
            sign = self._sign_table()
            tables = {"sign": sign}
            if self.n <= _EINSUM_MAX_N:
                # row i, column k: contribution of a_i * b_{i^k} to out_k
                perm = idx[:, None] ^ idx[None, :]
                s = sign[idx[:, None], perm].astype(float)
                gi = self.grades[:, None]
                gj = self.grades[perm]
                gk = self.grades[None, :]
                inner_mask = (gi > 0) & (gj > 0) & (gk == np.abs(gi - gj))
                outer_mask = gk == gi + gj
                tables.update(perm=perm, gp=s, inner=s * inner_mask, outer=s * outer_mask)
            self._tables = tables
        return self._tables

    def _row(self, kind: str, i: int) -> tuple[np.ndarray, np.ndarray]:
        idx = np.arange(self.dim)
        perm = idx ^ i
        s = self.tables["sign"][i, perm].astype(float)
        if kind == "gp":
            return perm, s
        gi = self.grades[i]
        gj = self.grades[perm]
        gk = self.grades
        if kind == "inner":
            mask = (gi > 0) & (gj > 0) & (gk == np.abs(gi - gj))
        else:
            mask = gk == gi + gj
        return perm, s * mask

    def _product(self, a: np.ndarray, b: np.ndarray, kind: str) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.shape[-1] != self.dim or b.shape[-1] != self.dim:
            raise ShapeError(f"expected trailing dimension {self.dim}, got {a.shape} and {b.shape}")
        if self.n <= _EINSUM_MAX_N:
            t = self.tables
            return np.einsum("...i,...ik->...k", a, b[..., t["perm"]] * t[kind])
        shape = np.broadcast_shapes(a.shape, b.shape)
        out = np.zeros(shape)
        active = np.flatnonzero(np.any(a.reshape(-1, self.dim) != 0, axis=0))
        for i in active:
            perm, s = self._row(kind, int(i))
            out += a[..., i : i + 1] * b[..., perm] * s
        return out

    # -- array kernels -------------------------------------------------------

    def gp(self, a, b) -> np.ndarray:
        """Geometric product of coefficient arrays (batched)."""
        return self._product(a, b, "gp")

    def inner(self, a, b) -> np.ndarray:
        """Inner product of coefficient arrays (batched)."""
        return self._product(a, b, "inner")

    def outer(self, a, b) -> np.ndarray:
        """Outer product of coefficient arrays (batched)."""
        return self._product(a, b, "outer")

    def rev(self, a) -> np.ndarray:
        return np.asarray(a, dtype=float) * self._reverse_signs

    def grade_part(self, a, r: int) -> np.ndarray:
        self._check_grade(r)
        return np.where(self.grades == r, np.asarray(a, dtype=float), 0.0)

    def grade_indices(self, r: int) -> np.ndarray:
        """Bitmasks of the grade-``r`` basis blades in ascending order."""
        self._check_grade(r)
        return np.flatnonzero(self.grades == r)

    def vectors_to_coeffs(self, v) -> np.ndarray:
        """Embed arrays of vector components ``(..., n)`` as ``(..., 2**n)``."""
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.n:
            raise ShapeError(f"expected {self.n} vector components, got shape {v.shape}")
        out = np.zeros(v.shape[:-1] + (self.dim,))
        out[..., 1 << np.arange(self.n)] = v
        return out

    def coeffs_to_vectors(self, a) -> np.ndarray:
        return np.asarray(a, dtype=float)[..., 1 << np.arange(self.n)]

    def _check_grade(self, r: int) -> None:
        if not 0 <= r <= self.n:
            raise GradeError(f"grade {r} out of range 0..{self.n}")

    # -- constructors --------------------------------------------------------

    def mv(self, coeffs) -> "Multivector":
        return Multivector(self, coeffs)

    def zero(self) -> "Multivector":
        return Multivector(self, np.zeros(self.dim))

    def scalar(self, value: float) -> "Multivector":
        c = np.zeros(self.dim)
        c[0] = value
        return Multivector(self, c)

    def vector(self, components: Sequence[float]) -> "Multivector":
        return Multivector(self, self.vectors_to_coeffs(components))

    def basis(self, name: str | int) -> "Multivector":
        """Basis blade by name (``"e12"``) or by 1-based vector index / bitmask string."""
        if isinstance(name, (int, np.integer)):
            if not 1 <= name <= self.n:
                raise AlgebraError(f"basis vector index {name} out of range 1..{self.n}")
            c = np.zeros(self.dim)
            c[1 << (int(name) - 1)] = 1.0
            return Multivector(self, c)
        return self.parse(name)

    def blade(self, mask: int) -> "Multivector":
        """Unit basis blade with the given bitmask (bit ``i`` is ``e_{i+1}``)."""
        if not 0 <= int(mask) < self.dim:
            raise AlgebraError(f"blade mask {mask} out of range for n = {self.n}")
        c = np.zeros(self.dim)
        c[int(mask)] = 1.0
        return Multivector(self, c)

    def blade_mask(self, indices: Iterable[int]) -> int:
        """Bitmask of the blade ``e_{i1} e_{i2} ...`` (1-based, distinct indices)."""
        mask = 0
        for i in indices:
            if not 1 <= i <= self.n:
                raise AlgebraError(f"basis vector index {i} out of range 1..{self.n}")
            bit = 1 << (i - 1)
            if mask & bit:
                raise AlgebraError(f"repeated index {i} in blade")
            mask |= bit
        return mask

    def blade_name(self, mask: int) -> str:
        if mask == 0:
            return "1"
        idx = [i + 1 for i in range(self.n) if mask >> i & 1]
        if self.n <= 9:
            return "e" + "".join(str(i) for i in idx)
        return "e" + "_".join(str(i) for i in idx)

    def pseudoscalar(self) -> "Multivector":
        c = np.zeros(self.dim)
        c[-1] = 1.0
        return Multivector(self, c)

    def parse(self, text: str) -> "Multivector":
        """Parse a multivector literal such as ``"1.0*e1 + 0.5*e12 - 2"``.

        Blade names are ``e`` followed by 1-based indices: one digit per index
        (``e12``), or underscore separated for multi-digit indices
        (``e1_10``).  Indices are multiplied in the order written, so
        ``e21`` parses to ``-e12``.
        """
        s = text.replace(" ", "").replace("\t", "")
        if not s:
            raise AlgebraError("empty multivector literal")
        number = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
        term_re = re.compile(
            rf"([+-]?)(?:({number})(\*)?)?(e\d+(?:_\d+)*)?"
        )
        out = np.zeros(self.dim)
        pos = 0
        while pos < len(s):
            m = term_re.match(s, pos)
            if (
                m is None
                or m.end() == pos
                or (m.group(2) is None and m.group(4) is None)
                or (m.group(3) is not None) != (m.group(2) is not None and m.group(4) is not None)
            ):
                raise AlgebraError(f"cannot parse multivector literal {text!r} at position {pos}")
            sign = -1.0 if m.group(1) == "-" else 1.0
            coef = float(m.group(2)) if m.group(2) is not None else 1.0
            if m.group(4) is None:
                out[0] += sign * coef
            else:
                digits = m.group(4)[1:]
                parts = digits.split("_") if "_" in digits else list(digits)
                blade = np.zeros(self.dim)
                blade[0] = 1.0
                for p in parts:
                    k = int(p)
                    if not 1 <= k <= self.n:
                        raise AlgebraError(f"basis index {k} out of range in {text!r}")
                    ek = np.zeros(self.dim)
                    ek[1 << (k - 1)] = 1.0
                    blade = self.gp(blade, ek)
                out += sign * coef * blade
            pos = m.end()
            if pos < len(s) and s[pos] not in "+-":
                raise AlgebraError(f"unexpected character {s[pos]!r} in {text!r}")
        return Multivector(self, out)


class Multivector:
    """Immutable element of a Euclidean geometric algebra.

    Operators: ``*`` geometric product, ``|`` inner product, ``^`` outer
    product, ``~`` reverse.  Real numbers combine with ``+``/``-`` as scalar
    parts and with ``*``/``/`` as scaling.
    """

    __slots__ = ("algebra", "coeffs")
    __array_priority__ = 1000

    def __init__(self, algebra: Algebra, coeffs) -> None:
        c = np.array(coeffs, dtype=float)
        if c.shape != (algebra.dim,):
            raise ShapeError(f"G({algebra.n}) needs {algebra.dim} coefficients, got shape {c.shape}")
        c.flags.writeable = False
        object.__setattr__(self, "algebra", algebra)
        object.__setattr__(self, "coeffs", c)

    def __setattr__(self, name, value):
        raise AttributeError("Multivector is immutable")

    def __reduce__(self):
        return (Multivector, (self.algebra, np.array(self.coeffs)))

    # -- helpers -------------------------------------------------------------

    def _other(self, other) -> np.ndarray | None:
        if isinstance(other, Multivector):
            if other.algebra is not self.algebra:
                raise ShapeError(f"operands from {self.algebra} and {other.algebra}")
            return other.coeffs
        if isinstance(other, (int, float, np.integer, np.floating)):
            c = np.zeros(self.algebra.dim)
            c[0] = float(other)
            return c
        return None

    def _new(self, coeffs) -> "Multivector":
        return Multivector(self.algebra, coeffs)

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        o = self._other(other)
        return NotImplemented if o is None else self._new(self.coeffs + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._other(other)
        return NotImplemented if o is None else self._new(self.coeffs - o)

    def __rsub__(self, other):
        o = self._other(other)
        return NotImplemented if o is None else self._new(o - self.coeffs)

    def __neg__(self):
        return self._new(-self.coeffs)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, (int, float, np.integer, np.floating)):
            return self._new(self.coeffs * float(other))
        o = self._other(other)
        return NotImplemented if o is None else self._new(self.algebra.gp(self.coeffs, o))

    def __rmul__(self, other):
        if isinstance(other, (int, float, np.integer, np.floating)):
            return self._new(self.coeffs * float(other))
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.integer, np.floating)):
            return self._new(self.coeffs / float(other))
        return NotImplemented

    def __or__(self, other):
        o = self._other(other)
        return NotImplemented if o is None else self._new(self.algebra.inner(self.coeffs, o))

    def __ror__(self, other):
        o = self._other(other)
        return NotImplemented if o is None else self._new(self.algebra.inner(o, self.coeffs))

    def __xor__(self, other):
        o = self._other(other)
        return NotImplemented if o is None else self._new(self.algebra.outer(self.coeffs, o))

    def __rxor__(self, other):
        o = self._other(other)
        return NotImplemented if o is None else self._new(self.algebra.outer(o, self.coeffs))

    def __invert__(self):
        return self._new(self.algebra.rev(self.coeffs))

    # -- inspection ----------------------------------------------------------

    def grade(self, r: int) -> "Multivector":
        return self._new(self.algebra.grade_part(self.coeffs, r))

    def grades(self, tol: float = 0.0) -> tuple[int, ...]:
        present = np.abs(self.coeffs) > tol
        return tuple(sorted(set(int(g) for g in self.algebra.grades[present])))

    def is_grade(self, r: int, tol: float = 0.0) -> bool:
        return all(g == r for g in self.grades(tol))

    @property
    def scalar(self) -> float:
        return float(self.coeffs[0])

    def vector_part(self) -> np.ndarray:
        """Components of the grade-1 part as an ``(n,)`` array."""
        return self.algebra.coeffs_to_vectors(self.coeffs)

    def norm(self) -> float:
        return magnitude(self)

    def allclose(self, other, atol: float = 1e-12) -> bool:
        o = self._other(other)
        return bool(np.allclose(self.coeffs, o, rtol=0.0, atol=atol))

    def to_pairs(self, eps: float = SERIAL_EPS) -> list[tuple[int, float]]:
        """Serialize as ascending ``(bitmask, coefficient)`` pairs, tiny terms omitted."""
        return [(int(i), float(c)) for i, c in enumerate(self.coeffs) if abs(c) >= eps]

    @classmethod
    def from_pairs(cls, algebra: Algebra, pairs: Iterable[Sequence]) -> "Multivector":
        c = np.zeros(algebra.dim)
        for mask, value in pairs:
            mask = int(mask)
            if not 0 <= mask < algebra.dim:
                raise ShapeError(f"bitmask {mask} out of range for {algebra}")
            c[mask] = float(value)
        return cls(algebra, c)

    def __repr__(self) -> str:
        return f"Multivector({self})"

    def __str__(self) -> str:
        terms = []
        for mask, c in self.to_pairs(eps=1e-15):
            coef = f"{c:.12g}"
            terms.append(coef if mask == 0 else f"{coef}*{self.algebra.blade_name(mask)}")
        return " + ".join(terms).replace("+ -", "- ") if terms else "0"

    def __float__(self) -> float:
        if np.any(self.coeffs[1:] != 0):
            raise GradeError("multivector is not a pure scalar")
        return float(self.coeffs[0])

    def __hash__(self):
        return hash((self.algebra.n, self.coeffs.tobytes()))

    def __eq__(self, other):
        if isinstance(other, Multivector):
            return other.algebra is self.algebra and bool(np.array_equal(self.coeffs, other.coeffs))
        if isinstance(other, (int, float)):
            return bool(np.array_equal(self.coeffs, self._other(other)))
        return NotImplemented


# -- free-function operations -------------------------------------------------


def _same(a: Multivector, b: Multivector) -> Algebra:
    if not isinstance(a, Multivector) or not isinstance(b, Multivector):
        raise ShapeError("both operands must be Multivectors")
    if a.algebra is not b.algebra:
        raise ShapeError(f"operands from {a.algebra} and {b.algebra}")
    return a.algebra


def geometric_product(a: Multivector, b: Multivector) -> Multivector:
    alg = _same(a, b)
    return Multivector(alg, alg.gp(a.coeffs, b.coeffs))


def inner_product(a: Multivector, b: Multivector) -> Multivector:
    alg = _same(a, b)
    return Multivector(alg, alg.inner(a.coeffs, b.coeffs))


def outer_product(a: Multivector, b: Multivector) -> Multivector:
    alg = _same(a, b)
    return Multivector(alg, alg.outer(a.coeffs, b.coeffs))


def grade_project(A: Multivector, r: int) -> Multivector:
    return A.grade(r)


def reverse(A: Multivector) -> Multivector:
    return ~A


def magnitude(A: Multivector) -> float:
    """``sqrt(~A . A)``; mixed-grade input uses the gradewise sum of squares.

    For a single-grade element of grade >= 1 this equals ``sqrt(~A . A)``.
    Scalars and mixed-grade inputs get ``sqrt(sum_r |<A>_r|^2)``, which in the
    Euclidean metric is the plain coefficient norm.
    """
    return float(np.sqrt(np.sum(A.coeffs**2)))


class Blade:
    """A single-grade multivector known (or assumed) to factor into vectors.

    Build with :meth:`from_vectors` for a guaranteed blade.  :meth:`assume`
    accepts any single-grade element without testing factorability and marks
    the result ``verified=False``.
    """

    __slots__ = ("mv", "grade", "verified")

    def __init__(self, mv: Multivector, grade: int, verified: bool) -> None:
        object.__setattr__(self, "mv", mv)
        object.__setattr__(self, "grade", grade)
        object.__setattr__(self, "verified", verified)

    def __setattr__(self, name, value):
        raise AttributeError("Blade is immutable")

    @classmethod
    def from_vectors(cls, *vectors: Multivector) -> "Blade":
        if not vectors:
            raise GradeError("need at least one vector factor")
        alg = vectors[0].algebra
        out = alg.scalar(1.0)
        for v in vectors:
            if v.algebra is not alg:
                raise ShapeError("vector factors from different algebras")
            if not v.is_grade(1):
                raise GradeError("blade factors must be vectors")
            out = out ^ v
        return cls(out, len(vectors), True)

    @classmethod
    def assume(cls, mv: Multivector) -> "Blade":
        grades = mv.grades()
        if len(grades) > 1:
            raise GradeError(f"blade must be single-grade, got grades {grades}")
        return cls(mv, grades[0] if grades else 0, False)

    @property
    def algebra(self) -> Algebra:
        return self.mv.algebra

    def __repr__(self) -> str:
        flag = "" if self.verified else ", assumed"
        return f"Blade({self.mv}, grade={self.grade}{flag})"


def _as_blade(A) -> Blade:
    return A if isinstance(A, Blade) else Blade.assume(A)


def blade_inverse(A: Blade | Multivector) -> Multivector:
    """``A^{-1} = ~A / |A|^2``."""
    A = _as_blade(A)
    m2 = float(np.sum(A.mv.coeffs**2))
    if math.sqrt(m2) <= BLADE_EPS:
        raise SingularBladeError("cannot invert a zero blade")
    return ~A.mv / m2


def project(B: Multivector, A: Blade | Multivector) -> Multivector:
    """Orthogonal projection of ``B`` onto the subspace of blade ``A``.

    Applied gradewise as ``(B_r . A) . A^{-1}``.  When ``r`` equals the blade
    grade the inner product ``B_r . A`` is a scalar, and the scalar multiplies
    ``A^{-1}`` instead (the inner product with a scalar would vanish).  Scalars
    pass through unchanged and grades above the blade grade project to zero.
    """
    A = _as_blade(A)
    alg = _same(B, A.mv)
    inv = blade_inverse(A)
    out = np.zeros(alg.dim)
    out += alg.grade_part(B.coeffs, 0)
    for r in range(1, min(A.grade, alg.n) + 1):
        Br = alg.grade_part(B.coeffs, r)
        if not np.any(Br):
            continue
        c = alg.inner(Br, A.mv.coeffs)
        if r == A.grade:
            out += alg.gp(c, inv.coeffs)
        else:
            out += alg.inner(c, inv.coeffs)
    return Multivector(alg, out)


def reject(v: Multivector, A: Blade | Multivector) -> Multivector:
    """Rejection ``v - project(v, A)``; for vectors this is ``(v ^ A) . A^{-1}``."""
    return v - project(v, A)


class Rotor:
    """Even multivector ``R`` with ``~R R = 1`` acting as ``A -> R A ~R``."""

    __slots__ = ("mv",)

    def __init__(self, mv: Multivector, tol: float = 1e-9) -> None:
        if any(g % 2 for g in mv.grades(tol=1e-14)):
            raise GradeError("rotor must be an even multivector")
        unit = ~mv * mv
        if not unit.allclose(1.0, atol=tol):
            raise AlgebraError(f"not a rotor: ~R R = {unit}")
        object.__setattr__(self, "mv", mv)

    def __setattr__(self, name, value):
        raise AttributeError("Rotor is immutable")

    @property
    def algebra(self) -> Algebra:
        return self.mv.algebra

    def apply(self, A: Multivector) -> Multivector:
        return rotor_apply(self, A)

    def inverse(self) -> "Rotor":
        return Rotor(~self.mv)

    def __mul__(self, other: "Rotor") -> "Rotor":
        return Rotor(self.mv * other.mv)

    def __repr__(self) -> str:
        return f"Rotor({self.mv})"


def rotor_exp(B: Multivector, tol: float = 1e-16) -> Rotor:
    """Rotor ``exp(-B/2)`` of a bivector by power series.

    For ``|B| > 1`` the bivector is halved ``k`` times until ``|B|/2^k <= 1``
    and the resulting rotor squared ``k`` times.
    """
    if not B.is_grade(2):
        raise GradeError(f"rotor_exp needs a bivector, got grades {B.grades()}")
    alg = B.algebra
    nb = magnitude(B)
    k = 0 if nb <= 1.0 else int(math.ceil(math.log2(nb)))
    X = -0.5 * B.coeffs / (1 << k)
    term = np.zeros(alg.dim)
    term[0] = 1.0
    total = term.copy()
    for m in range(1, 200):
        term = alg.gp(term, X) / m
        total += term
        if np.sqrt(np.sum(term**2)) < tol:
            break
    for _ in range(k):
        total = alg.gp(total, total)
    return Rotor(Multivector(alg, total))


def rotor_apply(R: Rotor | Multivector, A: Multivector) -> Multivector:
    """``R A ~R``; grade preserving."""
    mv = R.mv if isinstance(R, Rotor) else R
    alg = _same(mv, A)
    return Multivector(alg, alg.gp(alg.gp(mv.coeffs, A.coeffs), alg.rev(mv.coeffs)))


__all__ = [
    "Algebra",
    "AlgebraError",
    "Blade",
    "GradeError",
    "Multivector",
    "Rotor",
    "ShapeError",
    "SingularBladeError",
    "blade_inverse",
    "geometric_product",
    "grade_project",
    "inner_product",
    "magnitude",
    "outer_product",
    "project",
    "reject",
    "reverse",
    "rotor_apply",
    "rotor_exp",
]
