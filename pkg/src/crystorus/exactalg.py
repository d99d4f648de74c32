"""Exact integer and rational linear algebra.

Matrices are tuples of row tuples holding Python ints, so intermediate
values never overflow.  Rational vectors are tuples of ``Fraction``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

IntMatrix = tuple[tuple[int, ...], ...]
RatVector = tuple[Fraction, ...]


class DimensionError(ValueError):
    """Operand shapes do not fit together."""


def as_int_matrix(rows: Sequence[Sequence[int]]) -> IntMatrix:
    """Validate and freeze a nested sequence of integers."""
    out = []
    for row in rows:
        r = []
        for x in row:
            if isinstance(x, Fraction):
                if x.denominator != 1:
                    raise ValueError(f"non-integer entry {x}")
                x = x.numerator
            if isinstance(x, float):
                if not x.is_integer():
                    raise ValueError(f"non-integer entry {x}")
                x = int(x)
            r.append(int(x))
        out.append(tuple(r))
    if not out or not out[0]:
        raise DimensionError("matrix must be nonempty")
    ncols = len(out[0])
    if any(len(r) != ncols for r in out):
        raise DimensionError("ragged matrix")
    return tuple(out)


def as_rat_vector(values: Sequence) -> RatVector:
    return tuple(Fraction(v) for v in values)


def shape(m: IntMatrix) -> tuple[int, int]:
    return len(m), len(m[0])


def identity(n: int) -> IntMatrix:
    return tuple(tuple(int(i == j) for j in range(n)) for i in range(n))


def zeros(rows: int, cols: int) -> IntMatrix:
    return tuple((0,) * cols for _ in range(rows))


def transpose(m):
    return tuple(zip(*m))


def matmul(a, b):
    if len(a[0]) != len(b):
        raise DimensionError(f"cannot multiply {shape(a)} by {shape(b)}")
    bt = transpose(b)
    return tuple(tuple(sum(x * y for x, y in zip(row, col)) for col in bt) for row in a)


def matvec(a, v):
    if len(a[0]) != len(v):
        raise DimensionError(f"cannot apply {shape(a)} to vector of length {len(v)}")
    return tuple(sum(x * y for x, y in zip(row, v)) for row in a)


def mat_sub(a, b):
    return tuple(tuple(x - y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def det(m) -> Fraction:
    """Exact determinant by fraction-valued Gaussian elimination."""
    n = len(m)
    if any(len(r) != n for r in m):
        raise DimensionError("determinant of a non-square matrix")
    a = [[Fraction(x) for x in row] for row in m]
    result = Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if a[r][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            a[c], a[p] = a[p], a[c]
            result = -result
        result *= a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            if f:
                for k in range(c, n):
                    a[r][k] -= f * a[c][k]
    return result


def inverse(m) -> tuple[tuple[Fraction, ...], ...]:
    """Exact inverse over the rationals (Gauss-Jordan)."""
    n = len(m)
    a = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(m)]
    for c in range(n):
        p = next((r for r in range(c, n) if a[r][c] != 0), None)
        if p is None:
            raise ZeroDivisionError("singular matrix")
        a[c], a[p] = a[p], a[c]
        piv = a[c][c]
        a[c] = [x / piv for x in a[c]]
        for r in range(n):
            if r != c and a[r][c] != 0:
                f = a[r][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return tuple(tuple(row[n:]) for row in a)


def int_inverse(m: IntMatrix) -> IntMatrix:
    """Inverse of a unimodular integer matrix."""
    return as_int_matrix(inverse(m))


def frac_mod1(x: Fraction) -> Fraction:
    return x - math.floor(x)


def reduce_mod1(v: Sequence[Fraction]) -> RatVector:
    """Representative of ``v`` modulo Z^d with every entry in [0, 1)."""
    return tuple(frac_mod1(Fraction(x)) for x in v)


def is_integral(v: Sequence[Fraction]) -> bool:
    return all(Fraction(x).denominator == 1 for x in v)


def denominator_lcm(v: Sequence[Fraction]) -> int:
    out = 1
    for x in v:
        out = math.lcm(out, Fraction(x).denominator)
    return out


@dataclass(frozen=True)
class SnfDecomposition:
    """``U @ M @ V == S`` with U, V unimodular and S in Smith form."""

    U: IntMatrix
    S: IntMatrix
    V: IntMatrix

    @property
    def invariant_factors(self) -> tuple[int, ...]:
        """Nonzero diagonal entries of S, in order."""
        k = min(len(self.S), len(self.S[0]))
        return tuple(self.S[i][i] for i in range(k) if self.S[i][i] != 0)

    @property
    def rank(self) -> int:
        return len(self.invariant_factors)


def _pick_pivot(a, t):
    best = None
    for i in range(t, len(a)):
        for j in range(t, len(a[0])):
            x = abs(a[i][j])
            if x and (best is None or x < best[0]):
                best = (x, i, j)
    return best


def smith_normal_form(M: Sequence[Sequence[int]]) -> SnfDecomposition:
    """Smith normal form of an integer matrix.

    Pivots are chosen as the entry of smallest nonzero absolute value in the
    remaining block, ties broken by lowest (row, column).  The output is
    deterministic for a given input.

    Parameters
    ----------
    M : sequence of sequences of int
        An m x n integer matrix, m, n >= 1.

    Returns
    -------
    SnfDecomposition
        Unimodular ``U`` (m x m), ``V`` (n x n) and diagonal ``S`` with
        ``U M V = S``, nonnegative diagonal, ``s_i | s_{i+1}``.
    """
    M = as_int_matrix(M)
    m, n = shape(M)
    a = [list(r) for r in M]
    U = [list(r) for r in identity(m)]
    V = [list(r) for r in identity(n)]

    def swap_rows(i, j):
        a[i], a[j] = a[j], a[i]
        U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for row in a:
            row[i], row[j] = row[j], row[i]
        for row in V:
            row[i], row[j] = row[j], row[i]

    def add_row(dst, src, f):
        # row_dst += f * row_src
        a[dst] = [x + f * y for x, y in zip(a[dst], a[src])]
        U[dst] = [x + f * y for x, y in zip(U[dst], U[src])]

    def add_col(dst, src, f):
        for row in a:
            row[dst] += f * row[src]
        for row in V:
            row[dst] += f * row[src]

    for t in range(min(m, n)):
        while True:
            piv = _pick_pivot(a, t)
            if piv is None:
                break
            _, pi, pj = piv
            if pi != t:
                swap_rows(t, pi)
            if pj != t:
                swap_cols(t, pj)
            p = a[t][t]
            dirty = False
            for i in range(t + 1, m):
                if a[i][t]:
                    q = a[i][t] // p
                    add_row(i, t, -q)
                    dirty = dirty or a[i][t] != 0
            for j in range(t + 1, n):
                if a[t][j]:
                    q = a[t][j] // p
                    add_col(j, t, -q)
                    dirty = dirty or a[t][j] != 0
            if dirty:
                continue
            bad = next(
                (i for i in range(t + 1, m) for j in range(t + 1, n) if a[i][j] % p),
                None,
            )
            if bad is None:
                break
            add_row(t, bad, 1)
        if a[t][t] < 0:
            a[t] = [-x for x in a[t]]
            U[t] = [-x for x in U[t]]
        if _pick_pivot(a, t) is None:
            break

    return SnfDecomposition(
        U=as_int_matrix(U), S=as_int_matrix(a), V=as_int_matrix(V)
    )


@dataclass(frozen=True)
class ModLatticeSolution:
    """Solution set of ``M t = b (mod Z^m)`` for real ``t``.

    The set is ``particular + span(free_directions) + offset + Z^d`` for
    ``offset`` in ``discrete_offsets``.  Points are in the same coordinates
    as ``t``.
    """

    solvable: bool
    particular: RatVector | None = None
    free_directions: tuple[RatVector, ...] = ()
    discrete_offsets: tuple[RatVector, ...] = field(default=())

    @property
    def dimension(self) -> int:
        return len(self.free_directions) if self.solvable else -1

    def points(self) -> tuple[RatVector, ...]:
        """All solutions reduced to [0, 1)^d; only for zero-dimensional sets."""
        if not self.solvable:
            return ()
        if self.free_directions:
            raise ValueError("solution set is positive-dimensional")
        pts = {
            reduce_mod1([p + o for p, o in zip(self.particular, off)])
            for off in self.discrete_offsets
        }
        return tuple(sorted(pts))


def solve_mod_lattice(
    M: Sequence[Sequence[int]], b: Sequence, max_offsets: int = 100_000
) -> ModLatticeSolution:
    """Solve ``M t = b (mod Z^m)`` exactly.

    With ``U M V = S`` substitute ``t = V w``.  The system becomes
    ``s_i w_i = (U b)_i (mod 1)`` on the rank rows and ``(U b)_i in Z`` on
    the rest; the trailing ``w`` coordinates are free.
    """
    M = as_int_matrix(M)
    b = as_rat_vector(b)
    m, n = shape(M)
    if len(b) != m:
        raise DimensionError(f"right-hand side has length {len(b)}, expected {m}")
    snf = smith_normal_form(M)
    ub = matvec(snf.U, b)
    factors = snf.invariant_factors
    r = len(factors)
    if not is_integral(ub[r:]):
        return ModLatticeSolution(solvable=False)

    w = [ub[i] / factors[i] for i in range(r)] + [Fraction(0)] * (n - r)
    particular = matvec(snf.V, w)
    cols = transpose(snf.V)
    free = tuple(tuple(Fraction(x) for x in cols[j]) for j in range(r, n))

    count = math.prod(factors)
    if count > max_offsets:
        raise ValueError(f"{count} discrete components exceed max_offsets")
    offsets = [()]
    for s in factors:
        offsets = [o + (Fraction(k, s),) for o in offsets for k in range(s)]
    discrete = tuple(
        reduce_mod1(matvec(snf.V, list(o) + [Fraction(0)] * (n - r))) for o in offsets
    )
    return ModLatticeSolution(
        solvable=True,
        particular=particular,
        free_directions=free,
        discrete_offsets=discrete,
    )


def residual_is_integral(M, t, b) -> bool:
    """True when ``M t - b`` is an integer vector."""
    return is_integral([x - y for x, y in zip(matvec(M, t), b)])
