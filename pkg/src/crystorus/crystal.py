"""Lattices, point groups and crystallographic extensions in lattice coordinates.

All group-theoretic data is exact: point-group elements are integer matrices
acting on lattice coordinates, translation parts are rationals stored modulo
Z^d.  The only floating-point object is the Cartesian basis, used by
:func:`cartesian_representation` to hand linear parts to the phonon code.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import exactalg as ea
from .exactalg import IntMatrix, RatVector

DEFAULT_ORDER_CAP = 1024


class CrystalError(ValueError):
    """Base class for invalid crystallographic input."""


class NotFiniteError(CrystalError):
    """Generator closure exceeded the order cap."""


class InconsistentSpaceGroupError(CrystalError):
    """Translation parts do not define an extension of the point group by the lattice."""


@dataclass(frozen=True)
class Lattice:
    """Full-rank lattice with exact Gram matrix and floating Cartesian basis.

    ``basis`` holds the generators as *columns*.  Exact checks only ever use
    ``gram``.
    """

    basis: np.ndarray
    gram: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        basis = np.array(self.basis, dtype=float)
        gram = tuple(tuple(Fraction(x) for x in row) for row in self.gram)
        d = len(gram)
        if basis.shape != (d, d) or any(len(r) != d for r in gram):
            raise CrystalError("basis and gram must both be d x d")
        if any(gram[i][j] != gram[j][i] for i in range(d) for j in range(d)):
            raise CrystalError("gram matrix is not symmetric")
        for k in range(1, d + 1):
            if ea.det([row[:k] for row in gram[:k]]) <= 0:
                raise CrystalError("gram matrix is not positive definite")
        if np.linalg.matrix_rank(basis) < d:
            raise CrystalError("basis columns are linearly dependent")
        approx = np.array(gram, dtype=float)
        if not np.allclose(basis.T @ basis, approx, rtol=1e-9, atol=1e-9):
            raise CrystalError("gram matrix does not match basis^T basis")
        basis.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "gram", gram)

    @property
    def dim(self) -> int:
        return len(self.gram)

    @classmethod
    def cubic(cls, d: int = 3, a: int = 1) -> "Lattice":
        return cls(a * np.eye(d), [[Fraction(a * a) * (i == j) for j in range(d)] for i in range(d)])

    @classmethod
    def hexagonal_2d(cls) -> "Lattice":
        basis = np.array([[1.0, -0.5], [0.0, np.sqrt(3) / 2]])
        gram = [[Fraction(1), Fraction(-1, 2)], [Fraction(-1, 2), Fraction(1)]]
        return cls(basis, gram)

    def __eq__(self, other):
        if not isinstance(other, Lattice):
            return NotImplemented
        return self.gram == other.gram and np.array_equal(self.basis, other.basis)

    def __hash__(self):
        return hash(self.gram)


def preserves_gram(A: IntMatrix, gram) -> bool:
    """Exact test of ``A^T G A == G``."""
    lhs = ea.matmul(ea.transpose(A), ea.matmul(gram, A))
    return all(Fraction(x) == Fraction(y) for ra, rb in zip(lhs, gram) for x, y in zip(ra, rb))


@dataclass(frozen=True)
class PointGroup:
    """Finite matrix group with its Cayley table.

    ``elements[0]`` is always the identity.
    """

    elements: tuple[IntMatrix, ...]
    mult_table: tuple[tuple[int, ...], ...]
    inverse_table: tuple[int, ...]
    identity_index: int = 0

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def dim(self) -> int:
        return len(self.elements[0])

    def index(self, A: Sequence[Sequence[int]]) -> int:
        return self.elements.index(ea.as_int_matrix(A))

    def mul(self, p: int, q: int) -> int:
        return self.mult_table[p][q]

    def inv(self, p: int) -> int:
        return self.inverse_table[p]


def build_point_group(generators, gram, cap: int = DEFAULT_ORDER_CAP) -> PointGroup:
    """Close a set of integer matrices under multiplication.

    Elements are numbered in breadth-first order from the identity, applying
    generators in the order given, so indices are reproducible.

    Raises
    ------
    CrystalError
        A generator does not preserve the Gram form.
    NotFiniteError
        The closure has more than ``cap`` elements.
    """
    gens = [ea.as_int_matrix(g) for g in generators]
    d = len(gram)
    if not gens:
        gens = [ea.identity(d)]
    for g in gens:
        if ea.shape(g) != (d, d):
            raise CrystalError(f"generator of shape {ea.shape(g)} in dimension {d}")
        if not preserves_gram(g, gram):
            raise CrystalError(f"generator {g} does not preserve the lattice metric")

    ident = ea.identity(d)
    elements = [ident]
    index = {ident: 0}
    queue = deque([ident])
    while queue:
        x = queue.popleft()
        for g in gens:
            y = ea.matmul(x, g)
            if y not in index:
                if len(elements) >= cap:
                    raise NotFiniteError(f"closure not finite within cap {cap}")
                index[y] = len(elements)
                elements.append(y)
                queue.append(y)

    n = len(elements)
    table = tuple(
        tuple(index[ea.matmul(elements[i], elements[j])] for j in range(n)) for i in range(n)
    )
    inverse = tuple(row.index(0) for row in table)
    return PointGroup(tuple(elements), table, inverse)


@dataclass(frozen=True)
class SpaceGroup:
    """Point group plus translation parts ``a_p`` stored in [0, 1)^d.

    Construction verifies that every cocycle value is an integer vector;
    otherwise the data does not describe an extension of the point group by
    the lattice.
    """

    point_group: PointGroup
    translations: tuple[RatVector, ...]
    lattice: Lattice

    def __post_init__(self):
        pg = self.point_group
        if len(self.translations) != pg.order:
            raise CrystalError("need one translation per point-group element")
        if pg.dim != self.lattice.dim:
            raise CrystalError("point group and lattice dimensions differ")
        trans = tuple(ea.reduce_mod1(ea.as_rat_vector(t)) for t in self.translations)
        object.__setattr__(self, "translations", trans)
        if any(trans[pg.identity_index]):
            raise InconsistentSpaceGroupError("identity must carry an integer translation")
        for p in range(pg.order):
            for q in range(pg.order):
                if not ea.is_integral(_raw_cocycle(self, p, q)):
                    raise InconsistentSpaceGroupError(
                        f"not a crystallographic extension: c({p},{q}) is not integral"
                    )

    @property
    def dim(self) -> int:
        return self.lattice.dim

    @property
    def order(self) -> int:
        return self.point_group.order

    def linear(self, p: int) -> IntMatrix:
        return self.point_group.elements[p]

    def translation(self, p: int) -> RatVector:
        return self.translations[p]


def _raw_cocycle(sg: SpaceGroup, p: int, q: int) -> RatVector:
    pq = sg.point_group.mul(p, q)
    Aa = ea.matvec(sg.point_group.elements[p], sg.translations[q])
    return tuple(x + y - z for x, y, z in zip(sg.translations[p], Aa, sg.translations[pq]))


def build_space_group(
    lattice: Lattice,
    generators: Sequence[tuple[Sequence[Sequence[int]], Sequence]],
    cap: int = DEFAULT_ORDER_CAP,
) -> SpaceGroup:
    """Space group generated by affine operations ``(A, a)`` modulo the lattice.

    Translation parts of non-generators follow from ``a_{pq} = a_p + A_p a_q``
    mod Z^d.  If two products share a linear part but differ in translation
    mod Z^d, the generators produce translations outside the lattice and the
    input is rejected.
    """
    lin = [ea.as_int_matrix(A) for A, _ in generators]
    pg = build_point_group(lin, lattice.gram, cap=cap)
    d = lattice.dim
    trans: list[RatVector | None] = [None] * pg.order
    trans[0] = (Fraction(0),) * d
    gen_idx = [pg.index(A) for A in lin]
    gen_trans = [ea.reduce_mod1(ea.as_rat_vector(a)) for _, a in generators]
    queue = deque([0])
    while queue:
        x = queue.popleft()
        for g, a in zip(gen_idx, gen_trans):
            y = pg.mul(x, g)
            ty = ea.reduce_mod1(
                [u + v for u, v in zip(trans[x], ea.matvec(pg.elements[x], a))]
            )
            if trans[y] is None:
                trans[y] = ty
                queue.append(y)
            elif trans[y] != ty:
                raise InconsistentSpaceGroupError(
                    "not a crystallographic extension: generators produce a "
                    f"non-lattice translation {tuple(str(u - v) for u, v in zip(ty, trans[y]))}"
                )
    return SpaceGroup(pg, tuple(trans), lattice)


def cocycle(sg: SpaceGroup, p: int, q: int) -> tuple[int, ...]:
    """Extension cocycle ``c(p, q) = a_p + A_p a_q - a_{pq}`` as a lattice vector."""
    c = _raw_cocycle(sg, p, q)
    if not ea.is_integral(c):
        raise InconsistentSpaceGroupError("inconsistent space group data")
    return tuple(int(x) for x in c)


def cocycle_table(sg: SpaceGroup) -> dict[tuple[int, int], tuple[int, ...]]:
    n = sg.order
    return {(p, q): cocycle(sg, p, q) for p in range(n) for q in range(n)}


@dataclass(frozen=True)
class CocycleReport:
    triples_checked: int
    violations: tuple[tuple[int, int, int], ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_cocycle_identity(sg: SpaceGroup) -> CocycleReport:
    """Check ``A_p c(q,r) - c(pq,r) + c(p,qr) - c(p,q) = 0`` for every triple."""
    n = sg.order
    mul = sg.point_group.mul
    c = cocycle_table(sg)
    bad = []
    for p in range(n):
        Ap = sg.linear(p)
        for q in range(n):
            pq = mul(p, q)
            for r in range(n):
                lhs = ea.matvec(Ap, c[q, r])
                total = [w - x + y - z for w, x, y, z in zip(lhs, c[pq, r], c[p, mul(q, r)], c[p, q])]
                if any(total):
                    bad.append((p, q, r))
    return CocycleReport(n**3, tuple(bad))


def _symmorphic_system(sg: SpaceGroup):
    d = sg.dim
    ident = ea.identity(d)
    rows, rhs = [], []
    for p in range(sg.order):
        if p == sg.point_group.identity_index:
            continue
        rows.extend(ea.mat_sub(ident, sg.linear(p)))
        rhs.extend(sg.translation(p))
    return rows, rhs


@dataclass(frozen=True)
class SymmorphicVerdict:
    symmorphic: bool
    origin_shift: RatVector | None = None


def is_symmorphic(sg: SpaceGroup) -> SymmorphicVerdict:
    """Decide whether the extension splits.

    Looks for ``t`` with ``a_p = (I - A_p) t`` mod Z^d for every ``p`` at once.
    """
    rows, rhs = _symmorphic_system(sg)
    if not rows:
        return SymmorphicVerdict(True, (Fraction(0),) * sg.dim)
    sol = ea.solve_mod_lattice(rows, rhs)
    if not sol.solvable:
        return SymmorphicVerdict(False)
    return SymmorphicVerdict(True, ea.reduce_mod1(sol.particular))


def shift_representatives(
    sg: SpaceGroup,
    b: Mapping[int, Sequence[int]] | None = None,
    origin: Sequence | None = None,
) -> SpaceGroup:
    """Change representatives by lattice vectors ``b_p`` and/or move the origin.

    ``a'_p = a_p + b_p + (A_p - I) x0``.  Lattice shifts are invisible in the
    stored mod-Z^d data but are accepted so that coboundary changes can be
    expressed directly.
    """
    d = sg.dim
    b = dict(b or {})
    if any(b.get(sg.point_group.identity_index, (0,) * d)):
        raise CrystalError("b at the identity must vanish")
    for v in b.values():
        if not ea.is_integral(v):
            raise CrystalError("representative shifts must be lattice vectors")
    x0 = ea.as_rat_vector(origin) if origin is not None else (Fraction(0),) * d
    new = []
    for p in range(sg.order):
        Ax = ea.matvec(sg.linear(p), x0)
        bp = b.get(p, (0,) * d)
        new.append(tuple(a + bb + ax - x for a, bb, ax, x in zip(sg.translation(p), bp, Ax, x0)))
    return SpaceGroup(sg.point_group, tuple(new), sg.lattice)


@dataclass(frozen=True)
class TorusPoint:
    """Point of R^d / Z^d in lattice coordinates, each entry in [0, 1)."""

    coords: RatVector

    def __post_init__(self):
        object.__setattr__(self, "coords", ea.reduce_mod1(ea.as_rat_vector(self.coords)))

    def __iter__(self):
        return iter(self.coords)

    def __str__(self):
        return "[" + ", ".join(str(c) for c in self.coords) + "]"


def torus_act(sg: SpaceGroup, p: int, v) -> TorusPoint:
    """Affine action ``[v] -> [A_p v + a_p]``."""
    coords = v.coords if isinstance(v, TorusPoint) else ea.as_rat_vector(v)
    Av = ea.matvec(sg.linear(p), coords)
    return TorusPoint(tuple(x + a for x, a in zip(Av, sg.translation(p))))


def cartesian_representation(sg: SpaceGroup, max_condition: float = 1e8) -> list[np.ndarray]:
    """Cartesian orthogonal matrices ``R = B A B^-1`` for every element."""
    B = sg.lattice.basis
    cond = np.linalg.cond(B)
    if not np.isfinite(cond) or cond > max_condition:
        raise CrystalError(f"lattice basis is ill-conditioned (condition number {cond:.3g})")
    Binv = np.linalg.inv(B)
    out = []
    for A in sg.point_group.elements:
        R = B @ np.array(A, dtype=float) @ Binv
        out.append(R)
    return out


def symmorphic_space_group(lattice: Lattice, generators, cap: int = DEFAULT_ORDER_CAP) -> SpaceGroup:
    """Space group with every translation part zero."""
    d = lattice.dim
    return build_space_group(lattice, [(g, (0,) * d) for g in generators], cap=cap)


def signed_permutation_matrices(d: int) -> list[IntMatrix]:
    """All d x d signed permutation matrices (the hyperoctahedral group)."""
    from itertools import permutations, product

    out = []
    for perm in permutations(range(d)):
        for signs in product((1, -1), repeat=d):
            out.append(tuple(tuple(signs[i] if perm[i] == j else 0 for j in range(d)) for i in range(d)))
    return out


OH_GENERATORS = (
    ((0, -1, 0), (1, 0, 0), (0, 0, 1)),
    ((-1, 0, 0), (0, -1, 0), (0, 0, -1)),
    ((0, 0, 1), (1, 0, 0), (0, 1, 0)),
)
