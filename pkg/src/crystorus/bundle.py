"""Flat torus bundles over a combinatorial cover.

The base is a cell complex of charts, oriented overlaps (edges) and
triangles.  Edge ``a -> b`` carries a point-group element ``g`` with
``z_b = z_a g``; fiber coordinates then change by ``tau_b = rho(g^-1) tau_a``
where ``rho`` is the affine action of the space group on the torus.
Holonomy around a loop composes these edge maps in traversal order.

Sections are sampled on 1-D parameter grids per chart, which is enough to
check the gluing of lifts and of their derivatives with finite differences.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from . import exactalg as ea
from .crystal import SpaceGroup, TorusPoint

Edge = tuple[int, int]


class BundleError(ValueError):
    pass


@dataclass(frozen=True)
class BaseComplex:
    """Charts ``0..n_charts-1`` with oriented overlaps and triangles."""

    n_charts: int
    edges: tuple[Edge, ...]
    triangles: tuple[tuple[int, int, int], ...] = ()

    def __post_init__(self):
        edges = tuple((int(a), int(b)) for a, b in self.edges)
        tris = tuple(tuple(int(x) for x in t) for t in self.triangles)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "triangles", tris)
        if self.n_charts < 1:
            raise BundleError("need at least one chart")
        if len(set(edges)) != len(edges):
            raise BundleError("at most one edge per ordered pair of charts")
        for a, b in edges:
            if not (0 <= a < self.n_charts and 0 <= b < self.n_charts) or a == b:
                raise BundleError(f"edge {(a, b)} does not join two existing charts")
        undirected = self.undirected_edges()
        for t in tris:
            if len(t) != 3 or len(set(t)) != 3:
                raise BundleError(f"triangle {t} must have three distinct charts")
            a, b, c = t
            for e in ((a, b), (b, c), (a, c)):
                if (min(e), max(e)) not in undirected:
                    raise BundleError(f"triangle {t} uses missing edge {e}")

    def undirected_edges(self) -> set[Edge]:
        return {(min(a, b), max(a, b)) for a, b in self.edges}

    def neighbours(self) -> dict[int, list[int]]:
        adj: dict[int, set[int]] = {i: set() for i in range(self.n_charts)}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return {i: sorted(v) for i, v in adj.items()}


@dataclass(frozen=True)
class AffineTorusMap:
    """``[v] -> [A v + shift]`` on R^d / Z^d."""

    linear: ea.IntMatrix
    shift: ea.RatVector

    def __post_init__(self):
        object.__setattr__(self, "linear", ea.as_int_matrix(self.linear))
        object.__setattr__(self, "shift", ea.reduce_mod1(ea.as_rat_vector(self.shift)))

    @classmethod
    def identity(cls, d: int) -> "AffineTorusMap":
        return cls(ea.identity(d), (0,) * d)

    @classmethod
    def of_element(cls, sg: SpaceGroup, p: int) -> "AffineTorusMap":
        return cls(sg.linear(p), sg.translation(p))

    @property
    def dim(self) -> int:
        return len(self.linear)

    def __call__(self, v) -> TorusPoint:
        coords = v.coords if isinstance(v, TorusPoint) else ea.as_rat_vector(v)
        return TorusPoint(tuple(x + s for x, s in zip(ea.matvec(self.linear, coords), self.shift)))

    def after(self, other: "AffineTorusMap") -> "AffineTorusMap":
        """``self o other``."""
        A = ea.matmul(self.linear, other.linear)
        s = tuple(x + y for x, y in zip(ea.matvec(self.linear, other.shift), self.shift))
        return AffineTorusMap(A, s)

    def inverse(self) -> "AffineTorusMap":
        Ainv = ea.int_inverse(self.linear)
        return AffineTorusMap(Ainv, tuple(-x for x in ea.matvec(Ainv, self.shift)))

    def is_identity(self) -> bool:
        return self == AffineTorusMap.identity(self.dim)

    def __str__(self):
        rows = "; ".join(" ".join(str(x) for x in r) for r in self.linear)
        return f"v -> [[{rows}]] v + ({', '.join(str(x) for x in self.shift)})"


@dataclass(frozen=True)
class FlatBundle:
    """Cech data of a flat torus bundle.

    ``transition`` maps each edge to a point-group element index.  Reverse
    edges that are not listed are filled in with the inverse element.
    """

    base: BaseComplex
    space_group: SpaceGroup
    transition: Mapping[Edge, int] = field(default_factory=dict)

    def __post_init__(self):
        order = self.space_group.order
        trans = {}
        for e, g in self.transition.items():
            e = (int(e[0]), int(e[1]))
            if e not in self.base.edges and e[::-1] not in self.base.edges:
                raise BundleError(f"transition given for unknown edge {e}")
            if not 0 <= int(g) < order:
                raise BundleError(f"element index {g} out of range for group of order {order}")
            trans[e] = int(g)
        missing = [e for e in self.base.edges if e not in trans]
        if missing:
            raise BundleError(f"edges without transition: {missing}")
        inv = self.space_group.point_group.inv
        for (a, b), g in list(trans.items()):
            trans.setdefault((b, a), inv(g))
        object.__setattr__(self, "transition", trans)

    @property
    def dim(self) -> int:
        return self.space_group.dim

    def g(self, a: int, b: int) -> int:
        try:
            return self.transition[(a, b)]
        except KeyError:
            raise BundleError(f"no overlap between charts {a} and {b}") from None

    def fiber_map(self, a: int, b: int) -> AffineTorusMap:
        """Coordinate change ``tau_b = rho(g_ab^-1) tau_a``."""
        ginv = self.space_group.point_group.inv(self.g(a, b))
        return AffineTorusMap.of_element(self.space_group, ginv)


@dataclass(frozen=True)
class BundleReport:
    inverse_violations: tuple[Edge, ...]
    triangle_violations: tuple[tuple[int, int, int], ...]

    @property
    def ok(self) -> bool:
        return not (self.inverse_violations or self.triangle_violations)


def validate_bundle(b: FlatBundle) -> BundleReport:
    """Check ``g_ba = g_ab^-1`` on every edge and ``g_ab g_bc = g_ac`` on every triangle."""
    pg = b.space_group.point_group
    inv_bad = sorted(
        (x, y)
        for (x, y), g in b.transition.items()
        if x < y and b.transition[(y, x)] != pg.inv(g)
    )
    tri_bad = [
        t for t in b.base.triangles
        if pg.mul(b.g(t[0], t[1]), b.g(t[1], t[2])) != b.g(t[0], t[2])
    ]
    return BundleReport(tuple(inv_bad), tuple(tri_bad))


Loop = Sequence[Edge]


def _check_loop(b: FlatBundle, loop: Loop) -> None:
    if not loop:
        raise BundleError("empty loop")
    for (x, y), (u, v) in zip(loop, loop[1:]):
        if y != u:
            raise BundleError(f"broken chain: edge {(x, y)} followed by {(u, v)}")
    if loop[-1][1] != loop[0][0]:
        raise BundleError("loop does not return to its start chart")
    for a, c in loop:
        b.g(a, c)


def holonomy(b: FlatBundle, loop: Loop) -> AffineTorusMap:
    """Compose edge fiber maps along ``loop``, the last edge applied last."""
    loop = [tuple(e) for e in loop]
    _check_loop(b, loop)
    H = AffineTorusMap.identity(b.dim)
    for a, c in loop:
        H = b.fiber_map(a, c).after(H)
    return H


def path_to_loop(charts: Sequence[int]) -> list[Edge]:
    """``[0, 1, 2, 0] -> [(0, 1), (1, 2), (2, 0)]``."""
    return list(zip(charts, charts[1:]))


def spanning_tree(base: BaseComplex, root: int = 0) -> dict[int, int | None]:
    """Parent map of the breadth-first tree from ``root``, lowest index first."""
    adj = base.neighbours()
    parent: dict[int, int | None] = {root: None}
    queue = deque([root])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y not in parent:
                parent[y] = x
                queue.append(y)
    return parent


def _tree_path(parent, node) -> list[int]:
    path = [node]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    return path[::-1]


def loop_basis(base: BaseComplex, root: int = 0) -> list[list[Edge]]:
    """One loop per non-tree edge, closed through the spanning tree at ``root``.

    Only the connected component of ``root`` is covered.
    """
    parent = spanning_tree(base, root)
    tree = {(min(c, p), max(c, p)) for c, p in parent.items() if p is not None}
    loops = []
    for a, c in sorted(base.undirected_edges()):
        if (a, c) in tree or a not in parent:
            continue
        charts = _tree_path(parent, a) + _tree_path(parent, c)[::-1]
        loops.append(path_to_loop(charts))
    return loops


@dataclass(frozen=True)
class FixedPointSet:
    """Common fixed points of a family of affine torus maps.

    The set is empty, finite (``dimension == 0``) or a finite union of
    translated subtori of the given dimension.  ``representatives`` holds one
    point per connected component; ``directions`` spans the tangent space of
    each component.
    """

    dim: int
    generators: tuple[AffineTorusMap, ...]
    solution: ea.ModLatticeSolution

    @property
    def empty(self) -> bool:
        return not self.solution.solvable

    @property
    def dimension(self) -> int:
        return self.solution.dimension

    @property
    def kind(self) -> str:
        if self.empty:
            return "empty"
        return "finite" if self.dimension == 0 else "subtorus"

    @property
    def directions(self) -> tuple[ea.RatVector, ...]:
        return self.solution.free_directions

    @property
    def representatives(self) -> tuple[TorusPoint, ...]:
        if self.empty:
            return ()
        base = self.solution.particular
        pts = {
            TorusPoint(tuple(x + o for x, o in zip(base, off)))
            for off in self.solution.discrete_offsets
        }
        return tuple(sorted(pts, key=lambda p: p.coords))

    @property
    def points(self) -> tuple[TorusPoint, ...]:
        if self.kind != "finite":
            raise ValueError(f"fixed-point set is {self.kind}, not finite")
        return self.representatives

    def contains(self, v) -> bool:
        v = v if isinstance(v, TorusPoint) else TorusPoint(v)
        return all(H(v) == v for H in self.generators)

    def describe(self) -> str:
        if self.empty:
            return "empty"
        reps = ", ".join(str(p) for p in self.representatives)
        if self.kind == "finite":
            return f"finite: {{{reps}}}"
        if self.dimension == self.dim:
            return f"entire torus (dimension {self.dim})"
        dirs = ", ".join("(" + ", ".join(str(x) for x in v) + ")" for v in self.directions)
        return f"subtorus of dimension {self.dimension} through {{{reps}}} along {dirs}"


def fixed_points(maps: Sequence[AffineTorusMap], d: int) -> FixedPointSet:
    """Solve ``(A - I) v = -a (mod Z^d)`` for all maps at once."""
    rows, rhs = [], []
    ident = ea.identity(d)
    for H in maps:
        rows.extend(ea.mat_sub(H.linear, ident))
        rhs.extend(-x for x in H.shift)
    if not rows:
        rows, rhs = [(0,) * d], [Fraction(0)]
    return FixedPointSet(d, tuple(maps), ea.solve_mod_lattice(rows, rhs))


def holonomy_generators(b: FlatBundle, basepoint: int = 0) -> list[AffineTorusMap]:
    return [holonomy(b, loop) for loop in loop_basis(b.base, basepoint)]


def equilibrium_sections(b: FlatBundle, basepoint: int = 0) -> FixedPointSet:
    """Torus points, in ``basepoint`` coordinates, fixed by every holonomy.

    A covariantly constant section exists exactly when this set is nonempty.
    """
    report = validate_bundle(b)
    if not report.ok:
        raise BundleError(f"bundle fails the cocycle conditions: {report}")
    return fixed_points(holonomy_generators(b, basepoint), b.dim)


# ---------------------------------------------------------------------------
# sampled sections


@dataclass(frozen=True)
class ChartGrid:
    """Uniform grid ``start + k * step`` for ``k < n`` with lift samples ``values[k]``."""

    start: float
    step: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if self.step <= 0:
            raise BundleError("grid step must be positive")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.n)


@dataclass(frozen=True)
class Overlap:
    """Sample ``source_start + k`` of chart ``source`` is sample
    ``target_start + k`` of chart ``target`` for ``k < length``."""

    source: int
    target: int
    source_start: int
    target_start: int
    length: int

    @property
    def edge(self) -> Edge:
        return (self.source, self.target)


@dataclass(frozen=True)
class SectionField:
    charts: tuple[ChartGrid, ...]
    overlaps: tuple[Overlap, ...]

    def __post_init__(self):
        for ov in self.overlaps:
            for c, s in ((ov.source, ov.source_start), (ov.target, ov.target_start)):
                if not 0 <= c < len(self.charts):
                    raise BundleError(f"overlap refers to missing chart {c}")
                if s < 0 or s + ov.length > self.charts[c].n or ov.length < 1:
                    raise BundleError(f"overlap {ov} exceeds the grid of chart {c}")
        for ov in self.overlaps:
            if abs(self.charts[ov.source].step - self.charts[ov.target].step) > 1e-12:
                raise BundleError(f"overlap {ov.edge} joins grids of different spacing")

    @property
    def dim(self) -> int:
        return self.charts[0].values.shape[1]


@dataclass(frozen=True)
class EdgeGluing:
    edge: Edge
    element: int
    max_residual: float
    lattice_vector: tuple[int, ...] | None
    shift: ea.RatVector
    winding_consistent: bool
    ambiguous: bool
    passed: bool


@dataclass(frozen=True)
class GluingReport:
    edges: tuple[EdgeGluing, ...]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.edges)

    @property
    def max_residual(self) -> float:
        return max((e.max_residual for e in self.edges), default=0.0)


def _pull(sg: SpaceGroup, g: int):
    ginv = sg.point_group.inv(g)
    A = np.array(sg.linear(ginv), dtype=float)
    return ginv, A


def check_section_gluing(
    b: FlatBundle, s: SectionField, tol: float = 1e-9, band: tuple[float, float] = (0.4, 0.6)
) -> GluingReport:
    """Recover the lattice vectors gluing lifts across each overlap.

    For every overlap sample ``r = u_b - (A_g^-1 u_a + a(g^-1))`` should be a
    lattice vector.  The nearest integer vector is taken as the lattice part;
    fractional distances inside ``band`` are ambiguous and fail the check, as
    does a lattice vector that changes along one overlap.
    """
    sg = b.space_group
    out = []
    for ov in s.overlaps:
        g = b.g(*ov.edge)
        ginv, A = _pull(sg, g)
        shift = sg.translation(ginv)
        ua = s.charts[ov.source].values[ov.source_start : ov.source_start + ov.length]
        ub = s.charts[ov.target].values[ov.target_start : ov.target_start + ov.length]
        r = ub - (ua @ A.T + np.array(shift, dtype=float))
        lam = np.rint(r)
        dist = np.abs(r - lam)
        frac = np.abs(r - np.floor(r))
        ambiguous = bool(np.any((frac >= band[0]) & (frac <= band[1])))
        consistent = bool(np.all(lam == lam[0]))
        resid = float(dist.max())
        lat = tuple(int(x) for x in lam[0]) if consistent else None
        passed = resid < tol and consistent and not ambiguous
        out.append(EdgeGluing(ov.edge, g, resid, lat, shift, consistent, ambiguous, passed))
    return GluingReport(tuple(out))


@dataclass(frozen=True)
class CovariantDifferentialField:
    """Per-chart derivative samples on the section's grids."""

    charts: tuple[ChartGrid, ...]
    overlaps: tuple[Overlap, ...]
    edge_order: int


def covariant_differential(s: SectionField, edge_order: int = 2) -> CovariantDifferentialField:
    """Derivative of each local lift with respect to the chart parameter.

    Central differences inside a chart and one-sided differences of order
    ``edge_order`` at its two ends.
    """
    charts = []
    for c in s.charts:
        if c.n < 3:
            raise BundleError("covariant differential needs at least 3 samples per chart")
        d = np.gradient(c.values, c.step, axis=0, edge_order=edge_order)
        charts.append(ChartGrid(c.start, c.step, d))
    return CovariantDifferentialField(tuple(charts), s.overlaps, edge_order)


@dataclass(frozen=True)
class EdgeDerivativeGluing:
    edge: Edge
    residual: float
    interior_residual: float
    boundary_residual: float


@dataclass(frozen=True)
class DerivativeGluingReport:
    edges: tuple[EdgeDerivativeGluing, ...]
    tol: float
    truncation_allowance: float

    @property
    def max_residual(self) -> float:
        return max((e.residual for e in self.edges), default=0.0)

    @property
    def interior_residual(self) -> float:
        return max((e.interior_residual for e in self.edges), default=0.0)

    @property
    def boundary_residual(self) -> float:
        return max((e.boundary_residual for e in self.edges), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol + self.truncation_allowance


def check_derivative_gluing(
    b: FlatBundle,
    df: CovariantDifferentialField,
    tol: float = 1e-9,
    truncation_allowance: float = 0.0,
) -> DerivativeGluingReport:
    """Check ``du_b = A_g^-1 du_a`` on every overlap.

    Only the linear part of the transition enters; there is no shift term.
    Samples whose stencil is one-sided in either chart are reported as the
    boundary residual, the rest as the interior residual.
    """
    sg = b.space_group
    out = []
    for ov in df.overlaps:
        _, A = _pull(sg, b.g(*ov.edge))
        ia = np.arange(ov.source_start, ov.source_start + ov.length)
        ib = np.arange(ov.target_start, ov.target_start + ov.length)
        da = df.charts[ov.source].values[ia]
        db = df.charts[ov.target].values[ib]
        res = np.abs(db - da @ A.T).max(axis=1)
        na, nb = df.charts[ov.source].n, df.charts[ov.target].n
        edge = (ia == 0) | (ia == na - 1) | (ib == 0) | (ib == nb - 1)
        out.append(
            EdgeDerivativeGluing(
                ov.edge,
                float(res.max()),
                float(res[~edge].max()) if np.any(~edge) else 0.0,
                float(res[edge].max()) if np.any(edge) else 0.0,
            )
        )
    return DerivativeGluingReport(tuple(out), tol, truncation_allowance)


# ---------------------------------------------------------------------------
# fixtures for sections


@dataclass(frozen=True)
class GridSpec:
    start: float
    step: float
    n: int

    @property
    def x(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.n)


def interval_cover(
    intervals: Sequence[tuple[float, float]],
    edges: Sequence[Edge],
    samples: int,
    period: float | None = None,
) -> tuple[list[GridSpec], list[Overlap]]:
    """Grids and overlap correspondences for charts that are intervals of a line or circle.

    Every chart is sampled on the common grid of spacing ``1 / samples``
    (``period / samples`` on a circle).  Interval ends are snapped to it.  On
    a circle an overlap may wrap: the second interval is then shifted by
    ``+-period`` to meet the first.
    """
    span = period if period is not None else 1.0
    h = span / samples
    grids = []
    for lo, hi in intervals:
        k0, k1 = round(lo / h), round(hi / h)
        if k1 - k0 < 2:
            raise BundleError(f"interval {(lo, hi)} holds fewer than 3 samples")
        grids.append((k0, k1))
    specs = [GridSpec(k0 * h, h, k1 - k0 + 1) for k0, k1 in grids]
    shifts = [0] if period is None else [0, samples, -samples]
    overlaps = []
    for a, c in edges:
        (a0, a1), (c0, c1) = grids[a], grids[c]
        for sh in shifts:
            lo, hi = max(a0, c0 + sh), min(a1, c1 + sh)
            if hi >= lo:
                overlaps.append(Overlap(a, c, lo - a0, lo - (c0 + sh), hi - lo + 1))
                break
        else:
            raise BundleError(f"charts {a} and {c} do not overlap")
    return specs, overlaps


def gauge(b: FlatBundle, root: int = 0) -> dict[int, int]:
    """Element ``h_a`` per chart with ``h_b = h_a g_ab`` along spanning-tree edges.

    Components not containing ``root`` are rooted at their lowest chart.
    """
    pg = b.space_group.point_group
    h: dict[int, int] = {}
    for r in [root] + list(range(b.base.n_charts)):
        if r in h:
            continue
        parent = spanning_tree(b.base, r)
        h[r] = pg.identity_index
        for c in sorted(parent, key=lambda c: len(_tree_path(parent, c))):
            p = parent[c]
            if p is not None:
                h[c] = pg.mul(h[p], b.g(p, c))
    return h


def holonomy_invariant_subspace(b: FlatBundle, basepoint: int = 0) -> np.ndarray:
    """Orthonormal basis (columns) of vectors fixed by every linear holonomy part."""
    d = b.dim
    gens = holonomy_generators(b, basepoint)
    if not gens:
        return np.eye(d)
    M = np.vstack([np.array(H.linear, dtype=float) - np.eye(d) for H in gens])
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > 1e-10))
    return vt[rank:].T


def compatible_section(
    b: FlatBundle,
    grids: Sequence[GridSpec],
    overlaps: Sequence[Overlap],
    base_point,
    perturbation: Callable[[np.ndarray], np.ndarray] | None = None,
    basepoint_chart: int = 0,
) -> SectionField:
    """Section through a holonomy-fixed point plus an equivariant perturbation.

    ``base_point`` must be fixed by every holonomy at ``basepoint_chart``.  The
    perturbation ``f(x)`` (shape ``(n, d)`` for ``n`` samples) is projected
    onto the vectors fixed by the linear holonomy parts and added before the
    chart's gauge transformation.  Lifts on chart ``a`` are
    ``A_{h_a^-1} (v0 + P f(x)) + a(h_a^-1)`` with ``h`` from :func:`gauge`.
    """
    sg = b.space_group
    pg = sg.point_group
    fps = equilibrium_sections(b, basepoint_chart)
    v0 = TorusPoint(base_point)
    if not fps.contains(v0):
        raise BundleError(f"{v0} is not fixed by the holonomy")
    v0f = np.array(v0.coords, dtype=float)
    W = holonomy_invariant_subspace(b, basepoint_chart)
    P = W @ W.T
    h = gauge(b, basepoint_chart)
    charts = []
    for c, spec in enumerate(grids):
        x = spec.x
        w = np.tile(v0f, (len(x), 1))
        if perturbation is not None:
            f = np.asarray(perturbation(x), dtype=float).reshape(len(x), -1)
            w = w + f @ P.T
        hinv = pg.inv(h[c])
        A = np.array(sg.linear(hinv), dtype=float)
        a = np.array(sg.translation(hinv), dtype=float)
        charts.append(ChartGrid(spec.start, spec.step, w @ A.T + a))
    return SectionField(tuple(charts), tuple(overlaps))


def perturb_section(s: SectionField, scale: float, rng: np.random.Generator) -> SectionField:
    charts = tuple(
        ChartGrid(c.start, c.step, c.values + scale * rng.standard_normal(c.values.shape))
        for c in s.charts
    )
    return SectionField(charts, s.overlaps)
