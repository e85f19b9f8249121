"""Structural observables of a triangulation relative to its ground state.

A triangle is G when all three of its edges have minimal length at their
midpoints (either unit diagonal counts at an unconstrained Type 2
midpoint), and B otherwise.  Connected B-components, their excess length
phi_x, the influence region of a non-minimal edge (two equivalent
constructions), and the triangle-graph distance used by the spatial-mixing
estimator all live here, together with the 1D lattice-path bijection.

Influence regions from the two constructions tile the same region of the
plane with different triangles (they differ by unit-diagonal flips), so
region equality is decided by exact rational area computations.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .geometry import (
    Edge,
    GridSpec,
    LatticePoint,
    Midpoint,
    MidpointKind,
    closest_points,
    forced_boundary_edge,
    midpoints,
    orient,
)
from .triangulation import (
    ConstraintSet,
    Triangle,
    Triangulation,
    ground_length,
    ground_state,
    make_triangle,
    triangle_edges,
)

INFINITE_DISTANCE = math.inf


# ---------------------------------------------------------------------------
# B/G decomposition
# ---------------------------------------------------------------------------


@dataclass
class BTriangleDecomposition:
    """Per-triangle G/B labels and the connected B-components (shared-edge
    connectivity) of one triangulation."""

    triangulation: Triangulation
    b_triangles: frozenset[Triangle]
    components: list[frozenset[Triangle]]
    component_of: dict[Triangle, int]

    def is_b(self, t: Triangle) -> bool:
        return t in self.b_triangles

    def s_x(self, x: Midpoint) -> frozenset[Triangle]:
        """The B-component containing the edge at x; empty when the edge
        lies in two G-triangles."""
        e = self.triangulation.assignment[Midpoint(x.dv, x.dh)]
        for face in self.triangulation.adjacency[e]:
            if face in self.component_of:
                return self.components[self.component_of[face]]
        return frozenset()

    @property
    def s_union(self) -> frozenset[Triangle]:
        return self.b_triangles

    def component_boundary_edges(self, comp: frozenset[Triangle]) -> list[Edge]:
        counts: dict[Edge, int] = {}
        for t in comp:
            for e in triangle_edges(t):
                counts[e] = counts.get(e, 0) + 1
        return [e for e, k in counts.items() if k == 1]

    def interior_midpoints(self, comp: Iterable[Triangle]) -> list[Midpoint]:
        counts: dict[Edge, int] = {}
        for t in comp:
            for e in triangle_edges(t):
                counts[e] = counts.get(e, 0) + 1
        return [e.midpoint for e, k in counts.items() if k == 2]


def classify(t: Triangulation, c: Optional[ConstraintSet] = None) -> BTriangleDecomposition:
    """Label every triangle G or B and compute the B-components."""
    if c is None:
        c = t.constraints
    is_ground = {}
    for x, e in t.assignment.items():
        is_ground[e] = e.length == ground_length(c, x)
    b_set = {tr for tr in t.triangles
             if not all(is_ground[t.assignment[e.midpoint]] for e in triangle_edges(tr))}
    # Note: triangle edges are looked up through the assignment so that the
    # edge objects hash identically.
    components: list[frozenset[Triangle]] = []
    comp_of: dict[Triangle, int] = {}
    todo = set(b_set)
    while todo:
        seed = todo.pop()
        comp = {seed}
        dq = deque([seed])
        while dq:
            cur = dq.popleft()
            for e in triangle_edges(cur):
                for nb in t.adjacency[e]:
                    if nb in todo:
                        todo.discard(nb)
                        comp.add(nb)
                        dq.append(nb)
        idx = len(components)
        components.append(frozenset(comp))
        for tr in comp:
            comp_of[tr] = idx
    return BTriangleDecomposition(t, frozenset(b_set), components, comp_of)


def phi_x(t: Triangulation, x: Midpoint,
          decomposition: Optional[BTriangleDecomposition] = None) -> int:
    """Excess length of the B-component at x over its ground-state tiling:
    zero iff both triangles at the edge are G, strictly positive otherwise."""
    c = t.constraints
    d = decomposition or classify(t, c)
    comp = d.s_x(x)
    if not comp:
        return 0
    total = 0
    for z in d.interior_midpoints(comp):
        total += t.assignment[z].length - ground_length(c, z)
    assert total > 0
    return total


# ---------------------------------------------------------------------------
# exact region arithmetic (Fractions)
# ---------------------------------------------------------------------------

Pt = tuple[Fraction, Fraction]


def _clip_polygon(poly: list[Pt], a: Pt, b: Pt) -> list[Pt]:
    """Sutherland-Hodgman clip of a convex polygon against the half-plane to
    the left of the directed line a->b (cross >= 0)."""
    def side(p: Pt) -> Fraction:
        return (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])

    out: list[Pt] = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        sp, sq = side(p), side(q)
        if sp >= 0:
            out.append(p)
            if sq < 0:
                t = sp / (sp - sq)
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
        elif sq >= 0:
            t = sp / (sp - sq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


def _poly_area2(poly: Sequence[Pt]) -> Fraction:
    tot = Fraction(0)
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        tot += p[0] * q[1] - q[0] * p[1]
    return abs(tot)


def _tri_pts(t: Triangle) -> list[Pt]:
    pts = [(Fraction(p.v), Fraction(p.h)) for p in t]
    if orient(t[0], t[1], t[2]) < 0:
        pts.reverse()
    return pts


def triangle_intersection_area(t1: Triangle, t2: Triangle) -> Fraction:
    """Exact area of the intersection of two lattice triangles."""
    poly = _tri_pts(t1)
    clip = _tri_pts(t2)
    for i in range(3):
        poly = _clip_polygon(poly, clip[i], clip[(i + 1) % 3])
        if not poly:
            return Fraction(0)
    return _poly_area2(poly) / 2


def region_area(triangles: Iterable[Triangle]) -> Fraction:
    return Fraction(len(list(triangles)), 2)  # unimodular tiles


def region_intersection_area(r1: Iterable[Triangle], r2: Iterable[Triangle]) -> Fraction:
    tot = Fraction(0)
    r2 = list(r2)
    for a in r1:
        for b in r2:
            tot += triangle_intersection_area(a, b)
    return tot


def regions_equal(r1: Iterable[Triangle], r2: Iterable[Triangle]) -> bool:
    """Exact equality of two regions given as internally-disjoint unions of
    unimodular triangles: equal areas that are fully shared."""
    r1, r2 = list(r1), list(r2)
    a1, a2 = region_area(r1), region_area(r2)
    if a1 != a2:
        return False
    return region_intersection_area(r1, r2) == a1


def region_contains(outer: Iterable[Triangle], inner: Iterable[Triangle]) -> bool:
    inner = list(inner)
    return region_intersection_area(outer, inner) == region_area(inner)


def segment_meets_triangle_interior(e: Edge, t: Triangle) -> bool:
    """True iff the open segment e intersects the open triangle t (exact)."""
    a = (Fraction(e.p.v), Fraction(e.p.h))
    b = (Fraction(e.q.v), Fraction(e.q.h))
    pts = _tri_pts(t)
    lo, hi = Fraction(0), Fraction(1)
    for i in range(3):
        p, q = pts[i], pts[(i + 1) % 3]
        # left-of value along the parametrized segment a + t*(b-a)
        sa = (q[0] - p[0]) * (a[1] - p[1]) - (a[0] - p[0]) * (q[1] - p[1])
        sb = (q[0] - p[0]) * (b[1] - p[1]) - (b[0] - p[0]) * (q[1] - p[1])
        d = sb - sa
        if d == 0:
            if sa < 0:
                return False
            continue
        t_cross = -sa / d
        if d > 0:
            lo = max(lo, t_cross)
        else:
            hi = min(hi, t_cross)
        if lo >= hi:
            return False
    mid = (lo + hi) / 2
    mv = a[0] + mid * (b[0] - a[0])
    mh = a[1] + mid * (b[1] - a[1])
    for i in range(3):
        p, q = pts[i], pts[(i + 1) % 3]
        if (q[0] - p[0]) * (mh - p[1]) - (mv - p[0]) * (q[1] - p[1]) <= 0:
            return False
    return True


# ---------------------------------------------------------------------------
# influence regions
# ---------------------------------------------------------------------------


@dataclass
class InfluenceRegion:
    """A union of triangles containing a non-minimal edge, bounded by
    ground-state edges.  `construction` records which definition built it;
    the two constructions tile the same region differently."""

    sigma_x: Edge
    triangles: frozenset[Triangle]
    construction: str

    @property
    def is_empty(self) -> bool:
        return not self.triangles

    @property
    def area(self) -> Fraction:
        return region_area(self.triangles)

    def same_region(self, other: "InfluenceRegion") -> bool:
        return regions_equal(self.triangles, other.triangles)

    def midpoint_interior(self) -> list[Midpoint]:
        counts: dict[Edge, int] = {}
        for t in self.triangles:
            for e in triangle_edges(t):
                counts[e] = counts.get(e, 0) + 1
        return [e.midpoint for e, k in counts.items() if k == 2]


def _is_ground_value(e: Edge, c: ConstraintSet) -> bool:
    return e.length == ground_length(c, e.midpoint)


def influence_region_branching(sigma_x: Edge, c: ConstraintSet) -> InfluenceRegion:
    """Constructive influence region: start from the two halves of the
    minimal parallelogram of sigma_x and keep adding, for every added edge
    still above its ground length, the far half of that edge's minimal
    parallelogram; a branch stops at edges that have reached ground length.
    """
    if _is_ground_value(sigma_x, c):
        return InfluenceRegion(sigma_x, frozenset(), "branching")
    tris: set[Triangle] = set()
    p3, p4 = closest_points(sigma_x)
    queue: deque[tuple[Edge, LatticePoint]] = deque()

    def add_triangle(base: Edge, apex: LatticePoint):
        t = make_triangle(base.p, base.q, apex)
        if t in tris:
            return
        tris.add(t)
        for new_edge in (Edge(base.p, apex), Edge(base.q, apex)):
            if not _is_ground_value(new_edge, c):
                queue.append((new_edge, _other_vertex(t, new_edge)))

    add_triangle(sigma_x, p3)
    add_triangle(sigma_x, p4)
    while queue:
        f, parent_third = queue.popleft()
        q3, q4 = closest_points(f)
        side_parent = orient(f.p, f.q, parent_third)
        far = [r for r in (q3, q4) if orient(f.p, f.q, r) == -side_parent]
        assert len(far) == 1, f"branching step at {f} has no unique far side"
        add_triangle(f, far[0])
    return InfluenceRegion(sigma_x, frozenset(tris), "branching")


def _other_vertex(t: Triangle, e: Edge) -> LatticePoint:
    (r,) = [p for p in t if p != e.p and p != e.q]
    return r


def influence_region_minimal(sigma_x: Edge, c: ConstraintSet) -> InfluenceRegion:
    """Implicit influence region: the ground-state triangles whose interior
    meets the open segment sigma_x, with each tied unit-diagonal cell
    oriented (independently) to minimize the crossed set."""
    if _is_ground_value(sigma_x, c):
        return InfluenceRegion(sigma_x, frozenset(), "minimal")
    gs = ground_state(c)
    t = gs.triangulation
    tied = gs.tied_midpoints
    # group the faces of tied cells by their midpoint; all other faces are fixed
    cell_faces: dict[Midpoint, list[Triangle]] = {x: list(t.adjacency[t.assignment[x]])
                                                  for x in tied}
    tied_faces = {f for faces in cell_faces.values() for f in faces}
    hit: set[Triangle] = set()
    for face in t.triangles:
        if face in tied_faces:
            continue
        if segment_meets_triangle_interior(sigma_x, face):
            hit.add(face)
    for x in tied:
        d0 = t.assignment[x]
        faces0 = cell_faces[x]
        hits0 = [f for f in faces0 if segment_meets_triangle_interior(sigma_x, f)]
        if not hits0:
            continue
        # alternative orientation of the cell
        v, h = (x.dv - 1) // 2, (x.dh - 1) // 2
        corners = [LatticePoint(v, h), LatticePoint(v, h + 1),
                   LatticePoint(v + 1, h), LatticePoint(v + 1, h + 1)]
        d1_pts = [p for p in corners if p != d0.p and p != d0.q]
        faces1 = [make_triangle(d1_pts[0], d1_pts[1], d0.p),
                  make_triangle(d1_pts[0], d1_pts[1], d0.q)]
        hits1 = [f for f in faces1 if segment_meets_triangle_interior(sigma_x, f)]
        hit.update(hits1 if len(hits1) < len(hits0) else hits0)
    return InfluenceRegion(sigma_x, frozenset(hit), "minimal")


# ---------------------------------------------------------------------------
# triangle-graph distance
# ---------------------------------------------------------------------------


def distance_d(a_set: Iterable[Midpoint], sigma_x: Edge, c: ConstraintSet):
    """Graph distance, in the triangle-adjacency graph of the ground state
    constrained by sigma_x, between the influence region of sigma_x and the
    triangles spanned by the midpoints in a_set.  Returns INFINITE_DISTANCE
    (no influence) when sigma_x is already a ground-state value."""
    a_list = [Midpoint(x.dv, x.dh) for x in a_set]
    if not a_list:
        raise ValueError("empty midpoint set")
    if _is_ground_value(sigma_x, c):
        return INFINITE_DISTANCE
    cx = c.with_edge(sigma_x)
    gsx = ground_state(cx).triangulation
    ups = influence_region_branching(sigma_x, c).triangles
    for t in ups:
        assert t in gsx.triangles, "influence triangle absent from constrained ground state"
    targets: set[Triangle] = set()
    for z in a_list:
        targets.update(gsx.adjacency[gsx.assignment[z]])
    dist = {t: 0 for t in ups}
    dq = deque(ups)
    if targets & ups:
        return 0
    while dq:
        cur = dq.popleft()
        for e in triangle_edges(cur):
            for nb in gsx.adjacency[e]:
                if nb not in dist:
                    dist[nb] = dist[cur] + 1
                    if nb in targets:
                        return dist[nb]
                    dq.append(nb)
    return INFINITE_DISTANCE  # disconnected cannot happen; defensive


# ---------------------------------------------------------------------------
# 1D lattice-path bijection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticePath:
    """A +-1 increment path of length 2n starting and ending at height 0.

    Sign convention (frozen): reading the transversal edges of a 1 x n
    triangulation left to right, an advance of the top endpoint is a +1
    step and an advance of the bottom endpoint is a -1 step; the running
    height equals (top h) - (bottom h), so positively oriented edges sit at
    positive height and the area under the path of a non-negative path
    equals the total horizontal length of the interior edges."""

    steps: tuple[int, ...]

    def __post_init__(self):
        if any(s not in (-1, 1) for s in self.steps):
            raise ValueError("steps must be +-1")
        if len(self.steps) % 2 or sum(self.steps) != 0:
            raise ValueError("path must have length 2n and end at 0")

    @property
    def heights(self) -> tuple[int, ...]:
        out = [0]
        for s in self.steps:
            out.append(out[-1] + s)
        return tuple(out)

    @property
    def area_under(self) -> int:
        return sum(self.heights[1:-1])

    @property
    def is_nonnegative(self) -> bool:
        return all(h >= 0 for h in self.heights)


def path_from_1d(t: Triangulation) -> LatticePath:
    """The lattice path of a 1 x n triangulation."""
    if t.grid.m != 1:
        raise ValueError(f"grid is {t.grid.m}x{t.grid.n}, not 1-dimensional")
    n = t.grid.n
    heights = [0] * (2 * n + 1)
    for i in range(1, 2 * n):
        e = t.assignment[Midpoint(1, i)]
        bottom = e.p if e.p.v == 0 else e.q
        top = e.q if e.p.v == 0 else e.p
        assert bottom.v == 0 and top.v == 1
        heights[i] = top.h - bottom.h
    steps = tuple(heights[i + 1] - heights[i] for i in range(2 * n))
    return LatticePath(steps)


def path_to_1d(path: LatticePath, n: int,
               c: Optional[ConstraintSet] = None) -> Triangulation:
    """Inverse of path_from_1d."""
    if len(path.steps) != 2 * n:
        raise ValueError(f"path length {len(path.steps)} does not match n={n}")
    grid = GridSpec(1, n)
    if c is None:
        c = ConstraintSet(grid)
    heights = path.heights
    edges = []
    for x in midpoints(grid):
        if x.kind is MidpointKind.BOUNDARY:
            edges.append(forced_boundary_edge(grid, x))
    for i in range(1, 2 * n):
        hgt = heights[i]
        if (i - hgt) % 2:
            raise ValueError("height parity inconsistent with position")
        bottom = LatticePoint(0, (i - hgt) // 2)
        top = LatticePoint(1, (i + hgt) // 2)
        edges.append(Edge(bottom, top))
    return Triangulation.from_edges(grid, edges, constraints=c)


def ones_maximal_path(n: int) -> LatticePath:
    """The maximal element of the non-negative paths: up to height n then
    straight down; its area under is n^2."""
    return LatticePath(tuple([1] * n + [-1] * n))
