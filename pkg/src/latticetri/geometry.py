"""Exact integer geometry for lattice triangulations of an m x n grid.

Coordinate convention: a lattice point (v, h) has *vertical* coordinate v
and *horizontal* coordinate h, so the grid has m+1 rows (v = 0..m) and
n+1 columns (h = 0..n).  Midpoints of edges live on the half-integer
lattice; we store them in doubled integer coordinates (dv, dh) so that no
rationals or floats ever appear.  All predicates (crossing, sidedness,
strip membership) reduce to signs of integer cross products.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from math import gcd
from typing import NamedTuple, Optional

MAX_GRID_DIM = 1 << 14  # keeps doubled-coordinate cross products well inside 64 bits


class GeometryError(ValueError):
    """Raised for inputs outside an operation's domain (degenerate slopes etc.)."""


class LatticePoint(NamedTuple):
    v: int
    h: int


class MidpointKind(Enum):
    TYPE1 = "type1"      # one integer, one half-integer coordinate (interior)
    TYPE2 = "type2"      # both coordinates half-integer
    BOUNDARY = "boundary"  # on the rectangle boundary; its edge is forced


class EdgeOrientation(Enum):
    POSITIVE = 1   # leftmost endpoint below the rightmost
    NEGATIVE = -1  # leftmost endpoint above the rightmost
    AXIS = 0       # horizontal or vertical: neither


@dataclass(frozen=True, order=True)
class GridSpec:
    """An m x n rectangle of integer points: v in 0..m, h in 0..n."""

    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError(f"grid dimensions must be >= 1, got {self.m}x{self.n}")
        if self.m > MAX_GRID_DIM or self.n > MAX_GRID_DIM:
            raise ValueError(f"grid dimensions capped at {MAX_GRID_DIM}")

    def contains(self, p: LatticePoint) -> bool:
        return 0 <= p.v <= self.m and 0 <= p.h <= self.n

    def points(self):
        for v in range(self.m + 1):
            for h in range(self.n + 1):
                yield LatticePoint(v, h)

    @property
    def edge_count(self) -> int:
        return 3 * self.m * self.n + self.m + self.n

    @property
    def triangle_count(self) -> int:
        return 2 * self.m * self.n

    def transpose(self) -> "GridSpec":
        return GridSpec(self.n, self.m)


@dataclass(frozen=True)
class Midpoint:
    """Edge midpoint in doubled coordinates: true position is (dv/2, dh/2).

    `kind` is derived metadata and does not participate in equality or
    hashing, so midpoints built without a grid compare correctly against
    classified ones.
    """

    dv: int
    dh: int
    kind: Optional[MidpointKind] = field(default=None, compare=False)

    @property
    def is_lattice(self) -> bool:
        return self.dv % 2 == 0 and self.dh % 2 == 0

    def __repr__(self):
        return f"Midpoint({self.dv}/2, {self.dh}/2)"


def classify_midpoint(grid: GridSpec, dv: int, dh: int) -> MidpointKind:
    if dv % 2 == 0 and dh % 2 == 0:
        raise GeometryError(f"({dv}/2, {dh}/2) is a lattice point, not a midpoint")
    if not (0 <= dv <= 2 * grid.m and 0 <= dh <= 2 * grid.n):
        raise GeometryError(f"midpoint ({dv}/2, {dh}/2) outside grid {grid.m}x{grid.n}")
    if dv in (0, 2 * grid.m) or dh in (0, 2 * grid.n):
        return MidpointKind.BOUNDARY
    if dv % 2 == 1 and dh % 2 == 1:
        return MidpointKind.TYPE2
    return MidpointKind.TYPE1


def make_midpoint(grid: GridSpec, dv: int, dh: int) -> Midpoint:
    return Midpoint(dv, dh, classify_midpoint(grid, dv, dh))


def midpoints(grid: GridSpec) -> list[Midpoint]:
    """All midpoints of the grid, classified.  Count is 3mn + m + n."""
    out = []
    for dv in range(2 * grid.m + 1):
        for dh in range(2 * grid.n + 1):
            if dv % 2 == 0 and dh % 2 == 0:
                continue
            out.append(make_midpoint(grid, dv, dh))
    return out


@dataclass(frozen=True)
class Edge:
    """A primitive segment between two lattice points, endpoints in
    canonical (lexicographic) order so edges hash and compare deterministically."""

    p: LatticePoint
    q: LatticePoint

    def __post_init__(self):
        if self.p == self.q:
            raise GeometryError(f"degenerate edge at {self.p}")
        if self.q < self.p:
            lo, hi = self.q, self.p
            object.__setattr__(self, "p", lo)
            object.__setattr__(self, "q", hi)

    @classmethod
    def of(cls, pv: int, ph: int, qv: int, qh: int) -> "Edge":
        return cls(LatticePoint(pv, ph), LatticePoint(qv, qh))

    @property
    def delta(self) -> tuple[int, int]:
        return (self.q.v - self.p.v, self.q.h - self.p.h)

    @property
    def length(self) -> int:
        dv, dh = self.delta
        return abs(dv) + abs(dh)

    @property
    def is_primitive(self) -> bool:
        dv, dh = self.delta
        return gcd(abs(dv), abs(dh)) == 1

    @property
    def is_axis(self) -> bool:
        dv, dh = self.delta
        return dv == 0 or dh == 0

    @property
    def is_unit_diagonal(self) -> bool:
        dv, dh = self.delta
        return abs(dv) == 1 and abs(dh) == 1

    @property
    def midpoint(self) -> Midpoint:
        return Midpoint(self.p.v + self.q.v, self.p.h + self.q.h)

    def in_grid(self, grid: GridSpec) -> bool:
        return grid.contains(self.p) and grid.contains(self.q)

    def key(self) -> tuple[int, int, int, int]:
        return (self.p.v, self.p.h, self.q.v, self.q.h)

    def __repr__(self):
        return f"Edge(({self.p.v},{self.p.h})-({self.q.v},{self.q.h}))"


@dataclass(frozen=True)
class Slope:
    """A reduced slope (a, b): vertical rise a per horizontal run b."""

    a: int
    b: int

    def __post_init__(self):
        if (self.a, self.b) == (0, 0):
            raise GeometryError("slope (0,0) is not a direction")
        g = gcd(abs(self.a), abs(self.b))
        if g != 1:
            raise GeometryError(f"slope ({self.a},{self.b}) not reduced")

    @classmethod
    def of_edge(cls, e: Edge) -> "Slope":
        dv, dh = e.delta
        g = gcd(abs(dv), abs(dh))
        return cls(dv // g, dh // g)


@dataclass(frozen=True)
class MinimalParallelogram:
    """The unique parallelogram in which the edge p1p2 is the long(er)
    diagonal; p3, p4 are the endpoints of the short diagonal.  For unit
    diagonals the opposite diagonal has equal length (the unit square)."""

    p1: LatticePoint
    p2: LatticePoint
    p3: LatticePoint
    p4: LatticePoint

    @property
    def long_diagonal(self) -> Edge:
        return Edge(self.p1, self.p2)

    @property
    def short_diagonal(self) -> Edge:
        return Edge(self.p3, self.p4)

    @property
    def vertices(self) -> tuple[LatticePoint, ...]:
        return (self.p1, self.p3, self.p2, self.p4)


def cross(o: LatticePoint, a: LatticePoint, b: LatticePoint) -> int:
    """Cross product of vectors OA and OB.  Positive, negative or zero
    according to the turn direction; exact in integers."""
    return (a.v - o.v) * (b.h - o.h) - (b.v - o.v) * (a.h - o.h)


def _sign(x: int) -> int:
    return (x > 0) - (x < 0)


def orient(o: LatticePoint, a: LatticePoint, b: LatticePoint) -> int:
    return _sign(cross(o, a, b))


def edges_cross(e1: Edge, e2: Edge) -> bool:
    """True iff the *open* segments intersect.

    Sharing an endpoint is not a crossing.  For primitive edges the only
    possible intersections are a proper transversal crossing or (between
    non-primitive or duplicated inputs) a collinear interior overlap; both
    are decided with exact integer sign tests.
    """
    if e1 == e2:
        return False
    d1 = orient(e1.p, e1.q, e2.p)
    d2 = orient(e1.p, e1.q, e2.q)
    d3 = orient(e2.p, e2.q, e1.p)
    d4 = orient(e2.p, e2.q, e1.q)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True
    if d1 == 0 and d2 == 0 and d3 == 0 and d4 == 0:
        # Collinear: open intervals overlap along the dominant axis.
        dv, dh = e1.delta
        if abs(dv) >= abs(dh):
            a1, b1 = sorted((e1.p.v, e1.q.v))
            a2, b2 = sorted((e2.p.v, e2.q.v))
        else:
            a1, b1 = sorted((e1.p.h, e1.q.h))
            a2, b2 = sorted((e2.p.h, e2.q.h))
        return max(a1, a2) < min(b1, b2)
    return False


def edge_at(grid: GridSpec, x: Midpoint, p: LatticePoint) -> Optional[Edge]:
    """Reconstruct the edge with midpoint x and one endpoint p; the other
    endpoint is the reflection 2x - p.  None if out of grid or non-primitive."""
    q = LatticePoint(x.dv - p.v, x.dh - p.h)
    if not grid.contains(p) or not grid.contains(q) or p == q:
        return None
    e = Edge(p, q)
    return e if e.is_primitive else None


def _extended_gcd(a: int, b: int) -> tuple[int, int, int]:
    if b == 0:
        return (a, 1, 0)
    g, x, y = _extended_gcd(b, a % b)
    return (g, y, x - (a // b) * y)


def closest_points(e: Edge) -> tuple[LatticePoint, LatticePoint]:
    """The unique pair of lattice points at cross-product distance +-1 from
    the non-axis edge e, lying horizontally and vertically between its
    endpoints.  The first returned point is on the positive side
    (cross(delta, r - p) = +1); the two points are reflections through the
    midpoint of e, so p3 + p4 = p + q.
    """
    dv, dh = e.delta
    if dv == 0 or dh == 0:
        raise GeometryError(f"closest_points undefined for axis edge {e}")
    if not e.is_primitive:
        raise GeometryError(f"closest_points requires a primitive edge, got {e}")
    # Solve dv*x - dh*y = 1 for the offset (y, x) = r - p, then slide by
    # multiples of (dv, dh) into the bounding box of e.
    g, u, w = _extended_gcd(dv, dh)
    assert g in (1, -1)
    # dv*u + dh*w = g, so dv*(u*g) - dh*(-w*g) = 1.
    x0 = u * g
    y0 = -w * g
    rv = e.p.v + y0
    rh = e.p.h + x0
    lo_v, hi_v = sorted((e.p.v, e.q.v))
    lo_h, hi_h = sorted((e.p.h, e.q.h))
    # Unique k with (rv, rh) + k*(dv, dh) inside the closed box.
    if dv > 0:
        k_lo = -((rv - lo_v) // dv)
        k_hi = (hi_v - rv) // dv
    else:
        k_lo = -((hi_v - rv) // (-dv))
        k_hi = (rv - lo_v) // (-dv)
    found = None
    for k in range(k_lo, k_hi + 1):
        cv, ch = rv + k * dv, rh + k * dh
        if lo_v <= cv <= hi_v and lo_h <= ch <= hi_h:
            assert found is None, f"non-unique closest point for {e}"
            found = LatticePoint(cv, ch)
    assert found is not None, f"no closest point found for {e}"
    p3 = found
    p4 = LatticePoint(e.p.v + e.q.v - p3.v, e.p.h + e.q.h - p3.h)
    assert cross(e.p, e.q, p3) == 1 and cross(e.p, e.q, p4) == -1
    return p3, p4


def minimal_parallelogram(e: Edge, strict: bool = False) -> MinimalParallelogram:
    """Minimal parallelogram of a non-axis edge: e is the long diagonal,
    closest_points(e) the short one.  With strict=True, unit diagonals are
    rejected because their opposite diagonal is not strictly shorter."""
    if e.is_axis:
        raise GeometryError(f"no minimal parallelogram for axis edge {e}")
    if strict and e.length < 3:
        raise GeometryError(f"{e} has no strictly shorter diagonal")
    p3, p4 = closest_points(e)
    return MinimalParallelogram(e.p, e.q, p3, p4)


def excluded_region_contains(e: Edge, r: LatticePoint) -> bool:
    """True iff r lies strictly inside the union of the two parallel strips
    through the sides of e's minimal parallelogram.  No lattice point ever
    does; this predicate exists so that tests can check exactly that."""
    mp = minimal_parallelogram(e)
    p1, p2, p3, p4 = mp.p1, mp.p2, mp.p3, mp.p4

    def strictly_between(a: LatticePoint, da: LatticePoint, b: LatticePoint) -> bool:
        # Lines through a and b, both with direction da (as a point offset).
        d = LatticePoint(a.v + da.v, a.h + da.h)
        s1 = cross(a, d, r)
        d2 = LatticePoint(b.v + da.v, b.h + da.h)
        s2 = cross(b, d2, r)
        return s1 * s2 < 0

    d_a = LatticePoint(p4.v - p1.v, p4.h - p1.h)  # direction of sides p1p4 and p3p2
    d_b = LatticePoint(p3.v - p1.v, p3.h - p1.h)  # direction of sides p1p3 and p4p2
    return strictly_between(p1, d_a, p2) or strictly_between(p1, d_b, p2)


def orientation(e: Edge) -> EdgeOrientation:
    """Positive if the leftmost endpoint lies below the rightmost, negative
    if above, axis for horizontal/vertical edges."""
    dv, dh = e.delta
    s = _sign(dv) * _sign(dh)
    if s > 0:
        return EdgeOrientation.POSITIVE
    if s < 0:
        return EdgeOrientation.NEGATIVE
    return EdgeOrientation.AXIS


def forced_boundary_edge(grid: GridSpec, x: Midpoint) -> Edge:
    """The unit edge forced at a boundary midpoint of the rectangle."""
    kind = x.kind or classify_midpoint(grid, x.dv, x.dh)
    if kind is not MidpointKind.BOUNDARY:
        raise GeometryError(f"{x} is not a boundary midpoint")
    if x.dv % 2 == 0:  # horizontal unit edge on the top/bottom row
        v = x.dv // 2
        h = (x.dh - 1) // 2
        return Edge(LatticePoint(v, h), LatticePoint(v, h + 1))
    v = (x.dv - 1) // 2
    h = x.dh // 2
    return Edge(LatticePoint(v, h), LatticePoint(v + 1, h))


def find_crossing_pair(edges) -> Optional[tuple[Edge, Edge]]:
    """First crossing pair among `edges`, or None.  Buckets edges by the
    unit cells their bounding boxes touch so that typical (short-edge)
    inputs are checked in near-linear time."""
    edges = list(edges)
    buckets: dict[tuple[int, int], list[int]] = {}
    for i, e in enumerate(edges):
        lo_v, hi_v = sorted((e.p.v, e.q.v))
        lo_h, hi_h = sorted((e.p.h, e.q.h))
        for cv in range(lo_v - 1, hi_v + 1):
            for ch in range(lo_h - 1, hi_h + 1):
                buckets.setdefault((cv, ch), []).append(i)
    seen: set[tuple[int, int]] = set()
    for members in buckets.values():
        if len(members) < 2:
            continue
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                i, j = members[a], members[b]
                if (i, j) in seen:
                    continue
                seen.add((i, j))
                if edges_cross(edges[i], edges[j]):
                    return edges[i], edges[j]
    return None
