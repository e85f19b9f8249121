"""Triangulation state machine: constraints, validity, ground states, flips.

A triangulation of the m x n grid is an assignment of one edge to every
midpoint of the half-integer lattice, forming 2mn unimodular triangles.
This module owns the mutable `Triangulation` structure with O(1) flips
(edge -> triangle adjacency patched in place), the greedy ground-state
construction, and the heat-bath acceptance probability.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional, Union

from .geometry import (
    Edge,
    GridSpec,
    LatticePoint,
    Midpoint,
    MidpointKind,
    classify_midpoint,
    closest_points,
    cross,
    edges_cross,
    find_crossing_pair,
    forced_boundary_edge,
    make_midpoint,
    midpoints,
)

Triangle = tuple[LatticePoint, LatticePoint, LatticePoint]


class ValidationError(ValueError):
    """A constraint set or triangulation violates a structural invariant."""


class StaleProposalError(RuntimeError):
    """A flip proposal was applied to a triangulation that has since changed."""


def make_triangle(a: LatticePoint, b: LatticePoint, c: LatticePoint) -> Triangle:
    t = tuple(sorted((a, b, c)))
    return t  # type: ignore[return-value]


def triangle_edges(t: Triangle) -> tuple[Edge, Edge, Edge]:
    return (Edge(t[0], t[1]), Edge(t[0], t[2]), Edge(t[1], t[2]))


class ConstraintSet:
    """A consistent set of fixed edges (the pair (eta, Delta)).

    Boundary edges of the rectangle are implicitly forced and need not be
    listed.  Instances are immutable and hashable so derived data (ground
    states, edge trees) can be cached against them.
    """

    def __init__(self, grid: GridSpec, edges: Iterable[Edge] = (), validate: bool = True):
        self.grid = grid
        edge_list = list(dict.fromkeys(edges))
        if validate:
            _validate_constraint_edges(grid, edge_list)
        mapping: dict[Midpoint, Edge] = {}
        for e in edge_list:
            x = make_midpoint(grid, e.midpoint.dv, e.midpoint.dh)
            mapping[x] = e
        self._mapping = mapping
        self._key = tuple(sorted(e.key() for e in mapping.values()))

    @property
    def mapping(self) -> dict[Midpoint, Edge]:
        return dict(self._mapping)

    def edges(self) -> list[Edge]:
        return [self._mapping[x] for x in sorted(self._mapping, key=lambda x: (x.dv, x.dh))]

    def is_constrained(self, x: Midpoint) -> bool:
        return x in self._mapping

    def __contains__(self, x: Midpoint) -> bool:
        return x in self._mapping

    def __getitem__(self, x: Midpoint) -> Edge:
        return self._mapping[x]

    def __len__(self) -> int:
        return len(self._mapping)

    def __eq__(self, other):
        return isinstance(other, ConstraintSet) and self.grid == other.grid and self._key == other._key

    def __hash__(self):
        return hash((self.grid, self._key))

    def __repr__(self):
        return f"ConstraintSet({self.grid.m}x{self.grid.n}, {len(self)} edges)"

    def with_edge(self, e: Edge) -> "ConstraintSet":
        """A new constraint set with one extra fixed edge."""
        return ConstraintSet(self.grid, list(self._mapping.values()) + [e], validate=False)


def _validate_constraint_edges(grid: GridSpec, edges: list[Edge]) -> None:
    for e in edges:
        if not e.in_grid(grid):
            raise ValidationError(f"constraint {e} outside grid {grid.m}x{grid.n}")
        if not e.is_primitive:
            raise ValidationError(f"constraint {e} is not primitive")
    pair = find_crossing_pair(edges)
    if pair is not None:
        raise ValidationError(f"constraints cross: {pair[0]} and {pair[1]}")


def validate_constraints(c: ConstraintSet) -> None:
    """Raise ValidationError at the first violating edge or crossing pair."""
    _validate_constraint_edges(c.grid, list(c._mapping.values()))
    for x, e in c._mapping.items():
        if (e.midpoint.dv, e.midpoint.dh) != (x.dv, x.dh):
            raise ValidationError(f"constraint {e} filed under wrong midpoint {x}")


@dataclass(frozen=True)
class FlipProposal:
    """A heat-bath flip proposal at midpoint x: replace `current` with
    `proposed` (the opposite diagonal of the surrounding parallelogram)."""

    x: Midpoint
    current: Edge
    proposed: Edge
    probability: Optional[float] = None


def heat_bath_prob(lam: Union[float, Fraction], cur_len: int, new_len: int):
    """Heat-bath acceptance probability for replacing an edge of length
    cur_len with one of length new_len:

        lam**new / (lam**new + lam**cur) = 1 / (1 + lam**(cur - new))

    Computed via the length difference so that neither power overflows.
    Returns a Fraction when lam is a Fraction.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if isinstance(lam, Fraction):
        return Fraction(1, 1) / (1 + lam ** (cur_len - new_len))
    return 1.0 / (1.0 + lam ** (cur_len - new_len))


class Triangulation:
    """A full triangulation: midpoint -> edge assignment plus the triangle
    mesh and the edge -> triangle adjacency needed for O(1) flips.

    Mutable; at most one thread may mutate an instance (use copy() for
    independent replicas).
    """

    def __init__(self, grid: GridSpec, constraints: ConstraintSet,
                 assignment: dict[Midpoint, Edge], triangles: set[Triangle],
                 adjacency: dict[Edge, list[Triangle]]):
        self.grid = grid
        self.constraints = constraints
        self.assignment = assignment
        self.triangles = triangles
        self.adjacency = adjacency
        self.total_length = sum(e.length for e in assignment.values())

    # -- construction ------------------------------------------------------

    @classmethod
    def from_edges(cls, grid: GridSpec, edges: Iterable[Edge],
                   constraints: Optional[ConstraintSet] = None,
                   check_crossings: bool = False) -> "Triangulation":
        """Build and validate a triangulation from its full edge list."""
        if constraints is None:
            constraints = ConstraintSet(grid, ())
        edge_list = list(edges)
        if len(edge_list) != grid.edge_count:
            raise ValidationError(
                f"not maximal: expected {grid.edge_count} edges, got {len(edge_list)}")
        assignment: dict[Midpoint, Edge] = {}
        for e in edge_list:
            if not e.in_grid(grid):
                raise ValidationError(f"edge {e} outside grid")
            if not e.is_primitive:
                raise ValidationError(f"edge {e} is not primitive")
            x = make_midpoint(grid, e.midpoint.dv, e.midpoint.dh)
            if x in assignment:
                raise ValidationError(f"midpoint {x} assigned twice")
            assignment[x] = e
        for x in midpoints(grid):
            if x not in assignment:
                raise ValidationError(f"midpoint {x} has no edge")
            if x.kind is MidpointKind.BOUNDARY and assignment[x] != forced_boundary_edge(grid, x):
                raise ValidationError(f"boundary midpoint {x} carries non-boundary edge")
        for x, e in constraints._mapping.items():
            got = assignment.get(Midpoint(x.dv, x.dh))
            if got != e:
                raise ValidationError(f"constraint {e} not respected at {x} (found {got})")
        if check_crossings:
            pair = find_crossing_pair(edge_list)
            if pair is not None:
                raise ValidationError(f"edges cross: {pair[0]} and {pair[1]}")
        triangles, adjacency = _build_faces(grid, assignment)
        return cls(grid, constraints, assignment, triangles, adjacency)

    def copy(self) -> "Triangulation":
        t = Triangulation.__new__(Triangulation)
        t.grid = self.grid
        t.constraints = self.constraints
        t.assignment = dict(self.assignment)
        t.triangles = set(self.triangles)
        t.adjacency = {e: list(ts) for e, ts in self.adjacency.items()}
        t.total_length = self.total_length
        return t

    # -- queries -----------------------------------------------------------

    def config(self, x: Midpoint) -> Edge:
        return self.assignment[Midpoint(x.dv, x.dh)]

    def edges(self) -> list[Edge]:
        return sorted(self.assignment.values(), key=Edge.key)

    def interior_edges(self) -> list[Edge]:
        grid = self.grid
        out = []
        for x, e in self.assignment.items():
            if classify_midpoint(grid, x.dv, x.dh) is not MidpointKind.BOUNDARY:
                out.append(e)
        return sorted(out, key=Edge.key)

    def deep_equals(self, other: "Triangulation") -> bool:
        return (self.grid == other.grid
                and self.assignment == other.assignment
                and self.triangles == other.triangles
                and {e: sorted(ts) for e, ts in self.adjacency.items()}
                    == {e: sorted(ts) for e, ts in other.adjacency.items()}
                and self.total_length == other.total_length)

    def __eq__(self, other):
        return (isinstance(other, Triangulation)
                and self.grid == other.grid and self.assignment == other.assignment)

    def __hash__(self):
        return hash((self.grid, tuple(sorted(e.key() for e in self.assignment.values()))))

    def __repr__(self):
        return (f"Triangulation({self.grid.m}x{self.grid.n}, "
                f"|sigma|={self.total_length})")


def _build_faces(grid: GridSpec, assignment: dict[Midpoint, Edge]):
    """Derive the triangle set and edge->triangle adjacency, validating the
    local face structure (interior edges flanked on both sides, boundary
    edges on one) as it goes."""
    nbr: dict[LatticePoint, set[LatticePoint]] = {}
    for e in assignment.values():
        nbr.setdefault(e.p, set()).add(e.q)
        nbr.setdefault(e.q, set()).add(e.p)
    triangles: set[Triangle] = set()
    adjacency: dict[Edge, list[Triangle]] = {}
    for x, e in assignment.items():
        p, q = e.p, e.q
        pos = []
        neg = []
        for r in nbr[p] & nbr[q]:
            s = cross(p, q, r)
            if s == 1:
                pos.append(r)
            elif s == -1:
                neg.append(r)
        on_boundary = classify_midpoint(grid, x.dv, x.dh) is MidpointKind.BOUNDARY
        if on_boundary:
            if len(pos) + len(neg) != 1:
                raise ValidationError(f"boundary edge {e} has {len(pos) + len(neg)} faces")
        else:
            if len(pos) != 1 or len(neg) != 1:
                raise ValidationError(
                    f"interior edge {e} has {len(pos)}+{len(neg)} unimodular faces")
        faces = [make_triangle(p, q, r) for r in pos + neg]
        adjacency[e] = faces
        triangles.update(faces)
    if len(triangles) != grid.triangle_count:
        raise ValidationError(
            f"expected {grid.triangle_count} triangles, got {len(triangles)}")
    return triangles, adjacency


# -- candidate configurations and the ground state ---------------------------


def candidate_configs(x: Midpoint, c: ConstraintSet) -> list[Edge]:
    """All primitive in-grid edges with midpoint x that cross no constraint,
    sorted by length then lexicographically.  This is the configuration set
    Omega_x; it is nonempty for any consistent constraint set."""
    grid = c.grid
    if c.is_constrained(x):
        raise ValueError(f"{x} is a constraint midpoint")
    cons = list(c._mapping.values())
    out = []
    seen = set()
    lo_v = max(0, x.dv - grid.m)
    hi_v = min(grid.m, x.dv)
    for pv in range(lo_v, hi_v + 1):
        lo_h = max(0, x.dh - grid.n)
        hi_h = min(grid.n, x.dh)
        for ph in range(lo_h, hi_h + 1):
            qv, qh = x.dv - pv, x.dh - ph
            if (pv, ph) >= (qv, qh):
                continue
            e = Edge(LatticePoint(pv, ph), LatticePoint(qv, qh))
            if not e.is_primitive or e.key() in seen:
                continue
            seen.add(e.key())
            if any(edges_cross(e, ce) for ce in cons):
                continue
            out.append(e)
    out.sort(key=lambda e: (e.length, e.key()))
    return out


def _trivial_candidates(grid: GridSpec, x: Midpoint) -> list[Edge]:
    """The unconstrained minimal configurations at an interior midpoint:
    the axis edge (Type 1) or the two unit diagonals (Type 2)."""
    if x.dv % 2 == 1 and x.dh % 2 == 1:
        v, h = (x.dv - 1) // 2, (x.dh - 1) // 2
        neg = Edge(LatticePoint(v + 1, h), LatticePoint(v, h + 1))   # NW-SE
        pos = Edge(LatticePoint(v, h), LatticePoint(v + 1, h + 1))   # SW-NE
        return [neg, pos]
    if x.dv % 2 == 1:
        v, h = (x.dv - 1) // 2, x.dh // 2
        return [Edge(LatticePoint(v, h), LatticePoint(v + 1, h))]
    v, h = x.dv // 2, (x.dh - 1) // 2
    return [Edge(LatticePoint(v, h), LatticePoint(v, h + 1))]


@dataclass(frozen=True)
class GroundStateResult:
    """Greedy minimum-length triangulation, with the Type 2 midpoints where
    both unit diagonals are consistent (the only non-uniqueness), and the
    minimal consistent edge length per midpoint."""

    triangulation: Triangulation
    tied_midpoints: frozenset[Midpoint]
    min_length: dict[Midpoint, int]


def ground_state(c: ConstraintSet) -> GroundStateResult:
    """Construct the ground state by placing each edge independently in its
    minimal-length configuration consistent with the constraints.  Ties
    between unit diagonals resolve to the NW-SE (negatively oriented)
    diagonal and are reported.

    Results are cached per constraint set; the returned triangulation is a
    fresh copy so callers may flip it freely."""
    cached = _ground_state_cached(c)
    return GroundStateResult(cached.triangulation.copy(), cached.tied_midpoints,
                             dict(cached.min_length))


@lru_cache(maxsize=256)
def _ground_state_cached(c: ConstraintSet) -> GroundStateResult:
    grid = c.grid
    cons = list(c._mapping.values())
    assignment: dict[Midpoint, Edge] = {}
    min_length: dict[Midpoint, int] = {}
    ties = set()
    for x in midpoints(grid):
        if x.kind is MidpointKind.BOUNDARY:
            e = forced_boundary_edge(grid, x)
            assignment[x] = e
            min_length[x] = 1
            continue
        if c.is_constrained(x):
            e = c[x]
            assignment[x] = e
            min_length[x] = e.length
            continue
        trivial = _trivial_candidates(grid, x)
        ok = [e for e in trivial if not any(edges_cross(e, ce) for ce in cons)]
        if ok:
            if len(ok) == 2:
                ties.add(x)
            assignment[x] = ok[0]
            min_length[x] = ok[0].length
        else:
            cands = candidate_configs(x, c)
            if not cands:
                raise ValidationError(f"no consistent configuration at {x}")
            best = cands[0]
            # Prop. of constrained minimality: the minimal configuration of a
            # constrained midpoint is unique.
            assert len(cands) == 1 or cands[1].length > best.length, \
                f"non-unique minimal configuration at {x}"
            assignment[x] = best
            min_length[x] = best.length
    tri = Triangulation.from_edges(grid, assignment.values(), constraints=c)
    return GroundStateResult(tri, frozenset(ties), min_length)


def ground_length(c: ConstraintSet, x: Midpoint) -> int:
    """Minimal consistent edge length at midpoint x."""
    return _ground_state_cached(c).min_length[Midpoint(x.dv, x.dh)]


def is_ground_config(e: Edge, c: ConstraintSet) -> bool:
    """True iff e has the minimal candidate length at its own midpoint, so
    either unit diagonal qualifies at an unconstrained Type 2 midpoint."""
    return e.length == ground_length(c, e.midpoint)


def shortening_target(e: Edge) -> Optional[Edge]:
    """The unique flip target that does not lengthen e: the short diagonal
    of e's minimal parallelogram, or the opposite diagonal (equal length)
    when e is a unit diagonal.  None for axis edges, which are minimal."""
    if e.is_axis:
        return None
    p3, p4 = closest_points(e)
    return Edge(p3, p4)


def is_spanned(e: Edge, c: ConstraintSet) -> bool:
    """True iff some constraint edge crosses the short diagonal of e's
    minimal parallelogram.  Characterizes constrained minimality: a
    consistent non-axis configuration is the unique minimum at its midpoint
    iff it is spanned."""
    if e.is_axis:
        return False
    short = shortening_target(e)
    return any(edges_cross(short, ce) for ce in c._mapping.values())


# -- flips -------------------------------------------------------------------


def flippable(t: Triangulation, x: Midpoint,
              lam: Union[float, Fraction, None] = None) -> Optional[FlipProposal]:
    """A flip proposal at x, or None when the edge is not flippable
    (boundary or constraint midpoint, or the two incident triangles do not
    form a parallelogram).  The proposal's acceptance probability is filled
    in when lam is given."""
    x = Midpoint(x.dv, x.dh)
    if t.constraints.is_constrained(x):
        return None
    e = t.assignment[x]
    faces = t.adjacency[e]
    if len(faces) < 2:
        return None
    thirds = []
    for f in faces:
        (r,) = [pt for pt in f if pt != e.p and pt != e.q]
        thirds.append(r)
    r1, r2 = thirds
    if r1.v + r2.v != x.dv or r1.h + r2.h != x.dh:
        return None
    proposed = Edge(r1, r2)
    prob = None
    if lam is not None:
        prob = heat_bath_prob(lam, e.length, proposed.length)
    return FlipProposal(x, e, proposed, prob)


def apply_flip(t: Triangulation, proposal: FlipProposal) -> Triangulation:
    """Apply a flip in place: the assignment changes only at proposal.x, the
    two incident triangles are replaced, and adjacency is patched in O(1).
    Returns t.  Raises StaleProposalError if t changed since the proposal."""
    x = proposal.x
    cur, new = proposal.current, proposal.proposed
    if t.assignment.get(Midpoint(x.dv, x.dh)) != cur:
        raise StaleProposalError(f"edge at {x} is no longer {cur}")
    old_faces = t.adjacency.pop(cur)
    p, q = cur.p, cur.q
    r1, r2 = new.p, new.q
    t_old_1 = make_triangle(p, q, r1)
    t_old_2 = make_triangle(p, q, r2)
    t_new_p = make_triangle(r1, r2, p)
    t_new_q = make_triangle(r1, r2, q)
    assert set(old_faces) == {t_old_1, t_old_2}, "adjacency inconsistent with proposal"
    t.triangles.difference_update(old_faces)
    t.triangles.update((t_new_p, t_new_q))
    t.assignment[Midpoint(x.dv, x.dh)] = new
    t.adjacency[new] = [t_new_p, t_new_q]
    for side, old_face, new_face in (
        (Edge(p, r1), t_old_1, t_new_p),
        (Edge(q, r1), t_old_1, t_new_q),
        (Edge(p, r2), t_old_2, t_new_p),
        (Edge(q, r2), t_old_2, t_new_q),
    ):
        faces = t.adjacency[side]
        faces[faces.index(old_face)] = new_face
    t.total_length += new.length - cur.length
    return t


# -- completion ---------------------------------------------------------------


def raster_order(grid: GridSpec, free: Iterable[Midpoint]) -> list[Midpoint]:
    """Top row first, left to right within each row (by midpoint)."""
    return sorted(free, key=lambda x: (-x.dv, x.dh))


def complete(c: ConstraintSet) -> Triangulation:
    """Any valid triangulation extending the constraints: greedy in raster
    midpoint order, preferring short edges, with backtracking (rarely
    needed) if a greedy prefix dead-ends."""
    grid = c.grid
    free = [x for x in midpoints(grid)
            if x.kind is not MidpointKind.BOUNDARY and not c.is_constrained(x)]
    order = raster_order(grid, free)
    base = [forced_boundary_edge(grid, x) for x in midpoints(grid)
            if x.kind is MidpointKind.BOUNDARY]
    base += list(c._mapping.values())
    cand = {x: candidate_configs(x, c) for x in order}
    placed: list[Edge] = []

    def feasible(e: Edge) -> bool:
        return not any(edges_cross(e, f) for f in placed)

    def dfs(k: int) -> bool:
        if k == len(order):
            return True
        for e in cand[order[k]]:
            if feasible(e):
                placed.append(e)
                if dfs(k + 1):
                    return True
                placed.pop()
        return False

    if not dfs(0):
        raise ValidationError("constraints admit no completion")  # cannot happen
    return Triangulation.from_edges(grid, base + placed, constraints=c)
