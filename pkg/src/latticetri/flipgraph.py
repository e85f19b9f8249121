"""Exhaustive enumeration of small state spaces and the flip graph.

States are encoded compactly: one byte per free (interior, non-constraint)
midpoint giving the index of the chosen edge in that midpoint's candidate
list.  Two valid triangulations that differ at exactly one midpoint are
always flip-adjacent (removing the differing edge leaves a two-triangle
quadrilateral hole, which admits only its two diagonals), so flip-graph
edges are Hamming-distance-1 pairs of encoded states.

Enumeration is a DFS over midpoints in raster scan order with precomputed
pairwise conflict bitmasks, which keeps per-node work to a few big-int
operations.  Running the same DFS in the reversed scan order provides an
independent count check.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

from .geometry import (
    Edge,
    GridSpec,
    Midpoint,
    MidpointKind,
    edges_cross,
    forced_boundary_edge,
    midpoints,
)
from .triangulation import (
    ConstraintSet,
    Triangulation,
    candidate_configs,
    shortening_target,
)

DEFAULT_STATE_CAP = 5_000_000


class EnumerationCapExceeded(RuntimeError):
    def __init__(self, cap: int, partial_count: int):
        super().__init__(f"state cap {cap} exceeded (partial count {partial_count})")
        self.cap = cap
        self.partial_count = partial_count


@dataclass
class StateSpace:
    """The complete set Omega(eta, Delta) for one grid + constraint set."""

    grid: GridSpec
    constraints: ConstraintSet
    free_midpoints: tuple[Midpoint, ...]          # in raster scan order
    candidates: dict[Midpoint, list[Edge]]        # Omega_x per free midpoint
    states: list[bytes]                           # candidate-index per slot
    index: dict[bytes, int]
    lengths: list[int]                            # total |sigma| incl. forced edges
    base_length: int
    max_branching: int                            # max choices seen at any DFS node

    def __len__(self) -> int:
        return len(self.states)

    @property
    def slot_of(self) -> dict[Midpoint, int]:
        if not hasattr(self, "_slot_of"):
            self._slot_of = {x: k for k, x in enumerate(self.free_midpoints)}
        return self._slot_of

    def state_edges(self, i: int) -> dict[Midpoint, Edge]:
        """Full midpoint -> edge assignment of state i (forced + constraint
        edges included)."""
        enc = self.states[i]
        asg: dict[Midpoint, Edge] = {}
        for x in midpoints(self.grid):
            if x.kind is MidpointKind.BOUNDARY:
                asg[x] = forced_boundary_edge(self.grid, x)
        for x, e in self.constraints.mapping.items():
            asg[x] = e
        for k, x in enumerate(self.free_midpoints):
            asg[x] = self.candidates[x][enc[k]]
        return asg

    def edge_in_state(self, i: int, x: Midpoint) -> Edge:
        x = Midpoint(x.dv, x.dh)
        k = self.slot_of.get(x)
        if k is not None:
            return self.candidates[self.free_midpoints[k]][self.states[i][k]]
        if self.constraints.is_constrained(x):
            return self.constraints[x]
        return forced_boundary_edge(self.grid, x)

    def triangulation(self, i: int) -> Triangulation:
        return Triangulation.from_edges(self.grid, self.state_edges(i).values(),
                                        constraints=self.constraints)

    def find(self, t: Triangulation) -> int:
        enc = self.encode_assignment(t.assignment)
        return self.index[enc]

    def encode_assignment(self, assignment: dict[Midpoint, Edge]) -> bytes:
        out = bytearray(len(self.free_midpoints))
        for k, x in enumerate(self.free_midpoints):
            e = assignment[x]
            out[k] = self.candidates[x].index(e)
        return bytes(out)

    def neighbor(self, i: int, slot: int, cand_idx: int) -> Optional[int]:
        """State id obtained from state i by setting `slot` to `cand_idx`,
        or None if that replacement is not a valid triangulation."""
        enc = bytearray(self.states[i])
        if enc[slot] == cand_idx:
            return i
        enc[slot] = cand_idx
        return self.index.get(bytes(enc))

    def serialize_state(self, i: int) -> list[Edge]:
        """Canonical serialization: sorted interior edges."""
        grid = self.grid
        interior = [e for x, e in self.state_edges(i).items()
                    if x.kind is not MidpointKind.BOUNDARY]
        return sorted(interior, key=Edge.key)


def _prepare(c: ConstraintSet, order_key):
    grid = c.grid
    free = [x for x in midpoints(grid)
            if x.kind is not MidpointKind.BOUNDARY and not c.is_constrained(x)]
    free.sort(key=order_key)
    cand = {x: candidate_configs(x, c) for x in free}
    for x, lst in cand.items():
        if len(lst) > 255:
            raise ValueError(f"candidate list at {x} too large to encode")
    # global candidate ids and pairwise conflict masks
    gids: dict[tuple[int, Edge], int] = {}
    flat: list[tuple[int, Edge]] = []
    for k, x in enumerate(free):
        for e in cand[x]:
            gids[(k, e)] = len(flat)
            flat.append((k, e))
    conflict = [0] * len(flat)
    for i, (ki, ei) in enumerate(flat):
        for j in range(i + 1, len(flat)):
            kj, ej = flat[j]
            if ki == kj:
                continue
            if edges_cross(ei, ej):
                conflict[i] |= 1 << j
                conflict[j] |= 1 << i
    return free, cand, flat, gids, conflict


def _dfs_count(free, cand, gids, conflict, cap, collect, track_branching):
    """Iterative DFS over free midpoints; returns (count, states, lengths
    relative to base, max_branching)."""
    F = len(free)
    states: list[bytes] = []
    lengths: list[int] = []
    count = 0
    max_branch = 0
    if F == 0:
        return 1, [b""], [0], 0
    cand_ids = []
    cand_lens = []
    for k, x in enumerate(free):
        ids = [gids[(k, e)] for e in cand[x]]
        cand_ids.append(ids)
        cand_lens.append([e.length for e in cand[x]])
    # stack entries: (slot k, local candidate index to try next, blocked mask)
    chosen = bytearray(F)
    partial_len = [0] * (F + 1)
    stack = [(0, 0, 0)]
    while stack:
        k, ci, blocked = stack.pop()
        if track_branching and ci == 0:
            avail = sum(1 for g in cand_ids[k] if not (blocked >> g) & 1)
            if avail > max_branch:
                max_branch = avail
        ids = cand_ids[k]
        n = len(ids)
        while ci < n and (blocked >> ids[ci]) & 1:
            ci += 1
        if ci >= n:
            continue
        g = ids[ci]
        # resume point for this level: try the next candidate later
        stack.append((k, ci + 1, blocked))
        chosen[k] = ci
        partial_len[k + 1] = partial_len[k] + cand_lens[k][ci]
        if k + 1 == F:
            count += 1
            if count > cap:
                raise EnumerationCapExceeded(cap, count - 1)
            if collect:
                states.append(bytes(chosen))
                lengths.append(partial_len[F])
        else:
            stack.append((k + 1, 0, blocked | conflict[g]))
    return count, states, lengths, max_branch


def enumerate_triangulations(c: ConstraintSet, cap: int = DEFAULT_STATE_CAP,
                             count_only: bool = False, verify: bool = True):
    """Enumerate Omega(eta, Delta).

    Returns a StateSpace (or just the count when count_only=True).  With
    verify=True the DFS is repeated in the reversed scan order and the two
    counts must agree.  Raises EnumerationCapExceeded beyond `cap` states.
    """
    free, cand, flat, gids, conflict = _prepare(c, lambda x: (-x.dv, x.dh))
    count, states, rel_lengths, max_branch = _dfs_count(
        free, cand, gids, conflict, cap, collect=not count_only,
        track_branching=True)
    if verify:
        free_r, cand_r, flat_r, gids_r, conflict_r = _prepare(c, lambda x: (x.dv, -x.dh))
        count_r, _, _, _ = _dfs_count(free_r, cand_r, gids_r, conflict_r, cap,
                                      collect=False, track_branching=False)
        if count_r != count:
            raise AssertionError(
                f"enumeration strategies disagree: {count} vs {count_r}")
    if count_only:
        return count
    base = sum(e.length for e in c.mapping.values())
    base += 2 * (c.grid.m + c.grid.n)  # forced boundary edges, unit length each
    space = StateSpace(
        grid=c.grid, constraints=c, free_midpoints=tuple(free), candidates=cand,
        states=states, index={s: i for i, s in enumerate(states)},
        lengths=[base + rl for rl in rel_lengths], base_length=base,
        max_branching=max_branch)
    return space


# -- flip graph ----------------------------------------------------------------


@dataclass
class FlipGraph:
    space: StateSpace
    adj: list[list[int]]
    edge_labels: dict[tuple[int, int], Midpoint] = field(default_factory=dict)

    @property
    def num_edges(self) -> int:
        return sum(len(a) for a in self.adj) // 2

    def degree(self, i: int) -> int:
        return len(self.adj[i])

    def is_connected(self) -> bool:
        n = len(self.adj)
        if n == 0:
            return True
        seen = [False] * n
        seen[0] = True
        dq = deque([0])
        found = 1
        while dq:
            u = dq.popleft()
            for v in self.adj[u]:
                if not seen[v]:
                    seen[v] = True
                    found += 1
                    dq.append(v)
        return found == n

    def diameter(self) -> int:
        best = 0
        for s in range(len(self.adj)):
            dist = self._bfs(s)
            best = max(best, max(dist))
        return best

    def _bfs(self, s: int) -> list[int]:
        n = len(self.adj)
        dist = [-1] * n
        dist[s] = 0
        dq = deque([s])
        while dq:
            u = dq.popleft()
            for v in self.adj[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    dq.append(v)
        return dist


def build_flip_graph(space: StateSpace) -> FlipGraph:
    """Adjacency between states at Hamming distance one (equivalently, one
    flip apart)."""
    adj: list[list[int]] = [[] for _ in space.states]
    labels: dict[tuple[int, int], Midpoint] = {}
    for i, enc in enumerate(space.states):
        for k, x in enumerate(space.free_midpoints):
            cur = enc[k]
            for ci in range(len(space.candidates[x])):
                if ci == cur:
                    continue
                j = space.neighbor(i, k, ci)
                if j is not None and j > i:
                    adj[i].append(j)
                    adj[j].append(i)
                    labels[(i, j)] = x
    return FlipGraph(space, adj, labels)


def bfs_distance(g: FlipGraph, s: int, t: int) -> int:
    """Exact shortest path length in the flip graph (oracle)."""
    if s == t:
        return 0
    dist = g._bfs(s)
    if dist[t] < 0:
        raise ValueError("states not connected")
    return dist[t]


# -- per-midpoint configuration trees -------------------------------------------


@dataclass
class EdgeTree:
    """The tree on Omega_x whose parent map is the unique shortening flip.

    Roots are the minimal configuration(s); an unconstrained Type 2
    midpoint has twin unit-diagonal roots joined by a link of length 1.
    """

    x: Midpoint
    nodes: list[Edge]
    parent: dict[Edge, Edge]
    roots: tuple[Edge, ...]

    def path_to_root(self, e: Edge) -> list[Edge]:
        path = [e]
        while path[-1] in self.parent:
            path.append(self.parent[path[-1]])
        return path

    def depth(self, e: Edge) -> int:
        return len(self.path_to_root(e)) - 1


class NotACandidateError(ValueError):
    pass


@lru_cache(maxsize=4096)
def edge_tree(x: Midpoint, c: ConstraintSet) -> EdgeTree:
    """Build Omega_x with the shortening-flip parent relation.

    The parent of a non-minimal configuration is the short diagonal of its
    minimal parallelogram; consistency of the parent is guaranteed (a
    constraint crossing it would make the child spanned, hence minimal)."""
    x = Midpoint(x.dv, x.dh)
    nodes = candidate_configs(x, c)
    min_len = nodes[0].length
    roots = tuple(e for e in nodes if e.length == min_len)
    assert 1 <= len(roots) <= 2
    if len(roots) == 2:
        assert all(r.is_unit_diagonal for r in roots), \
            f"tied roots at {x} are not unit diagonals"
    node_set = set(nodes)
    parent: dict[Edge, Edge] = {}
    for e in nodes:
        if e in roots:
            continue
        target = shortening_target(e)
        assert target is not None and target in node_set, \
            f"shortening flip of {e} leaves Omega_x at {x}"
        assert target.length < e.length or (e.is_unit_diagonal and
                                            target.is_unit_diagonal)
        parent[e] = target
    # sanity: every node reaches a root (acyclicity via strict length descent)
    for e in nodes:
        cur = e
        hops = 0
        while cur in parent:
            cur = parent[cur]
            hops += 1
            assert hops <= len(nodes)
        assert cur in roots
    return EdgeTree(x, nodes, parent, roots)


def kappa(tree: EdgeTree, e1: Edge, e2: Edge) -> int:
    """Tree distance between two configurations of the edge at x: the
    minimal number of flips of that edge alone.  Crossing the twin-root
    link counts one flip."""
    node_set = set(tree.nodes)
    if e1 not in node_set or e2 not in node_set:
        raise NotACandidateError(f"{e1 if e1 not in node_set else e2} not in Omega_x")
    if e1 == e2:
        return 0
    path1 = tree.path_to_root(e1)
    pos = {e: i for i, e in enumerate(path1)}
    cur = e2
    j = 0
    while cur not in pos:
        if cur not in tree.parent:
            # reached the other twin root: join across the root link
            return (len(path1) - 1) + 1 + j
        cur = tree.parent[cur]
        j += 1
    return pos[cur] + j


def flip_distance(sigma: Triangulation, tau: Triangulation) -> int:
    """Flip distance between two triangulations with the same grid and
    constraints: the sum over midpoints of the per-midpoint tree distances
    (the indispensable flips)."""
    if sigma.grid != tau.grid or sigma.constraints != tau.constraints:
        raise ValueError("triangulations live on different instances")
    c = sigma.constraints
    total = 0
    for x, e1 in sigma.assignment.items():
        e2 = tau.assignment[x]
        if e1 == e2:
            continue
        total += kappa(edge_tree(x, c), e1, e2)
    return total
