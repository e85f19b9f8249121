"""Enumeration, flip graph, edge trees and the flip-distance formula."""

import random
from itertools import combinations

import pytest

from latticetri.geometry import Edge, GridSpec, LatticePoint, Midpoint, MidpointKind, midpoints
from latticetri.triangulation import (
    ConstraintSet,
    apply_flip,
    flippable,
    ground_state,
)
from latticetri.flipgraph import (
    EnumerationCapExceeded,
    NotACandidateError,
    bfs_distance,
    build_flip_graph,
    edge_tree,
    enumerate_triangulations,
    flip_distance,
    kappa,
)

from test_triangulation import random_constraints

E = Edge.of
P = LatticePoint


# ------------------------------------------------------------ enumeration

def test_counts_known():
    for (m, n), want in [((1, 1), 2), ((1, 2), 6), ((1, 3), 20), ((2, 2), 64),
                         ((2, 3), 852)]:
        assert enumerate_triangulations(ConstraintSet(GridSpec(m, n)),
                                        count_only=True) == want


def test_count_matches_transpose():
    a = enumerate_triangulations(ConstraintSet(GridSpec(2, 3)), count_only=True)
    b = enumerate_triangulations(ConstraintSet(GridSpec(3, 2)), count_only=True)
    assert a == b


def test_lattice_path_count_1xn():
    from math import comb
    for n in range(1, 6):
        assert enumerate_triangulations(ConstraintSet(GridSpec(1, n)),
                                        count_only=True) == comb(2 * n, n)


def test_cap_exceeded():
    with pytest.raises(EnumerationCapExceeded) as exc:
        enumerate_triangulations(ConstraintSet(GridSpec(2, 3)), cap=100)
    assert exc.value.partial_count == 100


def test_states_are_valid_and_unique():
    space = enumerate_triangulations(ConstraintSet(GridSpec(2, 2)))
    assert len(set(space.states)) == len(space)
    for i in range(0, len(space), 7):
        t = space.triangulation(i)  # from_edges validates structure
        assert t.total_length == space.lengths[i]


def test_raster_branching_bound():
    for m, n in [(1, 3), (2, 2), (2, 3), (3, 3)]:
        space = enumerate_triangulations(ConstraintSet(GridSpec(m, n)))
        assert space.max_branching <= 2


def test_enumeration_closed_under_flips_and_bfs_reachable():
    # independent cross-validation on 2x2: BFS over materialized
    # triangulations from the ground state reaches exactly the enumerated set
    c = ConstraintSet(GridSpec(2, 2))
    space = enumerate_triangulations(c)
    start = ground_state(c).triangulation
    seen = {space.find(start)}
    frontier = [start]
    while frontier:
        t = frontier.pop()
        for x in space.free_midpoints:
            prop = flippable(t, x)
            if prop is None:
                continue
            t2 = apply_flip(t.copy(), prop)
            j = space.find(t2)
            if j not in seen:
                seen.add(j)
                frontier.append(t2)
    assert len(seen) == len(space) == 64


def test_constrained_enumeration_respects_constraints():
    rng = random.Random(21)
    c = random_constraints(GridSpec(2, 2), 3, rng)
    space = enumerate_triangulations(c)
    for i in range(len(space)):
        asg = space.state_edges(i)
        for x, e in c.mapping.items():
            assert asg[Midpoint(x.dv, x.dh)] == e


# ------------------------------------------------------------ flip graph

def test_flip_graph_1x1():
    g = build_flip_graph(enumerate_triangulations(ConstraintSet(GridSpec(1, 1))))
    assert len(g.adj) == 2 and g.num_edges == 1 and g.is_connected()


def test_flip_graph_1x2():
    g = build_flip_graph(enumerate_triangulations(ConstraintSet(GridSpec(1, 2))))
    assert len(g.adj) == 6
    assert g.is_connected()
    assert max(g.degree(i) for i in range(6)) <= 3  # interior midpoint count


def test_flip_graph_degree_equals_flippable_count():
    space = enumerate_triangulations(ConstraintSet(GridSpec(2, 2)))
    g = build_flip_graph(space)
    for i in range(0, len(space), 5):
        t = space.triangulation(i)
        nflip = sum(1 for x in space.free_midpoints if flippable(t, x))
        assert g.degree(i) == nflip


def test_flip_graph_diameter_sanity():
    # diameter <= C * mn(m+n) with small C on enumerable instances
    for m, n in [(1, 2), (1, 3), (2, 2)]:
        g = build_flip_graph(enumerate_triangulations(ConstraintSet(GridSpec(m, n))))
        assert g.is_connected()
        assert g.diameter() <= 2 * m * n * (m + n)


def test_flip_graph_connected_random_constraints():
    rng = random.Random(11)
    grids = [GridSpec(2, 2), GridSpec(2, 3), GridSpec(3, 3)]
    for trial in range(100):
        grid = grids[trial % 3]
        c = random_constraints(grid, 4 + trial % 3, rng)
        space = enumerate_triangulations(c, cap=200_000)
        g = build_flip_graph(space)
        assert g.is_connected(), f"disconnected flip graph, trial {trial}"


# ------------------------------------------------------------ edge trees

def test_edge_tree_1x2():
    c = ConstraintSet(GridSpec(1, 2))
    tree = edge_tree(Midpoint(1, 2), c)
    assert tree.roots == (E(0, 1, 1, 1),)
    assert tree.parent[E(0, 0, 1, 2)] == E(0, 1, 1, 1)
    assert tree.parent[E(0, 2, 1, 0)] == E(0, 1, 1, 1)


def test_edge_tree_twin_roots():
    c = ConstraintSet(GridSpec(2, 2))
    tree = edge_tree(Midpoint(1, 1), c)
    assert len(tree.roots) == 2
    assert all(r.is_unit_diagonal for r in tree.roots)


def test_edge_tree_properties_random():
    rng = random.Random(4)
    for _ in range(10):
        c = random_constraints(GridSpec(3, 3), 4, rng)
        for x in midpoints(c.grid):
            if x.kind is MidpointKind.BOUNDARY or c.is_constrained(x):
                continue
            tree = edge_tree(x, c)
            for e in tree.nodes:
                if e in tree.roots:
                    assert e not in tree.parent
                else:
                    assert tree.parent[e].length < e.length


def test_kappa_examples():
    c = ConstraintSet(GridSpec(1, 2))
    tree = edge_tree(Midpoint(1, 2), c)
    root = E(0, 1, 1, 1)
    assert kappa(tree, E(0, 0, 1, 2), root) == 1
    assert kappa(tree, E(0, 0, 1, 2), E(0, 2, 1, 0)) == 2
    assert kappa(tree, root, root) == 0


def test_kappa_twin_roots():
    c = ConstraintSet(GridSpec(1, 1))
    tree = edge_tree(Midpoint(1, 1), c)
    d1, d2 = tree.roots
    assert kappa(tree, d1, d2) == 1


def test_kappa_rejects_non_candidate():
    c = ConstraintSet(GridSpec(1, 1))
    tree = edge_tree(Midpoint(1, 1), c)
    with pytest.raises(NotACandidateError):
        kappa(tree, E(0, 0, 1, 1), E(0, 0, 0, 1))


# ------------------------------------------------------------ flip distance

def all_pairs_check(space, g):
    dists = [g._bfs(s) for s in range(len(space))]
    tris = [space.triangulation(i) for i in range(len(space))]
    for i, j in combinations(range(len(space)), 2):
        assert flip_distance(tris[i], tris[j]) == dists[i][j], (i, j)
    for i in range(len(space)):
        assert flip_distance(tris[i], tris[i]) == 0


def test_flip_distance_equals_bfs_1x3():
    space = enumerate_triangulations(ConstraintSet(GridSpec(1, 3)))
    all_pairs_check(space, build_flip_graph(space))


def test_flip_distance_equals_bfs_2x2():
    space = enumerate_triangulations(ConstraintSet(GridSpec(2, 2)))
    all_pairs_check(space, build_flip_graph(space))


def test_flip_distance_constrained_random():
    rng = random.Random(17)
    for trial in range(8):
        c = random_constraints(GridSpec(2, 2), 2, rng)
        space = enumerate_triangulations(c)
        g = build_flip_graph(space)
        dists = [g._bfs(s) for s in range(len(space))]
        tris = [space.triangulation(i) for i in range(len(space))]
        for i, j in combinations(range(len(space)), 2):
            assert flip_distance(tris[i], tris[j]) == dists[i][j]


def test_flip_distance_metric_properties():
    space = enumerate_triangulations(ConstraintSet(GridSpec(2, 2)))
    rng = random.Random(8)
    tris = {i: space.triangulation(i) for i in rng.sample(range(len(space)), 12)}
    ids = list(tris)
    for a in ids:
        for b in ids:
            d_ab = flip_distance(tris[a], tris[b])
            assert d_ab == flip_distance(tris[b], tris[a])
            assert (d_ab == 0) == (a == b)
    for _ in range(60):
        a, b, c_ = (rng.choice(ids) for _ in range(3))
        assert (flip_distance(tris[a], tris[c_])
                <= flip_distance(tris[a], tris[b]) + flip_distance(tris[b], tris[c_]))


def test_bfs_distance_examples():
    space = enumerate_triangulations(ConstraintSet(GridSpec(1, 2)))
    g = build_flip_graph(space)
    assert bfs_distance(g, 3, 3) == 0
    i, j = next(iter(g.edge_labels))
    assert bfs_distance(g, i, j) == 1
    # extremes on 1x2: the two triangulations containing the length-3 edges
    longs = [k for k in range(len(space)) if space.lengths[k] == max(space.lengths)]
    a, b = longs
    ta, tb = space.triangulation(a), space.triangulation(b)
    assert bfs_distance(g, a, b) == flip_distance(ta, tb)
