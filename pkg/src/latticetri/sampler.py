"""Heat-bath flip dynamics: single chains, coupled chains, exact coupling
contraction checks, coalescence and hitting-time experiments.

Two interchangeable backends drive single chains: a pure-Python reference
operating on the Triangulation structure and a numba kernel on flat arrays.
Both consume the identical xoshiro256** stream, so trajectories agree
bit-for-bit between backends for the same seed.

Coupled chains share the update site and the uniform draw; each chain
resamples its edge from the heat-bath conditional with candidates in
canonical order (inverse-CDF coupling).  At a discrepancy midpoint both
chains see the same two candidates, so they coalesce there with
probability one, which is the coupling the contraction checker certifies.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .geometry import (
    Edge,
    EdgeOrientation,
    GridSpec,
    LatticePoint,
    Midpoint,
    midpoints,
    orientation,
)
from .triangulation import (
    ConstraintSet,
    FlipProposal,
    Triangulation,
    apply_flip,
    complete,
    flippable,
    ground_state,
    heat_bath_prob,
)
from .flipgraph import StateSpace, build_flip_graph
from .gibbs import GibbsParams, MidpointPolicy, active_midpoints

RNG_ALGORITHM = "xoshiro256** / splitmix64"
_M64 = (1 << 64) - 1


class Xoshiro256:
    """Pure-Python mirror of the kernel RNG: identical stream per seed."""

    __slots__ = ("s",)

    def __init__(self, seed: int, stream: int = 0):
        self.s = []
        z = (seed + stream * 0x9E3779B97F4A7C15) & _M64
        for _ in range(4):
            z = (z + 0x9E3779B97F4A7C15) & _M64
            w = z
            w = ((w ^ (w >> 30)) * 0xBF58476D1CE4E5B9) & _M64
            w = ((w ^ (w >> 27)) * 0x94D049BB133111EB) & _M64
            self.s.append(w ^ (w >> 31))

    def next_u64(self) -> int:
        s = self.s
        x = (s[1] * 5) & _M64
        result = (((x << 7) | (x >> 57)) & _M64) * 9 & _M64
        t = (s[1] << 17) & _M64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = ((s[3] << 45) | (s[3] >> 19)) & _M64
        return result

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def randrange(self, n: int) -> int:
        return self.next_u64() % n


def derive_stream_seed(seed: int, stream: int) -> int:
    """Independent stream seeds for parallel replicas."""
    return (seed + stream * 0x9E3779B97F4A7C15) & _M64


# ---------------------------------------------------------------------------
# chain state (reference implementation)
# ---------------------------------------------------------------------------


@dataclass
class ChainState:
    """One running Glauber chain."""

    triangulation: Triangulation
    params: GibbsParams
    policy: MidpointPolicy
    rng: Xoshiro256
    active: list[Midpoint]
    steps: int = 0
    flips: int = 0

    @classmethod
    def create(cls, t: Triangulation, params: GibbsParams, seed: int,
               policy: MidpointPolicy = MidpointPolicy.FULL) -> "ChainState":
        active = active_midpoints(t.grid, t.constraints, policy)
        return cls(t.copy(), params, policy, Xoshiro256(seed), active)


def step(chain: ChainState) -> ChainState:
    """One heat-bath update: pick an active midpoint uniformly; if the edge
    is flippable, accept the flip with probability
    lam^new / (lam^new + lam^cur)."""
    x = chain.active[chain.rng.randrange(len(chain.active))]
    chain.steps += 1
    prop = flippable(chain.triangulation, x)
    if prop is None:
        return chain
    acc = heat_bath_prob(float(chain.params.lam), prop.current.length,
                         prop.proposed.length)
    if chain.rng.random() < acc:
        apply_flip(chain.triangulation, prop)
        chain.flips += 1
    return chain


# ---------------------------------------------------------------------------
# fast runs (numba kernel) with python fallback
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    final: Triangulation
    steps: int
    flips: int
    seed: int
    backend: str
    policy: MidpointPolicy
    lam: float
    record_every: int
    rec_steps: np.ndarray      # step index at each record
    rec_length: np.ndarray
    rec_acceptance: np.ndarray  # flips-so-far / steps-so-far
    rec_b_count: np.ndarray
    elapsed: float
    hit_step: Optional[int] = None
    rec_snapshots: Optional[np.ndarray] = None  # (n_rec, n_midpoints, 4)

    @property
    def throughput(self) -> float:
        return self.steps / self.elapsed if self.elapsed > 0 else float("inf")

    @property
    def mean_edge_length(self) -> float:
        return self.final.total_length / self.final.grid.edge_count


def _encode_arrays(t: Triangulation, policy: MidpointPolicy):
    grid = t.grid
    mids = midpoints(grid)
    index = {Midpoint(x.dv, x.dh): i for i, x in enumerate(mids)}
    m = len(mids)
    pv = np.empty(m, np.int64)
    ph = np.empty(m, np.int64)
    qv = np.empty(m, np.int64)
    qh = np.empty(m, np.int64)
    t1v = np.full(m, -1, np.int64)
    t1h = np.full(m, -1, np.int64)
    t2v = np.full(m, -1, np.int64)
    t2h = np.full(m, -1, np.int64)
    midindex = np.full((2 * grid.m + 1, 2 * grid.n + 1), -1, np.int64)
    for x, i in index.items():
        midindex[x.dv, x.dh] = i
    for x, e in t.assignment.items():
        i = index[Midpoint(x.dv, x.dh)]
        pv[i], ph[i], qv[i], qh[i] = e.p.v, e.p.h, e.q.v, e.q.h
        faces = t.adjacency[e]
        thirds = []
        for f in faces:
            (r,) = [pt for pt in f if pt != e.p and pt != e.q]
            thirds.append(r)
        t1v[i], t1h[i] = thirds[0].v, thirds[0].h
        if len(thirds) > 1:
            t2v[i], t2h[i] = thirds[1].v, thirds[1].h
    gs = ground_state(t.constraints)
    glen = np.empty(m, np.int64)
    for x, i in index.items():
        glen[i] = gs.min_length[Midpoint(x.dv, x.dh)]
    active = np.array(sorted(index[Midpoint(x.dv, x.dh)] for x in
                             active_midpoints(grid, t.constraints, policy)),
                      dtype=np.int64)
    return index, pv, ph, qv, qh, t1v, t1h, t2v, t2h, midindex, glen, active


def _decode_triangulation(grid: GridSpec, constraints: ConstraintSet,
                          pv, ph, qv, qh) -> Triangulation:
    edges = [Edge(LatticePoint(int(pv[i]), int(ph[i])),
                  LatticePoint(int(qv[i]), int(qh[i]))) for i in range(len(pv))]
    return Triangulation.from_edges(grid, edges, constraints=constraints)


def _pow_table(lam: float, grid: GridSpec):
    span = 2 * (grid.m + grid.n)
    diffs = np.arange(-span, span + 1, dtype=np.float64)
    table = 1.0 / (1.0 + lam ** diffs)
    return table, span


def run(t0: Triangulation, params: GibbsParams, steps: int, seed: int,
        record_every: int = 0, policy: MidpointPolicy = MidpointPolicy.FULL,
        backend: str = "auto", watch: Optional[Midpoint] = None,
        stop_on_nonpositive: bool = False,
        record_snapshots: bool = False) -> RunResult:
    """Run the dynamics for `steps` attempted flips.  Deterministic given
    the seed; the numba and python backends produce identical trajectories.

    With `watch` and stop_on_nonpositive=True the run halts the first time
    the watched edge becomes non-positively oriented (hitting time)."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if backend == "auto":
        backend = "numba"
    lam = float(params.lam)
    if backend == "numba":
        from . import _kernel
        (index, pv, ph, qv, qh, t1v, t1h, t2v, t2h, midindex, glen,
         active) = _encode_arrays(t0, policy)
        table, offset = _pow_table(lam, t0.grid)
        from .structure import classify
        b0 = len(classify(t0).b_triangles)
        n_rec = steps // record_every if record_every > 0 else 0
        rec_len = np.zeros(n_rec, np.int64)
        rec_flips = np.zeros(n_rec, np.int64)
        rec_b = np.zeros(n_rec, np.int64)
        snaps = np.zeros((n_rec if record_snapshots else 0, len(pv), 4), np.int64)
        rng_state = _kernel.seed_state(np.uint64(seed % (1 << 64)))
        watch_idx = index[Midpoint(watch.dv, watch.dh)] if watch is not None else -1
        t_start = time.perf_counter()
        done, flips, total_len, b_count, hit = _kernel.run_chain(
            pv, ph, qv, qh, t1v, t1h, t2v, t2h, midindex, glen, active,
            table, offset, steps, rng_state, t0.total_length, b0,
            record_every, rec_len, rec_flips, rec_b, snaps,
            watch_idx, stop_on_nonpositive)
        elapsed = time.perf_counter() - t_start
        final = _decode_triangulation(t0.grid, t0.constraints, pv, ph, qv, qh)
        assert final.total_length == total_len
        n_got = min(n_rec, (done // record_every) if record_every > 0 else 0)
        rec_steps = (np.arange(1, n_got + 1) * record_every if record_every > 0
                     else np.zeros(0, np.int64))
        rec_acc = (rec_flips[:n_got] / np.maximum(rec_steps, 1)
                   if record_every > 0 else np.zeros(0))
        return RunResult(final, done, flips, seed, "numba", policy, lam,
                         record_every, rec_steps, rec_len[:n_got], rec_acc,
                         rec_b[:n_got], elapsed,
                         hit_step=int(hit) if hit >= 0 else None,
                         rec_snapshots=snaps[:n_got] if record_snapshots else None)
    if backend != "python":
        raise ValueError(f"unknown backend {backend!r}")
    chain = ChainState.create(t0, params, seed, policy)
    from .structure import classify
    mids_order = [Midpoint(x.dv, x.dh) for x in midpoints(t0.grid)]
    rec_steps, rec_len, rec_acc, rec_b, snaps = [], [], [], [], []
    hit = None
    t_start = time.perf_counter()
    for s in range(1, steps + 1):
        step(chain)
        if (watch is not None and stop_on_nonpositive
                and orientation(chain.triangulation.assignment[Midpoint(watch.dv, watch.dh)])
                is not EdgeOrientation.POSITIVE):
            hit = s
            break
        if record_every > 0 and s % record_every == 0:
            rec_steps.append(s)
            rec_len.append(chain.triangulation.total_length)
            rec_acc.append(chain.flips / s)
            rec_b.append(len(classify(chain.triangulation).b_triangles))
            if record_snapshots:
                row = [(e.p.v, e.p.h, e.q.v, e.q.h)
                       for e in (chain.triangulation.assignment[x] for x in mids_order)]
                snaps.append(row)
    elapsed = time.perf_counter() - t_start
    return RunResult(chain.triangulation, chain.steps, chain.flips, seed,
                     "python", policy, lam, record_every,
                     np.array(rec_steps), np.array(rec_len),
                     np.array(rec_acc), np.array(rec_b), elapsed,
                     hit_step=hit,
                     rec_snapshots=np.array(snaps, np.int64) if record_snapshots else None)


def snapshots_to_state_ids(result: RunResult, space: StateSpace) -> list[int]:
    """Map recorded snapshots to state-space indices (for empirical
    distribution checks against exact_distribution)."""
    if result.rec_snapshots is None:
        raise ValueError("run() was not asked to record snapshots")
    mids_order = [Midpoint(x.dv, x.dh) for x in midpoints(result.final.grid)]
    out = []
    for row in result.rec_snapshots:
        asg = {}
        for k, x in enumerate(mids_order):
            asg[x] = Edge(LatticePoint(int(row[k, 0]), int(row[k, 1])),
                          LatticePoint(int(row[k, 2]), int(row[k, 3])))
        out.append(space.index[space.encode_assignment(asg)])
    return out


# ---------------------------------------------------------------------------
# coupling
# ---------------------------------------------------------------------------


def _resample_options(t: Triangulation, x: Midpoint, lam: float):
    """The heat-bath conditional at x as (candidates in canonical order,
    probability of the first).  Unflippable edges are a point mass."""
    prop = flippable(t, x)
    if prop is None:
        e = t.assignment[Midpoint(x.dv, x.dh)]
        return (e, e), 1.0
    a, b = sorted((prop.current, prop.proposed), key=lambda e: (e.length, e.key()))
    p_a = heat_bath_prob(lam, b.length, a.length)  # prob of landing on a
    return (a, b), p_a


@dataclass
class CoupledPair:
    first: ChainState
    second: ChainState
    shared_rng: Xoshiro256
    discrepancies: int = field(init=False)

    def __post_init__(self):
        self.discrepancies = sum(
            1 for x, e in self.first.triangulation.assignment.items()
            if self.second.triangulation.assignment[x] != e)

    @classmethod
    def create(cls, t1: Triangulation, t2: Triangulation, params: GibbsParams,
               seed: int, policy: MidpointPolicy = MidpointPolicy.FULL):
        if t1.grid != t2.grid or t1.constraints != t2.constraints:
            raise ValueError("coupled chains must share grid and constraints")
        a = ChainState.create(t1, params, 0, policy)
        b = ChainState.create(t2, params, 0, policy)
        return cls(a, b, Xoshiro256(seed))

    @property
    def coalesced(self) -> bool:
        return self.discrepancies == 0


def coupled_step(pair: CoupledPair) -> CoupledPair:
    """One shared update: same midpoint, same uniform, each chain resamples
    its edge from its own heat-bath conditional (canonical order)."""
    chain1, chain2 = pair.first, pair.second
    active = chain1.active
    x = active[pair.shared_rng.randrange(len(active))]
    u = pair.shared_rng.random()
    lam = float(chain1.params.lam)
    before_equal = (chain1.triangulation.assignment[Midpoint(x.dv, x.dh)]
                    == chain2.triangulation.assignment[Midpoint(x.dv, x.dh)])
    for chain in (chain1, chain2):
        (a, b), p_a = _resample_options(chain.triangulation, x, lam)
        new = a if u < p_a else b
        cur = chain.triangulation.assignment[Midpoint(x.dv, x.dh)]
        chain.steps += 1
        if new != cur:
            apply_flip(chain.triangulation,
                       FlipProposal(Midpoint(x.dv, x.dh), cur, new))
            chain.flips += 1
    after_equal = (chain1.triangulation.assignment[Midpoint(x.dv, x.dh)]
                   == chain2.triangulation.assignment[Midpoint(x.dv, x.dh)])
    pair.discrepancies += (not after_equal) - (not before_equal)
    return pair


def coalescence_time(t1: Triangulation, t2: Triangulation, params: GibbsParams,
                     seed: int, cap: int,
                     policy: MidpointPolicy = MidpointPolicy.FULL) -> Optional[int]:
    """Coupled steps until the two chains coincide; None if cap exceeded."""
    pair = CoupledPair.create(t1, t2, params, seed, policy)
    if pair.coalesced:
        return 0
    for t in range(1, cap + 1):
        coupled_step(pair)
        if pair.coalesced:
            return t
    return None


# ---------------------------------------------------------------------------
# exact path-coupling contraction checker
# ---------------------------------------------------------------------------

Number = Union[Fraction, float]


@dataclass
class CouplingReport:
    """Exact expected one-step coupled distances over every flip-adjacent
    pair, compared against the contraction bound 1 - 1/(2|Lambda|)."""

    lam: Number
    alpha: Number
    policy: MidpointPolicy
    n_active: int
    metric: str                       # "l1" or "horizontal"
    n_pairs: int
    max_ratio: Number
    bound: Number
    satisfied: bool
    worst_pair: Optional[tuple[int, int]]
    delta: Number                     # (1 - max_ratio) * n_active

    def __str__(self):
        ok = "holds" if self.satisfied else "FAILS"
        return (f"coupling contraction {ok}: max E[d']/d = {float(self.max_ratio):.6f}"
                f" vs bound {float(self.bound):.6f} over {self.n_pairs} pairs"
                f" (|Lambda|={self.n_active}, metric={self.metric})")


def _edge_measure(e: Edge, metric: str) -> int:
    if metric == "horizontal":
        return abs(e.delta[1])
    return e.length


def _adjacent_delta(alpha: Fraction, l1: int, l2: int) -> Fraction:
    if l1 == l2:
        return alpha * alpha - 1
    return abs(alpha ** l1 - alpha ** l2)


def _all_pairs_delta(space: StateSpace, graph, alpha: Fraction, metric: str):
    """Weighted shortest-path extension of the adjacent-pair metric, by
    Dijkstra from every node (exact Fraction weights)."""
    n = len(space)
    weight: dict[tuple[int, int], Fraction] = {}
    for (i, j), x in graph.edge_labels.items():
        l1 = _edge_measure(space.edge_in_state(i, x), metric)
        l2 = _edge_measure(space.edge_in_state(j, x), metric)
        w = _adjacent_delta(alpha, l1, l2)
        weight[(i, j)] = weight[(j, i)] = w
    dist = [[None] * n for _ in range(n)]
    for s in range(n):
        d = [None] * n
        d[s] = Fraction(0)
        pq = [(Fraction(0), s)]
        while pq:
            du, u = heapq.heappop(pq)
            if d[u] is not None and du > d[u]:
                continue
            for v in graph.adj[u]:
                alt = du + weight[(u, v)]
                if d[v] is None or alt < d[v]:
                    d[v] = alt
                    heapq.heappush(pq, (alt, v))
        dist[s] = d
    return dist


def _exact_resample(space: StateSpace, i: int, slot: int, lam: Fraction):
    """Heat-bath conditional at a free slot of state i: ((id_a, id_b), p_a)
    with candidates in canonical order, or None when unflippable."""
    x = space.free_midpoints[slot]
    cands = space.candidates[x]
    cur = space.states[i][slot]
    other = None
    for ci in range(len(cands)):
        if ci == cur:
            continue
        j = space.neighbor(i, slot, ci)
        if j is not None:
            assert other is None, "more than one flip target at a midpoint"
            other = ci
    if other is None:
        return None
    a, b = (cur, other) if cur < other else (other, cur)  # candidate lists are canonical
    p_a = Fraction(1, 1) / (1 + lam ** (cands[b].length - cands[a].length))
    ia = i if a == cur else space.neighbor(i, slot, a)
    ib = i if b == cur else space.neighbor(i, slot, b)
    return (ia, ib), p_a


def path_coupling_check(space: StateSpace, params: GibbsParams, alpha: Number,
                        policy: MidpointPolicy = MidpointPolicy.FULL,
                        metric: str = "l1") -> CouplingReport:
    """For every flip-adjacent pair, the exact expected one-step distance
    under the shared-site shared-uniform coupling, as a ratio to the pair's
    distance.  All arithmetic is rational when lam and alpha are."""
    lam = Fraction(params.lam) if not isinstance(params.lam, Fraction) else params.lam
    alpha_f = Fraction(alpha)
    graph = build_flip_graph(space)
    dist = _all_pairs_delta(space, graph, alpha_f, metric)
    active = active_midpoints(space.grid, space.constraints, policy)
    n_act = len(active)
    active_slots = []
    boundary_actives = 0
    for x in active:
        s = space.slot_of.get(Midpoint(x.dv, x.dh))
        if s is None:
            boundary_actives += 1
        else:
            active_slots.append(s)
    max_ratio = None
    worst = None
    n_pairs = 0
    for (i, j), x in graph.edge_labels.items():
        n_pairs += 1
        d_ij = dist[i][j]
        total = Fraction(boundary_actives) * d_ij  # unflippable sites keep the pair
        for slot in active_slots:
            ri = _exact_resample(space, i, slot, lam)
            rj = _exact_resample(space, j, slot, lam)
            if ri is None and rj is None:
                total += d_ij
                continue
            outcomes_i = ri if ri is not None else ((i, i), Fraction(1))
            outcomes_j = rj if rj is not None else ((j, j), Fraction(1))
            (ia, ib), pa_i = outcomes_i
            (ja, jb), pa_j = outcomes_j
            lo, hi = min(pa_i, pa_j), max(pa_i, pa_j)
            # U < lo: both land on their a; lo <= U < hi: exactly one does
            total += lo * dist[ia][ja]
            mid_i, mid_j = (ib, ja) if pa_i < pa_j else (ia, jb)
            total += (hi - lo) * dist[mid_i][mid_j]
            total += (1 - hi) * dist[ib][jb]
        expected = total / n_act
        ratio = expected / d_ij
        if max_ratio is None or ratio > max_ratio:
            max_ratio = ratio
            worst = (i, j)
    bound = 1 - Fraction(1, 2 * n_act)
    return CouplingReport(lam, alpha_f, policy, n_act, metric, n_pairs,
                          max_ratio, bound, max_ratio is not None and max_ratio <= bound,
                          worst, (1 - max_ratio) * n_act if max_ratio is not None else Fraction(0))


def path_coupling_check_1d(space: StateSpace, params: GibbsParams, alpha: Number,
                           policy: MidpointPolicy = MidpointPolicy.FULL) -> CouplingReport:
    """The 1D variant: edge length means horizontal length, so the adjacent
    distance is alpha^(l+1) * (1 - alpha^-2) for an (l-1, l+1) pair and
    alpha^2 - 1 for opposite unit diagonals."""
    if space.grid.m != 1:
        raise ValueError("1D metric requires a 1 x n grid")
    return path_coupling_check(space, params, alpha, policy, metric="horizontal")


def one_d_contraction_criterion(lam: float, alpha: float) -> tuple[float, bool]:
    """max(2*alpha*lam^2/(1+lam^2), 2/(alpha*(1+lam^2))) and whether it is
    below 1; at lam = 1 no alpha achieves contraction."""
    value = max(2 * alpha * lam * lam / (1 + lam * lam),
                2 / (alpha * (1 + lam * lam)))
    return value, value < 1


# ---------------------------------------------------------------------------
# hitting time
# ---------------------------------------------------------------------------


def hitting_time_experiment(grid: GridSpec, params: GibbsParams, seed: int,
                            cap: int,
                            policy: MidpointPolicy = MidpointPolicy.FULL,
                            backend: str = "auto") -> Optional[int]:
    """Start from a completion of the single long edge (0,0)-(1,n) at
    x = (1/2, n/2), release it, and run until the edge at x is no longer
    positively oriented.  Returns the hitting step, or None at the cap."""
    x = Midpoint(1, grid.n)
    long_edge = Edge(LatticePoint(0, 0), LatticePoint(1, grid.n))
    start = complete(ConstraintSet(grid, [long_edge]))
    released = Triangulation.from_edges(grid, start.assignment.values(),
                                        constraints=ConstraintSet(grid))
    res = run(released, params, cap, seed, policy=policy, backend=backend,
              watch=x, stop_on_nonpositive=True)
    return res.hit_step
