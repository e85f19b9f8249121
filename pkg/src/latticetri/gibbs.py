"""Exact distributional computations on enumerable state spaces.

Weights lambda^{|sigma|} are handled in the log domain for floating point
work; when lambda is given as a Fraction, partition functions, transition
probabilities and detailed-balance residuals are computed in exact rational
arithmetic (residual exactly zero, not just small).
"""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Optional, Union

import numpy as np

from .geometry import (
    Edge,
    EdgeOrientation,
    GridSpec,
    LatticePoint,
    Midpoint,
    MidpointKind,
    cross,
    midpoints,
    orientation,
)
from .triangulation import (
    ConstraintSet,
    Triangle,
    ground_length,
    heat_bath_prob,
    make_triangle,
)
from .flipgraph import StateSpace
from .structure import region_area, region_intersection_area

Lam = Union[float, Fraction]


@dataclass(frozen=True)
class GibbsParams:
    """Model parameter: weight lambda^{|sigma|}.  Pass a Fraction to enable
    exact rational computations downstream."""

    lam: Lam

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")

    @property
    def exact(self) -> bool:
        return isinstance(self.lam, Fraction)


class MidpointPolicy(Enum):
    """Which midpoints the dynamics proposes: the full half-integer lattice
    minus constraint midpoints (the default; boundary midpoints are proposed
    but never flippable) or interior non-constraint midpoints only."""

    FULL = "full"
    INTERIOR = "interior"


def active_midpoints(grid: GridSpec, constraints: ConstraintSet,
                     policy: MidpointPolicy) -> list[Midpoint]:
    out = []
    for x in midpoints(grid):
        if constraints.is_constrained(x):
            continue
        if policy is MidpointPolicy.INTERIOR and x.kind is MidpointKind.BOUNDARY:
            continue
        out.append(x)
    return out


# ---------------------------------------------------------------------------
# exact distribution
# ---------------------------------------------------------------------------


class ExactDistribution:
    """The Gibbs distribution mu(sigma) = lambda^{|sigma|} / Z over an
    enumerated state space (optionally restricted to a support set)."""

    def __init__(self, space: StateSpace, params: GibbsParams,
                 support: Optional[np.ndarray] = None):
        self.space = space
        self.params = params
        self.lengths = np.asarray(space.lengths, dtype=np.int64)
        self.support = support  # boolean mask or None for full support
        logw = self.lengths * math.log(float(params.lam))
        if support is not None:
            if not support.any():
                raise ValueError("empty support")
            logw = np.where(support, logw, -np.inf)
        m = logw.max()
        w = np.exp(logw - m)
        self.log_z = m + math.log(w.sum())
        self.probs = w / w.sum()
        assert abs(self.probs.sum() - 1.0) < 1e-12

    def __len__(self):
        return len(self.space)

    def prob(self, i: int) -> float:
        return float(self.probs[i])

    # -- exact rational side -------------------------------------------------

    def weight_exact(self, i: int) -> Fraction:
        if not self.params.exact:
            raise ValueError("exact weights need a Fraction lambda")
        if self.support is not None and not self.support[i]:
            return Fraction(0)
        return Fraction(self.params.lam) ** int(self.lengths[i])

    @property
    def z_exact(self) -> Fraction:
        if not hasattr(self, "_z_exact"):
            lam = Fraction(self.params.lam)
            # group by length so the exponentiation count stays small
            counts: dict[int, int] = defaultdict(int)
            for i, length in enumerate(self.lengths):
                if self.support is None or self.support[i]:
                    counts[int(length)] += 1
            self._z_exact = sum((lam ** l) * k for l, k in counts.items())
        return self._z_exact

    def prob_exact(self, i: int) -> Fraction:
        return self.weight_exact(i) / self.z_exact


def exact_distribution(space: StateSpace, params: GibbsParams) -> ExactDistribution:
    return ExactDistribution(space, params)


def conditional(d: ExactDistribution, x: Midpoint, e: Edge) -> ExactDistribution:
    """mu conditioned on the edge at x equalling e."""
    space = d.space
    x = Midpoint(x.dv, x.dh)
    slot = space.slot_of.get(x)
    if slot is None:
        # forced or constrained midpoint: conditioning is trivial or empty
        fixed = space.edge_in_state(0, x)
        if fixed == e:
            return ExactDistribution(space, d.params, d.support)
        raise ValueError(f"no state has edge {e} at {x}")
    try:
        ci = space.candidates[space.free_midpoints[slot]].index(e)
    except ValueError:
        raise ValueError(f"no state has edge {e} at {x}") from None
    mask = np.fromiter((s[slot] == ci for s in space.states), dtype=bool,
                       count=len(space))
    if d.support is not None:
        mask &= d.support
    if not mask.any():
        raise ValueError(f"no state has edge {e} at {x}")
    return ExactDistribution(space, d.params, mask)


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())


def tv_marginal(d1: ExactDistribution, d2: ExactDistribution,
                a_set: Iterable[Midpoint]) -> float:
    """Total variation distance between the joint marginals of the edges at
    the midpoints in a_set."""
    if d1.space is not d2.space:
        raise ValueError("distributions live on different state spaces")
    space = d1.space
    slots = []
    for x in a_set:
        s = space.slot_of.get(Midpoint(x.dv, x.dh))
        if s is not None:
            slots.append(s)
    slots = sorted(set(slots))
    acc1: dict[bytes, float] = defaultdict(float)
    acc2: dict[bytes, float] = defaultdict(float)
    for i, enc in enumerate(space.states):
        key = bytes(enc[s] for s in slots)
        acc1[key] += d1.probs[i]
        acc2[key] += d2.probs[i]
    keys = set(acc1) | set(acc2)
    return 0.5 * sum(abs(acc1[k] - acc2[k]) for k in keys)


# ---------------------------------------------------------------------------
# tails: length excess and phi_x
# ---------------------------------------------------------------------------


@dataclass
class TailLaws:
    """Exact tail laws at a midpoint: k -> mu(|sigma_x| = |ground_x| + k)
    and k -> mu(phi_x = k)."""

    length_tail: dict[int, float]
    phi_tail: dict[int, float]

    def as_pairs(self) -> dict[int, tuple[float, float]]:
        ks = sorted(set(self.length_tail) | set(self.phi_tail))
        return {k: (self.length_tail.get(k, 0.0), self.phi_tail.get(k, 0.0))
                for k in ks}


def _phi_in_state(space: StateSpace, i: int, x: Midpoint,
                  min_len: dict[Midpoint, int]) -> int:
    """phi_x for one encoded state without building a full Triangulation:
    local BFS over the B-component at x."""
    asg = space.state_edges(i)
    nbr: dict[LatticePoint, set[LatticePoint]] = defaultdict(set)
    for e in asg.values():
        nbr[e.p].add(e.q)
        nbr[e.q].add(e.p)

    def faces_of(e: Edge) -> list[Triangle]:
        return [make_triangle(e.p, e.q, r)
                for r in nbr[e.p] & nbr[e.q] if abs(cross(e.p, e.q, r)) == 1]

    ground: dict[Edge, bool] = {}
    for mid, e in asg.items():
        ground[e] = e.length == min_len[mid]

    def is_b(t: Triangle) -> bool:
        return not all(ground[Edge(t[a], t[b])]
                       for a, b in ((0, 1), (0, 2), (1, 2)))

    e0 = asg[Midpoint(x.dv, x.dh)]
    comp: set[Triangle] = set()
    dq = deque(f for f in faces_of(e0) if is_b(f))
    comp.update(dq)
    while dq:
        t = dq.popleft()
        for a, b in ((0, 1), (0, 2), (1, 2)):
            e = Edge(t[a], t[b])
            for f in faces_of(e):
                if f not in comp and is_b(f):
                    comp.add(f)
                    dq.append(f)
    if not comp:
        return 0
    edge_count: dict[Edge, int] = defaultdict(int)
    for t in comp:
        for a, b in ((0, 1), (0, 2), (1, 2)):
            edge_count[Edge(t[a], t[b])] += 1
    total = 0
    for e, k in edge_count.items():
        if k == 2:
            total += e.length - min_len[e.midpoint]
    return total


def tail_laws(d: ExactDistribution, x: Midpoint) -> TailLaws:
    space = d.space
    c = space.constraints
    x = Midpoint(x.dv, x.dh)
    gl = ground_length(c, x)
    min_len = {Midpoint(m.dv, m.dh): ground_length(c, m)
               for m in midpoints(space.grid)}
    length_tail: dict[int, float] = defaultdict(float)
    phi_tail: dict[int, float] = defaultdict(float)
    for i in range(len(space)):
        p = float(d.probs[i])
        e = space.edge_in_state(i, x)
        length_tail[e.length - gl] += p
        phi_tail[_phi_in_state(space, i, x, min_len)] += p
    return TailLaws(dict(length_tail), dict(phi_tail))


def set_inclusion_prob(d: ExactDistribution, v_triangles: Iterable[Triangle]) -> float:
    """Exact mu(V subset of S), where S is the union of B-triangles and V a
    union of ground-state triangles; inclusion is decided as regions."""
    from .structure import classify

    v = list(v_triangles)
    if not v:
        return 1.0
    v_area = region_area(v)
    total = 0.0
    for i in range(len(d.space)):
        p = float(d.probs[i])
        if p == 0.0:
            continue
        t = d.space.triangulation(i)
        dec = classify(t, d.space.constraints)
        if region_intersection_area(dec.b_triangles, v) == v_area:
            total += p
    return total


# ---------------------------------------------------------------------------
# transition matrix and exact mixing
# ---------------------------------------------------------------------------

MAX_DENSE_STATES = 5000


@dataclass
class TransitionMatrix:
    """Row-stochastic heat-bath kernel over an enumerated state space."""

    space: StateSpace
    params: GibbsParams
    policy: MidpointPolicy
    n_active: int
    p: np.ndarray
    moves: list[tuple[int, int, int, int]]  # (i, j, len_i, len_j), i < j

    def reversibility_residual(self, d: ExactDistribution) -> float:
        mu = d.probs
        return float(max((abs(mu[i] * self.p[i, j] - mu[j] * self.p[j, i])
                          for i, j, _, _ in self.moves), default=0.0))

    def stationarity_residual(self, d: ExactDistribution) -> float:
        mu = d.probs
        return float(np.abs(mu @ self.p - mu).max())

    def reversibility_residual_exact(self, d: ExactDistribution) -> Fraction:
        """max |mu_i P_ij - mu_j P_ji| in exact rational arithmetic."""
        lam = Fraction(self.params.lam)
        z = d.z_exact
        n = Fraction(1, self.n_active)
        worst = Fraction(0)
        for i, j, li, lj in self.moves:
            mu_i = lam ** int(self.space.lengths[i]) / z
            mu_j = lam ** int(self.space.lengths[j]) / z
            pij = n * heat_bath_prob(lam, li, lj)
            pji = n * heat_bath_prob(lam, lj, li)
            worst = max(worst, abs(mu_i * pij - mu_j * pji))
        return worst

    def stationarity_residual_exact(self, d: ExactDistribution) -> Fraction:
        lam = Fraction(self.params.lam)
        z = d.z_exact
        n = Fraction(1, self.n_active)
        inflow: dict[int, Fraction] = defaultdict(Fraction)
        outmass: dict[int, Fraction] = defaultdict(Fraction)
        mu = {i: lam ** int(self.space.lengths[i]) / z for i in range(len(self.space))}
        for i, j, li, lj in self.moves:
            pij = n * heat_bath_prob(lam, li, lj)
            pji = n * heat_bath_prob(lam, lj, li)
            inflow[j] += mu[i] * pij
            inflow[i] += mu[j] * pji
            outmass[i] += pij
            outmass[j] += pji
        worst = Fraction(0)
        for i in range(len(self.space)):
            total = inflow[i] + mu[i] * (1 - outmass[i])
            worst = max(worst, abs(total - mu[i]))
        return worst


def transition_matrix(space: StateSpace, params: GibbsParams,
                      policy: MidpointPolicy = MidpointPolicy.FULL) -> TransitionMatrix:
    s = len(space)
    if s > MAX_DENSE_STATES:
        raise ValueError(f"{s} states exceed the dense matrix cap {MAX_DENSE_STATES}")
    active = active_midpoints(space.grid, space.constraints, policy)
    n = len(active)
    lam = float(params.lam)
    p = np.zeros((s, s))
    moves = []
    for i, enc in enumerate(space.states):
        for k, x in enumerate(space.free_midpoints):
            cur = enc[k]
            cands = space.candidates[x]
            for ci in range(len(cands)):
                if ci == cur:
                    continue
                j = space.neighbor(i, k, ci)
                if j is None:
                    continue
                li, lj = cands[cur].length, cands[ci].length
                p[i, j] = heat_bath_prob(lam, li, lj) / n
                if j > i:
                    moves.append((i, j, li, lj))
    np.fill_diagonal(p, 0.0)
    np.fill_diagonal(p, 1.0 - p.sum(axis=1))
    assert np.all(p.diagonal() > -1e-15)
    return TransitionMatrix(space, params, policy, n, p, moves)


@dataclass
class MixingReport:
    """Least t with worst-start total variation distance <= 1/4."""

    t_mix: int
    threshold: float
    policy: MidpointPolicy
    n_active: int
    tv_curve: list[tuple[int, float]]  # (t, worst-start TV), monotone in t
    relaxation_time: Optional[float] = None


def _worst_tv(dist_rows: np.ndarray, mu: np.ndarray) -> float:
    return 0.5 * float(np.abs(dist_rows - mu[None, :]).sum(axis=1).max())


def mixing_time_exact(pm: TransitionMatrix, d: ExactDistribution,
                      threshold: float = 0.25,
                      direct_cap: int = 4096) -> MixingReport:
    """Exact mixing time by iterating all start distributions at once.

    Steps one multiplication at a time up to `direct_cap` (recording the
    full TV curve); beyond that, doubles the power and binary-searches the
    crossing, which is valid because worst-start TV is non-increasing."""
    mu = d.probs
    p = pm.p
    curve = []
    rows = np.eye(len(mu))
    t = 0
    tv = _worst_tv(rows, mu)
    curve.append((0, tv))
    while tv > threshold and t < direct_cap:
        rows = rows @ p
        t += 1
        tv = _worst_tv(rows, mu)
        curve.append((t, tv))
    if tv <= threshold:
        report_curve = curve if len(curve) <= 600 else curve[::len(curve) // 300 + 1] + [curve[-1]]
        return MixingReport(t, threshold, pm.policy, pm.n_active, report_curve,
                            _relaxation_time(pm, d))
    # doubling + binary search on the monotone worst-TV curve
    powers = [p]  # powers[k] = P^(2^k)
    while True:
        pk = powers[-1] @ powers[-1]
        powers.append(pk)
        t_hi = 1 << (len(powers) - 1)
        tv_hi = _worst_tv(pk, mu)
        curve.append((t_hi, tv_hi))
        if tv_hi <= threshold:
            break
        if t_hi > 10 ** 9:
            raise RuntimeError("mixing time beyond 1e9 steps")
    lo, hi = t_hi // 2, t_hi  # TV(lo) > threshold >= TV(hi)

    def power(t: int) -> np.ndarray:
        out = np.eye(len(mu))
        k = 0
        while t:
            if t & 1:
                out = out @ powers[k]
            t >>= 1
            k += 1
        return out

    while hi - lo > 1:
        mid = (lo + hi) // 2
        tvm = _worst_tv(power(mid), mu)
        curve.append((mid, tvm))
        if tvm <= threshold:
            hi = mid
        else:
            lo = mid
    curve.sort()
    return MixingReport(hi, threshold, pm.policy, pm.n_active, curve,
                        _relaxation_time(pm, d))


def _relaxation_time(pm: TransitionMatrix, d: ExactDistribution) -> Optional[float]:
    if len(pm.space) > 2000:
        return None
    mu = d.probs
    if np.any(mu <= 0):
        return None
    root = np.sqrt(mu)
    sym = pm.p * root[:, None] / root[None, :]
    vals = np.linalg.eigvalsh((sym + sym.T) / 2)
    slem = max(abs(v) for v in vals if abs(v) < 1 - 1e-12)
    return 1.0 / (1.0 - slem)


# ---------------------------------------------------------------------------
# herringbone bottleneck
# ---------------------------------------------------------------------------


@dataclass
class HerringboneSet:
    """Triangulations whose interior rows alternate edge orientation by row
    parity: row r = v + 1/2 forbids positively oriented edges when odd and
    negatively oriented ones when even.  With epsilon, the rule applies only
    to midpoints with horizontal coordinate in (eps*n, (1-eps)*n)."""

    grid: GridSpec
    epsilon: Optional[float]
    governed: list[tuple[Midpoint, EdgeOrientation]]  # (midpoint, forbidden)

    def forbidden_at(self, x: Midpoint) -> Optional[EdgeOrientation]:
        for y, forb in self.governed:
            if y == x:
                return forb
        return None

    def contains_assignment(self, assignment) -> bool:
        for x, forbidden in self.governed:
            if orientation(assignment[x]) is forbidden:
                return False
        return True

    def contains_state(self, space: StateSpace, i: int) -> bool:
        for x, forbidden in self.governed:
            if orientation(space.edge_in_state(i, x)) is forbidden:
                return False
        return True

    def governed_slots(self, space: StateSpace) -> list[int]:
        out = []
        for x, _ in self.governed:
            slot = space.slot_of.get(Midpoint(x.dv, x.dh))
            if slot is not None:
                out.append(slot)
        return sorted(set(out))


def herringbone_set(grid: GridSpec, epsilon: Optional[float] = None) -> HerringboneSet:
    governed = []
    for x in midpoints(grid):
        if x.kind is MidpointKind.BOUNDARY or x.dv % 2 == 0:
            continue
        if epsilon is not None:
            if not (2 * epsilon * grid.n < x.dh < 2 * grid.n * (1 - epsilon)):
                continue
        row = (x.dv + 1) // 2
        forbidden = EdgeOrientation.POSITIVE if row % 2 == 1 else EdgeOrientation.NEGATIVE
        governed.append((x, forbidden))
    return HerringboneSet(grid, epsilon, governed)


@dataclass
class BottleneckReport:
    description: str
    n_states_in_a: int
    z_a: Union[float, Fraction]
    z_boundary: Union[float, Fraction]
    ratio: Union[float, Fraction]
    mu_a: float
    mu_a_at_most_half: bool
    exact: bool


def conductance_ratio(space: StateSpace, params: GibbsParams,
                      aset: Union[HerringboneSet, Callable[[StateSpace, int], bool]],
                      description: str = "herringbone") -> BottleneckReport:
    """Exact Z(A), Z(boundary A) and their ratio, where the inner boundary
    holds the members of A with at least one flip leading outside A."""
    if isinstance(aset, HerringboneSet):
        member = aset.contains_state
        slots = aset.governed_slots(space)
    else:
        member = aset
        slots = list(range(len(space.free_midpoints)))
    in_a = [member(space, i) for i in range(len(space))]
    ids = [i for i, ok in enumerate(in_a) if ok]
    if not ids:
        raise ValueError("membership predicate selects no state")
    boundary = []
    for i in ids:
        enc = space.states[i]
        exits = False
        for k in slots:
            x = space.free_midpoints[k]
            for ci in range(len(space.candidates[x])):
                if ci == enc[k]:
                    continue
                j = space.neighbor(i, k, ci)
                if j is not None and not in_a[j]:
                    exits = True
                    break
            if exits:
                break
        if exits:
            boundary.append(i)
    if params.exact:
        lam = Fraction(params.lam)
        z_a = sum(lam ** int(space.lengths[i]) for i in ids)
        z_b = sum(lam ** int(space.lengths[i]) for i in boundary)
        z_all = sum(lam ** int(l) for l in space.lengths)
        ratio = z_b / z_a
        mu_a = float(z_a / z_all)
    else:
        lam = float(params.lam)
        logs = np.asarray(space.lengths, dtype=float) * math.log(lam)
        m = logs.max()
        w = np.exp(logs - m)
        z_a = float(w[ids].sum())
        z_b = float(w[boundary].sum()) if boundary else 0.0
        ratio = z_b / z_a
        mu_a = z_a / float(w.sum())
    return BottleneckReport(description, len(ids), z_a, z_b, ratio, mu_a,
                            mu_a <= 0.5 + 1e-12, params.exact)
