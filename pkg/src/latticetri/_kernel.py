"""Numba-compiled heat-bath flip kernel over flat integer arrays.

The triangulation is stored as, per midpoint index: the edge endpoints
(pv, ph, qv, qh) and the third vertices of its one or two incident
triangles (t1*, t2*; t2v = -1 marks a rectangle-boundary edge).  A flip at
midpoint i is O(1): replace the edge by the segment between the third
vertices and repoint the four quadrilateral sides' third-vertex entries.

The RNG is xoshiro256** seeded through splitmix64, implemented inline so
the pure-Python reference sampler can reproduce the identical stream.
"""

from __future__ import annotations

import numpy as np
from numba import njit, uint64

U64 = np.uint64
_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << k) | (x >> (uint64(64) - k))


@njit(cache=True)
def seed_state(seed):
    """Four xoshiro256** words from a splitmix64 chain."""
    s = np.empty(4, dtype=np.uint64)
    z = uint64(seed)
    for i in range(4):
        z = z + uint64(0x9E3779B97F4A7C15)
        w = z
        w = (w ^ (w >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
        w = (w ^ (w >> uint64(27))) * uint64(0x94D049BB133111EB)
        s[i] = w ^ (w >> uint64(31))
    return s


@njit(cache=True, inline="always")
def _next_u64(s):
    result = _rotl(s[1] * uint64(5), uint64(7)) * uint64(9)
    t = s[1] << uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], uint64(45))
    return result


@njit(cache=True, inline="always")
def _next_double(s):
    return (_next_u64(s) >> uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True, inline="always")
def _is_b(av, ah, bv, bh, cv, ch, midindex, glen):
    """1 if the triangle (a, b, c) has an edge above its ground length."""
    l1 = abs(av - bv) + abs(ah - bh)
    if l1 != glen[midindex[av + bv, ah + bh]]:
        return 1
    l2 = abs(av - cv) + abs(ah - ch)
    if l2 != glen[midindex[av + cv, ah + ch]]:
        return 1
    l3 = abs(bv - cv) + abs(bh - ch)
    if l3 != glen[midindex[bv + cv, bh + ch]]:
        return 1
    return 0


@njit(cache=True)
def run_chain(pv, ph, qv, qh, t1v, t1h, t2v, t2h, midindex, glen, active,
              pow_table, pow_offset, steps, rng_state, total_length, b_count,
              record_every, rec_len, rec_flips, rec_b, snapshots,
              watch_idx, stop_on_nonpositive):
    """Run `steps` heat-bath updates in place.

    Returns (steps done, flips accepted, total_length, b_count, hit_step)
    where hit_step is the first step at which the watched edge became
    non-positively oriented (-1 if never / not watched)."""
    k_active = active.shape[0]
    flips = 0
    hit_step = np.int64(-1)
    rec_i = 0
    for step in range(steps):
        r = _next_u64(rng_state)
        i = active[r % uint64(k_active)]
        if t2v[i] >= 0:
            p_v, p_h, q_v, q_h = pv[i], ph[i], qv[i], qh[i]
            r1v, r1h, r2v, r2h = t1v[i], t1h[i], t2v[i], t2h[i]
            if r1v + r2v == p_v + q_v and r1h + r2h == p_h + q_h:
                cur_len = abs(q_v - p_v) + abs(q_h - p_h)
                new_len = abs(r2v - r1v) + abs(r2h - r1h)
                acc = pow_table[cur_len - new_len + pow_offset]
                u = _next_double(rng_state)
                if u < acc:
                    # B-triangle delta: two faces destroyed, two created
                    delta_b = (_is_b(r1v, r1h, r2v, r2h, p_v, p_h, midindex, glen)
                               + _is_b(r1v, r1h, r2v, r2h, q_v, q_h, midindex, glen)
                               - _is_b(p_v, p_h, q_v, q_h, r1v, r1h, midindex, glen)
                               - _is_b(p_v, p_h, q_v, q_h, r2v, r2h, midindex, glen))
                    # repoint the four quadrilateral sides
                    for side in range(4):
                        if side == 0:
                            av, ah, bv, bh = p_v, p_h, r1v, r1h
                            oldv, oldh, newv, newh = q_v, q_h, r2v, r2h
                        elif side == 1:
                            av, ah, bv, bh = q_v, q_h, r1v, r1h
                            oldv, oldh, newv, newh = p_v, p_h, r2v, r2h
                        elif side == 2:
                            av, ah, bv, bh = p_v, p_h, r2v, r2h
                            oldv, oldh, newv, newh = q_v, q_h, r1v, r1h
                        else:
                            av, ah, bv, bh = q_v, q_h, r2v, r2h
                            oldv, oldh, newv, newh = p_v, p_h, r1v, r1h
                        s = midindex[av + bv, ah + bh]
                        if t1v[s] == oldv and t1h[s] == oldh:
                            t1v[s] = newv
                            t1h[s] = newh
                        else:
                            t2v[s] = newv
                            t2h[s] = newh
                    # canonical endpoint order for the new edge
                    if r1v < r2v or (r1v == r2v and r1h <= r2h):
                        pv[i], ph[i], qv[i], qh[i] = r1v, r1h, r2v, r2h
                    else:
                        pv[i], ph[i], qv[i], qh[i] = r2v, r2h, r1v, r1h
                    t1v[i], t1h[i] = p_v, p_h
                    t2v[i], t2h[i] = q_v, q_h
                    total_length += new_len - cur_len
                    b_count += delta_b
                    flips += 1
                    if i == watch_idx and stop_on_nonpositive:
                        dv = qv[i] - pv[i]
                        dh = qh[i] - ph[i]
                        if dv * dh <= 0:
                            hit_step = step + 1
                            if record_every > 0 and rec_i < rec_len.shape[0]:
                                rec_len[rec_i] = total_length
                                rec_flips[rec_i] = flips
                                rec_b[rec_i] = b_count
                                rec_i += 1
                            return step + 1, flips, total_length, b_count, hit_step
        if record_every > 0 and (step + 1) % record_every == 0:
            if rec_i < rec_len.shape[0]:
                rec_len[rec_i] = total_length
                rec_flips[rec_i] = flips
                rec_b[rec_i] = b_count
                if snapshots.shape[0] > 0:
                    for k in range(pv.shape[0]):
                        snapshots[rec_i, k, 0] = pv[k]
                        snapshots[rec_i, k, 1] = ph[k]
                        snapshots[rec_i, k, 2] = qv[k]
                        snapshots[rec_i, k, 3] = qh[k]
                rec_i += 1
    return steps, flips, total_length, b_count, hit_step
