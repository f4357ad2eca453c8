"""Compiled inner loops for batched simulation.

Random numbers come from a splitmix64 stream held in a one-element array
and seeded by the caller, so results depend only on the seed.
"""
import numpy as np
from numba import njit, uint64


@njit(cache=True)
def _next(state):
    state[0] += uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)
    return z ^ (z >> uint64(31))


@njit(cache=True)
def _uniform(state):
    return (_next(state) >> uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _below(state, bound):
    # multiply-shift reduction of the top 32 bits; bias below bound / 2**32
    return np.int64(((_next(state) >> uint64(32)) * uint64(bound)) >> uint64(32))


@njit(cache=True)
def _search(rng, pid, cum, width):
    u = _uniform(rng)
    j = 0
    while j < width - 1 and cum[pid, j] <= u:
        j += 1
    return j


@njit(cache=True)
def batch_runs(seed, runs, initial, is_target, avail_n, avail_mat, best_n, best_mat, mu,
               pair_id, succ, cum, lookup, den, use_lookup, width, limit, slots):
    """``runs`` heuristic-mode simulations.  Adds successor counts into
    ``slots`` (indexed ``pair * width + position``) and returns
    ``(steps, reached, looped)``."""
    rng = np.full(1, seed, dtype=np.uint64)
    n = is_target.shape[0]
    stamp = np.full(n, -1, dtype=np.int64)
    steps = 0
    reached = 0
    looped = 0
    for r in range(runs):
        s = initial
        if is_target[s]:
            reached += 1
            continue
        stamp[s] = r
        since = 0
        while True:
            if _uniform(rng) < mu:
                a = avail_mat[s, _below(rng, avail_n[s])]
            else:
                a = best_mat[s, _below(rng, best_n[s])]
            pid = pair_id[s, a]
            if use_lookup:
                j = lookup[pid, _below(rng, den)]
            else:
                j = _search(rng, pid, cum, width)
            slots[pid * width + j] += 1
            steps += 1
            t = succ[pid, j]
            if is_target[t]:
                reached += 1
                break
            if stamp[t] == r:
                since += 1
            else:
                stamp[t] = r
                since = 0
            if since >= limit:
                looped += 1
                break
            s = t
    return steps, reached, looped


@njit(cache=True)
def component_walk(seed, initial, is_target, inside, avail_n, avail_mat, comp_n, comp_mat,
                   need_index, need, pair_id, succ, cum, lookup, den, use_lookup, width, limit,
                   max_attempts, max_steps, slots):
    """Reach a state marked ``inside`` with uniform-action runs from
    ``initial``, then walk inside it with uniform component actions until
    every pair ``p`` with ``need_index[p] >= 0`` got ``need[need_index[p]]``
    samples.

    Returns ``(steps, status)``: 0 done, 1 escaped the component (a new
    transition was seen), 2 could not enter, 3 step cap reached.
    """
    rng = np.full(1, seed, dtype=np.uint64)
    n = is_target.shape[0]
    stamp = np.full(n, -1, dtype=np.int64)
    steps = 0
    s = -1
    for attempt in range(max_attempts):
        s = initial
        if inside[s]:
            break
        stamp[s] = attempt
        since = 0
        entered = False
        while True:
            a = avail_mat[s, _below(rng, avail_n[s])]
            pid = pair_id[s, a]
            if use_lookup:
                j = lookup[pid, _below(rng, den)]
            else:
                j = _search(rng, pid, cum, width)
            slots[pid * width + j] += 1
            steps += 1
            t = succ[pid, j]
            if inside[t]:
                s = t
                entered = True
                break
            if is_target[t]:
                break
            if stamp[t] == attempt:
                since += 1
            else:
                stamp[t] = attempt
                since = 0
            if since >= limit:
                break
            s = t
        if entered:
            break
        s = -1
    if s < 0:
        return steps, 2
    remaining = 0
    for i in range(need.shape[0]):
        if need[i] > 0:
            remaining += 1
    got = np.zeros(need.shape[0], dtype=np.int64)
    while remaining > 0:
        if steps >= max_steps:
            return steps, 3
        a = comp_mat[s, _below(rng, comp_n[s])]
        pid = pair_id[s, a]
        if use_lookup:
            j = lookup[pid, _below(rng, den)]
        else:
            j = _search(rng, pid, cum, width)
        slots[pid * width + j] += 1
        steps += 1
        k = need_index[pid]
        if k >= 0:
            got[k] += 1
            if got[k] == need[k]:
                remaining -= 1
        t = succ[pid, j]
        if not inside[t]:
            return steps, 1
        s = t
    return steps, 0
