"""Numba kernels for random walks, loop erasure and Wilson's algorithm.

All kernels draw randomness from an inline splitmix64 stream seeded per call,
so results depend only on the seed, never on thread scheduling.
"""

from __future__ import annotations

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_STEP_CAP = 1
STATUS_STUCK = 2
STATUS_BUDGET = 3


@njit(cache=True, inline="always")
def _splitmix64(state):
    s = (state + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = s
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(
        0xFFFFFFFFFFFFFFFF
    )
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(
        0xFFFFFFFFFFFFFFFF
    )
    return s, z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _uniform(state):
    state, z = _splitmix64(state)
    return state, (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True, inline="always")
def _pick_edge(indptr, cumw, v, state):
    """Sample a CSR dart index at v proportional to edge weight."""
    lo = indptr[v]
    hi = indptr[v + 1]
    state, u = _uniform(state)
    target = u * cumw[hi - 1]
    # binary search over the cumulative weights of v's segment
    a, b = lo, hi - 1
    while a < b:
        mid = (a + b) // 2
        if cumw[mid] > target:
            b = mid
        else:
            a = mid + 1
    return state, a


@njit(cache=True)
def wilson_kernel(indptr, nbr, cumw, in_tree0, order, seed, step_cap):
    """Wilson's algorithm with next-dart cycle popping.

    in_tree0 marks root vertices.  Returns (next_dart, status, steps): for
    each non-root vertex the CSR dart index of its tree edge.
    """
    V = in_tree0.shape[0]
    nxt = np.full(V, np.int64(-1))
    in_tree = in_tree0.copy()
    state = seed
    steps = np.int64(0)
    for k in range(order.shape[0]):
        s = order[k]
        v = s
        while not in_tree[v]:
            if indptr[v + 1] == indptr[v]:
                return nxt, STATUS_STUCK, steps
            state, j = _pick_edge(indptr, cumw, v, state)
            nxt[v] = j
            v = nbr[j]
            steps += 1
            if steps > step_cap:
                return nxt, STATUS_STEP_CAP, steps
        v = s
        while not in_tree[v]:
            in_tree[v] = True
            v = nbr[nxt[v]]
    return nxt, STATUS_OK, steps


@njit(cache=True)
def lerw_kernel(indptr, nbr, cumw, absorbing, start, seed, step_cap):
    """Loop-erased random walk from start to the absorbing set.

    Returns (darts, length, status, steps, state): darts[:length] are the CSR
    dart indices of the erased path, in order from start.
    """
    V = absorbing.shape[0]
    nxt = np.full(V, np.int64(-1))
    state = seed
    v = start
    steps = np.int64(0)
    while not absorbing[v]:
        if indptr[v + 1] == indptr[v]:
            return nxt, np.int64(0), STATUS_STUCK, steps, state
        state, j = _pick_edge(indptr, cumw, v, state)
        nxt[v] = j
        v = nbr[j]
        steps += 1
        if steps > step_cap:
            return nxt, np.int64(0), STATUS_STEP_CAP, steps, state
    # read off the erased path
    length = np.int64(0)
    v = start
    while not absorbing[v]:
        length += 1
        v = nbr[nxt[v]]
    darts = np.empty(length, dtype=np.int64)
    v = start
    for i in range(length):
        darts[i] = nxt[v]
        v = nbr[nxt[v]]
    return darts, length, STATUS_OK, steps, state


@njit(cache=True)
def conditioned_wilson_kernel(
    indptr,
    nbr,
    cumw,
    root_mask,
    cond_vertices,
    cond_darts,
    order,
    seed,
    max_rejects,
    step_cap,
):
    """Wilson sampling rejected until each cond vertex exits by its given dart.

    cond_vertices[i] must have tree dart cond_darts[i] (checked as soon as its
    branch is finished, restarting the whole sample otherwise).  Returns
    (next_dart, attempts, status, steps).
    """
    V = root_mask.shape[0]
    state = seed
    attempts = np.int64(0)
    steps = np.int64(0)
    nxt = np.full(V, np.int64(-1))
    while attempts < max_rejects:
        attempts += 1
        for i in range(V):
            nxt[i] = -1
        in_tree = root_mask.copy()
        ok = True
        # conditioned vertices first for early rejection
        for phase in range(2):
            if not ok:
                break
            seq = cond_vertices if phase == 0 else order
            for k in range(seq.shape[0]):
                s = seq[k]
                v = s
                while not in_tree[v]:
                    state, j = _pick_edge(indptr, cumw, v, state)
                    nxt[v] = j
                    v = nbr[j]
                    steps += 1
                    if steps > step_cap:
                        return nxt, attempts, STATUS_STEP_CAP, steps
                v = s
                while not in_tree[v]:
                    in_tree[v] = True
                    v = nbr[nxt[v]]
                if phase == 0 and nxt[s] != cond_darts[k]:
                    ok = False
                    break
        if ok:
            return nxt, attempts, STATUS_OK, steps
    return nxt, attempts, STATUS_BUDGET, steps
