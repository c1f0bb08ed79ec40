"""Event-loop kernels, jit-compiled.

Everything here is deliberately dumb and fast: flat float64 arrays, absolute
event times, and no distribution logic (callers pre-draw unit-exponential and
service-size arrays with numpy Generators).  Each kernel is resumable: it
consumes draws from the front of the arrays it is given and, when a draw array
or an event buffer runs out, returns with a nonzero status and enough scalar
state for the caller to top up the arrays and call again.  Randomness is never
rewound, so a resumed run is byte-identical to one with larger buffers.

Status codes: 0 done, 1 exponential draws exhausted, 2 size draws exhausted,
3 event buffer full, 4 guard tripped (time budget or depth cutoff).
"""

import numpy as np
from numba import njit

OK = 0
NEED_EXP = 1
NEED_SIZES = 2
EVENTS_FULL = 3
GUARD = 4


# ---------------------------------------------------------------------------
# array-backed binary min-heap (absolute times)
# ---------------------------------------------------------------------------

@njit(cache=True, error_model="numpy")
def _heap_push(heap, size, val):
    i = size
    heap[i] = val
    while i > 0:
        parent = (i - 1) >> 1
        if heap[parent] <= heap[i]:
            break
        heap[parent], heap[i] = heap[i], heap[parent]
        i = parent
    return size + 1


@njit(cache=True, error_model="numpy")
def _heap_pop(heap, size):
    last = size - 1
    heap[0] = heap[last]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= last:
            break
        child = left
        right = left + 1
        if right < last and heap[right] < heap[left]:
            child = right
        if heap[i] <= heap[child]:
            break
        heap[i], heap[child] = heap[child], heap[i]
        i = child
    return last


# ---------------------------------------------------------------------------
# spectrally positive drift-and-jumps path
# ---------------------------------------------------------------------------

@njit(cache=True, error_model="numpy")
def drift_jump_kernel(t, x, visits, lam, stop_mode, horizon, level,
                      target_visits, time_budget, depth_cutoff,
                      exp_draws, size_draws, jump_t, jump_s, nj):
    """Unit downward drift plus positive jumps at rate lam.

    stop_mode 0: run to the time horizon.
    stop_mode 1: stop exactly when the path drifts down onto `level`.
    stop_mode 2: stop at the `target_visits`-th downward passage through 0
                 (the caller counts a start at zero as the first visit).

    Returns (status, t, x, visits, nj, used_exp, used_sizes).
    """
    n_exp = exp_draws.shape[0]
    n_sizes = size_draws.shape[0]
    cap = jump_t.shape[0]
    ei = 0
    si = 0
    while True:
        if ei >= n_exp:
            return NEED_EXP, t, x, visits, nj, ei, si
        if si >= n_sizes:
            return NEED_SIZES, t, x, visits, nj, ei, si
        if nj >= cap:
            return EVENTS_FULL, t, x, visits, nj, ei, si
        gap = exp_draws[ei] / lam
        ei += 1
        tj = t + gap
        if stop_mode == 0 and tj >= horizon:
            return OK, horizon, x - (horizon - t), visits, nj, ei, si
        if stop_mode == 1 and x >= level:
            tc = t + (x - level)
            if tc < tj:
                return OK, tc, level, visits, nj, ei, si
        if stop_mode == 2 and x > 0.0:
            tc = t + x
            if tc < tj:
                visits += 1
                if visits >= target_visits:
                    return OK, tc, 0.0, visits, nj, ei, si
        if tj > time_budget:
            return GUARD, t, x, visits, nj, ei, si
        x_low = x - gap
        if x_low < -depth_cutoff:
            return GUARD, t, x, visits, nj, ei, si
        s = size_draws[si]
        si += 1
        t = tj
        x = x_low + s
        jump_t[nj] = t
        jump_s[nj] = s
        nj += 1


# ---------------------------------------------------------------------------
# processor-sharing queue
# ---------------------------------------------------------------------------

@njit(cache=True, error_model="numpy")
def ps_kernel(t, aging, sum_dep, q, next_arrival, heap, hsize,
              lam, stop_mode, horizon,
              exp_draws, size_draws, ev_t, ev_kind, ev_q, ev_w, ne):
    """Egalitarian processor sharing with Poisson arrivals.

    All jobs in the system age together at rate 1/q.  `aging` is the shared
    clock; a job arriving with requirement s departs when the clock reaches
    its threshold `aging + s`, and the thresholds of jobs present live in
    `heap`.  The workload is `sum_dep - q * aging` throughout.

    stop_mode 0: run to the horizon.  stop_mode 1: stop when the system
    first empties.  Events: kind 0 arrival, kind 1 departure, with the
    queue length and workload just after the event.

    Returns (status, t, aging, sum_dep, q, next_arrival, hsize, ne,
             used_exp, used_sizes).
    """
    n_exp = exp_draws.shape[0]
    n_sizes = size_draws.shape[0]
    cap = ev_t.shape[0]
    ei = 0
    si = 0
    while True:
        if stop_mode == 1 and q == 0:
            return OK, t, aging, sum_dep, q, next_arrival, hsize, ne, ei, si
        if ne >= cap or hsize >= heap.shape[0]:
            return EVENTS_FULL, t, aging, sum_dep, q, next_arrival, hsize, ne, ei, si
        if q > 0:
            t_dep = t + (heap[0] - aging) * q
        else:
            t_dep = np.inf
        if t_dep <= next_arrival:
            if t_dep >= horizon:
                aging += (horizon - t) / q
                t = horizon
                return OK, t, aging, sum_dep, q, next_arrival, hsize, ne, ei, si
            t = t_dep
            aging = heap[0]
            sum_dep -= heap[0]
            hsize = _heap_pop(heap, hsize)
            q -= 1
            if q == 0:
                sum_dep = 0.0
            ev_t[ne] = t
            ev_kind[ne] = 1
            ev_q[ne] = q
            ev_w[ne] = sum_dep - q * aging
            ne += 1
        else:
            if next_arrival >= horizon:
                if q > 0:
                    aging += (horizon - t) / q
                t = horizon
                return OK, t, aging, sum_dep, q, next_arrival, hsize, ne, ei, si
            if ei >= n_exp:
                return NEED_EXP, t, aging, sum_dep, q, next_arrival, hsize, ne, ei, si
            if si >= n_sizes:
                return NEED_SIZES, t, aging, sum_dep, q, next_arrival, hsize, ne, ei, si
            if q > 0:
                aging += (next_arrival - t) / q
            t = next_arrival
            s = size_draws[si]
            si += 1
            threshold = aging + s
            hsize = _heap_push(heap, hsize, threshold)
            sum_dep += threshold
            q += 1
            next_arrival = t + exp_draws[ei] / lam
            ei += 1
            ev_t[ne] = t
            ev_kind[ne] = 0
            ev_q[ne] = q
            ev_w[ne] = sum_dep - q * aging
            ne += 1


# ---------------------------------------------------------------------------
# binary homogeneous branching population
# ---------------------------------------------------------------------------

@njit(cache=True, error_model="numpy")
def cmj_kernel(t, z, area, births, heap, hsize,
               lam, horizon, max_events,
               exp_draws, size_draws, ev_t, ev_kind, ev_z, ne):
    """Population where every individual gives birth at rate lam and dies
    at the end of its own lifetime (absolute death times in `heap`).

    One unit-exponential draw is consumed per event iteration for the birth
    race; when a death preempts the candidate birth the draw is simply
    discarded, which is legitimate because the race is memoryless.  Lifetime
    draws are consumed only on actual births.

    Runs until extinction or the horizon, whichever comes first (callers
    wanting pure extinction pass horizon=inf).  Events: kind 0 birth,
    kind 1 death.

    Returns (status, t, z, area, births, hsize, ne, used_exp, used_sizes).
    """
    n_exp = exp_draws.shape[0]
    n_sizes = size_draws.shape[0]
    cap = ev_t.shape[0]
    ei = 0
    si = 0
    while True:
        if z == 0:
            return OK, t, z, area, births, hsize, ne, ei, si
        if ne >= cap or hsize >= heap.shape[0]:
            return EVENTS_FULL, t, z, area, births, hsize, ne, ei, si
        if ne >= max_events:
            return GUARD, t, z, area, births, hsize, ne, ei, si
        if ei >= n_exp:
            return NEED_EXP, t, z, area, births, hsize, ne, ei, si
        if si >= n_sizes:
            # checked before the race draw is consumed, so resuming after a
            # refill replays nothing
            return NEED_SIZES, t, z, area, births, hsize, ne, ei, si
        t_death = heap[0]
        t_birth = t + exp_draws[ei] / (lam * z)
        ei += 1
        if min(t_birth, t_death) >= horizon:
            area += z * (horizon - t)
            return OK, horizon, z, area, births, hsize, ne, ei, si
        if t_death <= t_birth:
            area += z * (t_death - t)
            t = t_death
            hsize = _heap_pop(heap, hsize)
            z -= 1
            ev_t[ne] = t
            ev_kind[ne] = 1
            ev_z[ne] = z
            ne += 1
        else:
            area += z * (t_birth - t)
            t = t_birth
            s = size_draws[si]
            si += 1
            hsize = _heap_push(heap, hsize, t + s)
            z += 1
            births += 1
            ev_t[ne] = t
            ev_kind[ne] = 0
            ev_z[ne] = z
            ne += 1
