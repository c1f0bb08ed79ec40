"""Egalitarian processor-sharing queue, simulated exactly event by event.

With k jobs present each receives service at rate 1/k, so everybody ages on
one shared clock and a job that arrives needing ``s`` units departs when the
clock reaches its personal threshold ``clock + s``.  The simulation keeps
the thresholds in a min-heap and jumps from event to event in closed form;
there is no discretization.  Jobs with equal thresholds (possible with
deterministic service) depart at the same instant and collapse to a single
step of the queue path.

The workload — total remaining service time — drains at rate 1 while anyone
is present, regardless of how the capacity is split, and jumps by the
service requirement at each arrival.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .cmj import CMJInitial
from .distributions import ServiceDistribution
from .paths import Path, StepPath, _excursion_intervals, as_step, window

__all__ = ["PSTrace", "simulate_ps", "split_busy_cycles", "departure_times"]

_CHUNK = 8192


@dataclass(frozen=True)
class PSTrace:
    """One simulated queue run.

    ``queue_length`` is the head-count step path and ``workload`` the
    remaining-work path (slope -1 while busy, 0 while idle).  A run that
    reached its requested end has ``complete=True``; an until-empty run cut
    off by its guard horizon is flagged ``complete=False``.  Event logs
    keep one entry per job, so simultaneous departures appear with their
    multiplicity.
    """

    queue_length: StepPath
    workload: Path
    arrival_times: np.ndarray
    departure_times: np.ndarray
    arrival_sizes: np.ndarray
    initial: CMJInitial | None
    complete: bool
    _events: tuple = field(repr=False, default=())

    def to_csv(self) -> str:
        """Event log as ``time,event,q_after,w_after`` rows.

        Simultaneous like events (equal-threshold departures) collapse to
        one row carrying the state after the whole batch.
        """
        ev_t, ev_kind, ev_q, ev_w = self._events
        lines = ["time,event,q_after,w_after"]
        for i in range(len(ev_t)):
            if (i + 1 < len(ev_t) and ev_t[i + 1] == ev_t[i]
                    and ev_kind[i + 1] == ev_kind[i]):
                continue
            kind = "arrival" if ev_kind[i] == 0 else "departure"
            lines.append(f"{float(ev_t[i])!r},{kind},{int(ev_q[i])},"
                         f"{float(ev_w[i])!r}")
        return "\n".join(lines) + "\n"


def _run_ps(rng, lam, service, t, aging, sum_dep, q, next_arrival,
            heap, hsize, stop_mode, horizon, chunk=_CHUNK):
    cap = max(256, 2 * hsize + 64)
    ev_t = np.empty(cap)
    ev_kind = np.empty(cap, dtype=np.int64)
    ev_q = np.empty(cap)
    ev_w = np.empty(cap)
    ne = 0
    sizes_used = []
    while True:
        exp_draws = rng.exponential(1.0, chunk)
        size_draws = np.asarray(service.sample(rng, chunk), dtype=np.float64)
        chunk = min(2 * chunk, _CHUNK)
        (status, t, aging, sum_dep, q, next_arrival, hsize, ne,
         _, si) = _kernels.ps_kernel(
            t, aging, sum_dep, q, next_arrival, heap, hsize,
            lam, stop_mode, horizon,
            exp_draws, size_draws, ev_t, ev_kind, ev_q, ev_w, ne)
        sizes_used.append(size_draws[:si])
        if status == _kernels.EVENTS_FULL:
            if ne >= len(ev_t):
                ev_t = np.concatenate([ev_t, np.empty(cap)])
                ev_kind = np.concatenate([ev_kind, np.empty(cap, dtype=np.int64)])
                ev_q = np.concatenate([ev_q, np.empty(cap)])
                ev_w = np.concatenate([ev_w, np.empty(cap)])
                cap = len(ev_t)
            if hsize >= len(heap):
                heap = np.concatenate([heap, np.empty(len(heap))])
        elif status == _kernels.OK:
            sizes = (np.concatenate(sizes_used) if sizes_used
                     else np.empty(0))
            return (t, q, ev_t[:ne], ev_kind[:ne], ev_q[:ne], ev_w[:ne],
                    sizes)


def simulate_ps(rng, arrival_rate, service: ServiceDistribution,
                init: CMJInitial | None = None,
                stop=("until-empty",)) -> PSTrace:
    """Exact event-driven run of the processor-sharing queue.

    ``stop`` is ``("until-empty",)`` to run to the first emptying (load
    must be < 1; an optional second element adds a guard horizon, and a
    run cut off by it comes back flagged incomplete), or ``("horizon", t)``
    to run to a fixed time.  ``init`` describes the jobs present at time 0
    — any ``CMJInitial``, with residual lifetimes read as remaining work —
    and ``None`` starts empty; an until-empty run from an empty start
    covers the leading idle stretch plus the first busy period.
    """
    lam = float(arrival_rate)
    if not (lam >= 0.0 and math.isfinite(lam)):
        raise ValueError("arrival rate must be finite and nonnegative")
    if stop[0] == "until-empty":
        stop_mode = 1
        horizon = float(stop[1]) if len(stop) > 1 else math.inf
        if lam * service.mean() >= 1.0:
            raise ValueError("until-empty needs arrival_rate * mean < 1")
    elif stop[0] == "horizon":
        stop_mode, horizon = 0, float(stop[1])
    else:
        raise ValueError(f"unknown stop rule {stop[0]!r}")
    if not horizon > 0.0:
        raise ValueError("horizon must be positive")

    residuals = (np.empty(0) if init is None
                 else init.draw_residuals(rng, service))
    q0 = len(residuals)
    w0 = float(np.sum(residuals))
    heap = np.empty(q0 + 256)
    heap[:q0] = np.sort(residuals)
    t, aging, sum_dep, q, hsize = 0.0, 0.0, w0, q0, q0
    next_arrival = rng.exponential() / lam if lam > 0.0 else math.inf
    pre = None

    if stop_mode == 1 and q0 == 0:
        # seed the first busy period by hand so "empty" means "empty again"
        if lam == 0.0:
            raise ValueError("until-empty from an empty start needs arrivals")
        if next_arrival < horizon:
            t = next_arrival
            s0 = float(service.sample(rng))
            heap[0], hsize, q, sum_dep = s0, 1, 1, s0
            next_arrival = t + rng.exponential() / lam
            pre = (t, 0, 1, s0)

    if stop_mode == 1 and q == 0:
        # guard horizon fell before the first arrival
        flat = StepPath([0.0], [0.0], horizon)
        return PSTrace(flat, Path([0.0], [0.0], [0.0], horizon),
                       np.empty(0), np.empty(0), np.empty(0), init, False,
                       _events=(np.empty(0), np.empty(0, dtype=np.int64),
                                np.empty(0), np.empty(0)))

    rho = lam * service.mean()
    if stop_mode == 0:
        guess = 2.0 * (q0 + lam * horizon + 1.0)
    elif rho < 1.0:
        guess = 4.0 * (q0 + 1.0) / (1.0 - rho)
    else:
        guess = _CHUNK
    chunk = int(min(max(guess + 64.0, 64.0), _CHUNK))
    t, q_final, ev_t, ev_kind, ev_q, ev_w, sizes = _run_ps(
        rng, lam, service, t, aging, sum_dep, q, next_arrival,
        heap, hsize, stop_mode, horizon, chunk)
    if pre is not None:
        pt, pk, pq, pw = pre
        ev_t = np.append(pt, ev_t)
        ev_kind = np.append(np.int64(pk), ev_kind)
        ev_q = np.append(float(pq), ev_q)
        ev_w = np.append(pw, ev_w)
        sizes = np.append(pw, sizes)

    complete = q_final == 0 if stop_mode == 1 else True
    end = math.inf if stop_mode == 1 and complete else horizon
    times = np.append(0.0, ev_t)
    qvals = np.append(float(q0), ev_q)
    wvals = np.append(w0, ev_w)
    keep = np.append(times[1:] != times[:-1], True)
    times, qvals, wvals = times[keep], qvals[keep], wvals[keep]
    queue = StepPath(times, qvals, end)
    workload = Path(times, wvals, np.where(qvals > 0, -1.0, 0.0), end)
    return PSTrace(
        queue_length=queue,
        workload=workload,
        arrival_times=ev_t[ev_kind == 0],
        departure_times=ev_t[ev_kind == 1],
        arrival_sizes=sizes,
        initial=init,
        complete=complete,
        _events=(ev_t, ev_kind, ev_q, ev_w),
    )


def split_busy_cycles(tr: PSTrace):
    """Completed busy periods of a trace, each with the idle gap after it.

    Returns ``(excursion, idle)`` pairs where the excursion is the queue
    path over one maximal busy interval, rebased to start at time 0 and
    absorbed at 0, and ``idle`` is the time until the next busy period
    begins — ``None`` when the trace ends before another arrival is seen.
    An incomplete final busy period is dropped.
    """
    intervals = list(_excursion_intervals(tr.queue_length))
    pairs = []
    for j, (g, d) in enumerate(intervals):
        if d is None:
            break
        idle = intervals[j + 1][0] - d if j + 1 < len(intervals) else None
        pairs.append((as_step(window(tr.queue_length, g, d)), idle))
    return pairs


def departure_times(tr: PSTrace) -> np.ndarray:
    """Exact departure epochs, sorted, with multiplicity for ties."""
    return tr.departure_times.copy()
