"""Binary branching populations with constant per-head birth rate.

Every individual alive gives birth at rate ``lam``, independently of
everything else, and dies when its own lifetime runs out.  The lifetime is
drawn once, at birth, from a ``ServiceDistribution``; what makes the
population Markov is the multiset of *residual* lifetimes, which we keep in
a min-heap of absolute death times.  Simulation is event-driven and exact:
the next event is the race between one exponential(lam * z) birth clock and
the smallest death time, ties going to the death.

Initial conditions come in four flavours (`make_initial`): an explicit
tuple of residual lifetimes, a single fresh lifetime, ``zeta`` i.i.d.
stationary residuals, or a geometric number of stationary residuals.  The
last two draw from the forward-recurrence law S*; the single-individual
variant deliberately draws from S itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .distributions import ServiceDistribution
from .levy import SamplingFailure
from .paths import StepPath

__all__ = ["CMJInitial", "CMJTrace", "make_initial", "simulate_cmj"]

_CHUNK = 8192
_VARIANTS = ("chi", "single-S", "zeta-star", "nu-star")


@dataclass(frozen=True)
class CMJInitial:
    """Description of how a population run begins.

    variant "chi": start with the residual lifetimes in ``chi``, verbatim.
    variant "single-S": one individual with a fresh lifetime drawn from S.
    variant "zeta-star": ``zeta`` individuals, i.i.d. stationary residuals.
    variant "nu-star": K individuals with P(K=k) = (1-rho) rho^k on
    {0,1,2,...}, each an independent stationary residual.
    """

    variant: str
    chi: tuple[float, ...] | None = None
    zeta: int | None = None
    rho: float | None = None

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown initial variant {self.variant!r}")
        if self.variant == "chi":
            if self.chi is None or len(self.chi) == 0:
                raise ValueError("chi variant needs a nonempty residual tuple")
            if any(not (r > 0 and math.isfinite(r)) for r in self.chi):
                raise ValueError("chi residuals must be positive and finite")
        if self.variant == "zeta-star":
            if self.zeta is None or self.zeta < 1:
                raise ValueError("zeta-star needs an integer count >= 1")
        if self.variant == "nu-star":
            if self.rho is None or not 0.0 <= self.rho < 1.0:
                raise ValueError("nu-star needs a load rho in [0, 1)")

    def draw_residuals(self, rng, life: ServiceDistribution):
        """Sample the initial residual lifetimes (may be empty for nu-star)."""
        if self.variant == "chi":
            return np.asarray(self.chi, dtype=np.float64)
        if self.variant == "single-S":
            return np.asarray(life.sample(rng, 1), dtype=np.float64)
        if self.variant == "zeta-star":
            return np.asarray(life.sample_residual(rng, self.zeta),
                              dtype=np.float64)
        k = int(rng.geometric(1.0 - self.rho)) - 1
        if k == 0:
            return np.empty(0)
        return np.asarray(life.sample_residual(rng, k), dtype=np.float64)


def make_initial(variant, *, chi=None, zeta=None, arrival_rate=None,
                 life: ServiceDistribution | None = None) -> CMJInitial:
    """Build a CMJInitial, deriving rho = arrival_rate * mean for nu-star."""
    if variant == "nu-star":
        if arrival_rate is None or life is None:
            raise ValueError("nu-star needs arrival_rate and life")
        rho = float(arrival_rate) * life.mean()
        if rho >= 1.0:
            raise ValueError(f"nu-star requires rho < 1; got {rho}")
        return CMJInitial("nu-star", rho=rho)
    if variant == "chi":
        return CMJInitial("chi", chi=tuple(float(r) for r in chi))
    if variant == "zeta-star":
        return CMJInitial("zeta-star", zeta=int(zeta))
    return CMJInitial(variant)


@dataclass(frozen=True)
class CMJTrace:
    """One simulated population run.

    ``population`` is the head-count step path; an extinct run is absorbed
    at 0 (end time inf), a horizon-stopped one ends at the horizon.  Event
    logs keep every birth and death epoch, including multiplicities when
    deterministic residuals tie.  ``area`` is the exact integral of the
    population over the simulated window.
    """

    population: StepPath
    birth_times: np.ndarray
    death_times: np.ndarray
    initial_size: int
    total_progeny: int
    extinct: bool
    area: float
    initial: CMJInitial

    def to_csv(self) -> str:
        """Event log as ``time,type,population_after`` rows.

        Re-merges births and deaths with the death-first tie rule the
        simulation itself uses, and collapses simultaneous like events
        into a single row showing the population after all of them.
        """
        times = np.concatenate([self.death_times, self.birth_times])
        steps = np.concatenate([-np.ones(len(self.death_times), dtype=np.int64),
                                np.ones(len(self.birth_times), dtype=np.int64)])
        order = np.lexsort((steps, times))
        times, steps = times[order], steps[order]
        pop = self.initial_size + np.cumsum(steps)
        lines = ["time,type,population_after"]
        for i in range(len(times)):
            last_of_run = (i + 1 == len(times) or times[i + 1] != times[i]
                           or steps[i + 1] != steps[i])
            if not last_of_run:
                continue
            kind = "death" if steps[i] < 0 else "birth"
            lines.append(f"{float(times[i])!r},{kind},{int(pop[i])}")
        return "\n".join(lines) + "\n"


def _run_population(rng, lam, life, t, z, heap, hsize, max_events, horizon,
                    chunk=_CHUNK):
    cap = max(256, 2 * hsize + 64)
    ev_t = np.empty(cap)
    ev_kind = np.empty(cap, dtype=np.int64)
    ev_z = np.empty(cap)
    area, births, ne = 0.0, 0, 0
    while True:
        exp_draws = rng.exponential(1.0, chunk)
        size_draws = np.asarray(life.sample(rng, chunk), dtype=np.float64)
        chunk = min(2 * chunk, _CHUNK)
        status, t, z, area, births, hsize, ne, _, _ = _kernels.cmj_kernel(
            t, z, area, births, heap, hsize, lam, horizon, max_events,
            exp_draws, size_draws, ev_t, ev_kind, ev_z, ne)
        if status == _kernels.EVENTS_FULL:
            if ne >= len(ev_t):
                ev_t = np.concatenate([ev_t, np.empty(cap)])
                ev_kind = np.concatenate([ev_kind, np.empty(cap, dtype=np.int64)])
                ev_z = np.concatenate([ev_z, np.empty(cap)])
                cap = len(ev_t)
            if hsize >= len(heap):
                heap = np.concatenate([heap, np.empty(len(heap))])
        elif status == _kernels.GUARD:
            raise SamplingFailure(
                f"population run exceeded {max_events} events", 1)
        elif status == _kernels.OK:
            return t, z, area, births, ev_t[:ne], ev_kind[:ne], ev_z[:ne]


def _step_path_dedup(times, values, end_time):
    """Step path from event data, keeping the last value at tied times."""
    keep = np.append(times[1:] != times[:-1], True)
    return StepPath(times[keep], values[keep], end_time)


def simulate_cmj(rng, birth_rate, life: ServiceDistribution,
                 init: CMJInitial, horizon=None,
                 max_events=50_000_000) -> CMJTrace:
    """Exact event-driven run of the branching population.

    With ``horizon=None`` the run goes to extinction, which requires
    subcritical load birth_rate * mean(life) < 1; a finite horizon stops
    the clock there and the returned trace has ``extinct=False`` if the
    population was still alive.  ``max_events`` is a hard guard against
    runaway near-critical runs and raises ``SamplingFailure`` when hit.
    """
    lam = float(birth_rate)
    if not (lam >= 0.0 and math.isfinite(lam)):
        raise ValueError("birth rate must be finite and nonnegative")
    if horizon is None:
        if lam * life.mean() >= 1.0:
            raise ValueError(
                "run-to-extinction needs birth_rate * mean(life) < 1; "
                "pass a horizon instead")
        horizon = math.inf
    else:
        horizon = float(horizon)
        if not horizon > 0.0:
            raise ValueError("horizon must be positive")

    residuals = init.draw_residuals(rng, life)
    z0 = len(residuals)
    if z0 == 0:
        return CMJTrace(StepPath([0.0], [0.0]), np.empty(0), np.empty(0),
                        0, 0, True, 0.0, init)

    heap = np.empty(z0 + 256)
    heap[:z0] = np.sort(residuals)  # a sorted array is a valid min-heap
    rho = lam * life.mean()
    if math.isfinite(horizon):
        guess = 2.0 * (z0 + lam * (z0 + 1.0) * horizon)
    elif rho < 1.0:
        guess = 4.0 * z0 / (1.0 - rho)
    else:
        guess = _CHUNK
    chunk = int(min(max(guess + 64.0, 64.0), _CHUNK))
    t, z, area, births, ev_t, ev_kind, ev_z = _run_population(
        rng, lam, life, 0.0, z0, heap, z0, max_events, horizon, chunk)

    extinct = z == 0
    end = math.inf if extinct else horizon
    population = _step_path_dedup(np.append(0.0, ev_t),
                                  np.append(float(z0), ev_z), end)
    return CMJTrace(
        population=population,
        birth_times=ev_t[ev_kind == 0],
        death_times=ev_t[ev_kind == 1],
        initial_size=z0,
        total_progeny=z0 + births,
        extinct=extinct,
        area=float(area),
        initial=init,
    )
