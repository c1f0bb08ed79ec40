"""Spectrally positive drift-and-jump paths and their visit-count local times.

The path is compound Poisson input on top of a unit downward drift: between
jumps the slope is exactly -1, jumps are positive with law given by a
``ServiceDistribution``, and every quantity here is computed on the exact
piecewise-affine representation from ``paths`` — there is no time grid and no
kernel smoothing anywhere.

Local time at a level is literally the number of times the path has taken
that value.  A descending segment from ``v_start`` to ``v_end`` visits every
level in ``(v_end, v_start]`` exactly once and jumps visit nothing, so the
profile of a path is an integer-valued step function of the level, computed
by an exact sweep over segment endpoint values.

Stopping rules: a fixed time horizon, the exact first drift-passage onto a
level, or the m-th exact visit to 0 (a start at 0 counts as the first
visit).  Reaching a later visit is not certain — each dip below 0 escapes
for good with positive probability — so visit-stopped runs carry depth and
time guards, and the two conditioned samplers at the bottom retry by plain
rejection, raising ``SamplingFailure`` with the attempt count when their
budget runs out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .distributions import ServiceDistribution
from .paths import Excursion, Path, StepPath

__all__ = [
    "LocalTimeProfile",
    "SamplingFailure",
    "simulate_levy",
    "local_time_profile",
    "simulate_to_inverse_local_time",
    "sample_conditioned_excursion",
]

_CHUNK = 8192


class SamplingFailure(RuntimeError):
    """A rejection sampler ran out of attempts."""

    def __init__(self, message, attempts):
        super().__init__(f"{message} (after {attempts} attempts)")
        self._message = message
        self.attempts = attempts

    def __reduce__(self):
        # keep the exception picklable across process boundaries
        return (SamplingFailure, (self._message, self.attempts))


# ---------------------------------------------------------------------------
# local-time profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocalTimeProfile:
    """Step function level -> visit count.

    ``counts[i]`` is the number of visits to every level in the half-open
    interval ``(levels[i], levels[i+1]]``; the count is 0 outside
    ``(levels[0], levels[-1]]``.  Exact profiles from paths carry integer
    counts (``local_time_profile`` enforces that); grid-harvested profiles
    from the diffusion side are occupation estimates and may be fractional.
    """

    levels: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.float64)
        if len(levels) != len(counts) + 1 or len(counts) == 0:
            raise ValueError("need k+1 level breakpoints for k counts")
        if np.any(np.diff(levels) <= 0.0):
            raise ValueError("level breakpoints must increase strictly")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "counts", counts)

    def count_at(self, a):
        """Visits to the exact level ``a`` (vectorized)."""
        a = np.asarray(a, dtype=np.float64)
        idx = np.searchsorted(self.levels, a, side="left") - 1
        inside = (idx >= 0) & (idx < len(self.counts))
        out = np.where(inside, self.counts[np.clip(idx, 0, len(self.counts) - 1)], 0.0)
        return out if a.ndim else float(out)

    def total_mass(self):
        """Integral of the profile over all levels."""
        return float(np.dot(self.counts, np.diff(self.levels)))

    def max_count(self):
        return float(self.counts.max())

    def top_level(self):
        return float(self.levels[-1])

    def as_population_path(self) -> StepPath:
        """Read the profile as a cadlag path of the level.

        The count on ``(levels[i], levels[i+1]]`` becomes the value on
        ``[levels[i], levels[i+1])`` shifted to start at 0 — the dual
        boundary convention, so the two step functions agree except on
        the (finite) breakpoint set itself.
        """
        starts = self.levels[:-1] - self.levels[0]
        values = self.counts.astype(np.float64)
        return StepPath(starts, values,
                        end_time=self.levels[-1] - self.levels[0])

    def to_text(self):
        lines = ["ltp v1"]
        for a, c in zip(self.levels[:-1], self.counts):
            c_txt = repr(int(c)) if float(c).is_integer() else repr(float(c))
            lines.append(f"{float(a)!r} {c_txt}")
        lines.append(f"{float(self.levels[-1])!r} 0")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        rows = [ln for ln in text.strip().splitlines() if ln.strip()]
        if not rows or rows[0].strip() != "ltp v1":
            raise ValueError("not an ltp v1 payload")
        levels, counts = [], []
        for ln in rows[1:]:
            a, c = ln.split()
            levels.append(float(a))
            counts.append(float(c))
        if counts and counts[-1] != 0.0:
            raise ValueError("top sentinel count must be 0")
        return cls(np.array(levels), np.array(counts[:-1]))


def local_time_profile(x: Path, upto=None, *, floor=0.0) -> LocalTimeProfile:
    """Exact visit counts of the descending segments of ``x`` on [0, upto].

    ``upto`` defaults to the end of the domain, or to the last breakpoint
    for paths absorbed on an unbounded domain (the flat tail adds no
    visits).  Only levels above ``floor`` are profiled; pass ``floor=None``
    to keep every level the path attained.  Descending slopes must be
    exactly -1 and flat segments are ignored; anything else is rejected.
    """
    if upto is None:
        upto = x.end_time if math.isfinite(x.end_time) else float(x.starts[-1])
    upto = float(upto)
    if not np.isfinite(upto) or upto <= 0.0 or upto > x.end_time:
        raise ValueError("upto must be finite and lie in (0, end_time]")
    keep = x.starts < upto
    starts = x.starts[keep]
    v_start = x.values[keep]
    slopes = x.slopes[keep]
    if not np.all(np.isin(slopes, (-1.0, 0.0))):
        raise ValueError("profiles are defined for unit-drift paths only")
    seg_end = np.minimum(np.append(starts[1:], np.inf), upto)
    v_end = v_start + slopes * (seg_end - starts)
    desc = slopes == -1.0
    lo, hi = v_end[desc], v_start[desc]
    if floor is not None:
        lo = np.maximum(lo, floor)
        sel = hi > lo
        lo, hi = lo[sel], hi[sel]
    if len(lo) == 0:
        top = max(x.initial_value, floor if floor is not None else 0.0)
        return LocalTimeProfile(np.array([top, top + 1.0]), np.array([0]))
    grid = np.unique(np.concatenate([lo, hi]))
    delta = np.zeros(len(grid), dtype=np.int64)
    np.add.at(delta, np.searchsorted(grid, lo), 1)
    np.add.at(delta, np.searchsorted(grid, hi), -1)
    counts = np.cumsum(delta)[:-1]
    return LocalTimeProfile(grid, counts)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def _assemble(x0, jump_t, jump_s, nj, kind, level, kernel_t):
    """Build the stopped path, recomputing the stop time from the assembled
    breakpoint values so that exact-root checks downstream see one
    consistent float story."""
    starts = np.concatenate([[0.0], jump_t[:nj]])
    values = np.concatenate([[x0], x0 - jump_t[:nj] + np.cumsum(jump_s[:nj])])
    dup = np.flatnonzero(np.diff(starts) == 0.0)
    if len(dup):  # two jumps at one float instant collapse into one
        keep = np.ones(len(starts), dtype=bool)
        keep[dup] = False
        starts, values = starts[keep], values[keep]
    slopes = np.full(len(starts), -1.0)
    if kind == "horizon":
        return Path(starts, values, slopes, end_time=kernel_t)
    end = starts[-1] + (values[-1] - level)
    if kind == "first-passage" and level == 0.0:
        # The excursion validator re-derives the end value as
        # v + a*(t1 - t0), which lands an ulp off the root t0 + v on
        # non-dyadic data, so validate by construction instead: every
        # breakpoint before the absorption is strictly positive and the
        # absorbed tail is exactly zero.
        if np.any(values <= 0.0) or not end > starts[-1]:
            raise ValueError("assembled arch lost positivity to rounding")
        starts = np.append(starts, end)
        values = np.append(values, 0.0)
        slopes = np.append(slopes, 0.0)
        return Excursion(starts, values, slopes, end_time=math.inf,
                         _validate=False)
    return Path(starts, values, slopes, end_time=end)


def _run_drift_jump(rng, arrival_rate, service, x0, mode, horizon, level,
                    target_visits, time_budget, depth_cutoff, visits0,
                    est_jumps):
    cap = max(64, int(est_jumps))
    jump_t = np.empty(cap)
    jump_s = np.empty(cap)
    t, x, visits, nj = 0.0, float(x0), visits0, 0
    while True:
        exp_draws = rng.exponential(1.0, _CHUNK)
        size_draws = np.asarray(service.sample(rng, _CHUNK), dtype=np.float64)
        status, t, x, visits, nj, _, _ = _kernels.drift_jump_kernel(
            t, x, visits, arrival_rate, mode, horizon, level,
            target_visits, time_budget, depth_cutoff,
            exp_draws, size_draws, jump_t, jump_s, nj)
        if status == _kernels.EVENTS_FULL:
            jump_t = np.concatenate([jump_t, np.empty(cap)])
            jump_s = np.concatenate([jump_s, np.empty(cap)])
            cap *= 2
        elif status in (_kernels.NEED_EXP, _kernels.NEED_SIZES):
            continue
        else:
            return status, t, x, visits, jump_t, jump_s, nj


def _guards(arrival_rate, service, rho, visits):
    scale = max(arrival_rate * service.second_moment() / 2.0, service.mean())
    return 30.0 * visits * scale / (1.0 - rho), 50.0 * scale / (1.0 - rho)


def simulate_levy(rng, arrival_rate, service: ServiceDistribution, x0=0.0,
                  stop=("horizon", 1.0)):
    """Exact event-driven path of the drift-and-jump process.

    ``stop`` is a tagged pair: ``("horizon", t)``; ``("first-passage",
    level)`` for the exact downward passage onto ``level`` (the result is
    an absorbed excursion when the level is 0); or ``("visits", m)`` for
    the m-th exact visit to 0, counting the start at 0 as the first.
    Visit stopping is not almost-surely reachable, so it runs under depth
    and time guards and raises ``SamplingFailure`` if they trip; use
    ``simulate_to_inverse_local_time`` for the retrying version.
    """
    kind, param = stop
    rho = arrival_rate * service.mean()
    x0 = float(x0)
    time_budget = depth_cutoff = math.inf
    if kind == "horizon":
        mode, horizon, level, target = 0, float(param), 0.0, 0
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        est = arrival_rate * horizon
    elif kind == "first-passage":
        mode, horizon, level, target = 1, math.inf, float(param), 0
        if x0 <= level:
            raise ValueError(
                f"first-passage start {x0} must sit above the level {param}")
        if rho >= 1.0:
            raise ValueError("first-passage stopping needs load below 1")
        est = arrival_rate * (x0 - level) / (1.0 - rho)
    elif kind == "visits":
        mode, horizon, level, target = 2, math.inf, 0.0, int(param)
        if rho >= 1.0:
            raise ValueError("visit stopping needs load below 1")
        if target < 2 or x0 != 0.0:
            raise ValueError("visit stopping starts at 0 and needs m >= 2; "
                             "m = 1 is the start itself and spans no time")
        time_budget, depth_cutoff = _guards(arrival_rate, service, rho, target)
        est = arrival_rate * time_budget / 8.0
    else:
        raise ValueError(f"unknown stop rule {kind!r}")

    if arrival_rate == 0.0:  # pure drift, no jumps
        if kind == "horizon":
            return Path([0.0], [x0], [-1.0], end_time=horizon)
        if kind == "first-passage":
            return _assemble(x0, np.empty(0), np.empty(0), 0, kind, level, 0.0)
        raise SamplingFailure("a jump-free path never revisits 0", 1)

    status, t, x, visits, jump_t, jump_s, nj = _run_drift_jump(
        rng, arrival_rate, service, x0, mode, horizon, level, target,
        time_budget, depth_cutoff, 1 if x0 == 0.0 else 0,
        est + 4.0 * math.sqrt(est + 1.0) + 16.0)
    if status != _kernels.OK:
        raise SamplingFailure(
            f"visit run left for good before visit {target}", 1)
    return _assemble(x0, jump_t, jump_s, nj, kind, level, t)


def simulate_to_inverse_local_time(rng, arrival_rate,
                                   service: ServiceDistribution,
                                   zeta_visits, max_attempts=10**6):
    """Path from 0 stopped at its ``zeta_visits``-th exact visit to 0.

    The start counts as the first visit.  Between visits the path dips
    below 0 and only returns if its jumps carry it back over, which
    happens with probability below 1 per dip; the sampler rejects and
    retries whenever a dip drifts past a depth from which a return is
    (numerically) impossible, so the returned path is conditioned on
    actually reaching the requested visit.  Raises ``SamplingFailure``
    when ``max_attempts`` runs out.
    """
    zeta_visits = int(zeta_visits)
    if zeta_visits < 2:
        raise ValueError("need at least two visits: the start is the first, "
                         "and the trivial case spans no time")
    rho = arrival_rate * service.mean()
    if not 0.0 < rho < 1.0:
        raise ValueError("visit sampling needs load strictly between 0 and 1")
    time_budget, depth_cutoff = _guards(arrival_rate, service, rho, zeta_visits)
    est = arrival_rate * time_budget / 8.0
    for _ in range(max_attempts):
        status, t, x, visits, jump_t, jump_s, nj = _run_drift_jump(
            rng, arrival_rate, service, 0.0, 2, math.inf, 0.0, zeta_visits,
            time_budget, depth_cutoff, 1, est)
        if status == _kernels.OK:
            return _assemble(0.0, jump_t, jump_s, nj, "visits", 0.0, t)
    raise SamplingFailure(
        f"no path reached visit {zeta_visits} to 0", max_attempts)


def sample_conditioned_excursion(rng, arrival_rate,
                                 service: ServiceDistribution, n, eps,
                                 max_attempts=10**6):
    """Rescaled first-passage arch conditioned to live longer than ``eps``.

    Draws the initial value as one service requirement over ``n``, runs the
    unscaled path to its exact first passage of 0, rescales time by ``n**2``
    and space by ``n``, and accepts iff the rescaled lifetime exceeds
    ``eps``.  Plain rejection; raises ``SamplingFailure`` on exhaustion.
    """
    from .scaling import rescale

    if eps <= 0:
        raise ValueError("eps must be positive")
    n = int(n)
    raw_budget = float(eps) * n * n
    for _ in range(max_attempts):
        x0 = float(service.sample(rng))
        arch = simulate_levy(rng, arrival_rate, service, x0=x0,
                             stop=("first-passage", 0.0))
        if arch.lifetime > raw_budget:
            return rescale(arch, n, kind="levy")
    raise SamplingFailure(
        f"no excursion outlived eps={eps} at n={n}", max_attempts)


def _sample_ladder_height(rng, arrival_rate, service, max_attempts=10**6):
    """First value of the path strictly above its starting level.

    From 0 the path drifts down and only recrosses its start by a jump;
    that happens with probability ``rho`` per dip, and conditioned on it
    happening the landing height follows the stationary residual of the
    jump law, whatever the load.  Runs the two-visit sampler (which does
    the conditioning by rejection) and reads off the first breakpoint
    value above zero.
    """
    p = simulate_to_inverse_local_time(rng, arrival_rate, service, 2,
                                       max_attempts)
    above = p.values[p.values > 0.0]
    return float(above[0])
