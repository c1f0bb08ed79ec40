"""Rescaling operators and the diffusion-limit simulators.

``rescale`` is exact breakpoint arithmetic on piecewise-affine paths: queue
and drift-jump paths shrink time by n**2 and space by n, population paths
shrink both by n, and visit-count profiles shrink levels and counts by n.

The limit objects are the only grid-based paths in the package.  The
reflected Brownian motion has drift ``-alpha`` and Gaussian coefficient
``2*beta`` and is reflected above its past infimum exactly like the exact
paths are (``reflect``); the branching diffusion follows
``dY = -(alpha/beta) Y dt + sqrt((2/beta) Y) dB`` with full truncation inside
the square root and an absorbing boundary at 0.  Both return piecewise-linear
paths tagged approximate.  Vectorized marginal samplers and the excursion
harvester live here too; the harvester walks a long reflected path, cuts it
at its exact grid zeros, and bins occupation time to estimate the local-time
profile of excursions longer than ``eps``.
"""

from __future__ import annotations

import math

import numpy as np

from .levy import LocalTimeProfile, SamplingFailure
from .paths import Excursion, Path, StepPath

__all__ = [
    "rescale",
    "rescale_profile",
    "simulate_reflected_bm",
    "simulate_feller",
    "harvest_bm_excursion_local_time",
]

_KIND_TIME_POWER = {"queue": 2, "levy": 2, "cmj": 1}


def rescale(p: Path, n, kind="queue") -> Path:
    """Shrink a path: time by n**2 (queue/levy) or n (cmj), space by n.

    ``n`` may be any positive real, so rescaling by ``1/n`` inverts the
    map (up to float round-off).  The input's class is preserved.
    """
    if kind not in _KIND_TIME_POWER:
        raise ValueError(f"unknown rescale kind {kind!r}")
    n = float(n)
    if n <= 0:
        raise ValueError("n must be positive")
    tdiv = n ** _KIND_TIME_POWER[kind]
    starts = p.starts / tdiv
    values = p.values / n
    slopes = p.slopes * (tdiv / n)
    end = p.end_time / tdiv
    cls = Excursion if isinstance(p, Excursion) else Path
    if isinstance(p, StepPath):
        return StepPath(starts, values, end_time=end,
                        approximate=p.approximate, _validate=False)
    return cls(starts, values, slopes, end_time=end,
               approximate=p.approximate, _validate=False)


def rescale_profile(profile: LocalTimeProfile, n) -> LocalTimeProfile:
    """Visit-count profile under the same space shrink: levels/n, counts/n."""
    n = float(n)
    if n <= 0:
        raise ValueError("n must be positive")
    return LocalTimeProfile(profile.levels / n, profile.counts / n)


# ---------------------------------------------------------------------------
# grid diffusions
# ---------------------------------------------------------------------------

def _as_grid_path(values, dt, approximate=True):
    m = len(values) - 1
    times = np.arange(m + 1) * dt
    slopes = np.diff(values) / dt
    return Path(times[:-1], values[:-1], slopes, end_time=times[-1],
                approximate=approximate)


def simulate_reflected_bm(rng, alpha, beta, x0=0.0, dt=1e-4, horizon=1.0) -> Path:
    """Euler path of drift ``-alpha``, variance ``2*beta`` motion from x0,
    reflected above its past infimum; piecewise-linear, approximate."""
    if dt <= 0 or horizon <= 0:
        raise ValueError("dt and horizon must be positive")
    m = max(1, int(round(horizon / dt)))
    inc = rng.normal(-alpha * dt, math.sqrt(2.0 * beta * dt), m)
    free = np.empty(m + 1)
    free[0] = x0
    np.cumsum(inc, out=free[1:])
    free[1:] += x0
    floor = np.minimum(np.minimum.accumulate(free), 0.0)
    return _as_grid_path(free - floor, dt)


def simulate_feller(rng, alpha, beta, y0, dt=1e-4, horizon=1.0) -> Path:
    """Euler path of ``dY = -(alpha/beta) Y dt + sqrt((2/beta) Y) dB``,
    absorbed the first time it falls to or below 0; piecewise-linear,
    approximate.

    The squared diffusion coefficient ``(2/beta) y`` matches the variance
    of the near-critical population limit: slowing the clock of the
    reflected motion (drift ``-alpha/beta``, variance ``2/beta``) by its
    height scales the variance rate by the height and nothing else.
    """
    if dt <= 0 or horizon <= 0:
        raise ValueError("dt and horizon must be positive")
    if y0 < 0:
        raise ValueError("y0 must be nonnegative")
    m = max(1, int(round(horizon / dt)))
    a = alpha / beta
    c = 2.0 / beta
    y = np.empty(m + 1)
    y[0] = y0
    cur = float(y0)
    noise = rng.standard_normal(m)
    sq = math.sqrt(dt)
    for k in range(m):
        if cur <= 0.0:
            y[k + 1 :] = 0.0
            break
        cur = cur - a * cur * dt + math.sqrt(c * cur) * sq * noise[k]
        if cur <= 0.0:
            cur = 0.0
        y[k + 1] = cur
    return _as_grid_path(y, dt)


def _reflected_bm_marginals(rng, alpha, beta, x0, dt, sample_times, reps):
    """Reflected values at the requested times, streamed across one grid.

    Returns an array of shape (len(sample_times), reps).
    """
    sample_times = np.asarray(sample_times, dtype=float)
    steps_at = np.rint(sample_times / dt).astype(np.int64)
    if len(np.unique(steps_at)) != len(steps_at):
        raise ValueError("sample times collide on the dt grid")
    m = int(steps_at.max())
    free = np.full(reps, float(x0))
    floor = np.minimum(free, 0.0)
    out = np.empty((len(sample_times), reps))
    hit = {int(s): i for i, s in enumerate(steps_at)}
    if 0 in hit:
        out[hit[0]] = free - floor
    drift = -alpha * dt
    sig = math.sqrt(2.0 * beta * dt)
    for k in range(1, m + 1):
        free += drift + sig * rng.standard_normal(reps)
        np.minimum(floor, free, out=floor)
        if k in hit:
            out[hit[k]] = free - floor
    return out


def _feller_marginals(rng, alpha, beta, y0, dt, sample_times, reps):
    """Absorbed-diffusion values at the requested times, shape (times, reps)."""
    sample_times = np.asarray(sample_times, dtype=float)
    steps_at = np.rint(sample_times / dt).astype(np.int64)
    if len(np.unique(steps_at)) != len(steps_at):
        raise ValueError("sample times collide on the dt grid")
    m = int(steps_at.max())
    a = alpha / beta
    c = 2.0 / beta
    y = np.full(reps, float(y0))
    out = np.empty((len(sample_times), reps))
    hit = {int(s): i for i, s in enumerate(steps_at)}
    if 0 in hit:
        out[hit[0]] = y
    sq = math.sqrt(dt)
    for k in range(1, m + 1):
        y += -a * y * dt + np.sqrt(c * np.maximum(y, 0.0)) * (sq * rng.standard_normal(reps))
        np.maximum(y, 0.0, out=y)
        if k in hit:
            out[hit[k]] = y
    return out


# ---------------------------------------------------------------------------
# excursion harvesting from the reflected motion
# ---------------------------------------------------------------------------

def _harvest_stats(rng, alpha, beta, eps, dt, count, level_bin=None,
                   chunk_steps=2_000_000, max_chunks=400):
    """Statistics of reflected-motion excursions longer than ``eps``.

    Walks one long reflected path in chunks, restarting each chunk from a
    zero (the zeros are renewal points, so excursions across chunks are
    independent draws from the same conditioned law).  Returns a dict of
    arrays: lengths, sups, and — when ``level_bin`` is given — the max of
    the binned local-time estimate and one representative profile.
    """
    min_steps = int(math.ceil(eps / dt))
    lengths, sups, ltmax = [], [], []
    profile = None
    drift = -alpha * dt
    sig = math.sqrt(2.0 * beta * dt)
    for _ in range(max_chunks):
        inc = rng.normal(drift, sig, chunk_steps)
        free = np.cumsum(inc)
        floor = np.minimum(np.minimum.accumulate(free), 0.0)
        refl = free - floor
        # a grid zero is an exact new running minimum (or the start)
        zeros = np.flatnonzero(refl == 0.0)
        zeros = np.concatenate([[-1], zeros])  # the start is a zero too
        gaps = np.diff(zeros)
        long_ix = np.flatnonzero(gaps > min_steps)
        for j in long_ix:
            g, d = zeros[j], zeros[j + 1]
            seg = refl[g + 1 : d]
            lengths.append(gaps[j] * dt)
            sups.append(float(seg.max()))
            if level_bin is not None:
                top = float(seg.max())
                edges = np.arange(0.0, top + 2.0 * level_bin, level_bin)
                occ, _ = np.histogram(seg, bins=edges)
                counts = occ * (dt / level_bin)
                ltmax.append(float(counts.max()))
                if profile is None:
                    profile = LocalTimeProfile(edges, counts)
            if len(lengths) >= count:
                out = {"lengths": np.array(lengths), "sups": np.array(sups)}
                if level_bin is not None:
                    out["lt_max"] = np.array(ltmax)
                    out["profile"] = profile
                return out
    raise SamplingFailure(
        f"harvest found {len(lengths)} of {count} excursions longer than {eps}",
        max_chunks)


def harvest_bm_excursion_local_time(rng, alpha, beta, eps, dt=1e-5,
                                    level_bin=1e-2, max_tries=50) -> LocalTimeProfile:
    """Binned local-time profile of one reflected-motion excursion with
    lifetime above ``eps``: profile(a) ~ dt/level_bin * #{grid values in
    [a, a+level_bin)}.  Retries internally and raises ``SamplingFailure``
    if no long excursion shows up.
    """
    stats = _harvest_stats(rng, alpha, beta, eps, dt, 1, level_bin=level_bin,
                           chunk_steps=400_000, max_chunks=max_tries)
    return stats["profile"]
