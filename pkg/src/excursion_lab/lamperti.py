"""Lamperti time substitution between excursions.

The forward map ``lamperti(e)`` runs the clock of ``e`` at speed ``e`` itself:
it returns ``e`` composed with the inverse of ``t -> int_0^t e(s) ds``.  The
inverse map ``lamperti_inverse(e)`` slows the clock down by the current value,
composing ``e`` with the inverse of ``t -> int_0^t 1/e(s) ds``.  Both act on
excursions (single positive arches absorbed at zero) and return excursions on
an unbounded domain, absorbed at zero from the image lifetime on.

For step excursions both maps are exact: a flat piece of duration ``d`` at
height ``v`` becomes a flat piece of duration ``d * v`` (forward) or ``d / v``
(inverse) at the same height, so values and jumps are carried over unchanged
and only the breakpoint clock is rescaled.  For excursions with sloped
segments the breakpoints and their values are still mapped exactly, but the
interior of each mapped segment is replaced by the chord between its exact
endpoints; such results are flagged ``approximate``.

``lamperti_inverse`` is only defined when ``int_0^T 1/e`` converges, which for
piecewise-affine excursions fails exactly when ``e`` leaves or hits zero
continuously (a sloped segment with a zero endpoint).  ``integrable_reciprocal``
decides membership exactly, segment by segment.

Two identities tie the maps to plain integrals and are used heavily in tests:
the lifetime of ``lamperti(e)`` equals ``int_0^T e``, and the lifetime of
``lamperti_inverse(e)`` equals ``int_0^T 1/e``.
"""

from __future__ import annotations

import math

import numpy as np

from .paths import Excursion, Path, StepPath

__all__ = ["lamperti", "lamperti_inverse", "integrable_reciprocal"]


def _as_excursion(e: Path) -> Excursion:
    return e if isinstance(e, Excursion) else Excursion.from_path(e)


def _live_segments(exc: Excursion):
    """Segment data (durations, start values, end values, slopes) before the lifetime."""
    T = exc.lifetime
    # The lifetime lands on a breakpoint (validated), so segments < n are live.
    n = exc.segment_index(T)
    durs = np.diff(np.append(exc.starts[:n], T))
    vals = exc.values[:n]
    slopes = exc.slopes[:n]
    ends = vals + slopes * durs
    return T, durs, vals, ends, slopes


def _assemble(exc: Excursion, new_durs: np.ndarray, vals: np.ndarray,
              ends: np.ndarray, is_step: bool) -> Path:
    """Build the mapped excursion from per-segment image durations."""
    if np.any(new_durs <= 0.0) or not np.all(np.isfinite(new_durs)):
        raise ValueError("time substitution produced a degenerate segment")
    starts = np.concatenate([[0.0], np.cumsum(new_durs)])
    values = np.append(vals, 0.0)
    if is_step:
        return StepPath(starts, values, end_time=math.inf,
                        approximate=exc.approximate)
    slopes = np.append((ends - vals) / new_durs, 0.0)
    return Excursion(starts, values, slopes, end_time=math.inf,
                     approximate=bool(np.any(slopes != 0.0)) or exc.approximate)


def lamperti(e: Path) -> Path:
    """Speed the clock of ``e`` up by its own height.

    Exact for step excursions; for sloped segments the image breakpoints and
    values are exact and interiors are chords (result marked approximate).
    """
    exc = _as_excursion(e)
    T, durs, vals, ends, slopes = _live_segments(exc)
    # Exact area of each affine segment.
    new_durs = durs * (vals + ends) * 0.5
    return _assemble(exc, new_durs, vals, ends, exc.is_step())


def lamperti_inverse(e: Path) -> Path:
    """Slow the clock of ``e`` down by its own height.

    Requires ``int 1/e`` to converge (see ``integrable_reciprocal``); raises
    ``ValueError`` otherwise.  Exact for step excursions.
    """
    exc = _as_excursion(e)
    if not integrable_reciprocal(exc):
        raise ValueError(
            "1/e is not integrable over the excursion: a sloped segment "
            "meets zero continuously"
        )
    T, durs, vals, ends, slopes = _live_segments(exc)
    new_durs = np.empty_like(durs)
    for i in range(len(durs)):
        if slopes[i] == 0.0:
            new_durs[i] = durs[i] / vals[i]
        else:
            # int_0^d ds / (v + a s) = log(end/start) / a, both endpoints > 0.
            new_durs[i] = math.log(ends[i] / vals[i]) / slopes[i]
    return _assemble(exc, new_durs, vals, ends, exc.is_step())


def integrable_reciprocal(e: Path) -> bool:
    """Exact test that ``int_0^T 1/e(s) ds`` converges.

    True iff every segment before the lifetime stays away from zero: flat
    segments always do (their value is positive strictly before the lifetime),
    and a sloped segment qualifies iff both its endpoint values are positive.
    An excursion that leaves zero with a slope, or is absorbed by sloping down
    to zero, is excluded; one that enters and exits zero by jumps is fine.
    """
    exc = _as_excursion(e)
    T, durs, vals, ends, slopes = _live_segments(exc)
    flat = slopes == 0.0
    ok_flat = vals > 0.0
    ok_sloped = (vals > 0.0) & (ends > 0.0)
    return bool(np.all(np.where(flat, ok_flat, ok_sloped)))
