"""Exact piecewise-affine path algebra.

Every simulator in this package produces cadlag paths that are affine
between finitely many breakpoints, with (possibly) a jump at each
breakpoint.  This module gives that class of paths a small exact
calculus: evaluation, reflection above the past infimum, first hitting
time of zero, windowing/shift/stop, excursion extraction, truncation of
short excursions, splicing, and occupation integrals against piecewise
linear test functions.  All operations work on the breakpoint
representation in closed form; nothing here is discretized.

Conventions
-----------
* A path is defined on [0, end_time) with end_time in (0, inf].
* ``values[i]`` is the value *at* ``starts[i]`` (cadlag: post-jump).
* A discontinuity at a breakpoint encodes a jump; between breakpoints
  the path is affine with the stored slope.
* Killed/absorbed paths carry a final constant segment, so a
  first-passage path is identically zero from its hitting time on and
  its end_time is inf.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "Path",
    "StepPath",
    "Excursion",
    "ExcursionTriple",
    "PiecewiseLinearFn",
    "TruncationWarning",
    "as_step",
    "paths_equal",
    "reflect",
    "hitting_time_zero",
    "window",
    "extract_first_long_excursion",
    "truncate_small_excursions",
    "concatenate",
    "occupation_integral",
]

#: tolerance used by :func:`paths_equal` and canonical merging
EQUALITY_TOL = 1e-9


class TruncationWarning(UserWarning):
    """A trailing incomplete excursion was zeroed conservatively."""


def _as_float_array(x) -> NDArray[np.float64]:
    a = np.array(x, dtype=np.float64, copy=True, order="C")
    if a.ndim != 1:
        raise ValueError("expected a 1-d array of floats")
    return a


class Path:
    """Cadlag piecewise-affine path on [0, end_time).

    Parameters
    ----------
    starts : array_like
        Strictly increasing breakpoint times, ``starts[0] == 0``.
    values : array_like
        Path value at each breakpoint (post-jump).
    slopes : array_like
        Affine slope on each segment ``[starts[i], starts[i+1])``.
    end_time : float
        Right end of the domain, ``end_time > starts[-1]`` (may be inf).
    approximate : bool
        Marks grid-built paths (e.g. Euler schemes); exact operations
        propagate the flag but otherwise ignore it.
    """

    __slots__ = ("starts", "values", "slopes", "end_time", "approximate")

    def __init__(self, starts, values, slopes, end_time=math.inf, *,
                 approximate: bool = False, _validate: bool = True):
        starts = _as_float_array(starts)
        values = _as_float_array(values)
        slopes = _as_float_array(slopes)
        end_time = float(end_time)
        if _validate:
            if len(starts) == 0:
                raise ValueError("a path needs at least one segment")
            if not (len(starts) == len(values) == len(slopes)):
                raise ValueError("starts/values/slopes length mismatch")
            if starts[0] != 0.0:
                raise ValueError("first breakpoint must be at t=0")
            if len(starts) > 1 and not np.all(np.diff(starts) > 0):
                raise ValueError("breakpoint times must be strictly increasing")
            if not end_time > starts[-1]:
                raise ValueError("end_time must exceed the last breakpoint")
            if not (np.all(np.isfinite(values)) and np.all(np.isfinite(slopes))):
                raise ValueError("values and slopes must be finite")
        for a in (starts, values, slopes):
            a.flags.writeable = False
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "end_time", end_time)
        object.__setattr__(self, "approximate", bool(approximate))

    def __setattr__(self, name, value):  # paths are immutable
        raise AttributeError("Path objects are immutable")

    # -- basic queries -------------------------------------------------

    @property
    def initial_value(self) -> float:
        return float(self.values[0])

    def __len__(self) -> int:
        return len(self.starts)

    def __repr__(self) -> str:
        return (f"{type(self).__name__}({len(self)} segments, "
                f"end_time={self.end_time!r}, f(0)={self.initial_value!r})")

    def segment_index(self, t):
        """Index of the segment whose half-open interval contains t."""
        idx = np.searchsorted(self.starts, t, side="right") - 1
        return idx if np.ndim(t) else int(idx)

    def __call__(self, t):
        """Evaluate at scalar or array times in [0, end_time)."""
        t_arr = np.asarray(t, dtype=np.float64)
        if np.any(t_arr < 0.0) or np.any(t_arr >= self.end_time):
            raise ValueError("evaluation time outside [0, end_time)")
        idx = np.searchsorted(self.starts, t_arr, side="right") - 1
        out = self.values[idx] + self.slopes[idx] * (t_arr - self.starts[idx])
        return out if np.ndim(t) else float(out)

    def left_limit(self, t: float) -> float:
        """Value of the path as s -> t from below; t in (0, end_time]."""
        t = float(t)
        if not 0.0 < t <= self.end_time or math.isinf(t):
            raise ValueError("left limit requires finite t in (0, end_time]")
        i = int(np.searchsorted(self.starts, t, side="left")) - 1
        return float(self.values[i] + self.slopes[i] * (t - self.starts[i]))

    def jump_at(self, t: float) -> float:
        """Jump size at time t (0 where the path is continuous)."""
        t = float(t)
        if t == 0.0:
            return 0.0
        return self(t) - self.left_limit(t)

    def is_step(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.slopes) <= tol))

    def segment_end_values(self) -> NDArray[np.float64]:
        """Left limit at the end of each segment (+-inf on an unbounded tail)."""
        ends = np.append(self.starts[1:], self.end_time)
        out = np.empty(len(self.starts))
        fin = np.isfinite(ends)
        out[fin] = self.values[fin] + self.slopes[fin] * (ends[fin] - self.starts[fin])
        if not fin.all():
            s = self.slopes[-1]
            out[-1] = self.values[-1] if s == 0.0 else math.copysign(math.inf, s)
        return out

    # -- canonical form ---------------------------------------------------

    def canonical(self, tol: float = EQUALITY_TOL) -> "Path":
        """Merge breakpoints where the path continues affinely.

        A breakpoint is redundant when there is no jump and the slope is
        unchanged, both up to ``tol`` scaled by local magnitude.
        """
        if len(self) == 1:
            return self
        starts, values, slopes = self.starts, self.values, self.slopes
        keep_s = [float(starts[0])]
        keep_v = [float(values[0])]
        keep_a = [float(slopes[0])]
        for i in range(1, len(starts)):
            cont = keep_v[-1] + keep_a[-1] * (float(starts[i]) - keep_s[-1])
            scale = max(1.0, abs(cont), abs(float(values[i])))
            if (abs(float(values[i]) - cont) <= tol * scale
                    and abs(float(slopes[i]) - keep_a[-1]) <= tol * max(1.0, abs(keep_a[-1]))):
                continue
            keep_s.append(float(starts[i]))
            keep_v.append(float(values[i]))
            keep_a.append(float(slopes[i]))
        if len(keep_s) == len(starts):
            return self
        return Path(keep_s, keep_v, keep_a, self.end_time,
                    approximate=self.approximate, _validate=False)

    # -- serialization ("path v1") -----------------------------------------

    def to_text(self) -> str:
        """Serialize to the ``path v1`` line format.

        Header ``path v1 end=<t>`` followed by one ``t v slope`` line per
        segment; floats use shortest round-trip formatting.
        """
        lines = [f"path v1 end={_fmt(self.end_time)}"]
        for t, v, a in zip(self.starts, self.values, self.slopes):
            lines.append(f"{_fmt(t)} {_fmt(v)} {_fmt(a)}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "Path":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("path v1"):
            raise ValueError("not a 'path v1' document")
        end = None
        for tok in lines[0].split()[2:]:
            if tok.startswith("end="):
                end = float(tok[4:])
        if end is None:
            raise ValueError("path v1 header is missing end=")
        starts, values, slopes = [], [], []
        for ln in lines[1:]:
            parts = ln.split()
            if len(parts) != 3:
                raise ValueError(f"malformed segment line: {ln!r}")
            starts.append(float(parts[0]))
            values.append(float(parts[1]))
            slopes.append(float(parts[2]))
        return Path(starts, values, slopes, end)


def _fmt(x: float) -> str:
    if x == math.inf:
        return "inf"
    if x == -math.inf:
        return "-inf"
    return repr(float(x))


class StepPath(Path):
    """Piecewise-constant cadlag path (all slopes zero)."""

    __slots__ = ()

    def __init__(self, times, values, end_time=math.inf, *,
                 approximate: bool = False, _validate: bool = True):
        times = _as_float_array(times)
        super().__init__(times, values, np.zeros(len(times)), end_time,
                         approximate=approximate, _validate=_validate)


def as_step(p: Path) -> StepPath:
    """Reinterpret an all-zero-slope Path as a StepPath."""
    if not p.is_step():
        raise ValueError("path has nonzero slopes; not a step path")
    return StepPath(p.starts, p.values, p.end_time,
                    approximate=p.approximate, _validate=False)


class Excursion(Path):
    """A nonnegative path absorbed at zero after a finite lifetime.

    The lifetime ``T`` (first zero at positive time) must lie in
    (0, inf); the path may start at 0 provided it leaves immediately,
    and must be identically zero from ``T`` on.
    """

    __slots__ = ()

    def __init__(self, starts, values, slopes, end_time=math.inf, *,
                 approximate: bool = False, _validate: bool = True):
        super().__init__(starts, values, slopes, end_time,
                         approximate=approximate, _validate=_validate)
        if _validate:
            self._check_excursion()

    @classmethod
    def from_path(cls, p: Path) -> "Excursion":
        return cls(p.starts, p.values, p.slopes, p.end_time,
                   approximate=p.approximate)

    def _check_excursion(self) -> None:
        if np.any(self.values < 0.0):
            raise ValueError("excursion values must be nonnegative")
        ends = self.segment_end_values()
        if np.any(ends < 0.0):
            raise ValueError("excursion goes below zero inside a segment")
        T = hitting_time_zero(self)
        if not 0.0 < T < math.inf:
            raise ValueError(f"excursion lifetime must lie in (0, inf); got {T}")
        tail = self.starts >= T
        if np.any(self.values[tail] != 0.0) or np.any(self.slopes[tail] != 0.0):
            raise ValueError("excursion must stay at zero after its lifetime")
        if T < self.end_time and float(self.starts[self.segment_index(T)]) != T:
            raise ValueError("excursion returns to zero off a breakpoint")

    @property
    def lifetime(self) -> float:
        """First return time to zero (exact)."""
        return hitting_time_zero(self)


@dataclass(frozen=True)
class ExcursionTriple:
    """An excursion with its endpoints in the path it came from."""

    excursion: Excursion
    start: float
    end: float

    @property
    def length(self) -> float:
        return self.end - self.start


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def paths_equal(f: Path, g: Path, tol: float = EQUALITY_TOL) -> bool:
    """Structural equality after merging redundant breakpoints.

    Two paths are equal when their canonical forms have the same number
    of segments and agree breakpoint-by-breakpoint in time, value and
    slope within ``tol`` (scaled by magnitude), with matching end times.
    """
    a, b = f.canonical(tol), g.canonical(tol)
    if len(a) != len(b):
        return False
    if a.end_time != b.end_time:
        both_fin = math.isfinite(a.end_time) and math.isfinite(b.end_time)
        if not (both_fin and abs(a.end_time - b.end_time)
                <= tol * max(1.0, abs(a.end_time))):
            return False

    def close(x, y):
        scale = np.maximum(1.0, np.maximum(np.abs(x), np.abs(y)))
        return bool(np.all(np.abs(x - y) <= tol * scale))

    return (close(a.starts, b.starts) and close(a.values, b.values)
            and close(a.slopes, b.slopes))


def reflect(f: Path) -> Path:
    """Reflect a path above its past infimum.

    Returns ``t -> f(t) - min(0, inf_{[0,t]} f)``.  New breakpoints
    appear where a descending segment crosses the running infimum; from
    there until the segment ends the reflected path sticks to zero.
    """
    starts, values, slopes = f.starts, f.values, f.slopes
    ends = np.append(starts[1:], f.end_time)
    out_s: list[float] = []
    out_v: list[float] = []
    out_a: list[float] = []
    G = min(0.0, float(values[0]))  # running min(0, inf f)
    for i in range(len(starts)):
        t0, v, a = float(starts[i]), float(values[i]), float(slopes[i])
        t1 = float(ends[i])
        G = min(G, v)  # absorb a possible downward jump at t0
        if math.isfinite(t1):
            w = v + a * (t1 - t0)
        else:
            w = v if a == 0.0 else math.copysign(math.inf, a)
        if a < 0.0 and w < G:
            tc = t0 + (G - v) / a  # where the segment meets the running inf
            if tc > t0:
                out_s.append(t0)
                out_v.append(v - G)
                out_a.append(a)
            out_s.append(max(tc, t0))
            out_v.append(0.0)
            out_a.append(0.0)
            G = w
        else:
            out_s.append(t0)
            out_v.append(v - G)
            out_a.append(a)
            if math.isfinite(w):
                G = min(G, w)
    return Path(out_s, out_v, out_a, f.end_time,
                approximate=f.approximate, _validate=False)


def hitting_time_zero(f: Path) -> float:
    """First time in (0, end_time) at which the path equals 0.

    Returns ``inf`` when the path never hits zero inside its domain; a
    path that starts at zero and is flat there has hitting time 0.
    """
    starts, values, slopes = f.starts, f.values, f.slopes
    ends = np.append(starts[1:], f.end_time)
    for i in range(len(starts)):
        t0, v, a = float(starts[i]), float(values[i]), float(slopes[i])
        if v == 0.0:
            if t0 > 0.0:
                return t0
            if a == 0.0:
                return 0.0  # identically zero from the start
            continue  # leaves zero immediately; t=0 itself is excluded
        if a != 0.0:
            tc = t0 - v / a
            if t0 < tc < float(ends[i]):
                return tc
    return math.inf


def window(f: Path, g: float, d: float) -> Path:
    """Shift to time g, then freeze at time d: ``t -> f(g + min(t, d-g))``.

    With ``d = inf`` this is the shift operator; with ``g = 0`` the stop
    operator.  For finite ``d < end_time`` the output is constant at
    ``f(d)`` from ``d - g`` on.  Requires ``0 <= g <= d``, ``g < end_time``.
    """
    g, d = float(g), float(d)
    if not 0.0 <= g <= d:
        raise ValueError("window requires 0 <= g <= d")
    if g >= f.end_time:
        raise ValueError("window start lies beyond the path domain")
    if d >= f.end_time:
        d = math.inf
    end = f.end_time - g
    if math.isfinite(d) and d == g:
        return Path([0.0], [f(d)], [0.0], end,
                    approximate=f.approximate, _validate=False)
    i0 = int(np.searchsorted(f.starts, g, side="right")) - 1
    cut = d if math.isfinite(d) else math.inf
    i1 = int(np.searchsorted(f.starts, cut, side="left")) if math.isfinite(cut) else len(f.starts)
    s = f.starts[i0:i1] - g
    v = f.values[i0:i1].copy()
    a = f.slopes[i0:i1].copy()
    if s[0] < 0.0:
        v[0] = v[0] - a[0] * s[0]
        s = s.copy()
        s[0] = 0.0
    if math.isfinite(d):
        s = np.append(s, d - g)
        v = np.append(v, f(d))
        a = np.append(a, 0.0)
    return Path(s, v, a, end, approximate=f.approximate, _validate=False)


def _excursion_intervals(f: Path):
    """Yield (g, d) for maximal intervals where f > 0 within [0, end_time).

    For a valid nonnegative path every return to zero lands exactly on a
    breakpoint, so the scan is a pure breakpoint walk.  The final pair
    has ``d = None`` when the last excursion is incomplete at end_time.
    """
    starts, values, slopes = f.starts, f.values, f.slopes
    ends = np.append(starts[1:], f.end_time)
    n = len(starts)
    in_exc = False
    g = 0.0
    for i in range(n):
        t0, v, a = float(starts[i]), float(values[i]), float(slopes[i])
        t1 = float(ends[i])
        if v < 0.0:
            raise ValueError("excursion scan requires a nonnegative path")
        if not in_exc:
            if v > 0.0 or (v == 0.0 and a > 0.0):
                in_exc, g = True, t0
            elif a < 0.0:
                raise ValueError("excursion scan requires a nonnegative path")
            else:
                continue
        end_v = (v + a * (t1 - t0)) if math.isfinite(t1) else (
            v if a == 0.0 else math.copysign(math.inf, a))
        if end_v < 0.0:
            raise ValueError("excursion scan requires a nonnegative path")
        if i + 1 < n and float(values[i + 1]) == 0.0:
            # value 0 is attained at the next breakpoint: the excursion ends
            yield g, float(starts[i + 1])
            in_exc = False
    if in_exc:
        yield g, None


def extract_first_long_excursion(f: Path, eps: float) -> ExcursionTriple | None:
    """First complete excursion of ``f`` strictly longer than ``eps``.

    Returns the excursion rebased to time 0 together with its endpoints
    in ``f``, or None when no complete excursion longer than ``eps``
    exists before end_time.
    """
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    for g, d in _excursion_intervals(f):
        if d is None:
            return None
        if d - g > eps:
            return ExcursionTriple(Excursion.from_path(window(f, g, d)), g, d)
    return None


def truncate_small_excursions(f: Path, eps: float) -> Path:
    """Zero out every excursion of length <= eps, keeping the long ones.

    Zero stretches between excursions are preserved.  A trailing
    excursion that has not completed by end_time is zeroed conservatively
    and reported with a :class:`TruncationWarning`.
    """
    if not eps > 0.0:
        raise ValueError("eps must be positive")
    keep: list[tuple[float, float]] = []
    for g, d in _excursion_intervals(f):
        if d is None:
            warnings.warn(
                "trailing excursion incomplete at end_time; zeroed conservatively",
                TruncationWarning, stacklevel=2)
            break
        if d - g > eps:
            keep.append((g, d))
    out_s: list[float] = []
    out_v: list[float] = []
    out_a: list[float] = []
    cursor = 0.0
    for g, d in keep:
        if g > cursor or not out_s and g > 0.0:
            out_s.append(cursor)
            out_v.append(0.0)
            out_a.append(0.0)
        i0 = int(np.searchsorted(f.starts, g, side="right")) - 1
        i1 = int(np.searchsorted(f.starts, d, side="left"))
        out_s.extend(f.starts[i0:i1].tolist())
        out_v.extend(f.values[i0:i1].tolist())
        out_a.extend(f.slopes[i0:i1].tolist())
        cursor = d
    if cursor < f.end_time:
        out_s.append(cursor)
        out_v.append(0.0)
        out_a.append(0.0)
    return Path(out_s, out_v, out_a, f.end_time,
                approximate=f.approximate, _validate=False).canonical(0.0)


def concatenate(f: Path, t: float, h: Path) -> Path:
    """Splice: follow ``f`` strictly before ``t``, then ``h`` rebased at ``t``.

    The output equals ``f(s)`` for ``s < t`` and ``h(s - t)`` for
    ``s >= t``; its end time is ``t`` plus the end time of ``h``.
    Requires finite ``0 <= t <= f.end_time``.
    """
    t = float(t)
    if math.isinf(t) or not 0.0 <= t <= f.end_time:
        raise ValueError("splice time must be finite with 0 <= t <= end of f")
    if t == 0.0:
        return Path(h.starts, h.values, h.slopes, h.end_time,
                    approximate=f.approximate or h.approximate, _validate=False)
    i1 = int(np.searchsorted(f.starts, t, side="left"))
    s = np.concatenate([f.starts[:i1], h.starts + t])
    v = np.concatenate([f.values[:i1], h.values])
    a = np.concatenate([f.slopes[:i1], h.slopes])
    return Path(s, v, a, t + h.end_time,
                approximate=f.approximate or h.approximate, _validate=False)


@dataclass(frozen=True)
class PiecewiseLinearFn:
    """Continuous piecewise-linear test function with compact support.

    Defined by knot positions and values; evaluates to 0 outside
    ``[knots[0], knots[-1]]``.  Integrals are exact (trapezoid on each
    linear piece).
    """

    knots: NDArray[np.float64]
    vals: NDArray[np.float64]
    _cum: NDArray[np.float64] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        knots = _as_float_array(self.knots)
        vals = _as_float_array(self.vals)
        if len(knots) < 2 or len(knots) != len(vals):
            raise ValueError("need matching knots/vals with at least two knots")
        if not np.all(np.diff(knots) > 0):
            raise ValueError("knots must be strictly increasing")
        cum = np.concatenate(
            [[0.0], np.cumsum(np.diff(knots) * (vals[1:] + vals[:-1]) / 2.0)])
        for a in (knots, vals, cum):
            a.flags.writeable = False
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "vals", vals)
        object.__setattr__(self, "_cum", cum)

    @staticmethod
    def hat(center: float, half_width: float, height: float = 1.0) -> "PiecewiseLinearFn":
        c, w = float(center), float(half_width)
        return PiecewiseLinearFn([c - w, c, c + w], [0.0, height, 0.0])

    def __call__(self, x):
        x_arr = np.asarray(x, dtype=np.float64)
        out = np.interp(x_arr, self.knots, self.vals, left=0.0, right=0.0)
        inside = (x_arr >= self.knots[0]) & (x_arr <= self.knots[-1])
        out = np.where(inside, out, 0.0)
        return out if np.ndim(x) else float(out)

    def _antideriv(self, x: float) -> float:
        """Exact integral over [knots[0], min(x, knots[-1])] (0 left of support)."""
        if x <= self.knots[0]:
            return 0.0
        if x >= self.knots[-1]:
            return float(self._cum[-1])
        j = int(np.searchsorted(self.knots, x, side="right")) - 1
        kj = float(self.knots[j])
        return float(self._cum[j] + (x - kj) * (float(self.vals[j]) + self(x)) / 2.0)

    def integral(self, lo: float, hi: float) -> float:
        """Exact integral of the function over [lo, hi] (lo <= hi)."""
        if hi < lo:
            raise ValueError("integral requires lo <= hi")
        return self._antideriv(hi) - self._antideriv(lo)


def integrate(f: Path, t: float) -> float:
    """Exact integral ``int_0^t f(s) ds`` (trapezoid per affine segment)."""
    t = float(t)
    if not (0.0 <= t <= f.end_time) or not np.isfinite(t):
        raise ValueError("integration time must be finite and lie in [0, end_time]")
    ends = np.minimum(np.append(f.starts[1:], f.end_time), t)
    lens = np.clip(ends - np.minimum(f.starts, t), 0.0, None)
    return float(np.sum(lens * (f.values + 0.5 * f.slopes * lens)))


def occupation_integral(f: Path, phi: PiecewiseLinearFn, t: float) -> float:
    """Exact occupation integral ``int_0^t phi(f(s)) ds``.

    On constant segments this is ``phi(v) * length``; on sloped segments
    the substitution ``u = f(s)`` turns it into an exact integral of
    ``phi`` over the segment's value range divided by |slope|.
    """
    t = float(t)
    if not 0.0 <= t <= f.end_time:
        raise ValueError("occupation time must lie in [0, end_time]")
    total = 0.0
    ends = np.append(f.starts[1:], f.end_time)
    for i in range(len(f.starts)):
        t0 = float(f.starts[i])
        if t0 >= t:
            break
        t1 = min(float(ends[i]), t)
        seg = t1 - t0
        if seg <= 0.0:
            continue
        v, a = float(f.values[i]), float(f.slopes[i])
        if a == 0.0:
            total += phi(v) * seg
        else:
            u0, u1 = v, v + a * seg
            lo, hi = (u0, u1) if u0 <= u1 else (u1, u0)
            total += phi.integral(lo, hi) / abs(a)
    return total
