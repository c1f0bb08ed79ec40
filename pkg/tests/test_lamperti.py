"""Tests for the time-substitution maps.

Exactness on step excursions is checked against hand-computed images and an
independent bisection oracle; sloped excursions are checked at breakpoints.
The stability test works in the L1 norm on purpose: a sup-norm version is
falsified below by an explicit two-step excursion.
"""

import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate

from excursion_lab.lamperti import integrable_reciprocal, lamperti, lamperti_inverse
from excursion_lab.paths import (
    Excursion,
    Path,
    StepPath,
    hitting_time_zero,
    integrate,
    paths_equal,
)


# ---------------------------------------------------------------------------
# corpora
# ---------------------------------------------------------------------------

def random_step_excursion(rng, max_segments=8):
    n = int(rng.integers(1, max_segments + 1))
    durations = rng.uniform(0.1, 2.0, n)
    values = rng.uniform(0.5, 3.0, n)
    starts = np.concatenate([[0.0], np.cumsum(durations)])
    return StepPath(starts, np.append(values, 0.0), end_time=math.inf)


def _dyadic(x):
    """Snap to multiples of 2**-20 so breakpoint arithmetic stays exact."""
    return np.round(np.asarray(x) * 2.0**20) / 2.0**20


def random_affine_excursion(rng, max_segments=6, end_by_jump=True):
    """Mix of flat, sloped-continuous and jumpy segments, positive interior."""
    n = int(rng.integers(1, max_segments + 1))
    durations = _dyadic(rng.uniform(0.2, 1.5, n))
    node_values = _dyadic(rng.uniform(0.3, 3.0, n + 1))
    starts = np.concatenate([[0.0], np.cumsum(durations)])
    values, slopes = [], []
    for i in range(n):
        values.append(node_values[i])
        kind = rng.integers(0, 3)
        if kind == 0:  # flat, jump to the next node value
            slopes.append(0.0)
        elif kind == 1:  # slope continuously into the next node value
            slopes.append((node_values[i + 1] - node_values[i]) / durations[i])
            node_values[i + 1] = node_values[i] + slopes[-1] * durations[i]
        else:  # sloped, but still jumps at the boundary
            slopes.append(rng.uniform(-0.2, 0.2) * node_values[i] / durations[i])
    if not end_by_jump:
        # unit downward slope with duration equal to the value lands on the
        # closing breakpoint exactly, even in floating point
        slopes[-1] = -1.0
        durations[-1] = values[-1]
        starts = np.concatenate([[0.0], np.cumsum(durations)])
    values.append(0.0)
    slopes.append(0.0)
    return Excursion(starts, values, slopes, end_time=math.inf)


# ---------------------------------------------------------------------------
# hand-computed images
# ---------------------------------------------------------------------------

def test_forward_two_step_hand_example():
    e = StepPath([0.0, 1.0, 2.0], [2.0, 1.0, 0.0], end_time=math.inf)
    image = lamperti(e)
    assert isinstance(image, StepPath)
    assert not image.approximate
    # duration 1 at height 2 stretches to 2; duration 1 at height 1 stays 1
    assert np.array_equal(image.starts, [0.0, 2.0, 3.0])
    assert np.array_equal(image.values, [2.0, 1.0, 0.0])
    assert image.end_time == math.inf


def test_inverse_two_step_hand_example():
    e = StepPath([0.0, 1.0, 2.0], [2.0, 1.0, 0.0], end_time=math.inf)
    image = lamperti_inverse(e)
    assert np.array_equal(image.starts, [0.0, 0.5, 1.5])
    assert np.array_equal(image.values, [2.0, 1.0, 0.0])


def test_forward_triangle_breakpoints_exact():
    # rise 0 -> 2 over [0, 2), fall back to 0 over [2, 4)
    e = Excursion([0.0, 2.0, 4.0], [0.0, 2.0, 0.0], [1.0, -1.0, 0.0],
                  end_time=math.inf)
    image = lamperti(e)
    assert image.approximate
    # areas: 2 and 2, so the breakpoints land at 0, 2, 4 with exact values
    assert np.allclose(image.starts, [0.0, 2.0, 4.0], atol=0.0)
    assert np.array_equal(image.values, [0.0, 2.0, 0.0])
    assert hitting_time_zero(image) == pytest.approx(integrate(e, e.lifetime), abs=1e-12)
    # the true image of the rising half is sqrt(2u); the chord overshoots it
    assert image(1.0) == pytest.approx(1.0)
    assert math.sqrt(2.0) > 1.0


def test_inverse_mixed_hand_example():
    # flat at 2 on [0, 1), slope down to 1 on [1, 2), jump to 0 at 2
    e = Excursion([0.0, 1.0, 2.0], [2.0, 2.0, 0.0], [0.0, -1.0, 0.0],
                  end_time=math.inf)
    assert integrable_reciprocal(e)
    image = lamperti_inverse(e)
    ln2 = math.log(2.0)
    assert image.starts == pytest.approx([0.0, 0.5, 0.5 + ln2], abs=1e-15)
    assert np.array_equal(image.values, [2.0, 2.0, 0.0])
    assert image.slopes[1] == pytest.approx(-1.0 / ln2)


# ---------------------------------------------------------------------------
# domain of the inverse map
# ---------------------------------------------------------------------------

def test_reciprocal_integrability_cases():
    step = StepPath([0.0, 1.0], [1.5, 0.0], end_time=math.inf)
    assert integrable_reciprocal(step)

    leaves_zero_continuously = Excursion(
        [0.0, 1.0, 2.0], [0.0, 1.0, 0.0], [1.0, -1.0, 0.0], end_time=math.inf)
    assert not integrable_reciprocal(leaves_zero_continuously)

    lands_by_jump = Excursion(
        [0.0, 1.0, 2.0], [1.0, 2.0, 0.0], [1.0, -1.0, 0.0], end_time=math.inf)
    assert integrable_reciprocal(lands_by_jump)

    slides_into_zero = Excursion(
        [0.0, 1.0, 2.0], [1.0, 1.0, 0.0], [0.0, -1.0, 0.0], end_time=math.inf)
    assert not integrable_reciprocal(slides_into_zero)


def test_inverse_raises_outside_domain():
    triangle = Excursion([0.0, 1.0, 2.0], [0.0, 1.0, 0.0], [1.0, -1.0, 0.0],
                         end_time=math.inf)
    with pytest.raises(ValueError, match="not integrable"):
        lamperti_inverse(triangle)


def test_inverse_raise_matches_predicate():
    rng = np.random.default_rng(20211)
    for _ in range(60):
        e = random_affine_excursion(rng, end_by_jump=bool(rng.integers(0, 2)))
        if integrable_reciprocal(e):
            lamperti_inverse(e)  # must not raise
        else:
            with pytest.raises(ValueError):
                lamperti_inverse(e)


def test_non_excursion_inputs_rejected():
    with pytest.raises(ValueError):
        lamperti(Path([0.0], [1.0], [0.0], end_time=2.0))  # never hits zero
    with pytest.raises(ValueError):
        lamperti(Path([0.0, 1.0], [1.0, -1.0], [0.0, 0.0], end_time=math.inf))


# ---------------------------------------------------------------------------
# structural identities on a seeded corpus
# ---------------------------------------------------------------------------

def test_lifetime_identities_step():
    rng = np.random.default_rng(4071)
    for _ in range(200):
        e = random_step_excursion(rng)
        durations = np.diff(e.starts)
        heights = e.values[:-1]
        assert hitting_time_zero(lamperti(e)) == pytest.approx(
            float(np.dot(durations, heights)), rel=1e-12)
        assert hitting_time_zero(lamperti_inverse(e)) == pytest.approx(
            float(np.dot(durations, 1.0 / heights)), rel=1e-12)


def test_lifetime_identities_affine_against_quadrature():
    rng = np.random.default_rng(4072)
    for _ in range(40):
        e = random_affine_excursion(rng, end_by_jump=True)
        T = e.lifetime
        assert hitting_time_zero(lamperti(e)) == pytest.approx(
            integrate(e, T), rel=1e-12)
        oracle, _ = sp_integrate.quad(
            lambda s: 1.0 / e(s), 0.0, T,
            points=list(e.starts[e.starts < T]), limit=200)
        assert hitting_time_zero(lamperti_inverse(e)) == pytest.approx(
            oracle, rel=1e-8)


def test_round_trips_are_identities_on_steps():
    rng = np.random.default_rng(4073)
    for _ in range(200):
        e = random_step_excursion(rng)
        there_and_back = lamperti_inverse(lamperti(e))
        assert isinstance(there_and_back, StepPath)
        assert paths_equal(there_and_back, e)
        assert paths_equal(lamperti(lamperti_inverse(e)), e)
        # heights survive both trips untouched
        assert np.array_equal(there_and_back.values, e.values)


def test_values_and_jumps_carried_over_exactly():
    rng = np.random.default_rng(4074)
    for _ in range(100):
        e = random_step_excursion(rng)
        image = lamperti(e)
        assert np.array_equal(image.values, e.values)
        assert np.array_equal(np.diff(image.values), np.diff(e.values))


def test_forward_matches_bisection_oracle_on_steps():
    rng = np.random.default_rng(4075)
    for _ in range(25):
        e = random_step_excursion(rng)
        image = lamperti(e)
        total = hitting_time_zero(image)
        T = hitting_time_zero(e)
        for u in rng.uniform(0.0, total, 8):
            if np.min(np.abs(image.starts - u)) < 1e-7:
                continue  # skip the cadlag boundary itself
            lo, hi = 0.0, T
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if integrate(e, mid) < u:
                    lo = mid
                else:
                    hi = mid
            assert image(u) == pytest.approx(e(0.5 * (lo + hi)), abs=1e-9)


def test_inverse_matches_bisection_oracle_on_steps():
    rng = np.random.default_rng(4076)
    for _ in range(25):
        e = random_step_excursion(rng)
        image = lamperti_inverse(e)
        total = hitting_time_zero(image)
        T = hitting_time_zero(e)
        starts = e.starts[:-1]
        durations = np.diff(e.starts)
        heights = e.values[:-1]
        cum = np.concatenate([[0.0], np.cumsum(durations / heights)])

        def clock(s):  # int_0^s 1/e, exact for steps
            i = np.searchsorted(starts, s, side="right") - 1
            return cum[i] + (s - starts[i]) / heights[i]

        for u in rng.uniform(0.0, total, 8):
            if np.min(np.abs(image.starts - u)) < 1e-7:
                continue
            lo, hi = 0.0, T
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if clock(mid) < u:
                    lo = mid
                else:
                    hi = mid
            assert image(u) == pytest.approx(e(0.5 * (lo + hi)), abs=1e-9)


# ---------------------------------------------------------------------------
# stability: L1 yes, sup-norm no
# ---------------------------------------------------------------------------

def _l1_distance_steps(f, g):
    """Integral of |f - g| for two absorbed step paths."""
    upto = max(hitting_time_zero(f), hitting_time_zero(g))
    cuts = np.union1d(f.starts[f.starts <= upto], g.starts[g.starts <= upto])
    cuts = np.union1d(cuts, [upto])
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    return float(np.sum(np.abs(f(mids) - g(mids)) * np.diff(cuts)))


def test_forward_is_l1_stable_under_value_perturbation():
    rng = np.random.default_rng(4077)
    for _ in range(100):
        e = random_step_excursion(rng)
        delta = 10.0 ** rng.uniform(-6, -2)
        bumped_values = e.values.copy()
        bumped_values[:-1] += rng.uniform(-delta, delta, len(e) - 1)
        bumped_values[:-1] = np.maximum(bumped_values[:-1], 0.1)
        bumped = StepPath(e.starts, bumped_values, end_time=math.inf)

        dist = _l1_distance_steps(lamperti(e), lamperti(bumped))
        T = hitting_time_zero(e)
        area = integrate(e, T)
        jump_mass = float(np.sum(np.abs(np.diff(e.values))))
        bound = delta * (area + T * (jump_mass + len(e) * delta))
        assert dist <= bound + 1e-12


def test_forward_is_not_sup_norm_stable():
    # a vanishing value perturbation shifts a unit jump by an O(1) sup gap
    delta = 1e-9
    e = StepPath([0.0, 1.0, 2.0], [2.0, 1.0, 0.0], end_time=math.inf)
    bumped = StepPath([0.0, 1.0, 2.0], [2.0 + delta, 1.0, 0.0], end_time=math.inf)
    u = 2.0 + 0.5 * delta  # just past the first image breakpoint of e
    gap = abs(lamperti(bumped)(u) - lamperti(e)(u))
    assert gap > 0.9  # the jump location moved, so sup distance stays O(1)


# ---------------------------------------------------------------------------
# plumbing
# ---------------------------------------------------------------------------

def test_types_and_flags():
    rng = np.random.default_rng(4078)
    step = random_step_excursion(rng)
    assert isinstance(lamperti(step), StepPath)
    assert not lamperti(step).approximate

    sloped = random_affine_excursion(rng, end_by_jump=True)
    image = lamperti(sloped)
    assert isinstance(image, Excursion)
    assert image.approximate == bool(np.any(sloped.slopes[:-1] != 0.0))


def test_accepts_plain_path_shaped_like_excursion():
    p = Path([0.0, 1.0], [1.0, 0.0], [0.0, 0.0], end_time=math.inf)
    image = lamperti(p)
    assert hitting_time_zero(image) == pytest.approx(1.0)
