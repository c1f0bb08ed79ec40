"""End-to-end acceptance runs at committed sizes, tolerances and budgets.

Every test here uses the frozen master seed and the full sample sizes;
together they are the package's contract.  Each asserts the statistical
outcome and the wall-clock budget of one cross-check, and prints a
one-line summary (visible with ``pytest -s``).
"""

import math
import time

import numpy as np

from excursion_lab.distributions import ServiceDistribution
from excursion_lab.levy import local_time_profile, simulate_levy
from excursion_lab.paths import PiecewiseLinearFn, occupation_integral
from excursion_lab.verify import (
    ExperimentConfig,
    null_calibration,
    reports_to_csv,
    run_experiment,
)

SEED = 20260816

_cache = {}


def rows_for(experiment):
    """Run each catalog entry once at its stock size; share across tests."""
    if experiment not in _cache:
        t0 = time.monotonic()
        rows = run_experiment(experiment,
                              ExperimentConfig(experiment, seed=SEED))
        _cache[experiment] = (rows, time.monotonic() - t0)
    return _cache[experiment]


def test_exact_time_change_bridge():
    rows, took = rows_for("E1")
    by = {r.statistic: r for r in rows}
    assert by["round-trip-mismatches"].value == 0.0
    assert by["length-vs-slowed-area"].value <= 1e-9
    assert by["round-trip-mismatches"].reps == 1000
    assert took < 10.0
    print(f"bridge: 1000 cycles round-trip exactly, "
          f"worst gap {by['length-vs-slowed-area'].value:.2e}, {took:.1f}s")


def test_occupation_integral_matches_profile_pairing():
    t0 = time.monotonic()
    rng = np.random.default_rng(SEED)
    service = ServiceDistribution.exponential(1.0)
    hats = [PiecewiseLinearFn.hat(c, w) for c, w in
            [(0.3, 0.3), (0.8, 0.5), (1.5, 1.0), (2.5, 1.5), (4.0, 2.0)]]
    worst = 0.0
    for _ in range(1000):
        x0 = float(service.sample(rng))
        arch = simulate_levy(rng, 0.8, service, x0=x0,
                             stop=("first-passage", 0.0))
        prof = local_time_profile(arch)
        for phi in hats:
            direct = occupation_integral(arch, phi, arch.lifetime)
            paired = sum(
                float(c) * phi.integral(float(lo), float(hi))
                for c, lo, hi in zip(prof.counts, prof.levels[:-1],
                                     prof.levels[1:]))
            worst = max(worst, abs(direct - paired))
    took = time.monotonic() - t0
    assert worst <= 1e-9
    assert took < 10.0
    print(f"occupation identity: 1000 paths x 5 functions, "
          f"worst gap {worst:.2e}, {took:.1f}s")


def test_population_functionals_match_path_functionals_exactly():
    rows, took = rows_for("E2")
    assert len(rows) == 3
    for r in rows:
        assert r.reps == 5000
        assert r.value <= 0.032, r.statistic
    assert took < 120.0
    worst = max(r.value for r in rows)
    print(f"law equivalence: three functionals at N=M=5000, "
          f"worst KS {worst:.4f} <= 0.032, {took:.1f}s")


def test_stationary_departures_form_a_poisson_stream():
    rows, took = rows_for("E3")
    (rep,) = rows
    assert rep.passed and rep.reps >= 10_000
    assert took < 60.0
    print(f"departures: composite ratio {rep.value:.3f} <= 1 "
          f"on {rep.reps} departures, {took:.1f}s")


def test_stationary_queue_length_is_geometric():
    rows, took = rows_for("E4")
    (rep,) = rows
    assert rep.passed and rep.reps == 20_000
    assert took < 120.0
    print(f"stationary law: chi-square {rep.value:.1f} <= "
          f"{rep.threshold:.1f} on 20000 samples, {took:.1f}s")


def test_queue_marginals_reach_the_reflected_motion():
    rows, took = rows_for("E7")
    marg_top = [r for r in rows if r.statistic.startswith("marginal")
                and r.n == 200]
    assert len(marg_top) == 2
    for r in marg_top:
        assert r.reps == 4000
        assert r.value <= 0.037 + 0.03, r.statistic
    trend = [r for r in rows if r.statistic.startswith("ladder-monotone")]
    assert len(trend) == 2 and all(r.passed for r in trend)
    assert all(r.passed for r in rows)
    assert took < 900.0
    worst = max(r.value for r in marg_top)
    print(f"queue marginals: worst KS {worst:.4f} <= 0.067 at n=200, "
          f"trend holds on the ladder, {took:.1f}s")


def test_population_marginals_reach_the_branching_diffusion():
    rows, took = rows_for("E6")
    marg_top = [r for r in rows if r.statistic.startswith("marginal")
                and r.n == 200]
    assert len(marg_top) == 3
    for r in marg_top:
        assert r.reps == 4000
        assert r.value <= 0.037 + 0.03, r.statistic
    trend = [r for r in rows if r.statistic.startswith("ladder-monotone")]
    assert len(trend) == 3 and all(r.passed for r in trend)
    assert all(r.passed for r in rows)
    assert took < 900.0
    worst = max(r.value for r in marg_top)
    print(f"population marginals: worst KS {worst:.4f} <= 0.067 at n=200, "
          f"trend holds on the ladder, {took:.1f}s")


def test_conditioned_excursions_and_two_route_lengths():
    rows, took = rows_for("E5")
    lengths = [r for r in rows if r.statistic == "busy-length-two-route"]
    assert [r.n for r in lengths] == [25, 50, 100, 200]
    for r in lengths:
        assert r.value <= 0.032, f"n={r.n}"
    cond_top = [r for r in rows if r.n == 200 and "harvested" in r.statistic]
    assert len(cond_top) == 3
    for r in cond_top:
        assert r.value <= 0.037 + 0.03, r.statistic
    assert all(r.passed for r in rows)
    assert took < 1200.0
    print(f"conditioned excursions: lengths exact at every n "
          f"(worst {max(r.value for r in lengths):.4f} <= 0.032), "
          f"functionals worst {max(r.value for r in cond_top):.4f} "
          f"<= 0.067, {took:.1f}s")


def test_state_space_collapse_and_seeding_discontinuity():
    rows, took = rows_for("E8")
    by = {r.statistic: r for r in rows}
    ratio = by["collapse-shrinks"]
    assert ratio.value <= 0.5
    assert by["fresh-seed-start-exact"].value == 0.0
    assert by["fresh-seed-plateau-gap"].value <= 0.10
    assert took < 600.0
    print(f"collapse: distance ratio 200/25 = {ratio.value:.3f} <= 0.5; "
          f"fresh seeding exact at 0, plateau gap "
          f"{by['fresh-seed-plateau-gap'].value:.3f} <= 0.10, {took:.1f}s")


def test_null_calibration_and_byte_identical_reports():
    t0 = time.monotonic()
    passes = null_calibration(SEED, meta_runs=100, size=2000)
    assert passes >= 99
    cfg = ExperimentConfig("E2", seed=SEED)
    first = reports_to_csv(run_experiment("E2", cfg))
    second = reports_to_csv(run_experiment("E2", cfg))
    assert first == second
    assert first.encode() == second.encode()
    took = time.monotonic() - t0
    print(f"calibration: {passes}/100 same-law meta-runs pass; "
          f"identical seeds give byte-identical reports, {took:.1f}s")
