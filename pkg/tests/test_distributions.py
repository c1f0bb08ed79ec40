import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate
from scipy import stats as sp_stats

from excursion_lab.distributions import FAMILIES, Regime, ServiceDistribution, build_regime

ALL = [
    ServiceDistribution.exponential(2.0),
    ServiceDistribution.deterministic(1.5),
    ServiceDistribution.uniform(0.5, 2.5),
    ServiceDistribution.two_point(0.5, 1.5, 0.5),
]


def test_analytic_moments_frozen():
    exp, det, uni, two = ALL
    assert (exp.mean(), exp.second_moment(), exp.variance()) == (0.5, 0.5, 0.25)
    assert (det.mean(), det.second_moment(), det.variance()) == (1.5, 2.25, 0.0)
    assert uni.mean() == 1.5
    assert uni.second_moment() == pytest.approx(7.75 / 3)
    assert uni.variance() == pytest.approx(4.0 / 12)
    assert (two.mean(), two.second_moment(), two.variance()) == (1.0, 1.25, 0.25)
    # E[S^2] / (2 E[S])
    assert exp.residual_mean() == 0.5
    assert det.residual_mean() == 0.75
    assert uni.residual_mean() == pytest.approx(7.75 / 9)
    assert two.residual_mean() == 0.625


@pytest.mark.parametrize("dist", ALL, ids=[d.kind for d in ALL])
def test_sampling_matches_moments(dist):
    rng = np.random.default_rng(515101)
    n = 200_000
    x = np.asarray(dist.sample(rng, n), dtype=float)
    se = np.std(x) / math.sqrt(n)
    assert abs(np.mean(x) - dist.mean()) < 4 * se + 1e-12
    se2 = np.std(x * x) / math.sqrt(n)
    assert abs(np.mean(x * x) - dist.second_moment()) < 4 * se2 + 1e-12


@pytest.mark.parametrize("dist", ALL, ids=[d.kind for d in ALL])
def test_residual_sampling_matches_its_cdf(dist):
    rng = np.random.default_rng(515102)
    x = dist.sample_residual(rng, 50_000)
    assert sp_stats.kstest(x, dist.residual_cdf).pvalue > 1e-4
    se = np.std(x) / math.sqrt(len(x))
    assert abs(np.mean(x) - dist.residual_mean()) < 4 * se


@pytest.mark.parametrize("dist", ALL, ids=[d.kind for d in ALL])
def test_residual_cdf_against_quadrature(dist):
    m = dist.mean()
    for x in (0.2, 0.9, 1.4, 2.4):
        oracle, _ = sp_integrate.quad(
            lambda t: (1.0 - float(dist.cdf(t))) / m, 0.0, x,
            points=[p for p in dist.params if p < x], limit=100)
        assert float(dist.residual_cdf(x)) == pytest.approx(oracle, abs=1e-10)
    assert float(dist.residual_cdf(0.0)) == 0.0
    if dist.kind != "exponential":  # bounded support saturates at its top
        assert float(dist.residual_cdf(3.1)) == pytest.approx(1.0)


@pytest.mark.parametrize("dist", ALL, ids=[d.kind for d in ALL])
def test_laplace_transform_against_quadrature(dist):
    assert dist.laplace(0.0) == 1.0
    for u in (0.3, 1.7):
        if dist.kind == "deterministic":
            oracle = math.exp(-u * dist.params[0])
        elif dist.kind == "two_point":
            a, b, p = dist.params
            oracle = p * math.exp(-u * a) + (1 - p) * math.exp(-u * b)
        elif dist.kind == "exponential":
            r = dist.params[0]
            oracle, _ = sp_integrate.quad(
                lambda t: math.exp(-u * t) * r * math.exp(-r * t), 0, np.inf)
        else:
            lo, hi = dist.params
            oracle, _ = sp_integrate.quad(
                lambda t: math.exp(-u * t) / (hi - lo), lo, hi)
        assert dist.laplace(u) == pytest.approx(oracle, rel=1e-9)


def test_parameter_validation():
    with pytest.raises(ValueError):
        ServiceDistribution.exponential(0.0)
    with pytest.raises(ValueError):
        ServiceDistribution.uniform(2.0, 1.0)
    with pytest.raises(ValueError):
        ServiceDistribution.two_point(1.0, 1.0)
    with pytest.raises(ValueError):
        ServiceDistribution.two_point(0.5, 1.5, p=1.0)
    with pytest.raises(ValueError):
        ServiceDistribution.standard("pareto")
    with pytest.raises(ValueError):
        Regime(ALL[0], alpha=0.0)
    with pytest.raises(ValueError):
        ALL[0].laplace(-1.0)


def test_two_point_sample_frequencies():
    rng = np.random.default_rng(515103)
    dist = ServiceDistribution.two_point(0.5, 1.5, 0.3)
    x = dist.sample(rng, 100_000)
    assert set(np.unique(x)) == {0.5, 1.5}
    phat = np.mean(x == 0.5)
    assert abs(phat - 0.3) < 4 * math.sqrt(0.3 * 0.7 / len(x))


def test_load_is_exact_and_beta_matches_closed_forms():
    lam = 2.0  # critical rate; service mean is 1/lam
    closed = {"exponential": 1 / lam, "deterministic": 1 / (2 * lam),
              "uniform": 2 / (3 * lam), "two_point": 5 / (8 * lam)}
    for kind in FAMILIES:
        regime = build_regime(kind, alpha=0.7, mean=1.0 / lam)
        assert regime.base_rate == pytest.approx(lam, rel=1e-15)
        assert regime.beta == pytest.approx(closed[kind], rel=1e-12)
        for n in (7, 100, 1000):
            assert regime.rho(n) == 1.0 - 0.7 / n  # exact float equality
    with pytest.raises(ValueError):
        build_regime("exponential", alpha=5.0).rho(4)


def test_exponent_frozen_values():
    # exponential family, mean 1, alpha 1: at n=100, u=1 the exponent is
    # 100 - 100^2 * 0.99 * (1 - (1/(1+0.01))) = 200/101
    regime = build_regime("exponential", alpha=1.0)
    assert regime.psi(1.0, 100) == pytest.approx(200.0 / 101.0, rel=1e-13)
    assert regime.psi_limit(1.0) == pytest.approx(2.0)

    det = build_regime("deterministic", alpha=1.0)
    oracle = 100.0 - 9900.0 * (1.0 - math.exp(-0.01))
    assert det.psi(1.0, 100) == pytest.approx(oracle, rel=1e-13)
    assert det.psi_limit(1.0) == pytest.approx(1.5)


@pytest.mark.parametrize("kind", FAMILIES)
def test_exponent_converges_to_quadratic_limit(kind):
    regime = build_regime(kind, alpha=0.7)
    for u in (0.5, 2.0):
        errs = [abs(regime.psi(u, n) - regime.psi_limit(u))
                for n in (10, 100, 1000)]
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < errs[0] / 50  # O(1/n) decay
