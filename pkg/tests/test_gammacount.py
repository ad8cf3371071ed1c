"""Gamma-count distribution layer.

Oracle constants were frozen from mpmath (pmf/log-pmf via the incomplete
gamma integral, moments via direct probability-weighted sums to y=400);
derivative checks use central finite differences of the log-pmf.
"""

import numpy as np
import pytest
from scipy import stats

from gcstar.errors import GcstarError
from gcstar.gammacount import (
    GcParams,
    gc_log_pmf,
    gc_loglik_derivs,
    gc_mean,
    gc_pmf,
    gc_sample,
)

GC_PMF_A2_G2_Y1 = 0.45111761078870897
GC_LOGPMF_A3_G3_Y2 = -2.5242928010044522
GC_MEAN_A2_G2 = 0.75457890972218355
GC_VAR_A2_G2 = 0.54416339469702191
GC_MEAN_A05_G1 = 2.4716049381348697
GC_VAR_A05_G1 = 3.9348879893770909


def test_pmf_poisson_reduction_examples():
    p = GcParams(alpha=1.0, gamma=2.0)
    assert gc_pmf(p, 0) == pytest.approx(np.exp(-2.0), abs=1e-14)
    assert gc_pmf(p, 3) == pytest.approx(8 * np.exp(-2.0) / 6, abs=1e-14)


def test_pmf_quadrature_oracle():
    assert gc_pmf(GcParams(alpha=2.0, gamma=2.0), 1) == pytest.approx(
        GC_PMF_A2_G2_Y1, abs=1e-12
    )


def test_pmf_monte_carlo_band():
    # same cell cross-checked by the renewal sampler, 1e6 draws, 3 sigma
    draws = gc_sample(GcParams(alpha=2.0, gamma=2.0), rng_seed=2024, n=10**6)
    freq = np.mean(draws == 1)
    se = np.sqrt(GC_PMF_A2_G2_Y1 * (1 - GC_PMF_A2_G2_Y1) / 10**6)
    assert abs(freq - GC_PMF_A2_G2_Y1) < 3 * se


def test_log_pmf_examples():
    assert gc_log_pmf(GcParams(1.0, 2.0), 0) == pytest.approx(-2.0, abs=1e-12)
    assert gc_log_pmf(GcParams(1.0, 5.0), 5) == pytest.approx(
        np.log(5.0**5 * np.exp(-5.0) / 120.0), abs=1e-12
    )
    assert gc_log_pmf(GcParams(3.0, 3.0), 2) == pytest.approx(
        GC_LOGPMF_A3_G3_Y2, abs=1e-10
    )


def test_log_pmf_floor():
    # far in the tail the floor keeps the value finite
    val = gc_log_pmf(GcParams(5.0, 0.1), 80)
    assert np.isfinite(val)
    assert val >= np.log(1e-300) - 1e-9


def test_poisson_reduction_grid():
    for gam in (0.5, 1.0, 5.0):
        p = GcParams(alpha=1.0, gamma=gam)
        pois = stats.poisson(gam)
        worst = max(abs(gc_pmf(p, y) - pois.pmf(y)) for y in range(31))
        assert worst < 1e-12


def test_normalization_adaptive():
    for alpha in (0.2, 0.7, 1.0, 2.0, 5.0):
        for gam in (0.5, 2.0, 10.0):
            p = GcParams(alpha=alpha, gamma=gam)
            mom = gc_mean(p)
            ymax = int(mom.mean + 20 * np.sqrt(mom.variance)) + 2
            total = sum(gc_pmf(p, y) for y in range(ymax))
            assert 1 - 1e-8 <= total <= 1 + 1e-12


def test_mean_poisson():
    mom = gc_mean(GcParams(1.0, 3.0), tol=1e-10)
    assert mom.mean == pytest.approx(3.0, abs=1e-8)
    assert mom.variance == pytest.approx(3.0, abs=1e-7)
    assert mom.tail_bound <= 1e-10


def test_moments_oracle():
    mom = gc_mean(GcParams(2.0, 2.0))
    assert mom.mean == pytest.approx(GC_MEAN_A2_G2, rel=1e-9)
    assert mom.variance == pytest.approx(GC_VAR_A2_G2, rel=1e-8)
    assert mom.variance < mom.mean  # under-dispersed
    mom = gc_mean(GcParams(0.5, 1.0))
    assert mom.mean == pytest.approx(GC_MEAN_A05_G1, rel=1e-9)
    assert mom.variance == pytest.approx(GC_VAR_A05_G1, rel=1e-8)
    assert mom.variance > mom.mean


def test_dispersion_ordering():
    for alpha in (2.0, 5.0):
        for gam in (1.0, 5.0):
            m = gc_mean(GcParams(alpha, gam))
            assert m.variance / m.mean < 1.0
    for alpha in (0.2, 0.5):
        for gam in (1.0, 5.0):
            m = gc_mean(GcParams(alpha, gam))
            assert m.variance / m.mean > 1.0


def test_sampler_moments():
    d = gc_sample(GcParams(1.0, 2.0), rng_seed=7, n=10**6)
    assert abs(d.mean() - 2.0) < 3 * np.sqrt(2.0 / 10**6)
    d = gc_sample(GcParams(2.0, 4.0), rng_seed=8, n=10**6)
    assert d.var() < d.mean()
    d = gc_sample(GcParams(0.5, 1.0), rng_seed=9, n=10**6)
    assert d.var() > d.mean()


def test_sampler_deterministic():
    a = gc_sample(GcParams(2.0, 2.0), rng_seed=42, n=1000)
    b = gc_sample(GcParams(2.0, 2.0), rng_seed=42, n=1000)
    assert np.array_equal(a, b)


def test_sampler_pmf_agreement():
    # 4 sigma multinomial bands on every cell with expected count >= 20
    n = 10**6
    p = GcParams(alpha=0.5, gamma=2.0)
    draws = gc_sample(p, rng_seed=17, n=n)
    for y in range(int(draws.max()) + 1):
        expected = n * gc_pmf(p, y)
        if expected < 20:
            continue
        observed = np.sum(draws == y)
        sd = np.sqrt(expected * (1 - gc_pmf(p, y)))
        assert abs(observed - expected) < 4 * sd, f"cell y={y}"


def test_derivs_poisson_reduction():
    y = np.array([0, 1, 4, 9])
    eta = np.array([0.2, -0.5, 1.1, 0.0])
    gam = np.exp(eta)
    val, d1, d2, floored = gc_loglik_derivs(1.0, eta, y)
    assert np.allclose(d1, y - gam, atol=1e-10)
    assert np.allclose(d2, -gam, atol=1e-10)
    assert not floored.any()


@pytest.mark.parametrize("alpha,eta,y", [(2.0, 0.3, 1), (0.5, -0.2, 3), (3.0, 1.0, 5)])
def test_derivs_finite_difference(alpha, eta, y):
    yv = np.array([y])

    def lp(e):
        return gc_log_pmf(GcParams(alpha, alpha * np.exp(e)), y)

    val, d1, d2, _ = gc_loglik_derivs(alpha, np.array([eta]), yv)
    assert val[0] == pytest.approx(lp(eta), abs=1e-10)
    h = 1e-5
    fd1 = (lp(eta + h) - lp(eta - h)) / (2 * h)
    assert d1[0] == pytest.approx(fd1, abs=1e-6)
    h = 1e-4  # second differences drown in round-off below this
    fd2 = (lp(eta + h) - 2 * lp(eta) + lp(eta - h)) / h**2
    assert d2[0] == pytest.approx(fd2, abs=1e-5)


def test_derivs_floored_region_damped():
    # impossible outcome under the parameters: derivative must not explode
    val, d1, d2, floored = gc_loglik_derivs(5.0, np.array([-12.0]), np.array([50]))
    assert floored[0]
    assert d1[0] == 0.0 and d2[0] == 0.0
    assert val[0] >= np.log(1e-300) - 1e-9


def test_param_validation():
    with pytest.raises(GcstarError):
        GcParams(alpha=0.0, gamma=1.0)
    with pytest.raises(GcstarError):
        GcParams(alpha=1.0, gamma=-2.0)
    with pytest.raises(GcstarError):
        GcParams(alpha=float("nan"), gamma=1.0)
    with pytest.raises(GcstarError):
        gc_pmf(GcParams(1.0, 1.0), -1)
    with pytest.raises(GcstarError):
        gc_pmf(GcParams(1.0, 1.0), 1.5)
