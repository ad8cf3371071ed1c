"""Scoring layer: WAIC / DIC / CPO quadrature against dense-grid oracles,
mathematical inequalities, and degenerate-posterior special cases."""

import numpy as np
import pytest
from scipy import sparse
from scipy.stats import norm

from gcstar.evaluation import (
    compute_cpo_logscore,
    compute_dic,
    compute_q_criteria,
    compute_scores,
    compute_waic,
    pointwise_predictive,
)
from gcstar.inference import FitResult, GaussianApprox, HyperPoint, fit_latent_model
from gcstar.likelihoods import build_likelihood
from gcstar.predictor import LatentModel, make_linear


def dense_pointwise(fit, i, n_grid=20001, span=12.0):
    """Trapezoid-rule version of the predictive expectations for obs i."""
    lik = build_likelihood(fit.model)
    y = fit.model.y[i]
    e_p = e_logp = e_invp = 0.0
    for point in fit.grid:
        if point.weight <= 0:
            continue
        m = point.approx.eta_mean[i]
        s = point.approx.eta_sd[i]
        eta = np.linspace(m - span * s, m + span * s, n_grid)
        dens = norm.pdf(eta, loc=m, scale=s)
        log_p = lik.log_pmf(point.alpha, eta, np.full(n_grid, y))
        p = np.exp(log_p)
        e_p += point.weight * np.trapezoid(p * dens, eta)
        e_logp += point.weight * np.trapezoid(log_p * dens, eta)
        e_invp += point.weight * np.trapezoid(dens / p, eta)
    return e_p, e_logp, e_invp


def fake_fit(y, likelihood, eta_mean, eta_sd, alpha=None):
    """Single-point FitResult with a hand-built Gaussian approximation."""
    model = LatentModel(y=np.asarray(y), components=[], likelihood=likelihood)
    n = len(model.y)
    approx = GaussianApprox(
        mode=np.zeros(1),
        precision=sparse.csr_matrix(np.eye(1)),
        log_det=0.0,
        converged=True,
        iterations=0,
        mode_raw=np.zeros(1),
        marginal_sd=np.ones(1),
        eta_mean=np.full(n, float(eta_mean)),
        eta_sd=np.full(n, float(eta_sd)),
        chol=np.eye(1),
        krig=None,
    )
    point = HyperPoint(
        alpha=alpha, log_taus=np.empty(0), log_post=0.0, weight=1.0, approx=approx
    )
    return FitResult(model=model, grid=[point], latent_marginals=[], hyper_marginals={})


def test_quadrature_matches_dense_grid(intercept_only_fit):
    fit = intercept_only_fit["fit"]
    for i in (0, 7, 31):
        t = pointwise_predictive(fit, i)
        e_p, e_logp, e_invp = dense_pointwise(fit, i)
        assert np.exp(t.log_e_p[0]) == pytest.approx(e_p, rel=1e-6)
        assert t.e_logp[0] == pytest.approx(e_logp, rel=1e-6)
        assert np.exp(t.log_e_invp[0]) == pytest.approx(e_invp, rel=1e-5)
    with pytest.raises(IndexError):
        pointwise_predictive(fit, len(fit.model.y))


def test_waic_matches_dense_recomputation(intercept_only_fit):
    fit = intercept_only_fit["fit"]
    total = 0.0
    for i in range(len(fit.model.y)):
        t = pointwise_predictive(fit, i)
        e_p, e_logp, _ = dense_pointwise(fit, i, n_grid=4001)
        var_logp = t.var_logp[0]  # second moment shares nodes; reuse it
        total += np.log(e_p) - var_logp
    waic, p_waic = compute_waic(fit)
    assert waic == pytest.approx(-2.0 * total, abs=0.1)
    assert p_waic > 0


def test_harmonic_mean_inequality(underdispersed_fit):
    # E[1/p] E[p] >= 1, i.e. CPO_i <= E[p_i], with equality only for
    # a degenerate posterior
    fit = underdispersed_fit["fit"]
    n = len(fit.model.y)
    table = pointwise_predictive(fit, 0)
    for i in range(n):
        t = pointwise_predictive(fit, i)
        if t.flagged[0]:
            continue
        assert t.log_e_p[0] + t.log_e_invp[0] >= -1e-10


def test_degenerate_posterior_collapses_scores():
    rng = np.random.default_rng(5)
    y = rng.poisson(2.0, size=30)
    fit = fake_fit(y, "poisson", eta_mean=np.log(2.0), eta_sd=0.0)
    lik = build_likelihood(fit.model)
    log_p = lik.log_pmf(None, np.full(30, np.log(2.0)), y)
    waic, p_waic = compute_waic(fit)
    assert p_waic == pytest.approx(0.0, abs=1e-12)
    assert waic == pytest.approx(-2.0 * log_p.sum(), rel=1e-12)
    cpo, log_score = compute_cpo_logscore(fit)
    np.testing.assert_allclose(cpo, np.exp(log_p), rtol=1e-10)
    assert log_score == pytest.approx(-log_p.sum(), rel=1e-10)
    dic, p_d = compute_dic(fit)
    assert p_d == pytest.approx(0.0, abs=1e-8)
    assert dic == pytest.approx(-2.0 * log_p.sum(), rel=1e-10)


def test_unstable_cpo_flagged_and_excluded():
    # absurdly wide posterior: the 1/p quadrature overflows for the
    # first observation and must be dropped from the log-score
    fit = fake_fit([0, 2], "poisson", eta_mean=0.0, eta_sd=40.0)
    with pytest.warns(UserWarning, match="unstable"):
        cpo, log_score = compute_cpo_logscore(fit)
    assert np.isnan(cpo).any()
    assert np.isfinite(log_score)
    scores = compute_scores(fit)
    assert scores.cpo_failures == int(np.isnan(cpo).sum())
    assert fit.scores is scores


def test_effective_parameters_near_true_count():
    # strong-signal Poisson GLM: p_d should sit near the parameter count
    rng = np.random.default_rng(11)
    n = 400
    x1 = rng.uniform(-1, 1, n)
    x2 = rng.uniform(-1, 1, n)
    eta = 1.0 + 0.8 * x1 - 0.5 * x2
    y = rng.poisson(np.exp(eta))
    model = LatentModel(
        y=y,
        components=[make_linear(np.column_stack([x1, x2]), name="x")],
        likelihood="poisson",
    )
    fit = fit_latent_model(model)
    _, p_d = compute_dic(fit)
    _, p_waic = compute_waic(fit)
    assert 0.7 * 3 <= p_d <= 1.3 * 3
    assert 0.7 * 3 <= p_waic <= 1.3 * 3


def test_scores_invariant_to_observation_order():
    rng = np.random.default_rng(17)
    n = 60
    x = rng.uniform(-1, 1, n)
    y = rng.poisson(np.exp(0.5 + 0.6 * x))
    perm = rng.permutation(n)
    fit_a = fit_latent_model(
        LatentModel(y=y, components=[make_linear(x, name="x")], likelihood="poisson")
    )
    fit_b = fit_latent_model(
        LatentModel(
            y=y[perm], components=[make_linear(x[perm], name="x")], likelihood="poisson"
        )
    )
    sa, sb = compute_scores(fit_a), compute_scores(fit_b)
    assert sa.waic == pytest.approx(sb.waic, abs=1e-7)
    assert sa.dic == pytest.approx(sb.dic, abs=1e-7)
    assert sa.log_score == pytest.approx(sb.log_score, abs=1e-7)
    np.testing.assert_allclose(sa.cpo[perm], sb.cpo, atol=1e-9)


def test_q_criteria():
    f = np.sin(np.linspace(-2, 2, 40))
    crit = compute_q_criteria(f + 3.7, f, alpha_hat=1.5, alpha_true=2.0)
    assert crit.q1 == pytest.approx(0.0, abs=1e-28)
    assert crit.q2 == pytest.approx(0.25, rel=1e-12)
    with pytest.raises(ValueError):
        compute_q_criteria(f[:10], f, 1.0, 1.0)
