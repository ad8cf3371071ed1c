"""Count likelihood families behind a uniform interface.

Each family exposes pointwise log-pmfs, first and second derivatives with
respect to the linear predictor eta (log-mean scale for Poisson/NB, and
gamma = alpha*exp(eta) for the gamma-count law), a sampler, and the prior
of its dispersion hyperparameter. Poisson has no hyperparameter; the
gamma-count dispersion alpha and the negative-binomial size both enter the
inference engine as the single likelihood hyperparameter.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .gammacount import GcDerivs, gc_loglik_derivs, gc_sample_counts, _pmf_terms, PMF_FLOOR
from .specfun import log_gamma

__all__ = ["build_likelihood", "GammaCountLik", "PoissonLik", "NegBinLik"]


@dataclasses.dataclass(frozen=True)
class GammaCountLik:
    """Gamma-count: y ~ GC(alpha, alpha * exp(eta)), t = 1."""

    prior: object
    name: str = "gamma-count"
    n_hyper: int = 1
    hyper_label: str = "alpha"
    hyper_start: float = 1.0

    def log_pmf(self, hyper, eta, y):
        log_gam = np.log(hyper) + np.asarray(eta, dtype=float)
        _, _, pmf = _pmf_terms(hyper, np.exp(log_gam), y)
        return np.log(np.maximum(pmf, PMF_FLOOR))

    def derivs(self, hyper, eta, y) -> GcDerivs:
        return gc_loglik_derivs(hyper, eta, y)

    def log_prior_hyper(self, hyper) -> float:
        return float(self.prior.log_density(hyper))

    def sample(self, hyper, eta, rng) -> np.ndarray:
        return gc_sample_counts(hyper, hyper * np.exp(np.asarray(eta, dtype=float)), 1.0, rng)


@dataclasses.dataclass(frozen=True)
class PoissonLik:
    """Poisson with log link: y ~ Poi(exp(eta))."""

    name: str = "poisson"
    n_hyper: int = 0
    hyper_label: str = ""
    hyper_start: float = 1.0

    def log_pmf(self, hyper, eta, y):
        eta_arr = np.asarray(eta, dtype=float)
        y_arr = np.asarray(y, dtype=float)
        return y_arr * eta_arr - np.exp(eta_arr) - log_gamma(y_arr + 1.0)

    def derivs(self, hyper, eta, y) -> GcDerivs:
        eta_arr = np.asarray(eta, dtype=float)
        y_arr = np.asarray(y, dtype=float)
        mu = np.exp(eta_arr)
        val = y_arr * eta_arr - mu - log_gamma(y_arr + 1.0)
        return GcDerivs(value=val, d1=y_arr - mu, d2=-mu, floored=np.zeros(mu.shape, dtype=bool))

    def log_prior_hyper(self, hyper) -> float:
        return 0.0

    def sample(self, hyper, eta, rng) -> np.ndarray:
        return rng.poisson(np.exp(np.asarray(eta, dtype=float)))


@dataclasses.dataclass(frozen=True)
class NegBinLik:
    """Negative binomial with log-mean link and size kappa.

    pmf(y) = C(y+k-1, y) (k/(k+mu))^k (mu/(k+mu))^y with mu = exp(eta);
    kappa -> inf recovers Poisson.
    """

    prior: object
    name: str = "negative-binomial"
    n_hyper: int = 1
    hyper_label: str = "size"
    hyper_start: float = 10.0

    def log_pmf(self, hyper, eta, y):
        eta_arr = np.asarray(eta, dtype=float)
        y_arr = np.asarray(y, dtype=float)
        k = float(hyper)
        mu = np.exp(eta_arr)
        return (
            log_gamma(y_arr + k)
            - log_gamma(k)
            - log_gamma(y_arr + 1.0)
            + k * np.log(k)
            + y_arr * eta_arr
            - (k + y_arr) * np.log(k + mu)
        )

    def derivs(self, hyper, eta, y) -> GcDerivs:
        eta_arr = np.asarray(eta, dtype=float)
        y_arr = np.asarray(y, dtype=float)
        k = float(hyper)
        mu = np.exp(eta_arr)
        val = self.log_pmf(hyper, eta_arr, y_arr)
        d1 = y_arr - (k + y_arr) * mu / (k + mu)
        d2 = -(k + y_arr) * mu * k / (k + mu) ** 2
        return GcDerivs(value=val, d1=d1, d2=d2, floored=np.zeros(mu.shape, dtype=bool))

    def log_prior_hyper(self, hyper) -> float:
        return float(self.prior.log_density(hyper))

    def sample(self, hyper, eta, rng) -> np.ndarray:
        mu = np.exp(np.asarray(eta, dtype=float))
        k = float(hyper)
        return rng.negative_binomial(k, k / (k + mu))


def build_likelihood(model):
    """Likelihood object for a LatentModel."""
    if model.likelihood == "gamma-count":
        return GammaCountLik(prior=model.alpha_prior)
    if model.likelihood == "poisson":
        return PoissonLik()
    if model.likelihood == "negative-binomial":
        return NegBinLik(prior=model.alpha_prior)
    raise ValueError(f"unknown likelihood {model.likelihood!r}")
