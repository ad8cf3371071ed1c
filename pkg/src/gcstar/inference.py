"""Approximate Bayesian engine: Laplace approximation of the latent field
and grid integration over the hyperparameters.

For a fixed hyperparameter point theta = (alpha, tau_1..tau_J) the latent
posterior is approximated by a Gaussian located at the Newton mode of

    ln p(y | x, alpha) + ln p(x | tau)

with precision Q_post = Q_prior(tau) + Z' W Z, W = -diag(d2 loglik/d eta2).
Identifiability constraints A x = 0 are applied afterwards by the standard
conditioning correction (kriging): the reported mode and marginal
variances are those of the Gaussian conditioned on A x = 0, while the
unconstrained mode/precision enter the hyperparameter posterior

    ln pi(theta | y) = ln p(y|x*,theta) + ln p(x*|theta) + ln pi(theta)
                       - 1/2 ln det Q_post + const,

explored on the log scale (Jacobians included) by a derivative-free ascent
followed by a regular grid with standardized step; grid weights are the
normalized exponentiated log-posteriors. Latent marginals are
weight-mixtures of the per-point Gaussians.
"""

from __future__ import annotations

import dataclasses
import warnings
from typing import Optional

import numpy as np
from scipy import linalg as _linalg
from scipy import optimize as _optimize
from scipy.sparse import csr_matrix
from scipy.stats import norm as _norm

from .errors import ConfigError, ConvergenceError
from .likelihoods import build_likelihood
from .predictor import LatentModel, joint_prior_logdensity
from .priors import variance_prior_logdensity

__all__ = [
    "GridSettings",
    "HyperPoint",
    "GaussianApprox",
    "FitResult",
    "gaussian_approx",
    "hyper_grid",
    "fit_latent_model",
    "latent_marginal",
    "predictive_draw",
]

NEWTON_TOL = 1e-6
NEWTON_MAX_ITER = 50
DAMPING_RETRIES = 10

_NEG_INF_PENALTY = -1e10


@dataclasses.dataclass(frozen=True)
class GridSettings:
    """Knobs of the hyperparameter exploration."""

    step: float = 0.75  # grid step in standardized log-scale units
    cutoff: float = 6.0  # drop points this many log-units below the mode
    max_hyper: int = 4
    max_offsets: int = 10  # per-axis walk cap
    curvature_h: float = 0.3  # finite-difference step for standardization
    nm_xatol: float = 0.02
    nm_fatol: float = 0.005
    nm_maxfev: int = 300


@dataclasses.dataclass
class HyperPoint:
    """One grid point in hyperparameter space.

    ``alpha`` is the likelihood dispersion hyperparameter on its natural
    scale (gamma-count alpha or negative-binomial size; None for Poisson);
    exploration happens on the log scale. ``approx`` is attached once the
    Gaussian approximation at this point has been computed.
    """

    alpha: Optional[float]
    log_taus: np.ndarray
    log_post: float = -np.inf
    weight: float = 0.0
    approx: Optional["GaussianApprox"] = None

    @property
    def taus(self) -> np.ndarray:
        return np.exp(self.log_taus)


@dataclasses.dataclass
class GaussianApprox:
    """Gaussian approximation of the latent field at one theta.

    ``mode``/``marginal_sd`` are constraint-corrected; ``mode_raw`` is the
    unconstrained Newton solution whose gradient is below tolerance.
    ``chol`` is the lower Cholesky factor of the (unconstrained) precision;
    ``krig`` holds (V, S_chol, A) with V = Q^{-1} A' for the conditioning
    correction, or None when the model has no constraints.
    """

    mode: np.ndarray
    precision: csr_matrix
    log_det: float
    converged: bool
    iterations: int
    mode_raw: np.ndarray
    marginal_sd: np.ndarray
    eta_mean: np.ndarray
    eta_sd: np.ndarray
    chol: np.ndarray
    krig: Optional[tuple]


def _objective(model: LatentModel, lik, alpha, taus, x) -> float:
    eta = model.design @ x
    with np.errstate(over="ignore"):
        val = lik.log_pmf(alpha, eta, model.y)
    return float(np.sum(val)) + joint_prior_logdensity(model, x, taus)


def gaussian_approx(
    model: LatentModel,
    theta: HyperPoint,
    start: Optional[np.ndarray] = None,
) -> GaussianApprox:
    """Newton-Raphson Gaussian approximation of the latent field at theta.

    Converges when the max-norm of the log-joint gradient drops below 1e-6
    (at most 50 iterations); a non-SPD or objective-degrading step triggers
    Levenberg-style diagonal damping, escalating tenfold up to 10 retries.
    Non-convergence is reported through the ``converged`` flag, never an
    exception (the caller down-weights the point).
    """
    lik = build_likelihood(model)
    taus = theta.taus
    q_prior = model.prior_precision(taus)
    z = model.design
    n_latent = model.n_latent
    x = np.zeros(n_latent) if start is None else np.array(start, dtype=float)

    converged = False
    iterations = 0
    obj = _objective(model, lik, theta.alpha, taus, x)
    hess = None
    for it in range(NEWTON_MAX_ITER):
        iterations = it
        eta = z @ x
        with np.errstate(over="ignore", invalid="ignore"):
            d = lik.derivs(theta.alpha, eta, model.y)
        grad = z.T @ d.d1 - q_prior @ x
        if np.max(np.abs(grad)) < NEWTON_TOL:
            converged = True
            break
        w = -d.d2
        hess = q_prior + (z.T * w) @ z
        damping = 0.0
        scale = np.mean(np.diag(hess))
        stepped = False
        for _ in range(DAMPING_RETRIES + 1):
            try:
                cf = _linalg.cho_factor(
                    hess + damping * scale * np.eye(n_latent), lower=True
                )
            except _linalg.LinAlgError:
                damping = damping * 10.0 if damping > 0 else 1e-6
                continue
            x_new = x + _linalg.cho_solve(cf, grad)
            obj_new = _objective(model, lik, theta.alpha, taus, x_new)
            if np.isfinite(obj_new) and obj_new >= obj - 1e-9 * (1.0 + abs(obj)):
                x, obj = x_new, obj_new
                stepped = True
                break
            damping = damping * 10.0 if damping > 0 else 1e-6
        if not stepped:
            break

    # final curvature at the resting point (undamped)
    eta = z @ x
    with np.errstate(over="ignore", invalid="ignore"):
        d = lik.derivs(theta.alpha, eta, model.y)
    grad = z.T @ d.d1 - q_prior @ x
    converged = bool(np.max(np.abs(grad)) < NEWTON_TOL)
    hess = q_prior + (z.T * -d.d2) @ z
    try:
        chol = _linalg.cholesky(hess, lower=True)
    except _linalg.LinAlgError:
        jitter = 1e-10 * max(1.0, np.max(np.diag(hess)))
        chol = _linalg.cholesky(hess + jitter * np.eye(n_latent), lower=True)
        converged = False
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))

    cov = _linalg.cho_solve((chol, True), np.eye(n_latent))
    var = np.diag(cov).copy()
    mode = x.copy()
    krig = None
    a_mat = model.constraint_matrix()
    if a_mat is not None:
        v = cov @ a_mat.T
        s = a_mat @ v
        s_chol = _linalg.cho_factor(s, lower=True)
        mode = x - v @ _linalg.cho_solve(s_chol, a_mat @ x)
        correction = v @ _linalg.cho_solve(s_chol, v.T)
        var = var - np.diag(correction)
        cov = cov - correction
        krig = (v, s_chol, a_mat)
    var = np.maximum(var, 0.0)
    eta_mean = z @ mode
    eta_var = np.maximum(np.einsum("ij,jk,ik->i", z, cov, z), 0.0)

    return GaussianApprox(
        mode=mode,
        precision=csr_matrix(hess),
        log_det=log_det,
        converged=converged,
        iterations=iterations,
        mode_raw=x,
        marginal_sd=np.sqrt(var),
        eta_mean=eta_mean,
        eta_sd=np.sqrt(eta_var),
        chol=chol,
        krig=krig,
    )


def _log_posterior(model: LatentModel, lik, point: HyperPoint, approx: GaussianApprox) -> float:
    """Unnormalized ln pi(theta | y) via the Laplace identity."""
    x = approx.mode_raw
    eta = model.design @ x
    with np.errstate(over="ignore"):
        ll = float(np.sum(lik.derivs(point.alpha, eta, model.y).value))
    lp = ll + joint_prior_logdensity(model, x, point.taus)
    if lik.n_hyper:
        # natural-scale prior plus the ln-Jacobian of the log transform
        lp += lik.log_prior_hyper(point.alpha) + np.log(point.alpha)
    for j, comp_idx in enumerate(model.flexible):
        prior = model.components[comp_idx].tau_prior
        tau = float(point.taus[j])
        lp += float(variance_prior_logdensity(prior, tau)) + point.log_taus[j]
    lp += 0.5 * model.n_latent * np.log(2.0 * np.pi) - 0.5 * approx.log_det
    return lp


class _GridEvaluator:
    """Caches Gaussian approximations over hyper points, warm-starting each
    Newton run from the most recently found mode."""

    def __init__(self, model: LatentModel, settings: GridSettings):
        self.model = model
        self.lik = build_likelihood(model)
        self.settings = settings
        self.n_alpha = self.lik.n_hyper
        self.n_tau = len(model.flexible)
        self.dim = self.n_alpha + self.n_tau
        self.cache: dict[tuple, tuple[float, HyperPoint]] = {}
        self.last_mode: Optional[np.ndarray] = None

    def point_from(self, zvec: np.ndarray) -> HyperPoint:
        alpha = float(np.exp(zvec[0])) if self.n_alpha else None
        log_taus = np.array(zvec[self.n_alpha :], dtype=float)
        return HyperPoint(alpha=alpha, log_taus=log_taus)

    def evaluate(self, zvec: np.ndarray) -> float:
        key = tuple(np.round(np.asarray(zvec, dtype=float), 12))
        if key in self.cache:
            return self.cache[key][0]
        point = self.point_from(np.asarray(zvec, dtype=float))
        approx = None
        lp = _NEG_INF_PENALTY
        try:
            approx = gaussian_approx(self.model, point, start=self.last_mode)
        except (ValueError, FloatingPointError, _linalg.LinAlgError):
            approx = None
        if approx is not None and approx.converged:
            self.last_mode = approx.mode_raw
            lp = _log_posterior(self.model, self.lik, point, approx)
            if not np.isfinite(lp):
                lp = _NEG_INF_PENALTY
        point.log_post = lp
        point.approx = approx
        self.cache[key] = (lp, point)
        return lp


def hyper_grid(model: LatentModel, settings: GridSettings = GridSettings()) -> list[HyperPoint]:
    """Explore the hyperparameter posterior on a standardized regular grid.

    Returns HyperPoints with normalized weights; points whose Gaussian
    approximation failed to converge carry weight zero. Models with more
    than ``settings.max_hyper`` hyperparameters are refused.
    """
    ev = _GridEvaluator(model, settings)
    if ev.dim > settings.max_hyper:
        raise ConfigError(
            f"{ev.dim} hyperparameters exceed the grid limit of {settings.max_hyper}"
        )
    if ev.dim == 0:
        point = HyperPoint(alpha=None, log_taus=np.zeros(0))
        approx = gaussian_approx(model, point)
        point.approx = approx
        point.log_post = _log_posterior(model, ev.lik, point, approx)
        point.weight = 1.0
        return [point]

    z0 = np.concatenate(
        (
            [np.log(ev.lik.hyper_start)] if ev.n_alpha else [],
            np.full(ev.n_tau, np.log(7.0)),
        )
    )
    res = _optimize.minimize(
        lambda zz: -ev.evaluate(zz),
        z0,
        method="Nelder-Mead",
        options={
            "xatol": settings.nm_xatol,
            "fatol": settings.nm_fatol,
            "maxfev": settings.nm_maxfev,
        },
    )
    z_mode = np.asarray(res.x, dtype=float)
    f_mode = ev.evaluate(z_mode)
    if f_mode <= _NEG_INF_PENALTY + 1.0:
        raise ConvergenceError("hyperparameter mode search never reached a converged Laplace fit")

    # standardize axes by finite-difference curvature
    h = settings.curvature_h
    stds = np.ones(ev.dim)
    for i in range(ev.dim):
        e = np.zeros(ev.dim)
        e[i] = h
        c = (ev.evaluate(z_mode + e) + ev.evaluate(z_mode - e) - 2.0 * f_mode) / (h * h)
        stds[i] = 1.0 / np.sqrt(max(-c, 1e-3))
    stds = np.clip(stds, 0.05, 5.0)

    # walk each axis outward until the posterior drops below the cutoff
    offsets_per_axis: list[list[int]] = []
    for i in range(ev.dim):
        offs = [0]
        for direction in (+1, -1):
            for m in range(1, settings.max_offsets + 1):
                e = np.zeros(ev.dim)
                e[i] = direction * m * settings.step * stds[i]
                lp = ev.evaluate(z_mode + e)
                if lp < f_mode - settings.cutoff:
                    break
                offs.append(direction * m)
        offsets_per_axis.append(sorted(offs))

    # product grid over the retained axis offsets
    mesh = np.meshgrid(*offsets_per_axis, indexing="ij")
    combos = np.stack([m.ravel() for m in mesh], axis=1)
    points: list[HyperPoint] = []
    best = f_mode
    for combo in combos:
        zz = z_mode + combo * settings.step * stds
        lp = ev.evaluate(zz)
        best = max(best, lp)
        points.append(ev.cache[tuple(np.round(zz, 12))][1])
    kept = [p for p in points if p.log_post >= best - settings.cutoff]

    raw = np.array([p.log_post for p in kept])
    if len(kept) > 1 and raw.max() - raw.min() < 0.05:
        warnings.warn("flat hyperparameter posterior across the grid", stacklevel=2)
    w = np.exp(raw - raw.max())
    w /= w.sum()
    for p, wi in zip(kept, w):
        p.weight = float(wi)
    return kept


@dataclasses.dataclass
class LatentSummary:
    mean: float
    sd: float
    quantiles: dict


@dataclasses.dataclass
class FitResult:
    """Grid of hyperparameter points with attached Gaussian approximations,
    mixture summaries of every latent element, and evaluation scores."""

    model: LatentModel
    grid: list
    latent_marginals: list
    hyper_marginals: dict
    scores: object = None

    def hyper_mean(self, label: str) -> float:
        values, weights = self.hyper_marginals[label]
        return float(np.sum(values * weights))

    def component_effect(self, name: str) -> np.ndarray:
        """Posterior mean of one component's contribution per observation."""
        for comp, sl in zip(self.model.components, self.model.slices):
            if comp.name == name:
                coef = np.array([s.mean for s in self.latent_marginals[sl]])
                return comp.design @ coef
        raise KeyError(name)


def _mixture_quantile(means, sds, weights, prob: float) -> float:
    lo = float(np.min(means - 8.0 * sds))
    hi = float(np.max(means + 8.0 * sds))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        cdf = float(np.sum(weights * _norm.cdf((mid - means) / sds)))
        if cdf < prob:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * (1.0 + abs(mid)):
            break
    return 0.5 * (lo + hi)


def latent_marginal(fit: FitResult, index: int, probs=(0.025, 0.5, 0.975)):
    """(mean, sd, quantiles) of one latent element's mixture marginal."""
    if not (0 <= index < fit.model.n_latent):
        raise IndexError(f"latent index {index} out of range")
    means = np.array([p.approx.mode[index] for p in fit.grid])
    sds = np.maximum(np.array([p.approx.marginal_sd[index] for p in fit.grid]), 1e-12)
    weights = np.array([p.weight for p in fit.grid])
    mean = float(np.sum(weights * means))
    var = float(np.sum(weights * (sds**2 + means**2)) - mean**2)
    sd = float(np.sqrt(max(var, 0.0)))
    quants = {p: _mixture_quantile(means, sds, weights, p) for p in probs}
    return mean, sd, quants


def fit_latent_model(model: LatentModel, settings: GridSettings = GridSettings()) -> FitResult:
    """Full fit: hyper grid, then mixture marginals for every latent element."""
    grid = hyper_grid(model, settings)
    fit = FitResult(model=model, grid=grid, latent_marginals=[], hyper_marginals={})
    lik = build_likelihood(model)
    weights = np.array([p.weight for p in grid])
    if lik.n_hyper:
        values = np.array([p.alpha for p in grid])
        fit.hyper_marginals[lik.hyper_label] = (values, weights)
    for j, comp_idx in enumerate(model.flexible):
        name = model.components[comp_idx].name
        fit.hyper_marginals[f"tau_{name}"] = (
            np.array([p.taus[j] for p in grid]),
            weights,
        )
    for idx in range(model.n_latent):
        mean, sd, quants = latent_marginal(fit, idx)
        fit.latent_marginals.append(LatentSummary(mean=mean, sd=sd, quantiles=quants))
    return fit


def predictive_draw(fit: FitResult, newdata: dict, rng_seed: int, n_draws: int = 1000):
    """Posterior predictive counts at new covariate values.

    ``newdata`` maps component names to covariate values (region indices
    for spatial components); all components of the model must be supplied.
    Returns dict with 'draws' (n_draws x n_new), 'mean', 'lower', 'upper'
    (2.5%/97.5%).
    """
    model = fit.model
    rows = [None]
    n_new = None
    for comp in model.components:
        if comp.name not in newdata:
            raise KeyError(f"newdata missing component {comp.name!r}")
        block = comp.row_design(newdata[comp.name])
        if n_new is None:
            n_new = block.shape[0]
        elif block.shape[0] != n_new:
            raise ValueError("newdata components have differing lengths")
        rows.append(block)
    if n_new is None:  # intercept-only model
        n_new = 1
    rows[0] = np.ones((n_new, 1))
    z_new = np.hstack(rows)

    lik = build_likelihood(model)
    rng = np.random.default_rng(rng_seed)
    weights = np.array([p.weight for p in fit.grid])
    counts = rng.multinomial(n_draws, weights)
    draws = np.empty((n_draws, n_new), dtype=np.int64)
    pos = 0
    for point, m in zip(fit.grid, counts):
        if m == 0:
            continue
        ap = point.approx
        zmat = rng.standard_normal((m, model.n_latent))
        lat = ap.mode_raw + _linalg.solve_triangular(ap.chol.T, zmat.T, lower=False).T
        if ap.krig is not None:
            v, s_chol, a_mat = ap.krig
            lat = lat - (v @ _linalg.cho_solve(s_chol, a_mat @ lat.T)).T
        eta_new = lat @ z_new.T
        for row in range(m):
            draws[pos + row] = lik.sample(point.alpha, eta_new[row], rng)
        pos += m
    summary = {
        "draws": draws,
        "mean": draws.mean(axis=0),
        "lower": np.percentile(draws, 2.5, axis=0),
        "upper": np.percentile(draws, 97.5, axis=0),
    }
    return summary
