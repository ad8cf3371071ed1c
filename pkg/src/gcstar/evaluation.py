"""Model comparison scores: WAIC, DIC, CPO/log-score, and the simulation
criteria Q1/Q2.

All predictive quantities reduce to expectations of functions of the
pointwise likelihood p(y_i | eta_i, hyper) under the fitted posterior. The
eta_i marginal is a Gaussian mixture over the hyper grid, so every
expectation is a grid-weighted 31-node Gauss-Hermite quadrature:

    E[h(p_i)] = sum_k w_k sum_j (gh_j/sqrt(pi)) h(p(y_i | m_ik + sqrt(2) s_ik t_j))

CPO uses the harmonic identity CPO_i = 1 / E[1/p_i]; observations whose
E[1/p] overflows are excluded from the log-score with a reported count.
The harmonic quadrature carries a divergence guard (see _harmonic_keep).
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np
from scipy.special import logsumexp

from .inference import FitResult
from .likelihoods import build_likelihood

__all__ = [
    "PointwiseTable",
    "Scores",
    "SimCriteria",
    "pointwise_predictive",
    "compute_waic",
    "compute_cpo_logscore",
    "compute_dic",
    "compute_scores",
    "compute_q_criteria",
]

GH_NODES = 31
_OVERFLOW_LOG = 690.0  # ln E[1/p] beyond this would overflow a double
_HARMONIC_RISE_LOG = 5.0  # wing rise (in logs) that marks a divergent tail
_HARMONIC_TRUST_MASS = 0.01  # max Gaussian mass a truncated wing may carry


def _harmonic_keep(h: np.ndarray, t: np.ndarray, node_w: np.ndarray) -> np.ndarray:
    """Node mask (True = keep) for the E[1/p] quadrature.

    ``h`` is the (nodes, n_obs) log integrand ln w_j - ln p_ij, ``t`` the
    ascending node abscissae and ``node_w`` the normalized node weights.
    For count likelihoods 1/p grows super-exponentially in eta while the
    Gaussian only decays as exp(-z^2/2), so E[1/p] under the approximation
    diverges in exact arithmetic and the finite node set is the only thing
    keeping the sum bounded. Where the posterior is tight the divergent
    region lies far outside the node range and every node is kept, bit for
    bit. A wing is truncated at its trough only when all three hold:

      * the rise beyond the trough is decisive (> _HARMONIC_RISE_LOG),
      * the rise is convex in eta (the super-exponential signature, as
        opposed to a concave rise from a genuinely large but integrable
        integrand, which is kept and left to the overflow flag), and
      * the truncated region carries negligible Gaussian mass
        (< _HARMONIC_TRUST_MASS), so only tail nodes the approximation
        itself assigns no real probability are discarded.
    """
    n_nodes, _ = h.shape
    center = n_nodes // 2
    keep = np.ones_like(h, dtype=bool)
    for idx in (np.arange(center, n_nodes), np.arange(center, -1, -1)):
        hw = h[idx]
        tw = t[idx]
        m = idx.size
        pos = np.arange(m)[:, None]
        trough = np.argmin(hw, axis=0)
        beyond = pos > trough[None, :]
        outer = np.where(pos >= trough[None, :], hw, -np.inf)
        peak = np.argmax(outer, axis=0)
        rise = (
            np.take_along_axis(hw, peak[None, :], 0)[0]
            - np.take_along_axis(hw, trough[None, :], 0)[0]
        )
        # second divided differences: curvature sign in eta, not in node
        # index (the node spacing grows outward and would skew the sign)
        d10 = (tw[1:-1] - tw[:-2])[:, None]
        d21 = (tw[2:] - tw[1:-1])[:, None]
        d2 = ((hw[2:] - hw[1:-1]) / d21 - (hw[1:-1] - hw[:-2]) / d10) / (d10 + d21)
        mid = np.arange(1, m - 1)[:, None]
        seg = (mid > trough[None, :]) & (mid < peak[None, :])
        with np.errstate(invalid="ignore"):
            seg_curv = np.where(seg, d2, 0.0).sum(axis=0)
        convex = np.where(seg.any(axis=0), seg_curv > 0.0, True)
        # Gaussian mass sitting outward of the trough
        suffix = np.concatenate([np.cumsum(node_w[idx][::-1])[::-1], [0.0]])
        discarded = suffix[trough + 1]
        cut = (
            (rise > _HARMONIC_RISE_LOG)
            & convex
            & np.isfinite(rise)
            & (discarded < _HARMONIC_TRUST_MASS)
        )
        keep[idx] &= ~(beyond & cut[None, :])
    return keep


@dataclasses.dataclass(frozen=True)
class PointwiseTable:
    """Per-observation predictive quadrature results (log scale where the
    natural scale can overflow)."""

    log_e_p: np.ndarray
    e_logp: np.ndarray
    var_logp: np.ndarray
    log_e_invp: np.ndarray
    flagged: np.ndarray

    @property
    def e_p(self) -> np.ndarray:
        return np.exp(self.log_e_p)

    @property
    def e_invp(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_e_invp)


@dataclasses.dataclass(frozen=True)
class Scores:
    dic: float
    p_d: float
    waic: float
    p_waic: float
    cpo: np.ndarray
    log_score: float
    cpo_failures: int


@dataclasses.dataclass(frozen=True)
class SimCriteria:
    q1: float
    q2: float

    def __post_init__(self):
        if self.q1 < 0 or self.q2 < 0:
            raise ValueError("criteria must be non-negative")


def _predictive_table(fit: FitResult) -> PointwiseTable:
    cached = getattr(fit, "_pp_table", None)
    if cached is not None:
        return cached
    model = fit.model
    lik = build_likelihood(model)
    nodes, gh_w = np.polynomial.hermite.hermgauss(GH_NODES)
    node_logw = np.log(gh_w / np.sqrt(np.pi))

    log_p_rows = []
    log_w_rows = []
    log_h_rows = []  # guarded harmonic integrand, per node and observation
    for point in fit.grid:
        if point.weight <= 0.0 or point.approx is None:
            continue
        m, s = point.approx.eta_mean, point.approx.eta_sd
        eta = m[None, :] + np.sqrt(2.0) * s[None, :] * nodes[:, None]
        with np.errstate(over="ignore"):
            log_p = lik.log_pmf(point.alpha, eta, model.y[None, :])
        with np.errstate(invalid="ignore"):
            h = node_logw[:, None] - log_p
        keep = _harmonic_keep(h, nodes, np.exp(node_logw))
        log_h_rows.append(np.where(keep, np.log(point.weight) + h, -np.inf))
        log_p_rows.append(log_p)
        log_w_rows.append(np.log(point.weight) + node_logw)
    log_p = np.concatenate(log_p_rows, axis=0)  # (K*nodes, n)
    log_w = np.concatenate(log_w_rows)[:, None]
    w = np.exp(log_w)

    log_e_p = logsumexp(log_p + log_w, axis=0)
    e_logp = np.sum(w * log_p, axis=0)
    e_logp2 = np.sum(w * log_p * log_p, axis=0)
    var_logp = np.maximum(e_logp2 - e_logp**2, 0.0)
    log_e_invp = logsumexp(np.concatenate(log_h_rows, axis=0), axis=0)
    flagged = ~np.isfinite(log_e_invp) | (log_e_invp > _OVERFLOW_LOG) | ~np.isfinite(log_e_p)
    table = PointwiseTable(
        log_e_p=log_e_p,
        e_logp=e_logp,
        var_logp=var_logp,
        log_e_invp=log_e_invp,
        flagged=flagged,
    )
    fit._pp_table = table
    return table


def pointwise_predictive(fit: FitResult, i: int) -> PointwiseTable:
    """The quadrature table restricted to observation i."""
    t = _predictive_table(fit)
    if not (0 <= i < fit.model.n_obs):
        raise IndexError(f"observation index {i} out of range")
    sl = slice(i, i + 1)
    return PointwiseTable(
        log_e_p=t.log_e_p[sl],
        e_logp=t.e_logp[sl],
        var_logp=t.var_logp[sl],
        log_e_invp=t.log_e_invp[sl],
        flagged=t.flagged[sl],
    )


def compute_waic(fit: FitResult) -> tuple[float, float]:
    """waic = -2 sum_i [ln E p_i - Var_i ln p]; p_waic = sum Var ln p."""
    t = _predictive_table(fit)
    p_waic = float(np.sum(t.var_logp))
    waic = -2.0 * float(np.sum(t.log_e_p - t.var_logp))
    sandwich = 2.0 * float(np.sum(np.abs(t.log_e_p - t.e_logp)))
    if p_waic > sandwich + 1e-8:
        warnings.warn(
            f"p_waic {p_waic:.3f} exceeds the sandwich bound {sandwich:.3f}", stacklevel=2
        )
    return waic, p_waic


def compute_cpo_logscore(fit: FitResult) -> tuple[np.ndarray, float]:
    """CPO_i = 1/E[1/p_i]; log_score = -sum ln CPO over stable entries."""
    t = _predictive_table(fit)
    cpo = np.where(t.flagged, np.nan, np.exp(-t.log_e_invp))
    n_fail = int(t.flagged.sum())
    if n_fail:
        warnings.warn(f"{n_fail} CPO value(s) unstable and excluded", stacklevel=2)
    log_score = float(np.sum(t.log_e_invp[~t.flagged]))
    return cpo, log_score


def compute_dic(fit: FitResult) -> tuple[float, float]:
    """dic = Dbar + p_d with Dbar the posterior mean deviance and the
    plug-in deviance taken at the posterior mean of eta (and of the
    likelihood hyperparameter)."""
    t = _predictive_table(fit)
    d_bar = -2.0 * float(np.sum(t.e_logp))
    model = fit.model
    lik = build_likelihood(model)
    eta_bar = np.sum(
        [p.weight * p.approx.eta_mean for p in fit.grid if p.weight > 0], axis=0
    )
    hyper_bar = None
    if lik.n_hyper:
        hyper_bar = float(np.sum([p.weight * p.alpha for p in fit.grid]))
    with np.errstate(over="ignore"):
        d_hat = -2.0 * float(np.sum(lik.log_pmf(hyper_bar, eta_bar, model.y)))
    p_d = d_bar - d_hat
    if p_d < 0:
        warnings.warn(f"negative effective parameter count p_d = {p_d:.4f}", stacklevel=2)
    return d_bar + p_d, p_d


def compute_scores(fit: FitResult) -> Scores:
    """All criteria in one pass; also attached to fit.scores."""
    waic, p_waic = compute_waic(fit)
    cpo, log_score = compute_cpo_logscore(fit)
    dic, p_d = compute_dic(fit)
    t = _predictive_table(fit)
    scores = Scores(
        dic=dic,
        p_d=p_d,
        waic=waic,
        p_waic=p_waic,
        cpo=cpo,
        log_score=log_score,
        cpo_failures=int(t.flagged.sum()),
    )
    fit.scores = scores
    return scores


def compute_q_criteria(fitted_f, true_f, alpha_hat: float, alpha_true: float) -> SimCriteria:
    """Q1 = mean squared error of the centered effect, Q2 = (alpha_hat - alpha)^2."""
    fhat = np.asarray(fitted_f, dtype=float)
    f = np.asarray(true_f, dtype=float)
    if fhat.shape != f.shape:
        raise ValueError("fitted and true effects must have the same shape")
    fhat = fhat - fhat.mean()
    f = f - f.mean()
    q1 = float(np.mean((fhat - f) ** 2))
    q2 = float((alpha_hat - alpha_true) ** 2)
    return SimCriteria(q1=q1, q2=q2)
