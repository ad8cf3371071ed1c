"""Prior catalog: the PC prior for the dispersion, the scale-dependent
variance prior, and the competing variance/dispersion priors.

The penalized-complexity construction measures how far a Gamma(alpha, b1)
inter-arrival law is from the exponential base model Gamma(1, b2) by

    d(alpha) = sqrt(2 KLD),
    KLD = -ln Gamma(alpha) + (alpha-1) psi(alpha) + ln R - alpha (1 - 1/R)

with R = b1/b2 the rate ratio, and places an exponential law with rate
``lam`` on that distance. The distance map is two-to-one (one alpha below
the base, one above, share each distance value), and mass 1/2 goes to each
branch, so the pushforward of d is exactly Exp(lam) and the numerically
computed normalization constant equals the raw two-branch mass.

Variance priors are all exposed as log-densities in the precision (tau)
parameterization, including the |d sigma^2 / d tau| = tau^{-2} Jacobian for
families defined on the variance and |d sigma / d tau| for families defined
on the standard deviation.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy import integrate as _integrate
from scipy import optimize as _optimize
from scipy.special import polygamma as _polygamma

from .errors import DomainError, CalibrationError
from .specfun import digamma, log_gamma, trigamma

__all__ = [
    "DistanceValue",
    "PcAlphaPrior",
    "GammaPrior",
    "VariancePrior",
    "kld_gamma",
    "pc_distance",
    "pc_alpha_density",
    "pc_alpha_calibrate",
    "scale_dependent_density",
    "scale_dependent_calibrate",
    "variance_prior_logdensity",
]

# switch to the Taylor expansion of the equal-rate KLD inside this window
# around alpha = 1; the direct formula loses ~half its digits to
# cancellation there
_SERIES_WINDOW = 1e-3


def _validate_positive(value, name: str):
    arr = np.asarray(value, dtype=float)
    if np.isnan(arr).any() or (arr <= 0).any():
        raise DomainError(f"{name} must be positive")
    return arr


def kld_gamma(alpha, rate_ratio=1.0):
    """KLD( Gamma(alpha, b1) || Gamma(1, b2) ) with R = b1/b2.

    Closed form -ln Gamma(alpha) + (alpha-1) psi(alpha) + ln R
    - alpha (1 - 1/R). Near alpha = 1 with R = 1 the two leading terms
    cancel, so a fourth-order Taylor expansion in (alpha - 1) is used
    there. Tiny negative round-off (>= -1e-12) is clamped to zero.
    """
    a = _validate_positive(alpha, "alpha")
    r = _validate_positive(rate_ratio, "rate_ratio")
    a, r = np.broadcast_arrays(a, r)
    out = -log_gamma(a) + (a - 1.0) * digamma(a) + np.log(r) - a * (1.0 - 1.0 / r)
    near = (np.abs(a - 1.0) < _SERIES_WINDOW) & (r == 1.0)
    if np.any(near):
        h = a - 1.0
        # f(1+h) = psi'(1) h^2/2 + psi''(1) h^3/3 + psi'''(1) h^4/8 + O(h^5)
        c2 = float(_polygamma(1, 1.0))
        c3 = float(_polygamma(2, 1.0))
        c4 = float(_polygamma(3, 1.0))
        series = h * h * (c2 / 2.0 + h * (c3 / 3.0 + h * (c4 / 8.0)))
        out = np.where(near, series, out)
    if (out < -1e-12).any():
        raise DomainError("kld_gamma produced a negative value beyond round-off")
    out = np.maximum(out, 0.0)
    return out if out.ndim else float(out)


@dataclasses.dataclass(frozen=True)
class DistanceValue:
    """KLD-based distance of one dispersion value from the base model.

    ``direction`` is '-' for the alpha < 1 branch, '+' for alpha > 1 and
    '0' at the base value itself.
    """

    d: float
    direction: str

    def __post_init__(self):
        if self.d < 0:
            raise DomainError("distance must be non-negative")


def pc_distance(alpha: float, rate_ratio: float = 1.0) -> DistanceValue:
    """Distance d(alpha) = sqrt(2 KLD) with its branch label."""
    d = float(np.sqrt(2.0 * kld_gamma(alpha, rate_ratio)))
    direction = "0" if alpha == 1.0 else ("-" if alpha < 1.0 else "+")
    return DistanceValue(d=d, direction=direction)


def _distance_array(alpha, rate_ratio):
    return np.sqrt(2.0 * np.asarray(kld_gamma(alpha, rate_ratio), dtype=float))


def _raw_log_density(alpha, lam, rate_ratio):
    """ln of lam e^{-lam d(alpha)} |d'(alpha)| before normalization.

    d'(alpha) = [(alpha-1) psi'(alpha) - (1 - 1/R)] / d(alpha). At the
    distance minimum the quotient is evaluated by its limit: sqrt(psi'(1))
    for R = 1 (verified against one-sided numeric evaluation), zero for
    R != 1 where d_min > 0.
    """
    a = np.asarray(alpha, dtype=float)
    d = _distance_array(a, rate_ratio)
    num = (a - 1.0) * trigamma(a) - (1.0 - 1.0 / rate_ratio)
    with np.errstate(divide="ignore", invalid="ignore"):
        abs_dprime = np.abs(num) / d
    if rate_ratio == 1.0:
        limit = np.sqrt(trigamma(np.maximum(a, 1e-12)))
        small = np.abs(a - 1.0) < 1e-8
        abs_dprime = np.where(small, limit, abs_dprime)
    else:
        abs_dprime = np.where(d == 0.0, 0.0, abs_dprime)
    with np.errstate(divide="ignore"):
        out = np.log(lam) - lam * d + np.log(abs_dprime)
    return out, d


def _distance_minimum(rate_ratio: float) -> tuple[float, float]:
    """(argmin, min) of d(alpha) for a given rate ratio."""
    if rate_ratio == 1.0:
        return 1.0, 0.0
    # stationarity: (alpha-1) psi'(alpha) = 1 - 1/R
    target = 1.0 - 1.0 / rate_ratio
    f = lambda a: (a - 1.0) * float(trigamma(a)) - target
    lo, hi = (1.0, 50.0) if target > 0 else (1e-8, 1.0)
    a_star = float(_optimize.brentq(f, lo, hi))
    return a_star, float(_distance_array(a_star, rate_ratio))


@dataclasses.dataclass(frozen=True)
class PcAlphaPrior:
    """Penalized-complexity prior for the gamma-count dispersion.

    Attributes
    ----------
    lam : float
        Penalization rate of the exponential law on the distance, > 0.
    rate_ratio : float
        R = b1/b2, flexible over base inter-arrival rate; default 1
        (equal rates, the simplified form).
    normalization : float
        Integral of the raw two-branch density over (0, inf), computed
        numerically at construction; the density divides by it.
    """

    lam: float
    rate_ratio: float = 1.0
    normalization: float = dataclasses.field(default=0.0)

    def __post_init__(self):
        if not (self.lam > 0 and np.isfinite(self.lam)):
            raise DomainError("lam must be positive and finite")
        if not (self.rate_ratio > 0 and np.isfinite(self.rate_ratio)):
            raise DomainError("rate_ratio must be positive and finite")
        if self.normalization == 0.0:
            a_star, _ = _distance_minimum(self.rate_ratio)
            raw = lambda a: float(
                np.exp(_raw_log_density(np.asarray(a), self.lam, self.rate_ratio)[0])
            )
            below, _ = _integrate.quad(raw, 0.0, a_star, limit=200)
            above, _ = _integrate.quad(raw, a_star, np.inf, limit=200)
            object.__setattr__(self, "normalization", below + above)

    def log_density(self, alpha):
        a = np.asarray(alpha, dtype=float)
        out = np.full(a.shape, -np.inf)
        ok = a > 0
        if np.any(ok):
            raw, _ = _raw_log_density(a[ok], self.lam, self.rate_ratio)
            out[ok] = raw - np.log(self.normalization)
        return out if out.ndim else float(out)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw alphas: branch with mass 1/2 each, then the shifted
        exponential distance inverted back to alpha by bisection."""
        a_star, d_min = _distance_minimum(self.rate_ratio)
        d = d_min + rng.exponential(1.0 / self.lam, size=n)
        above = rng.random(n) < 0.5
        out = np.empty(n)
        for mask, upper in ((above, True), (~above, False)):
            if not mask.any():
                continue
            out[mask] = self._invert_distance(d[mask], a_star, upper)
        return out

    def _invert_distance(self, d: np.ndarray, a_star: float, upper: bool) -> np.ndarray:
        if upper:
            lo = np.full(d.shape, a_star)
            hi = np.full(d.shape, a_star + 1.0)
            need = _distance_array(hi, self.rate_ratio) < d
            while need.any():
                hi[need] = a_star + (hi[need] - a_star) * 2.0
                need = _distance_array(hi, self.rate_ratio) < d
        else:
            hi = np.full(d.shape, a_star)
            lo = np.full(d.shape, a_star / 2.0)
            need = _distance_array(lo, self.rate_ratio) < d
            while need.any():
                lo[need] *= 0.5
                if (lo < 1e-280).any():
                    lo = np.maximum(lo, 1e-280)
                    break
                need = _distance_array(lo, self.rate_ratio) < d
        # d is monotone on each branch; 90 halvings give ~1e-27 relative
        for _ in range(90):
            mid = 0.5 * (lo + hi)
            too_low = _distance_array(mid, self.rate_ratio) < d
            if upper:
                lo = np.where(too_low, mid, lo)
                hi = np.where(too_low, hi, mid)
            else:
                hi = np.where(too_low, mid, hi)
                lo = np.where(too_low, lo, mid)
        return 0.5 * (lo + hi)


def pc_alpha_density(prior: PcAlphaPrior, alpha):
    """Normalized PC prior density at alpha; zero outside (0, inf)."""
    a = np.asarray(alpha, dtype=float)
    out = np.zeros(a.shape)
    ok = a > 0
    if np.any(ok):
        out[ok] = np.exp(prior.log_density(a[ok]))
    return out if out.ndim else float(out)


def pc_alpha_calibrate(u: float, a: float, rate_ratio: float = 1.0) -> float:
    """Rate lam such that P(d(alpha) > u) = a, i.e. lam = -ln(a)/u.

    Only defined for equal rates: for R != 1 the distance has a strictly
    positive minimum, P(d <= u) = 0 for small u, and the tail statement
    cannot be solved; the call refuses rather than mis-calibrate.
    """
    if rate_ratio != 1.0:
        raise CalibrationError(
            "tail calibration is only defined for rate_ratio = 1 "
            "(the distance minimum is positive otherwise)"
        )
    if not (u > 0) or not (0.0 < a < 1.0):
        raise CalibrationError(f"infeasible calibration: need u > 0 and 0 < a < 1, got u={u}, a={a}")
    return -math.log(a) / u


def scale_dependent_density(epsilon: float, sigma2):
    """Scale-dependent prior density on a variance sigma^2.

    Weibull with shape 1/2 and scale epsilon:

        p(sigma^2) = (1/(2 eps)) (sigma^2/eps)^{-1/2} exp(-(sigma^2/eps)^{1/2})

    equivalently an exponential law with rate 1/sqrt(eps) on sigma.
    """
    eps = float(_validate_positive(epsilon, "epsilon"))
    s2 = _validate_positive(sigma2, "sigma2")
    z = s2 / eps
    out = (0.5 / eps) * z**-0.5 * np.exp(-np.sqrt(z))
    return out if out.ndim else float(out)


def scale_dependent_calibrate(u: float, a: float) -> tuple[float, float]:
    """(theta, epsilon) such that P(sigma > u) = a.

    The standard deviation is exponential with rate theta = 1/sqrt(eps),
    so theta = -ln(a)/u and epsilon = 1/theta^2.
    """
    if not (u > 0) or not (0.0 < a < 1.0):
        raise CalibrationError(f"infeasible calibration: need u > 0 and 0 < a < 1, got u={u}, a={a}")
    theta = -math.log(a) / u
    return theta, 1.0 / (theta * theta)


@dataclasses.dataclass(frozen=True)
class GammaPrior:
    """Gamma(shape, rate) prior for a positive scalar (dispersion or NB size)."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise DomainError("shape and rate must be positive")

    def log_density(self, x):
        arr = np.asarray(x, dtype=float)
        out = np.full(arr.shape, -np.inf)
        ok = arr > 0
        if np.any(ok):
            out[ok] = (
                self.shape * np.log(self.rate)
                - log_gamma(self.shape)
                + (self.shape - 1.0) * np.log(arr[ok])
                - self.rate * arr[ok]
            )
        return out if out.ndim else float(out)


_VARIANCE_KINDS = (
    "scale-dependent",
    "generalized-beta-prime",
    "gamma",
    "inverse-gamma",
    "flat-uniform",
    "half-cauchy",
)


@dataclasses.dataclass(frozen=True)
class VariancePrior:
    """One catalog prior for a smoothing variance/precision.

    kind / params:
      scale-dependent        (epsilon,)
      generalized-beta-prime (epsilon,)      scale of the beta-prime on sigma^2
      gamma                  (shape, rate)   on the precision tau
      inverse-gamma          (shape, scale)  on sigma^2
      flat-uniform           (lower, upper)  on tau
      half-cauchy            (scale,)        on sigma, default scale 0.022
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in _VARIANCE_KINDS:
            raise DomainError(f"unknown variance prior kind {self.kind!r}")
        p = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", p)
        if self.kind == "flat-uniform":
            lo, hi = p
            if not (0 <= lo < hi):
                raise DomainError("flat-uniform needs 0 <= lower < upper")
        elif any(v <= 0 for v in p):
            raise DomainError(f"{self.kind} parameters must be positive")

    def log_density(self, tau):
        return variance_prior_logdensity(self, tau)


def variance_prior_logdensity(prior: VariancePrior, tau):
    """Log-density of a catalog prior in the precision parameterization.

    Families stated on sigma^2 carry the |d sigma^2/d tau| = tau^{-2}
    Jacobian, the half-Cauchy on sigma carries |d sigma/d tau|; outside the
    flat prior's bounds the value is -inf.
    """
    t = _validate_positive(tau, "tau")
    kind, p = prior.kind, prior.params
    if kind == "scale-dependent":
        theta = 1.0 / math.sqrt(p[0])
        out = math.log(theta / 2.0) - 1.5 * np.log(t) - theta / np.sqrt(t)
    elif kind == "gamma":
        shape, rate = p
        out = shape * math.log(rate) - float(log_gamma(shape)) + (shape - 1.0) * np.log(t) - rate * t
    elif kind == "inverse-gamma":
        # IG(a, b) on sigma^2 is exactly Gamma(a, rate b) on tau
        shape, scale = p
        out = shape * math.log(scale) - float(log_gamma(shape)) + (shape - 1.0) * np.log(t) - scale * t
    elif kind in ("generalized-beta-prime", "half-cauchy"):
        # both reduce to tau^{-3/2} / (pi s (1 + 1/(s^2 tau)))
        s = p[0]
        out = -math.log(math.pi * s) - 1.5 * np.log(t) - np.log1p(1.0 / (s * s * t))
    elif kind == "flat-uniform":
        lo, hi = p
        out = np.where((t >= lo) & (t <= hi), -math.log(hi - lo), -np.inf)
    else:  # pragma: no cover - guarded in __post_init__
        raise DomainError(kind)
    out = np.asarray(out)
    return out if out.ndim else float(out)
