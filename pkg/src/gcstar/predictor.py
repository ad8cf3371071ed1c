"""Structured additive predictor assembly.

eta = beta_0 + sum_j f_j(x): each component j contributes a design matrix
Z_j (n x D_j), a symmetric positive semidefinite penalty K_j (D_j x D_j)
acting as the precision structure of the partially improper Gaussian prior

    p(beta_j | tau_j) ∝ tau_j^{rk(K_j)/2} exp(-tau_j/2 beta_j' K_j beta_j),

a rank-deficiency count, and constraint rows spanning the penalty null
space so the effect is identifiable (centered about zero). Fixed effects
(the intercept and linear terms) carry proper diffuse Gaussians instead of
a tau.
"""

from __future__ import annotations

import dataclasses
import warnings
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csgraph, csr_matrix

from .errors import DataFormatError, DesignError, GraphFormatError
from .priors import GammaPrior, PcAlphaPrior, VariancePrior, scale_dependent_calibrate

__all__ = [
    "PredictorComponent",
    "LatentModel",
    "make_linear",
    "make_rw2",
    "make_icar",
    "make_iid",
    "joint_prior_logdensity",
    "read_graph_file",
    "default_tau_prior",
]

INTERCEPT_PRECISION = 0.01
FIXED_EFFECT_PRECISION = 0.001

LIKELIHOODS = ("gamma-count", "poisson", "negative-binomial")


def default_tau_prior() -> VariancePrior:
    """Scale-dependent prior calibrated by P(sigma > 1) = 0.01."""
    _, eps = scale_dependent_calibrate(1.0, 0.01)
    return VariancePrior("scale-dependent", (eps,))


@dataclasses.dataclass(frozen=True)
class PredictorComponent:
    """One additive term of the predictor.

    ``tau_prior is None`` marks a fixed effect: the penalty is ignored and
    every coefficient gets an independent N(0, 1/fixed_precision) prior.
    ``meta`` carries what row_design needs to map new covariate values onto
    the fitted coefficients (centering constant, bin edges, region count,
    factor levels).
    """

    name: str
    design: np.ndarray
    penalty: np.ndarray
    rank_deficiency: int
    constraint: Optional[np.ndarray]
    tau_prior: Optional[VariancePrior]
    kind: str
    fixed_precision: float = FIXED_EFFECT_PRECISION
    meta: dict = dataclasses.field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.design.shape[1]

    @property
    def is_flexible(self) -> bool:
        return self.tau_prior is not None

    @property
    def penalty_rank(self) -> int:
        return self.dim - self.rank_deficiency

    def row_design(self, values) -> np.ndarray:
        """Design rows for new covariate values (prediction path)."""
        if self.kind == "linear":
            vals = np.atleast_1d(np.asarray(values, dtype=float))
            cols = vals.reshape(len(vals), -1)
            if cols.shape[1] != self.dim:
                raise DataFormatError(
                    f"component {self.name!r} expects {self.dim} column(s), got {cols.shape[1]}"
                )
            return cols - self.meta["centers"]
        if self.kind == "rw2":
            vals = np.asarray(values, dtype=float)
            lo, step, nb = self.meta["lo"], self.meta["step"], self.dim
            idx = np.clip(np.rint((vals - lo) / step).astype(int), 0, nb - 1)
            out = np.zeros((len(vals), nb))
            out[np.arange(len(vals)), idx] = 1.0
            return out
        if self.kind == "icar":
            idx = np.asarray(values)
            if idx.dtype.kind not in "iu":
                raise DataFormatError(f"component {self.name!r} expects integer region ids")
            if (idx < 0).any() or (idx >= self.dim).any():
                raise DataFormatError(
                    f"component {self.name!r}: region id outside the fitted graph (0..{self.dim - 1})"
                )
            out = np.zeros((len(idx), self.dim))
            out[np.arange(len(idx)), idx] = 1.0
            return out
        if self.kind == "iid":
            levels = self.meta["levels"]
            lookup = {lv: i for i, lv in enumerate(levels)}
            try:
                idx = np.array([lookup[v] for v in np.asarray(values).ravel()])
            except KeyError as exc:
                raise DataFormatError(f"component {self.name!r}: unseen level {exc.args[0]!r}")
            out = np.zeros((len(idx), self.dim))
            out[np.arange(len(idx)), idx] = 1.0
            return out
        raise DataFormatError(f"cannot build prediction rows for kind {self.kind!r}")


def make_linear(x, name: str = "linear") -> PredictorComponent:
    """Fixed linear effect(s): centered column(s), zero penalty, no tau.

    Raises DesignError for constant or mutually collinear columns.
    """
    cols = np.asarray(x, dtype=float)
    if cols.ndim == 1:
        cols = cols[:, None]
    if not np.all(np.isfinite(cols)):
        raise DesignError(f"component {name!r}: non-finite covariate values")
    centers = cols.mean(axis=0)
    centered = cols - centers
    sds = centered.std(axis=0)
    if (sds < 1e-12 * (1.0 + np.abs(centers))).any():
        raise DesignError(f"component {name!r}: constant column (degenerate design)")
    if np.linalg.matrix_rank(centered) < centered.shape[1]:
        raise DesignError(f"component {name!r}: collinear columns within the component")
    d = centered.shape[1]
    return PredictorComponent(
        name=name,
        design=centered,
        penalty=np.zeros((d, d)),
        rank_deficiency=d,
        constraint=None,
        tau_prior=None,
        kind="linear",
        meta={"centers": centers},
    )


def _second_difference_penalty(nb: int) -> np.ndarray:
    d2 = np.zeros((nb - 2, nb))
    for i in range(nb - 2):
        d2[i, i : i + 3] = (1.0, -2.0, 1.0)
    return d2.T @ d2


def make_rw2(
    x,
    n_bins: int = 30,
    name: str = "smooth",
    tau_prior: Optional[VariancePrior] = None,
) -> PredictorComponent:
    """Second-order random-walk smooth of a covariate on equidistant knots.

    The covariate is binned to ``n_bins`` equidistant knots; the design is
    the 0/1 bin-incidence matrix, the penalty K = D2'D2 with D2 the
    second-difference operator (rank deficiency 2, null space spanned by
    constants and the linear trend), and the constraints remove exactly
    that null space: sum-to-zero plus zero-linear-trend.
    """
    if n_bins < 5:
        raise DesignError("n_bins must be >= 5")
    vals = np.asarray(x, dtype=float)
    if vals.ndim != 1:
        raise DesignError("rw2 expects a single covariate column")
    if not np.all(np.isfinite(vals)):
        raise DesignError(f"component {name!r}: non-finite covariate values")
    distinct = np.unique(vals).size
    if distinct < n_bins:
        warnings.warn(
            f"component {name!r}: only {distinct} distinct values; collapsing to {distinct} bins",
            stacklevel=2,
        )
        n_bins = max(distinct, 2)
    lo, hi = float(vals.min()), float(vals.max())
    step = (hi - lo) / (n_bins - 1) if hi > lo else 1.0
    idx = np.clip(np.rint((vals - lo) / step).astype(int), 0, n_bins - 1)
    design = np.zeros((len(vals), n_bins))
    design[np.arange(len(vals)), idx] = 1.0
    penalty = _second_difference_penalty(n_bins) if n_bins >= 3 else np.zeros((n_bins, n_bins))
    rank_def = 2 if n_bins >= 3 else n_bins
    constraint = np.vstack([np.ones(n_bins), np.arange(1.0, n_bins + 1.0)])
    return PredictorComponent(
        name=name,
        design=design,
        penalty=penalty,
        rank_deficiency=rank_def,
        constraint=constraint,
        tau_prior=tau_prior or default_tau_prior(),
        kind="rw2",
        meta={"lo": lo, "step": step, "knots": lo + step * np.arange(n_bins)},
    )


def _neighbors_from(graph) -> list[list[int]]:
    if isinstance(graph, np.ndarray):
        if graph.ndim != 2 or graph.shape[0] != graph.shape[1]:
            raise GraphFormatError("adjacency matrix must be square")
        return [list(np.nonzero(row)[0]) for row in graph]
    return [list(map(int, nb)) for nb in graph]


def make_icar(
    graph,
    region_index=None,
    name: str = "spatial",
    tau_prior: Optional[VariancePrior] = None,
) -> PredictorComponent:
    """Intrinsic CAR component on a region graph.

    ``graph`` is a symmetric adjacency structure (list of neighbor lists,
    0-based, or a square 0/1 matrix). K = diag(degree) - adjacency; the
    rank deficiency equals the number of connected components and one
    sum-to-zero constraint is added per component. ``region_index`` maps
    observations to regions; by default observation i is region i.
    """
    nbrs = _neighbors_from(graph)
    n_regions = len(nbrs)
    if n_regions < 2:
        raise GraphFormatError("graph needs at least 2 regions")
    adj = np.zeros((n_regions, n_regions))
    for i, nb in enumerate(nbrs):
        for j in nb:
            if j < 0 or j >= n_regions:
                raise GraphFormatError(f"region {i}: neighbor id {j} out of range")
            if j == i:
                raise GraphFormatError(f"region {i}: self-loop")
            adj[i, j] = 1.0
    if not np.array_equal(adj, adj.T):
        raise GraphFormatError("adjacency is not symmetric")
    penalty = np.diag(adj.sum(axis=1)) - adj
    n_comp, labels = csgraph.connected_components(csr_matrix(adj), directed=False)
    constraint = np.zeros((n_comp, n_regions))
    for c in range(n_comp):
        constraint[c, labels == c] = 1.0
    if region_index is None:
        region_index = np.arange(n_regions)
    idx = np.asarray(region_index)
    if (idx < 0).any() or (idx >= n_regions).any():
        raise GraphFormatError("region_index refers to regions outside the graph")
    design = np.zeros((len(idx), n_regions))
    design[np.arange(len(idx)), idx] = 1.0
    return PredictorComponent(
        name=name,
        design=design,
        penalty=penalty,
        rank_deficiency=n_comp,
        constraint=constraint,
        tau_prior=tau_prior or default_tau_prior(),
        kind="icar",
        meta={"n_regions": n_regions, "n_components": n_comp},
    )


def make_iid(
    group,
    name: str = "iid",
    tau_prior: Optional[VariancePrior] = None,
) -> PredictorComponent:
    """Exchangeable random effect per factor level: K = identity."""
    levels, idx = np.unique(np.asarray(group), return_inverse=True)
    if levels.size < 2:
        raise DesignError("iid component needs at least 2 levels")
    design = np.zeros((len(idx), levels.size))
    design[np.arange(len(idx)), idx] = 1.0
    return PredictorComponent(
        name=name,
        design=design,
        penalty=np.eye(levels.size),
        rank_deficiency=0,
        constraint=None,
        tau_prior=tau_prior or default_tau_prior(),
        kind="iid",
        meta={"levels": list(levels)},
    )


@dataclasses.dataclass
class LatentModel:
    """Response + predictor structure + likelihood family.

    The latent vector is laid out as [beta_0, beta_1, ..., beta_J] with the
    intercept first; ``slices`` addresses each component's block.
    alpha_prior is the prior of the likelihood's dispersion hyperparameter
    (gamma-count alpha, or the negative-binomial size); Poisson has none.
    """

    y: np.ndarray
    components: Sequence[PredictorComponent] = ()
    likelihood: str = "gamma-count"
    alpha_prior: object = None
    intercept_precision: float = INTERCEPT_PRECISION

    def __post_init__(self):
        self.y = np.asarray(self.y)
        if self.y.ndim != 1 or self.y.size == 0:
            raise DataFormatError("response must be a non-empty 1-d array")
        if np.any(self.y < 0) or np.any(self.y != np.floor(self.y)):
            raise DataFormatError("response must contain non-negative integers")
        self.y = self.y.astype(np.int64)
        if self.likelihood not in LIKELIHOODS:
            raise ValueError(f"likelihood must be one of {LIKELIHOODS}")
        self.components = tuple(self.components)
        n = self.y.size
        for comp in self.components:
            if comp.design.shape[0] != n:
                raise DataFormatError(
                    f"component {comp.name!r} has {comp.design.shape[0]} rows, response has {n}"
                )
        if self.alpha_prior is None:
            if self.likelihood == "gamma-count":
                self.alpha_prior = PcAlphaPrior(lam=1.0)
            elif self.likelihood == "negative-binomial":
                self.alpha_prior = GammaPrior(1.0, 0.01)

        self.slices: list[slice] = []
        pos = 1
        for comp in self.components:
            self.slices.append(slice(pos, pos + comp.dim))
            pos += comp.dim
        self.n_latent = pos
        self.design = np.hstack(
            [np.ones((n, 1))] + [comp.design for comp in self.components]
        )
        self.flexible = [i for i, c in enumerate(self.components) if c.is_flexible]

    @property
    def n_obs(self) -> int:
        return self.y.size

    def prior_precision(self, taus) -> np.ndarray:
        """Dense prior precision of the latent vector for given taus."""
        taus = np.asarray(taus, dtype=float)
        if taus.size != len(self.flexible):
            raise ValueError(
                f"expected {len(self.flexible)} precision value(s), got {taus.size}"
            )
        q = np.zeros((self.n_latent, self.n_latent))
        q[0, 0] = self.intercept_precision
        t_iter = iter(taus)
        for comp, sl in zip(self.components, self.slices):
            if comp.is_flexible:
                q[sl, sl] = next(t_iter) * comp.penalty
            else:
                q[sl, sl] = comp.fixed_precision * np.eye(comp.dim)
        return q

    def constraint_matrix(self) -> Optional[np.ndarray]:
        """Global constraint rows A (A @ latent = 0), or None."""
        rows = []
        for comp, sl in zip(self.components, self.slices):
            if comp.constraint is None:
                continue
            block = np.zeros((comp.constraint.shape[0], self.n_latent))
            block[:, sl] = comp.constraint
            rows.append(block)
        if not rows:
            return None
        return np.vstack(rows)


def joint_prior_logdensity(model: LatentModel, latent, taus) -> float:
    """Log prior density of the latent vector given the precisions.

    sum_j [ (rk(K_j)/2) ln tau_j - (tau_j/2) beta_j' K_j beta_j ] over the
    flexible components (rank, not dimension, in the exponent: the prior is
    partially improper), plus proper Gaussian terms for the intercept and
    fixed effects.
    """
    x = np.asarray(latent, dtype=float)
    if x.size != model.n_latent:
        raise ValueError(f"latent vector has size {x.size}, expected {model.n_latent}")
    taus = np.asarray(taus, dtype=float)
    if taus.size != len(model.flexible):
        raise ValueError(f"expected {len(model.flexible)} precision value(s), got {taus.size}")
    if (taus <= 0).any():
        raise ValueError("taus must be positive")
    out = 0.5 * np.log(model.intercept_precision / (2.0 * np.pi))
    out -= 0.5 * model.intercept_precision * x[0] ** 2
    t_iter = iter(taus)
    for comp, sl in zip(model.components, model.slices):
        beta = x[sl]
        if comp.is_flexible:
            tau = next(t_iter)
            out += 0.5 * comp.penalty_rank * np.log(tau)
            out -= 0.5 * tau * float(beta @ comp.penalty @ beta)
        else:
            out += 0.5 * comp.dim * np.log(comp.fixed_precision / (2.0 * np.pi))
            out -= 0.5 * comp.fixed_precision * float(beta @ beta)
    return float(out)


def read_graph_file(path) -> list[list[int]]:
    """Parse the adjacency file format into 0-based neighbor lists.

    Line 1: integer number of regions. Then one line per region:
    ``<region_id> <n_neighbors> <id_1> ... <id_k>`` with 1-based ids,
    whitespace-separated. Raises GraphFormatError with the line number on
    any malformed content.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh]
    body = [(i + 1, ln) for i, ln in enumerate(lines) if ln]
    if not body:
        raise GraphFormatError(f"{path}: line 1: empty graph file")
    first_no, first = body[0]
    try:
        n_regions = int(first)
    except ValueError:
        raise GraphFormatError(f"{path}: line {first_no}: expected region count, got {first!r}")
    if n_regions < 1 or len(body) - 1 != n_regions:
        raise GraphFormatError(
            f"{path}: line {first_no}: declared {n_regions} regions, found {len(body) - 1} rows"
        )
    nbrs: list[Optional[list[int]]] = [None] * n_regions
    for line_no, ln in body[1:]:
        parts = ln.split()
        try:
            rid, deg = int(parts[0]), int(parts[1])
            ids = [int(p) for p in parts[2:]]
        except (ValueError, IndexError):
            raise GraphFormatError(f"{path}: line {line_no}: malformed region row {ln!r}")
        if not (1 <= rid <= n_regions):
            raise GraphFormatError(f"{path}: line {line_no}: region id {rid} out of range")
        if len(ids) != deg:
            raise GraphFormatError(
                f"{path}: line {line_no}: declared {deg} neighbors, listed {len(ids)}"
            )
        if any(not (1 <= v <= n_regions) for v in ids):
            raise GraphFormatError(f"{path}: line {line_no}: neighbor id out of range")
        if nbrs[rid - 1] is not None:
            raise GraphFormatError(f"{path}: line {line_no}: duplicate region id {rid}")
        nbrs[rid - 1] = [v - 1 for v in ids]
    return [nb if nb is not None else [] for nb in nbrs]
