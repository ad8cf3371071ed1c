"""Model comparison on under-dispersed data: gamma-count vs Poisson vs
negative binomial, scored by WAIC, DIC and the CPO log-score.

Run from the repository root:  python3 demos/05_model_comparison.py
"""

import warnings

import numpy as np

from gcstar.evaluation import compute_scores
from gcstar.gammacount import gc_sample_counts
from gcstar.inference import fit_latent_model
from gcstar.predictor import LatentModel, make_linear, make_rw2

rng = np.random.default_rng(42)
n = 300
x = rng.uniform(-3.0, 3.0, n)
x -= x.mean()
f = np.sin(x)
alpha_true = 2.0
y = gc_sample_counts(alpha_true, alpha_true * np.exp(0.5 + f), 1.0, rng)
print(f"n = {n}, true alpha = {alpha_true}, marginal var/mean = {y.var() / y.mean():.3f}")
print("(under-dispersed given eta; the smooth effect inflates the marginal ratio)\n")

rows = []
for lik in ("gamma-count", "poisson", "negative-binomial"):
    model = LatentModel(
        y=y,
        components=[make_linear(x, name="x"), make_rw2(x, n_bins=25, name="f")],
        likelihood=lik,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = fit_latent_model(model)
        s = compute_scores(fit)
    disp = ""
    if lik == "gamma-count":
        disp = f"alpha = {fit.hyper_mean('alpha'):.2f}"
    elif lik == "negative-binomial":
        disp = f"size = {fit.hyper_mean('size'):.0f}"
    rows.append((lik, s.waic, s.dic, s.log_score, disp))

print(f"{'model':<20} {'WAIC':>9} {'DIC':>9} {'log-score':>10}   dispersion")
best = min(r[1] for r in rows)
for lik, waic, dic, ls, disp in rows:
    star = " *" if waic == best else ""
    print(f"{lik:<20} {waic:9.2f} {dic:9.2f} {ls:10.2f}   {disp}{star}")
print("\n(* lowest WAIC; the negative binomial can only add over-dispersion,")
print("so on under-dispersed counts it collapses toward Poisson)")
