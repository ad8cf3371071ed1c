"""Hyperparameter priors: the penalized-complexity prior on the dispersion
and the scale-dependent prior on a smoothing variance, with tail-statement
calibration for both.

Run from the repository root:  python3 demos/02_priors.py
Writes demos/output/priors.png
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from scipy import integrate

from gcstar.priors import (
    PcAlphaPrior,
    pc_alpha_calibrate,
    pc_alpha_density,
    pc_distance,
    scale_dependent_calibrate,
    scale_dependent_density,
)

out_dir = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(out_dir, exist_ok=True)

# --- distance from the Poisson base model ------------------------------
# the PC prior lives on d(alpha) = sqrt(2 KLD(alpha || 1)); both dispersion
# directions map onto the same positive axis
for a in (0.25, 0.5, 1.0, 2.0, 4.0):
    dv = pc_distance(a)
    print(f"alpha = {a:4.2f}: d = {dv.d:.4f}  branch {dv.direction}")

# --- calibration --------------------------------------------------------
# "P(d > 2) = 0.05" pins the exponential rate
lam = pc_alpha_calibrate(2.0, 0.05)
print(f"\nPC calibration P(d > 2) = 0.05  ->  lambda = {lam:.6f}")

theta, eps = scale_dependent_calibrate(0.5, 0.01)
print(f"SD calibration P(sigma > 0.5) = 0.01  ->  theta = {theta:.4f}, epsilon = {eps:.6g}")
tail, _ = integrate.quad(lambda s2: scale_dependent_density(eps, s2), 0.25, np.inf)
print(f"  check: integral of the density over sigma^2 > 0.25 = {tail:.6f}")

# --- densities ----------------------------------------------------------
alphas = np.linspace(0.02, 5.0, 800)
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
for lam in (1.0, 3.0, 5.0):
    prior = PcAlphaPrior(lam=lam)
    ax1.plot(alphas, pc_alpha_density(prior, alphas), label=f"lambda = {lam:g}")
    mass, _ = integrate.quad(lambda a: pc_alpha_density(prior, a), 0, np.inf, limit=200)
    print(f"lambda = {lam}: prior mass on (0, inf) = {mass:.6f}")
ax1.axvline(1.0, color="0.7", lw=0.8)
ax1.set_xlabel("alpha")
ax1.set_ylabel("PC prior density")
ax1.legend(frameon=False)

s2 = np.linspace(1e-4, 1.0, 600)
for u, a in ((0.5, 0.01), (1.0, 0.01), (1.0, 0.1)):
    _, e = scale_dependent_calibrate(u, a)
    ax2.plot(s2, scale_dependent_density(e, s2), label=f"P(sigma > {u:g}) = {a:g}")
ax2.set_xlabel("sigma^2")
ax2.set_ylabel("scale-dependent density")
ax2.set_ylim(0, 12)
ax2.legend(frameon=False)
fig.tight_layout()
fig.savefig(os.path.join(out_dir, "priors.png"), dpi=120)
print(f"\nwrote {os.path.join(out_dir, 'priors.png')}")
