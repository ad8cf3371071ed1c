"""Gamma-count basics: pmf shape across dispersion regimes, the Poisson
special case, moments, and agreement between the renewal sampler and the
analytic pmf.

Run from the repository root:  python3 demos/01_distribution.py
Writes demos/output/distribution.png
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from scipy.stats import poisson

from gcstar.gammacount import GcParams, gc_mean, gc_pmf, gc_sample_counts

out_dir = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(out_dir, exist_ok=True)

# --- the three dispersion regimes at a common rate --------------------
# alpha > 1 squeezes the counts (under-dispersion), alpha < 1 spreads
# them, alpha = 1 is exactly Poisson
ys = np.arange(13)
gamma = 3.0
for alpha in (0.5, 1.0, 2.0):
    m = gc_mean(GcParams(alpha, gamma))
    print(
        f"alpha = {alpha:3.1f}: mean = {m.mean:6.3f}, var = {m.variance:6.3f},"
        f" var/mean = {m.variance / m.mean:5.3f}"
    )

print()
print("alpha = 1 reduces to Poisson:")
diff = np.max(np.abs(gc_pmf(GcParams(1.0, gamma), ys) - poisson.pmf(ys, gamma)))
print(f"  max |gc_pmf - poisson.pmf| over y = 0..12: {diff:.3e}")

# --- sampler vs pmf ---------------------------------------------------
rng = np.random.default_rng(1)
n = 200_000
alpha = 2.0
draws = gc_sample_counts(alpha, np.full(n, gamma), 1.0, rng)
freq = np.bincount(draws, minlength=ys.size)[: ys.size] / n
pmf = gc_pmf(GcParams(alpha, gamma), ys)
print()
print(f"renewal sampler vs pmf at alpha = {alpha} ({n} draws):")
print("  y   pmf      freq")
for y in ys[:8]:
    print(f"  {y}  {pmf[y]:.5f}  {freq[y]:.5f}")

# --- picture ----------------------------------------------------------
fig, axes = plt.subplots(1, 3, figsize=(11, 3.2), sharey=True)
for ax, alpha in zip(axes, (0.5, 1.0, 2.0)):
    ax.bar(ys - 0.2, gc_pmf(GcParams(alpha, gamma), ys), width=0.4, label="gamma-count")
    ax.bar(ys + 0.2, poisson.pmf(ys, gamma), width=0.4, label="Poisson, same rate")
    ax.set_title(f"alpha = {alpha}")
    ax.set_xlabel("y")
axes[0].set_ylabel("P(Y = y)")
axes[0].legend(frameon=False)
fig.tight_layout()
fig.savefig(os.path.join(out_dir, "distribution.png"), dpi=120)
print()
print(f"wrote {os.path.join(out_dir, 'distribution.png')}")
