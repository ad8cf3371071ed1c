"""Optional check against the German larynx-cancer mortality data.

The dataset (544 districts, male deaths 1986-1990, lung-cancer rate as a
smoking covariate, distributed with the INLA materials) is not bundled
here. If you have it, export it as a CSV with columns

    y       observed deaths per district
    c       smoking covariate
    region  district id, 1..544, matching the adjacency graph

plus the adjacency graph in the usual format (first line: region count;
then "<id> <n_neighbors> <id> ..."), and run

    python3 demos/06_larynx_check.py larynx.csv germany.graph

The script fits eta = beta0 + beta1 * c + spatial(region) under the
gamma-count, Poisson and negative-binomial likelihoods and checks that

  * the gamma-count model has the lowest WAIC, and
  * the posterior mean of alpha lies in (1, 3.2).
"""

import sys
import warnings

import numpy as np

from gcstar.evaluation import compute_scores
from gcstar.harness import column_float, column_int, read_csv_columns
from gcstar.inference import fit_latent_model
from gcstar.predictor import LatentModel, make_icar, make_linear, read_graph_file
from gcstar.priors import PcAlphaPrior


def main(argv):
    if len(argv) != 3:
        print(__doc__)
        return 0
    csv_path, graph_path = argv[1], argv[2]
    cols = read_csv_columns(csv_path)
    y = column_int(cols, "y", csv_path)
    c = column_float(cols, "c", csv_path)
    region = column_int(cols, "region", csv_path) - 1
    nbrs = read_graph_file(graph_path)
    print(f"{y.size} districts, {len(nbrs)} graph regions, total deaths {y.sum()}")

    results = {}
    for lik in ("gamma-count", "poisson", "negative-binomial"):
        model = LatentModel(
            y=y,
            components=[
                make_linear(c, name="c"),
                make_icar(nbrs, region_index=region, name="spatial"),
            ],
            likelihood=lik,
            alpha_prior=PcAlphaPrior(lam=1.0) if lik == "gamma-count" else None,
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit = fit_latent_model(model)
            scores = compute_scores(fit)
        results[lik] = (fit, scores)
        print(f"{lik:<20} WAIC {scores.waic:9.2f}   log-score {scores.log_score:9.2f}")

    alpha_mean = results["gamma-count"][0].hyper_mean("alpha")
    waics = {k: s.waic for k, (_, s) in results.items()}
    gc_best = waics["gamma-count"] < waics["poisson"] and waics["gamma-count"] < waics["negative-binomial"]
    alpha_ok = 1.0 < alpha_mean < 3.2
    print(f"\nalpha posterior mean: {alpha_mean:.3f}  (expected inside (1, 3.2): {alpha_ok})")
    print(f"gamma-count lowest WAIC: {gc_best}")
    return 0 if (gc_best and alpha_ok) else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv))
