import numpy as np
import pytest

from gcstar.gammacount import gc_sample_counts
from gcstar.predictor import LatentModel, make_linear, make_rw2
from gcstar.inference import fit_latent_model


@pytest.fixture(scope="session")
def underdispersed_fit():
    """One shared n=100 gamma-count fit (linear + smooth), reused by the
    inference and evaluation tests to keep the suite fast."""
    rng = np.random.default_rng(np.random.SeedSequence(20260814, spawn_key=(0,)))
    x = rng.uniform(-3.0, 3.0, size=100)
    x = x - x.mean()
    f = np.sin(x)
    y = gc_sample_counts(2.0, 2.0 * np.exp(f), 1.0, rng)
    model = LatentModel(
        y=y,
        components=[make_linear(x, name="x"), make_rw2(x, n_bins=20, name="f")],
        likelihood="gamma-count",
    )
    fit = fit_latent_model(model)
    return {"x": x, "f": f, "y": y, "fit": fit}


@pytest.fixture(scope="session")
def intercept_only_fit():
    """Tiny intercept-only fit with a dense 2-D quadrature oracle attached."""
    rng = np.random.default_rng(np.random.SeedSequence(99, spawn_key=(0,)))
    y = gc_sample_counts(2.0, 2.0 * np.exp(np.full(60, 0.4)), 1.0, rng)
    model = LatentModel(y=y, components=[], likelihood="gamma-count")
    fit = fit_latent_model(model)
    return {"y": y, "fit": fit, "model": model}
