"""Run configuration: YAML loading, validation, and prior-name parsing.

Prior specifications accept the catalog names verbatim: PC, SD, GBP, G,
IG, HC, Flat. Each is a mapping with a ``family`` key plus family-specific
parameters; see the README for the full schema.
"""

from __future__ import annotations

import dataclasses
import os
from typing import Optional

import yaml

from .errors import ConfigError
from .inference import GridSettings
from .priors import (
    GammaPrior,
    PcAlphaPrior,
    VariancePrior,
    pc_alpha_calibrate,
    scale_dependent_calibrate,
)

__all__ = ["RunConfig", "load_config", "parse_alpha_prior", "parse_tau_prior", "prior_label"]

TASKS = ("fit", "simulate", "calibrate-prior", "compare")

EFFECT_IDS = ("f1", "f2", "f3")


def parse_alpha_prior(spec) -> object:
    """Prior object for a dispersion hyperparameter (GC alpha or NB size)."""
    if spec is None:
        return None
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(f"alpha prior must be a mapping with a 'family' key, got {spec!r}")
    fam = spec["family"]
    if fam == "PC":
        rr = float(spec.get("rate_ratio", 1.0))
        if "lambda" in spec:
            lam = float(spec["lambda"])
        elif "u" in spec and "a" in spec:
            lam = pc_alpha_calibrate(float(spec["u"]), float(spec["a"]))
        else:
            raise ConfigError("PC prior needs 'lambda' or a (u, a) tail statement")
        return PcAlphaPrior(lam=lam, rate_ratio=rr)
    if fam == "G":
        if "theta" in spec:
            return GammaPrior(1.0, float(spec["theta"]))
        return GammaPrior(float(spec["shape"]), float(spec["rate"]))
    raise ConfigError(f"unsupported dispersion prior family {fam!r} (use PC or G)")


def parse_tau_prior(spec) -> VariancePrior:
    """VariancePrior from a catalog-name mapping."""
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(f"tau prior must be a mapping with a 'family' key, got {spec!r}")
    fam = spec["family"]
    if fam == "SD":
        if "epsilon" in spec:
            eps = float(spec["epsilon"])
        elif "u" in spec and "a" in spec:
            _, eps = scale_dependent_calibrate(float(spec["u"]), float(spec["a"]))
        else:
            raise ConfigError("SD prior needs 'epsilon' or a (u, a) tail statement")
        return VariancePrior("scale-dependent", (eps,))
    if fam == "GBP":
        return VariancePrior("generalized-beta-prime", (float(spec.get("epsilon", 0.022)),))
    if fam == "HC":
        return VariancePrior("half-cauchy", (float(spec.get("scale", 0.022)),))
    if fam == "G":
        if "theta" in spec:
            return VariancePrior("gamma", (1.0, float(spec["theta"])))
        return VariancePrior("gamma", (float(spec["shape"]), float(spec["rate"])))
    if fam == "IG":
        return VariancePrior("inverse-gamma", (float(spec["shape"]), float(spec["scale"])))
    if fam == "Flat":
        return VariancePrior(
            "flat-uniform", (float(spec.get("lower", 1.0)), float(spec.get("upper", 1000.0)))
        )
    raise ConfigError(f"unsupported variance prior family {fam!r}")


def prior_label(spec) -> str:
    """Short stable label of a prior mapping, for result tables."""
    if spec is None:
        return "-"
    fam = spec.get("family", "?")
    params = [f"{k}={spec[k]}" for k in sorted(spec) if k != "family"]
    return f"{fam}({','.join(params)})" if params else fam


@dataclasses.dataclass
class RunConfig:
    """Validated run configuration (see README for the YAML schema)."""

    task: str
    seed: int = 20260814
    threads: int = 1
    out_dir: str = "gcstar-out"
    data: dict = dataclasses.field(default_factory=dict)
    model: dict = dataclasses.field(default_factory=dict)
    scenario: dict = dataclasses.field(default_factory=dict)
    calibrate: dict = dataclasses.field(default_factory=dict)
    grid: GridSettings = dataclasses.field(default_factory=GridSettings)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.task in ("fit", "compare"):
            csv_path = self.data.get("csv")
            if not csv_path:
                raise ConfigError(f"task {self.task!r} requires data.csv")
            if not os.path.exists(csv_path):
                raise ConfigError(f"data file not found: {csv_path}")
            graph = self.data.get("graph")
            if graph and not os.path.exists(graph):
                raise ConfigError(f"graph file not found: {graph}")
        if self.task == "simulate":
            sc = self.scenario
            alpha = float(sc.get("alpha", 1.0))
            if alpha <= 0:
                raise ConfigError("scenario alpha must be positive")
            reps = int(sc.get("replications", 50))
            if reps < 1:
                raise ConfigError("replications must be >= 1")
            effect = sc.get("effect", "f1")
            if effect not in EFFECT_IDS:
                raise ConfigError(f"scenario effect must be one of {EFFECT_IDS}")
            sizes = sc.get("sizes", [50, 100, 500])
            if not sizes or any(int(n) < 10 for n in sizes):
                raise ConfigError("scenario sizes must all be >= 10")


def load_config(path: str, **overrides) -> RunConfig:
    """Load a YAML config file, applying CLI overrides (seed, threads,
    out_dir, replications)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must contain a mapping")

    grid_raw = raw.get("grid", {}) or {}
    known = {f.name for f in dataclasses.fields(GridSettings)}
    bad = set(grid_raw) - known
    if bad:
        raise ConfigError(f"unknown grid settings: {sorted(bad)}")
    grid = GridSettings(**{k: type(getattr(GridSettings(), k))(v) for k, v in grid_raw.items()})

    reps = overrides.pop("replications", None)
    scenario = dict(raw.get("scenario", {}) or {})
    if reps is not None:
        scenario["replications"] = int(reps)

    cfg = RunConfig(
        task=overrides.pop("task", None) or raw.get("task", ""),
        seed=int(overrides.pop("seed", None) or raw.get("seed", 20260814)),
        threads=int(overrides.pop("threads", None) or raw.get("threads", 1)),
        out_dir=str(overrides.pop("out_dir", None) or raw.get("out", "gcstar-out")),
        data=dict(raw.get("data", {}) or {}),
        model=dict(raw.get("model", {}) or {}),
        scenario=scenario,
        calibrate=dict(raw.get("calibrate", {}) or {}),
        grid=grid,
    )
    if overrides:
        raise ConfigError(f"unknown overrides: {sorted(overrides)}")
    return cfg
