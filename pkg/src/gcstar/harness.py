"""File-driven workflows: CSV ingestion, model fitting with reports,
prior-calibration printing, and model-comparison tables.

CSV files use RFC-style quoting with a mandatory header row. Region id
columns are 1-based, matching the adjacency file format.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import os
from typing import Optional

import numpy as np
from scipy import integrate as _integrate

from .config import RunConfig, parse_alpha_prior, parse_tau_prior, prior_label
from .errors import CalibrationError, ConfigError, DataFormatError
from .evaluation import compute_scores
from .inference import fit_latent_model
from .predictor import (
    LatentModel,
    make_icar,
    make_iid,
    make_linear,
    make_rw2,
    read_graph_file,
)
from .priors import pc_alpha_calibrate, scale_dependent_calibrate, scale_dependent_density

__all__ = [
    "read_csv_columns",
    "build_components",
    "fit_from_files",
    "compare_cmd",
    "calibrate_prior_cmd",
    "FitReport",
]

_NA_STRINGS = {"", "na", "nan", "null", "none"}


def read_csv_columns(path: str) -> dict[str, list[str]]:
    """Parse a CSV file into named string columns.

    Raises DataFormatError with the offending line number for a missing
    header or ragged rows.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError:
        raise DataFormatError(f"{path}: file not found")
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: line 1: empty file (header row is mandatory)")
        if len(set(header)) != len(header) or any(not h.strip() for h in header):
            raise DataFormatError(f"{path}: line 1: header has empty or duplicate names")
        cols: dict[str, list[str]] = {h: [] for h in header}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"{path}: line {line_no}: expected {len(header)} fields, got {len(row)}"
                )
            for h, v in zip(header, row):
                cols[h].append(v)
    return cols


def _require_column(cols: dict, name: str, path: str) -> list[str]:
    if name not in cols:
        raise DataFormatError(f"{path}: column {name!r} not found (have {sorted(cols)})")
    return cols[name]


def column_float(cols: dict, name: str, path: str) -> np.ndarray:
    raw = _require_column(cols, name, path)
    out = np.empty(len(raw))
    for i, v in enumerate(raw):
        if v.strip().lower() in _NA_STRINGS:
            raise DataFormatError(f"{path}: line {i + 2}: missing value in column {name!r}")
        try:
            out[i] = float(v)
        except ValueError:
            raise DataFormatError(f"{path}: line {i + 2}: bad numeric value {v!r} in {name!r}")
    return out


def column_int(cols: dict, name: str, path: str) -> np.ndarray:
    vals = column_float(cols, name, path)
    if np.any(vals != np.floor(vals)):
        raise DataFormatError(f"{path}: column {name!r} must be integer-valued")
    return vals.astype(np.int64)


def build_components(config: RunConfig, cols: dict, tau_override: Optional[dict] = None):
    """PredictorComponents from the model section of the config."""
    path = config.data["csv"]
    comps = []
    for spec in config.model.get("components", []) or []:
        kind = spec.get("type")
        name = spec.get("name", kind)
        tau_spec = tau_override if tau_override is not None else spec.get("tau_prior")
        tau_prior = parse_tau_prior(tau_spec) if tau_spec else None
        if kind == "linear":
            names = spec.get("columns", [spec.get("column")])
            block = np.column_stack([column_float(cols, c, path) for c in names])
            comps.append(make_linear(block if len(names) > 1 else block[:, 0], name=name))
        elif kind == "rw2":
            x = column_float(cols, spec["column"], path)
            comps.append(
                make_rw2(x, n_bins=int(spec.get("n_bins", 30)), name=name, tau_prior=tau_prior)
            )
        elif kind == "icar":
            graph_path = config.data.get("graph")
            if not graph_path:
                raise ConfigError("icar component requires data.graph")
            nbrs = read_graph_file(graph_path)
            ids = column_int(cols, spec["column"], path)
            if (ids < 1).any() or (ids > len(nbrs)).any():
                raise DataFormatError(
                    f"{path}: column {spec['column']!r} has region ids outside 1..{len(nbrs)}"
                )
            comps.append(make_icar(nbrs, region_index=ids - 1, name=name, tau_prior=tau_prior))
        elif kind == "iid":
            group = _require_column(cols, spec["column"], path)
            comps.append(make_iid(np.asarray(group), name=name, tau_prior=tau_prior))
        else:
            raise ConfigError(f"unknown component type {kind!r}")
    return comps


def _weighted_quantile(values: np.ndarray, weights: np.ndarray, prob: float) -> float:
    order = np.argsort(values)
    v, w = values[order], weights[order]
    cum = np.cumsum(w)
    idx = int(np.searchsorted(cum, prob, side="left"))
    return float(v[min(idx, len(v) - 1)])


def _hyper_summary(fit, label: str) -> dict:
    values, weights = fit.hyper_marginals[label]
    mean = float(np.sum(values * weights))
    sd = math.sqrt(max(float(np.sum(weights * values**2)) - mean**2, 0.0))
    return {
        "mean": mean,
        "sd": sd,
        "q025": _weighted_quantile(values, weights, 0.025),
        "q500": _weighted_quantile(values, weights, 0.5),
        "q975": _weighted_quantile(values, weights, 0.975),
    }


def _latent_summary(fit, index: int) -> dict:
    s = fit.latent_marginals[index]
    return {
        "mean": s.mean,
        "sd": s.sd,
        "q025": s.quantiles[0.025],
        "q500": s.quantiles[0.5],
        "q975": s.quantiles[0.975],
    }


@dataclasses.dataclass
class FitReport:
    fits: dict
    parameter_rows: list
    score_rows: list
    report_txt: str
    report_csv: str


def _model_parameter_rows(fit, lik_name: str) -> list:
    rows = [{"model": lik_name, "parameter": "beta0"} | _latent_summary(fit, 0)]
    for comp, sl in zip(fit.model.components, fit.model.slices):
        if comp.kind == "linear":
            for j in range(comp.dim):
                rows.append(
                    {"model": lik_name, "parameter": f"beta[{comp.name}]" if comp.dim == 1 else f"beta[{comp.name}:{j}]"}
                    | _latent_summary(fit, sl.start + j)
                )
    for label in fit.hyper_marginals:
        rows.append({"model": lik_name, "parameter": label} | _hyper_summary(fit, label))
    return rows


def fit_from_files(config: RunConfig) -> FitReport:
    """Fit the configured model(s) to a CSV dataset and write the report."""
    path = config.data["csv"]
    cols = read_csv_columns(path)
    response = config.data.get("response", "y")
    y = column_int(cols, response, path)
    if (y < 0).any():
        raise DataFormatError(f"{path}: response {response!r} must be non-negative")

    lik_spec = config.model.get("likelihood", "gamma-count")
    likelihoods = [lik_spec] if isinstance(lik_spec, str) else list(lik_spec)
    alpha_spec = config.model.get("alpha_prior")

    fits, parameter_rows, score_rows = {}, [], []
    for lik_name in likelihoods:
        comps = build_components(config, cols)
        alpha_prior = parse_alpha_prior(alpha_spec) if lik_name == "gamma-count" else None
        model = LatentModel(y=y, components=comps, likelihood=lik_name, alpha_prior=alpha_prior)
        fit = fit_latent_model(model, config.grid)
        scores = compute_scores(fit)
        fits[lik_name] = fit
        parameter_rows.extend(_model_parameter_rows(fit, lik_name))
        score_rows.append(
            {
                "model": lik_name,
                "waic": scores.waic,
                "p_waic": scores.p_waic,
                "dic": scores.dic,
                "p_d": scores.p_d,
                "log_score": scores.log_score,
                "cpo_failures": scores.cpo_failures,
            }
        )

    os.makedirs(config.out_dir, exist_ok=True)
    report_csv = os.path.join(config.out_dir, "report.csv")
    _write_rows(report_csv, ["model", "parameter", "mean", "sd", "q025", "q500", "q975"], parameter_rows)
    scores_csv = os.path.join(config.out_dir, "scores.csv")
    _write_rows(
        scores_csv,
        ["model", "waic", "p_waic", "dic", "p_d", "log_score", "cpo_failures"],
        score_rows,
    )
    report_txt = os.path.join(config.out_dir, "report.txt")
    with open(report_txt, "w", encoding="utf-8") as fh:
        fh.write(_format_report_text(parameter_rows, score_rows))
    return FitReport(
        fits=fits,
        parameter_rows=parameter_rows,
        score_rows=score_rows,
        report_txt=report_txt,
        report_csv=report_csv,
    )


def _fmt_cell(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _write_rows(path: str, columns: list, rows: list) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt_cell(row.get(c, "")) for c in columns])


def _format_table(columns: list, rows: list, bold_min: Optional[set] = None) -> str:
    display = []
    mins = {}
    if bold_min:
        for c in bold_min:
            vals = [r[c] for r in rows if isinstance(r.get(c), float) and math.isfinite(r[c])]
            if vals:
                mins[c] = min(vals)
    for row in rows:
        cells = []
        for c in columns:
            v = row.get(c, "")
            text = f"{v:.3f}" if isinstance(v, float) else str(v)
            if c in mins and isinstance(v, float) and v == mins[c]:
                text = f"*{text}*"
            cells.append(text)
        display.append(cells)
    widths = [max(len(c), *(len(d[i]) for d in display)) if display else len(c) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for cells in display:
        lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
    return "\n".join(lines) + "\n"


def _format_report_text(parameter_rows: list, score_rows: list) -> str:
    out = "Posterior summaries\n===================\n"
    out += _format_table(
        ["model", "parameter", "mean", "sd", "q025", "q500", "q975"],
        [
            {k: (round(v, 4) if isinstance(v, float) else v) for k, v in r.items()}
            for r in parameter_rows
        ],
    )
    out += "\nScores\n======\n"
    out += _format_table(
        ["model", "waic", "p_waic", "dic", "p_d", "log_score", "cpo_failures"], score_rows
    )
    return out


def compare_cmd(config: RunConfig):
    """Prior x model matrix of log-score and WAIC; CSV plus aligned text
    with each column's minimum starred."""
    path = config.data["csv"]
    cols = read_csv_columns(path)
    response = config.data.get("response", "y")
    y = column_int(cols, response, path)

    lik_spec = config.model.get("likelihoods") or config.model.get(
        "likelihood", ["gamma-count", "poisson", "negative-binomial"]
    )
    likelihoods = [lik_spec] if isinstance(lik_spec, str) else list(lik_spec)
    alpha_specs = config.model.get("alpha_priors") or [config.model.get("alpha_prior") or {"family": "PC", "lambda": 1.0}]
    has_flexible = any(
        spec.get("type") in ("rw2", "icar", "iid")
        for spec in config.model.get("components", []) or []
    )
    tau_specs = config.model.get("tau_priors") or [None]
    if not has_flexible:
        tau_specs = [None]

    rows = []
    metric_cols = []
    for lik in likelihoods:
        metric_cols += [f"{lik}_ls", f"{lik}_waic"]
    for a_spec in alpha_specs:
        for t_spec in tau_specs:
            row = {"alpha_prior": prior_label(a_spec), "tau_prior": prior_label(t_spec)}
            for lik_name in likelihoods:
                comps = build_components(config, cols, tau_override=t_spec)
                alpha_prior = parse_alpha_prior(a_spec) if lik_name == "gamma-count" else None
                model = LatentModel(
                    y=y, components=comps, likelihood=lik_name, alpha_prior=alpha_prior
                )
                fit = fit_latent_model(model, config.grid)
                scores = compute_scores(fit)
                row[f"{lik_name}_ls"] = scores.log_score
                row[f"{lik_name}_waic"] = scores.waic
            rows.append(row)

    os.makedirs(config.out_dir, exist_ok=True)
    csv_path = os.path.join(config.out_dir, "compare.csv")
    columns = ["alpha_prior", "tau_prior"] + metric_cols
    _write_rows(csv_path, columns, rows)
    text = _format_table(columns, rows, bold_min=set(metric_cols))
    txt_path = os.path.join(config.out_dir, "compare.txt")
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return rows, csv_path, txt_path


def calibrate_prior_cmd(u: float, a: float, family: str) -> dict:
    """Print the calibrated hyperparameter with its verification integral."""
    if family == "PC":
        lam = pc_alpha_calibrate(u, a)
        mass, _ = _integrate.quad(lambda s: lam * math.exp(-lam * s), 0.0, u)
        print(f"PC prior: lambda = {lam:.10f} from P(d > {u:g}) = {a:g}")
        print(f"verification: P(d <= u) by quadrature = {mass:.10f} (target {1 - a:.10f})")
        return {"family": "PC", "lambda": lam, "verification": mass, "target": 1.0 - a}
    if family == "SD":
        theta, eps = scale_dependent_calibrate(u, a)
        tail, _ = _integrate.quad(lambda s2: scale_dependent_density(eps, s2), u * u, np.inf)
        print(f"SD prior: theta = {theta:.10f} (epsilon = {eps:.10g}) from P(sigma > {u:g}) = {a:g}")
        print(f"verification: P(sigma > u) by quadrature = {tail:.10f} (target {a:.10f})")
        return {"family": "SD", "theta": theta, "epsilon": eps, "verification": tail, "target": a}
    raise CalibrationError(f"unknown prior family {family!r} (use PC or SD)")
