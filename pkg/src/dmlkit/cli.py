"""Command-line front end: ``dmlkit estimate`` and ``dmlkit simulate``.

estimate
    Reads a CSV (header row required; one outcome column, one 0/1 treatment
    column, remaining numeric columns as covariates), runs the repeated
    cross-fitting pipeline over a grid of model x fold-count x method, and
    writes ``report.json`` (versioned, round-trippable), ``report.txt``
    (fixed-width tables) and ``report.csv`` into the output directory.

simulate
    Runs a coverage or rate experiment from a config file, writing one CSV
    row per replication plus a summary JSON/CSV, and fails with a nonzero
    exit if a hard invariant (propensity range, determinism) breaks.

Configuration is an INI file: an ``[estimate]`` or ``[simulate]`` section
with flat keys mirroring the flags, plus optional ``[learner.<kind>]``
tables of hyperparameter overrides. Command-line flags beat config values;
``DMLKIT_OUT`` and ``DMLKIT_WORKERS`` environment variables supply defaults
for the output directory and worker count. All randomness flows from the
single seed, so repeated invocations are byte-identical at any worker
count.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 pipeline
error.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

from .crossfit import CrossfitConfig
from .data import Dataset, derive_seed
from .errors import ConfigError, DataError, DmlkitError, PipelineError
from .learners import DEFAULT_BEST_CANDIDATES, DEFAULT_ENSEMBLE_COMPONENTS, KINDS, LearnerSpec
from .repeated import run_repeated
from .report import (
    coverage_records_frame,
    coverage_summary_dict,
    dump_json,
    estimate_cells_frame,
    estimate_document,
    render_estimate_tables,
)
from .simulation import DgpSpec, coverage_experiment, naive_plugin_experiment, rate_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_PIPELINE = 4

_MODELS = ("interactive", "plm")
_SIM_MODES = ("learners", "oracle", "true_m_intercept_g", "naive")


# --- config file handling ---


def _find_config(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    bundled = resources.files("dmlkit").joinpath("configs", path)
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"config file {path!r} not found (checked filesystem and bundled configs)")


def _read_config(path: str | None) -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    if path is not None:
        found = _find_config(path)
        try:
            parser.read_string(found.read_text())
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config file {path!r}: {exc}") from exc
    return parser


def _coerce_literal(value: str):
    text = value.strip()
    if "," in text:
        return tuple(_coerce_literal(part) for part in text.split(","))
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null"):
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


class _Settings:
    """Merged view of built-in defaults, config file values, and flags."""

    def __init__(self, section: configparser.SectionProxy | dict, args: argparse.Namespace):
        self.section = dict(section)
        self.args = args

    def get(self, key: str, default=None, *, parse=None):
        flag = getattr(self.args, key, None)
        if flag is not None:
            return flag
        if key in self.section:
            raw = self.section[key]
            try:
                return parse(raw) if parse else _coerce_literal(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"config key {key!r}: cannot parse {raw!r} ({exc})") from exc
        return default


def _as_tuple(value) -> tuple:
    if value is None:
        return ()
    if isinstance(value, (list, tuple)):
        return tuple(value)
    if isinstance(value, str):
        return tuple(v.strip() for v in value.split(",") if v.strip())
    return (value,)


def _learner_tables(parser: configparser.ConfigParser) -> dict[str, dict]:
    tables: dict[str, dict] = {}
    for section in parser.sections():
        if not section.startswith("learner."):
            continue
        kind = section.split(".", 1)[1]
        if kind not in KINDS:
            raise ConfigError(f"config section [{section}]: unknown learner kind {kind!r}")
        tables[kind] = {key: _coerce_literal(raw) for key, raw in parser[section].items()}
    return tables


def build_learner_spec(kind: str, task: str, tables: dict[str, dict]) -> LearnerSpec:
    """Assemble a LearnerSpec from the config's hyperparameter tables.

    Ensemble and best specs inherit the tables of their component kinds.
    """
    if kind not in KINDS:
        raise ConfigError(f"unknown method {kind!r}; expected one of {KINDS}")
    hyper = dict(tables.get(kind, {}))
    if kind == "ensemble":
        names = _as_tuple(hyper.get("components", DEFAULT_ENSEMBLE_COMPONENTS))
        hyper["components"] = names
        hyper.setdefault("component_hyperparameters", {n: tables.get(n, {}) for n in names})
    elif kind == "best":
        names = _as_tuple(hyper.get("candidates", DEFAULT_BEST_CANDIDATES))
        hyper["candidates"] = names
        hyper.setdefault("component_hyperparameters", {n: tables.get(n, {}) for n in names})
    try:
        return LearnerSpec(kind=kind, task=task, hyperparameters=hyper)
    except ValueError as exc:
        raise ConfigError(f"[learner.{kind}]: {exc}") from exc


# --- CSV ingestion (core data contract) ---


def load_csv_dataset(
    path: str,
    outcome: str,
    treatment: str,
    covariates: tuple[str, ...] | None = None,
) -> tuple[Dataset, dict]:
    """Read a header CSV into a Dataset.

    One column is the outcome, one the 0/1 treatment; the covariates are
    either the named columns or every remaining numeric column (non-numeric
    leftovers are ignored and recorded in the returned metadata).
    """
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError as exc:
        raise DataError(f"data file {path!r} not found") from exc
    except Exception as exc:
        raise DataError(f"cannot read {path!r}: {exc}") from exc
    for name, role in ((outcome, "outcome"), (treatment, "treatment")):
        if name not in frame.columns:
            raise DataError(f"{role} column {name!r} not found in {path!r}")
    if covariates:
        missing = [c for c in covariates if c not in frame.columns]
        if missing:
            raise DataError(f"covariate columns {missing} not found in {path!r}")
        overlap = [c for c in covariates if c in (outcome, treatment)]
        if overlap:
            raise DataError(f"columns {overlap} cannot be both covariates and outcome/treatment")
        z_cols = list(covariates)
        ignored = []
    else:
        rest = [c for c in frame.columns if c not in (outcome, treatment)]
        numeric = frame[rest].apply(lambda col: pd.to_numeric(col, errors="coerce"))
        ignored = [c for c in rest if numeric[c].isna().all() and not frame[c].isna().all()]
        z_cols = [c for c in rest if c not in ignored]
        if not z_cols:
            raise DataError(f"no numeric covariate columns found in {path!r}")
    for col in (outcome, treatment, *z_cols):
        values = pd.to_numeric(frame[col], errors="coerce")
        if values.isna().any() or np.isinf(values.to_numpy(dtype=float)).any():
            raise DataError(f"column {col!r} contains missing or non-numeric values")
    d_values = frame[treatment].to_numpy(dtype=float)
    if not np.all(np.isin(d_values, (0.0, 1.0))):
        raise DataError(f"treatment column {treatment!r} must contain only 0/1 values")
    try:
        dataset = Dataset(
            outcomes=frame[outcome].to_numpy(dtype=float),
            treatments=d_values,
            covariates=frame[z_cols].to_numpy(dtype=float),
            feature_names=tuple(z_cols),
        )
    except DmlkitError as exc:
        raise DataError(str(exc)) from exc
    meta = {"path": str(path), "n": dataset.n, "covariates": z_cols, "ignored_columns": ignored}
    return dataset, meta


# --- estimate command ---


def run_estimate(args: argparse.Namespace) -> int:
    parser = _read_config(args.config)
    section = parser["estimate"] if parser.has_section("estimate") else {}
    for key in section:
        if key not in _ESTIMATE_KEYS:
            raise ConfigError(f"config key {key!r} in [estimate] is not recognized")
    s = _Settings(section, args)

    data_path = s.get("data")
    outcome = s.get("outcome")
    treatment = s.get("treatment")
    if not data_path or not outcome or not treatment:
        raise ConfigError("estimate requires --data, --outcome and --treatment (flags or config)")
    score = str(s.get("score", "ate")).lower()
    if score not in ("ate", "atte"):
        raise ConfigError(f"score must be 'ate' or 'atte', got {score!r}")
    models = tuple(str(m).lower() for m in _as_tuple(s.get("models", "interactive")))
    for m in models:
        if m not in _MODELS:
            raise ConfigError(f"unknown model {m!r}; expected subset of {_MODELS}")
    methods = tuple(str(m).lower() for m in _as_tuple(s.get("methods", "lasso")))
    folds_list = tuple(int(k) for k in _as_tuple(s.get("folds", 5)))
    splits = int(s.get("splits", 100))
    trim = _as_tuple(s.get("trim", (0.01, 0.99)))
    if len(trim) != 2:
        raise ConfigError(f"trim must be two cutoffs 'lo,hi', got {trim!r}")
    alpha = float(s.get("alpha", 0.05))
    seed = int(s.get("seed", 0))
    covariate_cols = _as_tuple(s.get("covariates")) or None
    out_dir = Path(s.get("out", os.environ.get("DMLKIT_OUT", "report")))
    workers = int(s.get("workers", os.environ.get("DMLKIT_WORKERS", 1)))
    tables = _learner_tables(parser)

    dataset, meta = load_csv_dataset(data_path, outcome, treatment, covariate_cols)

    cells = []
    try:
        for mi, model in enumerate(models):
            cell_score = score if model == "interactive" else "plm"
            for K in folds_list:
                for ji, method in enumerate(methods):
                    config = CrossfitConfig(
                        score=cell_score,
                        K=K,
                        learner_g=build_learner_spec(method, "regression", tables),
                        learner_m=build_learner_spec(method, "probability", tables),
                        trim=(float(trim[0]), float(trim[1])),
                        alpha=alpha,
                        seed=seed,
                    )
                    aggregate = run_repeated(
                        dataset,
                        config,
                        S=splits,
                        master_seed=derive_seed(seed, mi, K, ji),
                        workers=workers,
                    )
                    cells.append(
                        {
                            "model": model,
                            "score": cell_score,
                            "folds": K,
                            "method": method,
                            "aggregate": aggregate,
                        }
                    )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    except DmlkitError as exc:
        raise PipelineError(f"estimation failed: {exc}") from exc

    config_echo = {
        "data": str(data_path),
        "outcome": outcome,
        "treatment": treatment,
        "covariates": meta["covariates"],
        "ignored_columns": meta["ignored_columns"],
        "n": meta["n"],
        "score": score,
        "models": list(models),
        "methods": list(methods),
        "folds": list(folds_list),
        "splits": splits,
        "trim": [float(trim[0]), float(trim[1])],
        "alpha": alpha,
        "seed": seed,
        "learner_hyperparameters": {k: dict(v) for k, v in tables.items()},
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(dump_json(estimate_document(cells, config_echo)))
    table_text = render_estimate_tables(cells, splits=splits)
    (out_dir / "report.txt").write_text(table_text + "\n")
    estimate_cells_frame(cells).to_csv(out_dir / "report.csv", index=False)
    sys.stdout.write(table_text + "\n")
    print(f"wrote report.json, report.txt, report.csv to {out_dir}", file=sys.stderr)
    return EXIT_OK


_ESTIMATE_KEYS = {
    "data", "outcome", "treatment", "covariates", "score", "models", "methods",
    "folds", "splits", "trim", "alpha", "seed", "out", "workers",
}

_SIMULATE_KEYS = {
    "experiment", "mode", "form", "p", "theta0", "noise_sd", "propensity_bounds",
    "effect_heterogeneity", "n", "n_grid", "reps", "score", "method", "folds",
    "trim", "alpha", "seed", "out", "workers",
}


# --- simulate command ---


def _simulation_config(s: _Settings, tables: dict[str, dict]) -> tuple[DgpSpec, CrossfitConfig, dict]:
    form = str(s.get("form", "linear")).lower()
    bounds = _as_tuple(s.get("propensity_bounds", (0.1, 0.9)))
    if len(bounds) != 2:
        raise ConfigError(f"propensity_bounds must be 'lo,hi', got {bounds!r}")
    seed = int(s.get("seed", 0))
    try:
        spec = DgpSpec(
            p=int(s.get("p", 10)),
            form=form,
            theta0=float(s.get("theta0", 0.5)),
            propensity_bounds=(float(bounds[0]), float(bounds[1])),
            noise_sd=float(s.get("noise_sd", 1.0)),
            seed=seed,
            effect_heterogeneity=float(s.get("effect_heterogeneity", 0.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid DGP settings: {exc}") from exc
    method = str(s.get("method", "oracle_linear")).lower()
    trim = _as_tuple(s.get("trim", (0.01, 0.99)))
    try:
        config = CrossfitConfig(
            score=str(s.get("score", "ate")).lower(),
            K=int(s.get("folds", 5)),
            learner_g=build_learner_spec(method, "regression", tables),
            learner_m=build_learner_spec(method, "probability", tables),
            trim=(float(trim[0]), float(trim[1])),
            alpha=float(s.get("alpha", 0.05)),
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid estimation settings: {exc}") from exc
    runtime = {
        "experiment": str(s.get("experiment", "coverage")).lower(),
        "mode": str(s.get("mode", "learners")).lower(),
        "n": int(s.get("n", 1000)),
        "n_grid": tuple(int(v) for v in _as_tuple(s.get("n_grid", ()))),
        "reps": int(s.get("reps", 500)),
        "seed": seed,
        "out": Path(s.get("out", os.environ.get("DMLKIT_OUT", "simulation"))),
        "workers": int(s.get("workers", os.environ.get("DMLKIT_WORKERS", 1))),
        "method": method,
    }
    return spec, config, runtime


def _determinism_check(first_run, rerun) -> None:
    a, b = first_run.records[0], rerun.records[0]
    if (a.theta_hat, a.sigma_hat, a.ci_lo, a.ci_hi) != (b.theta_hat, b.sigma_hat, b.ci_lo, b.ci_hi):
        raise PipelineError("determinism check failed: replication 1 did not reproduce")


def run_simulate(args: argparse.Namespace) -> int:
    parser = _read_config(args.config)
    if not parser.has_section("simulate") and args.config is not None:
        raise ConfigError(f"config file {args.config!r} has no [simulate] section")
    section = parser["simulate"] if parser.has_section("simulate") else {}
    for key in section:
        if key not in _SIMULATE_KEYS:
            raise ConfigError(f"config key {key!r} in [simulate] is not recognized")
    s = _Settings(section, args)
    tables = _learner_tables(parser)
    spec, config, runtime = _simulation_config(s, tables)
    experiment, mode = runtime["experiment"], runtime["mode"]
    if experiment not in ("coverage", "rate"):
        raise ConfigError(f"experiment must be 'coverage' or 'rate', got {experiment!r}")
    if mode not in _SIM_MODES:
        raise ConfigError(f"mode must be one of {_SIM_MODES}, got {mode!r}")

    out_dir = runtime["out"]
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = runtime["workers"]
    summary: dict
    try:
        if experiment == "coverage":
            if mode == "naive":
                result = naive_plugin_experiment(
                    spec, runtime["n"], runtime["reps"], alpha=config.alpha,
                    master_seed=runtime["seed"], workers=workers,
                )
                recheck = naive_plugin_experiment(
                    spec, runtime["n"], 1, alpha=config.alpha, master_seed=runtime["seed"]
                )
            else:
                result = coverage_experiment(
                    spec, runtime["n"], runtime["reps"], config, mode=mode,
                    master_seed=runtime["seed"], workers=workers,
                )
                recheck = coverage_experiment(
                    spec, runtime["n"], 1, config, mode=mode, master_seed=runtime["seed"]
                )
            _determinism_check(result, recheck)
            coverage_records_frame(result).to_csv(out_dir / "coverage_reps.csv", index=False)
            summary = coverage_summary_dict(result)
            summary["settings"] = {
                "experiment": experiment, "mode": mode, "form": spec.form, "p": spec.p,
                "theta0": spec.theta0, "noise_sd": spec.noise_sd,
                "propensity_bounds": list(spec.propensity_bounds), "score": config.score,
                "method": runtime["method"], "folds": config.K, "seed": runtime["seed"],
                "n": runtime["n"], "reps": runtime["reps"],
            }
            (out_dir / "coverage_summary.json").write_text(dump_json(summary))
            pd.DataFrame([coverage_summary_dict(result)]).to_csv(
                out_dir / "coverage_summary.csv", index=False
            )
            written = "coverage_reps.csv, coverage_summary.json, coverage_summary.csv"
        else:
            if mode == "naive":
                raise ConfigError("rate experiment does not support mode 'naive'")
            n_grid = runtime["n_grid"] or (1000, 4000)
            result = rate_experiment(
                spec, n_grid, runtime["reps"], config, mode=mode,
                master_seed=runtime["seed"], workers=workers,
            )
            frames = [coverage_records_frame(r) for r in result.per_n]
            pd.concat(frames, ignore_index=True).to_csv(out_dir / "rate_reps.csv", index=False)
            per_n_rows = [coverage_summary_dict(r) for r in result.per_n]
            summary = {
                "per_n": per_n_rows,
                "ratios": [
                    {"n_small": a, "n_large": b, "rmse_ratio": r} for a, b, r in result.ratios
                ],
                "settings": {
                    "experiment": experiment, "mode": mode, "form": spec.form, "p": spec.p,
                    "theta0": spec.theta0, "score": config.score, "method": runtime["method"],
                    "folds": config.K, "seed": runtime["seed"],
                    "n_grid": list(n_grid), "reps": runtime["reps"],
                },
            }
            (out_dir / "rate_summary.json").write_text(dump_json(summary))
            pd.DataFrame(per_n_rows).to_csv(out_dir / "rate_summary.csv", index=False)
            written = "rate_reps.csv, rate_summary.json, rate_summary.csv"
    except ConfigError:
        raise
    except DmlkitError as exc:
        raise PipelineError(f"simulation failed: {exc}") from exc

    for line in dump_json(summary).splitlines():
        sys.stdout.write(line + "\n")
    print(f"wrote {written} to {out_dir}", file=sys.stderr)
    return EXIT_OK


# --- argument parsing and entry point ---


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI config file (filesystem path or bundled name)")
    p.add_argument("--out", help="output directory (env DMLKIT_OUT)")
    p.add_argument("--seed", type=int, help="master seed; all randomness flows from it")
    p.add_argument("--workers", type=int, help="parallel worker cap (env DMLKIT_WORKERS); never changes results")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dmlkit",
        description="Double/debiased machine learning for average treatment effects.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate treatment effects from a CSV dataset")
    est.add_argument("--data", help="CSV file with a header row")
    est.add_argument("--outcome", help="outcome column name")
    est.add_argument("--treatment", help="0/1 treatment column name")
    est.add_argument("--covariates", help="comma-separated covariate columns (default: all remaining numeric)")
    est.add_argument("--score", help="ate or atte (interactive model target)")
    est.add_argument("--models", help="comma list from {interactive, plm}")
    est.add_argument("--methods", "--method", dest="methods", help="comma list of nuisance learners")
    est.add_argument("--folds", help="comma list of fold counts, e.g. 2,5")
    est.add_argument("--splits", type=int, help="number of repeated sample splits S")
    est.add_argument("--trim", help="propensity trimming cutoffs lo,hi")
    est.add_argument("--alpha", type=float, help="confidence level alpha")
    _add_common(est)
    est.set_defaults(func=run_estimate)

    sim = sub.add_parser("simulate", help="run a Monte Carlo experiment from a config")
    sim.add_argument("--experiment", help="coverage or rate")
    sim.add_argument("--mode", help="learners, oracle, true_m_intercept_g, or naive")
    sim.add_argument("--form", help="DGP family: linear or nonlinear")
    sim.add_argument("--p", type=int, help="covariate dimension")
    sim.add_argument("--theta0", type=float, help="true effect")
    sim.add_argument("--noise-sd", dest="noise_sd", type=float, help="outcome noise scale")
    sim.add_argument("--n", type=int, help="sample size per replication")
    sim.add_argument("--n-grid", dest="n_grid", help="comma list of sample sizes (rate experiment)")
    sim.add_argument("--reps", type=int, help="Monte Carlo replications")
    sim.add_argument("--score", help="ate, atte, or plm")
    sim.add_argument("--method", help="nuisance learner kind")
    sim.add_argument("--folds", type=int, help="cross-fitting folds K")
    _add_common(sim)
    sim.set_defaults(func=run_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PipelineError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except DmlkitError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
