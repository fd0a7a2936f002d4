"""Report records: JSON serialization and table rendering.

Aggregate results serialize to a versioned JSON document that round-trips
field-for-field (floats survive exactly via repr-based JSON encoding), with
the producing configuration echoed beside the numbers. The human-readable
rendering mirrors the classic treatment-effects table: methods across the
columns, model panels down the rows, one row of point estimates per fold
count with standard errors printed in parentheses underneath. A tidy CSV
with the same cells is emitted side by side.
"""

from __future__ import annotations

import json
from typing import Mapping, Sequence

import pandas as pd

from .data import AggregateReport, EstimateReport

SCHEMA_VERSION = 1


def estimate_report_to_dict(report: EstimateReport) -> dict:
    return {
        "theta_hat": report.theta_hat,
        "sigma_hat": report.sigma_hat,
        "ci_lo": report.ci_lo,
        "ci_hi": report.ci_hi,
        "alpha": report.alpha,
        "per_fold_thetas": list(report.per_fold_thetas),
        "n_trimmed": report.n_trimmed,
        "seed": report.seed,
    }


def estimate_report_from_dict(d: Mapping) -> EstimateReport:
    return EstimateReport(
        theta_hat=d["theta_hat"],
        sigma_hat=d["sigma_hat"],
        ci_lo=d["ci_lo"],
        ci_hi=d["ci_hi"],
        alpha=d["alpha"],
        per_fold_thetas=tuple(d["per_fold_thetas"]),
        n_trimmed=d["n_trimmed"],
        seed=d["seed"],
    )


def aggregate_report_to_dict(agg: AggregateReport) -> dict:
    return {
        "S": agg.S,
        "mean_theta": agg.mean_theta,
        "median_theta": agg.median_theta,
        "sigma_mean": agg.sigma_mean,
        "sigma_median": agg.sigma_median,
        "thetas": list(agg.thetas),
        "sigmas": list(agg.sigmas),
        "splits": [estimate_report_to_dict(r) for r in agg.splits],
    }


def aggregate_report_from_dict(d: Mapping) -> AggregateReport:
    return AggregateReport(
        thetas=tuple(d["thetas"]),
        sigmas=tuple(d["sigmas"]),
        mean_theta=d["mean_theta"],
        median_theta=d["median_theta"],
        sigma_mean=d["sigma_mean"],
        sigma_median=d["sigma_median"],
        S=d["S"],
        splits=tuple(estimate_report_from_dict(r) for r in d["splits"]),
    )


def estimate_document(cells: Sequence[Mapping], config_echo: Mapping) -> dict:
    """Full JSON document for an estimate run.

    ``cells`` carry dicts with keys model, score, folds, method and the
    aggregate report; the configuration echo records every input that shaped
    the numbers.
    """
    return {
        "schema_version": SCHEMA_VERSION,
        "config": dict(config_echo),
        "cells": [
            {
                "model": c["model"],
                "score": c["score"],
                "folds": c["folds"],
                "method": c["method"],
                "aggregate": aggregate_report_to_dict(c["aggregate"]),
            }
            for c in cells
        ],
    }


def parse_estimate_document(text: str) -> dict:
    doc = json.loads(text)
    for cell in doc["cells"]:
        cell["aggregate"] = aggregate_report_from_dict(cell["aggregate"])
    return doc


def dump_json(doc: Mapping) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


_MODEL_TITLES = {"interactive": "A. Interactive model", "plm": "B. Partially linear model"}


def _fmt(value: float, width: int) -> str:
    return f"{value:>{width}.4g}"


def render_estimate_tables(cells: Sequence[Mapping], *, splits: int) -> str:
    """Fixed-width text: a mean-estimate panel set and a median one."""
    methods = list(dict.fromkeys(c["method"] for c in cells))
    models = list(dict.fromkeys(c["model"] for c in cells))
    folds = list(dict.fromkeys(c["folds"] for c in cells))
    by_key = {(c["model"], c["folds"], c["method"]): c for c in cells}
    width = max(14, max(len(m) for m in methods) + 2)
    label_w = 22

    def panel(stat: str, se_stat: str, title: str) -> list[str]:
        lines = [title, "=" * (label_w + width * len(methods))]
        header = " " * label_w + "".join(f"{m:>{width}}" for m in methods)
        lines.append(header)
        for model in models:
            lines.append(_MODEL_TITLES.get(model, model))
            for K in folds:
                row = by_key.get((model, K, methods[0]))
                if row is None:
                    continue
                score_label = row["score"].upper()
                est = f"  {score_label} ({K} fold)".ljust(label_w)
                ses = " " * label_w
                for m in methods:
                    cell = by_key[(model, K, m)]
                    agg = cell["aggregate"]
                    est += _fmt(getattr(agg, stat), width)
                    ses += f"{'(' + format(getattr(agg, se_stat), '.4g') + ')':>{width}}"
                lines.append(est)
                lines.append(ses)
        lines.append("")
        return lines

    out = panel("mean_theta", "sigma_mean", f"Mean estimates over {splits} sample splits")
    out += panel("median_theta", "sigma_median", f"Median estimates over {splits} sample splits")
    return "\n".join(out)


def estimate_cells_frame(cells: Sequence[Mapping]) -> pd.DataFrame:
    rows = []
    for c in cells:
        agg = c["aggregate"]
        rows.append(
            {
                "model": c["model"],
                "score": c["score"],
                "folds": c["folds"],
                "method": c["method"],
                "splits": agg.S,
                "mean_theta": agg.mean_theta,
                "sigma_mean": agg.sigma_mean,
                "median_theta": agg.median_theta,
                "sigma_median": agg.sigma_median,
            }
        )
    return pd.DataFrame(rows)


def coverage_records_frame(result) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "rep": r.rep,
                "N": r.N,
                "theta0": r.theta0,
                "theta_hat": r.theta_hat,
                "sigma_hat": r.sigma_hat,
                "ci_lo": r.ci_lo,
                "ci_hi": r.ci_hi,
                "covered": int(r.covered),
                "error": r.error,
            }
            for r in result.records
        ]
    )


def coverage_summary_dict(result) -> dict:
    return {
        "label": result.label,
        "N": result.N,
        "reps": result.reps,
        "theta0": result.theta0,
        "coverage": result.coverage,
        "coverage_se": result.coverage_se,
        "bias": result.bias,
        "bias_se": result.bias_se,
        "rmse": result.rmse,
        "rmse_se": result.rmse_se,
    }


__all__ = [
    "SCHEMA_VERSION",
    "estimate_report_to_dict",
    "estimate_report_from_dict",
    "aggregate_report_to_dict",
    "aggregate_report_from_dict",
    "estimate_document",
    "parse_estimate_document",
    "dump_json",
    "render_estimate_tables",
    "estimate_cells_frame",
    "coverage_records_frame",
    "coverage_summary_dict",
]
