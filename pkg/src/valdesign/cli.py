"""Command-line entry point.

Four workflows: ``design`` (emit a validation selection and its design
artifacts), ``analyze`` (single or multiple imputation on a partially
validated table), ``simulate`` (Monte Carlo design comparison from a TOML
config), and ``study`` (semi-synthetic error-injection comparison on a real
dataset). Every run writes a ``manifest.json`` recording the resolved
configuration, input digests, and output list; ``rerun`` re-executes a
manifest and reproduces the outputs byte for byte.

Exit codes: 0 success, 2 usage/config, 3 data, 4 numeric or domain errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import CONFIG_SCHEMA_VERSION, __version__
from .config import load_sim_plan
from .designs import (
    DESIGN_KINDS,
    ETS_PC1,
    ETS_VAR,
    SRS,
    design_spec_from_dict,
    design_spec_to_dict,
    select_validation,
)
from .errors import ConfigError, DataError, DomainError, MissingDesignArtifact
from .figures import render_efficiency_figure, render_study_figure
from .imputation import (
    analysis_coefficient_names,
    analyze_multiple_imputation,
    analyze_single_imputation,
)
from .linear_model import wald_ci
from .pca import pca_to_dict
from .randvar import substream
from .sim_engine import run_replicates, summarize_efficiency
from .study_pipeline import (
    inject_error,
    load_exposure_matrix,
    load_partial_table,
    load_table,
    run_design_comparison,
    schema_from_dict,
)
from .surrogate import bundled_schema_path, bundled_surrogate_path

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DOMAIN = 4


# --- serialization helpers ----------------------------------------------------

def _cell(value) -> str:
    """Deterministic CSV cell: full-precision floats, 'inf' sentinel."""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def _jsonable(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, (np.floating, np.integer)):
        return _jsonable(value.item())
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(outdir: Path, command: str, resolved: dict, inputs: dict,
                    outputs: list[str]) -> None:
    # out dir and worker count are execution details: they never change the
    # output bytes, so the manifest leaves them to the environment
    args = {k: v for k, v in resolved.items() if k not in ("out", "threads")}
    manifest = {
        "artifact_version": __version__,
        "config_schema_version": CONFIG_SCHEMA_VERSION,
        "command": command,
        "args": args,
        "seed": resolved.get("seed"),
        "input_digests": {str(k): _digest(v) for k, v in inputs.items()},
        "outputs": sorted(outputs),
    }
    _write_json(outdir / "manifest.json", manifest)


def _default(args: dict, key: str, value) -> None:
    if args.get(key) is None:
        args[key] = value


def _outdir(args) -> Path:
    out = args.get("out") or os.environ.get("VALDESIGN_OUT") or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    args["out"] = str(path)
    return path


def _threads(args) -> int:
    value = args.get("threads")
    if value is None:
        value = os.environ.get("VALDESIGN_THREADS")
    if value is None:
        value = os.cpu_count() or 1
    value = int(value)
    args["threads"] = value
    return value


def _read_schema(path):
    with open(path, encoding="utf-8") as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as err:
            raise DataError(f"{path}: not valid JSON ({err})") from None
    return schema_from_dict(payload)


# --- design -------------------------------------------------------------------

def cmd_design(args: dict) -> int:
    outdir = _outdir(args)
    _default(args, "seed", 0)
    args.setdefault("target", None)
    kind = args["kind"]
    if kind == ETS_VAR and args.get("target") is None:
        raise ConfigError("--target is required with --kind ets-var")
    schema = _read_schema(args["schema"])
    xstar, row_ids = load_exposure_matrix(args["data"], schema)
    rng = substream(args["seed"], "design") if kind == SRS else None
    selection, spec = select_validation(rng, xstar, kind, args["n"],
                                        target_variable=args.get("target"))

    id_header = ["row_id"] + ([schema.id_column] if schema.id_column else [])
    rows = [[int(i)] + ([row_ids[i]] if schema.id_column else [])
            for i in selection.selected_indices]
    _write_csv(outdir / "selected.csv", id_header, rows)
    _write_json(outdir / "design.json", {
        "design": design_spec_to_dict(spec),
        "seed": args["seed"],
        "n_total": int(xstar.shape[0]),
    })
    _write_manifest(outdir, "design", args,
                    {args["data"]: args["data"], args["schema"]: args["schema"]},
                    ["selected.csv", "design.json"])
    return 0


# --- analyze ------------------------------------------------------------------

def _load_selection_indicator(path, n_total: int) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header or header[0] != "row_id":
            raise DataError(f"{path}: selection file must have a row_id column first")
        indicator = np.zeros(n_total, dtype=np.int8)
        for row in reader:
            index = int(row[0])
            if not 0 <= index < n_total:
                raise DataError(f"{path}: row_id {index} outside 0..{n_total - 1}")
            indicator[index] = 1
    return indicator


def cmd_analyze(args: dict) -> int:
    outdir = _outdir(args)
    _default(args, "seed", 0)
    _default(args, "level", 0.95)
    _default(args, "m", 20)
    args.setdefault("r_column", None)
    args.setdefault("selection", None)
    schema = _read_schema(args["schema"])
    table = load_partial_table(args["data"], schema, r_column=args.get("r_column"))
    if args.get("selection"):
        indicator = _load_selection_indicator(args["selection"], table.n_rows)
        table = replace(table, r=indicator)
    if table.r.sum() == 0:
        raise DataError("no validated rows: give --r-column or --selection")

    with open(args["design"], encoding="utf-8") as handle:
        payload = json.load(handle)
    spec = design_spec_from_dict(payload["design"])
    if spec.kind == ETS_PC1 and spec.pc1_scores is None:
        raise MissingDesignArtifact("design JSON lacks pc1_scores for an ets-pc1 design")

    level = args["level"]
    header = ["model", "coefficient", "estimate", "se", "ci_lower", "ci_upper",
              "ci_width", "total_var", "df", "imputations"]
    rows = []
    records = []
    if args["method"] == "single":
        for j in range(1, table.n_models + 1):
            model = analyze_single_imputation(table, spec, j)
            names = analysis_coefficient_names(table, j)
            for k, name in enumerate(names):
                low, high = wald_ci(model, k, level)
                est, se = float(model.coefficients[k]), float(model.standard_errors[k])
                rows.append([j, name, est, se, low, high, high - low, "", "", ""])
                records.append({"model": j, "coefficient": name, "estimate": est,
                                "se": se, "ci_lower": low, "ci_upper": high,
                                "ci_width": high - low})
    else:
        rng = substream(args["seed"], "analyze")
        for j in range(1, table.n_models + 1):
            pooled = analyze_multiple_imputation(
                rng.substream(j), table, spec, j, args["m"], level
            )
            names = analysis_coefficient_names(table, j)
            for k, name in enumerate(names):
                p = pooled[k]
                se = math.sqrt(p.total_var)
                rows.append([j, name, p.estimate, se, p.ci[0], p.ci[1],
                             p.ci_width, p.total_var, p.df, p.n_imputations])
                records.append({"model": j, "coefficient": name, "estimate": p.estimate,
                                "se": se, "ci_lower": p.ci[0], "ci_upper": p.ci[1],
                                "ci_width": p.ci_width, "total_var": p.total_var,
                                "df": p.df, "imputations": p.n_imputations})
    _write_csv(outdir / "coefficients.csv", header, rows)
    _write_json(outdir / "coefficients.json",
                {"method": args["method"], "level": level, "coefficients": records})
    inputs = {args["data"]: args["data"], args["schema"]: args["schema"],
              args["design"]: args["design"]}
    if args.get("selection"):
        inputs[args["selection"]] = args["selection"]
    _write_manifest(outdir, "analyze", args, inputs,
                    ["coefficients.csv", "coefficients.json"])
    return 0


# --- simulate -------------------------------------------------------------------

_AXIS_COLUMNS = ["setting", "cov_structure", "sigma_u", "n_validate", "shared_scenario"]


def _axis_values(setting) -> list:
    return [
        setting.index,
        setting.axes.get("cov_structure", ""),
        setting.axes.get("sigma_u", ""),
        setting.axes.get("n_validate", ""),
        setting.axes.get("shared_scenario", ""),
    ]


def cmd_simulate(args: dict) -> int:
    outdir = _outdir(args)
    args.setdefault("seed", None)
    _default(args, "figures", True)
    threads = _threads(args)
    plan = load_sim_plan(args["config"], seed_override=args.get("seed"))
    args["seed"] = plan.master_seed

    replicate_rows = []
    summary_rows = []
    plot_rows = []
    summary_json = {"settings": [], "config_schema_version": CONFIG_SCHEMA_VERSION}
    figure_panels = []
    for setting in plan.settings:
        result = run_replicates(setting.config, threads=threads)
        cells = summarize_efficiency(result)
        figure_panels.append((setting.label, cells))
        for row in result.rows:
            replicate_rows.append(_axis_values(setting) + [row.replicate, row.design,
                                                           row.model, row.estimate])
        cell_payload = []
        for cell in cells:
            summary_rows.append(
                _axis_values(setting)
                + [cell.design, cell.model, cell.n_replicates, cell.mean_estimate,
                   cell.truth, cell.bias, cell.variance, cell.efficiency, cell.mc_se,
                   cell.efficiency_ci[0], cell.efficiency_ci[1]]
            )
            plot_rows.append([setting.index, setting.label, cell.design, cell.model,
                              cell.efficiency, cell.efficiency_ci[0], cell.efficiency_ci[1]])
            cell_payload.append({
                "design": cell.design, "model": cell.model,
                "n_replicates": cell.n_replicates, "mean_estimate": cell.mean_estimate,
                "truth": cell.truth, "bias": cell.bias, "variance": cell.variance,
                "efficiency": cell.efficiency, "mc_se": cell.mc_se,
                "efficiency_ci": list(cell.efficiency_ci),
            })
        summary_json["settings"].append({
            "index": setting.index, "label": setting.label, "axes": setting.axes,
            "seed": setting.config.seed, "cells": cell_payload,
            "failures": [list(f) for f in result.failures],
        })

    outputs = ["replicates.csv", "summary.csv", "summary.json", "plot_data.csv"]
    _write_csv(outdir / "replicates.csv",
               _AXIS_COLUMNS + ["replicate", "design", "model", "estimate"],
               replicate_rows)
    _write_csv(outdir / "summary.csv",
               _AXIS_COLUMNS + ["design", "model", "n_replicates", "mean_estimate",
                                "truth", "bias", "variance", "efficiency", "mc_se",
                                "efficiency_ci_lower", "efficiency_ci_upper"],
               summary_rows)
    _write_json(outdir / "summary.json", summary_json)
    _write_csv(outdir / "plot_data.csv",
               ["setting", "label", "design", "model", "efficiency",
                "efficiency_ci_lower", "efficiency_ci_upper"],
               plot_rows)
    if args["figures"]:
        figdir = outdir / "figures"
        figdir.mkdir(exist_ok=True)
        for setting, panel in zip(plan.settings, figure_panels):
            name = f"figures/efficiency_s{setting.index:02d}.png"
            render_efficiency_figure([panel], outdir / name)
            outputs.append(name)
    _write_manifest(outdir, "simulate", {**args, "resolved_config": plan.resolved},
                    {args["config"]: args["config"]}, outputs)
    return 0


# --- study ----------------------------------------------------------------------

def cmd_study(args: dict) -> int:
    outdir = _outdir(args)
    _default(args, "data", str(bundled_surrogate_path()))
    _default(args, "schema", str(bundled_schema_path()))
    _default(args, "imputations", 75)
    _default(args, "level", 0.95)
    _default(args, "error_fraction", 0.25)
    args.setdefault("error_variances", None)
    _default(args, "ets_target", 1)
    _default(args, "figures", True)
    schema = _read_schema(args["schema"])
    loaded = load_table(args["data"], schema)
    if loaded.rejected_rows:
        print(f"note: rejected {len(loaded.rejected_rows)} incomplete rows "
              f"(first: {loaded.rejected_rows[:10]})", file=sys.stderr)

    rng = substream(args["seed"], "study")
    if args.get("error_variances") is not None:
        variances = [float(v) for v in str(args["error_variances"]).split(",")]
        noisy = inject_error(rng.substream("inject"), loaded.table, variances=variances)
        error_rule = {"explicit_variances": variances}
    else:
        fraction = float(args["error_fraction"])
        noisy = inject_error(rng.substream("inject"), loaded.table, var_fraction=fraction)
        error_rule = {"var_fraction": fraction}

    metadata = {
        "seed": args["seed"], "n_validate": args["n"],
        "imputations": args["imputations"], "level": args["level"],
        "error_rule": error_rule, "rejected_rows": list(loaded.rejected_rows),
        "data": str(args["data"]),
    }
    report = run_design_comparison(
        rng, noisy, args["n"], args["imputations"], level=args["level"],
        ets_target=args["ets_target"], metadata=metadata,
    )

    header = ["analysis", "model", "exposure", "estimate", "se", "ci_lower",
              "ci_upper", "ci_width", "df"]
    rows = []
    for gold in report.gold:
        rows.append(["gold", gold.model, schema.exposure_columns[gold.model - 1],
                     gold.estimate, gold.se, gold.ci[0], gold.ci[1], gold.ci_width, ""])
    for row in report.results:
        rows.append([row.design, row.model, schema.exposure_columns[row.model - 1],
                     row.estimate, row.se, row.ci[0], row.ci[1], row.ci_width, row.df])
    _write_csv(outdir / "report.csv", header, rows)
    _write_csv(outdir / "plot_data.csv", header, rows)

    payload = {
        "metadata": report.metadata,
        "gold": [{"model": g.model, "estimate": g.estimate, "se": g.se,
                  "ci": list(g.ci), "ci_width": g.ci_width} for g in report.gold],
        "designs": [{"design": r.design, "model": r.model, "estimate": r.estimate,
                     "se": r.se, "ci": list(r.ci), "ci_width": r.ci_width,
                     "total_var": r.total_var, "df": r.df} for r in report.results],
        "mean_ci_width": {kind: report.mean_ci_width(kind)
                          for kind in (SRS, ETS_VAR, ETS_PC1)},
        "pca": pca_to_dict(report.pca),
    }
    _write_json(outdir / "report.json", payload)

    outputs = ["report.csv", "report.json", "plot_data.csv"]
    if args["figures"]:
        figdir = outdir / "figures"
        figdir.mkdir(exist_ok=True)
        render_study_figure(report, outdir / "figures" / "study_comparison.png")
        outputs.append("figures/study_comparison.png")
    _write_manifest(outdir, "study", args,
                    {args["data"]: args["data"], args["schema"]: args["schema"]},
                    outputs)
    return 0


# --- rerun ----------------------------------------------------------------------

_COMMANDS = {}


def cmd_rerun(args: dict) -> int:
    with open(args["manifest"], encoding="utf-8") as handle:
        manifest = json.load(handle)
    command = manifest.get("command")
    if command not in _COMMANDS:
        raise ConfigError(f"manifest names unknown command {command!r}")
    recorded = dict(manifest["args"])
    recorded.pop("resolved_config", None)
    if args.get("out"):
        recorded["out"] = args["out"]
    return _COMMANDS[command](recorded)


_COMMANDS.update({
    "design": cmd_design,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "study": cmd_study,
})


# --- argument parsing -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="valdesign",
        description="Design and analyze two-phase validation studies for "
                    "error-prone covariates.",
    )
    parser.add_argument(
        "--version", action="version",
        version=f"valdesign {__version__} (config-schema {CONFIG_SCHEMA_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="select rows for second-phase validation")
    d.add_argument("--data", required=True, help="study CSV with error-prone exposures")
    d.add_argument("--schema", required=True, help="schema JSON naming column roles")
    d.add_argument("--kind", required=True, choices=list(DESIGN_KINDS))
    d.add_argument("--n", required=True, type=int, help="validation sample size")
    d.add_argument("--target", type=int, help="1-based exposure index (ets-var only)")
    d.add_argument("--seed", type=int, default=0, help="master seed (srs only)")
    d.add_argument("--out", help="output directory (default: $VALDESIGN_OUT or ./out)")

    a = sub.add_parser("analyze", help="fit analysis models with imputed exposures")
    a.add_argument("--data", required=True)
    a.add_argument("--schema", required=True)
    a.add_argument("--design", required=True, help="design JSON from the design step")
    a.add_argument("--selection", help="selected.csv from the design step")
    a.add_argument("--r-column", dest="r_column", help="0/1 validation column in the data")
    a.add_argument("--method", required=True, choices=["single", "multiple"])
    a.add_argument("--m", type=int, default=20, help="imputations (multiple only)")
    a.add_argument("--level", type=float, default=0.95)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out")

    s = sub.add_parser("simulate", help="Monte Carlo design comparison from a config")
    s.add_argument("--config", required=True, help="TOML simulation config")
    s.add_argument("--seed", type=int, help="override the config seed")
    s.add_argument("--threads", type=int, help="worker processes (default: all cores)")
    s.add_argument("--no-figures", dest="figures", action="store_false")
    s.add_argument("--out")

    t = sub.add_parser("study", help="semi-synthetic error-injection comparison")
    t.add_argument("--data", help="study CSV (default: bundled synthetic dataset)")
    t.add_argument("--schema", help="schema JSON (default: bundled schema)")
    t.add_argument("--n", required=True, type=int, help="validation sample size")
    t.add_argument("--imputations", type=int, default=75)
    t.add_argument("--level", type=float, default=0.95)
    t.add_argument("--error-fraction", dest="error_fraction", type=float, default=0.25)
    t.add_argument("--error-variances", dest="error_variances",
                   help="comma-separated per-exposure error variances")
    t.add_argument("--ets-target", dest="ets_target", type=int, default=1)
    t.add_argument("--seed", required=True, type=int)
    t.add_argument("--no-figures", dest="figures", action="store_false")
    t.add_argument("--out")

    r = sub.add_parser("rerun", help="re-execute a run from its manifest")
    r.add_argument("--manifest", required=True)
    r.add_argument("--out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    namespace = parser.parse_args(argv)
    args = {k: v for k, v in vars(namespace).items() if k != "command"}
    command = namespace.command
    try:
        if command == "rerun":
            return cmd_rerun(args)
        return _COMMANDS[command](args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except DomainError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
