"""Command line driver.

Subcommands: diagnose, fit, select, gof, simulate. Each writes a JSON report
and an aligned-text table (to ``--out`` when given, the text also to stdout).
Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical
failure or nonconvergence, 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .config import AppConfig, load_config
from .dataset import MixedDataset
from .diagnostics import (
    discrepancy_measures,
    hybrid_correlation,
    quadrant_tables,
    semicorrelation_table,
)
from .errors import ConfigError, DataError, FactorCopulaError, NumericalError
from .factor_model import (
    FactorCopulaModel,
    FitOptions,
    FitResult,
    bvn2f_identify_and_rotate,
    build_model,
    fit,
    fit_onestep,
    is_bvn_2f,
    log_density_rows,
    marginal_log_density_constant,
    model_from_payload,
)
from .gof import m2, max_deviation, vuong
from .margins import compare_count_margins, fit_margins, to_uniform
from .registry import load_candidates, load_presets
from .schemas import REPORT_SCHEMA_VERSION, DiscretizeSpec, RunConfig
from .selection import SelectionOptions, select
from .simulate import run_study, scenario_from_preset

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3
EXIT_INTERNAL = 4


# Configuration and data


def load_run_config(path: str | None) -> RunConfig:
    """Run configuration from a JSON file (defaults when ``path`` is None).

    Raises:
        ConfigError: If the file is missing or fails validation.
    """
    if path is None:
        return RunConfig()
    if not os.path.exists(path):
        raise ConfigError(f"Run config not found at {path!r}")
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    except Exception as exc:
        raise ConfigError(f"Failed to read run config at {path!r}: {exc}") from exc
    try:
        return RunConfig.model_validate(payload)
    except Exception as exc:
        raise ConfigError(f"Invalid run config schema: {exc}") from exc


def _dense_index(values: np.ndarray) -> np.ndarray:
    _, inverse = np.unique(values, return_inverse=True)
    return (inverse + 1).astype(float)


def ingest(path: str | Path, config: RunConfig) -> MixedDataset:
    """Read a comma-delimited file with a header row.

    Columns are taken in the order of ``config.variables``; with no
    declarations every column is read as continuous. Re-oriented columns are
    negated (continuous) or have their categories reversed (ordinal).
    Ordinal columns with labels below 1 are re-indexed to 1..K.

    Raises:
        ConfigError: If a declared column is missing from the header.
        DataError: On empty, missing or unparsable fields.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"Data file not found at {str(path)!r}")
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"Data file {str(path)!r} is empty") from None
        rows = [row for row in reader if any(field.strip() for field in row)]
    if not rows:
        raise DataError(f"Data file {str(path)!r} has no data rows")
    declared = config.variables or []
    names = [v.name for v in declared] or header
    for name in names:
        if name not in header:
            raise ConfigError(f"Column {name!r} declared in config is not in the data header")
    if len(set(names)) != len(names):
        raise ConfigError("Duplicate column names in config")
    positions = [header.index(name) for name in names]
    values = np.empty((len(rows), len(names)))
    for r, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataError(f"Row {r}: expected {len(header)} fields, got {len(row)}")
        for c, pos in enumerate(positions):
            raw = row[pos].strip()
            if raw == "" or raw.upper() in {"NA", "NAN"}:
                raise DataError(f"Row {r}, column {names[c]!r}: missing value")
            try:
                values[r - 2, c] = float(raw)
            except ValueError:
                raise DataError(f"Row {r}, column {names[c]!r}: cannot parse {raw!r}") from None
    kinds = tuple(v.kind for v in declared) or ("continuous",) * len(names)
    notes: list[str] = []
    for c, kind in enumerate(kinds):
        column = values[:, c]
        if kind == "ordinal" and np.all(column == np.round(column)) and column.min() < 1:
            values[:, c] = _dense_index(column)
            notes.append(f"{names[c]}: categories re-indexed to 1..{int(values[:, c].max())}")
            logger.info("Ordinal column %r re-indexed to start at 1", names[c])
        if declared and declared[c].reorient:
            if kind == "continuous":
                values[:, c] = -values[:, c]
            elif kind == "ordinal":
                values[:, c] = values[:, c].max() + 1.0 - values[:, c]
            else:
                raise ConfigError(f"Count column {names[c]!r} cannot be re-oriented")
            notes.append(f"{names[c]}: re-oriented")
    return MixedDataset(values, kinds, tuple(names), tuple(notes))


def _canonical_json(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(_canonical_json(config.model_dump(mode="json")).encode("utf-8")).hexdigest()


def _json_default(value: object) -> object:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    raise TypeError(f"Not JSON serializable: {type(value).__name__}")


def _emit(args: argparse.Namespace, config: RunConfig, payload: dict[str, object], text: str) -> None:
    document = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "version": __version__,
        "command": args.command,
        "config_sha256": config_hash(config),
        "seed": config.seed,
        **payload,
    }
    header = f"factorcopula {args.command}  config {document['config_sha256'][:12]}  seed {config.seed}"
    full_text = f"{header}\n\n{text}\n"
    if config.out:
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / f"{args.command}.json").open("w", encoding="utf-8") as handle:
            json.dump(document, handle, indent=2, default=_json_default)
        (out / f"{args.command}.txt").write_text(full_text, encoding="utf-8")
        logger.info("Reports written to %s", out)
    sys.stdout.write(full_text)


# Text tables


def fit_table(result: FitResult) -> str:
    model = result.model
    d = model.d
    two = model.links_f2 is not None
    head = f"{'variable':<14}{'kind':<11}{'f1':<9}{'tau':>8}{'se':>8}"
    if two:
        head += f"  {'f2':<9}{'tau':>8}{'se':>8}"
    lines = [head]

    def cell(k: int) -> str:
        se = result.ses_tau[k] if result.ses_tau is not None else None
        se_text = f"{se:>8.3f}" if se is not None else f"{'-':>8}"
        return f"{model.links[k].name:<9}{result.taus[k]:>8.3f}{se_text}"

    for j in range(d):
        line = f"{model.names[j]:<14}{model.margins[j].kind:<11}{cell(j)}"
        if two:
            line += f"  {cell(d + j)}"
        lines.append(line)
    lines.append("")
    lines.append(f"loglik {result.loglik:.3f}   AIC {result.aic:.3f}   free params {result.free_params}")
    if result.flags:
        lines.append("flags: " + ", ".join(result.flags))
    if result.loadings is not None:
        lines.append("")
        lines.append(f"{'variable':<14}{'loading 1':>10}{'loading 2':>10}")
        for j in range(d):
            lines.append(f"{model.names[j]:<14}{result.loadings[j, 0]:>10.3f}{result.loadings[j, 1]:>10.3f}")
    return "\n".join(lines)


# Subcommands


def _fit_options(app: AppConfig, config: RunConfig, compute_se: bool = True) -> FitOptions:
    return FitOptions.from_config(app, n_q=config.nq or app.nq, compute_se=compute_se)


def _declared_model(
    dataset: MixedDataset, config: RunConfig, margins: Sequence[Any], default: str = "bvn"
) -> FactorCopulaModel:
    declared = {v.name: v for v in config.variables}
    f1 = [(declared[name].f1 if name in declared else None) or default for name in dataset.names]
    f2 = None
    if config.factors == 2:
        f2 = [(declared[name].f2 if name in declared else None) or default for name in dataset.names]
    return build_model(margins, f1, f2, names=dataset.names)


def _fit_declared(
    dataset: MixedDataset, config: RunConfig, app: AppConfig, default: str = "bvn"
) -> FitResult:
    options = _fit_options(app, config)
    margins = fit_margins(dataset)
    model = _declared_model(dataset, config, margins, default)
    scores = to_uniform(margins, dataset)
    if config.onestep:
        result = fit_onestep(model, dataset, options)
    else:
        result = fit(model, scores, options)
    if is_bvn_2f(result.model) and not config.onestep:
        result = bvn2f_identify_and_rotate(result, scores, options)
    return result


def _loaded_result(model: FactorCopulaModel, dataset: MixedDataset, n_q: int) -> FitResult:
    """Evaluate a model read from a report without refitting."""
    rows = log_density_rows(model, to_uniform(model.margins, dataset), n_q)
    ll = math.fsum(rows)
    q = model.free_param_count
    return FitResult(
        model=model,
        loglik=ll,
        aic=-2.0 * ll + 2.0 * q,
        n=dataset.n,
        free_params=q,
        iterations=0,
        converged=True,
        taus=tuple(link.tau() for link in model.links),
        message="loaded from report",
    )


def _with_rank_density(payload: dict[str, object], result: FitResult, dataset: MixedDataset) -> None:
    constant = marginal_log_density_constant(dataset)
    payload["loglik_with_rank_density"] = result.loglik + constant
    payload["rank_density_constant"] = constant


def cmd_diagnose(dataset: MixedDataset, config: RunConfig, app: AppConfig, args: argparse.Namespace) -> int:
    corr = hybrid_correlation(dataset, config.discretize)
    semis = semicorrelation_table(dataset, config.discretize)
    k_max = max(1, min(3, dataset.d - 2))
    disc = discrepancy_measures(corr, k_max)
    counts = {
        dataset.names[j]: vars(compare_count_margins(dataset.column(j), dataset.names[j]))
        for j in range(dataset.d)
        if dataset.kinds[j] == "count"
    }
    payload: dict[str, object] = {
        "names": list(dataset.names),
        "notes": list(dataset.notes),
        "correlation": corr.matrix.tolist(),
        "estimators": [list(row) for row in corr.estimators],
        "positive_definite": corr.positive_definite,
        "correlation_flags": list(corr.flags),
        "semicorrelations": [
            {
                "pair": list(s.pair),
                "rho": s.rho,
                "lower": s.lower,
                "upper": s.upper,
                "discordant": s.discordant,
                "excluded": s.excluded,
                "flags": list(s.flags),
            }
            for s in semis
        ],
        "discrepancy": {
            "repaired": disc.repaired,
            "rows": [vars(row) for row in disc.rows],
        },
        "count_margins": counts,
    }
    lines = [f"{'pair':<28}{'rho':>8}{'lower':>8}{'upper':>8}"]

    def fmt(value: float | None) -> str:
        return f"{value:>8.3f}" if value is not None else f"{'-':>8}"

    for s in semis:
        label = f"{s.pair[0]}-{s.pair[1]}"
        lines.append(f"{label:<28}{fmt(s.rho)}{fmt(s.lower)}{fmt(s.upper)}")
    lines.append("")
    lines.append(f"{'factors':>7}{'D1':>10}{'D2':>10}{'D3':>10}")
    for row in disc.rows:
        mark = "  heywood" if row.heywood else ""
        lines.append(f"{row.factors:>7}{row.d1:>10.4f}{row.d2:>10.4f}{row.d3:>10.4f}{mark}")
    if config.out:
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "normal_scores.csv").open("w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=["x", "y", "zx", "zy"])
            writer.writeheader()
            writer.writerows(quadrant_tables(dataset))
    _emit(args, config, payload, "\n".join(lines))
    return EXIT_OK


def cmd_fit(dataset: MixedDataset, config: RunConfig, app: AppConfig, args: argparse.Namespace) -> int:
    result = _fit_declared(dataset, config, app)
    payload: dict[str, object] = {"notes": list(dataset.notes), "fit": result.to_payload()}
    if config.include_rank_density:
        _with_rank_density(payload, result, dataset)
    _emit(args, config, payload, fit_table(result))
    return EXIT_OK if result.converged else EXIT_NUMERICAL


def cmd_select(dataset: MixedDataset, config: RunConfig, app: AppConfig, args: argparse.Namespace) -> int:
    candidates = load_candidates(config.candidates or app.candidates_path)
    margins = fit_margins(dataset)
    options = SelectionOptions(
        fit=_fit_options(app, config), workers=args.workers or app.workers, multipass=config.multipass
    )
    outcome = select(dataset, margins, to_uniform(margins, dataset), config.factors, candidates, options)
    payload: dict[str, object] = {
        "notes": list(dataset.notes),
        "fit": outcome.fit.to_payload(),
        "all_frank": {"loglik": outcome.frank_fit.loglik, "aic": outcome.frank_fit.aic},
        "trace": outcome.trace.to_payload(),
    }
    if config.include_rank_density:
        _with_rank_density(payload, outcome.fit, dataset)
    lines = [fit_table(outcome.fit), "", f"all-Frank AIC {outcome.frank_fit.aic:.3f}"]
    lines.extend(f"note: {note}" for note in outcome.trace.notes)
    _emit(args, config, payload, "\n".join(lines))
    return EXIT_OK if outcome.fit.converged else EXIT_NUMERICAL


def cmd_gof(dataset: MixedDataset, config: RunConfig, app: AppConfig, args: argparse.Namespace) -> int:
    n_q = config.nq or app.nq
    if args.model:
        try:
            with open(args.model, encoding="utf-8") as handle:
                document = json.load(handle)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"Cannot read model report {args.model!r}: {exc}") from exc
        report = document.get("fit", document) if isinstance(document, dict) else document
        result = _loaded_result(model_from_payload(report, dataset), dataset, n_q)
    else:
        result = _fit_declared(dataset, config, app)
    converged = result.converged
    report_m2 = m2(result, dataset, config.discretize, xi=config.xi, n_q=n_q)
    a, b, worst = max_deviation(report_m2.deviations)
    payload: dict[str, object] = {
        "fit": result.to_payload(),
        "m2": report_m2.to_payload(dataset.names),
    }
    lines = [
        fit_table(result),
        "",
        f"M2 {report_m2.statistic:.2f} on {report_m2.df} df   p={report_m2.p_value:.4f}"
        f"   (s={report_m2.s_dim}, q={report_m2.q}, xi={report_m2.xi})",
        f"largest pair deviation {dataset.names[a]}-{dataset.names[b]}: {worst:.2f}",
    ]
    if args.compare:
        baseline_config = config.model_copy(
            update={"variables": [v.model_copy(update={"f1": config.baseline, "f2": config.baseline})
                                  for v in config.variables]}
        )
        baseline = _fit_declared(dataset, baseline_config, app, config.baseline)
        converged = converged and baseline.converged
        test = vuong(baseline, result, dataset, n_q)
        payload["vuong"] = {
            "baseline": config.baseline,
            "baseline_loglik": baseline.loglik,
            "mean": test.mean,
            "sd": test.sd,
            "z": test.z,
            "ci95": list(test.ci95),
            "favored": test.favored,
            "flags": list(test.flags),
        }
        lines.append(
            f"Vuong vs {config.baseline}: mean {test.mean:.4f}, 95% CI "
            f"({test.ci95[0]:.4f}, {test.ci95[1]:.4f}), favors {test.favored}"
        )
    _emit(args, config, payload, "\n".join(lines))
    return EXIT_OK if converged else EXIT_NUMERICAL


def cmd_simulate(config: RunConfig, app: AppConfig, args: argparse.Namespace) -> int:
    if not args.preset:
        raise ConfigError("simulate needs --preset")
    preset = load_presets(app.presets_path).get(args.preset)
    scenario = scenario_from_preset(
        preset,
        n=args.n,
        reps=args.reps,
        seed=config.seed,
        fit=True,
        gof=args.gof,
        select=args.select,
        discrepancy=args.discrepancy,
        misspecify_bvn=args.misspecify_bvn,
        fit_options=_fit_options(app, config, compute_se=False),
        discretize=config.discretize,
        xi=config.xi,
        candidates=load_candidates(config.candidates or app.candidates_path) if args.select else None,
    )
    report = run_study(scenario, workers=args.workers or app.workers)
    _emit(args, config, {"study": report.to_payload()}, report.to_text())
    return EXIT_OK


# Entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="factorcopula", description="Factor copula models for mixed data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Run config JSON")
    common.add_argument("--nq", type=int, help="Quadrature nodes per factor (default 25)")
    common.add_argument("--factors", type=int, choices=(1, 2))
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="Directory for report files")
    common.add_argument("--discretize", type=int, metavar="K", help="Categories for continuous columns")
    common.add_argument("--xi", choices=("full", "diagonal"))
    common.add_argument("--workers", type=int)
    common.add_argument("--log-level", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    common.add_argument("--candidates", help="Candidate sets JSON")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="Comma-delimited data file with header")
    data.add_argument("--onestep", action="store_true", default=None)
    data.add_argument("--multipass", action="store_true", default=None)
    data.add_argument("--include-rank-density", action="store_true", default=None)

    sub.add_parser("diagnose", parents=[common, data], help="Correlations, semi-correlations, discrepancies")
    sub.add_parser("fit", parents=[common, data], help="Fit the declared model")
    sub.add_parser("select", parents=[common, data], help="Select linking copula families")
    gof = sub.add_parser("gof", parents=[common, data], help="M2 statistic and Vuong comparison")
    gof.add_argument("--compare", action="store_true", help="Vuong test against the baseline model")
    gof.add_argument("--model", help="Fit report JSON to evaluate instead of refitting")
    simulate = sub.add_parser("simulate", parents=[common], help="Replication study from a preset")
    simulate.add_argument("--preset", help="Scenario preset name")
    simulate.add_argument("--n", type=int, help="Rows per replicate")
    simulate.add_argument("--reps", type=int, help="Number of replicates")
    simulate.add_argument("--gof", action="store_true", help="Compute M2 per replicate")
    simulate.add_argument("--select", action="store_true", help="Run selection per replicate")
    simulate.add_argument("--discrepancy", action="store_true", help="Compute D-measures per replicate")
    simulate.add_argument("--misspecify-bvn", action="store_true", help="Fit all-BVN links")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """File config with command-line flags applied on top."""
    config = load_run_config(args.config)
    update: dict[str, object] = {}
    for flag in ("data", "nq", "factors", "seed", "out", "xi", "candidates"):
        value = getattr(args, flag, None)
        if value is not None:
            update[flag] = value
    for flag in ("onestep", "multipass", "include_rank_density"):
        if getattr(args, flag, None):
            update[flag] = True
    if args.discretize is not None:
        update["discretize"] = config.discretize.model_copy(update={"continuous_categories": args.discretize})
    try:
        resolved = RunConfig.model_validate({**config.model_dump(), **update})
        DiscretizeSpec.model_validate(resolved.discretize.model_dump())
    except Exception as exc:
        raise ConfigError(f"Invalid option: {exc}") from exc
    return resolved


def run(args: argparse.Namespace) -> int:
    app = load_config()
    config = resolve_config(args)
    if args.command == "simulate":
        return cmd_simulate(config, app, args)
    if not config.data:
        raise ConfigError(f"{args.command} needs --data or a config with 'data'")
    dataset = ingest(config.data, config)
    logger.info("Loaded %d rows, %d columns from %s", dataset.n, dataset.d, config.data)
    commands = {"diagnose": cmd_diagnose, "fit": cmd_fit, "select": cmd_select, "gof": cmd_gof}
    return commands[args.command](dataset, config, app, args)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        level = args.log_level or load_config().log_level
    except ConfigError as exc:
        sys.stderr.write(f"[error] {exc}\n")
        return EXIT_CONFIG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", force=True)
    try:
        return run(args)
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except NumericalError as exc:
        logger.error("%s", exc)
        return EXIT_NUMERICAL
    except FactorCopulaError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except Exception:
        logger.exception("Internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
