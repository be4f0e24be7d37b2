"""Sampling from factor copula models and the replication harness.

Rows are drawn by conditional inversion: latent uniforms first, then each
variable's copula-scale value given the latents, then the margin quantile.
Replicate r of a study always uses the r-th child of the study seed, so
results do not depend on the number of worker threads.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import ndtri

from .copulas import LinkingCopula, make_copula
from .dataset import MixedDataset
from .diagnostics import discrepancy_measures, hybrid_correlation
from .errors import ConfigError, FactorCopulaError
from .factor_model import FactorCopulaModel, FitOptions, build_model, fit
from .gof import m2
from .margins import (
    COUNT_QUANTILE_CAP,
    EmpiricalMargin,
    MarginModel,
    NegBinMargin,
    OrdinalMargin,
    fit_margins,
    to_uniform,
)
from .registry import CandidateSets
from .schemas import DiscretizeSpec, PresetLink, PresetMargin, ScenarioPreset, XiMode
from .selection import SelectionOptions, select

logger = logging.getLogger(__name__)

REJECTION_LEVELS = (0.20, 0.10, 0.05, 0.01)

SeedLike = int | np.random.SeedSequence | np.random.Generator | None


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _to_data_scale(model: FactorCopulaModel, u: np.ndarray) -> MixedDataset:
    values = np.empty_like(u)
    notes: list[str] = []
    for j, margin in enumerate(model.margins):
        values[:, j] = margin.quantile(u[:, j])
        if isinstance(margin, NegBinMargin) and np.any(values[:, j] >= COUNT_QUANTILE_CAP):
            notes.append(f"{model.names[j]}: counts capped at {COUNT_QUANTILE_CAP}")
    kinds = tuple(margin.kind for margin in model.margins)
    return MixedDataset(values, kinds, model.names, tuple(notes))


def sample_uniform(model: FactorCopulaModel, n: int, seed: SeedLike = None) -> np.ndarray:
    """(n, d) copula-scale sample of ``model``."""
    if n < 1:
        raise ConfigError(f"Sample size must be >= 1, got {n}")
    rng = _rng(seed)
    d = model.d
    x1 = rng.random(n)
    if model.links_f2 is None:
        w = rng.random((n, d))
        return np.column_stack(
            [model.links_f1[j].conditional_inverse(w[:, j], x1) for j in range(d)]
        )
    x2 = rng.random(n)
    w = rng.random((n, d))
    columns = []
    for j in range(d):
        v = model.links_f2[j].conditional_inverse(w[:, j], x2)
        columns.append(model.links_f1[j].conditional_inverse(v, x1))
    return np.column_stack(columns)


def sample_1factor(model: FactorCopulaModel, n: int, seed: SeedLike = None) -> MixedDataset:
    """Draw ``n`` rows from a 1-factor model.

    Continuous columns come back on their margin's scale, which is the
    uniform scale for ``EmpiricalMargin.uniform()``.
    """
    if model.factors != 1:
        raise ConfigError("sample_1factor needs a 1-factor model")
    return _to_data_scale(model, sample_uniform(model, n, seed))


def sample_2factor(model: FactorCopulaModel, n: int, seed: SeedLike = None) -> MixedDataset:
    """Draw ``n`` rows from a 2-factor model by nested conditional inversion."""
    if model.factors != 2:
        raise ConfigError("sample_2factor needs a 2-factor model")
    return _to_data_scale(model, sample_uniform(model, n, seed))


def sample(model: FactorCopulaModel, n: int, seed: SeedLike = None) -> MixedDataset:
    return _to_data_scale(model, sample_uniform(model, n, seed))


# Scenarios


def preset_margin(spec: PresetMargin) -> MarginModel:
    """Margin for a simulated column.

    Ordinal columns get probit cutpoints at the normal quantiles of the
    cumulative category probabilities (equal probabilities when only the
    category count is given).
    """
    if spec.kind == "continuous":
        return EmpiricalMargin.uniform()
    if spec.kind == "count":
        if spec.mu is None:
            raise ConfigError("Count margin needs mu")
        return NegBinMargin(spec.mu, spec.xi)
    if spec.probabilities is not None:
        probs = np.asarray(spec.probabilities, dtype=float)
        if probs.size < 2 or np.any(probs <= 0.0) or not math.isclose(probs.sum(), 1.0, abs_tol=1e-6):
            raise ConfigError(f"Ordinal probabilities must be positive and sum to 1: {spec.probabilities}")
    elif spec.categories is not None:
        probs = np.full(spec.categories, 1.0 / spec.categories)
    else:
        raise ConfigError("Ordinal margin needs probabilities or categories")
    cuts = ndtri(np.cumsum(probs)[:-1])
    return OrdinalMargin(tuple(float(c) for c in cuts), tuple(range(1, probs.size + 1)))


def preset_link(spec: PresetLink) -> LinkingCopula:
    if spec.params is not None:
        return make_copula(spec.copula, spec.params)
    return make_copula(spec.copula, tau=spec.tau)


def model_from_preset(preset: ScenarioPreset) -> FactorCopulaModel:
    margins = tuple(preset_margin(v.margin) for v in preset.variables)
    f1 = tuple(preset_link(v.f1) for v in preset.variables)
    f2 = None
    if preset.factors == 2:
        f2 = tuple(preset_link(v.f2) for v in preset.variables if v.f2 is not None)
    return FactorCopulaModel(margins, f1, f2, names=tuple(v.name for v in preset.variables))


@dataclass(frozen=True)
class SimulationScenario:
    """A replication study.

    Attributes:
        model: True model.
        n: Rows per replicate.
        reps: Number of replicates.
        seed: Study seed; replicate r uses child r of its SeedSequence.
        fit: Estimate the true families on each replicate.
        gof: Compute M2 for each fit.
        select: Run family selection on each replicate.
        discrepancy: Compute correlation discrepancy measures.
        misspecify_bvn: Fit all-BVN links instead of the true families.
        fit_options: Options for every fit.
        discretize: Discretization for M2 and correlations.
        xi: M2 covariance mode.
        candidates: Candidate sets for selection; packaged defaults when None.
        name: Scenario label.
        reconstructed: Whether the true model is a reconstruction.
    """

    model: FactorCopulaModel
    n: int
    reps: int
    seed: int = 0
    fit: bool = True
    gof: bool = False
    select: bool = False
    discrepancy: bool = False
    misspecify_bvn: bool = False
    fit_options: FitOptions = field(default_factory=lambda: FitOptions(compute_se=False))
    discretize: DiscretizeSpec = field(default_factory=DiscretizeSpec)
    xi: XiMode = "full"
    candidates: CandidateSets | None = None
    name: str = "custom"
    reconstructed: bool = False

    def __post_init__(self) -> None:
        if self.n < 10:
            raise ConfigError(f"Replicate size must be >= 10, got {self.n}")
        if self.reps < 1:
            raise ConfigError(f"Replicate count must be >= 1, got {self.reps}")
        if self.gof and not self.fit:
            raise ConfigError("M2 replicates need fit enabled")


def scenario_from_preset(
    preset: ScenarioPreset,
    *,
    n: int | None = None,
    reps: int | None = None,
    seed: int = 0,
    **overrides: object,
) -> SimulationScenario:
    return SimulationScenario(
        model=model_from_preset(preset),
        n=n or preset.n,
        reps=reps or preset.reps,
        seed=seed,
        name=preset.name,
        reconstructed=preset.reconstructed,
        **overrides,  # type: ignore[arg-type]
    )


# Replicates


@dataclass(frozen=True)
class ReplicateResult:
    index: int
    taus: tuple[float, ...] | None = None
    m2_statistic: float | None = None
    m2_df: int | None = None
    m2_p_value: float | None = None
    selected: tuple[str, ...] | None = None
    discrepancy: tuple[tuple[float, float, float], ...] | None = None
    error: str | None = None


def _fit_model(scenario: SimulationScenario, data: MixedDataset) -> FactorCopulaModel:
    truth = scenario.model
    margins = fit_margins(data)
    if scenario.misspecify_bvn:
        f1 = ["bvn"] * truth.d
        f2 = ["bvn"] * truth.d if truth.factors == 2 else None
    else:
        f1, f2 = truth.copula_names()
    signs_f1 = [link.tau() for link in truth.links_f1]
    model = build_model(margins, f1, None, names=truth.names, signs=signs_f1)
    if f2 is not None:
        assert truth.links_f2 is not None
        signs_f2 = [link.tau() for link in truth.links_f2]
        second = build_model(margins, f2, None, names=truth.names, start_tau=0.1, signs=signs_f2)
        model = replace(model, links_f2=second.links_f1)
    return model


def run_replicate(scenario: SimulationScenario, index: int, seed: np.random.SeedSequence) -> ReplicateResult:
    """Simulate one dataset and run the requested estimations on it."""
    try:
        data = sample(scenario.model, scenario.n, seed)
        taus = statistic = df = p_value = selected = disc = None
        if scenario.fit:
            start = _fit_model(scenario, data)
            scores = to_uniform(start.margins, data)
            result = fit(start, scores, scenario.fit_options)
            taus = result.taus
            if scenario.gof:
                report = m2(result, data, scenario.discretize, xi=scenario.xi, n_q=scenario.fit_options.n_q)
                statistic, df, p_value = report.statistic, report.df, report.p_value
        if scenario.select:
            margins = fit_margins(data)
            chosen = select(
                data,
                margins,
                to_uniform(margins, data),
                scenario.model.factors,
                scenario.candidates,
                SelectionOptions(fit=replace(scenario.fit_options, compute_se=False)),
            )
            f1, f2 = chosen.model.copula_names()
            selected = tuple(f1 + (f2 or []))
        if scenario.discrepancy:
            report_d = discrepancy_measures(
                hybrid_correlation(data, scenario.discretize), scenario.model.factors + 1
            )
            disc = tuple((row.d1, row.d2, row.d3) for row in report_d.rows)
    except (FactorCopulaError, np.linalg.LinAlgError) as exc:
        logger.debug("Replicate %d failed: %s", index, exc)
        return ReplicateResult(index, error=str(exc))
    return ReplicateResult(index, taus, statistic, df, p_value, selected, disc)


# Aggregation


@dataclass(frozen=True)
class ParameterSummary:
    """Kendall tau accuracy for one link, scaled by n."""

    link: str
    variable: str
    factor: int
    true_tau: float
    mean: float
    n_bias: float
    n_sd: float
    n_rmse: float


@dataclass(frozen=True, eq=False)
class StudyReport:
    """Aggregated replicate results.

    Failed replicates are excluded from every aggregate and counted in
    ``failures``.
    """

    scenario: str
    n: int
    reps: int
    seed: int
    reconstructed: bool
    completed: int
    failures: int
    failure_messages: tuple[str, ...]
    parameters: tuple[ParameterSummary, ...] = ()
    m2_rejection: dict[str, float] | None = None
    m2_mean: float | None = None
    m2_df: float | None = None
    selection_frequencies: dict[str, dict[str, float]] | None = None
    discrepancy: tuple[dict[str, float], ...] | None = None

    def to_payload(self) -> dict[str, object]:
        return {
            "scenario": self.scenario,
            "n": self.n,
            "reps": self.reps,
            "seed": self.seed,
            "reconstructed": self.reconstructed,
            "completed": self.completed,
            "failures": self.failures,
            "failure_messages": list(self.failure_messages),
            "parameters": [vars(p) for p in self.parameters],
            "m2": None
            if self.m2_rejection is None
            else {"rejection": self.m2_rejection, "mean": self.m2_mean, "df": self.m2_df},
            "selection_frequencies": self.selection_frequencies,
            "discrepancy": list(self.discrepancy) if self.discrepancy is not None else None,
        }

    def to_text(self) -> str:
        lines = [
            f"scenario {self.scenario}  n={self.n}  reps={self.reps}  seed={self.seed}"
            + ("  (reconstructed)" if self.reconstructed else ""),
            f"completed {self.completed}, failed {self.failures}",
        ]
        if self.parameters:
            lines.append("")
            lines.append(f"{'variable':<14}{'f':>2} {'link':<10}{'tau':>8}{'nBias':>10}{'nSD':>10}{'nRMSE':>10}")
            for p in self.parameters:
                lines.append(
                    f"{p.variable:<14}{p.factor:>2} {p.link:<10}{p.true_tau:>8.3f}"
                    f"{p.n_bias:>10.2f}{p.n_sd:>10.2f}{p.n_rmse:>10.2f}"
                )
        if self.m2_rejection is not None:
            lines.append("")
            levels = "  ".join(f"{k}:{v:.3f}" for k, v in self.m2_rejection.items())
            lines.append(f"M2 rejection  {levels}  mean={self.m2_mean:.2f} df={self.m2_df:.1f}")
        if self.selection_frequencies is not None:
            lines.append("")
            for key, freq in self.selection_frequencies.items():
                ranked = sorted(freq.items(), key=lambda item: -item[1])
                lines.append(f"{key:<18}" + "  ".join(f"{name} {share:.2f}" for name, share in ranked))
        if self.discrepancy is not None:
            lines.append("")
            lines.append(f"{'factors':>7}{'D1':>10}{'D2':>10}{'D3':>10}")
            for row in self.discrepancy:
                lines.append(
                    f"{int(row['factors']):>7}{row['d1_mean']:>10.4f}{row['d2_mean']:>10.4f}{row['d3_mean']:>10.4f}"
                )
        return "\n".join(lines)


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values)


def _sd(values: Sequence[float]) -> float:
    if len(values) < 2:
        return 0.0
    m = _mean(values)
    return math.sqrt(math.fsum((v - m) ** 2 for v in values) / (len(values) - 1))


def _parameter_summaries(scenario: SimulationScenario, done: Sequence[ReplicateResult]) -> list[ParameterSummary]:
    model = scenario.model
    rows = [r.taus for r in done if r.taus is not None]
    if not rows:
        return []
    names = [link.name for link in model.links]
    if scenario.misspecify_bvn:
        names = ["bvn"] * len(names)
    out = []
    n = scenario.n
    for k, link in enumerate(model.links):
        estimates = [row[k] for row in rows]
        truth = link.tau()
        mean = _mean(estimates)
        rmse = math.sqrt(_mean([(e - truth) ** 2 for e in estimates]))
        out.append(
            ParameterSummary(
                link=names[k],
                variable=model.names[k % model.d],
                factor=1 + k // model.d,
                true_tau=truth,
                mean=mean,
                n_bias=n * (mean - truth),
                n_sd=n * _sd(estimates),
                n_rmse=n * rmse,
            )
        )
    return out


def _selection_frequencies(
    model: FactorCopulaModel, done: Sequence[ReplicateResult]
) -> dict[str, dict[str, float]] | None:
    chosen = [r.selected for r in done if r.selected is not None]
    if not chosen:
        return None
    out: dict[str, dict[str, float]] = {}
    for k in range(len(model.links)):
        key = f"{model.names[k % model.d]}/f{1 + k // model.d}"
        counts = Counter(sel[k] for sel in chosen)
        out[key] = {name: count / len(chosen) for name, count in counts.items()}
    return out


def summarize(scenario: SimulationScenario, results: Sequence[ReplicateResult]) -> StudyReport:
    done = [r for r in sorted(results, key=lambda r: r.index) if r.error is None]
    failed = [r for r in results if r.error is not None]
    rejection = m2_mean = m2_df = None
    with_m2 = [r for r in done if r.m2_p_value is not None]
    if with_m2:
        rejection = {
            f"{alpha:.2f}": sum(r.m2_p_value < alpha for r in with_m2) / len(with_m2)  # type: ignore[operator]
            for alpha in REJECTION_LEVELS
        }
        m2_mean = _mean([r.m2_statistic for r in with_m2])  # type: ignore[misc]
        m2_df = _mean([float(r.m2_df) for r in with_m2])  # type: ignore[arg-type]
    discrepancy = None
    with_d = [r.discrepancy for r in done if r.discrepancy is not None]
    if with_d:
        rows = []
        for k in range(len(with_d[0])):
            row: dict[str, float] = {"factors": float(k + 1)}
            for m, label in enumerate(("d1", "d2", "d3")):
                values = [rep[k][m] for rep in with_d]
                row[f"{label}_mean"] = _mean(values)
                row[f"{label}_sd"] = _sd(values)
            rows.append(row)
        discrepancy = tuple(rows)
    return StudyReport(
        scenario=scenario.name,
        n=scenario.n,
        reps=scenario.reps,
        seed=scenario.seed,
        reconstructed=scenario.reconstructed,
        completed=len(done),
        failures=len(failed),
        failure_messages=tuple(sorted({r.error for r in failed if r.error})),
        parameters=tuple(_parameter_summaries(scenario, done)),
        m2_rejection=rejection,
        m2_mean=m2_mean,
        m2_df=m2_df,
        selection_frequencies=_selection_frequencies(scenario.model, done),
        discrepancy=discrepancy,
    )


def run_study(scenario: SimulationScenario, workers: int = 1) -> StudyReport:
    """Run every replicate of ``scenario`` and aggregate.

    Replicates run on a thread pool; each draws from its own child seed.
    """
    seeds = np.random.SeedSequence(scenario.seed).spawn(scenario.reps)
    logger.info("Running %d replicates of %s (n=%d, workers=%d)", scenario.reps, scenario.name, scenario.n, workers)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda r: run_replicate(scenario, r, seeds[r]), range(scenario.reps)))
    report = summarize(scenario, results)
    if report.failures:
        logger.warning("%d of %d replicates failed", report.failures, scenario.reps)
    return report
