"""Sequential selection of linking-copula families.

Start from Frank links everywhere, route each variable to the positive or
negative candidate set by the sign of its Frank estimate, then walk through
the variables: refit the full model with each candidate in place of the
current family and keep the one with the lowest AIC. For two factors the
first factor is selected with the second held at Frank, then the second with
the first fixed.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .copulas import LinkingCopula, make_copula, parse_copula_name
from .dataset import MixedDataset
from .errors import FactorCopulaError
from .factor_model import FactorCopulaModel, FitOptions, FitResult, build_model, fit
from .margins import MarginModel, UniformScores
from .registry import CandidateSets, load_candidates

logger = logging.getLogger(__name__)

__all__ = [
    "CandidateRecord",
    "CandidateSets",
    "SelectionOptions",
    "SelectionResult",
    "SelectionStep",
    "SelectionTrace",
    "select",
    "select_1factor",
    "select_2factor",
]

_START_TAU_RANGE = (0.05, 0.85)


@dataclass(frozen=True)
class SelectionOptions:
    """Settings for the selection walk.

    Attributes:
        fit: Options for every candidate fit.
        workers: Threads used for the candidate fits of one step.
        multipass: Repeat the walk until no family changes.
        max_passes: Pass cap in multipass mode.
    """

    fit: FitOptions = field(default_factory=FitOptions)
    workers: int = 1
    multipass: bool = False
    max_passes: int = 5


@dataclass(frozen=True)
class CandidateRecord:
    name: str
    aic: float | None
    loglik: float | None
    note: str = ""


@dataclass(frozen=True)
class SelectionStep:
    """One variable of one pass: every candidate tried and the winner."""

    variable: str
    factor: int
    candidates: tuple[CandidateRecord, ...]
    chosen: str
    pass_index: int = 1

    def to_payload(self) -> dict[str, object]:
        return {
            "variable": self.variable,
            "factor": self.factor,
            "pass": self.pass_index,
            "chosen": self.chosen,
            "candidates": [
                {"copula": c.name, "aic": c.aic, "loglik": c.loglik, "note": c.note}
                for c in self.candidates
            ],
        }


@dataclass(frozen=True)
class SelectionTrace:
    steps: tuple[SelectionStep, ...] = ()
    notes: tuple[str, ...] = ()

    def to_payload(self) -> dict[str, object]:
        return {"steps": [s.to_payload() for s in self.steps], "notes": list(self.notes)}


@dataclass(frozen=True)
class SelectionResult:
    """Selected model with its fit, the all-Frank starting fit and the trace."""

    fit: FitResult
    frank_fit: FitResult
    trace: SelectionTrace

    @property
    def model(self) -> FactorCopulaModel:
        return self.fit.model


def _start_link(name: str, tau_hint: float) -> LinkingCopula:
    """Link of family ``name`` started near |tau_hint| with the sign the family allows."""
    family, variant = parse_copula_name(name)
    size = min(max(abs(tau_hint), _START_TAU_RANGE[0]), _START_TAU_RANGE[1])
    if family.comprehensive:
        sign = -1.0 if tau_hint < 0 else 1.0
    else:
        sign = -1.0 if variant.negates_tau else 1.0
    for tau in (sign * size, sign * 0.3):
        try:
            return make_copula(name, tau=tau)
        except FactorCopulaError as exc:
            logger.debug("Start tau %.3f rejected for %s: %s", tau, name, exc)
    return make_copula(name, tau=sign * 0.1)


def _swap(model: FactorCopulaModel, factor: int, j: int, link: LinkingCopula) -> FactorCopulaModel:
    if factor == 1:
        links = list(model.links_f1)
        links[j] = link
        return replace(model, links_f1=tuple(links), fixed_mask=None)
    assert model.links_f2 is not None
    links = list(model.links_f2)
    links[j] = link
    return replace(model, links_f2=tuple(links), fixed_mask=None)


def _links(model: FactorCopulaModel, factor: int) -> tuple[LinkingCopula, ...]:
    if factor == 1:
        return model.links_f1
    assert model.links_f2 is not None
    return model.links_f2


def _try_fit(model: FactorCopulaModel, scores: UniformScores, options: FitOptions) -> FitResult | str:
    try:
        return fit(model, scores, options)
    except FactorCopulaError as exc:
        return f"fit failed: {exc}"


def _walk_factor(
    current: FitResult,
    factor: int,
    scores: UniformScores,
    kinds: Sequence[str],
    candidates: CandidateSets,
    signs: np.ndarray,
    options: SelectionOptions,
    pass_index: int,
) -> tuple[FitResult, list[SelectionStep], bool]:
    steps: list[SelectionStep] = []
    changed = False
    # candidate fits skip standard errors; the final model is refit with them
    fit_options = replace(options.fit, compute_se=False)
    with ThreadPoolExecutor(max_workers=max(1, options.workers)) as pool:
        for j in range(current.model.d):
            names = candidates.for_variable(bool(signs[j] < 0), kinds[j] == "continuous")
            current_link = _links(current.model, factor)[j]
            tau_hint = current_link.tau()
            models: list[FactorCopulaModel | str] = []
            for name in names:
                if name == current_link.name:
                    models.append(current.model)
                    continue
                try:
                    models.append(_swap(current.model, factor, j, _start_link(name, tau_hint)))
                except FactorCopulaError as exc:
                    models.append(f"start failed: {exc}")
            jobs = [
                pool.submit(_try_fit, m, scores, fit_options)
                if isinstance(m, FactorCopulaModel) and m is not current.model
                else None
                for m in models
            ]
            records: list[CandidateRecord] = []
            best: FitResult | None = None
            best_name = current_link.name
            for name, model, job in zip(names, models, jobs, strict=True):
                if isinstance(model, str):
                    records.append(CandidateRecord(name, None, None, model))
                    continue
                outcome = current if job is None else job.result()
                if isinstance(outcome, str):
                    records.append(CandidateRecord(name, None, None, outcome))
                    logger.debug("Candidate %s for %s skipped: %s", name, current.model.names[j], outcome)
                    continue
                records.append(CandidateRecord(name, outcome.aic, outcome.loglik))
                logger.debug("Candidate %s for %s: aic=%.4f", name, current.model.names[j], outcome.aic)
                if best is None or outcome.aic < best.aic:
                    best, best_name = outcome, name
            variable = current.model.names[j]
            if best is None:
                logger.warning("All candidates failed for %s (factor %d), keeping %s",
                               variable, factor, current_link.name)
            else:
                changed = changed or best_name != current_link.name
                current = best
            logger.info("Factor %d, %s: selected %s", factor, variable, best_name)
            steps.append(SelectionStep(variable, factor, tuple(records), best_name, pass_index))
    return current, steps, changed


def _select(
    margins: Sequence[MarginModel],
    scores: UniformScores,
    kinds: Sequence[str],
    names: Sequence[str],
    factors: int,
    candidates: CandidateSets | None,
    options: SelectionOptions,
) -> SelectionResult:
    candidates = candidates or load_candidates()
    d = len(margins)
    frank = ["frank"] * d
    start = build_model(margins, frank, frank if factors == 2 else None, names=names)
    frank_fit = fit(start, scores, options.fit)
    logger.info("All-Frank %d-factor fit: aic=%.4f", factors, frank_fit.aic)
    current = frank_fit
    steps: list[SelectionStep] = []
    notes: list[str] = []
    for factor in range(1, factors + 1):
        signs = np.array([link.tau() for link in _links(frank_fit.model, factor)])
        passes = options.max_passes if options.multipass else 1
        for pass_index in range(1, passes + 1):
            current, new_steps, changed = _walk_factor(
                current, factor, scores, kinds, candidates, signs, options, pass_index
            )
            steps.extend(new_steps)
            if not changed:
                break
        else:
            if options.multipass:
                notes.append(f"factor {factor}: families still changing after {passes} passes")
    final = fit(current.model, scores, options.fit) if options.fit.compute_se else current
    if final.aic > current.aic + 1e-6:
        final = replace(current, flags=(*current.flags, "final_refit_worse"))
    if final.aic > frank_fit.aic + 1e-6:
        notes.append("selected model has higher AIC than the all-Frank model")
    return SelectionResult(final, frank_fit, SelectionTrace(tuple(steps), tuple(notes)))


def select_1factor(
    dataset: MixedDataset,
    margins: Sequence[MarginModel],
    scores: UniformScores,
    candidates: CandidateSets | None = None,
    options: SelectionOptions | None = None,
) -> SelectionResult:
    """Select a factor-1 family per variable.

    Candidate order breaks AIC ties; a variable whose candidates all fail
    keeps its Frank link.
    """
    return _select(margins, scores, dataset.kinds, dataset.names, 1, candidates,
                   options or SelectionOptions())


def select_2factor(
    dataset: MixedDataset,
    margins: Sequence[MarginModel],
    scores: UniformScores,
    candidates: CandidateSets | None = None,
    options: SelectionOptions | None = None,
) -> SelectionResult:
    """Select factor-1 families (factor 2 at Frank), then factor-2 families."""
    return _select(margins, scores, dataset.kinds, dataset.names, 2, candidates,
                   options or SelectionOptions())


def select(
    dataset: MixedDataset,
    margins: Sequence[MarginModel],
    scores: UniformScores,
    factors: int,
    candidates: CandidateSets | None = None,
    options: SelectionOptions | None = None,
) -> SelectionResult:
    if factors == 1:
        return select_1factor(dataset, margins, scores, candidates, options)
    return select_2factor(dataset, margins, scores, candidates, options)


def aic_gap(trace: SelectionTrace) -> list[float]:
    """Per step, the AIC difference between the two best candidates (inf if fewer than two)."""
    gaps = []
    for step in trace.steps:
        aics = sorted(c.aic for c in step.candidates if c.aic is not None)
        gaps.append(aics[1] - aics[0] if len(aics) > 1 else math.inf)
    return gaps
