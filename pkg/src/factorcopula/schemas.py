"""Pydantic schemas for run configurations, presets and reports.

Run configs, candidate sets and scenario presets are read from JSON; fit
reports are written as JSON and can be loaded back into a model.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

REPORT_SCHEMA_VERSION = 1

VariableKindName = Literal["continuous", "ordinal", "count"]
CountStrategy = Literal["top_code", "equal_range"]
XiMode = Literal["full", "diagonal"]


class VariableSpec(BaseModel):
    """Column declaration in a run config.

    Attributes:
        name: Column name in the data header.
        kind: Variable kind.
        reorient: Negate (continuous) or reverse (ordinal) the column on ingest.
        f1: Copula name linking the column to the first factor.
        f2: Copula name for the second factor (2-factor models only).
    """

    name: str = Field(min_length=1)
    kind: VariableKindName
    reorient: bool = False
    f1: str | None = None
    f2: str | None = None


class DiscretizeSpec(BaseModel):
    """Discretization used by the M2 statistic.

    Attributes:
        continuous_categories: Equal-probability categories for continuous columns.
        count_strategy: How count columns are categorized.
        count_threshold: Top-coding threshold; counts >= minimum + threshold share the last category.
        count_categories: Number of equal-range categories for counts.
        categories: Per-column overrides of the continuous category count.
    """

    continuous_categories: int = Field(default=5, ge=2)
    count_strategy: CountStrategy = "top_code"
    count_threshold: int = Field(default=4, ge=1)
    count_categories: int = Field(default=5, ge=2)
    categories: dict[str, int] = Field(default_factory=dict)


class RunConfig(BaseModel):
    """Per-run settings; CLI flags override these values."""

    data: str | None = None
    variables: list[VariableSpec] = Field(default_factory=list)
    factors: Literal[1, 2] = 1
    nq: int | None = Field(default=None, ge=2)
    seed: int = 0
    out: str | None = None
    discretize: DiscretizeSpec = Field(default_factory=DiscretizeSpec)
    onestep: bool = False
    multipass: bool = False
    include_rank_density: bool = False
    xi: XiMode = "full"
    baseline: str = "bvn"
    candidates: str | None = None


class CandidateSetsPayload(BaseModel):
    positive: list[str] = Field(min_length=1)
    negative: list[str] = Field(min_length=1)
    positive_continuous: list[str] = Field(default_factory=list)
    negative_continuous: list[str] = Field(default_factory=list)


class PresetMargin(BaseModel):
    """Margin of a simulated column.

    Ordinal margins take ``probabilities`` (or ``categories`` equal ones);
    count margins take ``mu`` and ``xi``; continuous columns stay uniform.
    """

    kind: VariableKindName
    categories: int | None = Field(default=None, ge=2)
    probabilities: list[float] | None = None
    mu: float | None = Field(default=None, gt=0.0)
    xi: float = Field(default=0.0, ge=0.0)


class PresetLink(BaseModel):
    copula: str
    tau: float | None = Field(default=None, gt=-1.0, lt=1.0)
    params: list[float] | None = None


class PresetVariable(BaseModel):
    name: str
    margin: PresetMargin
    f1: PresetLink
    f2: PresetLink | None = None


class ScenarioPreset(BaseModel):
    name: str
    description: str = ""
    reconstructed: bool = True
    factors: Literal[1, 2] = 1
    n: int = Field(default=500, ge=10)
    reps: int = Field(default=500, ge=1)
    variables: list[PresetVariable] = Field(min_length=2)


class PresetCollection(BaseModel):
    presets: list[ScenarioPreset] = Field(min_length=1)


class LinkReport(BaseModel):
    copula: str
    params: list[float]
    tau: float
    se: list[float | None] | None = None
    se_tau: float | None = None


class MarginReport(BaseModel):
    kind: Literal["empirical", "ordinal_probit", "negbin"]
    n: int | None = None
    cutpoints: list[float] | None = None
    levels: list[int] | None = None
    mu: float | None = None
    xi: float | None = None


class VariableReport(BaseModel):
    name: str
    kind: VariableKindName
    margin: MarginReport
    f1: LinkReport
    f2: LinkReport | None = None


class FitReport(BaseModel):
    """Serialized FitResult.

    Attributes:
        schema_version: Report schema version.
        factors: Number of latent factors.
        n: Number of observations.
        loglik: Log-likelihood on the copula scale.
        aic: -2 loglik + 2 free_params.
        free_params: Free parameters counted in the AIC.
        iterations: Optimizer iterations.
        converged: Whether the optimizer reported convergence.
        onestep: Whether discrete margins were estimated jointly.
        flags: Non-fatal conditions met during the fit.
        variables: Per-variable margin and links.
        loadings: Rotated loadings of a 2-factor BVN model.
        fixed: Flat mask of parameters held fixed (f1 then f2).
    """

    schema_version: int = REPORT_SCHEMA_VERSION
    factors: Literal[1, 2]
    n: int
    loglik: float
    aic: float
    free_params: int
    iterations: int
    converged: bool
    onestep: bool = False
    message: str = ""
    flags: list[str] = Field(default_factory=list)
    variables: list[VariableReport]
    loadings: list[list[float]] | None = None
    fixed: list[bool] | None = None
