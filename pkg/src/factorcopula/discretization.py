"""Ordinal categorization of continuous and count columns.

Continuous columns are mapped through their empirical CDF and cut at
k/K, k = 1..K-1. Counts are either cut into K equal-range intervals between
the observed minimum and maximum, or top-coded: each of the first `threshold`
values from the observed minimum gets its own category and every larger count
shares the last one. Categories are 1-based.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .dataset import MixedDataset, VariableKind
from .errors import ConfigError
from .margins import MarginModel, NegBinMargin, OrdinalMargin, empirical_scores
from .schemas import DiscretizeSpec

logger = logging.getLogger(__name__)

Strategy = Literal["uniform", "levels", "equal_range", "top_code"]


@dataclass(frozen=True)
class ColumnDiscretization:
    """How one column is categorized.

    Attributes:
        kind: Variable kind of the source column.
        strategy: "uniform" (continuous), "levels" (ordinal), "equal_range" or "top_code" (counts).
        categories: Number of categories K.
        cutpoints: Interior cutpoints: on the uniform scale for continuous
            columns, on the data scale for equal-range counts.
        threshold: Top-coding threshold, counted from ``start``.
        start: Smallest observed count; the first top-coded category.
    """

    kind: VariableKind
    strategy: Strategy
    categories: int
    cutpoints: tuple[float, ...] = ()
    threshold: int | None = None
    start: int = 0

    def categorize(self, values: np.ndarray, margin: MarginModel | None = None) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if self.strategy in ("uniform", "equal_range"):
            return np.searchsorted(np.asarray(self.cutpoints), values, side="left") + 1
        if self.strategy == "top_code":
            assert self.threshold is not None
            return np.clip(values - self.start, 0, self.threshold).astype(int) + 1
        if isinstance(margin, OrdinalMargin):
            return margin.index(values)
        _, inverse = np.unique(values, return_inverse=True)
        return inverse + 1

    def model_cumulative(self, margin: MarginModel) -> np.ndarray:
        """Copula-scale thresholds (0, P(cat <= 1), ..., 1) implied by ``margin``."""
        if self.strategy == "uniform":
            return np.concatenate(([0.0], np.asarray(self.cutpoints), [1.0]))
        if self.strategy == "levels":
            if not isinstance(margin, OrdinalMargin):
                raise ConfigError("Ordinal discretization needs an ordinal margin")
            return margin.cumulative()
        if not isinstance(margin, NegBinMargin):
            raise ConfigError("Count discretization needs a count margin")
        if self.strategy == "top_code":
            assert self.threshold is not None
            inner = margin.cdf(np.arange(self.start, self.start + self.threshold, dtype=float))
        else:
            inner = margin.cdf(np.floor(np.asarray(self.cutpoints)))
        return np.concatenate(([0.0], inner, [1.0]))


@dataclass(frozen=True, eq=False)
class Discretized:
    """Categorized dataset.

    Attributes:
        categories: 1-based categories, shape (n, d).
        columns: Per-column discretization.
        flags: Notes about empty categories.
    """

    categories: np.ndarray
    columns: tuple[ColumnDiscretization, ...]
    flags: tuple[str, ...] = field(default=())

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(col.categories for col in self.columns)


def uniform_cutpoints(k: int) -> tuple[float, ...]:
    if k < 2:
        raise ConfigError(f"Need at least 2 categories, got {k}")
    return tuple(i / k for i in range(1, k))


def equal_range_breaks(column: np.ndarray, k: int) -> np.ndarray:
    """K+1 equally spaced breaks from min to max."""
    column = np.asarray(column, dtype=float)
    return np.linspace(column.min(), column.max(), k + 1)


def plan_discretization(
    dataset: MixedDataset, spec: DiscretizeSpec, margins: Sequence[MarginModel] | None = None
) -> tuple[ColumnDiscretization, ...]:
    """Per-column discretization of ``dataset`` under ``spec``."""
    unknown = set(spec.categories) - set(dataset.names)
    if unknown:
        raise ConfigError(f"Discretization overrides name unknown columns: {sorted(unknown)}")
    plan: list[ColumnDiscretization] = []
    for j, kind in enumerate(dataset.kinds):
        name = dataset.names[j]
        if kind == "continuous":
            k = spec.categories.get(name, spec.continuous_categories)
            plan.append(ColumnDiscretization(kind, "uniform", k, uniform_cutpoints(k)))
        elif kind == "ordinal":
            if margins is not None and isinstance(margins[j], OrdinalMargin):
                k = margins[j].categories  # type: ignore[union-attr]
            else:
                k = int(np.unique(dataset.column(j)).size)
            plan.append(ColumnDiscretization(kind, "levels", k))
        elif spec.count_strategy == "top_code":
            t = spec.count_threshold
            start = int(dataset.column(j).min())
            plan.append(ColumnDiscretization(kind, "top_code", t + 1, threshold=t, start=start))
        else:
            k = spec.count_categories
            breaks = equal_range_breaks(dataset.column(j), k)
            plan.append(ColumnDiscretization(kind, "equal_range", k, tuple(breaks[1:-1].tolist())))
    return tuple(plan)


def discretize(
    dataset: MixedDataset,
    spec: DiscretizeSpec | None = None,
    margins: Sequence[MarginModel] | None = None,
) -> Discretized:
    """Map every column of ``dataset`` to 1-based ordinal categories.

    Continuous columns go through their empirical CDF first. Categories with
    no observations are flagged.
    """
    spec = spec or DiscretizeSpec()
    plan = plan_discretization(dataset, spec, margins)
    out = np.empty((dataset.n, dataset.d), dtype=int)
    flags: list[str] = []
    for j, column_plan in enumerate(plan):
        values = dataset.column(j)
        if column_plan.strategy == "uniform":
            values = empirical_scores(values)
        margin = margins[j] if margins is not None else None
        out[:, j] = column_plan.categorize(values, margin)
        counts = np.bincount(out[:, j], minlength=column_plan.categories + 1)[1:]
        empty = [int(k) + 1 for k in np.flatnonzero(counts == 0)]
        if empty:
            flags.append(f"{dataset.names[j]}: empty categories {empty}")
            logger.warning("Column %r has empty categories %s", dataset.names[j], empty)
    return Discretized(out, plan, tuple(flags))
