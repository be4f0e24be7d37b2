"""Univariate margins and first-stage estimation.

Continuous columns use the rank-based empirical CDF, ordinal columns a probit
cutpoint model, counts a negative binomial with the Poisson limit at zero
dispersion.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import ndtr, ndtri
from scipy.stats import nbinom, poisson, rankdata

from .copulas.base import EPS
from .dataset import MixedDataset, VariableKind
from .errors import DataError, DegenerateMarginError, ParameterDomainError

logger = logging.getLogger(__name__)

COUNT_QUANTILE_CAP = 10_000
_LOG_XI_BOUNDS = (math.log(1e-8), math.log(1e3))


class MarginModel:
    """Base class for fitted univariate margins."""

    kind: ClassVar[VariableKind] = "continuous"

    @property
    def param_count(self) -> int:
        return 0

    def cdf(self, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def cdf_prev(self, values: np.ndarray) -> np.ndarray:
        """F(y-1) for discrete margins; equals cdf for continuous ones."""
        return self.cdf(values)

    def quantile(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def unconstrained(self) -> np.ndarray:
        return np.zeros(0)

    def from_unconstrained(self, z: Sequence[float]) -> MarginModel:
        return self

    def describe(self) -> dict[str, object]:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class EmpiricalMargin(MarginModel):
    """Rank-based empirical CDF, F(y) = average rank / (n + 1).

    With ``sorted_values`` unset the margin is the identity on (0, 1), used
    when a simulated continuous column stays on the uniform scale.
    """

    sorted_values: np.ndarray | None = None

    kind: ClassVar[VariableKind] = "continuous"

    @classmethod
    def uniform(cls) -> EmpiricalMargin:
        return cls(None)

    def cdf(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if self.sorted_values is None:
            return np.clip(values, EPS, 1.0 - EPS)
        data = self.sorted_values
        left = np.searchsorted(data, values, side="left")
        right = np.searchsorted(data, values, side="right")
        # ties share the average of ranks left+1..right
        return (left + right + 1) / 2.0 / (data.shape[0] + 1)

    def quantile(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.sorted_values is None:
            return p
        n = self.sorted_values.shape[0]
        idx = np.clip(np.ceil(p * (n + 1)).astype(int) - 1, 0, n - 1)
        return self.sorted_values[idx]

    def describe(self) -> dict[str, object]:
        size = 0 if self.sorted_values is None else int(self.sorted_values.shape[0])
        return {"kind": "empirical", "n": size}


@dataclass(frozen=True)
class OrdinalMargin(MarginModel):
    """Probit cutpoint model: P(Y <= k) = Phi(alpha_k), alpha_0 = -inf, alpha_K = +inf.

    Attributes:
        cutpoints: Strictly increasing alpha_1..alpha_{K-1}.
        levels: Observed labels in category order; data values are mapped
            through them, so collapsed empty categories keep their labels.
    """

    cutpoints: tuple[float, ...]
    levels: tuple[int, ...]

    kind: ClassVar[VariableKind] = "ordinal"

    def __post_init__(self) -> None:
        cuts = np.asarray(self.cutpoints, dtype=float)
        if cuts.size < 1 or not np.all(np.diff(cuts) > 0) or not np.all(np.isfinite(cuts)):
            raise ParameterDomainError(f"Ordinal cutpoints must be finite and increasing: {self.cutpoints!r}")
        if len(self.levels) != cuts.size + 1:
            raise ParameterDomainError(
                f"Ordinal margin has {len(self.levels)} levels for {cuts.size} cutpoints"
            )

    @property
    def categories(self) -> int:
        return len(self.levels)

    @property
    def param_count(self) -> int:
        return len(self.cutpoints)

    def cumulative(self) -> np.ndarray:
        """(0, F(1), ..., F(K-1), 1)."""
        return np.concatenate(([0.0], ndtr(np.asarray(self.cutpoints)), [1.0]))

    def pmf(self) -> np.ndarray:
        return np.diff(self.cumulative())

    def index(self, values: np.ndarray) -> np.ndarray:
        """Map data labels to internal categories 1..K.

        Raises:
            DataError: If a label is not a level of this margin.
        """
        values = np.asarray(values)
        levels = np.asarray(self.levels)
        idx = np.searchsorted(levels, values)
        bad = (idx >= levels.size) | (levels[np.minimum(idx, levels.size - 1)] != values)
        if np.any(bad):
            raise DataError(f"Unknown ordinal category {values[np.flatnonzero(bad)[0]]!r}")
        return idx + 1

    def cdf(self, values: np.ndarray) -> np.ndarray:
        return self.cumulative()[self.index(values)]

    def cdf_prev(self, values: np.ndarray) -> np.ndarray:
        return self.cumulative()[self.index(values) - 1]

    def quantile(self, p: np.ndarray) -> np.ndarray:
        cum = ndtr(np.asarray(self.cutpoints))
        k = np.searchsorted(cum, np.asarray(p, dtype=float), side="left")
        return np.asarray(self.levels)[k]

    def loglik(self, values: np.ndarray) -> float:
        probs = self.pmf()[self.index(values) - 1]
        return float(np.sum(np.log(probs)))

    def unconstrained(self) -> np.ndarray:
        cuts = np.asarray(self.cutpoints)
        return np.concatenate((cuts[:1], np.log(np.diff(cuts))))

    def from_unconstrained(self, z: Sequence[float]) -> OrdinalMargin:
        z = np.asarray(z, dtype=float)
        cuts = np.cumsum(np.concatenate((z[:1], np.exp(z[1:]))))
        return OrdinalMargin(tuple(cuts.tolist()), self.levels)

    def describe(self) -> dict[str, object]:
        return {"kind": "ordinal_probit", "cutpoints": list(self.cutpoints), "levels": list(self.levels)}


@dataclass(frozen=True)
class NegBinMargin(MarginModel):
    """Negative binomial with mean mu and dispersion xi (variance mu + xi mu^2).

    xi = 0 is the Poisson limit.
    """

    mu: float
    xi: float = 0.0

    kind: ClassVar[VariableKind] = "count"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mu) and self.mu > 0.0):
            raise ParameterDomainError(f"Negative binomial mean must be > 0, got {self.mu!r}")
        if not (math.isfinite(self.xi) and self.xi >= 0.0):
            raise ParameterDomainError(f"Negative binomial dispersion must be >= 0, got {self.xi!r}")

    @property
    def is_poisson(self) -> bool:
        return self.xi == 0.0

    @property
    def param_count(self) -> int:
        return 1 if self.is_poisson else 2

    def _dist(self):
        if self.is_poisson:
            return poisson(self.mu)
        size = 1.0 / self.xi
        return nbinom(size, size / (size + self.mu))

    def _check(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if np.any(values < 0) or np.any(values != np.round(values)):
            bad = values[(values < 0) | (values != np.round(values))][0]
            raise DataError(f"Count value {bad!r} outside support 0, 1, 2, ...")
        return values

    def pmf(self, values: np.ndarray) -> np.ndarray:
        return self._dist().pmf(np.asarray(values, dtype=float))

    def cdf(self, values: np.ndarray) -> np.ndarray:
        """P(Y <= y); zero below the support, non-integer values are rejected."""
        values = np.asarray(values, dtype=float)
        if np.any(values != np.round(values)):
            bad = values[values != np.round(values)][0]
            raise DataError(f"Count value {bad!r} is not an integer")
        return np.where(values < 0, 0.0, self._dist().cdf(np.maximum(values, 0.0)))

    def cdf_prev(self, values: np.ndarray) -> np.ndarray:
        return self.cdf(self._check(values) - 1.0)

    def quantile(self, p: np.ndarray) -> np.ndarray:
        values = self._dist().ppf(np.clip(np.asarray(p, dtype=float), 0.0, 1.0 - 1e-15))
        if np.any(values > COUNT_QUANTILE_CAP):
            logger.warning("Count quantile capped at %d", COUNT_QUANTILE_CAP)
        return np.minimum(values, COUNT_QUANTILE_CAP)

    def loglik(self, values: np.ndarray) -> float:
        return float(np.sum(self._dist().logpmf(self._check(values))))

    def unconstrained(self) -> np.ndarray:
        if self.is_poisson:
            return np.array([math.log(self.mu)])
        return np.array([math.log(self.mu), math.log(self.xi)])

    def from_unconstrained(self, z: Sequence[float]) -> NegBinMargin:
        z = np.asarray(z, dtype=float)
        if self.is_poisson:
            return NegBinMargin(float(np.exp(z[0])), 0.0)
        return NegBinMargin(float(np.exp(z[0])), float(np.exp(z[1])))

    def describe(self) -> dict[str, object]:
        return {"kind": "negbin", "mu": self.mu, "xi": self.xi}


@dataclass(frozen=True, eq=False)
class UniformScores:
    """Copula-scale data.

    Attributes:
        upper: F_j(y_ij), shape (n, d), clamped to (0, 1).
        lower: F_j(y_ij - 1) for discrete columns; equals ``upper`` for continuous.
        discrete: Whether each column is discrete.
    """

    upper: np.ndarray
    lower: np.ndarray
    discrete: tuple[bool, ...]

    @property
    def n(self) -> int:
        return int(self.upper.shape[0])

    @property
    def d(self) -> int:
        return int(self.upper.shape[1])

    def rows(self, index: slice | np.ndarray) -> UniformScores:
        return UniformScores(self.upper[index], self.lower[index], self.discrete)

    def permute(self, order: Sequence[int]) -> UniformScores:
        order = list(order)
        return UniformScores(
            self.upper[:, order], self.lower[:, order], tuple(self.discrete[j] for j in order)
        )


@dataclass(frozen=True)
class CountMarginComparison:
    negbin_loglik: float
    negbin_aic: float
    poisson_loglik: float
    poisson_aic: float

    @property
    def preferred(self) -> str:
        return "negbin" if self.negbin_aic < self.poisson_aic else "poisson"


def fit_empirical(column: np.ndarray, name: str = "column") -> EmpiricalMargin:
    """Fit the rank-based empirical CDF.

    Raises:
        DegenerateMarginError: If the column has fewer than 2 values or no variation.
    """
    column = np.asarray(column, dtype=float)
    if column.size < 2:
        raise DegenerateMarginError(f"Column {name!r} needs at least 2 observations")
    if not np.all(np.isfinite(column)):
        raise DataError(f"Column {name!r} has non-finite values")
    if np.ptp(column) == 0.0:
        raise DegenerateMarginError(f"Column {name!r} is constant")
    return EmpiricalMargin(np.sort(column))


def empirical_scores(column: np.ndarray) -> np.ndarray:
    """Average rank / (n + 1)."""
    column = np.asarray(column, dtype=float)
    return rankdata(column, method="average") / (column.size + 1)


def fit_ordinal(column: np.ndarray, name: str = "column") -> OrdinalMargin:
    """Cutpoints at the normal quantiles of cumulative sample proportions.

    Unobserved categories are dropped and the remaining labels re-indexed in
    order, with a warning.

    Raises:
        DegenerateMarginError: If fewer than 2 distinct categories are observed.
    """
    column = np.asarray(column)
    levels, counts = np.unique(column.astype(int), return_counts=True)
    if levels.size < 2:
        raise DegenerateMarginError(f"Ordinal column {name!r} has fewer than 2 observed categories")
    expected = np.arange(1, levels.max() + 1)
    if levels.size != expected.size or np.any(levels != expected):
        missing = sorted(set(expected.tolist()) - set(levels.tolist()))
        logger.warning(
            "Ordinal column %r: empty categories %s collapsed, K=%d", name, missing, levels.size
        )
    cumulative = np.cumsum(counts)[:-1] / column.size
    cutpoints = ndtri(cumulative)
    return OrdinalMargin(tuple(float(c) for c in cutpoints), tuple(int(v) for v in levels))


def _negbin_loglik(values: np.ndarray, mu: float, xi: float) -> float:
    return NegBinMargin(mu, xi).loglik(values)


def fit_negbin(column: np.ndarray, name: str = "column") -> NegBinMargin:
    """Maximum likelihood negative binomial.

    The mean estimate is the sample mean (score equation); the dispersion is
    profiled on the log scale. Data without overdispersion give the Poisson
    limit.

    Raises:
        DataError: If values are negative or non-integer.
        DegenerateMarginError: If all counts are zero.
    """
    column = np.asarray(column, dtype=float)
    if column.size < 2:
        raise DegenerateMarginError(f"Count column {name!r} needs at least 2 observations")
    if np.any(column < 0) or np.any(column != np.round(column)):
        raise DataError(f"Count column {name!r} must hold nonnegative integers")
    mu = float(column.mean())
    if mu <= 0.0:
        raise DegenerateMarginError(f"Count column {name!r} is all zero")
    if column.var(ddof=1) <= mu:
        logger.debug("Count column %r not overdispersed, using Poisson limit", name)
        return NegBinMargin(mu, 0.0)
    result = minimize_scalar(
        lambda log_xi: -_negbin_loglik(column, mu, math.exp(log_xi)),
        bounds=_LOG_XI_BOUNDS,
        method="bounded",
        options={"xatol": 1e-8},
    )
    xi = math.exp(float(result.x))
    if xi <= 1e-7 or -result.fun <= _negbin_loglik(column, mu, 0.0):
        return NegBinMargin(mu, 0.0)
    return NegBinMargin(mu, xi)


def compare_count_margins(column: np.ndarray, name: str = "column") -> CountMarginComparison:
    """Negative binomial against Poisson by AIC."""
    column = np.asarray(column, dtype=float)
    nb = fit_negbin(column, name)
    pois = NegBinMargin(float(column.mean()), 0.0)
    nb_ll = nb.loglik(column)
    pois_ll = pois.loglik(column)
    return CountMarginComparison(
        negbin_loglik=nb_ll,
        negbin_aic=-2.0 * nb_ll + 2.0 * nb.param_count,
        poisson_loglik=pois_ll,
        poisson_aic=-2.0 * pois_ll + 2.0,
    )


def fit_margin(column: np.ndarray, kind: VariableKind, name: str = "column") -> MarginModel:
    if kind == "continuous":
        return fit_empirical(column, name)
    if kind == "ordinal":
        return fit_ordinal(column, name)
    if kind == "count":
        return fit_negbin(column, name)
    raise DataError(f"Column {name!r} has unknown kind {kind!r}")


def fit_margins(dataset: MixedDataset) -> tuple[MarginModel, ...]:
    """First stage: fit every column independently."""
    return tuple(
        fit_margin(dataset.column(j), dataset.kinds[j], dataset.names[j]) for j in range(dataset.d)
    )


def to_uniform(margins: Sequence[MarginModel], dataset: MixedDataset) -> UniformScores:
    """Transform data to the copula scale.

    Raises:
        DataError: On shape mismatch or values outside a margin's support.
    """
    if len(margins) != dataset.d:
        raise DataError(f"Got {len(margins)} margins for {dataset.d} columns")
    upper = np.empty((dataset.n, dataset.d))
    lower = np.empty((dataset.n, dataset.d))
    discrete = []
    for j, margin in enumerate(margins):
        if margin.kind != dataset.kinds[j]:
            raise DataError(
                f"Column {dataset.names[j]!r} is {dataset.kinds[j]} but margin is {margin.kind}"
            )
        column = dataset.column(j)
        try:
            upper[:, j] = margin.cdf(column)
            lower[:, j] = margin.cdf_prev(column)
        except DataError as exc:
            raise DataError(f"Column {dataset.names[j]!r}: {exc}") from exc
        discrete.append(margin.kind != "continuous")
    upper = np.clip(upper, EPS, 1.0 - EPS)
    lower = np.where(np.asarray(discrete)[None, :], np.clip(lower, 0.0, 1.0 - EPS), upper)
    return UniformScores(upper=upper, lower=lower, discrete=tuple(discrete))
