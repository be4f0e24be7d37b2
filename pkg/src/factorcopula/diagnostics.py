"""Dependence diagnostics for mixed data.

Hybrid correlation matrices (normal-score Pearson, polychoric, polyserial),
sample and population semi-correlations, and discrepancy between the observed
correlation matrix and linear factor-analysis fits.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import ndtr, ndtri
from scipy.stats import rankdata

from .copulas import LinkingCopula, Variant, bvn_cdf
from .dataset import MixedDataset
from .discretization import discretize
from .errors import DataError, NumericalError
from .quadrature import composite
from .schemas import DiscretizeSpec

logger = logging.getLogger(__name__)

EstimatorKind = Literal["normal_scores", "polychoric", "polyserial"]

MIN_QUADRANT_POINTS = 10
HEYWOOD_BOUND = 0.005
PD_EIGEN_FLOOR = 1e-6
_RHO_LIMIT = 0.9999
_Z_MAX = 8.3
_SURVIVAL_OF = {
    Variant.NONE: Variant.SURVIVAL,
    Variant.SURVIVAL: Variant.NONE,
    Variant.REFLECT_FIRST: Variant.REFLECT_SECOND,
    Variant.REFLECT_SECOND: Variant.REFLECT_FIRST,
}
_SECOND_REFLECTION_OF = {
    Variant.NONE: Variant.REFLECT_SECOND,
    Variant.REFLECT_SECOND: Variant.NONE,
    Variant.SURVIVAL: Variant.REFLECT_FIRST,
    Variant.REFLECT_FIRST: Variant.SURVIVAL,
}


def normal_scores(column: np.ndarray) -> np.ndarray:
    """Phi^-1(rank / (n + 1)) with average ranks."""
    column = np.asarray(column, dtype=float)
    return ndtri(rankdata(column, method="average") / (column.size + 1))


# Pairwise estimators


def _thresholds(categories: np.ndarray) -> np.ndarray:
    """Latent normal thresholds (-inf, a_1, ..., a_{K-1}, inf) from cumulative proportions."""
    _, counts = np.unique(categories, return_counts=True)
    cum = np.cumsum(counts)[:-1] / categories.size
    return np.concatenate(([-np.inf], ndtri(cum), [np.inf]))


def _dense_codes(categories: np.ndarray) -> np.ndarray:
    _, inverse = np.unique(categories, return_inverse=True)
    return inverse


def polychoric(x: np.ndarray, y: np.ndarray) -> tuple[float, bool]:
    """Polychoric correlation of two ordinal columns by maximum likelihood.

    Thresholds are fixed at the marginal cumulative proportions; the
    correlation maximizes the multinomial likelihood of the contingency table
    of bivariate normal rectangle probabilities.

    Returns:
        The estimate and whether the optimizer converged.
    """
    a = _thresholds(x)
    b = _thresholds(y)
    ix = _dense_codes(x)
    iy = _dense_codes(y)
    table = np.zeros((a.size - 1, b.size - 1))
    np.add.at(table, (ix, iy), 1.0)
    aa, bb = np.meshgrid(np.clip(a, -38.0, 38.0), np.clip(b, -38.0, 38.0), indexing="ij")

    def negll(rho: float) -> float:
        cdf = bvn_cdf(aa, bb, rho)
        probs = cdf[1:, 1:] - cdf[:-1, 1:] - cdf[1:, :-1] + cdf[:-1, :-1]
        return -float(np.sum(table * np.log(np.maximum(probs, 1e-300))))

    result = minimize_scalar(negll, bounds=(-_RHO_LIMIT, _RHO_LIMIT), method="bounded",
                             options={"xatol": 1e-8})
    return float(result.x), bool(result.success)


def polyserial(z: np.ndarray, y: np.ndarray) -> tuple[float, bool]:
    """Polyserial correlation between normal scores ``z`` and an ordinal column.

    Maximizes sum_i log[Phi((a_{y_i} - rho z_i)/s) - Phi((a_{y_i - 1} - rho z_i)/s)],
    s = sqrt(1 - rho^2), the part of the likelihood that depends on rho.
    """
    a = _thresholds(y)
    iy = _dense_codes(y)
    upper = a[iy + 1]
    lower = a[iy]
    z = np.asarray(z, dtype=float)

    def negll(rho: float) -> float:
        s = math.sqrt(1.0 - rho * rho)
        probs = ndtr((upper - rho * z) / s) - ndtr((lower - rho * z) / s)
        return -float(np.sum(np.log(np.maximum(probs, 1e-300))))

    result = minimize_scalar(negll, bounds=(-_RHO_LIMIT, _RHO_LIMIT), method="bounded",
                             options={"xatol": 1e-8})
    return float(result.x), bool(result.success)


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    if np.std(x) == 0.0 or np.std(y) == 0.0:
        return float("nan")
    return float(np.corrcoef(x, y)[0, 1])


@dataclass(frozen=True)
class _Column:
    """A column prepared for pairwise estimation."""

    continuous: bool
    scores: np.ndarray
    categories: np.ndarray | None


def _prepare(dataset: MixedDataset, spec: DiscretizeSpec | None) -> list[_Column]:
    """Continuous columns as normal scores; ordinal and count columns as categories.

    Counts are categorized with the count strategy of ``spec``. Discrete
    scores sit at the latent midpoint Phi^-1((F(y-1) + F(y))/2).
    """
    cats = discretize(dataset, spec).categories
    columns = []
    for j, kind in enumerate(dataset.kinds):
        if kind == "continuous":
            columns.append(_Column(True, normal_scores(dataset.column(j)), None))
            continue
        c = cats[:, j]
        codes = _dense_codes(c)
        _, counts = np.unique(c, return_counts=True)
        cum = np.concatenate(([0.0], np.cumsum(counts) / c.size))
        mid = 0.5 * (cum[codes] + cum[codes + 1])
        columns.append(_Column(False, ndtri(mid), c))
    return columns


def _pair_estimate(a: _Column, b: _Column) -> tuple[float, EstimatorKind, bool]:
    if a.continuous and b.continuous:
        return _pearson(a.scores, b.scores), "normal_scores", True
    if a.continuous or b.continuous:
        cont, disc = (a, b) if a.continuous else (b, a)
        assert disc.categories is not None
        rho, ok = polyserial(cont.scores, disc.categories)
        return rho, "polyserial", ok
    assert a.categories is not None and b.categories is not None
    rho, ok = polychoric(a.categories, b.categories)
    return rho, "polychoric", ok


@dataclass(frozen=True, eq=False)
class HybridCorrMatrix:
    """Correlation matrix mixing normal-score, polychoric and polyserial estimates.

    Attributes:
        matrix: Symmetric (d, d) matrix with unit diagonal.
        estimators: Estimator used for each pair (diagonal entries are "").
        positive_definite: Whether the matrix is positive definite.
        names: Column names.
        flags: Pairs that fell back to normal-score Pearson.
    """

    matrix: np.ndarray
    estimators: tuple[tuple[str, ...], ...]
    positive_definite: bool
    names: tuple[str, ...]
    flags: tuple[str, ...] = field(default=())


def hybrid_correlation(dataset: MixedDataset, spec: DiscretizeSpec | None = None) -> HybridCorrMatrix:
    """Pairwise latent correlations for mixed data.

    Raises:
        DataError: If there are fewer than 10 rows or a discrete column has one category.
    """
    if dataset.n < 10:
        raise DataError(f"Need at least 10 rows for correlations, got {dataset.n}")
    columns = _prepare(dataset, spec)
    for j, col in enumerate(columns):
        if col.categories is not None and np.unique(col.categories).size < 2:
            raise DataError(f"Column {dataset.names[j]!r} has a single observed category")
    d = dataset.d
    matrix = np.eye(d)
    kinds = [[""] * d for _ in range(d)]
    flags: list[str] = []
    for i in range(d):
        for k in range(i + 1, d):
            rho, kind, ok = _pair_estimate(columns[i], columns[k])
            if not ok or not math.isfinite(rho):
                flags.append(f"{dataset.names[i]}-{dataset.names[k]}: {kind} fell back to normal scores")
                logger.warning("%s estimate for (%s, %s) failed, using normal scores",
                               kind, dataset.names[i], dataset.names[k])
                rho = _pearson(columns[i].scores, columns[k].scores)
                kind = "normal_scores"
            matrix[i, k] = matrix[k, i] = float(np.clip(rho, -1.0, 1.0))
            kinds[i][k] = kinds[k][i] = kind
    return HybridCorrMatrix(
        matrix=matrix,
        estimators=tuple(tuple(row) for row in kinds),
        positive_definite=bool(np.linalg.eigvalsh(matrix).min() > 0.0),
        names=dataset.names,
        flags=tuple(flags),
    )


# Semi-correlations


@dataclass(frozen=True)
class SemiCorrelation:
    """Overall correlation and the two quadrant correlations of one pair.

    For positively correlated pairs ``lower``/``upper`` are the joint lower and
    upper quadrants; for negatively correlated ones ``discordant`` is True and
    they are the (low, high) and (high, low) quadrants.
    """

    pair: tuple[str, str]
    rho: float
    lower: float | None
    upper: float | None
    discordant: bool = False
    excluded: bool = False
    flags: tuple[str, ...] = ()


def _subsample_estimate(a: _Column, b: _Column, rows: np.ndarray) -> float | None:
    if rows.sum() < MIN_QUADRANT_POINTS:
        return None
    sub_a = _Column(a.continuous, a.scores[rows], None if a.categories is None else a.categories[rows])
    sub_b = _Column(b.continuous, b.scores[rows], None if b.categories is None else b.categories[rows])
    for col in (sub_a, sub_b):
        if col.categories is not None and np.unique(col.categories).size < 2:
            return None
    if sub_a.continuous and sub_b.continuous:
        value = _pearson(sub_a.scores, sub_b.scores)
        return value if math.isfinite(value) else None
    rho, _, _ = _pair_estimate(sub_a, sub_b)
    return rho if math.isfinite(rho) else None


def sample_semicorrelations(
    dataset: MixedDataset, pair: tuple[int, int], spec: DiscretizeSpec | None = None
) -> SemiCorrelation:
    """Correlation of one pair overall and within two quadrants of the latent scores.

    Quadrant membership uses normal scores (continuous) or latent category
    midpoints (discrete). Each quadrant estimate re-applies the estimator of
    the pair's kinds to the rows in the quadrant. Pairs with a binary column
    are excluded; sparse quadrants give None with a flag.
    """
    i, k = pair
    names = (dataset.names[i], dataset.names[k])
    columns = _prepare(dataset, spec)
    a, b = columns[i], columns[k]
    rho, _, _ = _pair_estimate(a, b)
    for col in (a, b):
        if col.categories is not None and np.unique(col.categories).size <= 2:
            return SemiCorrelation(names, rho, None, None, excluded=True, flags=("binary",))
    discordant = rho < 0.0
    if discordant:
        lower_rows = (a.scores < 0) & (b.scores > 0)
        upper_rows = (a.scores > 0) & (b.scores < 0)
    else:
        lower_rows = (a.scores < 0) & (b.scores < 0)
        upper_rows = (a.scores > 0) & (b.scores > 0)
    lower = _subsample_estimate(a, b, lower_rows)
    upper = _subsample_estimate(a, b, upper_rows)
    flags = []
    if lower is None:
        flags.append("sparse_lower_quadrant")
    if upper is None:
        flags.append("sparse_upper_quadrant")
    return SemiCorrelation(names, rho, lower, upper, discordant=discordant, flags=tuple(flags))


def semicorrelation_table(dataset: MixedDataset, spec: DiscretizeSpec | None = None) -> list[SemiCorrelation]:
    return [
        sample_semicorrelations(dataset, (i, k), spec)
        for i in range(dataset.d)
        for k in range(i + 1, dataset.d)
    ]


def _upper_quadrant_correlation(copula: LinkingCopula) -> float:
    """Cor(Z1, Z2 | Z1 > 0, Z2 > 0) for normal scores of a copula.

    Moments over the quadrant are reduced to integrals of conditional
    distributions, e.g. E[Z1 Z2; Q] = int z1 phi(z1) int (1 - C_{2|1}(Phi(z2)|Phi(z1))) dz2 dz1.
    """
    rule = composite(0.0, _Z_MAX, panels=16, n_q=12)
    z = rule.nodes
    w = rule.weights
    phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    uz = ndtr(z)
    half = np.full_like(z, 0.5)
    p = float(copula.cdf(0.5, 0.5))
    if p <= 0.0:
        raise NumericalError(f"{copula.name} puts no mass in the upper quadrant")
    surv1 = 1.0 - copula.conditional(half, uz)
    surv2 = 1.0 - copula.conditional_given_second(half, uz)
    m1 = float(np.sum(w * z * phi * surv1)) / p
    m2 = float(np.sum(w * z * phi * surv2)) / p
    s1 = float(np.sum(w * z * z * phi * surv1)) / p
    s2 = float(np.sum(w * z * z * phi * surv2)) / p
    tail = 1.0 - copula.conditional(uz[None, :], uz[:, None])
    inner = tail @ w
    m12 = float(np.sum(w * z * phi * inner)) / p
    var1 = s1 - m1 * m1
    var2 = s2 - m2 * m2
    if var1 <= 0.0 or var2 <= 0.0:
        raise NumericalError(f"Degenerate quadrant variance for {copula.name}")
    return (m12 - m1 * m2) / math.sqrt(var1 * var2)


def population_semicorrelations(copula: LinkingCopula) -> tuple[float, float]:
    """Model semi-correlations (rho_lower, rho_upper) of a linking copula.

    Negatively dependent copulas report the (low, high) and (high, low)
    quadrants, signed as correlations of the original scores.

    Raises:
        NumericalError: If a quadrant integral degenerates.
    """
    if copula.tau() >= 0.0:
        survival = LinkingCopula(copula.family, _SURVIVAL_OF[copula.variant], copula.params)
        return _upper_quadrant_correlation(survival), _upper_quadrant_correlation(copula)
    flipped = LinkingCopula(copula.family, _SECOND_REFLECTION_OF[copula.variant], copula.params)
    # (Z1, -Z2): its upper quadrant is (high, low), its lower quadrant (low, high)
    flipped_survival = LinkingCopula(copula.family, _SURVIVAL_OF[flipped.variant], copula.params)
    return -_upper_quadrant_correlation(flipped_survival), -_upper_quadrant_correlation(flipped)


# Factor-analysis discrepancy


def nearest_positive_definite(matrix: np.ndarray, floor: float = PD_EIGEN_FLOOR) -> np.ndarray:
    """Clip eigenvalues at ``floor`` and rescale to a unit diagonal."""
    sym = 0.5 * (matrix + matrix.T)
    values, vectors = np.linalg.eigh(sym)
    repaired = (vectors * np.maximum(values, floor)) @ vectors.T
    scale = 1.0 / np.sqrt(np.diag(repaired))
    return repaired * np.outer(scale, scale)


def varimax(loadings: np.ndarray, normalize: bool = True, max_iter: int = 500, tol: float = 1e-10) -> np.ndarray:
    """Varimax rotation of a (d, k) loading matrix, with Kaiser row normalization."""
    loadings = np.asarray(loadings, dtype=float)
    d, k = loadings.shape
    if k < 2:
        return loadings.copy()
    norms = np.sqrt(np.sum(loadings**2, axis=1)) if normalize else np.ones(d)
    norms = np.where(norms > 0, norms, 1.0)
    a = loadings / norms[:, None]
    rotation = np.eye(k)
    criterion = 0.0
    for _ in range(max_iter):
        b = a @ rotation
        target = b**3 - b @ np.diag(np.sum(b**2, axis=0)) / d
        u, s, vt = np.linalg.svd(a.T @ target)
        rotation = u @ vt
        previous, criterion = criterion, float(np.sum(s))
        if criterion - previous < tol * max(criterion, 1.0):
            break
    return (a @ rotation) * norms[:, None]


@dataclass(frozen=True, eq=False)
class FactorAnalysisFit:
    loadings: np.ndarray
    uniquenesses: np.ndarray
    implied: np.ndarray
    heywood: bool
    converged: bool


def _loadings_given(psi: np.ndarray, corr: np.ndarray, k: int) -> np.ndarray:
    root = np.sqrt(psi)
    scaled = corr / np.outer(root, root)
    values, vectors = np.linalg.eigh(scaled)
    order = np.argsort(values)[::-1][:k]
    gain = np.sqrt(np.maximum(values[order] - 1.0, 0.0))
    return root[:, None] * vectors[:, order] * gain[None, :]


def factor_analysis(corr: np.ndarray, k: int) -> FactorAnalysisFit:
    """Maximum likelihood k-factor analysis of a correlation matrix.

    Uniquenesses are optimized within [0.005, 1] by L-BFGS-B, loadings
    profiled out by the eigen-decomposition of Psi^-1/2 R Psi^-1/2. Solutions
    at the lower bound are Heywood cases.
    """
    d = corr.shape[0]
    _, logdet_r = np.linalg.slogdet(corr)

    def discrepancy(psi: np.ndarray) -> float:
        lam = _loadings_given(psi, corr, k)
        sigma = lam @ lam.T + np.diag(psi)
        sign, logdet = np.linalg.slogdet(sigma)
        if sign <= 0:
            return 1e10
        return float(logdet + np.trace(np.linalg.solve(sigma, corr)) - logdet_r - d)

    # squared multiple correlations give the usual starting uniquenesses
    start = np.clip(1.0 / np.diag(np.linalg.inv(corr)), HEYWOOD_BOUND, 1.0)
    result = minimize(discrepancy, start, method="L-BFGS-B", bounds=[(HEYWOOD_BOUND, 1.0)] * d,
                      options={"ftol": 1e-14, "gtol": 1e-10, "maxiter": 2000})
    psi = np.asarray(result.x)
    lam = _loadings_given(psi, corr, k)
    implied = lam @ lam.T
    np.fill_diagonal(implied, 1.0)
    heywood = bool(np.any(psi <= HEYWOOD_BOUND + 1e-6))
    if heywood:
        logger.warning("Heywood case in %d-factor analysis", k)
    return FactorAnalysisFit(lam, psi, implied, heywood, bool(result.success))


@dataclass(frozen=True)
class Discrepancy:
    factors: int
    d1: float
    d2: float
    d3: float
    heywood: bool = False


@dataclass(frozen=True)
class DiscrepancyReport:
    rows: tuple[Discrepancy, ...]
    repaired: bool = False


def discrepancy_between(observed: np.ndarray, model: np.ndarray) -> tuple[float, float, float]:
    """(D1, D2, D3): max and mean absolute off-diagonal difference, and the log-det discrepancy."""
    d = observed.shape[0]
    upper = np.triu_indices(d, 1)
    diff = np.abs(observed - model)[upper]
    _, logdet_m = np.linalg.slogdet(model)
    _, logdet_o = np.linalg.slogdet(observed)
    d3 = logdet_m - logdet_o + float(np.trace(np.linalg.solve(model, observed))) - d
    return float(diff.max()), float(diff.mean()), float(d3)


def discrepancy_measures(corr: HybridCorrMatrix | np.ndarray, k_max: int) -> DiscrepancyReport:
    """Fit 1..k_max factor analyses and compare implied and observed correlations.

    A non positive definite input is repaired first (flagged in the report).
    """
    matrix = corr.matrix if isinstance(corr, HybridCorrMatrix) else np.asarray(corr, dtype=float)
    repaired = False
    if np.linalg.eigvalsh(matrix).min() <= 0.0:
        logger.warning("Correlation matrix not positive definite, repairing")
        matrix = nearest_positive_definite(matrix)
        repaired = True
    rows = []
    for k in range(1, k_max + 1):
        fa = factor_analysis(matrix, k)
        d1, d2, d3 = discrepancy_between(matrix, fa.implied)
        rows.append(Discrepancy(k, d1, d2, d3, fa.heywood))
    return DiscrepancyReport(tuple(rows), repaired)


def latent_scores(dataset: MixedDataset, spec: DiscretizeSpec | None = None) -> np.ndarray:
    """(n, d) normal scores used for quadrant plots."""
    return np.column_stack([col.scores for col in _prepare(dataset, spec)])


def quadrant_tables(dataset: MixedDataset, pairs: Sequence[tuple[int, int]] | None = None) -> list[dict[str, object]]:
    """Rows (pair, z1, z2) for plotting normal-score scatter plots."""
    scores = latent_scores(dataset)
    pairs = pairs or [(i, k) for i in range(dataset.d) for k in range(i + 1, dataset.d)]
    rows: list[dict[str, object]] = []
    for i, k in pairs:
        for z1, z2 in zip(scores[:, i], scores[:, k], strict=True):
            rows.append({"x": dataset.names[i], "y": dataset.names[k], "zx": float(z1), "zy": float(z2)})
    return rows
