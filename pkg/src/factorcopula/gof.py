"""Model comparison and goodness of fit.

Vuong's test compares two fitted models on the same rows. The M2 statistic
is a quadratic form in the residuals of univariate and bivariate category
proportions of a discretized dataset, evaluated at the estimate obtained on
the undiscretized data.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from itertools import combinations
from typing import Literal

import numpy as np
from scipy.linalg import null_space
from scipy.stats import chi2

from .config import DEFAULT_NQ
from .dataset import MixedDataset
from .discretization import Discretized, discretize
from .errors import ConfigError, DataError
from .factor_model import FactorCopulaModel, FitResult, category_masses, is_bvn_2f, log_density_rows
from .margins import to_uniform
from .quadrature import latent_rule
from .schemas import DiscretizeSpec, XiMode

logger = logging.getLogger(__name__)

__all__ = [
    "M2Report",
    "VuongResult",
    "c2_matrix",
    "discretize",
    "m2",
    "max_deviation",
    "pair_deviations",
    "residual_dimension",
    "vuong",
]

C2Method = Literal["complement", "direct"]
Favored = Literal["model1", "model2", "indistinguishable"]

DELTA_STEP = 1e-4
_Z95 = 1.959963984540054


# Vuong


@dataclass(frozen=True)
class VuongResult:
    """Vuong comparison of model 2 against the baseline model 1.

    Attributes:
        mean: Mean per-row log density ratio (model 2 over model 1).
        sd: Sample standard deviation of the ratios.
        z: sqrt(n) mean / sd (0 when sd is 0).
        ci95: mean -/+ 1.96 sd / sqrt(n).
        favored: Which model the interval favors.
        n: Rows compared.
        flags: Non-fatal conditions.
    """

    mean: float
    sd: float
    z: float
    ci95: tuple[float, float]
    favored: Favored
    n: int
    flags: tuple[str, ...] = ()


def vuong(fit1: FitResult, fit2: FitResult, dataset: MixedDataset, n_q: int = DEFAULT_NQ) -> VuongResult:
    """Vuong statistic and 95% interval for model 2 against model 1.

    Each model is evaluated with its own margins on the rows of ``dataset``.
    Continuous margins are rank based in both models, so their density
    constant cancels in the ratio.
    """
    if fit1.model.d != dataset.d or fit2.model.d != dataset.d:
        raise ConfigError("Both models must describe the columns of the dataset")
    rows1 = log_density_rows(fit1.model, to_uniform(fit1.model.margins, dataset), n_q)
    rows2 = log_density_rows(fit2.model, to_uniform(fit2.model.margins, dataset), n_q)
    diffs = rows2 - rows1
    n = diffs.size
    if n < 2:
        raise DataError("Vuong comparison needs at least 2 rows")
    mean = math.fsum(diffs) / n
    sd = float(np.std(diffs, ddof=1))
    if sd == 0.0 or not math.isfinite(sd):
        return VuongResult(mean, 0.0, 0.0, (mean, mean), "indistinguishable", n, ("zero_variance",))
    half = _Z95 * sd / math.sqrt(n)
    ci = (mean - half, mean + half)
    favored: Favored = "model2" if ci[0] > 0 else "model1" if ci[1] < 0 else "indistinguishable"
    return VuongResult(mean, sd, math.sqrt(n) * mean / sd, ci, favored, n)


# M2


def residual_dimension(sizes: Sequence[int]) -> int:
    """sum_j (K_j - 1) + sum_{j1<j2} (K_j1 - 1)(K_j2 - 1)."""
    reduced = [k - 1 for k in sizes]
    return sum(reduced) + sum(a * b for a, b in combinations(reduced, 2))


@dataclass(frozen=True)
class _Layout:
    """Constraints (variable, category) for each element of the residual vector."""

    elements: tuple[tuple[tuple[int, int], ...], ...]
    pairs: tuple[tuple[int, int], ...]

    @classmethod
    def build(cls, sizes: Sequence[int]) -> _Layout:
        elements: list[tuple[tuple[int, int], ...]] = []
        for j, k in enumerate(sizes):
            elements.extend(((j, a),) for a in range(1, k))
        pairs = tuple(combinations(range(len(sizes)), 2))
        for j1, j2 in pairs:
            elements.extend(
                ((j1, a), (j2, b)) for a in range(1, sizes[j1]) for b in range(1, sizes[j2])
            )
        return cls(tuple(elements), pairs)


def _observed(categories: np.ndarray, layout: _Layout) -> np.ndarray:
    out = np.empty(len(layout.elements))
    for e, constraints in enumerate(layout.elements):
        hit = np.ones(categories.shape[0], dtype=bool)
        for j, a in constraints:
            hit &= categories[:, j] == a
        out[e] = hit.mean()
    return out


def _grid_probabilities(masses: Sequence[np.ndarray], layout: _Layout) -> np.ndarray:
    """(s, G) matrix of element probabilities conditional on each grid point."""
    rows = []
    for constraints in layout.elements:
        row = masses[constraints[0][0]][constraints[0][1] - 1]
        for j, a in constraints[1:]:
            row = row * masses[j][a - 1]
        rows.append(row)
    return np.vstack(rows)


def _pi2(model: FactorCopulaModel, cumulative: Sequence[np.ndarray], n_q: int, layout: _Layout) -> np.ndarray:
    masses, weights = category_masses(model, cumulative, latent_rule(n_q))
    return _grid_probabilities(masses, layout) @ weights


def _xi_full(masses: Sequence[np.ndarray], weights: np.ndarray, layout: _Layout) -> np.ndarray:
    """Multinomial covariance of the first and second order marginal proportions.

    E[I_e I_f] is the probability of the union of both constraint sets, zero
    when they assign different categories to one variable.
    """
    probs = _grid_probabilities(masses, layout)
    pi = probs @ weights
    second = (probs * weights) @ probs.T
    by_var = [dict(c) for c in layout.elements]
    for e, ce in enumerate(by_var):
        for f in range(e, len(by_var)):
            cf = by_var[f]
            shared = ce.keys() & cf.keys()
            if not shared:
                continue
            if any(ce[j] != cf[j] for j in shared):
                value = 0.0
            else:
                row = weights.copy()
                for j, a in {**ce, **cf}.items():
                    row = row * masses[j][a - 1]
                value = float(row.sum())
            second[e, f] = second[f, e] = value
    return second - np.outer(pi, pi)


def _delta(
    model: FactorCopulaModel, cumulative: Sequence[np.ndarray], n_q: int, layout: _Layout, step: float
) -> np.ndarray:
    """Central differences of pi2 in the free unconstrained copula parameters."""
    z = model.unconstrained()
    free = np.flatnonzero(model.free_mask())
    cols = []
    for i in free:
        up = z.copy()
        dn = z.copy()
        up[i] += step
        dn[i] -= step
        cols.append(
            (_pi2(model.with_unconstrained(up), cumulative, n_q, layout)
             - _pi2(model.with_unconstrained(dn), cumulative, n_q, layout)) / (2.0 * step)
        )
    return np.column_stack(cols) if cols else np.zeros((len(layout.elements), 0))


def _inverse(matrix: np.ndarray, flags: list[str]) -> np.ndarray:
    try:
        if np.linalg.cond(matrix) > 1e12:
            raise np.linalg.LinAlgError("ill-conditioned")
        return np.linalg.inv(matrix)
    except np.linalg.LinAlgError:
        if "pseudo_inverse" not in flags:
            flags.append("pseudo_inverse")
            logger.warning("Singular matrix in M2 weight, using pseudo-inverse")
        return np.linalg.pinv(matrix)


def c2_matrix(
    delta: np.ndarray, xi: np.ndarray, method: C2Method = "complement", flags: list[str] | None = None
) -> np.ndarray:
    """Weight matrix of the M2 quadratic form.

    "complement": D (D' Xi D)^-1 D' with D an orthonormal basis of the
    orthogonal complement of the columns of ``delta``.
    "direct": Xi^-1 - Xi^-1 Delta (Delta' Xi^-1 Delta)^-1 Delta' Xi^-1.
    """
    flags = flags if flags is not None else []
    if method == "complement":
        comp = null_space(delta.T) if delta.shape[1] else np.eye(delta.shape[0])
        return comp @ _inverse(comp.T @ xi @ comp, flags) @ comp.T
    if method == "direct":
        xi_inv = _inverse(xi, flags)
        if delta.shape[1] == 0:
            return xi_inv
        a = xi_inv @ delta
        return xi_inv - a @ _inverse(delta.T @ a, flags) @ a.T
    raise ConfigError(f"Unknown C2 method {method!r}")


@dataclass(frozen=True, eq=False)
class M2Report:
    """M2 statistic with its degrees of freedom and per-pair deviations.

    Attributes:
        statistic: M2 value.
        s_dim: Dimension of the residual vector.
        q: Free copula parameters.
        df: s_dim minus the rank of the derivative matrix.
        p_value: Upper chi-square tail probability.
        sizes: Category counts K_j.
        strategies: Discretization strategy per column.
        deviations: (d, d) matrix of n max |observed - expected| per pair.
        xi: Covariance mode used.
        flags: Non-fatal conditions.
    """

    statistic: float
    s_dim: int
    q: int
    df: int
    p_value: float
    sizes: tuple[int, ...]
    strategies: tuple[str, ...]
    deviations: np.ndarray
    xi: XiMode = "full"
    flags: tuple[str, ...] = field(default=())

    def to_payload(self, names: Sequence[str]) -> dict[str, object]:
        d = len(names)
        return {
            "statistic": self.statistic,
            "s_dim": self.s_dim,
            "q": self.q,
            "df": self.df,
            "p_value": self.p_value,
            "xi": self.xi,
            "discretization": [
                {"name": names[j], "categories": self.sizes[j], "strategy": self.strategies[j]}
                for j in range(d)
            ],
            "pair_deviations": [
                {"pair": [names[a], names[b]], "deviation": float(self.deviations[a, b])}
                for a, b in combinations(range(d), 2)
            ],
            "flags": list(self.flags),
        }


def _cumulative(model: FactorCopulaModel, disc: Discretized) -> list[np.ndarray]:
    return [col.model_cumulative(model.margins[j]) for j, col in enumerate(disc.columns)]


def _pair_deviation_matrix(
    model: FactorCopulaModel, disc: Discretized, cumulative: Sequence[np.ndarray], n_q: int
) -> np.ndarray:
    masses, weights = category_masses(model, cumulative, latent_rule(n_q))
    cats = disc.categories
    n, d = cats.shape
    out = np.zeros((d, d))
    for j1, j2 in combinations(range(d), 2):
        k1, k2 = disc.sizes[j1], disc.sizes[j2]
        observed = np.zeros((k1, k2))
        np.add.at(observed, (cats[:, j1] - 1, cats[:, j2] - 1), 1.0 / n)
        expected = (masses[j1] * weights) @ masses[j2].T
        out[j1, j2] = out[j2, j1] = n * float(np.max(np.abs(observed - expected)))
    return out


def pair_deviations(
    fit: FitResult, dataset: MixedDataset, spec: DiscretizeSpec | None = None, n_q: int = DEFAULT_NQ
) -> np.ndarray:
    """n max over cells |observed proportion - model probability| for each pair of columns."""
    disc = discretize(dataset, spec, fit.model.margins)
    return _pair_deviation_matrix(fit.model, disc, _cumulative(fit.model, disc), n_q)


def max_deviation(deviations: np.ndarray) -> tuple[int, int, float]:
    """Pair with the largest deviation."""
    upper = np.triu(deviations, 1)
    a, b = np.unravel_index(int(np.argmax(upper)), upper.shape)
    return int(a), int(b), float(upper[a, b])


def m2(
    fit: FitResult,
    dataset: MixedDataset,
    spec: DiscretizeSpec | None = None,
    *,
    xi: XiMode = "full",
    method: C2Method = "complement",
    n_q: int = DEFAULT_NQ,
) -> M2Report:
    """Limited-information M2 statistic of a fitted model.

    The model keeps the estimate from the undiscretized data; only the
    residuals are computed on the discretized dataset. Model probabilities
    come from the factor quadrature, derivatives by central differences on
    the unconstrained scale.

    Raises:
        ConfigError: If the discretization leaves no degrees of freedom.
    """
    model = fit.model
    disc = discretize(dataset, spec, model.margins)
    flags = list(disc.flags)
    sizes = disc.sizes
    layout = _Layout.build(sizes)
    s_dim = residual_dimension(sizes)
    cumulative = _cumulative(model, disc)
    masses, weights = category_masses(model, cumulative, latent_rule(n_q))
    pi = _grid_probabilities(masses, layout) @ weights
    p = _observed(disc.categories, layout)
    if xi == "full":
        xi_matrix = _xi_full(masses, weights, layout)
    else:
        xi_matrix = np.diag(pi) - np.outer(pi, pi)
    delta = _delta(model, cumulative, n_q, layout, DELTA_STEP)
    q = model.free_param_count
    rank = int(np.linalg.matrix_rank(delta)) if q else 0
    if rank < q:
        if is_bvn_2f(model):
            logger.info("2-factor BVN model: derivative rank %d for %d parameters", rank, q)
        else:
            flags.append("delta_rank_deficient")
            logger.warning("Derivative matrix has rank %d < %d, adjusting df", rank, q)
    df = s_dim - rank
    if df < 1:
        raise ConfigError(f"M2 has no degrees of freedom: s={s_dim}, rank={rank}")
    c2 = c2_matrix(delta, xi_matrix, method, flags)
    resid = p - pi
    statistic = float(dataset.n * resid @ c2 @ resid)
    if statistic < 0.0:
        logger.warning("Negative M2 %.3g clipped to 0", statistic)
        statistic = 0.0
    deviations = _pair_deviation_matrix(model, disc, cumulative, n_q)
    logger.info("M2=%.3f on %d df (s=%d, q=%d)", statistic, df, s_dim, q)
    return M2Report(
        statistic=statistic,
        s_dim=s_dim,
        q=q,
        df=df,
        p_value=float(chi2.sf(statistic, df)),
        sizes=sizes,
        strategies=tuple(col.strategy for col in disc.columns),
        deviations=deviations,
        xi=xi,
        flags=tuple(flags),
    )
