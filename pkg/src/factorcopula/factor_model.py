"""1- and 2-factor copula models for mixed data.

Given latent uniforms x (1-factor) or (x1, x2) (2-factor), the observed
variables are conditionally independent. A continuous column contributes the
linking-copula density on the copula scale; a discrete column contributes the
difference of conditional CDFs at F(y) and F(y-1). Integrals over the latent
variables use Gauss-Legendre rules and are accumulated in log space.

Estimation is two-stage by default: margins first, copula parameters by
maximum likelihood with the margins held fixed.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp
from scipy.stats import gaussian_kde

from .config import DEFAULT_CHUNK_ROWS, DEFAULT_MAX_ITER, DEFAULT_NQ, AppConfig
from .copulas import LinkingCopula, ParamBound, make_copula
from .copulas.base import Z_LIMIT
from .dataset import MixedDataset
from .diagnostics import varimax
from .errors import (
    ConfigError,
    DegenerateLoadingError,
    FactorCopulaError,
)
from .margins import (
    MarginModel,
    NegBinMargin,
    OrdinalMargin,
    UniformScores,
    fit_empirical,
    to_uniform,
)
from .quadrature import QuadratureRule, latent_rule
from .schemas import FitReport, LinkReport, MarginReport, VariableReport

logger = logging.getLogger(__name__)

DENSITY_FLOOR = 1e-300
_LOG_FLOOR = math.log(DENSITY_FLOOR)
_PENALTY = 1e10


@dataclass(frozen=True)
class FitOptions:
    """Optimizer and integration settings.

    Attributes:
        n_q: Gauss-Legendre nodes per latent dimension.
        max_iter: Optimizer iteration cap.
        chunk_rows: Rows per likelihood block.
        ftol: Relative objective tolerance.
        gtol: Projected gradient tolerance on the per-observation objective.
        hessian_step: Central-difference step on the unconstrained scale.
        compute_se: Whether to compute standard errors.
    """

    n_q: int = DEFAULT_NQ
    max_iter: int = DEFAULT_MAX_ITER
    chunk_rows: int = DEFAULT_CHUNK_ROWS
    ftol: float = 1e-8
    gtol: float = 1e-5
    hessian_step: float = 1e-4
    compute_se: bool = True

    @classmethod
    def from_config(cls, config: AppConfig, **overrides: object) -> FitOptions:
        base = cls(n_q=config.nq, max_iter=config.max_iter, chunk_rows=config.chunk_rows)
        return replace(base, **overrides)  # type: ignore[arg-type]


@dataclass(frozen=True, eq=False)
class FactorCopulaModel:
    """Margins plus linking copulas for one or two factors.

    Attributes:
        margins: Fitted margin per variable.
        links_f1: Copula between the first factor and each variable.
        links_f2: Copula between the second factor and each variable,
            conditional on the first; None for 1-factor models.
        fixed_mask: Flat mask over all copula parameters (f1 then f2);
            True entries are held at their current value.
        names: Variable names.
    """

    margins: tuple[MarginModel, ...]
    links_f1: tuple[LinkingCopula, ...]
    links_f2: tuple[LinkingCopula, ...] | None = None
    fixed_mask: tuple[bool, ...] | None = None
    names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "margins", tuple(self.margins))
        object.__setattr__(self, "links_f1", tuple(self.links_f1))
        if self.links_f2 is not None:
            object.__setattr__(self, "links_f2", tuple(self.links_f2))
        d = len(self.margins)
        if d < 2:
            raise ConfigError(f"Factor copula model needs at least 2 variables, got {d}")
        if len(self.links_f1) != d:
            raise ConfigError(f"Got {len(self.links_f1)} factor-1 links for {d} variables")
        if self.links_f2 is not None and len(self.links_f2) != d:
            raise ConfigError(f"Got {len(self.links_f2)} factor-2 links for {d} variables")
        names = tuple(self.names) or tuple(f"y{j + 1}" for j in range(d))
        if len(names) != d:
            raise ConfigError(f"Got {len(names)} names for {d} variables")
        object.__setattr__(self, "names", names)
        if self.fixed_mask is not None:
            mask = tuple(bool(m) for m in self.fixed_mask)
            if len(mask) != self.param_count:
                raise ConfigError(
                    f"fixed_mask has {len(mask)} entries for {self.param_count} parameters"
                )
            object.__setattr__(self, "fixed_mask", mask)

    @property
    def factors(self) -> int:
        return 1 if self.links_f2 is None else 2

    @property
    def d(self) -> int:
        return len(self.margins)

    @property
    def links(self) -> tuple[LinkingCopula, ...]:
        return self.links_f1 + (self.links_f2 or ())

    @property
    def param_count(self) -> int:
        return sum(link.param_count for link in self.links)

    @property
    def bounds(self) -> list[ParamBound]:
        return [bound for link in self.links for bound in link.family.bounds]

    def free_mask(self) -> np.ndarray:
        if self.fixed_mask is None:
            return np.ones(self.param_count, dtype=bool)
        return ~np.asarray(self.fixed_mask)

    @property
    def free_param_count(self) -> int:
        return int(self.free_mask().sum())

    def param_vector(self) -> np.ndarray:
        return np.array([p for link in self.links for p in link.params], dtype=float)

    def unconstrained(self) -> np.ndarray:
        return np.array(
            [b.to_unconstrained(p) for b, p in zip(self.bounds, self.param_vector(), strict=True)]
        )

    def with_params(self, params: Sequence[float]) -> FactorCopulaModel:
        values = list(params)
        if len(values) != self.param_count:
            raise ConfigError(f"Expected {self.param_count} parameters, got {len(values)}")
        rebuilt: list[LinkingCopula] = []
        pos = 0
        for link in self.links:
            rebuilt.append(link.with_params(values[pos : pos + link.param_count]))
            pos += link.param_count
        f1 = tuple(rebuilt[: self.d])
        f2 = tuple(rebuilt[self.d :]) if self.links_f2 is not None else None
        return replace(self, links_f1=f1, links_f2=f2)

    def with_unconstrained(self, z: Sequence[float]) -> FactorCopulaModel:
        return self.with_params(
            [b.from_unconstrained(v) for b, v in zip(self.bounds, z, strict=True)]
        )

    def with_margins(self, margins: Sequence[MarginModel]) -> FactorCopulaModel:
        return replace(self, margins=tuple(margins))

    def copula_names(self) -> tuple[list[str], list[str] | None]:
        f2 = [link.name for link in self.links_f2] if self.links_f2 is not None else None
        return [link.name for link in self.links_f1], f2

    def permute(self, order: Sequence[int]) -> FactorCopulaModel:
        order = list(order)
        f2 = tuple(self.links_f2[j] for j in order) if self.links_f2 is not None else None
        return FactorCopulaModel(
            margins=tuple(self.margins[j] for j in order),
            links_f1=tuple(self.links_f1[j] for j in order),
            links_f2=f2,
            names=tuple(self.names[j] for j in order),
        )


def build_model(
    margins: Sequence[MarginModel],
    f1: Sequence[str],
    f2: Sequence[str] | None = None,
    *,
    names: Sequence[str] = (),
    start_tau: float = 0.3,
    start_tau_f2: float = 0.1,
    signs: Sequence[float] | None = None,
) -> FactorCopulaModel:
    """Model with each link started at a mild Kendall tau.

    Reflected links start at -tau. Comprehensive families take the sign from
    ``signs`` when given (e.g. from a Frank prefit).
    """

    def start(name: str, tau: float, j: int) -> LinkingCopula:
        link = make_copula(name, tau=abs(tau) if not name.endswith(("_r1", "_r2")) else -abs(tau))
        if link.family.comprehensive and signs is not None and signs[j] < 0:
            return make_copula(name, tau=-abs(tau))
        return link

    links_f1 = tuple(start(name, start_tau, j) for j, name in enumerate(f1))
    links_f2 = None
    if f2 is not None:
        links_f2 = tuple(start(name, start_tau_f2, j) for j, name in enumerate(f2))
    return FactorCopulaModel(tuple(margins), links_f1, links_f2, names=tuple(names))


# Likelihood


@dataclass(frozen=True)
class _Grid:
    x1: np.ndarray
    x2: np.ndarray | None
    log_w: np.ndarray
    w: np.ndarray


def _grid(model: FactorCopulaModel, rule: QuadratureRule) -> _Grid:
    if model.factors == 1:
        return _Grid(rule.nodes, None, rule.log_weights, rule.weights)
    x1, x2, w = rule.tensor()
    return _Grid(x1, x2, np.log(w), w)


def _conditional_cdf(
    model: FactorCopulaModel, j: int, v: np.ndarray, grid: _Grid
) -> np.ndarray:
    """P(U_j <= v | latent grid) for every v (rows) and grid point (columns)."""
    inner = model.links_f1[j].conditional(v[:, None], grid.x1[None, :])
    if grid.x2 is None or model.links_f2 is None:
        return inner
    return model.links_f2[j].conditional(inner, grid.x2[None, :])


def _log_terms(
    model: FactorCopulaModel, upper: np.ndarray, lower: np.ndarray, discrete: Sequence[bool], grid: _Grid
) -> tuple[np.ndarray, int]:
    total = np.zeros((upper.shape[0], grid.x1.shape[0]))
    floored = 0
    with np.errstate(all="ignore"):
        for j in range(model.d):
            if discrete[j]:
                mass = _conditional_cdf(model, j, upper[:, j], grid) - _conditional_cdf(
                    model, j, lower[:, j], grid
                )
                small = mass < DENSITY_FLOOR
                floored += int(small.sum())
                term = np.log(np.where(small, DENSITY_FLOOR, mass))
            else:
                u = upper[:, j][:, None]
                term = model.links_f1[j].log_density(grid.x1[None, :], u)
                if grid.x2 is not None and model.links_f2 is not None:
                    cond = model.links_f1[j].conditional(u, grid.x1[None, :])
                    term = term + model.links_f2[j].log_density(grid.x2[None, :], cond)
            total += np.nan_to_num(term, nan=_LOG_FLOOR, neginf=_LOG_FLOOR, posinf=-_LOG_FLOOR)
    return total, floored


def _row_log_densities(
    model: FactorCopulaModel, scores: UniformScores, rule: QuadratureRule, chunk_rows: int
) -> tuple[np.ndarray, int]:
    if scores.d != model.d:
        raise ConfigError(f"Scores have {scores.d} columns, model has {model.d}")
    grid = _grid(model, rule)
    out = np.empty(scores.n)
    floored = 0
    for start in range(0, scores.n, chunk_rows):
        stop = min(start + chunk_rows, scores.n)
        terms, hits = _log_terms(
            model, scores.upper[start:stop], scores.lower[start:stop], scores.discrete, grid
        )
        floored += hits
        out[start:stop] = logsumexp(terms + grid.log_w[None, :], axis=1)
    low = out < _LOG_FLOOR
    if np.any(low):
        floored += int(low.sum())
        out = np.maximum(out, _LOG_FLOOR)
    return out, floored


def log_density_rows(
    model: FactorCopulaModel,
    scores: UniformScores,
    n_q: int = DEFAULT_NQ,
    chunk_rows: int = DEFAULT_CHUNK_ROWS,
) -> np.ndarray:
    """Per-row log densities on the copula scale."""
    values, floored = _row_log_densities(model, scores, latent_rule(n_q), chunk_rows)
    if floored:
        logger.warning("Density floored at %g for %d evaluations", DENSITY_FLOOR, floored)
    return values


def density_1f(model: FactorCopulaModel, scores: UniformScores, n_q: int = DEFAULT_NQ) -> np.ndarray:
    """1-factor density of each row of ``scores``.

    Raises:
        ConfigError: If the model has two factors.
    """
    if model.factors != 1:
        raise ConfigError("density_1f needs a 1-factor model")
    return np.exp(log_density_rows(model, scores, n_q))


def density_2f(model: FactorCopulaModel, scores: UniformScores, n_q: int = DEFAULT_NQ) -> np.ndarray:
    """2-factor density of each row, by a double Gauss-Legendre sum.

    Raises:
        ConfigError: If the model has one factor.
    """
    if model.factors != 2:
        raise ConfigError("density_2f needs a 2-factor model")
    return np.exp(log_density_rows(model, scores, n_q))


def loglik(
    model: FactorCopulaModel,
    scores: UniformScores,
    n_q: int = DEFAULT_NQ,
    chunk_rows: int = DEFAULT_CHUNK_ROWS,
) -> float:
    """Sum of row log densities.

    Continuous columns contribute only their copula part; see
    marginal_log_density_constant for the data-scale constant.
    """
    return math.fsum(log_density_rows(model, scores, n_q, chunk_rows))


def category_masses(
    model: FactorCopulaModel, cumulative: Sequence[np.ndarray], rule: QuadratureRule
) -> tuple[list[np.ndarray], np.ndarray]:
    """Conditional category probabilities on the latent grid.

    Args:
        model: Factor model.
        cumulative: Per variable, copula-scale thresholds (0, t_1, ..., t_{K-1}, 1).
        rule: One-dimensional quadrature rule.

    Returns:
        Per variable an array (K_j, G) of P(category k | grid point g), and
        the G grid weights.
    """
    grid = _grid(model, rule)
    masses = []
    with np.errstate(all="ignore"):
        for j, thresholds in enumerate(cumulative):
            cdf = _conditional_cdf(model, j, np.asarray(thresholds, dtype=float), grid)
            masses.append(np.clip(np.diff(cdf, axis=0), 0.0, 1.0))
    return masses, grid.w


def marginal_log_density_constant(dataset: MixedDataset) -> float:
    """Sum over continuous columns of the Gaussian-kernel log density at each observation.

    Adding it to loglik gives a data-scale log-likelihood.
    """
    total = 0.0
    for j, kind in enumerate(dataset.kinds):
        if kind != "continuous":
            continue
        column = dataset.column(j)
        total += float(np.sum(gaussian_kde(column).logpdf(column)))
    return total


# Estimation


@dataclass(frozen=True, eq=False)
class FitResult:
    """Result of a maximum likelihood fit.

    Attributes:
        model: Model at the estimate.
        loglik: Log-likelihood on the copula scale.
        aic: -2 loglik + 2 free_params.
        n: Number of rows.
        free_params: Free parameters (copula, plus discrete margins for one-step fits).
        iterations: Optimizer iterations.
        converged: Optimizer convergence flag.
        taus: Kendall tau per link (f1 then f2).
        ses_native: Standard error per link parameter, None where fixed or unavailable.
        ses_tau: Delta-method standard error of each link's tau.
        covariance: Inverse Hessian on the unconstrained scale of the free parameters.
        loadings: Rotated (d, 2) loadings for 2-factor BVN models.
        message: Optimizer message.
        flags: Non-fatal conditions.
        onestep: Whether discrete margins were estimated jointly.
    """

    model: FactorCopulaModel
    loglik: float
    aic: float
    n: int
    free_params: int
    iterations: int
    converged: bool
    taus: tuple[float, ...]
    ses_native: tuple[tuple[float | None, ...], ...] | None = None
    ses_tau: tuple[float | None, ...] | None = None
    covariance: np.ndarray | None = None
    loadings: np.ndarray | None = None
    message: str = ""
    flags: tuple[str, ...] = field(default=())
    onestep: bool = False

    def to_payload(self) -> dict[str, object]:
        """JSON-ready report mirroring this result."""
        model = self.model
        d = model.d

        def link_report(k: int) -> LinkReport:
            link = model.links[k]
            return LinkReport(
                copula=link.name,
                params=list(link.params),
                tau=self.taus[k],
                se=list(self.ses_native[k]) if self.ses_native is not None else None,
                se_tau=self.ses_tau[k] if self.ses_tau is not None else None,
            )

        variables = [
            VariableReport(
                name=model.names[j],
                kind=model.margins[j].kind,
                margin=MarginReport.model_validate(model.margins[j].describe()),
                f1=link_report(j),
                f2=link_report(d + j) if model.links_f2 is not None else None,
            )
            for j in range(d)
        ]
        report = FitReport(
            factors=model.factors,  # type: ignore[arg-type]
            n=self.n,
            loglik=self.loglik,
            aic=self.aic,
            free_params=self.free_params,
            iterations=self.iterations,
            converged=self.converged,
            onestep=self.onestep,
            message=self.message,
            flags=list(self.flags),
            variables=variables,
            loadings=self.loadings.tolist() if self.loadings is not None else None,
            fixed=list(model.fixed_mask) if model.fixed_mask is not None else None,
        )
        return report.model_dump(mode="json")


def model_from_payload(payload: dict[str, object], dataset: MixedDataset) -> FactorCopulaModel:
    """Rebuild a fitted model from a report.

    Empirical margins are refit from ``dataset``; parametric margins and
    copulas are taken from the report.

    Raises:
        ConfigError: If the payload is invalid or does not match the dataset.
    """
    try:
        report = FitReport.model_validate(payload)
    except Exception as exc:
        raise ConfigError(f"Invalid fit report: {exc}") from exc
    if len(report.variables) != dataset.d:
        raise ConfigError(f"Report has {len(report.variables)} variables, data has {dataset.d}")
    margins: list[MarginModel] = []
    for j, var in enumerate(report.variables):
        if var.name != dataset.names[j]:
            raise ConfigError(f"Report variable {var.name!r} does not match column {dataset.names[j]!r}")
        spec = var.margin
        if spec.kind == "empirical":
            margins.append(fit_empirical(dataset.column(j), var.name))
        elif spec.kind == "ordinal_probit":
            margins.append(OrdinalMargin(tuple(spec.cutpoints or ()), tuple(spec.levels or ())))
        else:
            margins.append(NegBinMargin(float(spec.mu or 0.0), float(spec.xi or 0.0)))
    f1 = tuple(make_copula(v.f1.copula, v.f1.params) for v in report.variables)
    f2 = None
    if report.factors == 2:
        if any(v.f2 is None for v in report.variables):
            raise ConfigError("2-factor report is missing factor-2 links")
        f2 = tuple(make_copula(v.f2.copula, v.f2.params) for v in report.variables if v.f2)
    fixed = tuple(report.fixed) if report.fixed is not None else None
    return FactorCopulaModel(tuple(margins), f1, f2, fixed, tuple(v.name for v in report.variables))


def numerical_hessian(func: Callable[[np.ndarray], float], x: np.ndarray, step: float) -> np.ndarray:
    """Central-difference Hessian."""
    q = x.shape[0]
    hess = np.empty((q, q))
    f0 = func(x)
    for i in range(q):
        ei = np.zeros(q)
        ei[i] = step
        hess[i, i] = (func(x + 2 * ei) - 2.0 * f0 + func(x - 2 * ei)) / (4.0 * step * step)
        for k in range(i + 1, q):
            ek = np.zeros(q)
            ek[k] = step
            value = (
                func(x + ei + ek) - func(x + ei - ek) - func(x - ei + ek) + func(x - ei - ek)
            ) / (4.0 * step * step)
            hess[i, k] = hess[k, i] = value
    return hess


def _safe(func: Callable[[np.ndarray], float]) -> Callable[[np.ndarray], float]:
    def wrapped(z: np.ndarray) -> float:
        try:
            value = func(z)
        except FactorCopulaError as exc:
            logger.debug("Objective failed at %s: %s", z, exc)
            return _PENALTY
        return value if math.isfinite(value) else _PENALTY

    return wrapped


def _standard_errors(
    model: FactorCopulaModel,
    neg_total: Callable[[np.ndarray], float],
    z_free: np.ndarray,
    options: FitOptions,
) -> tuple[np.ndarray | None, list[str]]:
    if z_free.size == 0:
        return None, []
    hess = numerical_hessian(neg_total, z_free, options.hessian_step)
    try:
        np.linalg.cholesky(hess)
    except np.linalg.LinAlgError:
        logger.warning("Hessian not positive definite, standard errors omitted")
        return None, ["hessian_not_pd"]
    return np.linalg.inv(hess), []


def _copula_ses(
    model: FactorCopulaModel, cov: np.ndarray | None, n_copula_free: int, options: FitOptions
) -> tuple[tuple[tuple[float | None, ...], ...] | None, tuple[float | None, ...] | None]:
    if cov is None:
        return None, None
    z = model.unconstrained()
    free = model.free_mask()
    free_pos = np.cumsum(free) - 1
    var_z = np.diag(cov)[:n_copula_free]
    ses: list[tuple[float | None, ...]] = []
    ses_tau: list[float | None] = []
    pos = 0
    for link in model.links:
        link_ses: list[float | None] = []
        idx: list[int] = []
        for k, bound in enumerate(link.family.bounds):
            flat = pos + k
            if not free[flat]:
                link_ses.append(None)
                continue
            col = int(free_pos[flat])
            idx.append(col)
            link_ses.append(float(math.sqrt(max(var_z[col], 0.0)) * bound.jacobian(z[flat])))
        ses.append(tuple(link_ses))
        if idx:
            grad = []
            for k, bound in enumerate(link.family.bounds):
                flat = pos + k
                if not free[flat]:
                    continue
                h = options.hessian_step
                params_up = list(link.params)
                params_dn = list(link.params)
                params_up[k] = bound.from_unconstrained(z[flat] + h)
                params_dn[k] = bound.from_unconstrained(z[flat] - h)
                grad.append((link.with_params(params_up).tau() - link.with_params(params_dn).tau()) / (2 * h))
            g = np.asarray(grad)
            block = cov[np.ix_(idx, idx)]
            ses_tau.append(float(math.sqrt(max(float(g @ block @ g), 0.0))))
        else:
            ses_tau.append(None)
        pos += link.param_count
    return tuple(ses), tuple(ses_tau)


def fit(
    model: FactorCopulaModel, scores: UniformScores, options: FitOptions | None = None
) -> FitResult:
    """Second-stage maximum likelihood with margins held fixed.

    Parameters are optimized on an unconstrained scale (scaled logistic map
    per parameter) by L-BFGS-B on the mean negative log-likelihood. Standard
    errors come from the inverse of a central-difference Hessian; tau
    standard errors by the delta method.
    """
    options = options or FitOptions()
    rule = latent_rule(options.n_q)
    n = scores.n
    z_all = model.unconstrained()
    free = model.free_mask()
    flags: list[str] = []

    def total(z_free: np.ndarray) -> float:
        z = z_all.copy()
        z[free] = z_free
        candidate = model.with_unconstrained(z)
        values, _ = _row_log_densities(candidate, scores, rule, options.chunk_rows)
        return math.fsum(values)

    objective = _safe(lambda zf: -total(zf) / n)
    logger.info(
        "Fitting %d-factor model (%s), %d free parameters",
        model.factors,
        ", ".join(link.name for link in model.links),
        int(free.sum()),
    )
    z0 = z_all[free]
    if z0.size:
        result = minimize(
            objective,
            z0,
            method="L-BFGS-B",
            jac="2-point",
            bounds=[(-Z_LIMIT, Z_LIMIT)] * z0.size,
            options={"maxiter": options.max_iter, "ftol": options.ftol, "gtol": options.gtol},
        )
        z_hat = np.asarray(result.x)
        iterations, converged, message = int(result.nit), bool(result.success), str(result.message)
    else:
        z_hat, iterations, converged, message = z0, 0, True, "no free parameters"
    if not converged:
        logger.warning("Optimizer did not converge: %s", message)
        flags.append("not_converged")
    z = z_all.copy()
    z[free] = z_hat
    fitted = model.with_unconstrained(z)
    values, floored = _row_log_densities(fitted, scores, rule, options.chunk_rows)
    if floored:
        flags.append("density_floored")
        logger.warning("Density floored at %g for %d evaluations", DENSITY_FLOOR, floored)
    ll = math.fsum(values)
    cov = None
    if options.compute_se:
        cov, se_flags = _standard_errors(fitted, _safe(lambda zf: -total(zf)), z_hat, options)
        flags.extend(se_flags)
    ses, ses_tau = _copula_ses(fitted, cov, z_hat.size, options)
    q = int(free.sum())
    logger.info("Fit finished: loglik=%.4f, aic=%.4f, iterations=%d", ll, -2 * ll + 2 * q, iterations)
    return FitResult(
        model=fitted,
        loglik=ll,
        aic=-2.0 * ll + 2.0 * q,
        n=n,
        free_params=q,
        iterations=iterations,
        converged=converged,
        taus=tuple(link.tau() for link in fitted.links),
        ses_native=ses,
        ses_tau=ses_tau,
        covariance=cov,
        message=message,
        flags=tuple(flags),
    )


def fit_onestep(
    model: FactorCopulaModel, dataset: MixedDataset, options: FitOptions | None = None
) -> FitResult:
    """Joint maximum likelihood over copula and discrete-margin parameters.

    Continuous margins stay rank-based. Ordinal cutpoints are optimized as the
    first cutpoint plus log increments; negative binomial margins on log mean
    and log dispersion. Standard errors cover all free parameters.
    """
    options = options or FitOptions()
    rule = latent_rule(options.n_q)
    n = dataset.n
    z_cop_all = model.unconstrained()
    free = model.free_mask()
    n_cop = int(free.sum())
    segments: list[tuple[int, int, int]] = []
    z_margin: list[np.ndarray] = []
    pos = n_cop
    for j, margin in enumerate(model.margins):
        z_m = margin.unconstrained()
        if z_m.size:
            segments.append((j, pos, pos + z_m.size))
            z_margin.append(z_m)
            pos += z_m.size
    z0 = np.concatenate([z_cop_all[free], *z_margin]) if z_margin else z_cop_all[free]

    def unpack(z: np.ndarray) -> FactorCopulaModel:
        z_cop = z_cop_all.copy()
        z_cop[free] = z[:n_cop]
        margins = list(model.margins)
        for j, start, stop in segments:
            margins[j] = margins[j].from_unconstrained(z[start:stop])
        return model.with_unconstrained(z_cop).with_margins(margins)

    def total(z: np.ndarray) -> float:
        candidate = unpack(z)
        scores = to_uniform(candidate.margins, dataset)
        values, _ = _row_log_densities(candidate, scores, rule, options.chunk_rows)
        return math.fsum(values)

    bounds = [(-Z_LIMIT, Z_LIMIT)] * n_cop + [(None, None)] * (z0.size - n_cop)
    logger.info("One-step fit over %d copula and %d margin parameters", n_cop, z0.size - n_cop)
    result = minimize(
        _safe(lambda z: -total(z) / n),
        z0,
        method="L-BFGS-B",
        jac="2-point",
        bounds=bounds,
        options={"maxiter": options.max_iter, "ftol": options.ftol, "gtol": options.gtol},
    )
    z_hat = np.asarray(result.x)
    fitted = unpack(z_hat)
    scores = to_uniform(fitted.margins, dataset)
    values, floored = _row_log_densities(fitted, scores, rule, options.chunk_rows)
    ll = math.fsum(values)
    flags = ["density_floored"] if floored else []
    if not result.success:
        flags.append("not_converged")
        logger.warning("One-step optimizer did not converge: %s", result.message)
    cov = None
    if options.compute_se:
        cov, se_flags = _standard_errors(fitted, _safe(lambda z: -total(z)), z_hat, options)
        flags.extend(se_flags)
    ses, ses_tau = _copula_ses(
        fitted, cov[:n_cop, :n_cop] if cov is not None else None, n_cop, options
    )
    q = int(z0.size)
    return FitResult(
        model=fitted,
        loglik=ll,
        aic=-2.0 * ll + 2.0 * q,
        n=n,
        free_params=q,
        iterations=int(result.nit),
        converged=bool(result.success),
        taus=tuple(link.tau() for link in fitted.links),
        ses_native=ses,
        ses_tau=ses_tau,
        covariance=cov,
        message=str(result.message),
        flags=tuple(flags),
        onestep=True,
    )


# 2-factor BVN loadings


def bvn_loadings(theta: Sequence[float], delta: Sequence[float]) -> np.ndarray:
    """Loadings (beta_1, beta_2) = (theta, delta sqrt(1 - theta^2)).

    Raises:
        DegenerateLoadingError: If some |theta| = 1.
    """
    theta = np.asarray(theta, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if np.any(np.abs(theta) >= 1.0):
        raise DegenerateLoadingError(f"Factor-1 correlation on the boundary: {theta.tolist()}")
    return np.column_stack((theta, delta * np.sqrt(1.0 - theta**2)))


def loadings_to_params(loadings: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of bvn_loadings: theta = beta_1, delta = beta_2 / sqrt(1 - beta_1^2).

    Raises:
        DegenerateLoadingError: If some |beta_1| >= 1 or the implied delta is outside (-1, 1).
    """
    beta = np.asarray(loadings, dtype=float)
    theta = beta[:, 0]
    if np.any(np.abs(theta) >= 1.0):
        raise DegenerateLoadingError(f"Loading on the boundary: {theta.tolist()}")
    delta = beta[:, 1] / np.sqrt(1.0 - theta**2)
    if np.any(np.abs(delta) >= 1.0):
        raise DegenerateLoadingError(f"Rotated loadings not representable: delta={delta.tolist()}")
    return theta, delta


def is_bvn_2f(model: FactorCopulaModel) -> bool:
    return model.links_f2 is not None and all(link.name == "bvn" for link in model.links)


def bvn2f_identify_and_rotate(
    result: FitResult, scores: UniformScores, options: FitOptions | None = None
) -> FitResult:
    """Identify a 2-factor BVN fit and report varimax-rotated loadings.

    The first factor-2 correlation is fixed at zero and the model refit; the
    loadings of the refit are varimax rotated and converted back to linking
    correlations. The returned model carries the rotated parameters (same
    likelihood); standard errors refer to the identified parametrization.

    Raises:
        ConfigError: If the model is not an all-BVN 2-factor model.
        DegenerateLoadingError: If a factor-1 correlation is on the boundary.
    """
    model = result.model
    if not is_bvn_2f(model):
        raise ConfigError("Loading rotation needs an all-BVN 2-factor model")
    d = model.d
    params = model.param_vector()
    params[d] = 0.0
    mask = [False] * model.param_count
    mask[d] = True
    identified = replace(model.with_params(params), fixed_mask=tuple(mask))
    refit = fit(identified, scores, options)
    vector = refit.model.param_vector()
    beta = bvn_loadings(vector[:d], vector[d:])
    rotated = varimax(beta)
    theta, delta = loadings_to_params(rotated)
    rotated_model = replace(
        refit.model.with_params(np.concatenate((theta, delta))), fixed_mask=None
    )
    check = loglik(rotated_model, scores, options.n_q if options else DEFAULT_NQ)
    if not math.isclose(check, refit.loglik, rel_tol=1e-6, abs_tol=1e-6):
        logger.warning("Rotated model loglik %.6f differs from identified %.6f", check, refit.loglik)
    return replace(
        refit,
        model=rotated_model,
        taus=tuple(link.tau() for link in rotated_model.links),
        loadings=rotated,
        flags=(*refit.flags, "ses_identified_parametrization"),
    )
