"""Base class for bivariate copula families.

A family implements the unreflected copula C(u, v; params). Reflections are
applied on top by LinkingCopula. All nine families are exchangeable, so the
derivative with respect to the second argument is the h-function with the
arguments swapped.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, logit

from ..errors import ConvergenceError, NumericalError, ParameterDomainError, TauRangeError
from ..quadrature import composite

EPS = 1e-10
HINV_MAX_ITER = 200
HINV_TOL = 1e-12
# |z| cap on the unconstrained scale; keeps open bounds strictly inside
Z_LIMIT = 30.0

ArrayLike = float | np.ndarray

_LN2 = math.log(2.0)


def clamp_unit(x: ArrayLike) -> np.ndarray:
    """Clamp to [EPS, 1 - EPS]."""
    return np.clip(np.asarray(x, dtype=float), EPS, 1.0 - EPS)


def log1mexp(x: ArrayLike) -> np.ndarray:
    """log(1 - e^x) for x <= 0, accurate at both ends."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > -_LN2, np.log(-np.expm1(x)), np.log1p(-np.exp(x)))


def safe_log(x: float) -> float:
    return math.log(x) if x > 0.0 else -math.inf


@lru_cache(maxsize=4096)
def _numeric_tau(family: CopulaFamily, params: tuple[float, ...]) -> float:
    """Kendall tau, 1 - 4 * int int dC/du * dC/dv, by composite Gauss-Legendre."""
    rule = composite(0.0, 1.0, panels=16, n_q=12)
    uu, vv, ww = rule.tensor()
    with np.errstate(all="ignore"):
        integrand = family.hfunc(vv, uu, params) * family.hfunc(uu, vv, params)
    value = float(1.0 - 4.0 * np.dot(ww, integrand))
    if not math.isfinite(value):
        raise NumericalError(f"{family.tag} Kendall tau is not finite at params={params!r}")
    return value


class ParamBound(NamedTuple):
    """Interval domain of a single parameter.

    The optimizer works on an unconstrained scale through the scaled logistic
    map lower + (upper - lower) * expit(z).
    """

    lower: float
    upper: float
    lower_closed: bool = False
    upper_closed: bool = False

    def contains(self, value: float) -> bool:
        if not math.isfinite(value):
            return False
        above = value >= self.lower if self.lower_closed else value > self.lower
        below = value <= self.upper if self.upper_closed else value < self.upper
        return above and below

    def to_unconstrained(self, value: float) -> float:
        scaled = (value - self.lower) / (self.upper - self.lower)
        return float(np.clip(logit(min(max(scaled, 1e-13), 1.0 - 1e-13)), -Z_LIMIT, Z_LIMIT))

    def from_unconstrained(self, z: float) -> float:
        z = min(max(float(z), -Z_LIMIT), Z_LIMIT)
        return float(self.lower + (self.upper - self.lower) * expit(z))

    def jacobian(self, z: float) -> float:
        s = float(expit(z))
        return (self.upper - self.lower) * s * (1.0 - s)

    def describe(self) -> str:
        left = "[" if self.lower_closed else "("
        right = "]" if self.upper_closed else ")"
        return f"{left}{self.lower:g}, {self.upper:g}{right}"


class CopulaFamily:
    """Unreflected bivariate copula family.

    Subclasses implement cdf, log_density and hfunc. The conditional inverse,
    Kendall tau and its inverse fall back to numerical routines when a family
    has no closed form.

    Attributes:
        tag: Lowercase family name used in the serialized vocabulary.
        param_names: Names of the parameters in vector order.
        bounds: Domain of each parameter.
        comprehensive: Whether the family covers negative dependence.
    """

    tag: str = ""
    param_names: tuple[str, ...] = ()
    bounds: tuple[ParamBound, ...] = ()
    comprehensive: bool = False

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.tag!r})"

    @property
    def param_count(self) -> int:
        return len(self.param_names)

    def validate(self, params: Sequence[float]) -> tuple[float, ...]:
        """Check a parameter vector against the family domain.

        Raises:
            ParameterDomainError: If the length or any value is invalid.
        """
        values = tuple(float(p) for p in params)
        if len(values) != self.param_count:
            raise ParameterDomainError(
                f"{self.tag} expects {self.param_count} parameter(s), got {len(values)}"
            )
        for name, value, bound in zip(self.param_names, values, self.bounds, strict=True):
            if not bound.contains(value):
                raise ParameterDomainError(
                    f"{self.tag} parameter {name}={value!r} outside {bound.describe()}"
                )
        return values

    # Family formulas. Arrays broadcast; inputs are already clamped.

    def cdf(self, u: np.ndarray, v: np.ndarray, params: tuple[float, ...]) -> np.ndarray:
        raise NotImplementedError

    def log_density(self, u: np.ndarray, v: np.ndarray, params: tuple[float, ...]) -> np.ndarray:
        raise NotImplementedError

    def hfunc(self, v: np.ndarray, u: np.ndarray, params: tuple[float, ...]) -> np.ndarray:
        """C_{2|1}(v | u) = dC(u, v)/du."""
        raise NotImplementedError

    def hinv(self, w: np.ndarray, u: np.ndarray, params: tuple[float, ...]) -> np.ndarray:
        """Inverse of hfunc in v, by safeguarded Newton steps inside a bisection bracket."""
        w, u = np.broadcast_arrays(np.asarray(w, dtype=float), np.asarray(u, dtype=float))
        lo = np.full(w.shape, EPS)
        hi = np.full(w.shape, 1.0 - EPS)
        v = np.clip(w, EPS, 1.0 - EPS).copy()
        diff = np.full(w.shape, np.inf)
        with np.errstate(all="ignore"):
            for _ in range(HINV_MAX_ITER):
                diff = self.hfunc(v, u, params) - w
                done = (np.abs(diff) < HINV_TOL) | (hi - lo < 1e-15)
                if np.all(done):
                    break
                lo = np.where(diff < 0, v, lo)
                hi = np.where(diff > 0, v, hi)
                slope = np.exp(self.log_density(u, v, params))
                step = v - diff / slope
                bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
                v = np.where(done, v, np.where(bad, 0.5 * (lo + hi), step))
        unresolved = (np.abs(diff) > 1e-9) & (hi - lo > 1e-13)
        if np.any(unresolved):
            idx = int(np.flatnonzero(unresolved.ravel())[0])
            raise ConvergenceError(
                f"{self.tag} conditional inverse did not converge at "
                f"w={w.ravel()[idx]!r}, u={u.ravel()[idx]!r}, params={params!r}"
            )
        return v

    def tau(self, params: tuple[float, ...]) -> float:
        """Kendall tau by composite Gauss-Legendre, cached per family and params."""
        return _numeric_tau(self, tuple(params))

    # Kendall tau inversion along a one-dimensional canonical section.

    def canonical_range(self) -> tuple[float, float]:
        """Range of the section parameter s."""
        bound = self.bounds[0]
        lo = bound.lower if bound.lower_closed else bound.lower + 1e-9
        hi = bound.upper if bound.upper_closed else bound.upper - 1e-9
        return lo, hi

    def canonical_params(self, s: float) -> tuple[float, ...]:
        """Parameters on the canonical section (identity for one-parameter families)."""
        return (s,)

    def tau_to_params(self, tau: float) -> tuple[float, ...]:
        """Invert Kendall tau along the canonical section.

        Raises:
            TauRangeError: If tau is not attainable on the section.
        """
        lo, hi = self.canonical_range()
        tau_lo = self.tau(self.canonical_params(lo))
        tau_hi = self.tau(self.canonical_params(hi))
        if abs(tau - tau_lo) < 1e-9:
            return self.canonical_params(lo)
        if not tau_lo < tau < tau_hi:
            raise TauRangeError(
                f"{self.tag} cannot attain tau={tau!r}; range is ({tau_lo:.4f}, {tau_hi:.4f})"
            )
        s = brentq(
            lambda x: self.tau(self.canonical_params(x)) - tau, lo, hi, xtol=1e-12, rtol=1e-12
        )
        return self.canonical_params(float(s))

    def tail_dependence(self, params: tuple[float, ...]) -> tuple[float, float]:
        return 0.0, 0.0

    def tail_order(self, params: tuple[float, ...]) -> tuple[float, float]:
        return 2.0, 2.0

    def is_independence(self, params: tuple[float, ...]) -> bool:
        return False
