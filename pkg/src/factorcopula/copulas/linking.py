"""Linking copulas: a family, a reflection variant and a parameter vector.

Reflections of a base copula C (first argument is the latent variable):

    survival        u + v - 1 + C(1-u, 1-v)
    reflect_first   v - C(1-u, v)
    reflect_second  u - C(u, 1-v)

Each reflection is an involution. 1- and 2-reflections turn a positively
dependent family into a negatively dependent one.
"""

from __future__ import annotations

import enum
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NumericalError, TauRangeError
from .base import EPS, ArrayLike, CopulaFamily


class Variant(str, enum.Enum):
    NONE = "none"
    SURVIVAL = "survival"
    REFLECT_FIRST = "reflect_first"
    REFLECT_SECOND = "reflect_second"

    @property
    def suffix(self) -> str:
        return _SUFFIXES[self]

    @property
    def negates_tau(self) -> bool:
        return self in (Variant.REFLECT_FIRST, Variant.REFLECT_SECOND)


_SUFFIXES = {
    Variant.NONE: "",
    Variant.SURVIVAL: "_s",
    Variant.REFLECT_FIRST: "_r1",
    Variant.REFLECT_SECOND: "_r2",
}


def _unit(x: ArrayLike) -> np.ndarray:
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class TailDependence:
    """Tail dependence coefficients.

    For the unreflected and survival variants ``lower``/``upper`` are the
    joint lower and joint upper tails. For 1- and 2-reflections they are the
    lower-upper corner (first argument small, second large) and the
    upper-lower corner, and ``discordant`` is True.
    """

    lower: float
    upper: float
    discordant: bool = False

    def as_tuple(self) -> tuple[float, float]:
        return self.lower, self.upper


@dataclass(frozen=True)
class LinkingCopula:
    """Immutable bivariate linking copula C(x, u) between a latent x and an observed u.

    Attributes:
        family: Base copula family.
        variant: Reflection variant applied to the family.
        params: Parameter vector validated against the family domain.
    """

    family: CopulaFamily
    variant: Variant = Variant.NONE
    params: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", self.family.validate(self.params))
        object.__setattr__(self, "variant", Variant(self.variant))

    @property
    def name(self) -> str:
        return f"{self.family.tag}{self.variant.suffix}"

    @property
    def param_count(self) -> int:
        return self.family.param_count

    def with_params(self, params: Sequence[float]) -> LinkingCopula:
        return LinkingCopula(self.family, self.variant, tuple(params))

    def cdf(self, u: ArrayLike, v: ArrayLike) -> np.ndarray:
        u = np.clip(_unit(u), 0.0, 1.0)
        v = np.clip(_unit(v), 0.0, 1.0)
        base = self.family.cdf
        p = self.params
        uc = np.clip(u, EPS, 1.0 - EPS)
        vc = np.clip(v, EPS, 1.0 - EPS)
        if self.variant is Variant.NONE:
            out = base(uc, vc, p)
        elif self.variant is Variant.SURVIVAL:
            out = u + v - 1.0 + base(1.0 - uc, 1.0 - vc, p)
        elif self.variant is Variant.REFLECT_FIRST:
            out = v - base(1.0 - uc, vc, p)
        else:
            out = u - base(uc, 1.0 - vc, p)
        lower = np.maximum(u + v - 1.0, 0.0)
        upper = np.minimum(u, v)
        return np.clip(out, lower, upper)

    def log_density(self, u: ArrayLike, v: ArrayLike) -> np.ndarray:
        u = np.clip(_unit(u), EPS, 1.0 - EPS)
        v = np.clip(_unit(v), EPS, 1.0 - EPS)
        base = self.family.log_density
        p = self.params
        with np.errstate(all="ignore"):
            if self.variant is Variant.NONE:
                return base(u, v, p)
            if self.variant is Variant.SURVIVAL:
                return base(1.0 - u, 1.0 - v, p)
            if self.variant is Variant.REFLECT_FIRST:
                return base(1.0 - u, v, p)
            return base(u, 1.0 - v, p)

    def density(self, u: ArrayLike, v: ArrayLike) -> np.ndarray:
        return np.exp(self.log_density(u, v))

    def _defined(self, out: np.ndarray, x: np.ndarray, given: np.ndarray) -> np.ndarray:
        """Raise on NaN at interior points; the end points are overwritten by the caller."""
        x, given, out = np.broadcast_arrays(x, given, out)
        bad = np.isnan(out) & (x > 0.0) & (x < 1.0)
        if np.any(bad):
            idx = int(np.flatnonzero(bad.ravel())[0])
            raise NumericalError(
                f"{self.name} conditional cdf is undefined at x={x.ravel()[idx]!r}, "
                f"given={given.ravel()[idx]!r}, params={self.params!r}"
            )
        return out

    def conditional(self, v: ArrayLike, given_u: ArrayLike) -> np.ndarray:
        """C_{2|1}(v | u) = dC(u, v)/du; exactly 0 at v = 0 and 1 at v = 1."""
        v_raw = _unit(v)
        u = np.clip(_unit(given_u), EPS, 1.0 - EPS)
        vc = np.clip(v_raw, EPS, 1.0 - EPS)
        h = self.family.hfunc
        p = self.params
        with np.errstate(all="ignore"):
            if self.variant is Variant.NONE:
                out = h(vc, u, p)
            elif self.variant is Variant.SURVIVAL:
                out = 1.0 - h(1.0 - vc, 1.0 - u, p)
            elif self.variant is Variant.REFLECT_FIRST:
                out = h(vc, 1.0 - u, p)
            else:
                out = 1.0 - h(1.0 - vc, u, p)
        out = np.clip(self._defined(out, v_raw, u), EPS, 1.0 - EPS)
        return np.where(v_raw <= 0.0, 0.0, np.where(v_raw >= 1.0, 1.0, out))

    def conditional_given_second(self, u: ArrayLike, given_v: ArrayLike) -> np.ndarray:
        """C_{1|2}(u | v) = dC(u, v)/dv."""
        u_raw = _unit(u)
        v = np.clip(_unit(given_v), EPS, 1.0 - EPS)
        uc = np.clip(u_raw, EPS, 1.0 - EPS)
        h = self.family.hfunc
        p = self.params
        with np.errstate(all="ignore"):
            if self.variant is Variant.NONE:
                out = h(uc, v, p)
            elif self.variant is Variant.SURVIVAL:
                out = 1.0 - h(1.0 - uc, 1.0 - v, p)
            elif self.variant is Variant.REFLECT_FIRST:
                out = 1.0 - h(1.0 - uc, v, p)
            else:
                out = h(uc, 1.0 - v, p)
        out = np.clip(self._defined(out, u_raw, v), 0.0, 1.0)
        return np.where(u_raw <= 0.0, 0.0, np.where(u_raw >= 1.0, 1.0, out))

    def conditional_inverse(self, w: ArrayLike, given_u: ArrayLike) -> np.ndarray:
        """Solve conditional(v | u) = w for v."""
        w = np.clip(_unit(w), EPS, 1.0 - EPS)
        u = np.clip(_unit(given_u), EPS, 1.0 - EPS)
        inv = self.family.hinv
        p = self.params
        with np.errstate(all="ignore"):
            if self.variant is Variant.NONE:
                out = inv(w, u, p)
            elif self.variant is Variant.SURVIVAL:
                out = 1.0 - inv(1.0 - w, 1.0 - u, p)
            elif self.variant is Variant.REFLECT_FIRST:
                out = inv(w, 1.0 - u, p)
            else:
                out = 1.0 - inv(1.0 - w, u, p)
        return np.clip(out, 0.0, 1.0)

    def tau(self) -> float:
        value = self.family.tau(self.params)
        return -value if self.variant.negates_tau else value

    def tail_dependence(self) -> TailDependence:
        lower, upper = self.family.tail_dependence(self.params)
        if self.variant is Variant.NONE:
            return TailDependence(lower, upper)
        if self.variant is Variant.SURVIVAL:
            return TailDependence(upper, lower)
        if self.variant is Variant.REFLECT_FIRST:
            # (1-U1, U2): base upper corner becomes first-small/second-large
            return TailDependence(upper, lower, discordant=True)
        return TailDependence(lower, upper, discordant=True)

    def tail_order(self) -> tuple[float, float]:
        lower, upper = self.family.tail_order(self.params)
        if self.variant in (Variant.SURVIVAL, Variant.REFLECT_FIRST):
            return upper, lower
        return lower, upper

    def is_independence(self) -> bool:
        return self.family.is_independence(self.params)


def tau_to_params(family: CopulaFamily, variant: Variant | str, tau: float) -> tuple[float, ...]:
    """Parameters of ``family`` (under ``variant``) attaining Kendall ``tau``.

    Two-parameter families return the point on their canonical section.

    Raises:
        TauRangeError: If the variant/family cannot attain ``tau``.
    """
    variant = Variant(variant)
    target = -tau if variant.negates_tau else tau
    if target < 0.0 and not family.comprehensive:
        direction = "negative" if not variant.negates_tau else "positive"
        raise TauRangeError(
            f"{family.tag}{variant.suffix} cannot attain {direction} dependence tau={tau!r}"
        )
    return family.tau_to_params(target)


def split_name(name: str) -> tuple[str, Variant]:
    """Split a serialized copula name into family tag and variant.

    Raises:
        ConfigError: If the suffix is unknown.
    """
    text = name.strip().lower()
    for variant, suffix in _SUFFIXES.items():
        if suffix and text.endswith(suffix):
            return text[: -len(suffix)], variant
    if "_" in text:
        raise ConfigError(f"Unknown copula variant in {name!r}")
    return text, Variant.NONE
