"""Bivariate copula catalog.

Provides the family factory and the linking-copula constructors used by the
factor models. Names follow the serialized vocabulary: a family tag
("bvn", "frank", "t3", "gumbel", "joe", "bb1", "bb7", "bb8", "bb10") with an
optional variant suffix ("_s", "_r1", "_r2").
"""

from __future__ import annotations

import re
from collections.abc import Sequence
from functools import lru_cache

from ..errors import ConfigError
from .archimedean import Frank, Gumbel, Joe
from .base import EPS, CopulaFamily, ParamBound, clamp_unit
from .bb import BB1, BB7, BB8, BB10
from .elliptical import Bvn, StudentT, bvn_cdf, bvt_cdf
from .linking import LinkingCopula, TailDependence, Variant, split_name, tau_to_params

_FIXED: dict[str, type[CopulaFamily]] = {
    "bvn": Bvn,
    "frank": Frank,
    "gumbel": Gumbel,
    "joe": Joe,
    "bb1": BB1,
    "bb7": BB7,
    "bb8": BB8,
    "bb10": BB10,
}
_T_TAG = re.compile(r"^t(\d+)$")

__all__ = [
    "EPS",
    "CopulaFamily",
    "LinkingCopula",
    "ParamBound",
    "TailDependence",
    "Variant",
    "available_families",
    "bvn_cdf",
    "bvt_cdf",
    "clamp_unit",
    "create_family",
    "independence_copula",
    "make_copula",
    "params_to_tau",
    "parse_copula_name",
    "tau_to_params",
]


def create_family(tag: str) -> CopulaFamily:
    """Create (or reuse) the family object for a tag.

    Args:
        tag: Family tag, e.g. "gumbel" or "t5"; case and surrounding space are ignored.

    Returns:
        The shared CopulaFamily instance.

    Raises:
        ConfigError: If the tag is not a known family.
    """
    family = _create_family(tag.strip().lower())
    if family is None:
        raise ConfigError(f"Unsupported copula family {tag!r}")
    return family


@lru_cache(maxsize=None)
def _create_family(key: str) -> CopulaFamily | None:
    if key in _FIXED:
        return _FIXED[key]()
    match = _T_TAG.match(key)
    if match and int(match.group(1)) >= 1:
        return StudentT(int(match.group(1)))
    return None


def available_families() -> list[str]:
    return [*_FIXED, "t<nu>"]


def parse_copula_name(name: str) -> tuple[CopulaFamily, Variant]:
    """Resolve a serialized name such as "joe_r2" or "t3".

    Raises:
        ConfigError: If the family or the suffix is unknown.
    """
    tag, variant = split_name(name)
    return create_family(tag), variant


def make_copula(name: str, params: Sequence[float] | None = None, *, tau: float | None = None) -> LinkingCopula:
    """Build a LinkingCopula from its name and either parameters or a Kendall tau.

    Args:
        name: Serialized copula name.
        params: Parameter vector in native scale.
        tau: Kendall tau to invert when ``params`` is not given.

    Raises:
        ConfigError: If the name is unknown or neither params nor tau is given.
        ParameterDomainError: If params fall outside the family domain.
        TauRangeError: If tau cannot be attained.
    """
    family, variant = parse_copula_name(name)
    if params is None:
        if tau is None:
            raise ConfigError(f"Copula {name!r} needs params or tau")
        params = tau_to_params(family, variant, tau)
    return LinkingCopula(family, variant, tuple(params))


def independence_copula() -> LinkingCopula:
    return LinkingCopula(create_family("frank"), Variant.NONE, (0.0,))


def params_to_tau(copula: LinkingCopula) -> float:
    return copula.tau()
