"""Gauss-Legendre rules on [0, 1] shared by all integrations.

The factor likelihood integrates over latent uniforms with a product of
one-dimensional tail-graded rules; diagnostics and numeric Kendall tau use
composite rules on finite intervals.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConfigError


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of a quadrature rule.

    Attributes:
        nodes: Strictly increasing nodes.
        weights: Positive weights.
    """

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def log_weights(self) -> np.ndarray:
        return np.log(self.weights)

    def integrate(self, func: Callable[[np.ndarray], np.ndarray]) -> float:
        """Integrate a vectorized function over the rule's interval."""
        return float(np.dot(self.weights, func(self.nodes)))

    def tensor(self, other: QuadratureRule | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Product rule with another rule (or itself).

        Returns:
            Flattened first-axis nodes, second-axis nodes and product weights.
        """
        other = self if other is None else other
        x1, x2 = np.meshgrid(self.nodes, other.nodes, indexing="ij")
        w = np.outer(self.weights, other.weights)
        return x1.ravel(), x2.ravel(), w.ravel()


@lru_cache(maxsize=32)
def _legendre_unit(n_q: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
    x, w = leggauss(n_q)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    # exact symmetry about 1/2
    nodes = 0.5 * (nodes + (1.0 - nodes[::-1]))
    weights = 0.5 * (weights + weights[::-1])
    weights = weights / weights.sum()
    return tuple(nodes.tolist()), tuple(weights.tolist())


def gauss_legendre(n_q: int) -> QuadratureRule:
    """Gauss-Legendre rule with ``n_q`` nodes mapped to [0, 1].

    Args:
        n_q: Number of nodes (>= 2).

    Returns:
        A rule exact for polynomials of degree 2*n_q - 1.

    Raises:
        ConfigError: If n_q < 2.
    """
    if int(n_q) != n_q or n_q < 2:
        raise ConfigError(f"Invalid quadrature size {n_q!r}, expected integer >= 2")
    nodes, weights = _legendre_unit(int(n_q))
    return QuadratureRule(nodes=np.array(nodes), weights=np.array(weights))


def composite(a: float, b: float, panels: int, n_q: int) -> QuadratureRule:
    """Composite Gauss-Legendre rule on [a, b] with equal-width panels."""
    if not b > a:
        raise ConfigError(f"Invalid interval [{a}, {b}]")
    base = gauss_legendre(n_q)
    edges = np.linspace(a, b, panels + 1)
    widths = np.diff(edges)
    nodes = (edges[:-1, None] + widths[:, None] * base.nodes[None, :]).ravel()
    weights = (widths[:, None] * base.weights[None, :]).ravel()
    return QuadratureRule(nodes=nodes, weights=weights)


TAIL_GRADING = 3


@lru_cache(maxsize=32)
def _graded_unit(n_q: int, grading: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
    base = gauss_legendre(n_q)
    t = base.nodes
    a = t**grading
    b = (1.0 - t) ** grading
    nodes = a / (a + b)
    # dx/dt = p t^{p-1} (1-t)^{p-1} / (t^p + (1-t)^p)^2
    weights = base.weights * grading * (t * (1.0 - t)) ** (grading - 1) / (a + b) ** 2
    nodes = 0.5 * (nodes + (1.0 - nodes[::-1]))
    weights = 0.5 * (weights + weights[::-1])
    weights = weights / weights.sum()
    return tuple(nodes.tolist()), tuple(weights.tolist())


def latent_rule(n_q: int, grading: int = TAIL_GRADING) -> QuadratureRule:
    """Rule for integrating over a latent uniform factor.

    Gauss-Legendre in t, mapped by x = t^p / (t^p + (1-t)^p) with p = ``grading``.
    Nodes approach 0 and 1 like (1-t)^p, where linking densities with tail
    dependence peak for extreme observations. ``grading=1`` is gauss_legendre.

    Raises:
        ConfigError: If n_q < 2 or grading < 1.
    """
    if int(grading) != grading or grading < 1:
        raise ConfigError(f"Invalid quadrature grading {grading!r}, expected integer >= 1")
    if grading == 1:
        return gauss_legendre(n_q)
    nodes, weights = _graded_unit(n_q, int(grading))
    return QuadratureRule(nodes=np.array(nodes), weights=np.array(weights))
