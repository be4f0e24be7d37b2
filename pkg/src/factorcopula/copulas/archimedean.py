"""One-parameter Archimedean families: Frank, Gumbel and Joe."""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import digamma, expit, polygamma

from ..errors import TauRangeError
from .base import CopulaFamily, ParamBound, log1mexp

_FRANK_ZERO = 1e-8


def _debye1(theta: float) -> float:
    """First Debye function (1/theta) int_0^theta t/(e^t - 1) dt, valid for negative theta."""
    if theta == 0.0:
        return 1.0
    value, _ = quad(lambda t: t / math.expm1(t) if t != 0.0 else 1.0, 0.0, theta)
    return value / theta


class Frank(CopulaFamily):
    """Frank copula.

    C(u,v) = -log(1 + (e^{-tu} - 1)(e^{-tv} - 1)/(e^{-t} - 1)) / t, comprehensive,
    reflection symmetric, tail order 2 in both tails. theta = 0 is independence.

    For t > 0 the denominator D = e^{-tu}(1 - e^{-tv}) + e^{-tv}(1 - e^{-t(1-v)})
    is a sum of positive terms and everything is evaluated from log D. Negative
    theta is the reflection in the first argument: C_{-t}(u,v) = v - C_t(1-u,v).
    """

    tag = "frank"
    param_names = ("theta",)
    bounds = (ParamBound(-100.0, 100.0),)
    comprehensive = True

    @staticmethod
    def _log_terms(u, v, t):
        with np.errstate(divide="ignore"):
            first = -t * u + np.log(-np.expm1(-t * v))
            second = -t * v + np.log(-np.expm1(-t * (1.0 - v)))
        return first, second

    @staticmethod
    def _positive_cdf(u, v, t):
        if t < 1.0:
            return -np.log1p(np.expm1(-t * u) * np.expm1(-t * v) / math.expm1(-t)) / t
        first, second = Frank._log_terms(u, v, t)
        return (math.log(-math.expm1(-t)) - np.logaddexp(first, second)) / t

    def cdf(self, u, v, params):
        theta = params[0]
        if abs(theta) < _FRANK_ZERO:
            return u * v
        if theta < 0.0:
            return v - self._positive_cdf(1.0 - u, v, -theta)
        return self._positive_cdf(u, v, theta)

    def log_density(self, u, v, params):
        theta = params[0]
        if abs(theta) < _FRANK_ZERO:
            return np.zeros(np.broadcast(u, v).shape)
        t = abs(theta)
        x = 1.0 - u if theta < 0.0 else u
        first, second = self._log_terms(x, v, t)
        # t (1 - e^-t) e^{-t(x+v)} / D^2
        return math.log(t) + math.log(-math.expm1(-t)) - t * (x + v) - 2.0 * np.logaddexp(first, second)

    def hfunc(self, v, u, params):
        theta = params[0]
        if abs(theta) < _FRANK_ZERO:
            return np.broadcast_to(np.asarray(v, dtype=float), np.broadcast(u, v).shape).copy()
        x = 1.0 - u if theta < 0.0 else u
        first, second = self._log_terms(x, v, abs(theta))
        # e^{-tx}(1 - e^{-tv}) / D
        return expit(first - second)

    def hinv(self, w, u, params):
        theta = params[0]
        if abs(theta) < _FRANK_ZERO:
            return np.broadcast_to(np.asarray(w, dtype=float), np.broadcast(u, w).shape).copy()
        t = abs(theta)
        x = 1.0 - u if theta < 0.0 else u
        if t < 1.0:
            ratio = w * math.expm1(-t) / (w + (1.0 - w) * np.exp(-t * x))
            return np.clip(-np.log1p(ratio) / t, 0.0, 1.0)
        # e^{-tv} = ((1-w) e^{-tx} + w e^{-t}) / (w + (1-w) e^{-tx})
        with np.errstate(divide="ignore"):
            log_w = np.log(w)
            log_wb = np.log1p(-w)
        num = np.logaddexp(log_wb - t * x, log_w - t)
        den = np.logaddexp(log_w, log_wb - t * x)
        return np.clip((den - num) / t, 0.0, 1.0)

    def tau(self, params):
        theta = params[0]
        if abs(theta) < _FRANK_ZERO:
            return 0.0
        return 1.0 + 4.0 * (_debye1(theta) - 1.0) / theta

    def tau_to_params(self, tau):
        if not -1.0 < tau < 1.0:
            raise TauRangeError(f"{self.tag} cannot attain tau={tau!r}; range is (-1, 1)")
        if abs(tau) < 1e-12:
            return (0.0,)
        upper = self.tau((self.bounds[0].upper - 1e-9,))
        if abs(tau) >= upper:
            raise TauRangeError(f"{self.tag} cannot attain tau={tau!r}; |tau| must be < {upper:.4f}")
        theta = brentq(lambda t: self.tau((t,)) - abs(tau), 1e-6, self.bounds[0].upper - 1e-9)
        return (math.copysign(float(theta), tau),)

    def is_independence(self, params):
        return abs(params[0]) < _FRANK_ZERO


class Gumbel(CopulaFamily):
    """Gumbel copula, C(u,v) = exp(-[(-log u)^t + (-log v)^t]^{1/t}), t >= 1.

    tau = 1 - 1/t; upper tail dependence 2 - 2^{1/t}; lower tail order 2^{1/t}.
    """

    tag = "gumbel"
    param_names = ("theta",)
    bounds = (ParamBound(1.0, 50.0, lower_closed=True),)

    @staticmethod
    def _parts(u, v, theta):
        log_x = np.log(-np.log(u))
        log_y = np.log(-np.log(v))
        log_a = np.logaddexp(theta * log_x, theta * log_y)
        return log_x, log_y, log_a, np.exp(log_a / theta)

    def cdf(self, u, v, params):
        *_, z = self._parts(u, v, params[0])
        return np.exp(-z)

    def log_density(self, u, v, params):
        theta = params[0]
        log_x, log_y, log_a, z = self._parts(u, v, theta)
        return (
            -z + np.exp(log_x) + np.exp(log_y) + (theta - 1.0) * (log_x + log_y)
            + (1.0 / theta - 2.0) * log_a + np.log(z + theta - 1.0)
        )

    def hfunc(self, v, u, params):
        theta = params[0]
        log_x, _, log_a, z = self._parts(u, v, theta)
        return np.clip(
            np.exp(-z + np.exp(log_x) + (theta - 1.0) * log_x + (1.0 / theta - 1.0) * log_a),
            0.0, 1.0,
        )

    def tau(self, params):
        return 1.0 - 1.0 / params[0]

    def tau_to_params(self, tau):
        if not 0.0 <= tau < 1.0 - 1.0 / self.bounds[0].upper:
            raise TauRangeError(f"{self.tag} cannot attain tau={tau!r}; range is [0, 1)")
        return (1.0 / (1.0 - tau),)

    def tail_dependence(self, params):
        return 0.0, 2.0 - 2.0 ** (1.0 / params[0])

    def tail_order(self, params):
        return 2.0 ** (1.0 / params[0]), 1.0

    def is_independence(self, params):
        return params[0] == 1.0


class Joe(CopulaFamily):
    """Joe copula, C(u,v) = 1 - (ub^t + vb^t - ub^t vb^t)^{1/t} with ub = 1-u, t >= 1.

    tau = 1 + 2/(2-t) (digamma(2) - digamma(2/t + 1)); upper tail dependence 2 - 2^{1/t}.
    """

    tag = "joe"
    param_names = ("theta",)
    bounds = (ParamBound(1.0, 50.0, lower_closed=True),)

    @staticmethod
    def _parts(u, v, theta):
        log_ub = np.log1p(-u)
        log_vb = np.log1p(-v)
        # r = ub^t + vb^t (1 - ub^t)
        log_r = np.logaddexp(theta * log_ub, theta * log_vb + log1mexp(theta * log_ub))
        return log_ub, log_vb, log_r

    def cdf(self, u, v, params):
        theta = params[0]
        *_, log_r = self._parts(u, v, theta)
        return -np.expm1(log_r / theta)

    def log_density(self, u, v, params):
        theta = params[0]
        log_ub, log_vb, log_r = self._parts(u, v, theta)
        return (
            (1.0 / theta - 2.0) * log_r + (theta - 1.0) * (log_ub + log_vb)
            + np.log(theta - 1.0 + np.exp(log_r))
        )

    def hfunc(self, v, u, params):
        theta = params[0]
        log_ub, log_vb, log_r = self._parts(u, v, theta)
        return np.clip(
            np.exp((1.0 / theta - 1.0) * log_r + (theta - 1.0) * log_ub + log1mexp(theta * log_vb)),
            0.0, 1.0,
        )

    def tau(self, params):
        theta = params[0]
        if abs(theta - 2.0) < 1e-7:
            return 1.0 - float(polygamma(1, 2.0))
        return 1.0 + 2.0 / (2.0 - theta) * float(digamma(2.0) - digamma(2.0 / theta + 1.0))

    def tail_dependence(self, params):
        return 0.0, 2.0 - 2.0 ** (1.0 / params[0])

    def tail_order(self, params):
        return 2.0, 1.0

    def is_independence(self, params):
        return params[0] == 1.0
