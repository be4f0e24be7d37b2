"""Two-parameter families BB1, BB7, BB8 and BB10.

Parametrizations follow Joe (2014), Dependence Modeling with Copulas, ch. 4.
Densities are evaluated on the log scale; the conditional inverses and, except
for BB1 and the delta = 1 edge of BB10, Kendall tau are numerical (see
CopulaFamily).

Each family also defines a canonical one-dimensional section used to invert
Kendall tau: a fixed second parameter cannot reach the whole of [0, 1) for
BB1, BB7 and BB8, so those use a curve through the parameter space.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import TauRangeError
from .base import CopulaFamily, ParamBound, log1mexp, safe_log


class BB1(CopulaFamily):
    """BB1 (Clayton-Gumbel), theta > 0, delta >= 1.

    x = u^-t - 1, y = v^-t - 1, z = (x^d + y^d)^{1/d}:
    C = (1 + z)^{-1/t}
    h = (1 + z)^{-1/t - 1} z^{1-d} x^{d-1} u^{-t-1}
    c = (1+z)^{-1/t-2} (x^d+y^d)^{1/d-2} (xy)^{d-1} (uv)^{-t-1} [t(d-1) + (td+1) z]
    tau = 1 - 2/(d(t+2)); lambda_L = 2^{-1/(td)}, lambda_U = 2 - 2^{1/d}.
    Canonical section: theta = 2(delta - 1), i.e. tau = 1 - 1/delta^2.
    """

    tag = "bb1"
    param_names = ("theta", "delta")
    bounds = (ParamBound(0.0, 30.0), ParamBound(1.0, 30.0, lower_closed=True))

    @staticmethod
    def _parts(u, v, theta, delta):
        # log(u^-t - 1) = -t log u + log(1 - u^t)
        log_x = -theta * np.log(u) + log1mexp(theta * np.log(u))
        log_y = -theta * np.log(v) + log1mexp(theta * np.log(v))
        m = np.maximum(log_x, log_y)
        log_s = delta * m + np.log(np.exp(delta * (log_x - m)) + np.exp(delta * (log_y - m)))
        log_z = log_s / delta
        return log_x, log_y, log_s, log_z

    def cdf(self, u, v, params):
        theta, delta = params
        *_, log_z = self._parts(u, v, theta, delta)
        return np.exp(-np.logaddexp(0.0, log_z) / theta)

    def log_density(self, u, v, params):
        theta, delta = params
        log_x, log_y, log_s, log_z = self._parts(u, v, theta, delta)
        return (
            (-1.0 / theta - 2.0) * np.logaddexp(0.0, log_z) + (1.0 / delta - 2.0) * log_s
            + (delta - 1.0) * (log_x + log_y) + (-theta - 1.0) * (np.log(u) + np.log(v))
            + np.logaddexp(safe_log(theta * (delta - 1.0)), math.log(theta * delta + 1.0) + log_z)
        )

    def hfunc(self, v, u, params):
        theta, delta = params
        log_x, _, _, log_z = self._parts(u, v, theta, delta)
        return np.clip(
            np.exp(
                (-1.0 / theta - 1.0) * np.logaddexp(0.0, log_z) + (1.0 - delta) * log_z
                + (delta - 1.0) * log_x + (-theta - 1.0) * np.log(u)
            ),
            0.0, 1.0,
        )

    def tau(self, params):
        theta, delta = params
        return 1.0 - 2.0 / (delta * (theta + 2.0))

    def tau_to_params(self, tau):
        if not 0.0 < tau < 1.0 - 1.0 / 15.0**2:
            raise TauRangeError(f"{self.tag} cannot attain tau={tau!r}; range is (0, 0.9956)")
        delta = 1.0 / math.sqrt(1.0 - tau)
        return (2.0 * (delta - 1.0), delta)

    def tail_dependence(self, params):
        theta, delta = params
        return 2.0 ** (-1.0 / (theta * delta)), 2.0 - 2.0 ** (1.0 / delta)

    def tail_order(self, params):
        theta, delta = params
        return 1.0, (1.0 if delta > 1.0 else 2.0)


class BB7(CopulaFamily):
    """BB7 (Joe-Clayton), theta >= 1, delta > 0.

    a = 1 - (1-u)^t, b = 1 - (1-v)^t, s = a^-d + b^-d - 2, w = (1+s)^{-1/d}:
    C = 1 - (1 - w)^{1/t}
    h = (1-w)^{1/t-1} (1+s)^{-1/d-1} a^{-d-1} (1-u)^{t-1}
    c = (ab)^{-d-1} ((1-u)(1-v))^{t-1} (1-w)^{1/t-2} (1+s)^{-1/d-2} [t(1+d)(1-w) + (t-1)w]
    lambda_L = 2^{-1/d}, lambda_U = 2 - 2^{1/t}.
    Canonical section: theta = 1 + s, delta = s.
    """

    tag = "bb7"
    param_names = ("theta", "delta")
    bounds = (ParamBound(1.0, 30.0, lower_closed=True), ParamBound(0.0, 30.0))

    @staticmethod
    def _parts(u, v, theta, delta):
        log_ub = np.log1p(-u)
        log_vb = np.log1p(-v)
        log_a = log1mexp(theta * log_ub)
        log_b = log1mexp(theta * log_vb)
        # log(1 + s) = log(a^-d + b^-d - 1); the sum is at least 2
        big = np.logaddexp(-delta * log_a, -delta * log_b)
        with np.errstate(over="ignore", invalid="ignore"):
            near = np.log1p(np.expm1(-delta * log_a) + np.expm1(-delta * log_b))
        log_1s = np.where(big > 1.5, big + np.log1p(-np.exp(-big)), near)
        log_1mw = log1mexp(-log_1s / delta)
        return log_ub, log_vb, log_a, log_b, log_1s, log_1mw

    def cdf(self, u, v, params):
        theta, delta = params
        *_, log_1mw = self._parts(u, v, theta, delta)
        return -np.expm1(log_1mw / theta)

    def log_density(self, u, v, params):
        theta, delta = params
        log_ub, log_vb, log_a, log_b, log_1s, log_1mw = self._parts(u, v, theta, delta)
        w = np.exp(-log_1s / delta)
        return (
            (-delta - 1.0) * (log_a + log_b) + (theta - 1.0) * (log_ub + log_vb)
            + (1.0 / theta - 2.0) * log_1mw + (-1.0 / delta - 2.0) * log_1s
            + np.log(theta * (1.0 + delta) * np.exp(log_1mw) + (theta - 1.0) * w)
        )

    def hfunc(self, v, u, params):
        theta, delta = params
        log_ub, _, log_a, _, log_1s, log_1mw = self._parts(u, v, theta, delta)
        return np.clip(
            np.exp(
                (1.0 / theta - 1.0) * log_1mw + (-1.0 / delta - 1.0) * log_1s
                + (-delta - 1.0) * log_a + (theta - 1.0) * log_ub
            ),
            0.0, 1.0,
        )

    def canonical_range(self):
        return 1e-6, 28.0

    def canonical_params(self, s):
        return (1.0 + s, s)

    def tail_dependence(self, params):
        theta, delta = params
        return 2.0 ** (-1.0 / delta), 2.0 - 2.0 ** (1.0 / theta)

    def tail_order(self, params):
        theta, _ = params
        return 1.0, (1.0 if theta > 1.0 else 2.0)


class BB8(CopulaFamily):
    """BB8 (Joe-Frank), theta >= 1, 0 < delta <= 1.

    eta = 1 - (1-d)^t, p = 1 - (1-du)^t, q = 1 - (1-dv)^t, r = 1 - pq/eta:
    C = (1 - r^{1/t}) / d
    h = r^{1/t-1} (q/eta) (1-du)^{t-1}
    c = (d/eta) ((1-du)(1-dv))^{t-1} r^{1/t-2} (t - 1 + r)
    r is evaluated as r eta = (1-du)^t q + ((1-dv)^t - (1-d)^t), both terms nonnegative.
    delta = 1 is the Joe copula; theta = 1 is independence.
    Canonical section: theta = 1 + s, delta = (1+s)/(2+s).
    """

    tag = "bb8"
    param_names = ("theta", "delta")
    bounds = (ParamBound(1.0, 50.0, lower_closed=True), ParamBound(0.0, 1.0, upper_closed=True))

    @staticmethod
    def _parts(u, v, theta, delta):
        log_du = np.log1p(-delta * u)
        log_dv = np.log1p(-delta * v)
        log_q = log1mexp(theta * log_dv)
        if delta < 1.0:
            log_eta = float(log1mexp(theta * math.log1p(-delta)))
            log_gap = theta * log_dv + log1mexp(theta * (math.log1p(-delta) - log_dv))
        else:
            log_eta = 0.0
            log_gap = theta * log_dv
        log_r = np.minimum(np.logaddexp(theta * log_du + log_q, log_gap) - log_eta, 0.0)
        return log_eta, log_du, log_dv, log_q, log_r

    def cdf(self, u, v, params):
        theta, delta = params
        *_, log_r = self._parts(u, v, theta, delta)
        return -np.expm1(log_r / theta) / delta

    def log_density(self, u, v, params):
        theta, delta = params
        log_eta, log_du, log_dv, _, log_r = self._parts(u, v, theta, delta)
        return (
            math.log(delta) - log_eta + (theta - 1.0) * (log_du + log_dv)
            + (1.0 / theta - 2.0) * log_r + np.log(theta - 1.0 + np.exp(log_r))
        )

    def hfunc(self, v, u, params):
        theta, delta = params
        log_eta, log_du, _, log_q, log_r = self._parts(u, v, theta, delta)
        return np.clip(
            np.exp((1.0 / theta - 1.0) * log_r + (theta - 1.0) * log_du + log_q - log_eta),
            0.0, 1.0,
        )

    def canonical_range(self):
        return 0.0, 48.0

    def canonical_params(self, s):
        return (1.0 + s, (1.0 + s) / (2.0 + s))

    def tail_dependence(self, params):
        theta, delta = params
        return 0.0, (2.0 - 2.0 ** (1.0 / theta) if delta == 1.0 else 0.0)

    def tail_order(self, params):
        theta, delta = params
        return 2.0, (1.0 if delta == 1.0 and theta > 1.0 else 2.0)

    def is_independence(self, params):
        return params[0] == 1.0


class BB10(CopulaFamily):
    """BB10, theta > 0, 0 <= delta <= 1.

    D = 1 - d(1 - u^t)(1 - v^t), E = 1 - d(1 - v^t):
    C = uv D^{-1/t}
    h = v E D^{-1/t-1}
    c = D^{-1/t-2} [(E + d t v^t) D - (1+t) d v^t E (1 - u^t)]
      = D^{-1/t-2} [E (1 - d + d u^t) + t d u^t v^t]
    With A = 1 - d, D = A + d(u^t + v^t (1 - u^t)) and E = A + d v^t are sums of
    nonnegative terms and are evaluated on the log scale.
    delta = 0 is independence. delta = 1 is the Clayton copula
    (u^-t + v^-t - 1)^{-1/t} with tau = t/(t+2) and lambda_L = 2^{-1/t};
    otherwise tail order 2 in both tails.
    Canonical section: delta = 1, solving for theta.
    """

    tag = "bb10"
    param_names = ("theta", "delta")
    bounds = (ParamBound(0.0, 50.0), ParamBound(0.0, 1.0, lower_closed=True, upper_closed=True))

    @staticmethod
    def _parts(u, v, theta, delta):
        log_ut = theta * np.log(u)
        log_vt = theta * np.log(v)
        log_a = safe_log(1.0 - delta)
        log_d = safe_log(delta)
        log_big_d = np.logaddexp(log_a, log_d + np.logaddexp(log_ut, log_vt + log1mexp(log_ut)))
        log_e = np.logaddexp(log_a, log_d + log_vt)
        return log_ut, log_vt, log_a, log_d, log_big_d, log_e

    def cdf(self, u, v, params):
        theta, delta = params
        *_, log_big_d, _ = self._parts(u, v, theta, delta)
        return np.exp(np.log(u) + np.log(v) - log_big_d / theta)

    def log_density(self, u, v, params):
        theta, delta = params
        log_ut, log_vt, log_a, log_d, log_big_d, log_e = self._parts(u, v, theta, delta)
        log_core = np.logaddexp(
            log_e + np.logaddexp(log_a, log_d + log_ut),
            math.log(theta) + log_d + log_ut + log_vt,
        )
        return (-1.0 / theta - 2.0) * log_big_d + log_core

    def hfunc(self, v, u, params):
        theta, delta = params
        *_, log_big_d, log_e = self._parts(u, v, theta, delta)
        return np.clip(np.exp(np.log(v) + log_e - (1.0 / theta + 1.0) * log_big_d), 0.0, 1.0)

    def tau(self, params):
        theta, delta = params
        if delta == 1.0:
            return theta / (theta + 2.0)
        return super().tau(params)

    def canonical_range(self):
        return 1e-6, 50.0 - 1e-9

    def canonical_params(self, s):
        return (s, 1.0)

    def tail_dependence(self, params):
        theta, delta = params
        return (2.0 ** (-1.0 / theta) if delta == 1.0 else 0.0), 0.0

    def tail_order(self, params):
        theta, delta = params
        return (1.0 if delta == 1.0 else 2.0), 2.0

    def is_independence(self, params):
        return params[1] == 0.0
