"""Elliptical families: bivariate normal (BVN) and Student t with integer dof.

The bivariate normal CDF follows Genz's Gauss-Legendre evaluation of the
Drezner-Wesolowsky integral (absolute accuracy well below 1e-10); the
bivariate t CDF for integer dof uses the Dunnett-Sobel finite series.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr, ndtri, roots_legendre, stdtr, stdtrit

from ..errors import ParameterDomainError, TauRangeError
from .base import ArrayLike, CopulaFamily, ParamBound

_TWO_PI = 2.0 * math.pi
_RHO_BOUND = ParamBound(-1.0, 1.0)


def _legendre_for(r: float) -> tuple[np.ndarray, np.ndarray]:
    n = 6 if abs(r) < 0.3 else 12 if abs(r) < 0.75 else 20
    x, w = roots_legendre(n)
    return 1.0 + x, w


def bvn_upper(h: ArrayLike, k: ArrayLike, r: float) -> np.ndarray:
    """P(X > h, Y > k) for a standard bivariate normal with correlation r."""
    h, k = np.broadcast_arrays(
        np.clip(np.asarray(h, dtype=float), -38.0, 38.0),
        np.clip(np.asarray(k, dtype=float), -38.0, 38.0),
    )
    if r == 0.0:
        return ndtr(-h) * ndtr(-k)
    x, w = _legendre_for(r)
    hk = h * k
    with np.errstate(all="ignore"):
        if abs(r) < 0.925:
            hs = 0.5 * (h * h + k * k)
            asr = 0.5 * math.asin(r)
            sn = np.sin(asr * x)
            terms = np.exp((sn * hk[..., None] - hs[..., None]) / (1.0 - sn**2))
            bvn = (terms @ w) * asr / _TWO_PI + ndtr(-h) * ndtr(-k)
            return np.clip(bvn, 0.0, 1.0)
        if r < 0:
            k = -k
            hk = -hk
        as_ = 1.0 - r * r
        a = math.sqrt(as_)
        bs = (h - k) ** 2
        asr = -0.5 * (bs / as_ + hk)
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 80.0
        bvn = np.where(
            asr > -100.0,
            a * np.exp(asr) * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_**2),
            0.0,
        )
        b = np.sqrt(bs)
        sp = math.sqrt(_TWO_PI) * ndtr(-b / a)
        bvn = np.where(
            hk > -100.0,
            bvn - np.exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0),
            bvn,
        )
        half = 0.5 * a
        xs = (half * x) ** 2
        asr_x = -0.5 * (bs[..., None] / xs + hk[..., None])
        sp_x = 1.0 + c[..., None] * xs * (1.0 + 5.0 * d[..., None] * xs)
        rs = np.sqrt(1.0 - xs)
        ep = np.exp(-0.5 * hk[..., None] * xs / (1.0 + rs) ** 2) / rs
        t = np.where(asr_x > -100.0, np.exp(asr_x) * (sp_x - ep), 0.0) @ w
        bvn = (half * t - bvn) / _TWO_PI
        if r > 0:
            bvn = bvn + ndtr(-np.maximum(h, k))
        else:
            lower = np.where(h < 0, ndtr(k) - ndtr(h), ndtr(-h) - ndtr(-k))
            bvn = np.where(h >= k, -bvn, lower - bvn)
    return np.clip(bvn, 0.0, 1.0)


def bvn_cdf(h: ArrayLike, k: ArrayLike, r: float) -> np.ndarray:
    """P(X <= h, Y <= k) for a standard bivariate normal with correlation r."""
    return bvn_upper(-np.asarray(h, dtype=float), -np.asarray(k, dtype=float), r)


def bvt_cdf(h: ArrayLike, k: ArrayLike, r: float, nu: int) -> np.ndarray:
    """P(X <= h, Y <= k) for a standard bivariate t with integer dof ``nu``."""
    dh, dk = np.broadcast_arrays(np.asarray(h, dtype=float), np.asarray(k, dtype=float))
    ors = 1.0 - r * r
    hrk = dh - r * dk
    krh = dk - r * dh
    with np.errstate(all="ignore"):
        xnhk = np.where(np.abs(hrk) + ors > 0, hrk**2 / (hrk**2 + ors * (nu + dk**2)), 0.0)
        xnkh = np.where(np.abs(krh) + ors > 0, krh**2 / (krh**2 + ors * (nu + dh**2)), 0.0)
        hs = np.sign(hrk)
        ks = np.sign(krh)
        if nu % 2 == 0:
            bvt = np.full(dh.shape, math.atan2(math.sqrt(ors), -r) / _TWO_PI)
            gmph = dh / np.sqrt(16.0 * (nu + dh**2))
            gmpk = dk / np.sqrt(16.0 * (nu + dk**2))
            btnckh = 2.0 * np.arctan2(np.sqrt(xnkh), np.sqrt(1.0 - xnkh)) / math.pi
            btpdkh = 2.0 * np.sqrt(xnkh * (1.0 - xnkh)) / math.pi
            btnchk = 2.0 * np.arctan2(np.sqrt(xnhk), np.sqrt(1.0 - xnhk)) / math.pi
            btpdhk = 2.0 * np.sqrt(xnhk * (1.0 - xnhk)) / math.pi
            for j in range(1, nu // 2 + 1):
                bvt = bvt + gmph * (1.0 + ks * btnckh) + gmpk * (1.0 + hs * btnchk)
                btnckh = btnckh + btpdkh
                btpdkh = 2 * j * btpdkh * (1.0 - xnkh) / (2 * j + 1)
                btnchk = btnchk + btpdhk
                btpdhk = 2 * j * btpdhk * (1.0 - xnhk) / (2 * j + 1)
                gmph = gmph * (2 * j - 1) / (2 * j * (1.0 + dh**2 / nu))
                gmpk = gmpk * (2 * j - 1) / (2 * j * (1.0 + dk**2 / nu))
        else:
            qhrk = np.sqrt(dh**2 + dk**2 - 2.0 * r * dh * dk + nu * ors)
            hkrn = dh * dk + r * nu
            hkn = dh * dk - nu
            hpk = dh + dk
            bvt = (
                np.arctan2(-math.sqrt(nu) * (hkn * qhrk + hpk * hkrn), hkn * hkrn - nu * hpk * qhrk)
                / _TWO_PI
            )
            bvt = np.where(bvt < -1e-15, bvt + 1.0, bvt)
            gmph = dh / (_TWO_PI * math.sqrt(nu) * (1.0 + dh**2 / nu))
            gmpk = dk / (_TWO_PI * math.sqrt(nu) * (1.0 + dk**2 / nu))
            btnckh = np.sqrt(xnkh)
            btpdkh = btnckh
            btnchk = np.sqrt(xnhk)
            btpdhk = btnchk
            for j in range(1, (nu - 1) // 2 + 1):
                bvt = bvt + gmph * (1.0 + ks * btnckh) + gmpk * (1.0 + hs * btnchk)
                btpdkh = (2 * j - 1) * btpdkh * (1.0 - xnkh) / (2 * j)
                btnckh = btnckh + btpdkh
                btpdhk = (2 * j - 1) * btpdhk * (1.0 - xnhk) / (2 * j)
                btnchk = btnchk + btpdhk
                gmph = gmph * 2 * j / ((2 * j + 1) * (1.0 + dh**2 / nu))
                gmpk = gmpk * 2 * j / ((2 * j + 1) * (1.0 + dk**2 / nu))
    return np.clip(bvt, 0.0, 1.0)


class Bvn(CopulaFamily):
    """Gaussian copula, C(u,v) = Phi_2(Phi^-1(u), Phi^-1(v); rho).

    Tail order 2/(1+rho) in both tails, no tail dependence.
    """

    tag = "bvn"
    param_names = ("rho",)
    bounds = (_RHO_BOUND,)
    comprehensive = True

    def cdf(self, u, v, params):
        return bvn_cdf(ndtri(u), ndtri(v), params[0])

    def log_density(self, u, v, params):
        rho = params[0]
        x = ndtri(u)
        y = ndtri(v)
        one_m = 1.0 - rho * rho
        return -0.5 * math.log(one_m) - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (
            2.0 * one_m
        )

    def hfunc(self, v, u, params):
        rho = params[0]
        return ndtr((ndtri(v) - rho * ndtri(u)) / math.sqrt(1.0 - rho * rho))

    def hinv(self, w, u, params):
        rho = params[0]
        return ndtr(rho * ndtri(u) + math.sqrt(1.0 - rho * rho) * ndtri(w))

    def tau(self, params):
        return 2.0 / math.pi * math.asin(params[0])

    def tau_to_params(self, tau):
        self._check_tau(tau)
        return (math.sin(0.5 * math.pi * tau),)

    def _check_tau(self, tau: float) -> None:
        if not -1.0 < tau < 1.0:
            raise TauRangeError(f"{self.tag} cannot attain tau={tau!r}; range is (-1, 1)")

    def tail_order(self, params):
        kappa = 2.0 / (1.0 + params[0])
        return kappa, kappa

    def is_independence(self, params):
        return params[0] == 0.0


class StudentT(Bvn):
    """t copula with fixed integer dof.

    h-function: T_{nu+1}((y - rho x) / sqrt((nu + x^2)(1 - rho^2)/(nu + 1))) with
    x, y the T_nu quantiles. Tail dependence 2 T_{nu+1}(-sqrt((nu+1)(1-rho)/(1+rho))).
    """

    def __init__(self, nu: int) -> None:
        if nu < 1:
            raise ParameterDomainError(f"t copula dof must be a positive integer, got {nu!r}")
        self.nu = int(nu)
        self.tag = f"t{self.nu}"

    def cdf(self, u, v, params):
        return bvt_cdf(stdtrit(self.nu, u), stdtrit(self.nu, v), params[0], self.nu)

    def log_density(self, u, v, params):
        rho = params[0]
        nu = self.nu
        x = stdtrit(nu, u)
        y = stdtrit(nu, v)
        one_m = 1.0 - rho * rho
        quad = (x * x + y * y - 2.0 * rho * x * y) / (nu * one_m)
        log_joint = -math.log(_TWO_PI) - 0.5 * math.log(one_m) - 0.5 * (nu + 2) * np.log1p(quad)
        return log_joint - self._log_t_pdf(x) - self._log_t_pdf(y)

    def _log_t_pdf(self, x: np.ndarray) -> np.ndarray:
        nu = self.nu
        const = (
            math.lgamma(0.5 * (nu + 1)) - math.lgamma(0.5 * nu) - 0.5 * math.log(nu * math.pi)
        )
        return const - 0.5 * (nu + 1) * np.log1p(x * x / nu)

    def hfunc(self, v, u, params):
        rho = params[0]
        nu = self.nu
        x = stdtrit(nu, u)
        y = stdtrit(nu, v)
        scale = np.sqrt((nu + x * x) * (1.0 - rho * rho) / (nu + 1))
        return stdtr(nu + 1, (y - rho * x) / scale)

    def hinv(self, w, u, params):
        rho = params[0]
        nu = self.nu
        x = stdtrit(nu, u)
        scale = np.sqrt((nu + x * x) * (1.0 - rho * rho) / (nu + 1))
        return stdtr(nu, rho * x + scale * stdtrit(nu + 1, w))

    def tail_dependence(self, params):
        rho = params[0]
        nu = self.nu
        lam = 2.0 * float(stdtr(nu + 1, -math.sqrt((nu + 1) * (1.0 - rho) / (1.0 + rho))))
        return lam, lam

    def tail_order(self, params):
        return 1.0, 1.0

    def is_independence(self, params):
        return False
