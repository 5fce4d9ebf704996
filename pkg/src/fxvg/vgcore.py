"""Variance gamma process: parameters, martingale correction, densities,
likelihood and moment formulas.

Time is measured in years. Daily returns use 252 trading days per year and
option maturities use ACT/365.
"""
import math
from dataclasses import dataclass

import numpy as np

from .specfun import (
    DEFAULT_QUAD,
    centred_panels,
    gamma_log_peak,
    integrate_batch,
    ln_gamma,
    log_bessel_k,
)

TRADING_DAYS = 252
CALENDAR_DAYS = 365
DAILY_T = 1.0 / TRADING_DAYS

_LOG_2PI = math.log(2.0 * math.pi)


class DomainError(ValueError):
    """Arguments outside the model's domain of validity."""


@dataclass(frozen=True)
class VgParams:
    """Variance gamma parameters.

    sigma : volatility of the time-changed Brownian motion (per sqrt year)
    nu : variance rate of the gamma time change (years)
    theta : drift of the time-changed Brownian motion (per year)
    """

    sigma: float
    nu: float
    theta: float = 0.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if not self.nu > 0:
            raise DomainError(f"nu must be positive, got {self.nu}")
        if not math.isfinite(self.theta):
            raise DomainError("theta must be finite")
        if not self.martingale_arg > 0:
            raise DomainError(
                "1 - theta*nu - sigma^2*nu/2 must be positive "
                f"(got {self.martingale_arg:.6g} for {self})"
            )

    @property
    def martingale_arg(self):
        return 1.0 - self.theta * self.nu - 0.5 * self.sigma ** 2 * self.nu

    def symmetric(self):
        return VgParams(self.sigma, self.nu, 0.0)

    def as_dict(self):
        return {"sigma": self.sigma, "nu": self.nu, "theta": self.theta}


@dataclass(frozen=True)
class GkParams:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")

    def as_dict(self):
        return {"sigma": self.sigma}


@dataclass(frozen=True)
class MarketEnv:
    """Spot (domestic per unit of foreign) and continuously compounded rates."""

    spot: float
    r_d: float = 0.0
    r_f: float = 0.0

    def __post_init__(self):
        if not self.spot > 0:
            raise DomainError(f"spot must be positive, got {self.spot}")


@dataclass(frozen=True)
class DensityParams:
    """VG parameters plus the horizon and annual drift used to centre returns."""

    vg: VgParams
    horizon_t: float = DAILY_T
    drift_m: float = 0.0

    def __post_init__(self):
        if not self.horizon_t > 0:
            raise DomainError(f"horizon_t must be positive, got {self.horizon_t}")

    @property
    def shape(self):
        return self.horizon_t / self.vg.nu


def omega(vg):
    """Martingale correction per unit time, (1/nu) log(1 - theta nu - sigma^2 nu / 2).

    ``exp(omega * t) * E[exp(X(t))] == 1``.
    """
    if not vg.martingale_arg > 0:
        raise DomainError("martingale correction undefined for these parameters")
    return math.log1p(-vg.theta * vg.nu - 0.5 * vg.sigma ** 2 * vg.nu) / vg.nu


def center_returns(returns, params):
    """Map log returns z to the VG increment x = z - m t - omega t."""
    z = np.asarray(returns, dtype=float)
    t = params.horizon_t
    return z - params.drift_m * t - omega(params.vg) * t


def vg_log_density(x, params):
    """Log of the VG density of the increment X(t) at ``x``.

    Uses the Bessel-K closed form. At ``x == 0`` the density is finite only
    when t/nu > 1/2; otherwise +inf is returned.
    """
    x = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x).ravel()
    sig, nu, th = params.vg.sigma, params.vg.nu, params.vg.theta
    t = params.horizon_t
    g = t / nu
    order = g - 0.5
    s2 = sig * sig
    bsq = 2.0 * s2 / nu + th * th
    const = (
        math.log(2.0) - g * math.log(nu) - 0.5 * _LOG_2PI - math.log(sig) - ln_gamma(g)
    )
    out = np.empty_like(flat)
    zero = flat == 0.0
    nz = ~zero
    if np.any(nz):
        xs = flat[nz]
        ax = np.abs(xs)
        arg = ax * math.sqrt(bsq) / s2
        out[nz] = (
            const
            + th * xs / s2
            + (g / 2.0 - 0.25) * (2.0 * np.log(ax) - math.log(bsq))
            + log_bessel_k(order, arg)
        )
    if np.any(zero):
        if order > 0:
            # K_mu(z) ~ Gamma(mu)/2 (2/z)^mu as z -> 0
            out[zero] = const + math.log(0.5) + ln_gamma(order) + order * math.log(2.0 * s2 / bsq)
        else:
            out[zero] = np.inf
    out = out.reshape(x.shape)
    return float(out) if out.ndim == 0 else out


def vg_density(x, params):
    """VG density of the centred log return ``x`` (the increment X(t))."""
    out = np.exp(vg_log_density(x, params))
    return float(out) if np.ndim(out) == 0 else out


def mixing_density(x, params, quad=DEFAULT_QUAD):
    """VG density by integrating the conditional normal over gamma time.

    Independent of the Bessel closed form; used as its oracle.
    """
    x = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x).ravel()
    sig, nu, th = params.vg.sigma, params.vg.nu, params.vg.theta
    s2 = sig * sig
    g = params.horizon_t / nu
    p = g - 0.5
    # integrand in v = log(gap): exp(const + p v - a e^-v - b e^v)
    a = flat * flat / (2.0 * s2)
    b = 1.0 / nu + th * th / (2.0 * s2)
    disc = np.sqrt(p * p + 4.0 * a * b)
    out = np.empty_like(flat)
    degenerate = (a == 0.0) & (p <= 0.0)
    out[degenerate] = np.inf
    live = ~degenerate
    if not np.any(live):
        out = out.reshape(x.shape)
        return float(out) if out.ndim == 0 else out
    a, disc, xs = a[live], disc[live], flat[live]
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.where(p >= 0, (p + disc) / (2.0 * b), 2.0 * a / (disc - p))
    vstar = np.log(y)
    big_a = a / y
    big_b = b * y
    # log-integrand at the mode, arranged so the large gamma-shape terms
    # cancel analytically
    rho = vstar - math.log(g * nu)
    tilt = nu * th * th / (2.0 * s2)
    log_peak = (
        th * xs / s2
        - 0.5 * math.log(2.0 * math.pi * s2)
        + float(gamma_log_peak(g))
        - g * (tilt * np.exp(rho) + np.expm1(rho) - rho)
        - 0.5 * vstar
        - big_a
    )

    def logf(w):
        with np.errstate(over="ignore"):
            return -big_a * (np.expm1(-w) + w) - big_b * (np.expm1(w) - w)

    width = np.minimum(1.0, 1.0 / np.sqrt(big_a + big_b))
    edges = centred_panels(logf, width, 50.0)

    def integrand(w, item):
        ai, bi = big_a[item][:, None], big_b[item][:, None]
        with np.errstate(over="ignore"):
            return np.exp(-ai * (np.expm1(-w) + w) - bi * (np.expm1(w) - w))

    vals, _ = integrate_batch(integrand, edges, quad)
    out[live] = np.exp(log_peak) * vals
    out = out.reshape(x.shape)
    return float(out) if out.ndim == 0 else out


def log_likelihood(returns, params):
    """Sum of log VG densities of the centred returns.

    Returns -inf if any density underflows to zero.
    """
    z = np.asarray(returns, dtype=float)
    if z.size == 0:
        raise ValueError("log_likelihood needs at least one return")
    if not np.all(np.isfinite(z)):
        raise ValueError("returns must be finite")
    logs = vg_log_density(center_returns(z, params), params)
    total = float(np.sum(logs))
    if math.isnan(total):
        return -math.inf
    return total


def moments_from_params(vg, drift_c=0.0):
    """Unit-time moment formulas: (mean c + theta, variance, third and fourth central moments).

    The variance and the higher moments are the leading-order expressions
    3 sigma^2 theta nu and 3 sigma^4 (1 + nu).
    """
    s2 = vg.sigma ** 2
    return (
        drift_c + vg.theta,
        s2,
        3.0 * s2 * vg.theta * vg.nu,
        3.0 * s2 * s2 * (1.0 + vg.nu),
    )


def params_from_moments(variance, third_central, fourth_central, mean=None):
    """Invert the unit-time moment formulas.

    Returns ``(VgParams, drift_residual)`` where the residual is
    ``mean - theta`` (None when ``mean`` is not given).

    Raises DomainError when the excess kurtosis is not positive.
    """
    if not variance > 0:
        raise DomainError("variance must be positive")
    sigma = math.sqrt(variance)
    nu = fourth_central / (3.0 * variance * variance) - 1.0
    if not nu > 0:
        raise DomainError("excess kurtosis must be positive to match a VG law")
    theta = third_central / (3.0 * variance * nu)
    params = VgParams(sigma, nu, theta)
    residual = None if mean is None else mean - theta
    return params, residual


def kurtosis_from_nu(nu):
    """Unit-time kurtosis 3 (1 + nu)."""
    if nu < 0:
        raise DomainError("nu must be non-negative")
    return 3.0 * (1.0 + nu)
