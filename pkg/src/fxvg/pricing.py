"""European FX call pricers: Garman-Kohlhagen, the VG closed form, and two
independent VG oracles (gamma-mixing quadrature and Monte Carlo)."""
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .specfun import (
    DEFAULT_QUAD,
    QuadratureError,
    gamma_log_peak,
    gamma_panels,
    integrate_batch,
    psi_mixture_batch,
)
from .vgcore import CALENDAR_DAYS, DomainError, GkParams, MarketEnv, VgParams, omega

CLOSED_FORM = "closed-form"
MIXING_FALLBACK = "mixing-fallback"
GK = "gk"


@dataclass(frozen=True)
class OptionSpec:
    strike: float
    maturity_t: float
    kind: str = "european_call"

    def __post_init__(self):
        if not self.strike > 0:
            raise DomainError(f"strike must be positive, got {self.strike}")
        if not self.maturity_t > 0:
            raise DomainError(f"maturity must be positive, got {self.maturity_t}")
        if self.kind != "european_call":
            raise DomainError(f"unsupported option kind {self.kind!r}")

    @classmethod
    def from_days(cls, strike, days):
        return cls(strike, days / CALENDAR_DAYS)


@dataclass(frozen=True)
class VgPricingIntermediates:
    d: float
    c1: float
    c2: float
    alpha: float
    s: float


@dataclass(frozen=True)
class PriceResult:
    price: float
    method: str


def price_gk(env, gk, opt):
    """Garman-Kohlhagen call price."""
    return float(
        price_gk_batch(env.spot, opt.strike, opt.maturity_t, env.r_d, env.r_f, gk.sigma)[0]
    )


def price_gk_batch(spot, strike, maturity, r_d, r_f, sigma):
    spot, strike, t, r_d, r_f, sigma = (
        np.atleast_1d(np.asarray(v, dtype=float))
        for v in (spot, strike, maturity, r_d, r_f, sigma)
    )
    vol = sigma * np.sqrt(t)
    fwd_leg = spot * np.exp(-r_f * t)
    strike_leg = strike * np.exp(-r_d * t)
    with np.errstate(divide="ignore", invalid="ignore"):
        d1 = (np.log(spot / strike) + (r_d - r_f) * t) / vol + 0.5 * vol
    d2 = d1 - vol
    return fwd_leg * special.ndtr(d1) - strike_leg * special.ndtr(d2)


def _intermediates_arrays(spot, strike, t, r_d, r_f, vg):
    sig, nu, th = vg.sigma, vg.nu, vg.theta
    s = sig / math.sqrt(1.0 + (th / sig) ** 2 * nu / 2.0)
    # The sign of alpha is fixed by agreement with the mixing-integral and
    # Monte Carlo prices for X = theta*g + sigma*W(g).
    alpha = th * s / sig ** 2
    c1 = nu * (alpha + s) ** 2 / 2.0
    c2 = nu * alpha ** 2 / 2.0
    if not (c1 < 1.0 and c2 < 1.0):
        raise DomainError(
            f"closed form needs c1 < 1 and c2 < 1 (c1={c1:.6g}, c2={c2:.6g})"
        )
    d = (np.log(spot / strike) + (r_d - r_f) * t + (t / nu) * (math.log1p(-c1) - math.log1p(-c2))) / s
    return d, c1, c2, alpha, s


def vg_intermediates(env, vg, opt):
    """The quantities d, c1, c2, alpha, s of the closed-form VG price.

    Raises DomainError when 1 - c1 <= 0.
    """
    d, c1, c2, alpha, s = _intermediates_arrays(
        env.spot, opt.strike, opt.maturity_t, env.r_d, env.r_f, vg
    )
    return VgPricingIntermediates(float(d), c1, c2, alpha, s)


def price_vg_closed_batch(spot, strike, maturity, r_d, r_f, vg, quad=DEFAULT_QUAD):
    """Closed-form VG call prices for arrays of contracts sharing ``vg``."""
    spot, strike, t, r_d, r_f = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(v, dtype=float)) for v in (spot, strike, maturity, r_d, r_f))
    )
    nu = vg.nu
    d, c1, c2, alpha, s = _intermediates_arrays(spot, strike, t, r_d, r_f, vg)
    shape = t / nu
    a1 = d * math.sqrt((1.0 - c1) / nu)
    b1 = (alpha + s) * math.sqrt(nu / (1.0 - c1))
    a2 = d * math.sqrt((1.0 - c2) / nu)
    b2 = alpha * math.sqrt(nu / (1.0 - c2))
    n = spot.size
    psi = psi_mixture_batch(
        np.concatenate([a1, a2]),
        np.concatenate([np.full(n, b1), np.full(n, b2)]),
        np.concatenate([shape, shape]),
        quad,
    )
    return spot * np.exp(-r_f * t) * psi[:n] - strike * np.exp(-r_d * t) * psi[n:]


def price_vg_closed(env, vg, opt, quad=DEFAULT_QUAD):
    """Closed-form VG call price via the Psi gamma-mixture function."""
    return float(
        price_vg_closed_batch(env.spot, opt.strike, opt.maturity_t, env.r_d, env.r_f, vg, quad)[0]
    )


def price_vg_mixing_batch(spot, strike, maturity, r_d, r_f, vg, quad=DEFAULT_QUAD):
    """VG call prices by integrating conditional Black prices over gamma time."""
    spot, strike, t, r_d, r_f = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(v, dtype=float)) for v in (spot, strike, maturity, r_d, r_f))
    )
    sig, nu, th = vg.sigma, vg.nu, vg.theta
    om = omega(vg)
    shape = t / nu
    # gamma time g = nu * u with u ~ Gamma(shape, 1); integrate over
    # w = log(u) - log(shape)
    mode = np.log(shape)
    peak = gamma_log_peak(shape)
    # the forward grows like exp((theta + sigma^2/2) g); a breakpoint where
    # that growth is of order one keeps the tilted mass resolved
    growth = (th + 0.5 * sig * sig) * nu
    with np.errstate(divide="ignore"):
        tilt_pt = np.full_like(shape, -np.log(abs(growth)) if growth != 0 else np.nan) - mode
    fwd0 = spot * np.exp((r_d - r_f + om) * t)
    log_mk = np.log(fwd0 / strike)
    edges = gamma_panels(shape, extra=tilt_pt[:, None])

    def integrand(w, item):
        u = np.exp(mode[item][:, None] + w)
        gap = nu * u
        sh = shape[item][:, None]
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            dens = np.exp(peak[item][:, None] - sh * (np.expm1(w) - w))
            drift = (th + 0.5 * sig * sig) * gap
            vol = sig * np.sqrt(gap)
            lm = log_mk[item][:, None] + drift
            d1 = lm / vol + 0.5 * vol
            d2 = d1 - vol
            kk = strike[item][:, None]
            fwd = kk * np.exp(lm)
            call = fwd * special.ndtr(d1) - kk * special.ndtr(d2)
            call = np.where(vol > 0, call, np.maximum(fwd - kk, 0.0))
        return call * dens

    vals, _ = integrate_batch(integrand, edges, quad)
    return np.exp(-r_d * t) * vals


def price_vg_mixing(env, vg, opt, quad=DEFAULT_QUAD):
    """VG call price by gamma-mixing quadrature (oracle for the closed form)."""
    return float(
        price_vg_mixing_batch(env.spot, opt.strike, opt.maturity_t, env.r_d, env.r_f, vg, quad)[0]
    )


def simulate_terminal(env, vg, maturity_t, n_paths, rng):
    """Risk-neutral terminal spots S_T under the VG dynamics."""
    shape = maturity_t / vg.nu
    gap = rng.gamma(shape, vg.nu, size=n_paths)
    z = rng.standard_normal(n_paths)
    x = vg.theta * gap + vg.sigma * np.sqrt(gap) * z
    drift = (env.r_d - env.r_f + omega(vg)) * maturity_t
    return env.spot * np.exp(drift + x)


def price_vg_mc(env, vg, opt, n_paths=1_000_000, seed=42):
    """Monte Carlo VG call price.

    Returns ``(price, standard_error)``; deterministic for a given seed.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    rng = np.random.default_rng(seed)
    st = simulate_terminal(env, vg, opt.maturity_t, n_paths, rng)
    disc = math.exp(-env.r_d * opt.maturity_t)
    payoff = disc * np.maximum(st - opt.strike, 0.0)
    price = float(payoff.mean())
    se = float(payoff.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else math.inf
    return price, se


def price_vg(env, vg, opt, quad=DEFAULT_QUAD):
    """Public VG entry point: closed form, falling back to mixing quadrature.

    Returns a PriceResult whose ``method`` records which pricer was used.
    """
    prices, methods = price_vg_batch(env.spot, opt.strike, opt.maturity_t, env.r_d, env.r_f, vg, quad)
    return PriceResult(float(prices[0]), methods[0])


def price_vg_batch(spot, strike, maturity, r_d, r_f, vg, quad=DEFAULT_QUAD):
    """Batch version of :func:`price_vg`; returns ``(prices, methods)``."""
    try:
        prices = price_vg_closed_batch(spot, strike, maturity, r_d, r_f, vg, quad)
        method = CLOSED_FORM
    except (DomainError, QuadratureError):
        prices = price_vg_mixing_batch(spot, strike, maturity, r_d, r_f, vg, quad)
        method = MIXING_FALLBACK
    return prices, [method] * len(prices)


def price(env, params, opt, quad=DEFAULT_QUAD):
    """Price with either GkParams or VgParams."""
    if isinstance(params, GkParams):
        return PriceResult(price_gk(env, params, opt), GK)
    if isinstance(params, VgParams):
        return price_vg(env, params, opt, quad)
    raise TypeError(f"unsupported parameter type {type(params).__name__}")


def forward_intrinsic(env, opt):
    """Discounted forward intrinsic value max(0, S e^{-r_f T} - K e^{-r_d T})."""
    t = opt.maturity_t
    return max(0.0, env.spot * math.exp(-env.r_f * t) - opt.strike * math.exp(-env.r_d * t))


__all__ = [
    "CLOSED_FORM",
    "GK",
    "MIXING_FALLBACK",
    "MarketEnv",
    "OptionSpec",
    "PriceResult",
    "VgPricingIntermediates",
    "forward_intrinsic",
    "price",
    "price_gk",
    "price_gk_batch",
    "price_vg",
    "price_vg_batch",
    "price_vg_closed",
    "price_vg_closed_batch",
    "price_vg_mc",
    "price_vg_mixing",
    "price_vg_mixing_batch",
    "simulate_terminal",
]
