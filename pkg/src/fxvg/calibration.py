"""Nelder-Mead simplex optimiser and the historical / weekly calibrations."""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .pricing import MIXING_FALLBACK, price_gk_batch, price_vg_batch
from .specfun import DEFAULT_QUAD, QuadratureError
from .vgcore import (
    DAILY_T,
    TRADING_DAYS,
    DensityParams,
    DomainError,
    GkParams,
    VgParams,
    log_likelihood,
    params_from_moments,
)

logger = logging.getLogger(__name__)

VG = "vg"
SYMMETRIC_VG = "symmetric_vg"
GK = "gk"
VARIANTS = (GK, SYMMETRIC_VG, VG)

SIGMA_BOUNDS = (1e-4, 2.0)
NU_BOUNDS = (1e-4, 2.0)
THETA_BOUNDS = (-0.5, 0.5)
MARTINGALE_MARGIN = 1e-6
OUT_OF_BOX_PENALTY = 1e6
FALLBACK_NU = 0.1


class CalibrationError(ValueError):
    """Data cannot support the requested fit."""


@dataclass(frozen=True)
class SimplexConfig:
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    x_tol: float = 1e-8
    f_tol: float = 1e-12
    max_iters: int = 5000
    restarts: int = 2

    def __post_init__(self):
        if not self.reflection > 0:
            raise ValueError("reflection must be positive")
        if not self.expansion > 1:
            raise ValueError("expansion must exceed 1")
        if not 0 < self.contraction < 1:
            raise ValueError("contraction must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")


@dataclass
class CalibrationResult:
    params: object
    loss: float
    iterations: int = 0
    converged: bool = False
    fallback_used: bool = False
    evaluations: int = 0
    flags: tuple = ()
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.values and self.params is not None:
            if hasattr(self.params, "as_dict"):
                self.values = self.params.as_dict()
            else:
                self.values = {f"x{i}": float(v) for i, v in enumerate(np.ravel(self.params))}

    def to_dict(self):
        return {
            "params": {k: float(v) for k, v in self.values.items()},
            "loss": float(self.loss),
            "iterations": int(self.iterations),
            "evaluations": int(self.evaluations),
            "converged": bool(self.converged),
            "fallback_used": bool(self.fallback_used),
            "flags": list(self.flags),
        }


def _initial_steps(x, lo, hi):
    width = np.where(np.isfinite(hi - lo), hi - lo, 1.0)
    step = np.maximum(0.1 * np.abs(x), 1e-3 * width)
    # point edges back into the box when the forward step would leave it
    return np.where(x + step > hi, -step, step)


def nelder_mead(objective, initial, bounds=None, config=None):
    """Minimise ``objective`` with the Nelder-Mead simplex method.

    Trial points outside ``bounds`` are evaluated at their projection onto
    the box plus ``1e6 * distance``. NaN objective values count as +inf.
    Non-convergence is reported through ``converged``; it never raises.

    Parameters
    ----------
    objective : callable
        Maps a 1-D parameter vector to a float.
    initial : array_like
    bounds : sequence of (low, high) pairs, optional
    config : SimplexConfig, optional

    Returns
    -------
    CalibrationResult
        ``params`` holds the best vertex (a numpy vector).
    """
    config = config or SimplexConfig()
    x0 = np.asarray(initial, dtype=float).ravel()
    n = x0.size
    if bounds is None:
        lo = np.full(n, -np.inf)
        hi = np.full(n, np.inf)
    else:
        lo = np.array([b[0] for b in bounds], dtype=float)
        hi = np.array([b[1] for b in bounds], dtype=float)
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise ValueError("initial point lies outside the bounds")

    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        proj = np.clip(x, lo, hi)
        val = float(objective(proj))
        if math.isnan(val):
            val = math.inf
        dist = float(np.linalg.norm(x - proj))
        return val + OUT_OF_BOX_PENALTY * dist if dist > 0 else val

    f0 = float(objective(x0))
    evals += 1
    if math.isnan(f0):
        raise ValueError("objective is NaN at the initial point")

    rho, chi = config.reflection, config.expansion
    gamma, shrink = config.contraction, config.shrink
    best_x, best_f = x0.copy(), f0
    iterations = 0
    converged = False

    for stage in range(config.restarts + 1):
        steps = _initial_steps(best_x, lo, hi)
        sim = np.tile(best_x, (n + 1, 1))
        for i in range(n):
            sim[i + 1, i] += steps[i]
        fs = np.empty(n + 1)
        fs[0] = best_f
        for i in range(1, n + 1):
            fs[i] = f(sim[i])
        converged = False

        while iterations < config.max_iters:
            order = np.argsort(fs, kind="stable")
            sim, fs = sim[order], fs[order]
            diameter = np.max(np.abs(sim[1:] - sim[0]))
            spread = fs[-1] - fs[0] if np.isfinite(fs[-1]) else math.inf
            if diameter <= config.x_tol or spread <= config.f_tol:
                converged = True
                break
            iterations += 1
            centroid = sim[:-1].mean(axis=0)
            xr = centroid + rho * (centroid - sim[-1])
            fr = f(xr)
            if fr < fs[0]:
                xe = centroid + chi * (xr - centroid)
                fe = f(xe)
                if fe < fr:
                    sim[-1], fs[-1] = xe, fe
                else:
                    sim[-1], fs[-1] = xr, fr
                continue
            if fr < fs[-2]:
                sim[-1], fs[-1] = xr, fr
                continue
            if fr < fs[-1]:
                xc = centroid + gamma * (xr - centroid)
                fc = f(xc)
                if fc <= fr:
                    sim[-1], fs[-1] = xc, fc
                    continue
            else:
                xc = centroid + gamma * (sim[-1] - centroid)
                fc = f(xc)
                if fc < fs[-1]:
                    sim[-1], fs[-1] = xc, fc
                    continue
            sim[1:] = sim[0] + shrink * (sim[1:] - sim[0])
            for i in range(1, n + 1):
                fs[i] = f(sim[i])

        k = int(np.argmin(fs))
        cand = np.clip(sim[k], lo, hi)
        # the projected vertex is re-scored without the penalty
        cand_f = fs[k] if np.array_equal(cand, sim[k]) else float(objective(cand))
        if cand_f < best_f:
            best_x, best_f = cand, cand_f
        if not converged or iterations >= config.max_iters:
            break

    return CalibrationResult(
        params=best_x,
        loss=best_f,
        iterations=iterations,
        converged=converged,
        evaluations=evals,
    )


# -- parameter vectors -------------------------------------------------------


def _bounds(variant):
    if variant == GK:
        return [SIGMA_BOUNDS]
    if variant == SYMMETRIC_VG:
        return [SIGMA_BOUNDS, NU_BOUNDS]
    if variant == VG:
        return [SIGMA_BOUNDS, NU_BOUNDS, THETA_BOUNDS]
    raise ValueError(f"unknown model variant {variant!r}")


def params_to_vector(params, variant):
    if variant == GK:
        return np.array([params.sigma])
    if variant == SYMMETRIC_VG:
        return np.array([params.sigma, params.nu])
    return np.array([params.sigma, params.nu, params.theta])


def vector_to_params(vec, variant):
    """Parameter object for ``vec``, or None when outside the model domain."""
    try:
        if variant == GK:
            return GkParams(float(vec[0]))
        sigma, nu = float(vec[0]), float(vec[1])
        theta = float(vec[2]) if variant == VG else 0.0
        if 1.0 - theta * nu - 0.5 * sigma * sigma * nu <= MARTINGALE_MARGIN:
            return None
        return VgParams(sigma, nu, theta)
    except DomainError:
        return None


def _coerce_initial(params, variant):
    """Clip an initial guess into the box and the martingale-safe region."""
    vec = params_to_vector(params, variant) if not isinstance(params, np.ndarray) else params.copy()
    b = _bounds(variant)
    vec = np.clip(vec, [x[0] for x in b], [x[1] for x in b])
    while variant != GK and vector_to_params(vec, variant) is None:
        vec[1] *= 0.5
    return vec


# -- historical fit ------------------------------------------------------------


def moment_initial_guess(returns, horizon_t=DAILY_T):
    """Initial VG parameters from sample moments of per-period log returns.

    Cumulants scale linearly in time, so the sample cumulants are divided by
    ``horizon_t`` before inverting the unit-time moment formulas. Returns
    ``(VgParams, used_fallback)``.
    """
    z = np.asarray(returns, dtype=float)
    dev = z - z.mean()
    var = float(np.mean(dev ** 2))
    if not (var > 0 and np.ptp(z) > 0):
        raise CalibrationError("returns have zero variance; VG fit is degenerate")
    m3 = float(np.mean(dev ** 3))
    m4 = float(np.mean(dev ** 4))
    var_u = var / horizon_t
    third_u = m3 / horizon_t
    fourth_u = (m4 - 3.0 * var * var) / horizon_t + 3.0 * var_u * var_u
    try:
        params, _ = params_from_moments(var_u, third_u, fourth_u)
        return params, False
    except DomainError:
        logger.warning("excess kurtosis not positive; using nu = %s as initial guess", FALLBACK_NU)
        sigma = min(math.sqrt(var_u), SIGMA_BOUNDS[1])
        return VgParams(sigma, FALLBACK_NU, 0.0), True


def fit_historical(returns, variant=VG, config=None, horizon_t=DAILY_T):
    """Fit a model to a series of per-period (default daily) log returns.

    gk : sigma is the annualised sample standard deviation.
    vg / symmetric_vg : maximum likelihood of the VG density, started from the
    moment-based guess; the symmetric variant pins theta = 0. Returns are
    centred with the sample mean as the annual drift.
    """
    z = np.asarray(returns, dtype=float)
    if z.size < 30:
        raise CalibrationError(f"need at least 30 returns, got {z.size}")
    # np.std of a constant series is rounding noise, not zero
    sd = float(np.std(z, ddof=1)) if np.ptp(z) > 0 else 0.0
    if variant == GK:
        sigma = sd / math.sqrt(horizon_t)
        if sigma > 0:
            return CalibrationResult(GkParams(sigma), loss=0.0, converged=True)
        return CalibrationResult(None, loss=0.0, converged=True, flags=("degenerate",),
                                 values={"sigma": 0.0})
    if variant not in (VG, SYMMETRIC_VG):
        raise ValueError(f"unknown model variant {variant!r}")

    guess, used_fallback = moment_initial_guess(z, horizon_t)
    if variant == SYMMETRIC_VG:
        guess = guess.symmetric()
    x0 = _coerce_initial(guess, variant)
    drift_m = float(z.mean()) / horizon_t

    def objective(vec):
        params = vector_to_params(vec, variant)
        if params is None:
            return math.inf
        ll = log_likelihood(z, DensityParams(params, horizon_t, drift_m))
        # +inf means a centred return sits on the density's pole (t/nu < 1/2);
        # that supremum is degenerate, so such points are inadmissible
        return -ll if ll < math.inf else math.inf

    res = nelder_mead(objective, x0, _bounds(variant), config)
    flags = ("moment_fallback",) if used_fallback else ()
    return CalibrationResult(
        params=vector_to_params(res.params, variant),
        loss=res.loss,
        iterations=res.iterations,
        converged=res.converged,
        evaluations=res.evaluations,
        flags=flags,
    )


# -- weekly risk-neutral fit ----------------------------------------------------


def log_price_mae(model_prices, market_prices):
    """Sum of absolute log-price errors, sum |log C_model - log C_market|.

    Returns +inf when any model price is not positive.
    """
    model = np.asarray(model_prices, dtype=float)
    market = np.asarray(market_prices, dtype=float)
    if np.any(~(model > 0)):
        return math.inf
    return float(np.sum(np.abs(np.log(model) - np.log(market))))


@dataclass(frozen=True)
class Chain:
    """Column arrays for one calibration set of call quotes."""

    spot: np.ndarray
    strike: np.ndarray
    maturity: np.ndarray
    r_d: np.ndarray
    r_f: np.ndarray
    price: np.ndarray

    @classmethod
    def from_quotes(cls, quotes):
        cols = zip(*((q.spot, q.strike, q.maturity_t, q.r_d, q.r_f, q.market_price) for q in quotes))
        return cls(*(np.array(c, dtype=float) for c in cols))

    def __len__(self):
        return self.price.size


def model_prices(chain, params, quad=DEFAULT_QUAD):
    """Model prices for a chain; returns ``(prices, used_fallback)``."""
    if isinstance(params, GkParams):
        return price_gk_batch(chain.spot, chain.strike, chain.maturity, chain.r_d, chain.r_f,
                              params.sigma), False
    prices, methods = price_vg_batch(chain.spot, chain.strike, chain.maturity, chain.r_d,
                                     chain.r_f, params, quad)
    return prices, MIXING_FALLBACK in methods


def fit_weekly_risk_neutral(chain, variant, initial, config=None, quad=DEFAULT_QUAD):
    """Risk-neutral fit to one week's call quotes.

    Minimises the sum of absolute log-price errors over the variant's
    parameters, starting from ``initial`` (typically the historical fit).
    ``chain`` is a Chain or a sequence of OptionQuote.
    """
    if not isinstance(chain, Chain):
        chain = Chain.from_quotes(chain)
    if len(chain) == 0:
        raise CalibrationError("empty option chain")
    if np.any(~(chain.price > 0)):
        raise CalibrationError("market prices must be positive")
    x0 = _coerce_initial(initial, variant)
    fallback = False

    def objective(vec):
        nonlocal fallback
        params = vector_to_params(vec, variant)
        if params is None:
            return math.inf
        try:
            prices, used = model_prices(chain, params, quad)
        except (DomainError, QuadratureError):
            return math.inf
        fallback = fallback or used
        return log_price_mae(prices, chain.price)

    res = nelder_mead(objective, x0, _bounds(variant), config)
    return CalibrationResult(
        params=vector_to_params(res.params, variant),
        loss=res.loss,
        iterations=res.iterations,
        converged=res.converged,
        fallback_used=fallback,
        evaluations=res.evaluations,
    )


__all__ = [
    "Chain",
    "CalibrationError",
    "CalibrationResult",
    "GK",
    "SYMMETRIC_VG",
    "SimplexConfig",
    "TRADING_DAYS",
    "VARIANTS",
    "VG",
    "fit_historical",
    "fit_weekly_risk_neutral",
    "log_price_mae",
    "model_prices",
    "moment_initial_guess",
    "nelder_mead",
    "params_to_vector",
    "vector_to_params",
]
