"""Special-function kernel: log-gamma, Bessel K, normal CDF, and the
gamma mixture of the normal CDF used by the VG closed-form price."""
import math

import numpy as np
from scipy import special

from .bessel import bessel_k, bessel_k_scaled, log_bessel_k
from .quadrature import (
    DEFAULT_QUAD,
    QuadratureError,
    QuadratureSpec,
    centred_panels,
    integrate_batch,
    log_concave_range,
)

__all__ = [
    "DEFAULT_QUAD",
    "QuadratureError",
    "QuadratureSpec",
    "bessel_k",
    "bessel_k_scaled",
    "centred_panels",
    "gamma_kernel_range",
    "gamma_log_kernel",
    "gamma_log_peak",
    "gamma_panels",
    "integrate_batch",
    "ln_gamma",
    "log_bessel_k",
    "log_concave_range",
    "norm_cdf",
    "psi_mixture",
    "psi_mixture_batch",
]

# log-integrand drop at which gamma-kernel tails are truncated
TAIL_DROP = 50.0
PANEL_DOUBLINGS = 14


def ln_gamma(x):
    """Natural log of the gamma function for ``x > 0``."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("ln_gamma requires x > 0")
    if arr.ndim == 0:
        return math.lgamma(float(arr))
    return special.gammaln(arr)


def norm_cdf(x):
    """Standard normal cumulative distribution function."""
    out = special.ndtr(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def _stirling_tail(x):
    """ln Gamma(x) - [(x - 1/2) ln x - x + ln(2 pi)/2] for x >= 10."""
    r = 1.0 / x
    r2 = r * r
    return r * (1 / 12 - r2 * (1 / 360 - r2 * (1 / 1260 - r2 * (1 / 1680 - r2 / 1188))))


def gamma_log_peak(shape):
    """log of the Gamma(shape, 1) density of ``v = log u`` at its mode.

    Equal to ``shape*log(shape) - shape - lnGamma(shape)``, evaluated
    without the cancellation that the direct form suffers for large shapes.
    """
    shape = np.asarray(shape, dtype=float)
    big = shape >= 10.0
    safe = np.where(big, shape, 10.0)
    asym = 0.5 * np.log(safe) - 0.5 * math.log(2 * math.pi) - _stirling_tail(safe)
    small = np.where(big, 1.0, shape)
    direct = small * np.log(small) - small - special.gammaln(small)
    return np.where(big, asym, direct)


def gamma_log_kernel(shape, w):
    """log density of ``v = log u`` for U ~ Gamma(shape, 1), at ``v = log(shape) + w``."""
    return gamma_log_peak(shape) - shape * (np.expm1(w) - w)


def gamma_kernel_range(shape, drop=TAIL_DROP):
    """Offsets ``w`` on either side of the mode where ``shape*(e^w - 1 - w) = drop``.

    Newton's method on the convex ``expm1(w) - w - c`` converges monotonically
    from the starting points used here, which lie outside the roots.
    """
    c = drop / np.atleast_1d(np.asarray(shape, dtype=float))
    lo = -1.0 - c
    hi = np.minimum(np.sqrt(2.0 * c), 2.0 * np.log1p(c) + 1.0)
    for _ in range(60):
        step_lo = (np.expm1(lo) - lo - c) / np.expm1(lo)
        step_hi = (np.expm1(hi) - hi - c) / np.expm1(hi)
        lo = lo - step_lo
        hi = hi - step_hi
        if np.all(np.abs(step_lo) <= 1e-14 * np.abs(lo)) and np.all(np.abs(step_hi) <= 1e-14 * hi):
            break
    return lo, hi


def gamma_panels(shape, extra=None, drop=TAIL_DROP, doublings=PANEL_DOUBLINGS):
    """Panel edges, as offsets ``w`` from the mode, for a gamma-kernel integral.

    The kernel ``exp(-shape*(e^w - 1 - w))`` is log-concave; the range is cut
    where it has fallen by ``drop`` below its peak. Panels widen
    geometrically away from the mode, starting at the kernel width.
    ``extra`` is an optional (n, k) array of further breakpoints in ``w``
    (NaN = none). Returns an (n, p+1) array of increasing edges.
    """
    shape = np.atleast_1d(np.asarray(shape, dtype=float))

    def logf(w):
        with np.errstate(over="ignore"):
            return -shape * (np.expm1(w) - w)

    width = np.minimum(1.0, 1.0 / np.sqrt(shape))
    return centred_panels(logf, width, drop, extra=extra, doublings=doublings,
                          limits=gamma_kernel_range(shape, drop))


def psi_mixture_batch(a, b, gamma_shape, quad=DEFAULT_QUAD):
    """Vectorised Psi(a, b, g) = E[N(a/sqrt(U) + b*sqrt(U))], U ~ Gamma(g, 1)."""
    a, b, g = np.broadcast_arrays(
        np.atleast_1d(np.asarray(a, dtype=float)),
        np.atleast_1d(np.asarray(b, dtype=float)),
        np.atleast_1d(np.asarray(gamma_shape, dtype=float)),
    )
    a, b, g = a.ravel(), b.ravel(), g.ravel()
    if np.any(~(g > 0)):
        raise ValueError("gamma_shape must be positive")
    mode = np.log(g)
    peak = gamma_log_peak(g)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # where the CDF argument turns (or crosses zero), and where each of
        # its two terms alone is of order one
        turn = np.where((a != 0) & (b != 0), np.log(np.abs(a / b)), np.nan)
        # near the turn arg = -2 sqrt|ab| sinh((v - turn)/2) for opposite signs,
        # so the step narrows like 1/sqrt|ab|; bracket it where |arg| = 8.3
        half = 2.0 * np.arcsinh(4.15 / np.sqrt(np.abs(a * b)))
        a_one = np.where(a != 0, 2.0 * np.log(np.abs(a)), np.nan)
        b_one = np.where(b != 0, -2.0 * np.log(np.abs(b)), np.nan)
    # N saturates once |arg| > 8, i.e. ~4 log-units past a_one / b_one; a
    # wide panel whose nodes all miss that edge would pass its error test
    extra = np.stack([turn, turn - half, turn - half / 2, turn + half / 2, turn + half,
                      a_one, a_one - 4.0, a_one - 8.0, b_one, b_one + 4.0, b_one + 8.0],
                     axis=1) - mode[:, None]
    edges = gamma_panels(g, extra=extra)

    def integrand(w, item):
        ai, bi, gi = a[item][:, None], b[item][:, None], g[item][:, None]
        v = mode[item][:, None] + w
        with np.errstate(over="ignore", invalid="ignore"):
            left = np.where(ai == 0.0, 0.0, ai * np.exp(-0.5 * v))
            right = np.where(bi == 0.0, 0.0, bi * np.exp(0.5 * v))
            arg = left + right
            arg = np.where(np.isnan(arg), 0.0, arg)
            dens = np.exp(peak[item][:, None] - gi * (np.expm1(w) - w))
        return special.ndtr(arg) * dens

    vals, _ = integrate_batch(integrand, edges, quad)
    return np.clip(vals, 0.0, 1.0)


def psi_mixture(a, b, gamma_shape, quad=DEFAULT_QUAD):
    """Gamma mixture of the standard normal CDF.

    Psi(a, b, g) = int_0^inf N(a/sqrt(u) + b*sqrt(u)) u^(g-1) e^(-u) / Gamma(g) du

    Raises QuadratureError if ``quad`` tolerances are not met.
    """
    return float(psi_mixture_batch(a, b, gamma_shape, quad)[0])
