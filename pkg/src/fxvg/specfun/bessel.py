"""Modified Bessel function of the second kind for real order.

Temme's series is used for ``x < 2`` and Steed's continued fraction (CF2)
above it, both at the reduced order ``mu`` in [-1/2, 1/2]; the requested
order is reached by forward recurrence, which is stable for K.

All routines accept a scalar order and scalar-or-array argument.
"""
import math

import numpy as np

__all__ = ["bessel_k", "bessel_k_scaled", "log_bessel_k"]

_EPS = 1e-16
_MAX_ITER = 10000
_CROSSOVER = 2.0

# Taylor coefficients of 1/Gamma(z) about z = 0 (Abramowitz & Stegun 6.1.34);
# _RGAM[k] multiplies z**(k+1).
_RGAM = (
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
)


def _temme_gammas(mu):
    """Return gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu) for |mu| <= 1/2.

    gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu) is summed from the odd
    coefficients directly so there is no cancellation as mu -> 0.
    """
    mu2 = mu * mu
    gam1 = 0.0
    gam2 = 0.0
    # 1/Gamma(1+z) = sum_k _RGAM[k] z**k
    for k in range(len(_RGAM) - 1, -1, -1):
        if k % 2:
            gam1 = gam1 * mu2 + _RGAM[k]
        else:
            gam2 = gam2 * mu2 + _RGAM[k]
    gam1 = -gam1
    gampl = gam2 - mu * gam1
    gammi = gam2 + mu * gam1
    return gam1, gam2, gampl, gammi


def _reduce_order(order):
    a = abs(float(order))
    nl = int(a + 0.5)
    return a, nl, a - nl


def _temme(mu, x):
    """Temme sums: K_mu(x) and x K_{mu+1}(x) / 2, for 0 < x < 2."""
    x2 = 0.5 * x
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
    d = -np.log(x2)
    e = mu * d
    with np.errstate(invalid="ignore", divide="ignore"):
        fact2 = np.where(np.abs(e) < _EPS, 1.0, np.sinh(e) / np.where(e == 0, 1.0, e))
    gam1, gam2, gampl, gammi = _temme_gammas(mu)
    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
    total = ff.copy()
    ee = np.exp(e)
    p = 0.5 * ee / gampl
    q = 0.5 / (ee * gammi)
    c = np.ones_like(x)
    dd = x2 * x2
    total1 = p.copy()
    mu2 = mu * mu
    for i in range(1, _MAX_ITER):
        ff = (i * ff + p + q) / (i * i - mu2)
        c = c * dd / i
        p = p / (i - mu)
        q = q / (i + mu)
        term = c * ff
        total = total + term
        total1 = total1 + c * (p - i * ff)
        if np.all(np.abs(term) < np.abs(total) * _EPS):
            break
    else:  # pragma: no cover - series converges in < 30 terms on (0, 2)
        raise ArithmeticError("Temme series failed to converge")
    return total, total1


def _small_x(mu, x):
    """Temme series: (K_mu(x), K_{mu+1}(x)) for 0 < x < 2."""
    total, total1 = _temme(mu, x)
    with np.errstate(over="ignore"):
        return total, total1 * (2.0 / x)


def _large_x_scaled(mu, x):
    """Steed CF2: (e^x K_mu(x), e^x K_{mu+1}(x)) for x >= 2."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25 - mu * mu
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = -a1
    s = 1.0 + q * delh
    for i in range(1, _MAX_ITER):
        a -= 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        if np.all(np.abs(dels) < np.abs(s) * _EPS):
            break
    else:  # pragma: no cover
        raise ArithmeticError("Steed continued fraction failed to converge")
    h = a1 * h
    k_mu = np.sqrt(math.pi / (2.0 * x)) / s
    k_mu1 = k_mu * (mu + x + 0.5 - h) / x
    return k_mu, k_mu1


def _reduced_pair_scaled(mu, x):
    """(e^x K_mu, e^x K_{mu+1}) at the reduced order over an array of x."""
    k0 = np.empty_like(x)
    k1 = np.empty_like(x)
    small = x < _CROSSOVER
    if np.any(small):
        xs = x[small]
        a, b = _small_x(mu, xs)
        scale = np.exp(xs)
        k0[small] = a * scale
        k1[small] = b * scale
    if np.any(~small):
        a, b = _large_x_scaled(mu, x[~small])
        k0[~small] = a
        k1[~small] = b
    return k0, k1


def _check_args(x):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("bessel_k requires x > 0")
    return arr


def bessel_k_scaled(order, x):
    """Exponentially scaled ``e^x K_order(x)``.

    Raises OverflowError when the value is not representable.
    """
    arr = _check_args(x)
    flat = np.atleast_1d(arr).ravel()
    _, nl, mu = _reduce_order(order)
    k0, k1 = _reduced_pair_scaled(mu, flat)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, nl + 1):
            k0, k1 = k1, (mu + i) * (2.0 / flat) * k1 + k0
    if not np.all(np.isfinite(k0)):
        raise OverflowError(f"K_{order}(x) overflows for the smallest x requested")
    out = k0.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def bessel_k(order, x):
    """Modified Bessel function of the second kind ``K_order(x)``.

    Parameters
    ----------
    order : float
        Any real order; ``K_{-v} = K_v``.
    x : float or ndarray
        Positive argument(s).

    Raises
    ------
    ValueError
        If any ``x <= 0``.
    OverflowError
        If ``K`` exceeds the double range (tiny ``x`` with large order).
    """
    arr = _check_args(x)
    scaled = np.asarray(bessel_k_scaled(order, arr))
    with np.errstate(over="ignore"):
        out = scaled * np.exp(-arr)
    if not np.all(np.isfinite(out)):
        raise OverflowError(f"K_{order}(x) overflows")
    return float(out) if out.ndim == 0 else out


def log_bessel_k(order, x):
    """``log K_order(x)`` without overflow, via the ratio recurrence."""
    arr = _check_args(x)
    flat = np.atleast_1d(arr).ravel()
    _, nl, mu = _reduce_order(order)
    k0, k1 = _reduced_pair_scaled(mu, flat)
    out = np.log(k0) - flat
    if nl:
        # r_i = K_{mu+i} / K_{mu+i-1}; K_{mu+1} itself may overflow at tiny x
        with np.errstate(over="ignore", invalid="ignore"):
            r = k1 / k0
        bad = ~np.isfinite(r)
        if np.any(bad):
            total, total1 = _temme(mu, flat[bad])
            r[bad] = (total1 / total) * (2.0 / flat[bad])
        out = out + np.log(r)
        for i in range(1, nl):
            r = (mu + i) * (2.0 / flat) + 1.0 / r
            out = out + np.log(r)
    out = out.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out
