"""Batched adaptive Gauss-Kronrod (7/15) quadrature.

Many independent integrals are refined together: every pending interval of
every item is evaluated in one vectorised call, intervals whose local error is
within their share of the item tolerance are retired, the rest are bisected.
"""
from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuadratureSpec",
    "QuadratureError",
    "DEFAULT_QUAD",
    "centred_panels",
    "integrate_batch",
    "log_concave_range",
]


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_subdivisions: int = 200

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


DEFAULT_QUAD = QuadratureSpec()


class QuadratureError(ArithmeticError):
    """Requested tolerance not reached within ``max_subdivisions``."""

    def __init__(self, message, items=None, errors=None):
        super().__init__(message)
        self.items = items
        self.errors = errors


_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# full 15-point node set on [-1, 1]
_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[:-1][::-1]])
_WK = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[:-1][::-1]])
_WGAUSS = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod nodes (x[1], x[3], x[5], x[7]=0)
_WGAUSS[[1, 3, 5]] = _WG[:3]
_WGAUSS[7] = _WG[3]
_WGAUSS[[13, 11, 9]] = _WG[:3]

_EPMACH = np.finfo(float).eps


def _gk15(func, item, a, b):
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    nodes = centre[:, None] + half[:, None] * _NODES[None, :]
    fv = np.asarray(func(nodes, item), dtype=float)
    resk = fv @ _WK
    resg = fv @ _WGAUSS
    mean = 0.5 * resk
    resasc = np.abs(fv - mean[:, None]) @ _WK
    resabs = np.abs(fv) @ _WK
    val = resk * half
    err = np.abs((resk - resg) * half)
    resasc = resasc * np.abs(half)
    resabs = resabs * np.abs(half)
    # QUADPACK error heuristic
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(
            (resasc != 0) & (err != 0),
            resasc * np.minimum(1.0, (200.0 * err / np.where(resasc == 0, 1.0, resasc)) ** 1.5),
            err,
        )
    floor = 50.0 * _EPMACH * resabs
    err = np.where(resabs > np.finfo(float).tiny / (50.0 * _EPMACH), np.maximum(floor, scaled), scaled)
    return val, err


def integrate_batch(func, edges, quad=DEFAULT_QUAD, raise_on_failure=True):
    """Integrate ``n`` functions over their panels.

    Parameters
    ----------
    func : callable
        ``func(nodes, item)`` with ``nodes`` of shape (m, 15) and ``item`` the
        (m,) integer index of the integral each row belongs to; returns the
        integrand values with the shape of ``nodes``.
    edges : ndarray, shape (n, p + 1)
        Increasing panel boundaries per integral; the integral runs from
        ``edges[:, 0]`` to ``edges[:, -1]``.
    quad : QuadratureSpec

    Returns
    -------
    values, errors : ndarray of shape (n,)
    """
    edges = np.atleast_2d(np.asarray(edges, dtype=float))
    n, p1 = edges.shape
    item = np.repeat(np.arange(n), p1 - 1)
    a = edges[:, :-1].ravel()
    b = edges[:, 1:].ravel()
    keep = b > a
    item, a, b = item[keep], a[keep], b[keep]
    total_width = edges[:, -1] - edges[:, 0]

    acc_val = np.zeros(n)
    acc_err = np.zeros(n)
    count = np.bincount(item, minlength=n)
    failed = np.zeros(n, dtype=bool)

    while item.size:
        val, err = _gk15(func, item, a, b)
        est = acc_val + np.bincount(item, weights=val, minlength=n)
        tol = np.maximum(quad.abs_tol, quad.rel_tol * np.abs(est))
        with np.errstate(invalid="ignore", divide="ignore"):
            share = np.where(total_width[item] > 0, (b - a) / total_width[item], 1.0)
        ok = err <= tol[item] * share
        exhausted = count[item] >= quad.max_subdivisions
        # intervals too narrow to split further are retired as well
        tiny = (b - a) <= 4.0 * _EPMACH * np.maximum(np.abs(a), np.abs(b))
        done = ok | exhausted | tiny
        np.add.at(acc_val, item[done], val[done])
        np.add.at(acc_err, item[done], err[done])
        if np.any(exhausted & ~ok):
            failed[np.unique(item[exhausted & ~ok])] = True
        rest = ~done
        item, a, b = item[rest], a[rest], b[rest]
        if not item.size:
            break
        mid = 0.5 * (a + b)
        count += np.bincount(item, minlength=n)
        item = np.concatenate([item, item])
        a, b = np.concatenate([a, mid]), np.concatenate([mid, b])

    tol = np.maximum(quad.abs_tol, quad.rel_tol * np.abs(acc_val))
    bad = failed & (acc_err > tol)
    if raise_on_failure and np.any(bad):
        idx = np.flatnonzero(bad)
        raise QuadratureError(
            f"quadrature tolerance not met for {idx.size} integral(s) within "
            f"{quad.max_subdivisions} subdivisions",
            items=idx,
            errors=acc_err[idx],
        )
    return acc_val, acc_err


def log_concave_range(logf, mode, drop, initial_step=1.0, max_doublings=80):
    """Points left/right of ``mode`` where a log-concave ``logf`` has fallen by ``drop``.

    ``logf(v)`` is evaluated elementwise on arrays shaped like ``mode``.
    Returns ``(lo, hi)``; beyond them the integrand is below ``exp(-drop)``
    times its peak and decays at least exponentially.
    """
    mode = np.asarray(mode, dtype=float)
    peak = logf(mode)
    target = peak - drop
    out = []
    for sign in (-1.0, 1.0):
        step = np.broadcast_to(np.asarray(initial_step, dtype=float), mode.shape).copy()
        inner = np.zeros_like(mode)
        for _ in range(max_doublings):
            below = logf(mode + sign * step) <= target
            if np.all(below):
                break
            inner = np.where(below, inner, step)
            step = np.where(below, step, 2.0 * step)
        outer = step
        for _ in range(60):
            mid = 0.5 * (inner + outer)
            below = logf(mode + sign * mid) <= target
            outer = np.where(below, mid, outer)
            inner = np.where(below, inner, mid)
        out.append(mode + sign * outer)
    return out[0], out[1]


def centred_panels(logf, width, drop, extra=None, doublings=14, limits=None):
    """Panel edges around 0 for an integrand whose log is concave with peak at 0.

    Edges sit at +-width * 2**k inside the range where ``logf`` stays within
    ``drop`` of its peak; ``extra`` adds breakpoints (NaN = none). ``limits``
    may supply that range as ``(lo, hi)`` when it is known in closed form.
    Returns an (n, p+1) array of increasing edges.
    """
    width = np.atleast_1d(np.asarray(width, dtype=float))
    n = width.size
    if limits is None:
        lo, hi = log_concave_range(logf, np.zeros(n), drop, initial_step=width)
    else:
        lo, hi = (np.broadcast_to(np.asarray(v, dtype=float), (n,)) for v in limits)
    steps = width[:, None] * 2.0 ** np.arange(doublings)[None, :]
    cols = [lo[:, None], np.maximum(-steps, lo[:, None]), np.zeros((n, 1)),
            np.minimum(steps, hi[:, None]), hi[:, None]]
    if extra is not None:
        ex = np.atleast_2d(np.asarray(extra, dtype=float)).reshape(n, -1)
        inside = (ex > lo[:, None]) & (ex < hi[:, None])
        cols.append(np.where(inside, ex, 0.0))
    return np.sort(np.concatenate(cols, axis=1), axis=1)
