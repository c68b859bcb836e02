"""Exponential-integral kernels for Rayleigh-fading capacity computations.

Everything here is expressed through the scaled exponential integral
``s(y) = exp(y) * E1(y)``, which stays O(1/y) for large ``y`` and so never
overflows where ``exp(y)`` alone would. With ``z ~ Exp(1)``:

* ``E[log(1 + a z)] = s(1/a)``
* ``psi(x) = E[z / (1 + x z)] = 1/x - s(1/x) / x**2``

For ``y > 1`` the continued fraction

    s(y) = 1/(y+1 - 1/(y+3 - 4/(y+5 - 9/(y+7 - ...))))

is evaluated from its second tail ``T2 = 1/(y+5 - 9/(y+7 - ...))``; keeping
the tail separate lets ``psi`` and its derivative be formed without the
cancellation that ``1 - y s(y)`` suffers when ``y`` is large.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, NumericalError

__all__ = [
    "scaled_e1",
    "expected_log1p_exp",
    "psi",
    "psi_derivative",
    "psi_inverse",
]

EULER_GAMMA = 0.57721566490153286060651209008240243

_SERIES_TERMS = 30
_CF_MAX_ITER = 1000
_CF_EPS = 4e-16  # two ulps: for huge y the Lentz ratio can jitter around 1
_SMALL_X = 1e-3
_SMALL_TERMS = 14
_TINY = 1e-300


def _as_array(x, name):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _result(arr, scalar):
    return float(arr) if scalar else arr


def _series_scaled_e1(y):
    # E1(y) = -gamma - ln y + sum_{k>=1} (-1)^(k+1) y^k / (k k!), for 0 < y <= 1
    total = np.zeros_like(y)
    term = np.ones_like(y)
    for k in range(1, _SERIES_TERMS + 1):
        term = term * y / k
        total += (term / k) if k % 2 else -(term / k)
    return np.exp(y) * (-EULER_GAMMA - np.log(y) + total)


def _cf_tail2(y):
    """Second continued-fraction tail ``1/(y+5 - 9/(y+7 - 16/(...)))`` (modified Lentz)."""
    f = y + 5.0
    c = f.copy()
    dd = np.zeros_like(y)
    done = np.zeros(y.shape, dtype=bool)
    for j in range(3, _CF_MAX_ITER):
        a = -float(j * j)
        b = y + (2 * j + 1)
        dd = b + a * dd
        dd = np.where(np.abs(dd) < _TINY, _TINY, dd)
        dd = 1.0 / dd
        c = b + a / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        delta = c * dd
        f = np.where(done, f, f * delta)
        done |= np.abs(delta - 1.0) < _CF_EPS
        if done.all():
            return 1.0 / f
    raise NumericalError("continued fraction for E1 did not converge")


def _cf_parts(y):
    """Return ``(T1, T2)`` with ``s(y) = 1/(y + 1 - T1)`` and ``T1 = 1/(y + 3 - 4 T2)``."""
    t2 = _cf_tail2(y)
    t1 = 1.0 / (y + 3.0 - 4.0 * t2)
    return t1, t2


def _scaled_e1_unchecked(y):
    out = np.empty_like(y)
    small = y <= 1.0
    if small.any():
        out[small] = _series_scaled_e1(y[small])
    big = ~small
    if big.any():
        yb = y[big]
        t1, _ = _cf_parts(yb)
        out[big] = 1.0 / (yb + 1.0 - t1)
    return out


def scaled_e1(y):
    """Return ``exp(y) * E1(y)`` for ``y > 0``.

    Accepts a scalar or an array. A power series is used for ``y <= 1`` and a
    continued fraction above, giving about 1e-15 relative accuracy across
    ``[1e-15, 1e15]`` without overflow.

    Raises
    ------
    DomainError
        If any ``y`` is non-finite or not strictly positive.
    """
    scalar = np.ndim(y) == 0
    arr = np.atleast_1d(_as_array(y, "y"))
    if np.any(arr <= 0):
        raise DomainError("scaled_e1 requires y > 0")
    return _result(_scaled_e1_unchecked(arr).reshape(np.shape(y)), scalar)


def expected_log1p_exp(alpha):
    """Closed form of ``E[log(1 + alpha z)]`` for unit-mean exponential ``z``.

    Equals ``exp(1/alpha) E1(1/alpha)``; zero at ``alpha = 0``.
    """
    scalar = np.ndim(alpha) == 0
    a = np.atleast_1d(_as_array(alpha, "alpha"))
    if np.any(a < 0):
        raise DomainError("expected_log1p_exp requires alpha >= 0")
    out = np.zeros_like(a)
    pos = a > 0
    if pos.any():
        with np.errstate(over="ignore"):
            y = 1.0 / a[pos]
        vals = np.empty_like(y)
        inf = ~np.isfinite(y)
        # alpha below ~1e-308: E[log(1+az)] = a to working precision
        vals[inf] = a[pos][inf]
        if (~inf).any():
            vals[~inf] = _scaled_e1_unchecked(y[~inf])
        out[pos] = vals
    return _result(out.reshape(np.shape(alpha)), scalar)


def _small_x_moments(x):
    """``1 - psi(x)`` and ``-psi'(x)`` from the moment series, for ``x <= 1e-3``.

    ``psi(x) = sum_k (-1)^k (k+1)! x^k``; it diverges eventually but the
    first 14 terms are accurate to far below rounding for such small ``x``.
    """
    defect = np.zeros_like(x)
    slope = np.zeros_like(x)
    for k in range(_SMALL_TERMS, 0, -1):
        sign = 1.0 if k % 2 else -1.0
        coef = float(np.prod(np.arange(2, k + 2)))  # (k+1)!
        defect = x * (sign * coef + defect)
        slope = sign * k * coef + x * slope
    return defect, slope


def _psi_parts(x):
    """``psi``, ``-psi'`` and ``1 - psi`` for an array of ``x >= 0``.

    The last one is computed directly for small ``x``, where forming it from
    ``psi`` would cancel.
    """
    val = np.ones_like(x)
    slope = np.full_like(x, 2.0)
    defect = np.zeros_like(x)

    small = (x > 0) & (x <= _SMALL_X)
    if small.any():
        d, g = _small_x_moments(x[small])
        val[small] = 1.0 - d
        slope[small] = g
        defect[small] = d

    cf = x > _SMALL_X
    if cf.any():
        xc = x[cf]
        v = np.empty_like(xc)
        g = np.empty_like(xc)
        y = 1.0 / xc
        big = y > 1.0
        if big.any():
            yc = y[big]
            t1, t2 = _cf_parts(yc)
            den = yc + 1.0 - t1
            v[big] = yc * (1.0 - t1) / den
            g[big] = yc * yc * (2.0 - 4.0 * t2) / ((yc + 3.0 - 4.0 * t2) * den)
        ser = ~big
        if ser.any():
            ys = y[ser]
            q = ys * _series_scaled_e1(ys)  # E[1/(1+xz)]
            v[ser] = ys * (1.0 - q)
            g[ser] = ys * ys * (1.0 - 2.0 * q + ys * (1.0 - q))
        val[cf] = v
        slope[cf] = g
        defect[cf] = 1.0 - v
    return val, slope, defect


def _psi_and_slope(x):
    """``psi(x)`` and ``-psi'(x) = E[z^2/(1+xz)^2]`` for an array of ``x >= 0``."""
    val, slope, _ = _psi_parts(x)
    return val, slope


def psi(x):
    """``E[z / (1 + x z)]`` for ``x >= 0``; exactly 1 at ``x = 0``.

    Strictly decreasing and convex, tending to 0 as ``x`` grows.
    """
    scalar = np.ndim(x) == 0
    arr = np.atleast_1d(_as_array(x, "x"))
    if np.any(arr < 0):
        raise DomainError("psi requires x >= 0")
    val, _ = _psi_and_slope(arr)
    return _result(val.reshape(np.shape(x)), scalar)


def psi_derivative(x):
    """Derivative of :func:`psi`, i.e. ``-E[z^2 / (1 + x z)^2]``."""
    scalar = np.ndim(x) == 0
    arr = np.atleast_1d(_as_array(x, "x"))
    if np.any(arr < 0):
        raise DomainError("psi_derivative requires x >= 0")
    _, slope = _psi_and_slope(arr)
    return _result(-slope.reshape(np.shape(x)), scalar)


def psi_inverse(u, *, max_iter=200):
    """Inverse of :func:`psi`, extended by zero for ``u >= 1``.

    For ``0 < u < 1`` the root of ``psi(x) = u`` is bracketed, starting from
    ``[0, max(1, 4/u)]`` and growing the upper end geometrically, then found
    by Newton steps that fall back to bisection whenever they leave the
    bracket.

    Raises
    ------
    DomainError
        If any ``u`` is non-finite or ``u <= 0``.
    """
    scalar = np.ndim(u) == 0
    uu = np.atleast_1d(_as_array(u, "u"))
    if np.any(uu <= 0):
        raise DomainError("psi_inverse requires u > 0")
    out = np.zeros_like(uu)
    work = uu < 1.0
    if not work.any():
        return _result(out.reshape(np.shape(u)), scalar)

    t = uu[work]
    lo = np.zeros_like(t)
    hi = np.maximum(1.0, 4.0 / t)
    for _ in range(64):
        above = _psi_and_slope(hi)[0] >= t
        if not above.any():
            break
        lo = np.where(above, hi, lo)
        hi = np.where(above, hi * 4.0, hi)
    else:
        raise NumericalError("psi_inverse: failed to bracket root")

    # psi ~ 1 - 2x near 0 and ~ 1/x for large x
    x = np.where(t > 0.5, 0.5 * (1.0 - t), 1.0 / t)
    x = np.clip(x, lo, hi)
    active = np.ones(t.shape, dtype=bool)
    gap = 1.0 - t  # exact for t >= 1/2
    near_one = t >= 0.5
    for _ in range(max_iter):
        val, slope, defect = _psi_parts(x)
        resid = np.where(near_one, gap - defect, val - t)
        # psi decreasing: resid > 0 means the root lies to the right
        lo = np.where(resid > 0, np.maximum(lo, x), lo)
        hi = np.where(resid < 0, np.minimum(hi, x), hi)
        step = resid / slope
        x_new = x + step
        outside = (x_new <= lo) | (x_new >= hi)
        mid = np.where(lo > 0, np.sqrt(lo * hi), 0.5 * hi)
        with np.errstate(over="ignore"):
            narrow = hi / np.maximum(lo, _TINY) < 4.0
        mid = np.where(narrow, 0.5 * (lo + hi), mid)
        x_new = np.where(outside, mid, x_new)
        x_new = np.where(resid == 0, x, x_new)
        change = np.abs(x_new - x)
        x = np.where(active, x_new, x)
        active &= change > 1e-15 * np.maximum(x, 1e-300)
        if not active.any():
            break
    else:
        raise NumericalError("psi_inverse: Newton iteration did not converge")
    out[work] = x
    return _result(out.reshape(np.shape(u)), scalar)
