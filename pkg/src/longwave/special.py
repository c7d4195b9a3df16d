"""Confluent hypergeometric and Airy kernels."""

from __future__ import annotations

import cmath
import math

import mpmath
import numpy as np
from scipy.special import gamma, rgamma

from .errors import ArgumentError, NumericError

_ASYMPTOTIC_RADIUS = 30.0
_MAX_TERMS = 5000


def _is_nonpositive_int(b):
    return b.imag == 0 and b.real <= 0 and float(b.real).is_integer()


def hyp1f1(a, b, w):
    """Kummer's function 1F1(a; b; w) for complex arguments.

    Uses the power series (after Kummer's transformation when Re w < 0) for
    |w| <= 30 and the large-argument expansion otherwise.  When the series
    suffers cancellation it is re-summed in extended precision.
    """
    if np.ndim(w):
        return np.vectorize(lambda v: hyp1f1(a, b, v), otypes=[complex])(w)
    a, b, w = complex(a), complex(b), complex(w)
    if _is_nonpositive_int(b):
        raise ArgumentError("1F1 undefined for nonpositive integer b")
    if w == 0:
        return 1.0 + 0j
    if abs(w) > _ASYMPTOTIC_RADIUS:
        return _hyp1f1_asymptotic(a, b, w)
    if w.real < 0:
        return cmath.exp(w) * _hyp1f1_series(b - a, b, -w)
    return _hyp1f1_series(a, b, w)


def _hyp1f1_series(a, b, w):
    term = 1.0 + 0j
    total = term
    scale = 1.0
    for k in range(_MAX_TERMS):
        term *= (a + k) / (b + k) * w / (k + 1)
        total += term
        scale = max(scale, abs(term))
        if abs(term) <= 1e-16 * abs(total) and k > abs(w):
            break
    else:
        raise NumericError("1F1 series did not converge", abs(term / total))
    if not math.isfinite(abs(total)):
        raise NumericError("1F1 overflow")
    if scale > 1e5 * abs(total):
        return _hyp1f1_series_mp(a, b, w, digits=20 + int(math.log10(scale / abs(total))))
    return total


def _hyp1f1_series_mp(a, b, w, digits):
    with mpmath.workdps(digits):
        a, b, w = mpmath.mpc(a), mpmath.mpc(b), mpmath.mpc(w)
        term = mpmath.mpc(1)
        total = term
        eps = mpmath.mpf(10) ** (-digits)
        k = 0
        while True:
            term *= (a + k) / (b + k) * w / (k + 1)
            total += term
            k += 1
            if abs(term) <= eps * abs(total) and k > abs(w):
                break
            if k > _MAX_TERMS:
                raise NumericError("extended-precision 1F1 series did not converge")
        return complex(total)


def _asymptotic_sum(p, q, x):
    """Sum_s (p)_s (q)_s / s! x^{-s}, truncated at the smallest term."""
    term = 1.0 + 0j
    total = term
    prev = abs(term)
    for s in range(200):
        nxt = term * (p + s) * (q + s) / ((s + 1) * x)
        if abs(nxt) > prev:
            break
        term = nxt
        total += term
        prev = abs(term)
        if prev < 1e-17 * abs(total):
            break
    return total


def _hyp1f1_asymptotic(a, b, w):
    # large-|w| expansion with the Stokes branch chosen by the half plane
    sgn = 1 if cmath.phase(w) >= 0 else -1
    logw = cmath.log(w)
    first = (cmath.exp(sgn * 1j * math.pi * a - a * logw) * complex(rgamma(b - a))
             * _asymptotic_sum(a, a - b + 1, -w))
    second = cmath.exp(w + (a - b) * logw) * complex(rgamma(a)) * _asymptotic_sum(1 - a, b - a, w)
    out = complex(gamma(b)) * (first + second)
    if not math.isfinite(abs(out)):
        raise NumericError("1F1 overflow")
    return out


# -- Airy function ---------------------------------------------------------

_AI0 = 3.0 ** (-2.0 / 3.0) / math.gamma(2.0 / 3.0)
_AIP0 = 3.0 ** (-1.0 / 3.0) / math.gamma(1.0 / 3.0)
_SERIES_RADIUS = 8.0
# on the growing side the two series terms cancel to ~1e-7, so switch earlier
_SERIES_RADIUS_POS = 5.0


def _airy_u_coeffs(n):
    u = [1.0]
    for k in range(1, n):
        u.append(u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k))
    return np.array(u)


_UK = _airy_u_coeffs(40)


def airy_ai(u):
    """Airy function Ai(u) for real u (scalar or array).

    Maclaurin series on [-8, 5], large-argument expansions beyond.
    """
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    small = (u >= -_SERIES_RADIUS) & (u <= _SERIES_RADIUS_POS)
    out[small] = _airy_series(u[small])
    pos = u > _SERIES_RADIUS_POS
    out[pos] = _airy_pos(u[pos])
    neg = u < -_SERIES_RADIUS
    out[neg] = _airy_neg(-u[neg])
    return out[()] if out.ndim == 0 else out


def _airy_series(u):
    u3 = u ** 3
    f = np.ones_like(u)
    g = u.copy()
    tf, tg = f.copy(), g.copy()
    for k in range(80):
        tf = tf * u3 / ((3 * k + 2) * (3 * k + 3))
        tg = tg * u3 / ((3 * k + 3) * (3 * k + 4))
        f += tf
        g += tg
        if np.all(np.abs(tf) + np.abs(tg) < 1e-18 * (np.abs(f) + np.abs(g))):
            break
    return _AI0 * f - _AIP0 * g


def _truncated(coeffs, zeta):
    # alternating asymptotic sum in 1/zeta, stopped at the smallest term
    total = np.zeros_like(zeta)
    last = np.full_like(zeta, np.inf)
    done = np.zeros(zeta.shape, dtype=bool)
    for k, c in enumerate(coeffs):
        term = c * (-1) ** k / zeta ** k
        grow = np.abs(term) > last
        done |= grow
        total = np.where(done, total, total + term)
        last = np.abs(term)
    return total


def _airy_pos(x):
    zeta = 2.0 / 3.0 * x ** 1.5
    return np.exp(-zeta) / (2 * np.sqrt(np.pi) * x ** 0.25) * _truncated(_UK, zeta)


def _airy_neg(x):
    zeta = 2.0 / 3.0 * x ** 1.5
    even = _truncated(_UK[0::2], zeta ** 2)
    odd = _truncated(_UK[1::2], zeta ** 2) / zeta
    ph = zeta - np.pi / 4
    return (np.cos(ph) * even + np.sin(ph) * odd) / (np.sqrt(np.pi) * x ** 0.25)
