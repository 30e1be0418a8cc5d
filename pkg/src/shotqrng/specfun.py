"""Log-space special functions.

Everything here works on natural logarithms so that Bessel and factorial
values can be combined far outside the range of double precision.  Zero is
represented by ``-inf``.

``log_bessel_i`` picks between two evaluation routes per element:

* the ascending power series when ``hypot(order, z)`` is small, and
* the uniform (Debye) asymptotic expansion otherwise.  Written in terms of
  ``s = hypot(order, z)`` and ``t = order / s`` the expansion stays valid down
  to order zero, where it turns into the large-argument Hankel series, so a
  single route covers both the large-order and the large-argument corners.

The crossover ``_SERIES_RADIUS`` was chosen by comparison against an
arbitrary-precision oracle (see ``tests/oracles``).
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

__all__ = [
    "log_bessel_i",
    "log_bessel_i_scaled",
    "log_sum_exp",
    "log_factorial",
]

_SERIES_RADIUS = 20.0
_DEBYE_TERMS = 20
_LOG_2PI = math.log(2.0 * math.pi)


@lru_cache(maxsize=None)
def _debye_polynomials(n_terms: int) -> tuple[np.ndarray, ...]:
    """Coefficients of the Debye polynomials u_k(t), reduced to P_k(t**2).

    Uses the exact recurrence

        u_{k+1}(t) = t^2 (1 - t^2) u_k'(t) / 2 + 1/8 int_0^t (1 - 5 s^2) u_k(s) ds

    in rational arithmetic.  Each u_k has the form t^k P_k(t^2); the returned
    arrays hold the coefficients of P_k in increasing powers of t^2.
    """
    polys = [[Fraction(1)]]
    for _ in range(n_terms):
        u = polys[-1]
        nxt = [Fraction(0)] * (len(u) + 3)
        for i, c in enumerate(u):
            if i:
                # t^2 (1 - t^2) / 2 * i c t^(i-1)
                nxt[i + 1] += i * c / 2
                nxt[i + 3] -= i * c / 2
            # (1/8) int (1 - 5 s^2) c s^i
            nxt[i + 1] += c / (8 * (i + 1))
            nxt[i + 3] -= 5 * c / (8 * (i + 3))
        polys.append(nxt)

    reduced = []
    for k, u in enumerate(polys):
        coeffs = [float(u[j]) for j in range(k, len(u), 2)]
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs.pop()
        reduced.append(np.array(coeffs))
    return tuple(reduced)


def _as_order(order) -> np.ndarray:
    arr = np.asarray(order)
    if arr.dtype.kind not in "iu":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise DomainError("Bessel order must be an integer")
        arr = arr.astype(np.int64)
    # I_{-j} = I_j for integer j
    return np.abs(arr)


def _check_argument(z) -> np.ndarray:
    arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("Bessel argument must be finite")
    if np.any(arr < 0):
        raise DomainError("Bessel argument must be nonnegative")
    return arr


def _series_scaled(nu: np.ndarray, z: np.ndarray) -> np.ndarray:
    # ln(e^-z I_nu(z)) by the ascending series; only used for hypot(nu, z) < 20
    half = z / 2.0
    q = half * half
    m = np.arange(64, dtype=float)
    ratios = q[:, None] / ((m + 1.0) * (m + nu[:, None] + 1.0))
    total = 1.0 + np.cumprod(ratios, axis=1).sum(axis=1)
    return nu * np.log(half) - gammaln(nu + 1.0) + np.log(total) - z


def _debye_prefactor(nu: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``s = hypot(nu, z)`` and the non-exponential part of the expansion.

    ``I_nu(z) = exp(s - nu asinh(nu / z)) * exp(prefactor)`` with
    ``prefactor = -ln(2 pi s) / 2 + ln(1 + sum_k P_k(t^2) / s^k)``.
    """
    s = np.hypot(nu, z)
    t2 = (nu / s) ** 2
    total = np.ones_like(s)
    inv_s = 1.0 / s
    power = np.ones_like(s)
    for coeffs in _debye_polynomials(_DEBYE_TERMS)[1:]:
        power = power * inv_s
        total += np.polynomial.polynomial.polyval(t2, coeffs) * power
    return s, np.log(total) - 0.5 * (_LOG_2PI + np.log(s))


def _debye_scaled(nu: np.ndarray, z: np.ndarray) -> np.ndarray:
    s, prefactor = _debye_prefactor(nu, z)
    # s - z written without cancellation
    exponent = nu * nu / (s + z) - nu * np.arcsinh(nu / z)
    return exponent + prefactor


def log_bessel_i_scaled(order, z):
    """Return ``ln(exp(-z) * I_order(z))`` elementwise.

    The exponentially scaled form is what the photon-difference distributions
    need, and computing it directly avoids subtracting two large numbers.
    """
    nu_int = _as_order(order)
    z = _check_argument(z)
    nu_int, z = np.broadcast_arrays(nu_int, z)
    nu = nu_int.astype(float)
    out = np.empty(nu.shape, dtype=float)

    at_zero = z == 0.0
    out[at_zero] = np.where(nu_int[at_zero] == 0, 0.0, -np.inf)

    live = ~at_zero
    series = live & (np.hypot(nu, z) < _SERIES_RADIUS)
    debye = live & ~series
    if np.any(series):
        out[series] = _series_scaled(nu[series], z[series])
    if np.any(debye):
        out[debye] = _debye_scaled(nu[debye], z[debye])
    return out[()] if out.ndim == 0 else out


def log_bessel_i(order, z):
    """Natural log of the modified Bessel function ``I_order(z)``.

    Parameters
    ----------
    order : int or array of int
        Integer order.  Negative orders are folded onto ``|order|``.
    z : float or array
        Nonnegative finite argument.

    Returns
    -------
    float or ndarray
        ``ln I_order(z)``; ``-inf`` where the function is exactly zero.
    """
    scaled = log_bessel_i_scaled(order, z)
    return scaled + np.asarray(z, dtype=float)


def log_sum_exp(terms) -> float:
    """``ln(sum(exp(terms)))`` without overflow.  Empty input gives ``-inf``."""
    arr = np.asarray(terms, dtype=float).ravel()
    if arr.size == 0:
        return -math.inf
    if np.any(np.isnan(arr)) or np.any(arr == math.inf):
        raise DomainError("log_sum_exp terms must be finite or -inf")
    top = arr.max()
    if top == -math.inf:
        return -math.inf
    return float(top + math.log(np.exp(arr - top).sum()))


def log_factorial(n: int) -> float:
    """``ln(n!)``; exact integer product up to 20, log-gamma beyond."""
    if isinstance(n, (bool, np.bool_)) or int(n) != n:
        raise DomainError("log_factorial needs an integer")
    n = int(n)
    if n < 0:
        raise DomainError("log_factorial is undefined for negative n")
    if n <= 20:
        return math.log(math.factorial(n))
    return math.lgamma(n + 1.0)
