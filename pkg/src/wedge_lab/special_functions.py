r"""Modified Bessel functions of the first kind, log-Gamma and Gaussian moments.

All Bessel evaluations are carried out in exponentially scaled form,
:math:`\tilde I_\nu(z) = e^{-z} I_\nu(z)`, which stays in :math:`[0, 1]` for
every non-negative order and argument.  Three regimes are used:

* ``nu >= 16``, or ``nu >= 10`` and ``z > 30``: the Debye uniform asymptotic
  expansion (12 correction terms);
* ``nu < 10`` and ``z <= 20``, or ``10 <= nu < 16`` and ``z <= 30``: the
  ascending power series, summed in log scale;
* ``nu < 10`` and ``z > 20``: the Hankel large-argument expansion.

With 12 terms the Debye expansion loses about three digits for orders just
above 10 near the turning region ``z ~ nu``, so the power series (all terms
positive) covers that corner.  The result is accurate to a few units of
``1e-14`` relative throughout (checked against arbitrary-precision
arithmetic in the test-suite).
"""

import math

import numpy as np
from numpy.polynomial import Polynomial

__all__ = [
    "bessel_i",
    "bessel_ive",
    "log_gamma",
    "gauss_abs_moment",
]

_DEBYE_MIN_ORDER = 10.0
_SERIES_MAX_Z = 20.0
# below this order the Debye expansion is only used for z > _TURNING_MAX_Z
_DEBYE_SAFE_ORDER = 16.0
_TURNING_MAX_Z = 30.0
_DEBYE_TERMS = 12
_CHUNK = 1 << 15

# Lanczos coefficients, g = 7, n = 9.
_LANCZOS_G = 7.0
_LANCZOS_COEF = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _debye_polynomials(n):
    """Polynomials u_k(p) of the Debye expansion, k = 0..n."""
    p = Polynomial([0.0, 1.0])
    polys = [Polynomial([1.0])]
    for _ in range(n):
        u = polys[-1]
        nxt = 0.5 * p**2 * (1 - p**2) * u.deriv() + 0.125 * (Polynomial([1.0, 0.0, -5.0]) * u).integ()
        polys.append(nxt)
    return polys


_DEBYE_POLYS = _debye_polynomials(_DEBYE_TERMS)
# coefficient table C[k, j] of p**j in u_k(p)
_DEBYE_COEF = np.zeros((_DEBYE_TERMS + 1, 3 * _DEBYE_TERMS + 1))
for _k, _u in enumerate(_DEBYE_POLYS):
    _DEBYE_COEF[_k, : len(_u.coef)] = _u.coef


def _check_finite_nonneg(name, a):
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    if np.any(a < 0):
        raise ValueError(f"{name} must be non-negative")


def log_gamma(x):
    """Natural log of the Gamma function for ``x > 0`` (Lanczos, g=7).

    Vectorised; relative error below ``1e-13`` on ``(0, 1e6]``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("log_gamma requires finite x > 0")
    small = x < 0.5
    # reflection keeps the Lanczos sum in its accurate range
    xx = np.where(small, 1.0 - x, x) - 1.0
    acc = np.full_like(xx, _LANCZOS_COEF[0])
    for i in range(1, len(_LANCZOS_COEF)):
        acc = acc + _LANCZOS_COEF[i] / (xx + i)
    t = xx + _LANCZOS_G + 0.5
    lg = _HALF_LOG_2PI + (xx + 0.5) * np.log(t) - t + np.log(acc)
    with np.errstate(divide="ignore"):
        refl = math.log(math.pi) - np.log(np.abs(np.sin(math.pi * x))) - lg
    out = np.where(small, refl, lg)
    return out if out.ndim else float(out)


def _ive_series(nu, z):
    # sum_k (z^2/4)^k / (k! (nu+1)_k), stop once terms decrease below 1e-17 of the sum
    q = 0.25 * z * z
    term = np.ones_like(z)
    total = np.ones_like(z)
    active = np.ones(z.shape, dtype=bool)
    k = 0
    while active.any():
        k += 1
        nxt = term * q / (k * (nu + k))
        total = np.where(active, total + nxt, total)
        done = (nxt < 1e-17 * total) & (nxt <= term)
        term = nxt
        active &= ~done
        if k > 500:
            break
    lead = nu * np.log(0.5 * z) - log_gamma(nu + 1.0) - z
    return np.exp(lead + np.log(total))


def _ive_hankel(nu, z):
    mu = 4.0 * nu * nu
    term = np.ones_like(z)
    total = np.ones_like(z)
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, 120):
        nxt = -term * (mu - (2 * k - 1) ** 2) / (8.0 * k * z)
        # asymptotic series: stop at the smallest term of the divergent tail
        grow = (np.abs(nxt) >= np.abs(term)) & ((2 * k - 1) ** 2 > mu)
        active &= ~grow
        total = np.where(active, total + nxt, total)
        active &= ~(np.abs(nxt) < 1e-17 * np.abs(total))
        term = nxt
        if not active.any():
            break
    return total / np.sqrt(2.0 * math.pi * z)


def _ive_debye(nu, z):
    w = z / nu
    s = np.sqrt(1.0 + w * w)
    p = 1.0 / s
    # -z + nu*eta rewritten without cancellation
    # arcsinh(1/w) overflows for subnormal w; the log form is exact there
    with np.errstate(divide="ignore", over="ignore"):
        ash = np.where(w > 1e-3, np.arcsinh(1.0 / np.maximum(w, 1e-3)), np.log1p(s) - np.log(w))
    expo = nu / (s + w) - nu * ash
    # sum_k u_k(p)/nu^k = sum_j p^j * c_j(nu), with c_j(nu) = sum_k C[k, j] nu^-k
    inv = 1.0 / nu
    vp = np.empty((_DEBYE_TERMS + 1,) + z.shape)
    vp[0] = 1.0
    for k in range(1, _DEBYE_TERMS + 1):
        vp[k] = vp[k - 1] * inv
    cj = np.tensordot(_DEBYE_COEF.T, vp, axes=1)
    total = cj[-1]
    for j in range(cj.shape[0] - 2, -1, -1):
        total = total * p + cj[j]
    return np.exp(expo) / np.sqrt(2.0 * math.pi * nu * s) * total


def bessel_ive(nu, z):
    """Exponentially scaled Bessel function ``exp(-z) * I_nu(z)``.

    Broadcasts over ``nu`` and ``z``; both must be finite and non-negative.
    """
    nu = np.asarray(nu, dtype=float)
    z = np.asarray(z, dtype=float)
    _check_finite_nonneg("order", nu)
    _check_finite_nonneg("z", z)
    nu, z = np.broadcast_arrays(nu, z)
    out = np.empty(nu.shape)
    zero = z == 0.0
    out[zero] = np.where(nu[zero] == 0.0, 1.0, 0.0)
    turning = (nu < _DEBYE_SAFE_ORDER) & (z <= _TURNING_MAX_Z)
    debye = ~zero & (nu >= _DEBYE_MIN_ORDER) & ~turning
    series = ~zero & ~debye & ((z <= _SERIES_MAX_Z) | turning)
    hankel = ~zero & ~debye & ~series
    if debye.any():
        nd, zd = nu[debye], z[debye]
        res = np.empty(nd.shape)
        # bound the size of the coefficient tables
        for s in range(0, nd.size, _CHUNK):
            res[s : s + _CHUNK] = _ive_debye(nd[s : s + _CHUNK], zd[s : s + _CHUNK])
        out[debye] = res
    if series.any():
        out[series] = _ive_series(nu[series], z[series])
    if hankel.any():
        out[hankel] = _ive_hankel(nu[hankel], z[hankel])
    return out if out.ndim else float(out)


def bessel_i(order, z, scaled=False):
    """Modified Bessel function of the first kind, ``I_order(z)``.

    Parameters
    ----------
    order : float or array_like
        Non-negative real order.
    z : float or array_like
        Non-negative real argument.
    scaled : bool
        If true return ``exp(-z) * I_order(z)``, which never overflows.

    Raises
    ------
    ValueError
        For negative or non-finite input.
    """
    val = bessel_ive(order, z)
    if scaled:
        return val
    with np.errstate(over="ignore"):
        return val * np.exp(z)


def gauss_abs_moment(p):
    """Absolute moment ``E|Z|^p`` of a standard normal variable, ``p >= 1``."""
    if not math.isfinite(p) or p < 1:
        raise ValueError("gauss_abs_moment requires finite p >= 1")
    return math.exp(0.5 * p * math.log(2.0) + math.lgamma(0.5 * (p + 1.0))) / math.sqrt(math.pi)
