r"""Dirichlet heat kernel of the wedge.

The kernel is evaluated from the angular eigenfunction expansion

.. math::

    G(t, (r,\vartheta), (\rho,\varphi)) = \frac{e^{-(r-\rho)^2/4t}}{\kappa_0 t}
        \sum_{k\ge 1} \tilde I_{\nu_k}\Big(\frac{r\rho}{2t}\Big)
        \sin(\nu_k\vartheta)\sin(\nu_k\varphi), \qquad \nu_k = k\pi/\kappa_0,

with :math:`\tilde I_\nu = e^{-z} I_\nu` the scaled Bessel function, so no
factor ever overflows.  Since :math:`\nu \mapsto \tilde I_\nu(z)` is
decreasing and log-concave, the ratio ``q`` of the last two computed terms
bounds all later ratios and the omitted tail is at most ``term * q/(1-q)``;
summation stops once that bound drops below the requested tolerance.

Where the terms cancel (far-apart points at short times, the sum being many
orders of magnitude below the sum of its absolute terms) or the value is not
large compared with the truncation tolerance, the series loses relative
accuracy; for large ``z = r rho / 2t`` it is merely slow.  The kernel also
has an integral representation, obtained by inserting Schlaefli's integral
for :math:`I_\nu` and summing over ``k`` in closed form: a finite signed sum
of whole-plane image kernels plus a rapidly decaying integral over
:math:`s \in (0, \infty)` whose integrand carries :math:`e^{-z\cosh s}`.
That form cancels where the images nearly annihilate (both points close to
an edge), which is where the series is well conditioned.  Both routes carry
an error estimate (truncation plus rounding in the sum of magnitudes), and
each value is taken from the route that resolves it.

Angles ``kappa0 = pi/m`` also admit the method of images, used here as an
independent oracle.
"""

import math
from dataclasses import dataclass

import numpy as np

from .domain_geometry import Wedge, WedgePoint, boundary_distance
from .quadrature import _gauss_legendre01, wedge_rule, wedge_sum
from .special_functions import bessel_ive

__all__ = [
    "KernelAccuracyError",
    "KernelConfig",
    "WedgeHeatKernel",
    "eval_images",
    "free_kernel",
]

_BLOCK = 8
_EPS = np.finfo(float).eps
# relative accuracy of one series term (Bessel function times two sines)
_TERM_REL = 1e-13
# a value counts as resolved once its error estimate is below this fraction of it
_REL = 1e-9
_RESOLVE = 1e3
_CHUNK = 256
_LARGE_Z = 100.0
# images this close to the branch cut are treated as lying on it
_CUT = 1e-12


class KernelAccuracyError(ArithmeticError):
    """The series did not reach the tolerance within ``max_terms`` terms."""

    def __init__(self, msg, achieved):
        super().__init__(f"{msg} (achieved tail bound {achieved:.3e})")
        self.achieved = achieved


@dataclass(frozen=True)
class KernelConfig:
    """Opening angle, absolute target accuracy and series cap."""

    kappa0: float
    tol: float = 1e-14
    max_terms: int = 8192

    def __post_init__(self):
        Wedge(self.kappa0)
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_terms < 16:
            raise ValueError("max_terms must be at least 16")


def _alphas(th, ph):
    return math.pi + th - ph, math.pi - th + ph, math.pi + th + ph, math.pi - th - ph


def _reduce(a):
    # representative of a modulo 2 pi in [-pi, pi)
    return np.remainder(a + math.pi, 2.0 * math.pi) - math.pi


def free_kernel(t, d2):
    """Whole-plane heat kernel as a function of the squared distance."""
    return np.exp(-d2 / (4.0 * t)) / (4.0 * math.pi * t)


def _as_arrays(t, x, y):
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t <= 0):
        raise ValueError("kernel needs t > 0")
    return np.broadcast_arrays(t, np.asarray(x.r, float), np.asarray(x.angle, float),
                               np.asarray(y.r, float), np.asarray(y.angle, float))


class WedgeHeatKernel:
    """Heat kernel with zero Dirichlet data on the wedge of angle ``kappa0``.

    Parameters
    ----------
    kappa0 : float or KernelConfig
        Opening angle, or a full configuration.
    tol, max_terms :
        Forwarded to :class:`KernelConfig` when ``kappa0`` is a number.

    Examples
    --------
    >>> import math
    >>> from wedge_lab.domain_geometry import WedgePoint
    >>> G = WedgeHeatKernel(math.pi)
    >>> x = WedgePoint(1.0, math.pi / 2)
    >>> round(G.eval(1.0, x, x), 7)
    0.0503025
    """

    def __init__(self, kappa0, tol=1e-14, max_terms=8192):
        cfg = kappa0 if isinstance(kappa0, KernelConfig) else KernelConfig(float(kappa0), tol, max_terms)
        self.cfg = cfg
        self.kappa0 = cfg.kappa0
        self.step = math.pi / cfg.kappa0

    def __repr__(self):
        return f"WedgeHeatKernel({self.cfg!r})"

    def __reduce__(self):
        return (WedgeHeatKernel, (self.cfg,))

    # -- core series ---------------------------------------------------

    def _series(self, t, r, th, rho, ph, grad=False, magnitude=False):
        shape = t.shape
        t, r, th, rho, ph = (a.ravel() for a in (t, r, th, rho, ph))
        n = t.size
        z = r * rho / (2.0 * t)
        pref = np.exp(-((r - rho) ** 2) / (4.0 * t)) / (self.kappa0 * t)
        val = np.zeros(n)
        mag = np.zeros(n)
        err = np.zeros(n)
        dr = np.zeros(n) if grad else None
        da = np.zeros(n) if grad else None
        active = np.arange(n)
        k0 = 1
        worst = 0.0
        while active.size:
            if k0 > self.cfg.max_terms:
                raise KernelAccuracyError("wedge kernel series did not converge", worst)
            ks = np.arange(k0, k0 + _BLOCK)
            nu = (ks * self.step)[:, None]
            za = z[active]
            iv = bessel_ive(nu, za[None, :])
            sth = np.sin(nu * th[active])
            sph = np.sin(nu * ph[active])
            terms = iv * sth * sph
            val[active] += np.sum(terms, axis=0)
            if magnitude:
                mag[active] += np.sum(np.abs(terms), axis=0)
            ra = r[active]
            if grad:
                iv1 = bessel_ive(nu + 1.0, za[None, :])
                ta = t[active]
                coef = (-ra / (2.0 * ta))[None, :] + nu / ra[None, :]
                radial = coef * iv + (rho[active] / (2.0 * ta))[None, :] * iv1
                dr[active] += np.sum(radial * sth * sph, axis=0)
                da[active] += np.sum((nu / ra[None, :]) * iv * np.cos(nu * th[active]) * sph, axis=0)
            last = iv[-1]
            before = iv[-2]
            with np.errstate(divide="ignore", invalid="ignore"):
                q = np.where(before > 0, last / before, 0.0)
                tail = np.where(q < 1.0, last * q / (1.0 - q), np.inf)
            tail = tail * pref[active]
            if grad:
                nu_last = ks[-1] * self.step
                tail = tail * (1.0 + (ra + rho[active]) / (2.0 * t[active]) + 2.0 * nu_last / ra)
            tail[last == 0.0] = 0.0
            done = tail <= self.cfg.tol
            err[active[done]] = tail[done]
            worst = float(np.max(tail[~done])) if (~done).any() else 0.0
            active = active[~done]
            k0 += _BLOCK
        val = (pref * val).reshape(shape)
        if magnitude:
            # truncation plus the relative accuracy of the terms
            return val, (err + _TERM_REL * pref * mag).reshape(shape)
        if not grad:
            return val
        return val, (pref * dr).reshape(shape), (pref * da).reshape(shape)

    # -- public surface ------------------------------------------------

    def eval(self, t, x, y):
        """``G(t, x, y)`` for points (or broadcastable batches) ``x``, ``y``.

        Raises
        ------
        ValueError
            If ``t <= 0``.
        KernelAccuracyError
            If the series does not converge within ``max_terms``.
        """
        arrs = _as_arrays(t, x, y)
        tt, r, th, rho, ph = (a.ravel() for a in arrs)
        interior = r * rho > 0
        d2 = (r - rho) ** 2 + 4.0 * r * rho * np.sin(0.5 * (th - ph)) ** 2
        val = np.zeros(tt.size)
        err = np.full(tt.size, np.inf)

        def take(idx, v, e):
            better = e < err[idx]
            val[idx[better]] = v[better]
            err[idx[better]] = e[better]

        def run(method, mask):
            idx = np.flatnonzero(mask)
            if idx.size:
                take(idx, *method(tt[idx], r[idx], th[idx], rho[idx], ph[idx]))

        # G is below the whole-plane kernel, so tiny values start from the integral
        # form; so does large z, where the series needs many modes
        first = interior & ((free_kernel(tt, d2) < _RESOLVE * self.cfg.tol) | (r * rho > 2.0 * _LARGE_Z * tt))
        run(self._integral_form, first)
        open_ = ~(err <= _REL * np.abs(val))
        run(self._series_checked, open_ & ~first)
        if (open_ & first).any():
            try:
                run(self._series_checked, open_ & first)
            except KernelAccuracyError:
                pass  # the integral value stands
        # cancellation in the series, or a value near its truncation tolerance
        run(self._integral_form, interior & ~first & ~(err <= _REL * np.abs(val)))
        out = np.maximum(val, 0.0).reshape(arrs[0].shape)
        return out if out.ndim else float(out)

    def _series_checked(self, t, r, th, rho, ph):
        return self._series(t, r, th, rho, ph, magnitude=True)

    def _integral_form(self, t, r, th, rho, ph):
        # G = images/(4 pi t) - int_0^inf e^{-(r+rho)^2/4t - z(cosh s - 1)} K(s) ds / (4 pi kappa0 t)
        nu = self.step
        z = r * rho / (2.0 * t)
        # beyond smax the integrand is below e^-60 of its value at s = 0
        smax = np.arccosh(1.0 + 60.0 / z)
        # an image near the branch cut gives K a peak of width delta/nu at s = 0
        delta = np.abs(_reduce(nu * np.stack(_alphas(th, ph))))
        delta = np.min(np.where(delta < nu * _CUT, np.inf, delta), axis=0)
        with np.errstate(divide="ignore"):
            depth = np.clip(np.ceil(np.log2(smax * nu / delta)) + 4, 3, 56)
        order = np.argsort(depth, kind="stable")
        val, err = np.empty(t.size), np.empty(t.size)
        gx, gw = _gauss_legendre01(12)
        for lo in range(0, t.size, _CHUNK):
            idx = order[lo:lo + _CHUNK]
            val[idx], err[idx] = self._integral_chunk(t[idx], r[idx], th[idx], rho[idx], ph[idx], z[idx],
                                                      smax[idx], int(depth[idx].max()), gx, gw)
        return val, err

    def _integral_chunk(self, t, r, th, rho, ph, z, smax, depth, gx, gw):
        k0, nu = self.kappa0, self.step
        img = np.zeros(t.size)
        scale = np.zeros(t.size)
        for phi, sign in ((th - ph, 1.0), (th + ph, -1.0)):
            n_lo = int(np.floor(np.min((phi - math.pi) / (2.0 * k0))))
            n_hi = int(np.ceil(np.max((phi + math.pi) / (2.0 * k0))))
            for n in range(n_lo, n_hi + 1):
                psi = phi - 2.0 * n * k0
                gap = math.pi - np.abs(psi)
                w = np.where(gap > _CUT, 1.0, np.where(gap >= -_CUT, 0.5, 0.0))
                d2 = (r - rho) ** 2 + 4.0 * r * rho * np.sin(0.5 * psi) ** 2
                term = w * np.exp(-d2 / (4.0 * t))
                img += sign * term
                scale += term
        n_uni = max(8, int(math.ceil(float(np.max(smax)) * 0.875 / 0.5)))
        rel = np.concatenate([[0.0], 2.0 ** -np.arange(float(depth), 3.0, -1.0), np.linspace(0.125, 1.0, n_uni + 1)])
        edges = smax[:, None] * rel[None, :]
        width = np.diff(edges, axis=1)
        s = (edges[:, :-1, None] + width[:, :, None] * gx).reshape(t.size, -1)
        w = (width[:, :, None] * gw).reshape(t.size, -1)
        q = np.exp(-nu * s)
        one_q2 = np.expm1(-nu * s) ** 2

        def H(alpha):
            a = _reduce(nu * alpha)
            # on the cut the peak is accounted for by the half-weight image
            sa = np.where(np.abs(a) < nu * _CUT, 0.0, np.sin(a))[:, None]
            return q * sa / (one_q2 + 4.0 * q * np.sin(0.5 * a)[:, None] ** 2)

        a1, a2, a3, a4 = _alphas(th, ph)
        K = H(a1) + H(a2) - H(a3) - H(a4)
        expo = -((r + rho) ** 2 / (4.0 * t))[:, None] - z[:, None] * 2.0 * np.sinh(0.5 * s) ** 2
        part = w * np.exp(expo) * K
        integral = np.sum(part, axis=1)
        val = img / (4.0 * math.pi * t) - integral / (4.0 * math.pi * k0 * t)
        scale = scale / (4.0 * math.pi * t) + np.sum(np.abs(part), axis=1) / (4.0 * math.pi * k0 * t)
        return val, 64.0 * _EPS * scale

    __call__ = eval

    def eval_polar(self, t, r, theta, rho, phi):
        """Array form of :meth:`eval` on raw polar coordinates."""
        return self.eval(t, WedgePoint(r, theta), WedgePoint(rho, phi))

    def gradient(self, t, x, y):
        """Kernel value and polar gradient in ``x``.

        Returns ``(G, dG/dr, (1/r) dG/dangle)`` obtained by term-wise
        differentiation of the series.
        """
        arrs = _as_arrays(t, x, y)
        g, dr, da = self._series(*arrs, grad=True)
        return g, dr, da

    def gradient_cartesian(self, t, x, y):
        """``(G, dG/dx1, dG/dx2)`` with respect to the first point."""
        g, dr, da = self.gradient(t, x, y)
        c, s = np.cos(x.angle), np.sin(x.angle)
        return g, c * dr - s * da, s * dr + c * da

    def survival_mass(self, t, x, n_panels=12, order=8):
        """Total mass ``int_D G(t, x, y) dy`` (survival probability)."""
        width = math.sqrt(2.0 * t)
        rule = wedge_rule(self.kappa0, centers=[(float(x.r), float(x.angle))], width=width,
                          tail=9.0, n_panels=n_panels, order=order)
        return wedge_sum(lambda y: self.eval(t, x, y), rule, chunk=64)

    def bound_ratio(self, t_minus_s, x, y, lambda1, lambda2, sigma, min_value=0.0):
        """``|G|`` divided by the two-sided vertex/boundary Gaussian bound.

        The denominator is ``R_x^(l1-1) R_y^(l2-1) J_x J_y exp(-sigma|x-y|^2/c)/c``
        with ``c = t_minus_s``.  Where ``G < min_value`` the kernel is not
        resolved relative to the series tolerance and ``nan`` is returned.
        """
        lim = math.pi / self.kappa0
        for lam in (lambda1, lambda2):
            if not (0.0 < lam < lim):
                raise ValueError(f"exponents must lie in (0, pi/kappa0) = (0, {lim:.6g}), got {lam}")
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        c = np.asarray(t_minus_s, dtype=float)
        sc = np.sqrt(c)
        rx, ry = np.asarray(x.r, float), np.asarray(y.r, float)
        dx = boundary_distance(rx, x.angle, self.kappa0)
        dy = boundary_distance(ry, y.angle, self.kappa0)
        d2 = rx**2 + ry**2 - 2.0 * rx * ry * np.cos(np.asarray(x.angle) - np.asarray(y.angle))
        d2 = np.maximum(d2, 0.0)
        log_den = ((lambda1 - 1.0) * np.log(rx / (sc + rx)) + (lambda2 - 1.0) * np.log(ry / (sc + ry))
                   + np.log(dx / (sc + dx)) + np.log(dy / (sc + dy)) - sigma * d2 / c - np.log(c))
        g = self.eval(c, x, y)
        with np.errstate(divide="ignore"):
            out = np.exp(np.log(np.abs(g)) - log_den)
        if min_value > 0:
            out = np.where(np.abs(g) < min_value, np.nan, out)
        return out if np.ndim(out) else float(out)


def eval_images(t, x, y, kappa0):
    """Wedge kernel for ``kappa0 = pi/m`` by the method of images.

    Signed sum of whole-plane kernels over the dihedral group generated by
    the reflections in the two edges (``2m`` images).
    """
    m = math.pi / float(kappa0)
    mi = int(round(m))
    if mi < 1 or abs(m - mi) > 1e-12:
        raise ValueError("method of images needs kappa0 = pi/m for a positive integer m")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("kernel needs t > 0")
    rx, ax = np.asarray(x.r, float), np.asarray(x.angle, float)
    ry, ay = np.asarray(y.r, float), np.asarray(y.angle, float)
    total = 0.0
    for j in range(mi):
        rot = 2.0 * kappa0 * j
        for sign, img in ((1.0, ay + rot), (-1.0, -ay + rot)):
            d2 = rx**2 + ry**2 - 2.0 * rx * ry * np.cos(ax - img)
            total = total + sign * free_kernel(t, np.maximum(d2, 0.0))
    return total if np.ndim(total) else float(total)
