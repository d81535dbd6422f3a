r"""Test fields: spatial profiles, time profiles and the separable families.

A :class:`ScalarField` is a closure over :class:`~wedge_lab.domain_geometry.WedgePoint`
batches with optional analytic derivatives.  Fields that also know how the
heat semigroup acts on them expose :meth:`modes`: the angular sine
coefficients

.. math::

    v(\tau, (r,\vartheta)) = \int_D G(\tau, x, y) b(y)\,dy
        = \sum_k A_k(\tau, r) \sin(\nu_k \vartheta)

computed block by block in ``k``.  Two such fields exist:

* :class:`SemigroupField`, ``b = G(a, x_0, .)``, for which
  ``A_k`` is a single Bessel value (``v = G(tau + a, ., x_0)``);
* :class:`SeparableField`, ``b = F(|y|) Phi(angle)``, for which ``A_k`` is a
  one-dimensional radial integral.

A :class:`TestField` combines spatial profiles ``b_k`` with time profiles
``a_k`` into ``g^k(s, y) = a_k(s) b_k(y)``.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .domain_geometry import WedgePoint, boundary_distance
from .heat_kernel import WedgeHeatKernel
from .quadrature import composite_rule, wedge_rule, wedge_sum
from .special_functions import bessel_ive

__all__ = [
    "ScalarField",
    "SequenceField",
    "SemigroupField",
    "SeparableField",
    "RadialProfile",
    "bump_profile",
    "annulus_profile",
    "power_profile",
    "StepProfile",
    "CallableProfile",
    "TestField",
    "semigroup_family",
    "radial_bump_family",
    "vertex_power_family",
]


class ScalarField:
    """A real function on the wedge, with optional analytic derivatives.

    Parameters
    ----------
    func : callable
        ``func(x)`` for a :class:`WedgePoint` batch.
    grad : callable, optional
        Returns ``(du/dx1, du/dx2)``.
    hess : callable, optional
        Returns ``(u_11, u_12, u_22)``.
    support : tuple(float, float), optional
        Radial interval outside which ``u`` vanishes.
    scales : sequence of float
        Length scales that quadrature rules should resolve.
    """

    def __init__(self, func, grad=None, hess=None, support=None, scales=(), name="field"):
        self._func = func
        self._grad = grad
        self._hess = hess
        self.support = support
        self.scales = tuple(scales)
        self.name = name

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"

    def __call__(self, x):
        return self._func(x)

    @property
    def has_grad(self):
        return self._grad is not None

    @property
    def has_hess(self):
        return self._hess is not None

    def grad(self, x):
        if self._grad is None:
            raise ValueError(f"{self.name}: no first derivatives supplied")
        return self._grad(x)

    def hess(self, x):
        if self._hess is None:
            raise ValueError(f"{self.name}: no second derivatives supplied")
        return self._hess(x)

    def scaled(self, c):
        """The field ``c * u``."""
        g = None if self._grad is None else (lambda x: tuple(c * d for d in self._grad(x)))
        h = None if self._hess is None else (lambda x: tuple(c * d for d in self._hess(x)))
        return ScalarField(lambda x: c * self._func(x), g, h, self.support, self.scales, f"{c}*{self.name}")

    def dilated(self, a):
        """The field ``x -> u(a x)``."""
        g = None if self._grad is None else (lambda x: tuple(a * d for d in self._grad(x.scaled(a))))
        h = None if self._hess is None else (lambda x: tuple(a * a * d for d in self._hess(x.scaled(a))))
        sup = None if self.support is None else (self.support[0] / a, self.support[1] / a)
        return ScalarField(lambda x: self._func(x.scaled(a)), g, h, sup,
                           [s / a for s in self.scales], f"{self.name}(a={a}*x)")


class SequenceField:
    """Finitely many components ``(u^1, ..., u^K)``: an ``l2``-valued field with zero tail."""

    def __init__(self, components, name="sequence"):
        self.components = tuple(components)
        if not self.components:
            raise ValueError("a sequence field needs at least one component")
        self.name = name

    def __len__(self):
        return len(self.components)

    def __call__(self, x):
        """Pointwise ``l2`` norm of the components."""
        return np.sqrt(sum(np.asarray(c(x), dtype=float) ** 2 for c in self.components))

    @property
    def support(self):
        sups = [c.support for c in self.components]
        if any(s is None for s in sups):
            return None
        return (min(s[0] for s in sups), max(s[1] for s in sups))

    @property
    def scales(self):
        return tuple(s for c in self.components for s in c.scales)


# -- semigroup-aware spatial profiles ------------------------------------


class SemigroupField(ScalarField):
    """``b(y) = G(a, x0, y)``: the kernel started at ``x0`` and run for time ``a``."""

    def __init__(self, kappa0, a, x0, kernel=None):
        if not a > 0:
            raise ValueError("semigroup time a must be positive")
        self.kernel = kernel or WedgeHeatKernel(kappa0)
        self.kappa0 = float(kappa0)
        self.a = float(a)
        self.x0 = x0
        self.step = math.pi / self.kappa0
        super().__init__(
            lambda y: self.kernel.eval(self.a, y, self.x0),
            grad=lambda y: self.kernel.gradient_cartesian(self.a, y, self.x0)[1:],
            scales=(math.sqrt(self.a), float(x0.r)),
            name=f"semigroup(a={self.a:g}, r0={float(x0.r):g}, angle={float(x0.angle):g})",
        )
        self.centers = [(float(x0.r), float(x0.angle))]

    def exact(self, tau, x):
        """``v(tau, x) = G(tau + a, x, x0)`` by the semigroup property."""
        return self.kernel.eval(np.asarray(tau) + self.a, x, self.x0)

    def mode_orders(self):
        k = 1
        while True:
            yield k
            k += 1

    def prepare(self, tau, r):
        s = tau + self.a
        r0 = float(self.x0.r)
        return {
            "s": s, "r": r,
            "z": r * r0 / (2.0 * s),
            "pref": np.exp(-((r - r0) ** 2) / (4.0 * s)) / (self.kappa0 * s),
            "r0": r0,
        }

    def subset(self, prep, idx):
        return {k: (v[idx] if isinstance(v, np.ndarray) else v) for k, v in prep.items()}

    def modes(self, prep, ks, grad=False):
        """Coefficients ``A_k`` for the mode numbers ``ks`` at each prepared element.

        Returns ``(A, dA_dr or None, tail)`` with ``A`` shaped ``(len(ks), n)`` and
        ``tail`` a bound on ``sum |A_k|`` over all later modes.
        """
        nu = (np.asarray(ks) * self.step)[:, None]
        z = prep["z"][None, :]
        iv = bessel_ive(nu, z)
        ang = np.sin(nu * float(self.x0.angle))
        A = prep["pref"][None, :] * iv * ang
        dA = None
        r, s = prep["r"][None, :], prep["s"][None, :]
        if grad:
            iv1 = bessel_ive(nu + 1.0, z)
            dA = prep["pref"][None, :] * ang * ((-r / (2.0 * s) + nu / r) * iv + (prep["r0"] / (2.0 * s)) * iv1)
        tail = _geometric_tail(iv[-1], iv[-2]) * prep["pref"]
        if grad:
            tail = tail * (1.0 + (prep["r"] + prep["r0"]) / (2.0 * prep["s"]) + 2.0 * nu[-1, 0] / prep["r"])
        return A, dA, tail


def _geometric_tail(last, before):
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(before > 0, last / before, 0.0)
        tail = np.where(q < 1.0, last * q / (1.0 - q), np.inf)
    return np.where(last == 0.0, 0.0, tail)


@dataclass(frozen=True)
class RadialProfile:
    """Radial factor ``F(rho)`` supported on ``[lo, hi]`` with its derivative."""

    func: object
    deriv: object
    lo: float
    hi: float
    breaks: tuple = ()
    name: str = "radial"

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi < math.inf):
            raise ValueError("radial support must be a bounded interval in [0, inf)")

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        inside = (rho >= self.lo) & (rho <= self.hi)
        with np.errstate(all="ignore"):
            return np.where(inside, self.func(np.where(inside, rho, 0.5 * (self.lo + self.hi))), 0.0)

    def d(self, rho):
        rho = np.asarray(rho, dtype=float)
        inside = (rho > self.lo) & (rho < self.hi)
        with np.errstate(all="ignore"):
            return np.where(inside, self.deriv(np.where(inside, rho, 0.5 * (self.lo + self.hi))), 0.0)


def bump_profile(center, half_width):
    """Smooth bump ``exp(1 - 1/(1-s^2))``, ``s = (rho - center)/half_width``."""
    c, w = float(center), float(half_width)
    if not (0 < w <= c):
        raise ValueError("bump must stay inside (0, inf): need 0 < half_width <= center")

    def f(rho):
        s = (rho - c) / w
        return np.exp(1.0 - 1.0 / np.maximum(1.0 - s * s, 1e-300))

    def df(rho):
        s = (rho - c) / w
        om = np.maximum(1.0 - s * s, 1e-300)
        return f(rho) * (-2.0 * s / om**2) / w

    return RadialProfile(f, df, c - w, c + w, (c - 0.5 * w, c, c + 0.5 * w), f"bump(c={c:g}, w={w:g})")


def annulus_profile(lo, hi):
    """Indicator of ``lo <= rho <= hi`` (derivative zero inside)."""
    one = lambda rho: np.ones_like(rho)  # noqa: E731
    zero = lambda rho: np.zeros_like(rho)  # noqa: E731
    return RadialProfile(one, zero, float(lo), float(hi), (), f"annulus({lo:g}, {hi:g})")


def power_profile(delta, eps, outer=1.0):
    """``rho^(-delta)`` on ``eps <= rho <= outer``."""
    d = float(delta)
    f = lambda rho: rho ** (-d)  # noqa: E731
    df = lambda rho: -d * rho ** (-d - 1.0)  # noqa: E731
    return RadialProfile(f, df, float(eps), float(outer), (), f"power(delta={d:g}, eps={eps:g})")


class SeparableField(ScalarField):
    """``b(y) = F(|y|) * Phi(angle)`` with ``Phi = 1`` ("flat") or ``sin(m pi angle / kappa0)``.

    The flat profile does not vanish on the edges (boundary-incompatible data);
    a sine profile is a single angular eigenmode.
    """

    def __init__(self, kappa0, radial, angular="flat", rho_panels=2, rho_order=10):
        self.kappa0 = float(kappa0)
        self.radial = radial
        self.step = math.pi / self.kappa0
        if angular == "flat":
            self.mode = None
        else:
            self.mode = int(angular)
            if self.mode < 1:
                raise ValueError("angular mode number must be >= 1")
        self.angular = angular
        self.rho_panels = int(rho_panels)
        self.rho_order = int(rho_order)
        super().__init__(self._eval, grad=self._grad, support=(radial.lo, radial.hi),
                         scales=(radial.hi - radial.lo, radial.hi), name=f"{radial.name}x{angular}")
        mid = 0.5 * (radial.lo + radial.hi)
        self.centers = [(mid, 0.5 * self.kappa0)]

    def phi(self, angle):
        if self.mode is None:
            return np.ones_like(np.asarray(angle, dtype=float))
        return np.sin(self.mode * self.step * np.asarray(angle, dtype=float))

    def dphi(self, angle):
        if self.mode is None:
            return np.zeros_like(np.asarray(angle, dtype=float))
        nu = self.mode * self.step
        return nu * np.cos(nu * np.asarray(angle, dtype=float))

    def _eval(self, x):
        return self.radial(x.r) * self.phi(x.angle)

    def _grad(self, x):
        r, a = np.asarray(x.r, float), np.asarray(x.angle, float)
        dr = self.radial.d(r) * self.phi(a)
        da = self.radial(r) * self.dphi(a) / r
        c, s = np.cos(a), np.sin(a)
        return c * dr - s * da, s * dr + c * da

    def angular_coefficient(self, ks):
        """``int_0^kappa0 Phi(angle) sin(nu_k angle) d angle``."""
        ks = np.asarray(ks)
        if self.mode is None:
            return np.where(ks % 2 == 1, 2.0 / (ks * self.step), 0.0)
        return np.where(ks == self.mode, 0.5 * self.kappa0, 0.0)

    def mode_orders(self):
        if self.mode is not None:
            yield self.mode
            return
        k = 1
        while True:
            yield k
            k += 2

    @property
    def n_modes(self):
        return 1 if self.mode is not None else None

    def lp_norm_p(self, p, Theta, theta, n_panels=16, order=10):
        """``||b||^p`` in the mixed-weight space, by the factorised 1D integrals."""
        F = self.radial
        breaks = sorted({F.lo, F.hi, *[b for b in F.breaks if F.lo < b < F.hi]})
        rr = composite_rule(breaks, n_panels, order, grade_left=F.lo == 0.0)
        rad = np.dot(rr.weights, np.abs(F(rr.nodes)) ** p * rr.nodes ** (theta - 2.0) * rr.nodes)
        h = min(0.5 * math.pi, 0.5 * self.kappa0)
        ar = composite_rule((0.0, h, self.kappa0 - h, self.kappa0) if h < 0.5 * self.kappa0 else (0.0, h, self.kappa0),
                            n_panels, order, grade_left=True, grade_right=True)
        ratio = boundary_distance(1.0, ar.nodes, self.kappa0)
        ang = np.dot(ar.weights, np.abs(self.phi(ar.nodes)) ** p * ratio ** (Theta - 2.0))
        return float(rad * ang)

    def prepare(self, tau, r):
        """Per-element radial rules for the coefficient integrals."""
        F = self.radial
        st = np.sqrt(tau)
        # breakpoints r + sqrt(tau) * offsets, clipped to the support
        cuts = np.clip(r[:, None] + st[:, None] * _RHO_OFFSETS[None, :], F.lo, F.hi)
        inner = [b for b in F.breaks if F.lo < b < F.hi]
        if inner:
            cuts = np.sort(np.concatenate([cuts, np.broadcast_to(inner, (len(r), len(inner)))], axis=1), axis=1)
        empty = cuts[:, -1] <= cuts[:, 0]
        gx, gw = _unit_composite(self.rho_panels, self.rho_order)
        h = np.diff(cuts, axis=1)
        nodes = (cuts[:, :-1, None] + h[:, :, None] * gx[None]).reshape(len(r), -1)
        wts = (h[:, :, None] * gw[None]).reshape(len(r), -1)
        E = np.exp(-((r[:, None] - nodes) ** 2) / (4.0 * tau[:, None]))
        base = wts * F(nodes) * nodes * E / (self.kappa0 * tau[:, None])
        return {
            "tau": tau, "r": r, "rho": nodes, "base": base,
            "z": r[:, None] * nodes / (2.0 * tau[:, None]),
            "empty": empty,
        }

    def subset(self, prep, idx):
        return {k: v[idx] for k, v in prep.items()}

    def modes(self, prep, ks, grad=False):
        ks = np.asarray(ks)
        nu = ks * self.step
        c = self.angular_coefficient(ks)
        z = prep["z"]
        iv = bessel_ive(nu[:, None, None], z[None, :, :])
        A = c[:, None] * np.einsum("knj,nj->kn", iv, prep["base"])
        dA = None
        if grad:
            tau, r, rho = prep["tau"], prep["r"], prep["rho"]
            iv1 = bessel_ive(nu[:, None, None] + 1.0, z[None, :, :])
            fac = (-r / (2.0 * tau))[None, :, None] + nu[:, None, None] / r[None, :, None]
            dA = c[:, None] * np.einsum("knj,nj->kn", fac * iv + (rho / (2.0 * tau[:, None]))[None] * iv1,
                                        prep["base"])
        if self.mode is not None:
            tail = np.zeros(z.shape[0])
        else:
            node_tail = _geometric_tail(iv[-1], iv[-2])
            tail = abs(c[-1]) * np.einsum("nj,nj->n", node_tail, np.abs(prep["base"]))
            if grad:
                tail = tail * (1.0 + (prep["r"] + prep["rho"].max(axis=1)) / (2.0 * prep["tau"]) + 2.0 * nu[-1] / prep["r"])
        return A, dA, tail


_UNIT_CACHE = {}
_RHO_OFFSETS = np.array([-13.0, -8.0, -4.0, -2.0, 0.0, 2.0, 4.0, 8.0, 13.0])


def _unit_composite(n_panels, order):
    key = (n_panels, order)
    if key not in _UNIT_CACHE:
        rule = composite_rule((0.0, 1.0), n_panels, order)
        _UNIT_CACHE[key] = (rule.nodes[None, :], rule.weights[None, :])
    return _UNIT_CACHE[key]


# -- time profiles -------------------------------------------------------


@dataclass(frozen=True)
class StepProfile:
    """``a(s) = amplitude * 1[s > start]``."""

    amplitude: float = 1.0
    start: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.amplitude) and self.start >= 0):
            raise ValueError("step profile needs a finite amplitude and start >= 0")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return np.where(s > self.start, self.amplitude, 0.0)

    def scaled(self, c):
        return StepProfile(c * self.amplitude, self.start)


@dataclass(frozen=True)
class CallableProfile:
    """Arbitrary bounded time profile ``a(s)``; handled by nested quadrature."""

    func: object
    bound: float = 1.0

    def __call__(self, s):
        return np.asarray(self.func(np.asarray(s, dtype=float)), dtype=float)

    def scaled(self, c):
        f = self.func
        return CallableProfile(lambda s: c * f(s), abs(c) * self.bound)


@dataclass(frozen=True)
class TestField:
    """``g^k(s, y) = a_k(s) b_k(y)`` for finitely many modes ``k``.

    Parameters
    ----------
    modes : tuple of (time profile, spatial field)
    name : str
        Identifier used as the field id in ratio tables.
    family : str
        Family label, if built by one of the family constructors.
    """

    __test__ = False  # not a pytest class

    modes: tuple
    name: str = "g"
    family: str = ""
    deterministic: bool = field(default=True)

    def __post_init__(self):
        if not self.modes:
            raise ValueError("a test field needs at least one mode")
        object.__setattr__(self, "modes", tuple((a, b) for a, b in self.modes))

    @classmethod
    def single(cls, b, a=None, name=None, family=""):
        return cls(((a or StepProfile(), b),), name or b.name, family)

    def scaled(self, c):
        return TestField(tuple((a.scaled(c), b) for a, b in self.modes), f"{c}*{self.name}", self.family)

    @property
    def spatial(self):
        return [b for _, b in self.modes]

    @property
    def kappa0(self):
        return self.modes[0][1].kappa0

    def starts(self):
        return sorted({getattr(a, "start", 0.0) for a, _ in self.modes})

    @cached_property
    def is_step(self):
        return all(isinstance(a, StepProfile) for a, _ in self.modes)

    def centers(self):
        out = []
        for _, b in self.modes:
            out += getattr(b, "centers", [])
        return out

    def scales(self):
        return sorted({s for _, b in self.modes for s in b.scales})

    def outer_radius(self):
        out = 0.0
        for _, b in self.modes:
            if isinstance(b, SemigroupField):
                out = max(out, float(b.x0.r) + 10.0 * math.sqrt(b.a))
            elif b.support is not None:
                out = max(out, b.support[1])
        return out

    def spatial_norm_p(self, p, Theta, theta, kappa0, n_panels=12, order=8):
        """``int_D |sum_k b_k-weighted|_{l2}^p w`` for a single spatial mode, else by 2D quadrature.

        Only the spatial part: the time profile contributes separately.
        """
        if len(self.modes) == 1 and isinstance(self.modes[0][1], SeparableField):
            return self.modes[0][1].lp_norm_p(p, Theta, theta)
        return _generic_space_norm_p(self.spatial, [1.0] * len(self.modes), p, Theta, theta, kappa0,
                                     self.centers(), self.scales(), self.outer_radius(), n_panels, order)


def _generic_space_norm_p(fields_, amps, p, Theta, theta, kappa0, centers, scales, outer, n_panels, order):
    from .domain_geometry import weight_density

    breaks = []
    for f in fields_:
        if f.support is not None:
            breaks += [f.support[0], f.support[1]]
    width = min(scales) if scales else 1.0
    rule = wedge_rule(kappa0, centers=centers, width=width, tail=10.0, radial_breaks=breaks,
                      outer=outer, n_panels=n_panels, order=order)

    def integrand(x):
        s = sum((a * np.asarray(f(x), dtype=float)) ** 2 for a, f in zip(amps, fields_))
        return s ** (0.5 * p) * weight_density(x.r, x.angle, kappa0, Theta, theta)

    return wedge_sum(integrand, rule, chunk=64)


# -- families ------------------------------------------------------------


def semigroup_family(kappa0, scales=(0.125, 0.25, 0.5), angle_frac=0.5, kernel=None):
    """Semigroup modes ``G(l^2/4, x0, .)`` with ``|x0| = l`` at a fixed angle fraction."""
    kernel = kernel or WedgeHeatKernel(kappa0)
    out = []
    for ell in scales:
        x0 = WedgePoint(float(ell), angle_frac * kappa0)
        b = SemigroupField(kappa0, 0.25 * ell * ell, x0, kernel)
        out.append(TestField.single(b, name=f"semigroup[l={ell:g},f={angle_frac:g}]", family="semigroup"))
    return out


def radial_bump_family(kappa0, scales=(0.125, 0.25, 0.5), angular="flat"):
    """Smooth radial bumps on ``[l/2, 3l/2]`` with flat (edge-incompatible) angular profile."""
    out = []
    for ell in scales:
        b = SeparableField(kappa0, bump_profile(ell, 0.5 * ell), angular)
        out.append(TestField.single(b, name=f"bump[l={ell:g},{angular}]", family="radial-bump"))
    return out


def vertex_power_family(kappa0, scales=(0.125, 0.25, 0.5), delta=0.5, ratio=8.0, angular=1):
    """``|y|^-delta`` on ``[l/ratio, l]``, concentrating toward the vertex."""
    out = []
    for ell in scales:
        b = SeparableField(kappa0, power_profile(delta, ell / ratio, ell), angular)
        out.append(TestField.single(b, name=f"power[l={ell:g},d={delta:g}]", family="vertex-power"))
    return out
