"""Mixed-weight ``L_p`` norms, low-order weighted Sobolev norms and dyadic localisation.

The weight is ``|x|^(theta-2) * (rho(x)/|x|)^(Theta-2)`` with ``rho`` the
distance to the boundary.  Sobolev norms scale a derivative of order ``m`` by
``rho^m``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .fields import ScalarField, SequenceField, SeparableField, StepProfile, TestField, _generic_space_norm_p
from .domain_geometry import WeightParams, boundary_distance, weight_density
from .quadrature import QuadResult, composite_rule, wedge_rule, wedge_sum

__all__ = [
    "lp_norm",
    "sobolev_norm",
    "space_time_lp_norm",
    "default_rule",
    "DyadicReport",
    "log_bump",
    "covering_constant",
    "dyadic_sum",
    "dyadic_equivalence_check",
]


def default_rule(u, kappa0, n_panels=12, order=8, outer=None):
    """Product rule resolving the support edges and scales of ``u``."""
    sup = u.support
    if sup is None and outer is None:
        raise ValueError("field has no declared support; pass an explicit rule or outer radius")
    breaks = list(sup) if sup is not None else []
    scales = [s for s in getattr(u, "scales", ()) if s > 0]
    if sup is not None and sup[0] > 0:
        r = sup[0]
        while r > 1e-3 * sup[0] and r > 1e-12:
            r *= 0.5
            breaks.append(r)
    outer = outer if outer is not None else sup[1]
    centers = getattr(u, "centers", [])
    width = min(scales) if scales else 1.0
    return wedge_rule(kappa0, centers=centers, width=width, tail=10.0, radial_breaks=breaks,
                      outer=outer, n_panels=n_panels, order=order)


def _weight(x, params, kappa0):
    return weight_density(x.r, x.angle, kappa0, params.Theta, params.theta)


def lp_norm(u, params, kappa0, rule=None, with_error=False):
    """``||u||_{L_{p,Theta,theta}}`` of a scalar or ``l2``-valued field.

    With ``with_error`` a :class:`QuadResult` is returned whose error is
    propagated from the one-level refinement estimate of the integral.
    """
    if not isinstance(params, WeightParams):
        raise TypeError("params must be WeightParams")
    rule = rule or default_rule(u, kappa0)
    p = params.p

    def f(x):
        return np.abs(np.asarray(u(x), dtype=float)) ** p * _weight(x, params, kappa0)

    if not with_error:
        return wedge_sum(f, rule, chunk=64) ** (1.0 / p)
    coarse = wedge_sum(f, rule, chunk=64)
    fine = wedge_sum(f, rule.refined(), chunk=64)
    val = fine ** (1.0 / p)
    err = abs(fine - coarse) / (p * max(fine, 1e-300) ** (1.0 - 1.0 / p))
    return QuadResult(val, err)


def sobolev_norm(u, n, params, kappa0, rule=None):
    """Weighted Sobolev norm ``(sum_{|a|<=n} int |rho^|a| D^a u|^p w)^(1/p)`` for ``n`` in {0, 1, 2}.

    Derivatives come from the closures attached to ``u``; a missing closure
    raises ``ValueError``.  Multi-indices are counted once each, so the
    second-order part is ``u_11, u_12, u_22``.
    """
    if n not in (0, 1, 2):
        raise ValueError("sobolev_norm supports n in {0, 1, 2}")
    if n >= 1 and not (isinstance(u, ScalarField) and u.has_grad):
        raise ValueError("first derivatives required for n >= 1")
    if n == 2 and not u.has_hess:
        raise ValueError("second derivatives required for n = 2")
    rule = rule or default_rule(u, kappa0)
    p = params.p

    def f(x):
        w = _weight(x, params, kappa0)
        total = np.abs(np.asarray(u(x), dtype=float)) ** p
        if n >= 1:
            rho = boundary_distance(x.r, x.angle, kappa0)
            for d in u.grad(x):
                total = total + np.abs(rho * d) ** p
            if n == 2:
                for d in u.hess(x):
                    total = total + np.abs(rho * rho * d) ** p
        return total * w

    return wedge_sum(f, rule, chunk=64) ** (1.0 / p)


def space_time_lp_norm(g, params, T, kappa0, n_time=16):
    """``||g||_{L_p((0,T); L_{p,Theta,theta}(l2))}`` for a :class:`TestField`.

    Step profiles give a piecewise constant integrand in time; single
    separable modes use the factorised radial/angular integrals.
    """
    if not isinstance(g, TestField):
        raise TypeError("expected a TestField")
    p = params.p
    if g.is_step:
        cuts = sorted({0.0, float(T), *[a.start for a, _ in g.modes if 0 < a.start < T]})
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            mid = 0.5 * (lo + hi)
            act = [(a.amplitude, b) for a, b in g.modes if a(mid) != 0.0]
            if not act:
                continue
            if len(act) == 1 and isinstance(act[0][1], SeparableField):
                sp = abs(act[0][0]) ** p * act[0][1].lp_norm_p(p, params.Theta, params.theta)
            else:
                sp = _generic_space_norm_p([b for _, b in act], [c for c, _ in act], p, params.Theta,
                                           params.theta, kappa0, g.centers(), g.scales(), g.outer_radius(), 12, 8)
            total += (hi - lo) * sp
        return total ** (1.0 / p)
    rule = composite_rule((0.0, float(T)), n_time, 8)
    vals = []
    for s in rule.nodes:
        amps = [float(a(s)) for a, _ in g.modes]
        vals.append(_generic_space_norm_p(g.spatial, amps, p, params.Theta, params.theta, kappa0,
                                          g.centers(), g.scales(), g.outer_radius(), 12, 8))
    return float(np.dot(rule.weights, vals)) ** (1.0 / p)


# -- dyadic localisation ---------------------------------------------------


def log_bump(s):
    """``exp(1 - 1/(1 - log(s)^2))`` on ``e^-1 < s < e``, zero elsewhere."""
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ls = np.log(s)
        inside = np.abs(ls) < 1.0
        val = np.exp(1.0 - 1.0 / np.where(inside, 1.0 - ls * ls, 1.0))
    return np.where(inside, val, 0.0)


def covering_constant(xi, n_t=257, n_range=8):
    """``min_t sum_n xi(e^(n+t))`` over a grid of ``t`` in ``[0, 1]``."""
    t = np.linspace(0.0, 1.0, n_t)
    n = np.arange(-n_range, n_range + 1)
    return float(np.min(np.sum(xi(np.exp(n[:, None] + t[None, :])), axis=0)))


@dataclass(frozen=True)
class DyadicReport:
    """Both sides of the dyadic equivalence and their ratios.

    ``rhs_over_lhs`` bounds the constant of the upper estimate of the
    localised sum, ``lhs_over_rhs`` the constant of the reverse estimate.
    """

    lhs: float
    rhs: float
    rhs_over_lhs: float
    lhs_over_rhs: float
    n_range: tuple
    covering: float

    def __iter__(self):
        yield self.rhs_over_lhs
        yield self.lhs_over_rhs

    @property
    def constant(self):
        return max(self.rhs_over_lhs, self.lhs_over_rhs)


def _dyadic_term(u, n, params, kappa0, xi_breaks, n_panels, order):
    a = math.exp(n)
    sup = u.support
    breaks = list(xi_breaks)
    if sup is not None:
        breaks += [sup[0] / a, sup[1] / a]
    lo, hi = min(xi_breaks), max(xi_breaks)
    if sup is not None and (sup[1] / a <= lo or sup[0] / a >= hi):
        return 0.0
    rule = wedge_rule(kappa0, radial_breaks=[b for b in breaks if b <= hi] + [lo], outer=hi,
                      n_panels=n_panels, order=order)

    def f(x):
        ratio = boundary_distance(x.r, x.angle, kappa0) / np.asarray(x.r)
        xi = _XI(x.r)
        return np.abs(xi * np.asarray(u(x.scaled(a)), dtype=float)) ** params.p * ratio ** (params.Theta - 2.0)

    return wedge_sum(f, rule, chunk=64)


_XI = log_bump


def dyadic_sum(u, params, kappa0, n_panels=8, order=8, max_terms=400, xi=None):
    """``sum_n e^(n theta) int_D |xi(|x|) u(e^n x)|^p (rho/|x|)^(Theta-2) dx``.

    Terms are accumulated outward from ``n = 0`` (or from the support) and
    stop once three consecutive terms fall below ``1e-14`` of the sum.
    Returns ``(sum, (n_min, n_max))``.
    """
    global _XI
    prev = _XI
    _XI = xi or log_bump
    try:
        xb = [math.exp(-1.0), math.exp(-0.5), 1.0, math.exp(0.5), math.exp(1.0)]
        sup = u.support
        n0 = 0 if sup is None else int(round(math.log(math.sqrt(max(sup[0], 1e-300) * sup[1])))) if sup[0] > 0 else 0
        terms = {}

        def term(n):
            if n not in terms:
                terms[n] = math.exp(n * params.theta) * _dyadic_term(u, n, params, kappa0, xb, n_panels, order)
            return terms[n]

        total = term(n0)
        span = [n0, n0]
        for step in (1, -1):
            quiet = 0
            n = n0
            for _ in range(max_terms):
                n += step
                t = term(n)
                total += t
                quiet = quiet + 1 if t <= 1e-14 * total else 0
                if t > 0:
                    span = [min(span[0], n), max(span[1], n)]
                if quiet >= 3 and (sup is None or n * step > (math.log(sup[1]) + 1 if step > 0 else -math.log(max(sup[0], 1e-300)) + 1)):
                    break
            else:
                raise ArithmeticError("dyadic sum did not settle within max_terms")
        return math.fsum(terms.values()), tuple(span)
    finally:
        _XI = prev


def dyadic_equivalence_check(u, params, kappa0, xi=None, n_panels=8, order=8, rule=None):
    """Compare ``||u||^p`` with its dyadic localisation (both sides, both ratios).

    Raises ``ValueError`` if ``xi`` violates the covering condition
    ``inf_t sum_n xi(e^(n+t)) > 0``.
    """
    xi = xi or log_bump
    cov = covering_constant(xi)
    if not cov > 1e-12:
        raise ValueError(f"bump violates the covering condition (min sum {cov:.3e})")
    lhs = lp_norm(u, params, kappa0, rule) ** params.p
    rhs, span = dyadic_sum(u, params, kappa0, n_panels, order, xi=xi)
    if lhs == 0.0 and rhs == 0.0:
        return DyadicReport(0.0, 0.0, math.nan, math.nan, span, cov)
    return DyadicReport(lhs, rhs, rhs / lhs, lhs / rhs, span, cov)


__all__ += ["ScalarField", "SequenceField", "StepProfile"]
