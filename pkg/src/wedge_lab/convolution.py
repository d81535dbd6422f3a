r"""Deterministic and stochastic heat convolutions for separable test fields.

For ``g^k(s, y) = a_k(s) b_k(y)`` the inner spatial integral is
``v_k(t - s, x) = int_D G(t - s, x, y) b_k(y) dy`` and

* the deterministic convolution is ``sum_k int_0^t a_k(s) v_k(t-s, x) ds``;
* the stochastic convolution is a centred Gaussian with variance
  ``sigma^2(t, x) = sum_k int_0^t a_k(s)^2 v_k(t-s, x)^2 ds`` (Ito isometry),
  so ``E|u|^p = m_p sigma^p``.

``v_k`` is computed on tensor grids ``(tau, r, angle)`` from the angular
mode coefficients supplied by the field (see :mod:`wedge_lab.fields`); time
integrals in ``tau`` use panel rules with exact indefinite integration so
that one propagation serves every time horizon.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .fields import CallableProfile, StepProfile, TestField
from .domain_geometry import WedgePoint, weight_density
from .heat_kernel import KernelAccuracyError
from .quadrature import WedgeQuadRule, _merge_breaks, panel_rule
from .special_functions import gauss_abs_moment

__all__ = [
    "ConvolutionRules",
    "propagate",
    "det_convolution",
    "stoch_variance",
    "stoch_lp_space_time_norm",
    "det_lp_space_time_norm",
    "space_time_rules",
    "mc_sample",
    "SpaceTimeSolution",
]

_BLOCK = 8
_CHUNK_BUDGET = 400_000


@dataclass(frozen=True)
class ConvolutionRules:
    """Discretisation parameters for space-time integrals.

    Parameters
    ----------
    time_panels, time_order : int
        Panels per time interval and nodes per panel.
    time_grading : float
        Grading exponent toward ``tau = 0`` (the diagonal ``s = t``).
    space_panels, space_order : int
        Panels per radial/angular interval and nodes per panel.
    tol : float
        Absolute truncation tolerance of the mode sums.
    time_floor : float
        The first time interval is cut geometrically (ratio ``time_ratio``)
        down to ``(time_floor * l)^2`` with ``l`` the smallest length scale
        of the field, so that points close to jumps or edges of the field
        see their short-time transition resolved.  ``0`` disables this.
    """

    time_panels: int = 6
    time_order: int = 6
    time_grading: float = 2.0
    space_panels: int = 3
    space_order: int = 6
    tol: float = 1e-11
    max_modes: int = 20000
    time_floor: float = 0.01
    time_ratio: float = 4.0

    def refined(self):
        return replace(self, time_panels=self.time_panels * 2, space_panels=self.space_panels * 2)

    def time_rule(self, breaks, scale):
        floor = (self.time_floor * scale) ** 2 if self.time_floor > 0 else None
        return panel_rule(breaks, self.time_panels, self.time_order, self.time_grading,
                          floor=floor, ratio=self.time_ratio, split=max(1, self.time_panels // 3))


def propagate(field, tau, r, theta, tol=1e-11, max_modes=20000, grad=False):
    """``v(tau_i, r_j, theta_l) = int_D G(tau_i, x, y) b(y) dy`` on a tensor grid.

    Returns ``v`` shaped ``(len(tau), len(r), len(theta))``; with ``grad`` also
    ``dv/dr`` and ``(1/r) dv/dangle``.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if np.any(tau <= 0):
        raise ValueError("propagation times must be positive")
    tt, rr = np.meshgrid(tau, r, indexing="ij")
    tt, rr = tt.ravel(), rr.ravel()
    n = tt.size
    v = np.zeros((n, theta.size))
    dv = np.zeros_like(v) if grad else None
    av = np.zeros_like(v) if grad else None
    prep = field.prepare(tt, rr)
    width = np.shape(prep.get("rho", np.zeros((1, 1))))[-1] if "rho" in prep else 1
    chunk = max(16, _CHUNK_BUDGET // (_BLOCK * width))
    for start in range(0, n, chunk):
        idx = np.arange(start, min(n, start + chunk))
        sub = field.subset(prep, idx)
        active = np.arange(idx.size)
        if "empty" in sub:
            active = active[~sub["empty"]]
        orders = field.mode_orders()
        used = 0
        worst = 0.0
        while active.size:
            ks = []
            for k in orders:
                ks.append(k)
                if len(ks) == _BLOCK:
                    break
            if not ks:
                break
            if used > max_modes:
                raise KernelAccuracyError("mode sum did not converge", worst)
            used += len(ks)
            if len(ks) == 1:
                ks = ks + ks  # duplicate to keep two-term tails well defined
                dup = True
            else:
                dup = False
            ks = np.asarray(ks)
            part = field.subset(sub, active)
            A, dA, tail = field.modes(part, ks, grad)
            if dup:
                A, dA = A[:1], None if dA is None else dA[:1]
                ks = ks[:1]
                tail = np.zeros_like(tail)
            nu = ks * field.step
            S = np.sin(nu[:, None] * theta[None, :])
            rows = idx[active]
            v[rows] += A.T @ S
            if grad:
                C = np.cos(nu[:, None] * theta[None, :])
                dv[rows] += dA.T @ S
                av[rows] += ((A * nu[:, None]) / part["r"][None, :]).T @ C
            done = tail <= tol
            worst = float(tail[~done].max()) if (~done).any() else 0.0
            active = active[~done]
    shape = (tau.size, r.size, theta.size)
    if not grad:
        return v.reshape(shape)
    return v.reshape(shape), dv.reshape(shape), av.reshape(shape)


# -- pointwise convolutions ------------------------------------------------


def _check_field(g):
    if not isinstance(g, TestField):
        raise TypeError("expected a TestField")


def _min_scale(g):
    scales = [s for s in g.scales() if s > 0]
    return 0.25 * min(scales) if scales else 0.25


def _time_rule(t, rules, g, extra=()):
    breaks = _merge_breaks([*extra], 0.0, t, 1e-12 * t)
    return rules.time_rule(breaks, _min_scale(g))


def _inner_values(g, rule, x, rules, grad=False):
    out = []
    r = np.atleast_1d(np.asarray(x.r, dtype=float))
    th = np.atleast_1d(np.asarray(x.angle, dtype=float))
    for _, b in g.modes:
        res = propagate(b, rule.nodes, r, th, rules.tol, rules.max_modes, grad)
        out.append(res)
    return out


def _convolve(a, rule, vals, ts, power):
    """``int_0^t a(t - tau)^power vals(tau) dtau`` for each ``t`` in ``ts``.

    ``vals`` holds samples at the nodes of ``rule`` (axis 0).  Step profiles
    reduce to one indefinite integral evaluated at ``t - start``; other
    profiles weight the samples per ``t`` and interpolate on the last panel.
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if isinstance(a, StepProfile):
        h = ts - a.start
        out = np.zeros((len(ts),) + vals.shape[1:])
        pos = h > 0
        if pos.any():
            out[pos] = a.amplitude**power * rule.cumulative_at(vals, h[pos])
        return out
    out = np.empty((len(ts),) + vals.shape[1:])
    for i, t in enumerate(ts):
        w = a(np.maximum(t - rule.nodes, 0.0)) ** power
        out[i] = rule.cumulative_at(w.reshape((-1,) + (1,) * (vals.ndim - 1)) * vals, [t])[0]
    return out


def det_convolution(f, t, x, rules=None):
    """``int_0^t int_D G(t-s, x, y) f(s, y) dy ds`` at one point (or a tensor batch).

    ``f`` is a :class:`TestField`; modes are summed.
    """
    _check_field(f)
    rules = rules or ConvolutionRules()
    if not t > 0:
        raise ValueError("t must be positive")
    starts = [t - s for s in f.starts() if 0 < t - s < t]
    rule = _time_rule(t, rules, f, starts)
    vals = _inner_values(f, rule, x, rules)
    total = sum(_convolve(a, rule, v, t, 1)[0] for (a, _), v in zip(f.modes, vals))
    return _squeeze(total)


def stoch_variance(g, t, x, rules=None):
    """Variance ``sum_k int_0^t a_k(s)^2 v_k(t-s, x)^2 ds`` of the stochastic convolution."""
    _check_field(g)
    rules = rules or ConvolutionRules()
    if not t > 0:
        raise ValueError("t must be positive")
    starts = [t - s for s in g.starts() if 0 < t - s < t]
    rule = _time_rule(t, rules, g, starts)
    vals = _inner_values(g, rule, x, rules)
    total = sum(_convolve(a, rule, v**2, t, 2)[0] for (a, _), v in zip(g.modes, vals))
    return _squeeze(total)


def _squeeze(a):
    a = np.asarray(a)
    return float(a.reshape(-1)[0]) if a.size == 1 else a


# -- space-time norms ------------------------------------------------------


def space_time_rules(g, kappa0, T_max, rules=None, horizons=()):
    """Spatial product rule and time panel rule adapted to ``g`` and ``T_max``.

    Radial breakpoints are geometric (factor 2) between a quarter of the
    smallest field scale and an outer radius beyond which every ``v`` is
    below ``1e-16`` of its peak; the time rule has breakpoints at all
    horizons and mode start times.
    """
    rules = rules or ConvolutionRules()
    lo = _min_scale(g)
    outer = g.outer_radius() + 12.0 * math.sqrt(T_max)
    rad = [lo]
    while rad[-1] * 2.0 < outer:
        rad.append(rad[-1] * 2.0)
    for _, b in g.modes:
        if b.support is not None:
            rad += [b.support[0], b.support[1]]
    for rc, _ in g.centers():
        rad.append(rc)
    rb = _merge_breaks(rad, 0.0, outer, 1e-9 * outer)
    h = min(0.5 * math.pi, 0.5 * kappa0)
    ab = _merge_breaks([h, kappa0 - h, 0.5 * kappa0], 0.0, kappa0, 1e-9)
    space = WedgeQuadRule(kappa0, rb, ab, rules.space_panels, rules.space_order, 3.0)
    tb = {0.0, float(T_max), *[float(T) for T in horizons]}
    for s in g.starts():
        for T in list(tb):
            if 0 < T - s:
                tb.add(T - s)
    time = rules.time_rule(sorted(tb), lo)
    return space, time


class SpaceTimeSolution:
    """Propagated modes of a test field on a fixed space-time discretisation.

    Holds ``v_k`` (and optionally first derivatives) on the tensor grid
    ``time.nodes x space.radial.nodes x space.angular.nodes`` and evaluates
    pointwise second moments and weighted space-time integrals for any
    horizon that is a panel edge of the time rule.
    """

    def __init__(self, g, kappa0, T_max, rules=None, horizons=(), grad=False):
        _check_field(g)
        self.g = g
        self.kappa0 = float(kappa0)
        self.rules = rules or ConvolutionRules()
        self.space, self.time = space_time_rules(g, self.kappa0, T_max, self.rules, horizons)
        self.grad = grad
        r = self.space.radial.nodes
        th = self.space.angular.nodes
        self.v, self.dv, self.av = [], [], []
        for _, b in g.modes:
            res = propagate(b, self.time.nodes, r, th, self.rules.tol, self.rules.max_modes, grad)
            if grad:
                self.v.append(res[0])
                self.dv.append(res[1])
                self.av.append(res[2])
            else:
                self.v.append(res)

    def _t_rule(self, T):
        # outer rule: the panels of the time rule up to T
        n = self.time.panels_upto(T) * self.time.order
        return self.time.nodes[:n], self.time.weights[:n]

    def _space_integral(self, vals, Theta, theta):
        r = self.space.radial
        a = self.space.angular
        w = weight_density(r.nodes[:, None], a.nodes[None, :], self.kappa0, Theta, theta)
        wr = (r.weights * r.nodes)[:, None] * a.weights[None, :] * w
        return np.tensordot(vals, wr, axes=([-2, -1], [0, 1]))

    def _second_moment(self, tn, which):
        """``sum_k int a_k^2 q_k^2`` at outer times ``tn`` for q = v, dv or av."""
        out = np.zeros((len(tn),) + self.v[0].shape[1:])
        for (a, _), q in zip(self.g.modes, which):
            out += _convolve(a, self.time, q**2, tn, 2)
        return out

    def _first_moment(self, tn, which):
        out = np.zeros((len(tn),) + self.v[0].shape[1:])
        for (a, _), q in zip(self.g.modes, which):
            out += _convolve(a, self.time, q, tn, 1)
        return out

    def sigma2(self, T):
        """``sigma^2`` at the outer time nodes up to ``T`` (shape ``(n_t, n_r, n_angle)``)."""
        tn, _ = self._t_rule(T)
        return self._second_moment(tn, self.v)

    def stoch_norm_p(self, p, Theta, theta, T):
        """``E int_0^T int_D |u_S|^p w_{Theta, theta}``, by Gaussian reduction."""
        tn, tw = self._t_rule(T)
        s2 = self._second_moment(tn, self.v)
        vals = gauss_abs_moment(p) * np.maximum(s2, 0.0) ** (0.5 * p)
        return float(np.dot(tw, self._space_integral(vals, Theta, theta)))

    def det_norm_p(self, p, Theta, theta, T):
        """``int_0^T int_D |u_D|^p w_{Theta, theta}`` for the field used as forcing."""
        tn, tw = self._t_rule(T)
        u = self._first_moment(tn, self.v)
        return float(np.dot(tw, self._space_integral(np.abs(u) ** p, Theta, theta)))

    def gradient_terms(self, T, kind):
        """Space-time samples of ``E|grad u|^2`` (stochastic) or ``|grad u|^2`` (deterministic)."""
        if not self.grad:
            raise ValueError("solution was propagated without derivatives")
        tn, tw = self._t_rule(T)
        if kind == "stoch":
            val = self._second_moment(tn, self.dv) + self._second_moment(tn, self.av)
        else:
            val = self._first_moment(tn, self.dv) ** 2 + self._first_moment(tn, self.av) ** 2
        return tn, tw, val

    def first_moment(self, T):
        tn, _ = self._t_rule(T)
        return self._first_moment(tn, self.v)


def stoch_lp_space_time_norm(g, params, T, kappa0, rules=None, solution=None):
    """``(int_0^T int_D m_p sigma^p w dx dt)^(1/p)`` with the weight of ``params``.

    ``T`` may be a sequence; then a list of norms (one propagation) is returned.
    Pass ``params`` already shifted if the shifted-weight norm is wanted.
    """
    if params.p < 2:
        raise ValueError("the stochastic estimate needs p >= 2")
    Ts = list(np.atleast_1d(T))
    sol = solution or SpaceTimeSolution(g, kappa0, max(Ts), rules, Ts)
    out = [sol.stoch_norm_p(params.p, params.Theta, params.theta, float(t)) ** (1.0 / params.p) for t in Ts]
    return out if np.ndim(T) else out[0]


def det_lp_space_time_norm(f, params, T, kappa0, rules=None, solution=None):
    """``(int_0^T int_D |u_D|^p w dx dt)^(1/p)`` of the deterministic convolution."""
    Ts = list(np.atleast_1d(T))
    sol = solution or SpaceTimeSolution(f, kappa0, max(Ts), rules, Ts)
    out = [sol.det_norm_p(params.p, params.Theta, params.theta, float(t)) ** (1.0 / params.p) for t in Ts]
    return out if np.ndim(T) else out[0]


# -- Monte Carlo -----------------------------------------------------------


def _mc_chunk(coef, seed, start, stop, p):
    K, n = coef.shape
    out = np.empty(stop - start)
    for i in range(start, stop):
        rng = np.random.default_rng([seed, i])
        xi = rng.standard_normal((K, n))
        out[i - start] = abs(float(np.sum(coef * xi))) ** p
    return out


def mc_sample(g, t, x, n_paths, n_steps, seed, p=2.0, rules=None, executor=None):
    """Monte Carlo estimate of ``E|u_S(t, x)|^p`` with its standard error.

    Left-point discretisation ``sum_k sum_j a_k(s_j) v_k(t - s_j, x) dW^k_j`` with
    ``s_j = j t / n_steps``; path ``i`` draws its increments from a generator
    seeded by ``(seed, i)``, so results do not depend on how paths are
    distributed over workers.
    """
    _check_field(g)
    if n_steps < 8:
        raise ValueError("mc_sample needs n_steps >= 8")
    if n_paths < 2:
        raise ValueError("mc_sample needs at least two paths")
    rules = rules or ConvolutionRules()
    dt = t / n_steps
    s = dt * np.arange(n_steps)
    coef = np.empty((len(g.modes), n_steps))
    r = np.atleast_1d(float(x.r))
    th = np.atleast_1d(float(x.angle))
    for k, (a, b) in enumerate(g.modes):
        v = propagate(b, t - s, r, th, rules.tol, rules.max_modes)[:, 0, 0]
        coef[k] = np.asarray(a(s), dtype=float) * v * math.sqrt(dt)
    if not np.any(coef):
        return 0.0, 0.0
    bounds = np.linspace(0, n_paths, min(n_paths, 64) + 1).astype(int)
    if executor is None:
        parts = [_mc_chunk(coef, seed, a, b, p) for a, b in zip(bounds[:-1], bounds[1:])]
    else:
        futs = [executor.submit(_mc_chunk, coef, seed, a, b, p) for a, b in zip(bounds[:-1], bounds[1:])]
        parts = [f.result() for f in futs]
    vals = np.concatenate(parts)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_paths))


__all__ += ["CallableProfile", "StepProfile", "TestField", "WedgePoint"]
