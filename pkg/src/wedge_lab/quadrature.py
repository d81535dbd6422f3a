"""Singularity-aware quadrature on the wedge and on time intervals.

Wedge integrals use tensor products of composite Gauss-Legendre rules in
``r`` and in the angle.  Every rule is described by breakpoints; intervals
touching a singular face (the vertex ``r = 0``, the edges at angle ``0`` and
``kappa0``) carry panels graded algebraically as ``(j/N)**q`` toward that
face, all other intervals are split uniformly.  Unbounded radial ranges are
handled by an explicit outer cutoff.
"""

import math
from dataclasses import dataclass, replace
from functools import cached_property, lru_cache

import numpy as np

from .domain_geometry import WedgePoint

__all__ = [
    "QuadResult",
    "QuadratureError",
    "Rule1D",
    "WedgeQuadRule",
    "composite_rule",
    "wedge_rule",
    "wedge_sum",
    "integrate_wedge",
    "integrate_time",
    "time_rule",
    "PanelRule",
    "panel_rule",
]


class QuadratureError(RuntimeError):
    """Raised when an integrand is non-finite at a quadrature node."""


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float

    def __iter__(self):
        yield self.value
        yield self.error


@lru_cache(maxsize=64)
def _gauss_legendre01(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class Rule1D:
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.nodes)


_MIN_PANEL = 1e-13


def _panel_edges(a, b, n, grading, graded):
    s = np.linspace(0.0, 1.0, n + 1)
    if n > 1:
        # keep the smallest panel resolvable next to a non-zero end point
        grading = min(grading, math.log(_MIN_PANEL) / math.log(1.0 / n))
    if graded == "left":
        s = s**grading
    elif graded == "right":
        s = 1.0 - (1.0 - s) ** grading
    return a + (b - a) * s


def composite_rule(breaks, n_panels=8, order=6, grading=3.0, grade_left=False, grade_right=False):
    """Composite Gauss-Legendre rule over consecutive ``breaks``.

    The first interval is graded toward its left end if ``grade_left``, the
    last toward its right end if ``grade_right``.
    """
    breaks = np.asarray(breaks, dtype=float)
    if breaks.ndim != 1 or len(breaks) < 2 or np.any(np.diff(breaks) <= 0):
        raise ValueError("breakpoints must be strictly increasing")
    gx, gw = _gauss_legendre01(order)
    nodes, weights = [], []
    last = len(breaks) - 2
    for i, (a, b) in enumerate(zip(breaks[:-1], breaks[1:])):
        graded = None
        if i == 0 and grade_left:
            graded = "left"
        elif i == last and grade_right:
            graded = "right"
        edges = _panel_edges(a, b, n_panels, grading, graded)
        h = np.diff(edges)
        nodes.append((edges[:-1, None] + h[:, None] * gx[None, :]).ravel())
        weights.append((h[:, None] * gw[None, :]).ravel())
    return Rule1D(np.concatenate(nodes), np.concatenate(weights))


def _merge_breaks(values, lo, hi, min_gap):
    vals = sorted(v for v in values if lo < v < hi)
    out = [lo]
    for v in vals:
        if v - out[-1] > min_gap and hi - v > min_gap:
            out.append(v)
    out.append(hi)
    return tuple(out)


@dataclass(frozen=True)
class WedgeQuadRule:
    """Product rule on ``{0 < r < outer, 0 < angle < kappa0}``.

    Parameters
    ----------
    kappa0 : float
        Opening angle.
    radial_breaks, angular_breaks : tuple of float
        Breakpoints including the end points ``0``/``outer`` and ``0``/``kappa0``.
    n_panels, order : int
        Panels per interval and Gauss-Legendre nodes per panel.
    grading : float
        Exponent ``q`` of the algebraic grading toward singular faces.
    """

    kappa0: float
    radial_breaks: tuple
    angular_breaks: tuple
    n_panels: int = 8
    order: int = 6
    grading: float = 3.0

    def __post_init__(self):
        if self.radial_breaks[0] != 0.0 or self.angular_breaks[0] != 0.0:
            raise ValueError("rules start at the vertex and at angle 0")
        if abs(self.angular_breaks[-1] - self.kappa0) > 1e-12:
            raise ValueError("angular breakpoints must end at kappa0")
        if self.n_panels < 1 or self.order < 1:
            raise ValueError("need at least one panel and one node")

    @property
    def outer_cutoff(self):
        return self.radial_breaks[-1]

    @cached_property
    def radial(self):
        return composite_rule(self.radial_breaks, self.n_panels, self.order, self.grading, grade_left=True)

    @cached_property
    def angular(self):
        return composite_rule(
            self.angular_breaks, self.n_panels, self.order, self.grading, grade_left=True, grade_right=True
        )

    @property
    def size(self):
        return len(self.radial) * len(self.angular)

    def refined(self, factor=2):
        return replace(self, n_panels=self.n_panels * factor)

    def points(self):
        """Broadcastable node batch: ``r`` as a column, angles as a row."""
        return WedgePoint(self.radial.nodes[:, None], self.angular.nodes[None, :])


def wedge_rule(
    kappa0,
    centers=(),
    width=1.0,
    tail=9.0,
    radial_breaks=(),
    outer=None,
    n_panels=8,
    order=6,
    grading=3.0,
):
    """Build a :class:`WedgeQuadRule` adapted to Gaussian-localised integrands.

    Parameters
    ----------
    centers : sequence of (r, angle)
        Points around which the integrand is concentrated with length scale
        ``width``; breakpoints are placed at ``r`` and ``r +- tail*width`` and
        at the matching angular window.
    radial_breaks : sequence of float
        Extra radial breakpoints (support edges of the integrand).
    outer : float, optional
        Outer cutoff; defaults to ``max(r) + tail*width``.
    """
    kappa0 = float(kappa0)
    span = tail * width
    rad = list(radial_breaks)
    ang = []
    h = min(0.5 * math.pi, 0.5 * kappa0)
    ang += [h, kappa0 - h]
    rmax = 0.0
    for rc, ac in centers:
        rad += [rc - span, rc, rc + span]
        ang.append(ac)
        if rc > span:
            dphi = math.asin(min(1.0, span / rc))
            ang += [ac - dphi, ac + dphi]
        rmax = max(rmax, rc)
    if outer is None:
        outer = max([rmax + span] + [b for b in radial_breaks])
    rb = _merge_breaks(rad, 0.0, outer, 1e-9 * outer)
    ab = _merge_breaks(ang, 0.0, kappa0, 1e-9)
    return WedgeQuadRule(kappa0, rb, ab, n_panels=n_panels, order=order, grading=grading)


def wedge_sum(f, rule, chunk=None):
    """Apply ``rule`` once to ``f`` (``f`` maps a :class:`WedgePoint` batch to values).

    ``chunk`` bounds the number of radial rows evaluated together.
    """
    rn, rw = rule.radial.nodes, rule.radial.weights
    an, aw = rule.angular.nodes, rule.angular.weights
    rows = len(rn) if chunk is None else max(1, int(chunk))
    partial = []
    for start in range(0, len(rn), rows):
        sl = slice(start, start + rows)
        x = WedgePoint(rn[sl, None], an[None, :])
        vals = np.asarray(f(x), dtype=float)
        vals = np.broadcast_to(vals, (len(rn[sl]), len(an)))
        if not np.all(np.isfinite(vals)):
            bad = np.argwhere(~np.isfinite(vals))[0]
            raise QuadratureError(
                f"non-finite integrand at node r={rn[sl][bad[0]]!r}, angle={an[bad[1]]!r}"
            )
        partial.append((vals * aw[None, :]).sum(axis=1) * rw[sl] * rn[sl])
    return float(np.concatenate(partial).sum())


def integrate_wedge(f, rule, chunk=None):
    """Integrate ``f`` over the wedge with an error estimate.

    The value is taken from ``rule.refined()``; the error estimate is the
    difference to the value from ``rule`` itself.
    """
    coarse = wedge_sum(f, rule, chunk)
    fine = wedge_sum(f, rule.refined(), chunk)
    return QuadResult(fine, abs(fine - coarse))


def time_rule(T, n_panels=8, order=6, grading=3.0, graded="left"):
    """Composite rule on ``(0, T)`` graded toward ``0`` ("left"), ``T`` ("right"), both, or none."""
    if not (T > 0):
        raise ValueError("time horizon must be positive")
    if graded == "both":
        return composite_rule((0.0, 0.5 * T, T), n_panels, order, grading, grade_left=True, grade_right=True)
    return composite_rule(
        (0.0, T), n_panels, order, grading, grade_left=graded == "left", grade_right=graded == "right"
    )


def _halfline(f, scale, order, tol, max_panels):
    # geometric panels [scale*2^j, scale*2^(j+1)] in both directions from scale
    gx, gw = _gauss_legendre01(order)

    def panel(a, b):
        s = a + (b - a) * gx
        vals = np.asarray(f(s), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise QuadratureError(f"non-finite integrand on panel [{a!r}, {b!r}]")
        return float((b - a) * np.dot(gw, vals))

    def sweep(step):
        parts = []
        prev = None
        for j in range(max_panels):
            a, b = (scale * 2.0**j, scale * 2.0 ** (j + 1)) if step > 0 else (scale * 2.0 ** (-j - 1), scale * 2.0**-j)
            v = panel(a, b)
            parts.append(v)
            if prev is not None and prev != 0.0:
                q = abs(v / prev)
                tail = abs(v) * q / (1.0 - q) if q < 1 else math.inf
                if tail < tol:
                    return parts, tail
            elif v == 0.0 and prev == 0.0:
                return parts, 0.0
            prev = v
        raise QuadratureError("half-line quadrature did not converge; integrand decays too slowly")

    right, err_r = sweep(+1)
    left, err_l = sweep(-1)
    # add from the smallest contributions upward
    vals = sorted(left + right, key=abs)
    return math.fsum(vals), err_r + err_l


def integrate_time(f, T, graded="left", levels=2, n_panels=8, order=8, grading=3.0, scale=1.0, tol=1e-14,
                   floor=1e-30, ratio=4.0):
    """Integrate ``f`` over ``(0, T)``.

    For finite ``T`` a graded composite rule is applied ``levels`` times with
    doubling panel counts; the error estimate is the last change.  With
    ``graded="left"`` and ``floor > 0`` the rule is cut geometrically toward
    ``0`` down to ``floor**((lev+1)/levels) * T`` with ratio ``ratio**(2^-lev)``
    at level ``lev`` (see :func:`panel_rule`); this handles algebraic endpoint singularities and
    keeps the last-change error estimate conservative.  For
    ``T = inf`` geometric panels around ``scale`` are added in both
    directions until the geometric tail estimate falls below ``tol``.
    """
    if T == math.inf:
        coarse, _ = _halfline(f, scale, order, tol, 400)
        fine, tail = _halfline(f, scale, 2 * order, tol, 400)
        return QuadResult(fine, abs(fine - coarse) + tail)
    if levels < 1:
        raise ValueError("need at least one level")
    vals = []
    for lev in range(levels):
        if graded == "left" and floor:
            if not T > 0:
                raise ValueError("time horizon must be positive")
            rule = panel_rule((0.0, T), n_panels * 2**lev, order, grading, True,
                              floor ** ((lev + 1) / levels) * T, ratio ** (0.5**lev))
        else:
            rule = time_rule(T, n_panels * 2**lev, order, grading, graded)
        v = np.asarray(f(rule.nodes), dtype=float)
        if not np.all(np.isfinite(v)):
            i = int(np.argmax(~np.isfinite(v)))
            raise QuadratureError(f"non-finite integrand at time node {rule.nodes[i]!r}")
        vals.append(float(np.dot(rule.weights, v)))
    err = abs(vals[-1] - vals[-2]) if levels > 1 else math.nan
    return QuadResult(vals[-1], err)


@dataclass(frozen=True)
class PanelRule:
    """Composite Gauss-Legendre rule that remembers its panels.

    Besides plain integration it supports indefinite integrals: values at
    the nodes of each panel are interpolated by the degree ``order - 1``
    polynomial and integrated exactly from the panel start.
    """

    edges: np.ndarray
    order: int

    @cached_property
    def _ref(self):
        return _gauss_legendre01(self.order)

    @property
    def n_panels(self):
        return len(self.edges) - 1

    @cached_property
    def widths(self):
        return np.diff(self.edges)

    @cached_property
    def nodes(self):
        gx, _ = self._ref
        return (self.edges[:-1, None] + self.widths[:, None] * gx[None, :]).ravel()

    @cached_property
    def weights(self):
        _, gw = self._ref
        return (self.widths[:, None] * gw[None, :]).ravel()

    def __len__(self):
        return self.n_panels * self.order

    def panels_upto(self, T):
        """Number of leading panels whose right edge is ``<= T`` (``T`` must be an edge)."""
        j = int(np.searchsorted(self.edges, T * (1 + 1e-13)) - 1)
        if abs(self.edges[j] - T) > 1e-12 * max(1.0, abs(T)):
            raise ValueError(f"{T!r} is not a panel edge of this rule")
        return j

    def integrate(self, values, T=None):
        """Integral over ``(edges[0], T)`` of node values (axis 0 indexes the nodes)."""
        values = np.asarray(values, dtype=float)
        n = len(self) if T is None else self.panels_upto(T) * self.order
        return np.tensordot(self.weights[:n], values[:n], axes=1)

    def _partial_matrix(self, u):
        # row i: weights giving int_0^u_i of the interpolant on a unit panel
        gx, _ = self._ref
        n = self.order
        inv = np.linalg.inv(np.polynomial.legendre.legvander(2.0 * gx - 1.0, n - 1))
        basis = np.empty((len(u), n))
        x = 2.0 * np.asarray(u, dtype=float) - 1.0
        for m in range(n):
            c = np.zeros(n)
            c[m] = 1.0
            basis[:, m] = 0.5 * np.polynomial.legendre.legval(x, np.polynomial.legendre.legint(c, lbnd=-1))
        return basis @ inv

    def cumulative_at(self, values, points):
        """``int_{edges[0]}^{point} f`` for each point, from node values of ``f``."""
        values = np.asarray(values, dtype=float)
        points = np.asarray(points, dtype=float)
        n = self.order
        vp = values.reshape((self.n_panels, n) + values.shape[1:])
        _, gw = self._ref
        per_panel = np.tensordot(gw, vp, axes=([0], [1])) * self.widths.reshape((-1,) + (1,) * (values.ndim - 1))
        at_edges = np.concatenate([np.zeros((1,) + values.shape[1:]), np.cumsum(per_panel, axis=0)])
        j = np.clip(np.searchsorted(self.edges, points, side="right") - 1, 0, self.n_panels - 1)
        u = (points - self.edges[j]) / self.widths[j]
        mat = self._partial_matrix(u)
        inner = np.einsum("ij,ij...->i...", mat, vp[j])
        return at_edges[j] + self.widths[j].reshape((-1,) + (1,) * (values.ndim - 1)) * inner

    def cumulative(self, values):
        """Indefinite integral evaluated at this rule's own nodes."""
        values = np.asarray(values, dtype=float)
        n = self.order
        gx, gw = self._ref
        mat = self._partial_matrix(gx)
        vp = values.reshape((self.n_panels, n) + values.shape[1:])
        w = self.widths.reshape((-1,) + (1,) * (values.ndim - 1))
        per_panel = np.tensordot(gw, vp, axes=([0], [1])) * w
        start = np.concatenate([np.zeros((1,) + values.shape[1:]), np.cumsum(per_panel, axis=0)[:-1]])
        inner = np.einsum("ij,pj...->pi...", mat, vp) * w[:, None]
        return (start[:, None] + inner).reshape(values.shape)


def panel_rule(breaks, n_panels=8, order=6, grading=3.0, grade_left=True, floor=None, ratio=4.0, split=1):
    """:class:`PanelRule` over ``breaks``; the first interval is graded toward its left end.

    With ``floor`` the first interval ``(a, b)`` is instead cut geometrically
    at ``a + (b - a) ratio^-j`` down to ``floor``, ``split`` equal panels per
    cut, and only ``(a, a + floor)`` is graded.  This resolves integrands that vary on
    every scale between ``floor`` and ``b - a``.
    """
    breaks = np.asarray(breaks, dtype=float)
    if breaks.ndim != 1 or len(breaks) < 2 or np.any(np.diff(breaks) <= 0):
        raise ValueError("breakpoints must be strictly increasing")
    if ratio <= 1:
        raise ValueError("geometric ratio must exceed 1")
    edges = [breaks[:1]]
    for i, (a, b) in enumerate(zip(breaks[:-1], breaks[1:])):
        if i == 0 and floor is not None and 0 < floor < b - a:
            cuts = [b - a]
            while cuts[-1] / ratio > floor:
                cuts.append(cuts[-1] / ratio)
            inner = _panel_edges(a, a + cuts[-1], n_panels, grading, "left" if grade_left else None)
            edges.append(inner[1:])
            geo = a + np.array(cuts[::-1])
            for lo, hi in zip(geo[:-1], geo[1:]):
                edges.append(np.linspace(lo, hi, int(split) + 1)[1:])
            continue
        e = _panel_edges(a, b, n_panels, grading, "left" if (i == 0 and grade_left) else None)
        edges.append(e[1:])
    return PanelRule(np.concatenate(edges), int(order))
