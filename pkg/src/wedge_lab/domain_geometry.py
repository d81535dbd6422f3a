"""The angular domain, its distance functions and the mixed weight.

Points are carried in polar form ``(r, angle)``; every field may be a numpy
array so that one :class:`WedgePoint` can describe a whole batch of
quadrature nodes.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "Wedge",
    "WedgePoint",
    "WeightParams",
    "boundary_distance",
    "dist_to_vertex",
    "dist_to_boundary",
    "r_factor",
    "j_factor",
    "mixed_weight",
    "weight_density",
]


@dataclass(frozen=True)
class WedgePoint:
    """A point (or batch of points) of the wedge in polar form."""

    r: object
    angle: object

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        if np.any(~np.isfinite(r)) or np.any(r <= 0):
            raise ValueError("wedge points need a finite radius r > 0")

    @cached_property
    def x1(self):
        return self.r * np.cos(self.angle)

    @cached_property
    def x2(self):
        return self.r * np.sin(self.angle)

    def scaled(self, a):
        """The dilated point ``a * x``."""
        return WedgePoint(a * np.asarray(self.r), self.angle)


class Wedge:
    """Open wedge ``{(r cos t, r sin t): r > 0, 0 < t < kappa0}``.

    ``kappa0`` may be any angle in ``(0, 2*pi]``; ``2*pi`` is the slit plane,
    whose two edge rays are treated as distinct boundary pieces.
    """

    def __init__(self, kappa0):
        kappa0 = float(kappa0)
        if not (0.0 < kappa0 <= 2.0 * math.pi + 1e-15):
            raise ValueError(f"opening angle must lie in (0, 2*pi], got {kappa0}")
        self.kappa0 = min(kappa0, 2.0 * math.pi)

    def __repr__(self):
        return f"Wedge(kappa0={self.kappa0!r})"

    @property
    def vertex_exponent(self):
        return math.pi / self.kappa0

    @property
    def edge_sector(self):
        """Half-width ``min(pi/2, kappa0/2)`` of the two edge sectors."""
        return min(0.5 * math.pi, 0.5 * self.kappa0)

    def point(self, r, angle):
        """Validated :class:`WedgePoint`; rejects boundary and exterior points."""
        a = np.asarray(angle, dtype=float)
        if np.any(~np.isfinite(a)) or np.any(a <= 0) or np.any(a >= self.kappa0):
            raise ValueError("angle must lie strictly inside (0, kappa0)")
        return WedgePoint(r, angle)

    def from_cartesian(self, x1, x2):
        r = np.hypot(x1, x2)
        angle = np.mod(np.arctan2(x2, x1), 2.0 * math.pi)
        return self.point(r, angle)

    def bisector(self, r):
        return self.point(r, 0.5 * self.kappa0 * np.ones_like(np.asarray(r, dtype=float)))

    def subdomain(self, x):
        """Index 1, 2 or 3 of the edge/middle/edge sector containing ``x``."""
        h = self.edge_sector
        a = np.asarray(x.angle)
        return np.where(a < h, 1, np.where(a <= self.kappa0 - h, 2, 3))

    def contains(self, x1, x2):
        angle = np.mod(np.arctan2(x2, x1), 2.0 * math.pi)
        return (np.hypot(x1, x2) > 0) & (angle > 0) & (angle < self.kappa0)


def boundary_distance(r, angle, kappa0):
    """Array form of :func:`dist_to_boundary`."""
    r = np.asarray(r, dtype=float)
    angle = np.asarray(angle, dtype=float)
    half = 0.5 * math.pi

    def to_ray(phi):
        return np.where(phi <= half, r * np.sin(np.minimum(phi, half)), r)

    return np.minimum(to_ray(angle), to_ray(kappa0 - angle))


def dist_to_vertex(x):
    """Distance ``|x|`` to the vertex."""
    return np.asarray(x.r, dtype=float) if np.ndim(x.r) else float(x.r)


def dist_to_boundary(x, kappa0):
    """Distance from ``x`` to the two edge rays of the wedge."""
    d = boundary_distance(x.r, x.angle, kappa0)
    return d if np.ndim(d) else float(d)


def _check_c(c):
    if np.any(np.asarray(c) <= 0):
        raise ValueError("scale parameter c must be positive")


def r_factor(x, c):
    """``|x| / (sqrt(c) + |x|)``."""
    _check_c(c)
    r = np.asarray(x.r, dtype=float)
    out = r / (np.sqrt(c) + r)
    return out if np.ndim(out) else float(out)


def j_factor(x, c, kappa0):
    """``rho(x) / (sqrt(c) + rho(x))`` with ``rho`` the boundary distance."""
    _check_c(c)
    d = boundary_distance(x.r, x.angle, kappa0)
    out = d / (np.sqrt(c) + d)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class WeightParams:
    """Integrability exponent ``p`` with boundary and vertex weights.

    ``Theta`` controls the behaviour at the edges, ``theta`` at the vertex.
    """

    p: float
    Theta: float
    theta: float

    def __post_init__(self):
        if not (self.p > 1 and math.isfinite(self.p)):
            raise ValueError("p must be a finite number > 1")
        if not (math.isfinite(self.Theta) and math.isfinite(self.theta)):
            raise ValueError("weight exponents must be finite")

    @property
    def p_dual(self):
        return self.p / (self.p - 1.0)

    def theta_range(self, kappa0):
        lam = math.pi / kappa0
        return self.p * (1.0 - lam), self.p * (1.0 + lam)

    def vertex_ok(self, kappa0):
        lo, hi = self.theta_range(kappa0)
        return lo < self.theta < hi

    def boundary_ok(self):
        return 1.0 < self.Theta < self.p + 1.0

    def in_range(self, kappa0):
        """Admissibility for the stochastic and deterministic estimates."""
        return self.vertex_ok(kappa0) and self.boundary_ok()

    def shifted(self, delta):
        """Parameters with both weight exponents shifted by ``delta``."""
        return WeightParams(self.p, self.Theta + delta, self.theta + delta)


def weight_density(r, angle, kappa0, Theta, theta):
    """``r^(theta-2) * (rho/r)^(Theta-2)`` on arrays of polar coordinates."""
    r = np.asarray(r, dtype=float)
    ratio = boundary_distance(r, angle, kappa0) / r
    return r ** (theta - 2.0) * ratio ** (Theta - 2.0)


def mixed_weight(x, params, kappa0):
    """The mixed vertex/boundary weight of ``params`` evaluated at ``x``."""
    out = weight_density(x.r, x.angle, kappa0, params.Theta, params.theta)
    return out if np.ndim(out) else float(out)
