"""Ratio tables for the weighted space-time ``L_p`` estimates and related probes.

For a test field ``g`` the stochastic table records

    ||u_S||_{L_p((0,T); L_{p, Theta-p, theta-p})} / ||g||_{L_p((0,T); L_{p, Theta, theta}(l2))}

and the deterministic table

    ||u_D||_{L_p((0,T); L_{p, Theta-p, theta-p})} / ||f||_{L_p((0,T); L_{p, Theta+p, theta+p})}.

A table passes when its maximum over fields varies by at most 10% (relative
to the median) across the horizons ``T``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .convolution import ConvolutionRules, SpaceTimeSolution, stoch_variance
from .fields import (
    SeparableField,
    StepProfile,
    TestField,
    bump_profile,
    power_profile,
    radial_bump_family,
    semigroup_family,
    vertex_power_family,
)
from .domain_geometry import WedgePoint, WeightParams, boundary_distance
from .lemma_verifier import range_gate
from .weighted_norms import space_time_lp_norm

__all__ = [
    "RatioRow",
    "RatioTable",
    "default_families",
    "verify_stochastic_estimate",
    "verify_deterministic_estimate",
    "SharpnessReport",
    "sharpness_probe",
    "RegularityFit",
    "regularity_probe",
    "AprioriRecord",
    "verify_apriori_p2",
]

T_STABILITY = 0.10


@dataclass(frozen=True)
class RatioRow:
    T: float
    field_id: str
    family: str
    numerator: float
    denominator: float

    @property
    def ratio(self):
        return self.numerator / self.denominator


@dataclass
class RatioTable:
    """Rows of ``(T, field, numerator, denominator, ratio)`` sorted by ``T`` then field id."""

    kind: str
    rows: list
    meta: dict
    tolerance: float = T_STABILITY
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for row in self.rows:
            if not row.denominator > 0:
                raise ValueError(f"zero denominator for {row.field_id} at T={row.T}")
        self.rows = sorted(self.rows, key=lambda r: (r.T, r.field_id))

    @property
    def horizons(self):
        return sorted({r.T for r in self.rows})

    def max_by_T(self):
        return {T: max(r.ratio for r in self.rows if r.T == T) for T in self.horizons}

    def max_by_family(self):
        out = {}
        for r in self.rows:
            out[r.family] = max(out.get(r.family, 0.0), r.ratio)
        return out

    @property
    def variation(self):
        """Largest relative deviation of the per-``T`` maxima from their median."""
        m = np.array(list(self.max_by_T().values()))
        med = float(np.median(m))
        return float(np.max(np.abs(m - med)) / med)

    @property
    def finite(self):
        return all(math.isfinite(r.ratio) for r in self.rows)

    @property
    def passed(self):
        return self.finite and self.variation <= self.tolerance

    @property
    def verdict(self):
        return "pass" if self.passed else "fail"

    def as_records(self):
        return [{"T": r.T, "field": r.field_id, "family": r.family, "numerator": r.numerator,
                 "denominator": r.denominator, "ratio": r.ratio} for r in self.rows]


def default_families(kappa0, scales=(1 / 16, 1 / 8, 1 / 4), edge_fraction=0.15):
    """The three test families used for the ratio tables.

    * semigroup modes centred close to an edge (boundary layer);
    * smooth radial bumps with the first angular eigenfunction (interior);
    * power profiles concentrating toward the vertex.

    Ratios of a fixed field increase with ``T/l^2`` and level off, so the
    scales are small compared with the horizons of interest.
    """
    return (semigroup_family(kappa0, scales, angle_frac=edge_fraction)
            + radial_bump_family(kappa0, scales, angular=1)
            + vertex_power_family(kappa0, scales))


def _check_inputs(params, kappa0, fields, T_grid, what):
    if not isinstance(params, WeightParams):
        raise TypeError("params must be WeightParams")
    if not range_gate(params, kappa0):
        raise ValueError(f"parameters {params} are outside the admissible range for kappa0={kappa0:.6g}; "
                         "use sharpness_probe to explore them")
    if not fields:
        raise ValueError(f"need at least one {what}")
    Ts = sorted(float(T) for T in T_grid)
    if not Ts or Ts[0] <= 0:
        raise ValueError("horizons must be positive")
    for g in fields:
        if not isinstance(g, TestField):
            raise TypeError("fields must be TestField instances")
    return Ts


def _rows(kind, params, kappa0, fields, Ts, rules, executor):
    jobs = [(kind, params, kappa0, g, Ts, rules) for g in fields]
    mapper = executor.map if executor is not None else map
    rows = []
    for res in mapper(_field_rows, jobs):
        rows.extend(res)
    return rows


def _field_rows(job):
    kind, params, kappa0, g, Ts, rules = job
    p = params.p
    sol = SpaceTimeSolution(g, kappa0, max(Ts), rules, Ts)
    lhs = params.shifted(-p)
    rhs = params if kind == "stoch" else params.shifted(p)
    out = []
    for T in Ts:
        if kind == "stoch":
            num = sol.stoch_norm_p(p, lhs.Theta, lhs.theta, T) ** (1.0 / p)
        else:
            num = sol.det_norm_p(p, lhs.Theta, lhs.theta, T) ** (1.0 / p)
        den = space_time_lp_norm(g, rhs, T, kappa0)
        out.append(RatioRow(T, g.name, g.family, num, den))
    return out


def verify_stochastic_estimate(params, kappa0, fields=None, T_grid=(0.25, 1.0, 4.0), rules=None, executor=None):
    """Ratio table of the stochastic convolution against its forcing.

    Parameters
    ----------
    params : WeightParams
        ``(p, Theta, theta)`` of the forcing norm; the solution norm uses the
        exponents shifted by ``-p``.  Must pass :func:`range_gate`.
    fields : list of TestField, optional
        Deterministic forcings; :func:`default_families` if omitted.
    executor : concurrent.futures.Executor, optional
        Runs the fields in parallel; rows are assembled in a fixed order.
    """
    fields = fields if fields is not None else default_families(kappa0)
    Ts = _check_inputs(params, kappa0, fields, T_grid, "field")
    if params.p < 2:
        raise ValueError("the stochastic estimate needs p >= 2")
    for g in fields:
        if not g.deterministic:
            raise ValueError("random forcings are not supported")
    rows = _rows("stoch", params, kappa0, fields, Ts, rules, executor)
    table = RatioTable("stochastic", rows, _meta(params, kappa0))
    table.extra["family_max"] = table.max_by_family()
    return table


def verify_deterministic_estimate(params, kappa0, forcings=None, T_grid=(0.25, 1.0, 4.0), rules=None,
                                  executor=None):
    """Ratio table of the deterministic convolution; the forcing norm has exponents shifted by ``+p``."""
    forcings = forcings if forcings is not None else default_families(kappa0)
    Ts = _check_inputs(params, kappa0, forcings, T_grid, "forcing")
    rows = _rows("det", params, kappa0, forcings, Ts, rules, executor)
    table = RatioTable("deterministic", rows, _meta(params, kappa0))
    table.extra["family_max"] = table.max_by_family()
    return table


def _meta(params, kappa0):
    return {"p": params.p, "Theta": params.Theta, "theta": params.theta, "kappa0": float(kappa0)}


# -- probes ----------------------------------------------------------------


@dataclass
class SharpnessReport:
    """Ratios along a family concentrating at the vertex (exploratory, no verdict)."""

    eps: list
    ratios: list
    growth: float
    monotone: bool
    in_range: bool
    meta: dict


def sharpness_probe(params, kappa0, delta=0.5, eps_grid=(1e-1, 3e-2, 1e-2, 3e-3, 1e-3), T=1.0, kind="stoch",
                    rules=None):
    """Stochastic (or deterministic) ratios for ``g_eps = |y|^-delta 1[eps <= |y| <= 1] sin(pi angle/kappa0)``.

    Reports the growth factor ``ratio(eps_min) / ratio(eps_max)``; no pass
    or fail is attached.  The parameters need not be admissible.
    """
    if kind not in ("stoch", "det"):
        raise ValueError("kind must be 'stoch' or 'det'")
    if kind == "stoch" and params.p < 2:
        raise ValueError("the stochastic ratio needs p >= 2")
    eps = sorted((float(e) for e in eps_grid), reverse=True)
    ratios = []
    for e in eps:
        b = SeparableField(kappa0, power_profile(delta, e, 1.0), 1)
        g = TestField.single(b, name=f"power[eps={e:g}]", family="sharpness")
        ratios.append(_field_rows((kind, params, kappa0, g, [float(T)], rules))[0].ratio)
    growth = ratios[-1] / ratios[0]
    mono = all(b >= a * (1 - 1e-9) for a, b in zip(ratios[:-1], ratios[1:]))
    meta = _meta(params, kappa0) | {"delta": delta, "T": float(T), "kind": kind}
    return SharpnessReport(eps, ratios, growth, mono, range_gate(params, kappa0), meta)


@dataclass
class RegularityFit:
    """Least-squares slope of ``log sigma`` against ``log r`` along a ray."""

    slope: float
    expected: float
    r: list
    sigma: list
    residual: float

    @property
    def error(self):
        return abs(self.slope - self.expected)


def regularity_probe(kappa0, g=None, t=1.0, angle=None, r_grid=None, rules=None):
    """Vertex exponent of the standard deviation of the stochastic convolution.

    ``g`` must vanish near the vertex.  The default forcing is a bump on
    ``[1, 2]`` in the first angular mode and the default ray the bisector;
    ``r_grid`` defaults to 8 radii in ``[1e-3, 3e-2]``.
    """
    g = g or TestField.single(SeparableField(kappa0, bump_profile(1.5, 0.5), 1), name="bump[1,2]")
    if angle is None:
        angle = 0.5 * kappa0
    r = np.asarray(r_grid if r_grid is not None else np.geomspace(1e-3, 3e-2, 8), dtype=float)
    inner = min((b.support[0] for b in g.spatial if b.support is not None), default=None)
    if inner is None or inner <= 0:
        raise ValueError("forcing must vanish near the vertex (declared support with positive inner radius)")
    if not r.max() < inner:
        raise ValueError("probe radii must lie inside the forcing's inner radius")
    s2 = np.ravel(stoch_variance(g, t, WedgePoint(r, float(angle)), rules))
    ok = np.isfinite(s2) & (s2 > 0)
    if ok.sum() < 4:
        raise ValueError("fewer than 4 usable points for the fit")
    lr, ls = np.log(r[ok]), 0.5 * np.log(s2[ok])
    A = np.vstack([lr, np.ones_like(lr)]).T
    coef, res, *_ = np.linalg.lstsq(A, ls, rcond=None)
    resid = float(np.sqrt(res[0] / ok.sum())) if res.size else 0.0
    return RegularityFit(float(coef[0]), math.pi / kappa0, r[ok].tolist(), np.sqrt(s2[ok]).tolist(), resid)


# -- a-priori estimate at p = 2 --------------------------------------------


@dataclass
class AprioriRecord:
    """Both sides of the ``p = 2`` a-priori estimate and their ratio."""

    T: float
    lhs: float
    rhs: float
    parts: dict

    @property
    def ratio(self):
        return self.lhs / self.rhs


def _h1_part(sol, params, T, kind):
    """``int_0^T int (|u|^2 + rho^2 |grad u|^2) w_{Theta-2, theta-2}`` (expectations for ``kind='stoch'``)."""
    lhs = params.shifted(-2.0)
    tn, tw, grad2 = sol.gradient_terms(T, kind)
    val2 = sol.sigma2(T) if kind == "stoch" else sol.first_moment(T) ** 2
    r = sol.space.radial.nodes[:, None]
    a = sol.space.angular.nodes[None, :]
    rho2 = boundary_distance(r, a, sol.kappa0) ** 2
    total = val2 + rho2[None] * grad2
    return float(np.dot(tw, sol._space_integral(total, lhs.Theta, lhs.theta)))


def verify_apriori_p2(kappa0, f=None, g=None, T=1.0, params=WeightParams(2.0, 2.0, 2.0), rules=None):
    """Ratio of the solution norm to the data norm for ``u = u_D(f) + u_S(g)`` at ``p = 2``.

    Left side: ``||u||_{H^1_{2,Theta-2,theta-2}}^2 + ||g||_{L_{2,Theta,theta}}^2``
    with derivatives from the differentiated kernel series.  Right side:
    ``||f||_{L_{2,Theta+2,theta+2}}^2 + ||g||_{L_{2,Theta,theta}}^2``.
    The cross term of the two parts vanishes in expectation, so each part
    is computed on its own discretisation.  ``T`` may be a sequence.
    """
    if params.p != 2:
        raise ValueError("the a-priori check is implemented for p = 2")
    if not range_gate(params, kappa0):
        raise ValueError("parameters outside the admissible range")
    if f is None and g is None:
        raise ValueError("need a forcing f or a noise coefficient g")
    Ts = [float(t) for t in np.atleast_1d(T)]
    rules = rules or ConvolutionRules()
    sol_f = SpaceTimeSolution(f, kappa0, max(Ts), rules, Ts, grad=True) if f is not None else None
    sol_g = SpaceTimeSolution(g, kappa0, max(Ts), rules, Ts, grad=True) if g is not None else None
    out = []
    for t in Ts:
        parts = {"u_det": 0.0, "u_stoch": 0.0, "f": 0.0, "g": 0.0}
        if sol_f is not None:
            parts["u_det"] = _h1_part(sol_f, params, t, "det")
            parts["f"] = space_time_lp_norm(f, params.shifted(2.0), t, kappa0) ** 2
        if sol_g is not None:
            parts["u_stoch"] = _h1_part(sol_g, params, t, "stoch")
            parts["g"] = space_time_lp_norm(g, params, t, kappa0) ** 2
        lhs = math.sqrt(parts["u_det"] + parts["u_stoch"] + parts["g"])
        rhs = math.sqrt(parts["f"] + parts["g"])
        out.append(AprioriRecord(t, lhs, rhs, parts))
    return out if np.ndim(T) else out[0]


__all__ += ["StepProfile"]
