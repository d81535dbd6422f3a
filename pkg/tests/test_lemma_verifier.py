import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wedge_lab.domain_geometry import WedgePoint, WeightParams
from wedge_lab.lemma_verifier import (
    BOUNDED,
    DIVERGING,
    INCONCLUSIVE,
    VerdictConfig,
    check_green_bound,
    check_lemma_a2s,
    check_lemma_At,
    check_lemma_b1a1s,
    check_lemma_b1b2s,
    check_lemma_combined,
    classify,
    lemma_At_integral,
    range_gate,
    stratified_grid,
)

PI = math.pi


# -- verdict logic ---------------------------------------------------------


def test_classify_rules():
    assert classify([1.0, 1.001]) == BOUNDED
    assert classify([1.0, 1.3, 1.7, 2.2]) == DIVERGING
    assert classify([1.0, 1.1]) == INCONCLUSIVE
    assert classify([1.0]) == INCONCLUSIVE
    assert classify([1.0, math.inf]) == DIVERGING
    with pytest.raises(ValueError):
        classify([])


def test_classify_thresholds_are_configurable():
    assert classify([1.0, 1.1], VerdictConfig(bounded_tol=0.2)) == BOUNDED
    assert classify([1.0, 1.1, 1.21], VerdictConfig(growth=0.05, growth_levels=2)) == DIVERGING


# -- range gate ------------------------------------------------------------


def test_range_gate_examples():
    assert range_gate(WeightParams(2, 2, 2), PI)
    assert not range_gate(WeightParams(2, 2, 4), PI)
    assert not range_gate(WeightParams(2, 2, 0.5), 1.5 * PI)
    assert range_gate(WeightParams(2, 2, 0.7), 1.5 * PI)


@given(p=st.floats(1.1, 6.0), Theta=st.floats(0.0, 8.0), theta=st.floats(-8.0, 12.0))
def test_range_gate_matches_inequalities(kappa0, p, Theta, theta):
    lim = PI / kappa0
    want = p * (1 - lim) < theta < p * (1 + lim) and 1 < Theta < p + 1
    assert range_gate(WeightParams(p, Theta, theta), kappa0) == want


def test_stratified_grid_covers_regimes(kappa0):
    x = stratified_grid(kappa0)
    r = np.ravel(x.r)
    assert r.min() <= 1e-3 * (1 + 1e-12) and r.max() >= 100 * (1 - 1e-12)
    frac = np.ravel(x.angle) / kappa0
    assert frac.min() < 0.01 and frac.max() > 0.99 and np.any(np.isclose(frac, 0.5))


# -- time integral ---------------------------------------------------------


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 3.7])
def test_lemma_At_closed_form(alpha):
    rep = check_lemma_At(alpha)
    exact = 2.0 / (alpha * (alpha + 1.0))
    assert rep.verdict == BOUNDED
    assert rep.extra["spread"] <= 1e-9
    assert all(v == pytest.approx(exact, abs=1e-6) for v in rep.extra["values"])
    assert rep.grid_max <= 2.0 / alpha


def test_lemma_At_examples():
    assert lemma_At_integral(1.0, 17.0) == pytest.approx(1.0, abs=1e-6)
    assert lemma_At_integral(0.5, 1.0) == pytest.approx(8.0 / 3.0, abs=1e-6)
    with pytest.raises(ValueError):
        check_lemma_At(0.0)


# -- weighted Gaussian integrals -------------------------------------------


def test_b1b2s_free_gaussian():
    rep = check_lemma_b1b2s(1.0, 0.0, 0.0, PI)
    assert rep.verdict == BOUNDED
    assert rep.grid_max <= PI * (1 + 1e-9)


def test_b1b2s_in_range_bounded():
    rep = check_lemma_b1b2s(1.0, -1.0, -0.5, PI)
    assert rep.verdict == BOUNDED
    assert len(rep.history) >= 2 and math.isfinite(rep.grid_max)


def test_b1b2s_out_of_range_diverges():
    assert check_lemma_b1b2s(1.0, 0.0, -1.2, PI).verdict == DIVERGING


def test_b1a1s_cases():
    flat = check_lemma_b1a1s(2, 1.0, 0.0, 0.0)
    assert flat.verdict == BOUNDED and flat.grid_max == pytest.approx(PI, rel=1e-9)
    assert check_lemma_b1a1s(2, 1.0, -2.0, 0.0).verdict == BOUNDED
    assert check_lemma_b1a1s(2, 1.0, 0.0, -2.5).verdict == DIVERGING


def test_b1a1s_one_dimensional():
    rep = check_lemma_b1a1s(1, 2.0, 0.0, 0.0)
    assert rep.grid_max == pytest.approx(math.sqrt(PI / 2.0), rel=1e-9)
    with pytest.raises(ValueError):
        check_lemma_b1a1s(3, 1.0, 0.0, 0.0)


def test_a2s_cases():
    assert check_lemma_a2s(1.0, 0.0, PI).grid_max <= PI * (1 + 1e-9)
    assert check_lemma_a2s(1.0, 3.0, 1.5 * PI).verdict == BOUNDED
    edge = WedgePoint(np.array([0.5, 1.0, 5.0]), np.array([1e-3, 1e-2, 1e-3]))
    assert check_lemma_a2s(1.0, -3.0, PI / 2, x_grid=edge).verdict == BOUNDED


def test_combined_trivial_and_scale_free():
    assert check_lemma_combined(1.0, 0, 0, 0, 0, PI).grid_max <= PI * (1 + 1e-9)
    rep = check_lemma_combined(1.0, -1.0, -0.5, 1.0, -1.0, PI)
    assert rep.verdict == BOUNDED
    assert rep.extra["scale_spread"] <= 0.05
    assert set(rep.extra["scaled"]) == {1e-2, 1.0, 1e2}


def test_combined_vertex_divergence():
    assert check_lemma_combined(1.0, -1.2, -1.0, 0, 0, PI).verdict == DIVERGING


def test_report_is_serialisable():
    rep = check_lemma_b1a1s(2, 1.0, 0.0, 0.0)
    d = rep.to_dict()
    assert d["verdict"] == BOUNDED and d["history"] == rep.history


# -- kernel bound ----------------------------------------------------------


@pytest.mark.parametrize("kappa0, lam", [(PI, 0.9), (1.5 * PI, 0.6)])
def test_green_bound_examples(kappa0, lam):
    rep = check_green_bound(kappa0, lam, lam, 1 / 8)
    assert rep.verdict == BOUNDED
    assert 0 < rep.grid_max < math.inf
    assert rep.extra["sigma_used"] is not None


def test_green_bound_rejects_endpoint():
    with pytest.raises(ValueError):
        check_green_bound(PI, 1.0, 0.5, 1 / 8)
    with pytest.raises(ValueError):
        check_green_bound(PI, 0.5, 0.5, 0.0)
