import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wedge_lab.domain_geometry import (
    Wedge,
    WedgePoint,
    WeightParams,
    boundary_distance,
    dist_to_boundary,
    dist_to_vertex,
    j_factor,
    mixed_weight,
    r_factor,
)

PI = math.pi


def test_dist_to_vertex():
    k0 = 1.3
    assert dist_to_vertex(WedgePoint(2.0, k0 / 2)) == 2.0
    assert dist_to_vertex(WedgePoint(1.0, 0.4)) == 1.0
    assert dist_to_vertex(WedgePoint(0.125, 1.0)) == 0.125


@pytest.mark.parametrize(
    "k0, r, a, expected",
    [(PI, 1.0, PI / 2, 1.0), (1.5 * PI, 2.0, 0.75 * PI, 2.0), (PI / 2, 1.0, PI / 6, 0.5)],
)
def test_dist_to_boundary(k0, r, a, expected):
    assert dist_to_boundary(WedgePoint(r, a), k0) == pytest.approx(expected, rel=1e-14)


def test_factors():
    assert r_factor(WedgePoint(1.0, 1.0), 1.0) == pytest.approx(0.5)
    assert r_factor(WedgePoint(3.0, 1.0), 4.0) == pytest.approx(0.6)
    assert j_factor(WedgePoint(1.0, PI / 2), 1.0, PI) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        r_factor(WedgePoint(1.0, 1.0), 0.0)
    with pytest.raises(ValueError):
        j_factor(WedgePoint(1.0, 1.0), -1.0, PI)


def test_mixed_weight_examples():
    x = WedgePoint(0.7, 0.3)
    assert mixed_weight(x, WeightParams(2, 2, 2), PI) == pytest.approx(1.0)
    assert mixed_weight(WedgePoint(2.0, PI / 2), WeightParams(2, 2, 4), PI) == pytest.approx(4.0)
    assert mixed_weight(WedgePoint(1.0, PI / 6), WeightParams(2, 3, 2), PI) == pytest.approx(0.5)


def test_cartesian_cache():
    x = WedgePoint(2.0, 0.3)
    assert x.x1 == pytest.approx(2 * math.cos(0.3), abs=1e-15)
    assert x.x2 == pytest.approx(2 * math.sin(0.3), abs=1e-15)


def test_weight_params():
    w = WeightParams(3.0, 2.0, 2.0)
    assert w.p_dual == pytest.approx(1.5)
    assert WeightParams(2, 2, 2).in_range(PI)
    assert not WeightParams(2, 2, 4).in_range(PI)
    assert not WeightParams(2, 2, 0.5).in_range(1.5 * PI)
    assert WeightParams(2, 2, 0.7).in_range(1.5 * PI)
    assert not WeightParams(2, 3, 2).in_range(PI)
    with pytest.raises(ValueError):
        WeightParams(1.0, 2, 2)


def test_wedge_subdomains_reflex():
    w = Wedge(1.5 * PI)
    assert w.subdomain(WedgePoint(1.0, 0.75 * PI)) != w.subdomain(WedgePoint(1.0, 0.1))


def test_slit_plane_edges_distinct():
    # both edge rays of the slit plane are kept apart
    k0 = 2 * PI
    assert dist_to_boundary(WedgePoint(1.0, 0.1), k0) == pytest.approx(math.sin(0.1))
    assert dist_to_boundary(WedgePoint(1.0, k0 - 0.1), k0) == pytest.approx(math.sin(0.1))
    assert dist_to_boundary(WedgePoint(1.0, PI), k0) == pytest.approx(1.0)


kappas = st.floats(0.05, 2 * PI)
fracs = st.floats(1e-4, 1 - 1e-4)
radii = st.floats(1e-4, 1e4)


@given(k0=kappas, f=fracs, r=radii, a=st.floats(1e-3, 1e3))
def test_dilation(k0, f, r, a):
    x = WedgePoint(r, f * k0)
    d, da = dist_to_boundary(x, k0), dist_to_boundary(x.scaled(a), k0)
    assert da == pytest.approx(a * d, rel=1e-12)
    assert dist_to_vertex(x.scaled(a)) == pytest.approx(a * r, rel=1e-12)
    assert da / (a * r) == pytest.approx(d / r, rel=1e-12)


@given(k0=kappas, f=fracs, r=radii, c=st.floats(1e-6, 1e6))
def test_j_le_r(k0, f, r, c):
    x = WedgePoint(r, f * k0)
    j, rr = j_factor(x, c, k0), r_factor(x, c)
    assert 0 < j <= rr < 1
    assert dist_to_boundary(x, k0) <= dist_to_vertex(x) * (1 + 1e-15)


def test_boundary_distance_vectorised():
    r = np.array([1.0, 2.0])
    a = np.array([0.1, 1.0])
    assert boundary_distance(r, a, PI).shape == (2,)
