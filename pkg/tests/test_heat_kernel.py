import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from wedge_lab.domain_geometry import WedgePoint
from wedge_lab.heat_kernel import KernelAccuracyError, KernelConfig, WedgeHeatKernel, eval_images, free_kernel
from wedge_lab.quadrature import wedge_rule, wedge_sum

PI = math.pi


def sample(k0, n, seed, t_range=(0.05, 4.0), r_range=(0.05, 3.0)):
    rng = np.random.default_rng(seed)
    t = rng.uniform(*t_range, n)
    x = WedgePoint(rng.uniform(*r_range, n), rng.uniform(0.02, 0.98, n) * k0)
    y = WedgePoint(rng.uniform(*r_range, n), rng.uniform(0.02, 0.98, n) * k0)
    return t, x, y


def test_half_plane_value():
    x = WedgePoint(1.0, PI / 2)
    ref = (1 - math.exp(-1)) / (4 * PI)
    assert WedgeHeatKernel(PI).eval(1.0, x, x) == pytest.approx(ref, rel=1e-12)
    assert ref == pytest.approx(0.0503025, abs=1e-7)
    assert eval_images(1.0, x, x, PI) == pytest.approx(ref, rel=1e-14)


def test_quarter_plane_value():
    x = WedgePoint(1.0, PI / 4)
    ref = (1 - 2 * math.exp(-1) + math.exp(-2)) / (2 * PI)
    assert ref == pytest.approx(0.0635946, abs=1e-7)
    assert WedgeHeatKernel(PI / 2).eval(0.5, x, x) == pytest.approx(ref, rel=1e-12)
    assert eval_images(0.5, x, x, PI / 2) == pytest.approx(ref, rel=1e-14)


def test_images_vanish_on_axis():
    assert eval_images(1.0, WedgePoint(1.0, 1.0), WedgePoint(2.0, 0.0), PI) == pytest.approx(0.0, abs=1e-18)
    with pytest.raises(ValueError):
        eval_images(1.0, WedgePoint(1.0, 1.0), WedgePoint(1.0, 1.0), 1.5 * PI)


@pytest.mark.parametrize("k0", [PI, PI / 2])
def test_oracle_agreement(k0):
    t, x, y = sample(k0, 200, 7)
    g = WedgeHeatKernel(k0).eval(t, x, y)
    im = eval_images(t, x, y, k0)
    assert np.all(np.abs(g - im) <= np.maximum(1e-8, 1e-8 * im))


def test_dirichlet_limit(kappa0):
    G = WedgeHeatKernel(kappa0)
    x = WedgePoint(1.0, 0.5 * kappa0)
    vals = [G.eval(1.0, x, WedgePoint(1.0, e * kappa0)) for e in (1e-2, 1e-4, 1e-6)]
    assert vals[0] > vals[1] > vals[2] > 0
    assert vals[2] < 1e-5 * G.eval(1.0, x, x)


def test_domain_and_accuracy_errors():
    G = WedgeHeatKernel(PI)
    x = WedgePoint(1.0, 1.0)
    with pytest.raises(ValueError):
        G.eval(0.0, x, x)
    with pytest.raises(ValueError):
        KernelConfig(PI, tol=0.0)
    with pytest.raises(ValueError):
        KernelConfig(PI, max_terms=8)
    # z = 90 stays on the series path, which needs far more than 16 modes at nu = 1/2
    tight = WedgeHeatKernel(KernelConfig(2 * PI, tol=1e-14, max_terms=16))
    with pytest.raises(KernelAccuracyError) as info:
        tight.eval(0.05, WedgePoint(3.0, 2.0), WedgePoint(3.0, 2.0))
    assert info.value.achieved > 1e-14


def test_half_integer_orders_slit_plane():
    # closed forms: I_{n+1/2}(z) = sqrt(2z/pi) i_n(z) (modified spherical Bessel)
    k0 = 2 * PI
    t, x, y = sample(k0, 40, 3)
    G = WedgeHeatKernel(k0).eval(t, x, y)
    for i in range(40):
        z = x.r[i] * y.r[i] / (2 * t[i])
        total = 0.0
        for k in range(1, 400):
            nu = k / 2
            if k % 2:
                iv = math.sqrt(2 * z / PI) * special.spherical_in((k - 1) // 2, z)
            else:
                iv = special.iv(k // 2, z)
            term = iv * math.sin(nu * x.angle[i]) * math.sin(nu * y.angle[i])
            total += term
            if nu > z + 40 and abs(term) < 1e-30:
                break
        ref = math.exp(-(x.r[i] ** 2 + y.r[i] ** 2) / (4 * t[i])) / (k0 * t[i]) * total
        assert G[i] == pytest.approx(ref, rel=1e-8, abs=1e-14)


kappas = st.sampled_from([PI / 3, PI / 2, 0.8 * PI, PI, 1.5 * PI, 1.9 * PI, 2 * PI])


@given(k0=kappas, seed=st.integers(0, 10**6))
def test_symmetry_positivity(k0, seed):
    t, x, y = sample(k0, 16, seed, (0.01, 10.0), (0.01, 5.0))
    G = WedgeHeatKernel(k0)
    a, b = G.eval(t, x, y), G.eval(t, y, x)
    assert np.all(np.abs(a - b) <= 1e-14)
    d2 = x.r**2 + y.r**2 - 2 * x.r * y.r * np.cos(x.angle - y.angle)
    assert np.all(a >= 0)
    assert np.all(a <= free_kernel(t, d2) + 1e-14)


@given(k0=kappas, seed=st.integers(0, 10**6))
def test_strict_positivity(k0, seed):
    # exact zeros only where even the whole-plane kernel underflows
    t, x, y = sample(k0, 64, seed, (0.01, 10.0), (0.01, 5.0))
    g = WedgeHeatKernel(k0).eval(t, x, y)
    d2 = x.r**2 + y.r**2 - 2 * x.r * y.r * np.cos(x.angle - y.angle)
    assert np.all(g[d2 / (4 * t) < 600] > 0)


@pytest.mark.parametrize("k0", [0.7 * PI, 1.5 * PI, 2 * PI])
def test_relative_accuracy_under_cancellation(k0):
    # far-apart points at short times: the series terms cancel by many orders
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40
    G = WedgeHeatKernel(k0)
    nu = PI / k0
    for t, r, a, rho, b in [(0.08, 1.4, 0.2 * k0, 2.1, 0.8 * k0), (0.05, 1.0, 0.1 * k0, 1.5, 0.6 * k0)]:
        z = mp.mpf(r) * rho / (2 * t)
        s = mp.nsum(lambda k: mp.besseli(k * nu, z) * mp.sin(k * nu * a) * mp.sin(k * nu * b), [1, mp.inf])
        ref = float(mp.exp(-(mp.mpf(r) ** 2 + rho**2) / (4 * t)) * s / (k0 * t))
        assert G.eval(t, WedgePoint(r, a), WedgePoint(rho, b)) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("k0, point", [
    (PI / 2, (1.0, 0.0016, PI / 2 - 1.6e-3, 0.0227, PI / 2 - 1.6e-3)),  # vertex and edge: images cancel
    (0.7 * PI, (0.01, 2.26, 0.965 * 0.7 * PI, 1.36, 0.957 * 0.7 * PI)),  # large z near an edge
    (1.5 * PI, (0.005, 1.2, 2.0, 1.3, 2.3)),  # large z, interior
])
def test_relative_accuracy_small_values(k0, point):
    mp = pytest.importorskip("mpmath")
    t, r, a, rho, b = point
    z = mp.mpf(r) * rho / (2 * t)
    mp.mp.dps = 40 + int(float(z) / 2)
    nu = PI / k0
    s = mp.nsum(lambda k: mp.besseli(k * nu, z) * mp.sin(k * nu * a) * mp.sin(k * nu * b), [1, mp.inf])
    ref = float(mp.exp(-(mp.mpf(r) ** 2 + rho**2) / (4 * t)) * s / (k0 * t))
    assert ref > 0
    assert WedgeHeatKernel(k0).eval(t, WedgePoint(r, a), WedgePoint(rho, b)) == pytest.approx(ref, rel=1e-9)


@given(k0=kappas, seed=st.integers(0, 10**6), a=st.floats(0.05, 20.0))
def test_parabolic_scaling(k0, seed, a):
    t, x, y = sample(k0, 8, seed, (0.1, 2.0), (0.1, 2.0))
    G = WedgeHeatKernel(k0, tol=1e-16)
    base = G.eval(t, x, y)
    scaled = G.eval(a * t, x.scaled(math.sqrt(a)), y.scaled(math.sqrt(a)))
    keep = base > 1e-6
    assert np.allclose(scaled[keep], base[keep] / a, rtol=1e-10, atol=0)


def chapman_kolmogorov_error(k0, s, t, x, y, G):
    w = math.sqrt(2 * max(s, t))
    rule = wedge_rule(k0, centers=[(x.r, x.angle), (y.r, y.angle)], width=w, tail=9.0, n_panels=8, order=8)
    v = wedge_sum(lambda z: G.eval(s, x, z) * G.eval(t, z, y), rule, chunk=64)
    return abs(v - G.eval(s + t, x, y))


def test_chapman_kolmogorov(kappa0):
    rng = np.random.default_rng(11)
    G = WedgeHeatKernel(kappa0)
    for _ in range(2):
        s, t = rng.uniform(0.1, 1.5, 2)
        x = WedgePoint(rng.uniform(0.2, 2), rng.uniform(0.05, 0.95) * kappa0)
        y = WedgePoint(rng.uniform(0.2, 2), rng.uniform(0.05, 0.95) * kappa0)
        assert chapman_kolmogorov_error(kappa0, s, t, x, y, G) <= 1e-6


def test_survival_mass():
    G = WedgeHeatKernel(PI)
    assert G.survival_mass(1.0, WedgePoint(1.0, PI / 2)) == pytest.approx(math.erf(0.5), abs=1e-6)
    assert G.survival_mass(1e-4, WedgePoint(1.0, PI / 2)) == pytest.approx(1.0, abs=1e-6)
    near = G.survival_mass(1.0, WedgePoint(1.0, 1e-3))
    assert 0 < near < 1e-2


def test_survival_mass_quarter_plane():
    # product of two half-line survival probabilities
    G = WedgeHeatKernel(PI / 2)
    x = WedgePoint(math.hypot(0.7, 1.2), math.atan2(1.2, 0.7))
    ref = math.erf(0.7 / (2 * math.sqrt(0.8))) * math.erf(1.2 / (2 * math.sqrt(0.8)))
    assert G.survival_mass(0.8, x) == pytest.approx(ref, abs=1e-6)


def test_gradient_against_finite_differences():
    G = WedgeHeatKernel(0.7 * PI)
    x, y, t, h = WedgePoint(0.8, 0.9), WedgePoint(1.1, 1.3), 0.3, 1e-5
    _, dr, da = G.gradient(t, x, y)
    fr = (G.eval(t, WedgePoint(0.8 + h, 0.9), y) - G.eval(t, WedgePoint(0.8 - h, 0.9), y)) / (2 * h)
    fa = (G.eval(t, WedgePoint(0.8, 0.9 + h), y) - G.eval(t, WedgePoint(0.8, 0.9 - h), y)) / (2 * h * 0.8)
    assert float(dr) == pytest.approx(fr, abs=1e-6)
    assert float(da) == pytest.approx(fa, abs=1e-6)


def test_bound_ratio():
    G = WedgeHeatKernel(PI)
    x = WedgePoint(1.0, 1.0)
    r = G.bound_ratio(0.5, x, x, 0.9, 0.9, 0.125)
    assert np.isfinite(r) and r > 0
    with pytest.raises(ValueError):
        G.bound_ratio(0.5, x, x, 1.0, 0.9, 0.125)
    with pytest.raises(ValueError):
        G.bound_ratio(0.5, x, x, 0.9, 0.0, 0.125)
    y = WedgePoint(1.0, PI / 2)
    vals = [G.bound_ratio(1.0, WedgePoint(r, PI / 2), y, 0.9, 0.9, 0.125) for r in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert max(vals) < 10 * vals[0]
    masked = G.bound_ratio(1.0, WedgePoint(1e-8, 1e-8), y, 0.9, 0.9, 0.125, min_value=1e-3)
    assert math.isnan(masked)


def test_pickle_roundtrip():
    import pickle

    G = WedgeHeatKernel(KernelConfig(1.2, 1e-13, 4096))
    H = pickle.loads(pickle.dumps(G))
    x = WedgePoint(1.0, 0.5)
    assert H.eval(1.0, x, x) == G.eval(1.0, x, x)
