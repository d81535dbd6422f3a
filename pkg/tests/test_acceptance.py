"""Acceptance criteria 1-12.

Each test carries a ``criterion`` marker; the conftest prints one PASS/FAIL
line per criterion in the terminal summary, with the measured quantities.
"""

import math
import time

import numpy as np
import pytest

from wedge_lab.cli import main
from wedge_lab.convolution import mc_sample, stoch_variance
from wedge_lab.domain_geometry import WedgePoint, WeightParams
from wedge_lab.fields import ScalarField, SeparableField, TestField, bump_profile
from wedge_lab.heat_kernel import WedgeHeatKernel, eval_images
from wedge_lab.lemma_verifier import (
    BOUNDED,
    DIVERGING,
    check_green_bound,
    check_lemma_a2s,
    check_lemma_At,
    check_lemma_b1a1s,
    check_lemma_b1b2s,
    check_lemma_combined,
)
from wedge_lab.quadrature import wedge_rule, wedge_sum
from wedge_lab.theorem_verifier import (
    default_families,
    regularity_probe,
    verify_deterministic_estimate,
    verify_stochastic_estimate,
)
from wedge_lab.weighted_norms import dyadic_equivalence_check, dyadic_sum

PI = math.pi
P2 = WeightParams(2.0, 2.0, 2.0)


def g(v):
    return f"{v:.3g}"


@pytest.mark.criterion(1, "series kernel matches the image kernel")
def test_kernel_oracle(record_property):
    start = time.perf_counter()
    worst = {}
    rng = np.random.default_rng(2024)
    for k0 in (PI, PI / 2):
        t = rng.uniform(0.05, 4.0, 200)
        x = WedgePoint(rng.uniform(0.05, 3.0, 200), rng.uniform(0.02, 0.98, 200) * k0)
        y = WedgePoint(rng.uniform(0.05, 3.0, 200), rng.uniform(0.02, 0.98, 200) * k0)
        ref = eval_images(t, x, y, k0)
        worst[k0] = float(np.max(np.abs(WedgeHeatKernel(k0).eval(t, x, y) - ref) / ref))
    elapsed = time.perf_counter() - start
    record_property("max_rel", g(max(worst.values())))
    record_property("seconds", g(elapsed))
    assert max(worst.values()) <= 1e-8
    assert elapsed < 10


@pytest.mark.criterion(2, "Chapman-Kolmogorov identity")
def test_chapman_kolmogorov(record_property):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    errs = []
    for k0 in (PI / 2, PI, 1.5 * PI, 2 * PI):
        G = WedgeHeatKernel(k0)
        for _ in range(5):
            s, t = rng.uniform(0.1, 1.5, 2)
            x = WedgePoint(rng.uniform(0.2, 2.0), rng.uniform(0.05, 0.95) * k0)
            y = WedgePoint(rng.uniform(0.2, 2.0), rng.uniform(0.05, 0.95) * k0)
            rule = wedge_rule(k0, centers=[(x.r, x.angle), (y.r, y.angle)], width=math.sqrt(2 * max(s, t)),
                              tail=9.0, n_panels=8, order=8)
            v = wedge_sum(lambda z: G.eval(s, x, z) * G.eval(t, z, y), rule, chunk=64)
            errs.append(abs(v - G.eval(s + t, x, y)))
    elapsed = time.perf_counter() - start
    record_property("configs", len(errs))
    record_property("max_abs", g(max(errs)))
    record_property("seconds", g(elapsed))
    assert len(errs) == 20 and max(errs) <= 1e-6
    assert elapsed < 120


@pytest.mark.criterion(3, "survival mass in the half plane")
def test_survival_mass(record_property):
    mass = WedgeHeatKernel(PI).survival_mass(1.0, WedgePoint(1.0, PI / 2))
    record_property("mass", f"{mass:.9f}")
    assert abs(mass - 0.5204999) <= 1e-6
    assert mass == pytest.approx(math.erf(0.5), abs=1e-6)


@pytest.mark.criterion(4, "time integral closed form")
def test_time_integral(record_property):
    start = time.perf_counter()
    spreads = []
    for alpha in (0.5, 1.0, 2.0):
        rep = check_lemma_At(alpha, A_grid=(1e-3, 1.0, 1e3))
        vals = rep.extra["values"]
        exact = 2.0 / (alpha * (alpha + 1.0))
        assert all(abs(v - exact) <= 1e-6 for v in vals)
        assert max(vals) <= 2.0 / alpha
        spreads.append(max(vals) - min(vals))
    elapsed = time.perf_counter() - start
    record_property("max_spread", g(max(spreads)))
    record_property("seconds", g(elapsed))
    assert max(spreads) <= 1e-9
    assert elapsed < 1


IN_RANGE = [
    ("b1b2s trivial", lambda: check_lemma_b1b2s(1.0, 0.0, 0.0, PI)),
    ("b1b2s", lambda: check_lemma_b1b2s(1.0, -1.0, -0.5, PI)),
    ("b1a1s trivial", lambda: check_lemma_b1a1s(2, 1.0, 0.0, 0.0)),
    ("b1a1s alpha=-2", lambda: check_lemma_b1a1s(2, 1.0, -2.0, 0.0)),
    ("a2s trivial", lambda: check_lemma_a2s(1.0, 0.0, PI)),
    ("a2s alpha=3", lambda: check_lemma_a2s(1.0, 3.0, 1.5 * PI)),
    ("a2s alpha=-3 edge", lambda: check_lemma_a2s(
        1.0, -3.0, PI / 2, x_grid=WedgePoint(np.array([0.5, 1.0, 5.0]), np.array([1e-3, 1e-2, 1e-3])))),
    ("combined trivial", lambda: check_lemma_combined(1.0, 0, 0, 0, 0, PI)),
    ("combined", lambda: check_lemma_combined(1.0, -1.0, -0.5, 1.0, -1.0, PI)),
]
OUT_OF_RANGE = [
    ("b1b2s beta2=-1.2", lambda: check_lemma_b1b2s(1.0, 0.0, -1.2, PI)),
    ("b1a1s beta=-2.5", lambda: check_lemma_b1a1s(2, 1.0, 0.0, -2.5)),
    ("combined beta1+beta2=-2.2", lambda: check_lemma_combined(1.0, -1.2, -1.0, 0, 0, PI)),
]


@pytest.mark.criterion(5, "weighted Gaussian lemma verdicts")
def test_lemma_verdicts(record_property):
    start = time.perf_counter()
    wrong = []
    for name, run in IN_RANGE:
        rep = run()
        if rep.verdict != BOUNDED:
            wrong.append(f"{name}:{rep.verdict}")
    for name, run in OUT_OF_RANGE:
        rep = run()
        if rep.verdict != DIVERGING:
            wrong.append(f"{name}:{rep.verdict}")
    elapsed = time.perf_counter() - start
    record_property("sets", len(IN_RANGE) + len(OUT_OF_RANGE))
    record_property("wrong", ",".join(wrong) or "none")
    record_property("seconds", g(elapsed))
    assert not wrong
    assert elapsed < 600


@pytest.mark.criterion(6, "scale invariance of the combined estimate")
def test_combined_scale_invariance(record_property):
    rep = check_lemma_combined(1.0, -1.0, -0.5, 1.0, -1.0, PI, scales=(1e-2, 1.0, 1e2))
    record_property("spread", g(rep.extra["scale_spread"]))
    assert set(rep.extra["scaled"]) == {1e-2, 1.0, 1e2}
    assert rep.extra["scale_spread"] <= 0.05


@pytest.mark.criterion(7, "empirical constant of the kernel bound")
def test_green_bound(record_property):
    start = time.perf_counter()
    found = {}
    for k0 in (PI / 2, PI, 1.5 * PI):
        lam = 0.9 * PI / k0
        rep = check_green_bound(k0, lam, lam, 1 / 8)
        assert rep.verdict == BOUNDED and rep.extra["sigma_used"] is not None
        h = rep.history
        assert abs(h[-1] - h[-2]) <= 0.02 * abs(h[-2])
        found[k0] = (rep.extra["sigma_used"], rep.grid_max)
    elapsed = time.perf_counter() - start
    record_property("C", ",".join(g(c) for _, c in found.values()))
    record_property("sigma", ",".join(g(s) for s, _ in found.values()))
    record_property("seconds", g(elapsed))
    assert elapsed < 300


@pytest.mark.criterion(8, "ratio tables are finite and stable in T")
def test_ratio_tables(record_property):
    fams = default_families(PI)
    assert {f.family for f in fams} == {"semigroup", "radial-bump", "vertex-power"}
    for kind, verify in (("stoch", verify_stochastic_estimate), ("det", verify_deterministic_estimate)):
        start = time.perf_counter()
        tab = verify(P2, PI, fams, T_grid=(0.25, 1.0, 4.0))
        elapsed = time.perf_counter() - start
        record_property(f"{kind}_variation", g(tab.variation))
        record_property(f"{kind}_seconds", g(elapsed))
        assert tab.finite and all(0 < r.ratio < math.inf for r in tab.rows)
        assert tab.variation <= 0.10
        assert elapsed < 600


@pytest.mark.criterion(9, "Gaussian moments against Monte Carlo")
def test_gaussian_reduction(record_property):
    start = time.perf_counter()
    f = TestField.single(SeparableField(PI, bump_profile(1.0, 0.5), 1))
    points = [(1.0, WedgePoint(1.0, 1.2)), (0.5, WedgePoint(0.7, 0.4)), (2.0, WedgePoint(1.5, 2.5)),
              (0.25, WedgePoint(1.2, 1.6)), (1.5, WedgePoint(0.4, 0.9))]
    zs = []
    for t, x in points:
        var = stoch_variance(f, t, x)
        m2, se2 = mc_sample(f, t, x, 10_000, 1024, seed=11)
        m4, se4 = mc_sample(f, t, x, 10_000, 1024, seed=11, p=4.0)
        zs += [abs(m2 - var) / se2, abs(m4 - 3 * var**2) / se4]
    elapsed = time.perf_counter() - start
    record_property("max_z", g(max(zs)))
    record_property("seconds", g(elapsed))
    assert max(zs) <= 3.0
    assert elapsed < 300


@pytest.mark.criterion(10, "vertex exponent of the stochastic convolution")
def test_vertex_exponent(record_property):
    start = time.perf_counter()
    errs = {}
    for k0 in (PI / 2, PI, 2 * PI):
        fit = regularity_probe(k0)
        errs[k0] = abs(fit.slope - PI / k0)
    elapsed = time.perf_counter() - start
    record_property("max_slope_error", g(max(errs.values())))
    record_property("seconds", g(elapsed))
    assert max(errs.values()) <= 0.1
    assert elapsed < 300


@pytest.mark.criterion(11, "dyadic localisation")
def test_dyadic(record_property):
    u = ScalarField(lambda x: ((x.r >= 1) & (x.r <= 2)).astype(float), support=(1.0, 2.0), name="annulus")
    p = WeightParams(2, 2.5, 1.5)
    rep = dyadic_equivalence_check(u, p, PI)
    fine = dyadic_equivalence_check(u, p, PI, n_panels=16)
    base, _ = dyadic_sum(u, p, PI)
    shifted, _ = dyadic_sum(u.dilated(math.e), p, PI)
    shift_err = abs(shifted - math.exp(-p.theta) * base) / (math.exp(-p.theta) * base)
    record_property("ratios", f"{g(rep.rhs_over_lhs)},{g(rep.lhs_over_rhs)}")
    record_property("shift_rel_err", g(shift_err))
    assert math.isfinite(rep.rhs_over_lhs) and math.isfinite(rep.lhs_over_rhs)
    assert fine.rhs_over_lhs == pytest.approx(rep.rhs_over_lhs, rel=1e-6)
    assert fine.lhs_over_rhs == pytest.approx(rep.lhs_over_rhs, rel=1e-6)
    assert shift_err <= 1e-8


SWEEP = """subcommand = "sweep"
seed = 5

[sweep]
command = "lemma-b1a1s"

[sweep.params]
"lemma.alpha" = [0.0, -2.0]
"lemma.beta" = [0.0, -0.5]
"""


@pytest.mark.criterion(12, "sweep reports are byte-identical")
def test_determinism(tmp_path, record_property):
    path = tmp_path / "sweep.toml"
    path.write_text(SWEEP)
    out = tmp_path / "out"
    blobs = []
    for workers in ("1", "4", "1", "4"):
        assert main(["--workers", workers, "--output-dir", str(out), str(path)]) == 0
        blobs.append(tuple(sorted((f.name, f.read_bytes()) for f in out.iterdir())))
    record_property("runs", len(blobs))
    assert all(b == blobs[0] for b in blobs)
