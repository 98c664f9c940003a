import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import kmsgreen as kg
from kmsgreen.greens import (
    GrowthReport,
    SchwingerTable,
    equal_argument_moments,
    generalized_free_green,
    growth_probe,
    moment_by_differentiation,
    subset_moments,
)

from conftest import NR, REL, coth


@pytest.fixture
def free2():
    return kg.QuasiFreeSpec.free(kg.Dispersion(NR, 1.0), kg.ThermalCircle(2.0))


def _sharp(tau, f):
    return kg.Argument.of(kg.DeltaComb.single(tau), f)


def test_zero_argument_gives_one(free2):
    zero = kg.single_node(0.0)
    assert free2(_sharp(0.0, zero)) == 1.0
    assert kg.Argument().terms == ()
    assert free2(kg.Argument()) == 1.0


def test_single_node_value(free2, node):
    val = kg.quasifree_green(free2, _sharp(0.0, node))
    assert val == pytest.approx(np.exp(-0.5 * coth(1.0)), rel=1e-15)
    assert val.real == pytest.approx(0.5186, abs=1e-4)
    assert val.imag == 0.0


@settings(max_examples=30, deadline=None)
@given(st.floats(-4.0, 4.0))
def test_log_quadratic_scaling(s):
    spec = kg.QuasiFreeSpec.free(kg.Dispersion(REL, 0.5), kg.ThermalCircle(1.0))
    f = kg.gaussian_packet(1, 0.0, 1.0, n_nodes=33)
    x = kg.Argument(((kg.DeltaComb([0.0, 0.3], [1.0, -0.4]), f),))
    quad = spec.kernel(x, x).real
    assert spec(s * x) == pytest.approx(np.exp(-0.5 * s * s * quad), rel=1e-12, abs=1e-300)


def test_value_in_unit_interval(packets):
    spec = kg.QuasiFreeSpec.free(kg.Dispersion(NR, 0.3), kg.ThermalCircle(3.0))
    for f in packets:
        v = spec(kg.Argument(((kg.MatsubaraSeries.from_positive(0.2, [0.1 + 0.2j]), f),)))
        assert 0 < v.real <= 1 and v.imag == 0


def test_multitime_one_point(free2, packets):
    f = packets[1]
    assert kg.multitime_green(free2, [(0.4, f)]) == pytest.approx(free2(_sharp(0.4, f)), rel=1e-14)


def test_multitime_equal_points_double_weight(free2, packets):
    f = packets[0]
    two = kg.Argument.of(kg.DeltaComb([0.25], [2.0]), f)
    assert kg.multitime_green(free2, [(0.25, f), (0.25, f)]) == pytest.approx(free2(two), rel=1e-13)


def test_multitime_matches_smeared_comb(free2, packets):
    pts = [(0.1, packets[0]), (-0.6, packets[1]), (0.9, packets[2])]
    arg = kg.Argument.sharp(pts, free2.circle)
    assert kg.multitime_green(free2, pts) == pytest.approx(free2(arg), rel=1e-13)


def test_multitime_needs_points(free2):
    with pytest.raises(ValueError):
        kg.multitime_green(free2, [])


def test_mean_recovered_by_differentiation(packets):
    circle = kg.ThermalCircle(2.0)
    m = packets[0].with_values(0.4 * packets[0].v)
    spec = kg.QuasiFreeSpec.free(kg.Dispersion(NR, 1.0), circle, mean=m)
    f1, f2 = packets[1], packets[2]
    mean1 = spec.mean_value(_sharp(0.3, f1))
    mean2 = spec.mean_value(_sharp(-0.2, f2))
    assert abs(mean1) > 0.1
    first = moment_by_differentiation(spec, [(0.3, f1)])
    assert first == pytest.approx(mean1, rel=1e-8)
    second = moment_by_differentiation(spec, [(0.3, f1), (-0.2, f2)])
    cov = spec.covariance([(0.3, f1), (-0.2, f2)])[0, 1]
    assert second == pytest.approx(mean1 * mean2 + cov, rel=1e-8)
    assert kg.schwinger_moment(spec, [(0.3, f1), (-0.2, f2)]) == pytest.approx(mean1 * mean2 + cov, rel=1e-13)


def test_mean_term_has_modulus_one(packets):
    spec = kg.QuasiFreeSpec.free(kg.Dispersion(NR, 1.0), kg.ThermalCircle(2.0), mean=packets[0])
    f = packets[1]
    x = _sharp(0.0, f)
    free = kg.QuasiFreeSpec.free(kg.Dispersion(NR, 1.0), kg.ThermalCircle(2.0))
    assert abs(spec(x)) == pytest.approx(free(x).real, rel=1e-14)


# mixtures

def test_mixture_dirac_equals_free(free2, packets):
    x = kg.Argument(((kg.DeltaComb([0.0, 0.5], [1.0, 1.0]), packets[1]),))
    assert kg.mixture_green(kg.SpectralMeasure.dirac(1.0), NR, free2.circle, x) == pytest.approx(
        free2(x), rel=1e-15)


def test_mixture_two_atom_value(node):
    circle = kg.ThermalCircle(2.0)
    val = kg.mixture_green(kg.SpectralMeasure.two_atom(1.0, 2.0), NR, circle, _sharp(0.0, node))
    ref = 0.5 * np.exp(-0.5 * coth(1.0)) + 0.5 * np.exp(-0.5 * coth(2.0))
    assert val == pytest.approx(ref, rel=1e-15)
    assert val == pytest.approx(0.5569868219659956, rel=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 5.0), st.floats(0.5, 5.0), st.floats(0.05, 0.95), st.floats(-1.0, 0.99))
def test_mixture_jensen_and_convexity(mu1, mu2, w, tau):
    circle = kg.ThermalCircle(2.0)
    f = kg.gaussian_packet(1, 0.0, 1.0, n_nodes=33)
    m = kg.SpectralMeasure.two_atom(mu1, mu2, w, floor=0.5)
    x = kg.Argument(((kg.DeltaComb([0.0, tau], [1.0, 0.5]), f),))
    mix = kg.mixture_green(m, REL, circle, x)
    per_atom = sum(wi * kg.QuasiFreeSpec.free(kg.Dispersion(REL, mu), circle)(x) for mu, wi in m.atoms)
    assert mix == pytest.approx(per_atom, rel=1e-14)
    gen = generalized_free_green(m, REL, circle, x)
    assert mix.real >= gen.real * (1 - 1e-14)
    assert abs(mix) <= 1.0


def test_mixture_multitime_one_point(packets):
    circle = kg.ThermalCircle(2.0)
    m = kg.SpectralMeasure([(1.0, 0.2), (2.0, 0.5), (4.0, 0.3)], floor=0.5)
    f = packets[2]
    ref = sum(w * np.exp(-0.5 * kg.kernel_sharp(0.1, f, 0.1, f, kg.Dispersion(NR, mu), circle).real)
              for mu, w in m.atoms)
    assert kg.mixture_multitime(m, NR, circle, [(0.1, f)]) == pytest.approx(ref, rel=1e-14)
    assert kg.mixture_multitime(kg.SpectralMeasure.dirac(2.0), NR, circle, [(0.1, f), (0.7, f)]) == pytest.approx(
        kg.multitime_green(kg.QuasiFreeSpec.free(kg.Dispersion(NR, 2.0), circle), [(0.1, f), (0.7, f)]), rel=1e-14)


# moments

def test_two_point_moment_is_kernel(free2, packets):
    pts = [(0.2, packets[0]), (-0.5, packets[2])]
    ref = kg.kernel_sharp(0.2, packets[0], -0.5, packets[2], free2.kernel.disp, free2.circle)
    assert kg.schwinger_moment(free2, pts) == pytest.approx(ref, rel=1e-14)


def test_four_point_equal(free2, packets):
    f = packets[1]
    s = kg.kernel_sharp(0.0, f, 0.0, f, free2.kernel.disp, free2.circle)
    assert kg.schwinger_moment(free2, [(0.0, f)] * 4) == pytest.approx(3 * s * s, rel=1e-14)


def test_odd_moments_vanish(packets):
    circle = kg.ThermalCircle(2.0)
    pts = [(0.1, packets[0]), (0.2, packets[1]), (0.3, packets[2])]
    assert kg.schwinger_moment(kg.QuasiFreeSpec.free(kg.Dispersion(NR, 1.0), circle), pts) == 0
    assert kg.schwinger_moment(kg.Mixture(kg.SpectralMeasure.two_atom(1.0, 2.0), NR, circle), pts) == 0


def test_wick_matches_equal_argument_formula_to_order_12(free2, node):
    a = coth(1.0)
    table = equal_argument_moments([a], orders=range(2, 13, 2))
    for n, ref in table.items():
        # up to 10395 summed pairings at n = 12
        assert kg.schwinger_moment(free2, [(0.0, node)] * n) == pytest.approx(ref, rel=1e-12)


def test_wick_order_cap(free2, node):
    with pytest.raises(ValueError):
        kg.schwinger_moment(free2, [(0.0, node)] * 14)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_moment_matches_finite_differences(n, rng):
    circle = kg.ThermalCircle(2.0)
    f = kg.gaussian_packet(1, 0.0, 1.0, n_nodes=33, cutoff=8.0)
    m = f.with_values(0.3 * f.v)
    models = [
        kg.QuasiFreeSpec.free(kg.Dispersion(NR, 1.0), circle, mean=m),
        kg.Mixture(kg.SpectralMeasure.two_atom(1.0, 2.0), NR, circle),
    ]
    for model in models:
        pts = [(float(t), f) for t in rng.uniform(-1, 1, n)]
        wick = kg.schwinger_moment(model, pts)
        fd = moment_by_differentiation(model, pts)
        scale = max(abs(wick), 1e-3)
        assert abs(wick - fd) < 1e-6 * scale


def test_subset_moments_keys(free2, packets):
    fam = subset_moments(free2, [(0.0, packets[0]), (0.1, packets[1]), (0.2, packets[2])])
    assert len(fam) == 7
    assert fam[frozenset([0, 1])] == pytest.approx(
        kg.schwinger_moment(free2, [(0.0, packets[0]), (0.1, packets[1])]), rel=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.floats(-10.0, 10.0), st.integers(0, 2**31))
def test_shift_and_reflection_invariance(s, seed):
    rng = np.random.default_rng(seed)
    circle = kg.ThermalCircle(2.0)
    f = kg.gaussian_packet(1, 0.0, 1.0, n_nodes=33)
    model = kg.Mixture(kg.SpectralMeasure.two_atom(1.0, 2.0), REL, circle)
    taus = rng.uniform(-1, 1, 3)
    base = model.multitime([(t, f) for t in taus])
    assert abs(model.multitime([(t + s, f) for t in taus]) - base) < 1e-12
    assert abs(model.multitime([(-t, f) for t in taus]) - base) < 1e-12


# tables and growth

def test_table_validation():
    t = SchwingerTable(2, [(0.0, None), (0.5, None)], 1.5 + 0j)
    assert t.to_record()["value"] == [1.5, 0.0]
    with pytest.raises(ValueError):
        SchwingerTable(2, [], np.nan)
    with pytest.raises(ValueError):
        SchwingerTable(2, [], 1.0, flavor="other")


def test_growth_probe_gaussian():
    report = growth_probe(equal_argument_moments([coth(1.0)]), gamma=0.6)
    assert isinstance(report, GrowthReport)
    assert report.holds
    rec = report.to_record()
    assert rec["C"] > 0 and rec["R"] > 0
    assert rec["max_ratio_on_check_orders"] <= 1.0
    assert set(report.fit_orders) | set(report.check_orders) == set(range(2, 17, 2))


def test_growth_probe_detects_faster_growth():
    # (2m)!-type growth outruns any (n!)^0.6 R^n envelope fitted on low orders
    from math import factorial

    moments = {n: float(factorial(n)) ** 1.5 for n in range(2, 17, 2)}
    assert not growth_probe(moments, gamma=0.6).holds


def test_growth_probe_needs_orders():
    with pytest.raises(ValueError):
        growth_probe({2: 1.0, 4: 3.0})
