import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mforge import harness as H
from mforge.generator import LevyGenerator, exp_alpha, of_sum, polynomial
from mforge.levy import LevyTriplet
from mforge.measures import ExponentialDensity, JumpMeasure

MM1 = LevyTriplet.from_net_drift(-1.0, 0.0, JumpMeasure(densities=(ExponentialDensity(rate=1.0, mass=0.5),)))
SQUARE = polynomial([[0.0], [0.0], [1.0]])


def dynkin(**kw):
    base = dict(name="dynkin", process=LevyTriplet(0.0, 1.0), f=SQUARE, x0=1.0, horizon=1.0, dt=0.02, n_paths=600, seed=5)
    base.update(kw)
    return H.Scenario(**base)


@given(arrays(np.float64, st.tuples(st.integers(2, 40), st.integers(1, 3)), elements=st.floats(-1e3, 1e3)), st.integers(1, 39))
def test_moment_merge_matches_numpy(rows, cut):
    cut = min(cut, len(rows) - 1)
    m = H.Moments.of(rows[:cut]).merge(H.Moments.of(rows[cut:]))
    assert m.n == len(rows)
    assert np.allclose(m.mean, rows.mean(axis=0), atol=1e-9)
    assert np.allclose(m.var, rows.var(axis=0, ddof=1), rtol=1e-9, atol=1e-6)


def test_results_do_not_depend_on_threads():
    scn = dynkin()
    one = H.mc_zero_mean(scn, [0.5, 1.0], threads=1)
    four = H.mc_zero_mean(scn, [0.5, 1.0], threads=4)
    assert [r.estimate for r in one] == [r.estimate for r in four]
    assert [r.se for r in one] == [r.se for r in four]


def test_path_seeds_do_not_depend_on_batching():
    scn = dynkin()
    whole = scn.simulate(0, 5)
    part = scn.simulate(3, 4)
    assert np.array_equal(whole[3].x, part[0].x)
    assert not np.array_equal(whole[2].x, whole[3].x)


def test_dynkin_zero_mean_and_isometry():
    scn = dynkin(n_paths=2000)
    assert all(r.passed for r in H.mc_zero_mean(scn, [0.5, 1.0]))
    assert all(r.passed for r in H.qv_isometry_check(scn, [1.0]))


def test_perturbed_generator_is_caught():
    scn = dynkin(horizon=10.0, dt=0.05, n_paths=2000, generator=H.PerturbedGenerator(LevyGenerator(LevyTriplet(0.0, 1.0)), 0.1))
    rep = H.mc_zero_mean(scn, [10.0])
    assert not all(r.passed for r in rep)


def test_verdict_report():
    ok = H.VerdictReport("s", "stat", 0.1, 0.05, 0.15, 10, (1,))
    bad = H.VerdictReport("s", "stat", 0.2, 0.05, 0.15, 10, (1,))
    assert ok.passed and not bad.passed
    assert not H.VerdictReport("s", "stat", math.nan, 0.0, 1.0, 10, (1,)).passed
    assert not H.VerdictReport("s", "stat", 0.0, 0.0, 1.0, 10, (1,), side_condition=False).passed
    assert ok.line().startswith("[PASS] s: stat")
    assert not H.refused("s", "stat", "no").passed


def test_weight_functions():
    h = H.WeightFunction.power(0.75)
    assert h(16.0) == pytest.approx(0.125)
    assert h.sqrt_vanishing and h.nonincreasing and h.square_integrable
    assert not H.WeightFunction.power(0.5).sqrt_vanishing
    tb = H.WeightFunction.table([1.0, 2.0, 4.0], [1.0, 0.5, 0.2])
    assert tb(3.0) == pytest.approx(0.35)
    assert tb.nonincreasing and not tb.square_integrable
    with pytest.raises(H.HarnessError):
        H.WeightFunction.table([1.0, 1.0], [1.0, 0.5])
    with pytest.raises(H.HarnessError):
        H.rate_convergence_check(dynkin(), H.WeightFunction.power(0.4), [1.0, 2.0])


def test_growth_check_refuses_unbounded_function():
    scn = H.Scenario("refuse", MM1, exp_alpha(1.0), domain=H.Box((0.0, 1.0), (0.0, 0.0)), n_paths=10)
    rep = H.l2_growth_check(scn, [1.0])
    assert not rep.passed and rep.note.startswith("refused")


def test_linear_growth_for_identity():
    scn = dynkin(f=polynomial([[0.0], [1.0]]), x0=0.0, horizon=5.0, dt=0.05, n_paths=1000, domain=H.Box((-3.0, 3.0), (0.0, 0.0)))
    rep = H.l2_growth_check(scn, [1.0, 5.0])
    assert rep.passed and rep.note == "C = 1"


@pytest.mark.parametrize("alpha", [0.25, 1.0, 3.0])
def test_pollaczek_khinchine_value(alpha):
    # exponential(1) jumps at rate 1/2 against unit drift
    assert H.pk_target(MM1, alpha) == pytest.approx(0.5 * (1 + alpha) / (0.5 + alpha), rel=1e-10)


def test_pollaczek_khinchine_value_is_monotone_and_vanishes_when_unstable():
    vals = [H.pk_target(MM1, a) for a in np.linspace(0.1, 5, 20)]
    assert H.pk_target(MM1, 1.0) == pytest.approx(2 / 3)
    assert np.all(np.diff(vals) < 0) and vals[-1] > 0.5
    heavy = LevyTriplet.from_net_drift(-1.0, 0.0, JumpMeasure(densities=(ExponentialDensity(rate=1.0, mass=2.0),)))
    assert H.pk_target(heavy, 1.0) == 0.0


def test_reflected_generator_needs_flat_function():
    scn = H.Scenario("nonflat", LevyTriplet(-1.0, 1.0), of_sum(lambda z: z, lambda z: np.ones_like(z), lambda z: np.zeros_like(z)), y="reflection", n_paths=10)
    with pytest.raises(H.HarnessError):
        H.reflected_generator_check(scn)


@pytest.mark.parametrize(
    "kw",
    [
        dict(martingale="nonsense"),
        dict(dt=2.0),
        dict(n_paths=0),
        dict(martingale="kella_whitt", f=None),
        dict(martingale="map_vector"),
    ],
)
def test_invalid_scenarios(kw):
    with pytest.raises(H.HarnessError):
        dynkin(**kw)


def test_pathwise_identity_rejects_unknown_name():
    with pytest.raises(H.HarnessError):
        H.pathwise_identity_check(dynkin(), "other")
