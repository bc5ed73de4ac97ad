import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mforge.fv import make_fv, reflection_regulator
from mforge.generator import (
    LevyGenerator,
    MapGenerator,
    exp_alpha,
    exp_i_alpha,
    exp_neg_alpha,
    polynomial,
    product,
    sin_alpha,
    state_indicator,
)
from mforge.levy import LevyTriplet, simulate_levy_path
from mforge.map_process import MapParams, simulate_map_path
from mforge.martingale import (
    CoupledPath,
    PathMismatchError,
    assemble_batch,
    assemble_martingale,
    kella_whitt_martingale,
    laplace_kw_martingale,
    map_vector_martingale,
    predictable_qv,
    product_form_martingale,
    realized_qv,
)
from mforge.measures import ExponentialDensity, JumpMeasure, UniformDensity

MM1 = LevyTriplet.from_net_drift(-1.0, 0.0, JumpMeasure(densities=(ExponentialDensity(rate=1.0, mass=0.5),)))
SQUARE = polynomial([[0.0], [0.0], [1.0]])


def reflected_mm1(seed, horizon=10.0, dt=0.01):
    return CoupledPath.reflected(simulate_levy_path(MM1, 0.0, horizon, dt, seed))


def test_pure_jump_y_gives_zero_martingale():
    grid = np.linspace(0, 1, 101)
    y = make_fv({"kind": "staircase", "size": 0.3, "epochs": [0.1, 0.3, 0.5, 0.7, 0.9]}, grid)
    x = simulate_levy_path(LevyTriplet(0.0, 1.0), 0.0, 1.0, 0.01, 4, extra_times=y.times)
    m = assemble_martingale(CoupledPath.couple(x, y), polynomial([[0.0, 0.0, 1.0]]), LevyGenerator(LevyTriplet(0.0, 1.0)))
    assert np.max(np.abs(m.values)) < 1e-12
    assert np.max(np.abs(m.terminal)) > 0.1


def test_reflected_pure_drift_laplace_martingale_vanishes():
    # Z stays at 0 and Y_t = t; only the frozen-X step error is left
    t = LevyTriplet(-1.0)
    a = 1.5
    ends = []
    for dt in (0.01, 0.005):
        path = CoupledPath.reflected(simulate_levy_path(t, 0.0, 3.0, dt, 0))
        assert np.allclose(path.y_values, path.times)
        m = laplace_kw_martingale(t, a, path)
        step = a * dt - 2 * np.sinh(a * dt / 2)
        assert m.values[-1] == pytest.approx(3.0 / dt * step, rel=1e-6)
        ends.append(m.values[-1])
    assert ends[0] / ends[1] == pytest.approx(4.0, rel=1e-3)


def test_brownian_square():
    t = LevyTriplet(0.0, 1.0)
    x = simulate_levy_path(t, 1.0, 2.0, 0.01, 9)
    m = assemble_martingale(CoupledPath.couple(x), SQUARE, LevyGenerator(t))
    assert np.allclose(m.values, x.values**2 - 1.0 - x.times, atol=1e-12)
    assert np.allclose(predictable_qv(CoupledPath.couple(x), polynomial([[0.0], [1.0]]), LevyGenerator(t)), x.times)


def test_realized_qv_of_brownian_motion():
    t = LevyTriplet(0.0, 1.0)
    x = simulate_levy_path(t, 0.0, 1.0, 1e-4, 2)
    m = assemble_martingale(CoupledPath.couple(x), polynomial([[0.0], [1.0]]), LevyGenerator(t))
    # sd of the realized QV at t = 1 is sqrt(2 dt) = 0.014
    assert realized_qv(m)[-1] == pytest.approx(1.0, abs=0.07)


def test_trapezoid_is_exact_on_linear_stretches():
    t = LevyTriplet(0.7)
    x = simulate_levy_path(t, 1.0, 5.0, 0.1, 0)
    mid = assemble_martingale(CoupledPath.couple(x), SQUARE, LevyGenerator(t))
    left = assemble_martingale(CoupledPath.couple(x), SQUARE, LevyGenerator(t), rule="right")
    assert np.max(np.abs(mid.values)) < 1e-12
    # the left sum misses 0.49 dt per unit time
    assert left.values[-1] == pytest.approx(0.49 * 0.1 * 5.0, rel=1e-9)


@settings(max_examples=10)
@given(st.integers(0, 10_000), st.floats(0.2, 3.0))
def test_kella_whitt_is_negated_assembly(seed, alpha):
    path = reflected_mm1(seed)
    gen = LevyGenerator(MM1)
    kw = kella_whitt_martingale(MM1, alpha, path)
    gap = np.max(np.abs(kw.values + assemble_martingale(path, exp_i_alpha(alpha), gen).values))
    assert gap < 1e-8
    lkw = laplace_kw_martingale(MM1, alpha, path)
    assert np.max(np.abs(lkw.values + assemble_martingale(path, exp_neg_alpha(alpha), gen).values)) < 1e-8


def test_product_form_matches_right_rule_assembly():
    path = reflected_mm1(5)
    gen = LevyGenerator(MM1)
    f = product(np.sin, lambda y: np.exp(-y), np.cos, lambda x: -np.sin(x), lambda y: -np.exp(-y))
    xi = product(np.sin, np.ones_like, np.cos, lambda x: -np.sin(x), np.zeros_like)
    pf = product_form_martingale(xi, lambda y: np.exp(-y), path, gen)
    direct = assemble_martingale(path, f, gen, rule="right")
    assert np.max(np.abs(pf.values - direct.values)) < 1e-8


def _map():
    trip = (LevyTriplet(0.5, 0.5), LevyTriplet.from_net_drift(-0.5, 0.3, JumpMeasure.atom(0.5, 1.0)))
    G = {(0, 1): JumpMeasure.dirac(0.5), (1, 0): JumpMeasure(densities=(UniformDensity(a=-0.5, b=-0.1, mass=1.0),))}
    return MapParams([[-1.0, 1.0], [2.0, -2.0]], trip, G)


def test_map_coordinates_are_indicator_martingales():
    p = _map()
    path = CoupledPath.couple(simulate_map_path(p, 0, 0.0, 5.0, 0.01, seed=3))
    g = exp_alpha(0.2)
    vec = map_vector_martingale(p, g, path, alpha=0.2)
    quad = map_vector_martingale(p, g, path)
    assert np.max(np.abs(vec.values - quad.values)) < 1e-9
    gen = MapGenerator(p)
    for j in range(2):
        scalar = assemble_martingale(path, state_indicator(g, j), gen)
        assert np.max(np.abs(vec.values[:, j] - scalar.values)) < 1e-9
    total = assemble_martingale(path, g, gen)
    assert np.max(np.abs(vec.values.sum(axis=1) - total.values)) < 1e-9


def test_batch_matches_single_paths():
    paths = [reflected_mm1(s, horizon=2.0) for s in range(3)]
    gen = LevyGenerator(MM1)
    f = sin_alpha(1.0)
    for p, m in zip(paths, assemble_batch(paths, f, gen)):
        assert np.allclose(m.values, assemble_martingale(p, f, gen).values, rtol=0, atol=1e-13)


def test_errors():
    x = simulate_levy_path(MM1, 0.0, 1.0, 0.01, 0)
    other = reflection_regulator(np.linspace(0, 1, 11), np.zeros(11))
    with pytest.raises(PathMismatchError):
        CoupledPath.couple(x, other)
    with pytest.raises(ValueError):
        assemble_martingale(CoupledPath.couple(x), SQUARE, LevyGenerator(MM1), rule="left")
    neg = simulate_levy_path(LevyTriplet(-1.0), 0.0, 1.0, 0.1, 0)
    with pytest.raises(ValueError):
        laplace_kw_martingale(LevyTriplet(-1.0), 1.0, CoupledPath.couple(neg))
    with pytest.raises(PathMismatchError):
        map_vector_martingale(_map(), exp_alpha(0.1), CoupledPath.couple(x))


def test_csv_exports():
    path = reflected_mm1(1, horizon=1.0)
    m = kella_whitt_martingale(MM1, 1.0, path)
    head = m.to_csv(predictable=np.zeros(len(path.times))).splitlines()[0]
    assert head == "time,M_re,M_im,term_terminal,term_generator,term_stieltjes,term_jumpsum,predictable_qv"
    assert path.to_csv().splitlines()[0] == "time,X,Y,Yc,is_jump"
    assert len(m.to_csv().splitlines()) == len(path.times) + 1
