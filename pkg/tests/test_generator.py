import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mforge.generator import (
    Box,
    GeneratorError,
    JDGenerator,
    LevyGenerator,
    MapGenerator,
    check_assumption_bounds,
    exp_alpha,
    exp_i_alpha,
    map_exponent_matrix,
    polynomial,
    sin_alpha,
)
from mforge.jump_diffusion import JDCoefficients, affine_sigma, linear_drift, multiplicative_kernel
from mforge.levy import LevyTriplet, cumulant_exponent, levy_exponent
from mforge.map_process import MapParams
from mforge.measures import Atom, ExponentialDensity, JumpMeasure, UniformDensity

def _atoms(*pairs):
    return JumpMeasure(atoms=tuple(Atom(a, m) for a, m in pairs))


CP = LevyTriplet(0.3, 0.4, JumpMeasure(atoms=_atoms((0.5, 1.0), (-1.5, 0.5)).atoms, densities=(ExponentialDensity(rate=2.0, mass=1.0),)))


@given(st.floats(-3, 3), st.floats(0, 2), st.floats(0.1, 4))
def test_exponential_is_eigenfunction(x, y, alpha):
    f = exp_i_alpha(alpha)
    out = LevyGenerator(CP).apply(f, np.array([x]), np.array([y]))[0]
    assert abs(out - levy_exponent(CP, alpha) * f.value(x, y)) < 1e-10


def test_identity_picks_up_drift_only_for_small_jumps():
    nu = JumpMeasure(densities=(UniformDensity(a=0.2, b=1.0, mass=2.0), UniformDensity(a=-1.0, b=-0.5, mass=1.0)))
    t = LevyTriplet(0.7, 1.3, nu)
    x = np.linspace(-2, 2, 5)
    out = LevyGenerator(t).apply(polynomial([[0.0], [1.0]]), x, np.zeros(5))
    assert np.allclose(out, 0.7, atol=1e-12)
    big = LevyTriplet(0.7, 0.0, JumpMeasure.atom(2.0, 0.5))
    assert np.allclose(LevyGenerator(big).apply(polynomial([[0.0], [1.0]]), x, np.zeros(5)), 0.7 + 1.0)


def test_square_without_jumps():
    t = LevyTriplet(-0.4, 0.9)
    x = np.linspace(-2, 2, 7)
    out = LevyGenerator(t).apply(polynomial([[0.0], [0.0], [1.0]]), x, np.zeros(7))
    assert np.allclose(out, 2 * x * (-0.4) + 0.81, atol=1e-12)


def test_kernel_and_pushforward_forms_agree():
    nu = JumpMeasure(densities=(UniformDensity(a=0.2, b=1.8, mass=1.0),), atoms=_atoms((-0.6, 0.5)).atoms)
    c = JDCoefficients(1, linear_drift(-1.0), affine_sigma(0.3, 0.1), ((multiplicative_kernel(0.8), nu),))
    g = JDGenerator(c)
    x = np.linspace(-2.5, 2.5, 11)[:, None]
    y = np.linspace(0, 1, 11)
    f = sin_alpha(1.3)
    assert np.max(np.abs(g.apply(f, x, y) - g.apply_pushforward(f, x, y))) < 1e-10


def _map(G=None):
    trip = (LevyTriplet(0.5, 0.5), LevyTriplet.from_net_drift(-0.5, 0.3, _atoms((0.5, 1.0))))
    return MapParams([[-1.0, 1.0], [2.0, -2.0]], trip, G or {})


def test_map_operator_on_exponentials():
    p = _map({(0, 1): JumpMeasure.dirac(0.5), (1, 0): JumpMeasure(densities=(UniformDensity(a=-0.5, b=-0.1, mass=1.0),))})
    a = 0.2
    x = np.array([-1.0, 0.0, 2.0])
    y = np.array([0.0, 0.5, 1.0])
    got = MapGenerator(p).f_operator(exp_alpha(a), x, y)
    want = np.exp(a * (x + y))[:, None, None] * map_exponent_matrix(p, a)[None]
    assert np.max(np.abs(got - want)) < 1e-10


def test_map_exponent_without_transition_jumps():
    p = _map()
    a = 0.7
    F = map_exponent_matrix(p, a)
    want = np.diag([cumulant_exponent(t, a) for t in p.triplets]) + p.Q
    assert np.allclose(F, want, atol=1e-12)


def test_map_generator_needs_state():
    with pytest.raises(GeneratorError):
        MapGenerator(_map()).apply(exp_alpha(0.1), np.zeros(2), np.zeros(2), None)


def test_analytic_partials_match_differences():
    xs = np.linspace(-2, 2, 9)
    ys = np.linspace(0, 1, 9)
    for f in (sin_alpha(1.5), exp_alpha(0.4), exp_i_alpha(2.0), polynomial([[1.0, 2.0], [0.5, 0.0], [3.0, 1.0]])):
        assert f.check_partials(xs, ys) < 1e-4


def test_bounds_for_identity_with_unit_atom():
    t = LevyTriplet(0.0, 0.0, JumpMeasure.atom(1.0, 1.0))
    rep = check_assumption_bounds(polynomial([[0.0], [1.0]]), LevyGenerator(t), Box((0.0, 1.0), (0.0, 1.0)))
    assert rep.passed
    assert rep.sup_jump == pytest.approx(1.0, abs=1e-12)
    assert rep.sup_diffusion == 0.0


def test_bounds_refuse_exponential_growth_against_exponential_tail():
    t = LevyTriplet(0.0, 0.0, JumpMeasure(densities=(ExponentialDensity(rate=1.0, mass=1.0),)))
    rep = check_assumption_bounds(exp_alpha(1.0), LevyGenerator(t), Box((0.0, 1.0), (0.0, 0.0)))
    assert not rep.passed
    ok = check_assumption_bounds(sin_alpha(1.0), LevyGenerator(t), Box((0.0, 1.0), (0.0, 0.0)))
    assert ok.passed and ok.sup_jump <= 4.0


def test_qv_integrand_of_complex_exponential():
    nu = _atoms((0.5, 1.0), (-1.5, 0.5))
    t = LevyTriplet(0.1, 0.6, nu)
    a = 1.7
    x = np.linspace(-1, 1, 5)
    got = LevyGenerator(t).qv_integrand(exp_i_alpha(a), x, np.zeros(5))
    want = 0.36 * a * a + sum(m * 2 * (1 - np.cos(a * z)) for z, m in ((0.5, 1.0), (-1.5, 0.5)))
    assert np.max(np.abs(got - want)) < 1e-9
