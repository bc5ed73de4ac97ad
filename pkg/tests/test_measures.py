import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mforge.measures import (
    ExponentialDensity,
    JumpMeasure,
    MeasureError,
    NonFiniteIntegrandError,
    PowerLawDensity,
    UniformDensity,
    as_seed_sequence,
    check_levy_measure,
    integrate,
    path_seed,
    sample_events,
)


def test_truncated_second_moment_of_exponential_density():
    nu = JumpMeasure(densities=(ExponentialDensity(rate=1.0, mass=1.0),))
    value, finite = check_levy_measure(nu)
    assert finite
    # ∫_0^1 z² e^{-z} dz + ∫_1^∞ e^{-z} dz
    assert value == pytest.approx(2.0 - 4.0 / math.e, abs=1e-9)


def test_complex_integrand_on_atom_is_exact():
    nu = JumpMeasure.atom(1.0, 2.5)
    got = integrate(nu, lambda z: np.exp(1j * z) - 1 - 1j * z)
    assert abs(got - 2.5 * (np.exp(1j) - 1 - 1j)) < 1e-15


def test_fixed_rule_matches_adaptive_quadrature():
    nu = JumpMeasure(
        atoms=(JumpMeasure.atom(-0.4, 0.3).atoms[0],),
        densities=(ExponentialDensity(rate=2.0, mass=0.7), UniformDensity(-3.0, -0.5, 1.2)),
    )
    z, w = nu.rule()
    g = lambda u: np.cos(u) * np.exp(-0.1 * u * u)
    assert np.sum(w * g(z)) == pytest.approx(integrate(nu, g), rel=1e-9)


def test_power_law_infinite_activity_integrates_but_cannot_be_sampled():
    nu = JumpMeasure(densities=(PowerLawDensity(1.0, 0.5, 0.0, 1.0),))
    assert math.isinf(nu.total_mass)
    # ∫_0^1 z² z^{-1.5} dz = 1/1.5
    assert check_levy_measure(nu)[0] == pytest.approx(1.0 / 1.5, rel=1e-8)
    with pytest.raises(MeasureError):
        sample_events(nu, 1.0, 0)


def test_invalid_measures_are_rejected():
    with pytest.raises(MeasureError):
        JumpMeasure.atom(0.0, 1.0)
    with pytest.raises(MeasureError):
        JumpMeasure(densities=(UniformDensity(-1.0, 1.0, 1.0),))
    with pytest.raises(MeasureError):
        JumpMeasure(densities=(UniformDensity(0.05, 1.0, 1.0),), epsilon=0.1)
    assert JumpMeasure.dirac(0.0).total_mass == 1.0


def test_non_finite_integrand_names_the_jump_size():
    with pytest.raises(NonFiniteIntegrandError) as exc:
        integrate(JumpMeasure.atom(2.0), lambda z: math.inf)
    assert exc.value.z == 2.0


def test_path_seed_matches_spawn_and_copies_are_independent():
    kids = np.random.SeedSequence(42).spawn(5)
    for i, k in enumerate(kids):
        assert np.array_equal(path_seed(42, i).generate_state(4), k.generate_state(4))
    ss = path_seed(7, 3)
    a = as_seed_sequence(ss).spawn(2)[1].generate_state(2)
    b = as_seed_sequence(ss).spawn(2)[1].generate_state(2)
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        as_seed_sequence(None)


def test_sample_events_are_reproducible_and_inside_support():
    nu = JumpMeasure(densities=(UniformDensity(0.5, 1.5, 2.0),))
    a = sample_events(nu, 10.0, 3)
    b = sample_events(nu, 10.0, 3)
    assert np.array_equal(a.times, b.times) and np.array_equal(a.marks, b.marks)
    assert np.all(np.diff(a.times) >= 0) and np.all((a.times > 0) & (a.times <= 10.0))
    assert np.all((a.marks > 0.5) & (a.marks < 1.5))


def test_event_count_has_poisson_mean():
    nu = JumpMeasure(atoms=JumpMeasure.atom(1.0, 0.7).atoms)
    counts = np.array([len(sample_events(nu, 5.0, path_seed(11, i))) for i in range(4000)])
    se = math.sqrt(3.5 / len(counts))
    assert abs(counts.mean() - 3.5) < 3 * se


@given(
    rate=st.floats(0.2, 5.0),
    mass=st.floats(0.1, 3.0),
    k=st.floats(0.1, 2.0),
)
def test_scaling_is_linear_in_integrals(rate, mass, k):
    nu = JumpMeasure(densities=(ExponentialDensity(rate=rate, mass=mass),), atoms=JumpMeasure.atom(0.3, mass).atoms)
    g = lambda z: min(z * z, 1.0)
    assert integrate(nu.scaled(k), g) == pytest.approx(k * integrate(nu, g), rel=1e-7)
    assert nu.scaled(k).total_mass == pytest.approx(k * nu.total_mass)


@given(a=st.floats(-3.0, -0.1), width=st.floats(0.1, 3.0), mass=st.floats(0.1, 4.0))
def test_uniform_truncation_drift(a, width, mass):
    b = a + width
    if b >= 0:
        b = -0.01
    nu = JumpMeasure(densities=(UniformDensity(a, b, mass),))
    lo, hi = max(a, -1.0), b
    expected = mass / (b - a) * (hi * hi - lo * lo) / 2 if hi > lo else 0.0
    assert nu.truncation_drift() == pytest.approx(expected, abs=1e-10)
