import numpy as np
import pytest
import scipy.linalg

from mforge.levy import LevyTriplet, cumulant_exponent
from mforge.map_process import MapParams, MapSpecError, simulate_map_path, transform_evolution
from mforge.measures import JumpMeasure, MeasureError, UniformDensity

Q = [[-1.0, 1.0], [2.0, -2.0]]


def two_state(**kw):
    trip = (LevyTriplet(0.5, 0.5), LevyTriplet.from_net_drift(-0.5, 0.3, JumpMeasure.atom(0.5, 1.0)))
    G = {(0, 1): JumpMeasure.dirac(0.5), (1, 0): JumpMeasure(densities=(UniformDensity(a=-0.5, b=-0.1, mass=1.0),))}
    return MapParams(Q, trip, G, **kw)


@pytest.mark.parametrize(
    "q, n_trip, G, init",
    [
        ([[-1.0, 1.0]], 1, {}, None),
        ([[1.0, -1.0], [2.0, -2.0]], 2, {}, None),
        ([[-1.0, 1.5], [2.0, -2.0]], 2, {}, None),
        (Q, 1, {}, None),
        (Q, 2, {(0, 1): JumpMeasure.atom(0.5, 0.5)}, None),
        (Q, 2, {}, [0.7, 0.7]),
    ],
)
def test_invalid_parameters(q, n_trip, G, init):
    with pytest.raises(MapSpecError):
        MapParams(q, tuple(LevyTriplet(0.0, 1.0) for _ in range(n_trip)), G, init)


def test_stationary_law():
    assert np.allclose(two_state().stationary(), [2 / 3, 1 / 3], atol=1e-12)


def test_long_run_occupation_and_sojourns():
    p = two_state()
    # the occupation fraction has sd about 0.0012 at this horizon
    path = simulate_map_path(p, 0, 0.0, 1.0e5, 1.0, seed=7)
    occ = path.occupation(2) / 1.0e5
    assert np.allclose(occ, [2 / 3, 1 / 3], rtol=0.02)
    soj = path.sojourns()
    mean0 = np.mean([s for i, s in soj if i == 0])
    mean1 = np.mean([s for i, s in soj if i == 1])
    assert mean0 == pytest.approx(1.0, rel=0.02)
    assert mean1 == pytest.approx(0.5, rel=0.02)


def test_transition_jumps_follow_their_laws():
    path = simulate_map_path(two_state(), 0, 0.0, 50.0, 0.05, seed=2)
    assert path.transitions
    for t, i, j, mark in path.transitions:
        if (i, j) == (0, 1):
            assert mark == 0.5
        else:
            assert -0.5 <= mark <= -0.1
        k = int(np.searchsorted(path.times, t))
        assert path.times[k] == t and path.states[k] == j and path.pre_states[k] == i


def test_single_state_reduces_to_levy():
    t = LevyTriplet.from_net_drift(-1.0, 0.4, JumpMeasure.atom(0.7, 0.5))
    p = MapParams([[0.0]], (t,))
    for a in (-0.5, 0.3, 1.0):
        assert transform_evolution(p, a, 2.0)[0, 0] == pytest.approx(np.exp(2.0 * cumulant_exponent(t, a)), rel=1e-12)
    path = simulate_map_path(p, 0, 1.0, 5.0, 0.01, seed=1)
    assert np.all(path.states == 0) and not path.transitions


def test_zero_transform_is_chain_semigroup():
    M = transform_evolution(two_state(), 0.0, 1.5)
    assert np.allclose(M, scipy.linalg.expm(np.array(Q) * 1.5), atol=1e-12)
    assert np.allclose(M.sum(axis=1), 1.0)


def test_transform_overflow_is_reported():
    with pytest.raises(MeasureError):
        transform_evolution(two_state(), 60.0, 1.0e3)


def test_path_reproducible_and_csv():
    a = simulate_map_path(two_state(), 0, 0.0, 5.0, 0.01, seed=11)
    b = simulate_map_path(two_state(), 0, 0.0, 5.0, 0.01, seed=11)
    assert np.array_equal(a.values, b.values) and np.array_equal(a.states, b.states)
    assert a.to_csv().splitlines()[0] == "time,X,J,is_jump,delta_X"
