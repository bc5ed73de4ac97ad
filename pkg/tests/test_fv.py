import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mforge.fv import FVPath, FVSpecError, decompose, fv_event_times, make_fv, reflection_regulator, zero_fv


def test_reflection_of_jump_then_rise():
    times = np.array([0.0, 1.0, 2.0, 3.0])
    x = np.array([0.0, -1.0, 0.0, 1.0])
    xp = np.array([0.0, 0.0, -1.0, 0.0])
    y = reflection_regulator(times, x, xp)
    assert np.allclose(y.values, [0, 1, 1, 1])
    assert np.allclose(x + y.values, [0, 0, 1, 2])
    assert y.jump_list() == [(1.0, 1.0)]


def test_reflection_of_pure_drift_is_continuous():
    times = np.linspace(0, 2, 21)
    y = reflection_regulator(times, -times, -times)
    assert np.allclose(y.values, times)
    assert not np.any(y.jumps)
    assert np.allclose(y.yc, times)


def test_decompose_recomposes_exactly():
    grid = np.linspace(0, 1, 11)
    y = make_fv({"kind": "table", "times": [0.0, 0.5, 1.0], "values": [0.0, 1.0, 0.5], "jumps": [[0.3, 2.0], [0.7, -1.0]]}, grid)
    (t, yc), jumps = decompose(y)
    rebuilt = yc.copy()
    for tj, dy in jumps:
        rebuilt[t >= tj] += dy
    assert np.allclose(rebuilt, y.values, rtol=0, atol=1e-14)
    assert y.total_variation() == pytest.approx(1.0 + 0.5 + 3.0)


def test_staircase_and_linear():
    grid = np.linspace(0, 1, 5)
    s = make_fv({"kind": "staircase", "size": 0.3, "epochs": [0.1, 0.6]}, grid)
    assert 0.1 in s.times and 0.6 in s.times
    assert s.values[-1] == pytest.approx(0.6)
    assert np.allclose(s.pre_values[s.jumps != 0], [0.0, 0.3])
    lin = make_fv({"kind": "linear", "rate": 2.0}, grid)
    assert np.allclose(lin.values, 2 * grid)


def test_compound_poisson_is_seeded():
    grid = np.linspace(0, 5, 51)
    spec = {"kind": "compound_poisson", "rate": 2.0, "jump": -0.3}
    a = make_fv(spec, grid, 4)
    b = make_fv(spec, grid, 4)
    c = make_fv(spec, grid, 5)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values) or len(a.jump_list()) == len(c.jump_list()) == 0
    assert np.allclose([dy for _, dy in a.jump_list()], -0.3)
    ev = fv_event_times(spec, 5.0, 4)
    assert np.array_equal(ev, np.array([t for t, _ in a.jump_list()]))


def test_bad_specs():
    with pytest.raises(FVSpecError):
        make_fv({"kind": "wiggle"}, [0.0, 1.0])
    with pytest.raises(FVSpecError):
        make_fv({"kind": "table", "times": [0.0, 1.0], "values": [1.0, 1.0]}, [0.0, 1.0])
    with pytest.raises(ValueError):
        FVPath(np.array([0.0, 1.0]), np.array([1.0, 1.0]), np.zeros(2))


def test_zero_and_csv():
    z = zero_fv(np.linspace(0, 1, 3))
    assert z.total_variation() == 0.0
    assert z.to_csv().splitlines()[0] == "time,Yc,cumulative_jumps,Y"


@given(arrays(np.float64, st.integers(2, 60), elements=st.floats(-2, 2)), st.floats(0, 3))
def test_skorokhod_properties(steps, x0):
    # random walk with jumps at every step: left limit equals the previous value
    x = x0 + np.concatenate(([0.0], np.cumsum(steps)))
    xp = np.concatenate(([x0], x[:-1]))
    times = np.arange(len(x), dtype=float)
    y = reflection_regulator(times, x, xp)
    z = x + y.values
    assert np.all(z >= -1e-12)
    assert np.all(np.diff(y.values) >= -1e-12)
    grew = np.flatnonzero(np.diff(y.values) > 1e-12) + 1
    assert np.allclose(z[grew], 0.0, atol=1e-12)
