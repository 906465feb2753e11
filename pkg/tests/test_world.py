import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from goaltrack.world import (
    TargetState,
    ValueParams,
    VelocityCommand,
    as_position,
    distance,
    sign,
    step_target,
    step_uav,
    value,
    value_array,
)

coord = st.floats(-1e4, 1e4, allow_nan=False)
point = st.tuples(coord, coord, st.floats(0, 1e3))


def test_distance_examples():
    assert distance((70, 70, 50), (69, 70, 50)) == 1.0
    assert distance((3, 1, 2), (3, 1, 2)) == 0.0
    assert distance((0, 0, 0), (0, 3, 4)) == 5.0


@given(point, point, point)
def test_distance_metric_properties(a, b, c):
    assert distance(a, a) == 0.0
    assert distance(a, b) == distance(b, a)
    assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9


@pytest.mark.parametrize("x, expected", [(0.0, 1), (3.2, 1), (-0.001, -1)])
def test_sign(x, expected):
    assert sign(x) == expected


def test_value_examples():
    vp = ValueParams(d_th=2.0)
    assert value(2.0, vp) == 1.0
    assert value(0.0, vp) == 1.0
    assert value(3.0, vp) == pytest.approx(-0.6321205588285577, abs=1e-12)
    assert abs(value(22.0, vp) + 1.0) < 1e-8


def test_value_jump_at_threshold():
    vp = ValueParams(d_th=2.0)
    assert value(2.0, vp) == 1.0
    assert value(2.0 + 1e-9, vp) < 1e-6


@given(st.floats(0.1, 50), st.floats(0, 100))
def test_value_range(d_th, d):
    v = value(d, ValueParams(d_th))
    if d <= d_th:
        assert v == 1.0
    else:
        assert -1.0 <= v < 0.0


@given(st.floats(0.1, 10), st.floats(1e-3, 20), st.floats(1e-3, 5))
def test_value_strictly_decreasing_outside(d_th, gap, extra):
    vp = ValueParams(d_th)
    d1 = d_th + gap
    d2 = d1 + extra
    if math.exp(-gap) - math.exp(-gap - extra) > 1e-12:
        assert value(d2, vp) < value(d1, vp)


def test_value_array_matches_scalar():
    d = np.linspace(0, 10, 101)
    vp = ValueParams(2.5)
    np.testing.assert_array_equal(value_array(d, 2.5), [value(x, vp) for x in d])


def test_value_rejects_negative_distance():
    with pytest.raises(ValueError):
        value(-1.0, ValueParams())
    with pytest.raises(ValueError):
        ValueParams(0.0)


def test_step_uav_examples():
    cmd = VelocityCommand(2000.0, 0.0, 0.0, 1e-3)
    np.testing.assert_allclose(step_uav((0, 0, 50), cmd, 0.001), (2.0, 0.0, 50.0), atol=1e-15)
    still = VelocityCommand(0.0, 0.0, 0.0, 1e-3)
    np.testing.assert_array_equal(step_uav((1, 2, 3), still, 1e-3), (1, 2, 3))
    np.testing.assert_array_equal(step_uav((1, 2, 3), cmd, 0.0), (1, 2, 3))
    with pytest.raises(ValueError):
        step_uav((0, 0, 0), cmd, 2e-3)


@given(st.tuples(*(st.sampled_from(range(-2000, 2001, 500)),) * 2), st.integers(1, 50))
def test_step_uav_substeps_compose(v, n_sub):
    T = 1e-3
    cmd = VelocityCommand(float(v[0]), float(v[1]), 0.0, T)
    p0 = np.array([69.0, 70.0, 50.0])
    p = p0
    for _ in range(n_sub):
        p = step_uav(p, cmd, T / n_sub)
    np.testing.assert_allclose(p, step_uav(p0, cmd, T), rtol=0, atol=1e-12)


def test_step_target_examples():
    s = TargetState(np.array([1.0, 2.0, 50.0]), heading=0.3, speed=0.0)
    np.testing.assert_array_equal(step_target(s, 1e-3).position, s.position)
    s = TargetState(np.array([70.0, 70.0, 50.0]), heading=0.0, speed=1000.0)
    out = step_target(s, 0.001)
    np.testing.assert_allclose(out.position, (71.0, 70.0, 50.0), atol=1e-12)


@settings(max_examples=50)
@given(st.floats(0, 2 * math.pi), st.floats(0, 3000), st.floats(0, 1e-3), st.integers(0, 2**31))
def test_step_target_keeps_altitude_and_speed(heading, speed, dt, seed):
    s = TargetState(np.array([5.0, -3.0, 42.0]), heading, speed)
    out = step_target(s, dt, np.random.default_rng(seed), math.pi / 4)
    assert out.position[2] == 42.0
    assert out.speed == speed
    assert abs(out.heading - heading) <= math.pi / 4
    assert np.hypot(*(out.position[:2] - s.position[:2])) == pytest.approx(speed * dt, abs=1e-9)


def test_as_position_validation():
    with pytest.raises(ValueError):
        as_position((0, 0, -1))
    with pytest.raises(ValueError):
        as_position((0, np.inf, 1))
    with pytest.raises(ValueError):
        as_position((0, 1))
    with pytest.raises(ValueError):
        TargetState(np.zeros(3), 0.0, -1.0)
