import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from forcefit.physics import (
    BallParams,
    CoefficientPair,
    Environment,
    FlywheelGeometry,
    LaunchConfig,
    accelerations,
    initial_velocity,
    spin_rate,
)

SLOW_GEOM = FlywheelGeometry(motor_free_speed=100.0)
BALL = BallParams()
ENV = Environment()

ratios = st.floats(0.0, 1.0)


def test_initial_velocity_hand_value():
    # (100 * 0.0508 + 56.25 * 0.034925) / 2
    assert initial_velocity(SLOW_GEOM, 1.0) == pytest.approx(3.522265625, abs=1e-12)


def test_spin_rate_hand_value():
    # (5.08 - 1.96453125) / (2 pi 0.0889), evaluated in 30-digit decimal
    assert spin_rate(SLOW_GEOM, 1.0, BALL) == pytest.approx(5.5777, rel=1e-4)
    assert spin_rate(SLOW_GEOM, 1.0, BALL) == pytest.approx(5.577528139604368, rel=1e-13)


def test_zero_motor_ratio_gives_rest():
    assert initial_velocity(SLOW_GEOM, 0.0) == 0.0
    assert spin_rate(SLOW_GEOM, 0.0, BALL) == 0.0


def test_equal_surface_speeds():
    geom = FlywheelGeometry(lower_radius=0.05, upper_radius=0.1, upper_speed_ratio=0.5, motor_free_speed=80.0)
    assert initial_velocity(geom, 1.0) == pytest.approx(80.0 * 0.05, abs=1e-15)
    assert spin_rate(geom, 1.0, BALL) == 0.0


@given(ratios, ratios)
def test_kinematics_linear_in_motor_ratio(a, b):
    for f in (lambda m: initial_velocity(SLOW_GEOM, m), lambda m: spin_rate(SLOW_GEOM, m, BALL)):
        assert f(a + b) == pytest.approx(f(a) + f(b), rel=1e-12, abs=1e-12)


def test_accelerations_match_decimal_oracle():
    # 30-digit decimal evaluation of the lift and drag force laws, divided by mass
    a_lift, a_drag, a_g = accelerations(BALL, ENV, CoefficientPair(0.06, 0.91), 10.0, 5.0)
    assert a_lift == pytest.approx(0.970807368449436, rel=1e-13)
    assert a_drag == pytest.approx(9.884912840668873, rel=1e-13)
    assert a_g == 9.81


@pytest.mark.parametrize("coeffs, speed", [(CoefficientPair(0, 0), 12.0), (CoefficientPair(0.06, 0.91), 0.0)])
def test_accelerations_vanish(coeffs, speed):
    assert accelerations(BALL, ENV, coeffs, speed, 4.0) == (0.0, 0.0, 9.81)


@given(st.floats(0.1, 40.0), st.floats(0.0, 3.0))
def test_drag_quadratic_in_speed(v, cd):
    _, d1, _ = accelerations(BALL, ENV, CoefficientPair(0.0, cd), v, 0.0)
    _, d2, _ = accelerations(BALL, ENV, CoefficientPair(0.0, cd), 2 * v, 0.0)
    assert d2 == pytest.approx(4 * d1, rel=1e-12, abs=1e-300)


@given(st.floats(0.0, 40.0), st.floats(0.0, 20.0), st.floats(0.0, 2.0))
def test_lift_linear_in_speed_and_spin(v, s, cl):
    base, _, _ = accelerations(BALL, ENV, CoefficientPair(cl, 0.0), v, s)
    assert accelerations(BALL, ENV, CoefficientPair(cl, 0.0), 2 * v, s)[0] == pytest.approx(2 * base, rel=1e-12, abs=1e-300)
    assert accelerations(BALL, ENV, CoefficientPair(cl, 0.0), v, 3 * s)[0] == pytest.approx(3 * base, rel=1e-12, abs=1e-300)


def test_accelerations_broadcast_over_arrays():
    speeds = np.array([0.0, 5.0, 10.0])
    a_l, a_d, a_g = accelerations(BALL, ENV, CoefficientPair(0.06, 0.91), speeds, 5.0)
    assert a_l.shape == a_d.shape == a_g.shape == (3,)
    assert a_d[2] == pytest.approx(9.884912840668873, rel=1e-13)


def test_cross_section_area_derived():
    assert BALL.cross_section_area == pytest.approx(math.pi * 0.0889**2)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(distance=0.0, motor_ratio=0.5, angle=45),
        dict(distance=5.0, motor_ratio=1.5, angle=45),
        dict(distance=5.0, motor_ratio=0.5, angle=95),
        dict(distance=float("nan"), motor_ratio=0.5, angle=45),
    ],
)
def test_launch_config_rejects_out_of_range(kwargs):
    with pytest.raises(ValueError):
        LaunchConfig(**kwargs)


def test_invalid_physical_params():
    with pytest.raises(ValueError):
        BallParams(mass=0)
    with pytest.raises(ValueError):
        Environment(gravity=-1)
    with pytest.raises(ValueError):
        FlywheelGeometry(upper_speed_ratio=0)
    with pytest.raises(ValueError):
        CoefficientPair(-0.1, 0.5)


def test_coefficient_pair_parse():
    assert CoefficientPair.parse("0.06,0.91") == CoefficientPair(0.06, 0.91)
    with pytest.raises(ValueError):
        CoefficientPair.parse("0.06")
