"""Physical constants, launcher kinematics and pointwise force laws.

Nothing here integrates in time; see :mod:`forcefit.trajectory` for that.
All functions accept scalars or numpy arrays and broadcast.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class BallParams:
    """Launched ball. ``cross_section_area`` is derived from the radius."""

    mass: float = 0.14  # kg
    radius: float = 0.0889  # m, 7-inch diameter
    cross_section_area: float = field(init=False)  # m^2

    def __post_init__(self):
        if not (self.mass > 0 and self.radius > 0):
            raise ValueError(f"ball mass and radius must be positive, got {self.mass}, {self.radius}")
        object.__setattr__(self, "cross_section_area", math.pi * self.radius**2)


@dataclass(frozen=True)
class Environment:
    gravity: float = 9.81  # m/s^2
    air_density: float = 1.225  # kg/m^3, sea-level standard

    def __post_init__(self):
        if not self.gravity > 0:
            raise ValueError(f"gravity must be positive, got {self.gravity}")
        if not self.air_density >= 0:
            raise ValueError(f"air_density must be >= 0, got {self.air_density}")


@dataclass(frozen=True)
class FlywheelGeometry:
    """Double-flywheel launcher.

    The upper wheel is geared to ``upper_speed_ratio`` times the lower wheel's
    angular speed; ``motor_free_speed`` is the lower wheel's speed at motor
    ratio 1.0.
    """

    lower_radius: float = 0.0508  # m, 4-inch wheel
    upper_radius: float = 0.034925  # m, 2.75-inch wheel
    upper_speed_ratio: float = 9 / 16
    motor_free_speed: float = 628.3  # rad/s

    def __post_init__(self):
        if not (self.lower_radius > 0 and self.upper_radius > 0):
            raise ValueError("flywheel radii must be positive")
        if not 0 < self.upper_speed_ratio <= 1:
            raise ValueError(f"upper_speed_ratio must be in (0, 1], got {self.upper_speed_ratio}")
        if not self.motor_free_speed > 0:
            raise ValueError(f"motor_free_speed must be positive, got {self.motor_free_speed}")


@dataclass(frozen=True, order=True)
class CoefficientPair:
    lift: float
    drag: float

    def __post_init__(self):
        if not (self.lift >= 0 and self.drag >= 0):
            raise ValueError(f"coefficients must be non-negative, got ({self.lift}, {self.drag})")

    @classmethod
    def parse(cls, text: str) -> "CoefficientPair":
        """Parse ``"cl,cd"``."""
        parts = text.split(",")
        if len(parts) != 2:
            raise ValueError(f"expected 'cl,cd', got {text!r}")
        return cls(float(parts[0]), float(parts[1]))


@dataclass(frozen=True)
class LaunchConfig:
    distance: float  # m, launcher exit to target base
    motor_ratio: float  # fraction of motor free speed
    angle: float  # degrees above horizontal

    def __post_init__(self):
        check_launch_values(self.distance, self.motor_ratio, self.angle)


def check_launch_values(distance, motor_ratio, angle):
    """Raise ``ValueError`` naming the first field outside its valid range."""
    if not (math.isfinite(distance) and distance > 0):
        raise ValueError(f"distance_m must be > 0, got {distance}")
    if not (math.isfinite(motor_ratio) and 0 <= motor_ratio <= 1):
        raise ValueError(f"motor_ratio must be in [0, 1], got {motor_ratio}")
    if not (math.isfinite(angle) and 0 < angle < 90):
        raise ValueError(f"angle_deg must be in (0, 90), got {angle}")


def _wheel_surface_speeds(geom: FlywheelGeometry, motor_ratio):
    omega_lower = motor_ratio * geom.motor_free_speed
    omega_upper = geom.upper_speed_ratio * omega_lower
    return omega_lower * geom.lower_radius, omega_upper * geom.upper_radius


def initial_velocity(geom: FlywheelGeometry, motor_ratio):
    """Exit speed in m/s: mean of the two wheel surface speeds."""
    lower, upper = _wheel_surface_speeds(geom, motor_ratio)
    return (upper + lower) / 2


def spin_rate(geom: FlywheelGeometry, motor_ratio, ball: BallParams):
    """Ball spin in rotations per second.

    Positive when the lower wheel's surface is faster (backspin, upward lift).
    """
    lower, upper = _wheel_surface_speeds(geom, motor_ratio)
    return (lower - upper) / (2 * math.pi * ball.radius)


def accelerations(ball: BallParams, env: Environment, coeffs: CoefficientPair, speed, spin):
    """Return ``(a_lift, a_drag, a_gravity)`` magnitudes in m/s^2.

    Lift uses F = C_l * (4/3) * (4 pi^2 r^3 s rho v) with the 4/3 applied to
    the whole bracket; drag is the usual (C_d / 2) A v^2 rho.
    """
    a_lift, a_drag = aero_accelerations(ball, env, coeffs.lift, coeffs.drag, speed, spin)
    a_gravity = env.gravity
    if isinstance(a_lift, np.ndarray):
        a_gravity = np.full(a_lift.shape, env.gravity)
    return a_lift, a_drag, a_gravity


def aero_accelerations(ball: BallParams, env: Environment, lift, drag, speed, spin):
    """Lift and drag accelerations with coefficients given as scalars or arrays."""
    rho = env.air_density
    a_lift = lift * (4 / 3) * (4 * math.pi**2 * ball.radius**3 * spin * rho * speed) / ball.mass
    a_drag = (drag / 2) * ball.cross_section_area * (speed * speed) * rho / ball.mass
    return a_lift, a_drag
