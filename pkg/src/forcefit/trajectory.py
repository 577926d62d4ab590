"""Planar trajectory integration and target scoring.

The integrator is written once over numpy arrays and drives both the single
trajectory path (:func:`simulate`, which records every state) and the batched
path used by estimation and data generation (:func:`simulate_outcomes`).
Every step uses only IEEE-exact elementwise operations, so a trajectory is
bit-identical no matter which batch or worker it is computed in.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .physics import (
    BallParams,
    CoefficientPair,
    Environment,
    FlywheelGeometry,
    LaunchConfig,
    aero_accelerations,
    initial_velocity,
    spin_rate,
)

METHODS = ("euler", "rk4")

# Largest batch integrated at once; bounds memory, does not change results.
_CHUNK = 65536


class Termination(enum.IntEnum):
    REACHED_TARGET_PLANE = 0
    FELL_BELOW_FLOOR = 1
    TIMED_OUT = 2
    STALLED_BACKWARD = 3

    @property
    def label(self) -> str:
        return {
            0: "ReachedTargetPlane",
            1: "FellBelowFloor",
            2: "TimedOut",
            3: "StalledBackward",
        }[int(self)]


@dataclass(frozen=True)
class TargetSpec:
    """Scoring target; heights are measured from the launcher exit point."""

    center_height: float = 2.4384 - 0.6  # m
    three_pt_halfwidth: float = 0.07  # m
    two_pt_halfwidth: float = 0.35  # m

    def __post_init__(self):
        if not 0 < self.three_pt_halfwidth < self.two_pt_halfwidth:
            raise ValueError("need 0 < three_pt_halfwidth < two_pt_halfwidth")


@dataclass(frozen=True)
class Outcome:
    hit2: bool
    hit3: bool

    def __post_init__(self):
        if self.hit3 and not self.hit2:
            raise ValueError("outcome (hit2=0, hit3=1) violates 3pt => 2pt containment")

    def as_tuple(self) -> tuple[int, int]:
        return int(self.hit2), int(self.hit3)


@dataclass(frozen=True)
class PhysicsContext:
    """Everything besides the launch config and coefficients that a shot needs."""

    ball: BallParams = field(default_factory=BallParams)
    env: Environment = field(default_factory=Environment)
    geom: FlywheelGeometry = field(default_factory=FlywheelGeometry)
    target: TargetSpec = field(default_factory=TargetSpec)
    launch_height: float = 0.6  # m above the floor
    dt: float = 1e-3  # s
    t_max: float = 5.0  # s
    method: str = "euler"

    def __post_init__(self):
        _check_step(self.dt, self.t_max)
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not (math.isfinite(self.launch_height) and self.launch_height >= 0):
            raise ValueError(f"launch_height must be >= 0, got {self.launch_height}")

    @property
    def floor_y(self) -> float:
        return -self.launch_height


def _check_step(dt, t_max):
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be a positive finite number, got {dt}")
    if not (math.isfinite(t_max) and t_max > 0):
        raise ValueError(f"t_max must be a positive finite number, got {t_max}")


@dataclass(frozen=True)
class TrajectoryState:
    t: float
    x: float
    y: float
    vx: float
    vy: float


class Trajectory:
    """Recorded states (columns t, x, y, vx, vy) plus the termination reason."""

    columns = ("t", "x", "y", "vx", "vy")

    def __init__(self, data: np.ndarray, terminated_by: Termination):
        self.data = np.asarray(data, dtype=float)
        self.terminated_by = Termination(terminated_by)

    def __len__(self):
        return len(self.data)

    def __getitem__(self, i) -> TrajectoryState:
        return TrajectoryState(*map(float, self.data[i]))

    @property
    def states(self) -> list[TrajectoryState]:
        return [TrajectoryState(*row) for row in self.data.tolist()]

    def __getattr__(self, name):
        if name in self.columns:
            return self.data[:, self.columns.index(name)]
        raise AttributeError(name)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self.data.tolist():
                writer.writerow([repr(v) for v in row])


def _derivatives(vx, vy, lift, drag, spin, ball, env):
    speed = np.sqrt(vx * vx + vy * vy)
    a_lift, a_drag = aero_accelerations(ball, env, lift, drag, speed, spin)
    # cos/sin of the velocity angle; a ball at rest feels only gravity.
    moving = speed > 0
    safe = np.where(moving, speed, 1.0)
    cos = np.where(moving, vx / safe, 1.0)
    sin = np.where(moving, vy / safe, 0.0)
    ax = -(a_lift * sin + a_drag * cos)
    ay = a_lift * cos - a_drag * sin - env.gravity
    return ax, ay


def _step(x, y, vx, vy, lift, drag, spin, ball, env, dt, method):
    if method == "euler":
        ax, ay = _derivatives(vx, vy, lift, drag, spin, ball, env)
        return x + vx * dt, y + vy * dt, vx + ax * dt, vy + ay * dt
    h2 = dt / 2
    ax1, ay1 = _derivatives(vx, vy, lift, drag, spin, ball, env)
    vx2, vy2 = vx + ax1 * h2, vy + ay1 * h2
    ax2, ay2 = _derivatives(vx2, vy2, lift, drag, spin, ball, env)
    vx3, vy3 = vx + ax2 * h2, vy + ay2 * h2
    ax3, ay3 = _derivatives(vx3, vy3, lift, drag, spin, ball, env)
    vx4, vy4 = vx + ax3 * dt, vy + ay3 * dt
    ax4, ay4 = _derivatives(vx4, vy4, lift, drag, spin, ball, env)
    w = dt / 6
    return (
        x + w * (vx + 2 * vx2 + 2 * vx3 + vx4),
        y + w * (vy + 2 * vy2 + 2 * vy3 + vy4),
        vx + w * (ax1 + 2 * ax2 + 2 * ax3 + ax4),
        vy + w * (ay1 + 2 * ay2 + 2 * ay3 + ay4),
    )


def plane_height(x0, y0, x1, y1, distance):
    """Height where the segment (x0, y0)-(x1, y1) crosses ``x = distance``."""
    return y0 + (distance - x0) * (y1 - y0) / (x1 - x0)


def _integrate(vx0, vy0, spin, lift, drag, distance, ctx: PhysicsContext, record=False):
    """Integrate a batch of shots until each one terminates.

    Returns ``(codes, y_plane, recorded)``; ``y_plane`` is NaN unless the shot
    reached its target plane. ``recorded`` holds the state rows of shot 0 when
    ``record`` is set.
    """
    n = len(vx0)
    codes = np.full(n, -1, dtype=np.int8)
    y_plane = np.full(n, np.nan)
    idx = np.arange(n)
    x = np.zeros(n)
    y = np.zeros(n)
    vx, vy = vx0.copy(), vy0.copy()
    px, py = x, y
    spin, lift, drag, distance = spin.copy(), lift.copy(), drag.copy(), distance.copy()
    ball, env, dt, method, floor = ctx.ball, ctx.env, ctx.dt, ctx.method, ctx.floor_y
    rows = []
    k = 0
    while True:
        t = k * dt
        if record:
            rows.append((t, float(x[0]), float(y[0]), float(vx[0]), float(vy[0])))
        code = np.full(len(idx), -1, dtype=np.int8)
        code[vx <= 0] = Termination.STALLED_BACKWARD
        if t >= ctx.t_max:
            code[:] = Termination.TIMED_OUT
        code[y < floor] = Termination.FELL_BELOW_FLOOR
        reached = x >= distance
        code[reached] = Termination.REACHED_TARGET_PLANE
        done = code >= 0
        if done.any():
            codes[idx[done]] = code[done]
            if reached.any():
                y_plane[idx[reached]] = plane_height(
                    px[reached], py[reached], x[reached], y[reached], distance[reached]
                )
            keep = ~done
            if not keep.any():
                break
            idx = idx[keep]
            x, y, vx, vy = x[keep], y[keep], vx[keep], vy[keep]
            spin, lift, drag, distance = spin[keep], lift[keep], drag[keep], distance[keep]
        px, py = x, y
        x, y, vx, vy = _step(x, y, vx, vy, lift, drag, spin, ball, env, dt, method)
        k += 1
    return codes, y_plane, rows


def _launch_components(v0, angle_deg):
    # math.cos/sin per element: numpy's vectorised transcendental kernels are
    # not guaranteed to agree bit-for-bit across array lengths.
    cos = np.array([math.cos(math.radians(a)) for a in np.ravel(angle_deg)])
    sin = np.array([math.sin(math.radians(a)) for a in np.ravel(angle_deg)])
    return v0 * cos, v0 * sin


def integrate(
    v0: float,
    angle: float,
    spin: float,
    coeffs: CoefficientPair,
    distance: float,
    ctx: PhysicsContext,
) -> Trajectory:
    """Simulate one shot from an explicit exit speed (m/s) and spin (rot/s)."""
    for name, value in (("v0", v0), ("angle", angle), ("spin", spin), ("distance", distance)):
        if not math.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value}")
    if v0 < 0:
        raise ValueError(f"v0 must be >= 0, got {v0}")
    vx0, vy0 = _launch_components(np.array([float(v0)]), np.array([float(angle)]))
    codes, _, rows = _integrate(
        vx0,
        vy0,
        np.array([float(spin)]),
        np.array([float(coeffs.lift)]),
        np.array([float(coeffs.drag)]),
        np.array([float(distance)]),
        ctx,
        record=True,
    )
    return Trajectory(np.array(rows), Termination(int(codes[0])))


def simulate(config: LaunchConfig, coeffs: CoefficientPair, ctx: PhysicsContext | None = None) -> Trajectory:
    """Simulate one launch configuration through the flywheel model."""
    ctx = ctx or PhysicsContext()
    v0 = initial_velocity(ctx.geom, config.motor_ratio)
    spin = spin_rate(ctx.geom, config.motor_ratio, ctx.ball)
    return integrate(v0, config.angle, spin, coeffs, config.distance, ctx)


def target_height(traj: Trajectory, distance: float) -> float | None:
    """Height where the trajectory crosses x = distance (linear in the crossing step); None if it never does."""
    if traj.terminated_by != Termination.REACHED_TARGET_PLANE:
        return None
    if len(traj) < 2:
        return float(traj.data[-1, 2])
    (_, x0, y0, _, _), (_, x1, y1, _, _) = traj.data[-2:].tolist()
    return plane_height(x0, y0, x1, y1, distance)


def deviation(traj: Trajectory, config: LaunchConfig, target: TargetSpec) -> float:
    """Vertical miss from the target center at the target plane; inf if never reached."""
    y_d = target_height(traj, config.distance)
    if y_d is None:
        return math.inf
    return abs(y_d - target.center_height)


def score(traj: Trajectory, config: LaunchConfig, target: TargetSpec) -> Outcome:
    dev = deviation(traj, config, target)
    hit3 = dev <= target.three_pt_halfwidth
    return Outcome(hit2=hit3 or dev <= target.two_pt_halfwidth, hit3=hit3)


def score_deviations(dev, target: TargetSpec):
    """Vectorised :func:`score` on an array of deviations; returns ``(hit2, hit3)``."""
    dev = np.asarray(dev)
    hit3 = dev <= target.three_pt_halfwidth
    hit2 = hit3 | (dev <= target.two_pt_halfwidth)
    return hit2, hit3


def plane_heights(distance, motor_ratio, angle, lift, drag, ctx: PhysicsContext):
    """Batched simulate for broadcastable arrays of shots.

    Returns ``(codes, heights)`` as flat arrays, where ``heights`` is the
    height at each shot's target plane (NaN for shots that never reach it).
    """
    distance, motor_ratio, angle, lift, drag = (
        np.ravel(a).astype(float) for a in np.broadcast_arrays(distance, motor_ratio, angle, lift, drag)
    )
    n = len(distance)
    codes = np.empty(n, dtype=np.int8)
    heights = np.empty(n)
    for start in range(0, n, _CHUNK):
        sl = slice(start, start + _CHUNK)
        v0 = initial_velocity(ctx.geom, motor_ratio[sl])
        spin = spin_rate(ctx.geom, motor_ratio[sl], ctx.ball)
        vx0, vy0 = _launch_components(v0, angle[sl])
        codes[sl], heights[sl], _ = _integrate(vx0, vy0, spin, lift[sl], drag[sl], distance[sl], ctx)
    return codes, heights


def simulate_outcomes(distance, motor_ratio, angle, lift, drag, ctx: PhysicsContext):
    """Like :func:`plane_heights` but returns ``(codes, deviations)``; deviation is inf off-plane."""
    codes, heights = plane_heights(distance, motor_ratio, angle, lift, drag, ctx)
    dev = np.abs(heights - ctx.target.center_height)
    return codes, np.where(np.isnan(dev), np.inf, dev)


def landing_range(traj: Trajectory, level: float = 0.0) -> float:
    """Horizontal distance where the trajectory descends through ``level``.

    Uses cubic Hermite interpolation over the straddling step (states carry
    their own velocities), which is exact for a vacuum parabola.
    """
    y = traj.y
    below = np.nonzero((y[1:] < level) & (y[:-1] >= level))[0]
    if len(below) == 0:
        raise ValueError(f"trajectory never descends through y={level}")
    t0, x0, y0, vx0, vy0 = traj.data[below[0]]
    t1, x1, y1, vx1, vy1 = traj.data[below[0] + 1]
    h = t1 - t0

    def hermite(s, p0, m0, p1, m1):
        s2, s3 = s * s, s * s * s
        return (
            (2 * s3 - 3 * s2 + 1) * p0
            + (s3 - 2 * s2 + s) * h * m0
            + (-2 * s3 + 3 * s2) * p1
            + (s3 - s2) * h * m1
        )

    s = brentq(lambda s: hermite(s, y0, vy0, y1, vy1) - level, 0.0, 1.0, xtol=1e-15, rtol=1e-15)
    return float(hermite(s, x0, vx0, x1, vx1))

