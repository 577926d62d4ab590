"""Flat ``key=value`` config files for the physical constants.

Blank lines and ``#`` comments are ignored. Unknown keys are rejected so a
typo cannot silently fall back to a default.
"""
from __future__ import annotations

import os
from pathlib import Path

from .physics import BallParams, Environment, FlywheelGeometry
from .trajectory import PhysicsContext, TargetSpec

ENV_VAR = "FCE_CONFIG"
DEFAULT_PATH = "forcefit.cfg"

DEFAULTS = {
    "ball.mass_kg": 0.14,
    "ball.radius_m": 0.0889,
    "env.gravity": 9.81,
    "env.air_density": 1.225,
    "flywheel.lower_radius_m": 0.0508,
    "flywheel.upper_radius_m": 0.034925,
    "flywheel.upper_speed_ratio": 9 / 16,
    "flywheel.motor_free_speed_rad_s": 628.3,
    "launch.height_m": 0.6,
    "target.height_m": 2.4384,
    "target.three_pt_halfwidth_m": 0.07,
    "target.two_pt_halfwidth_m": 0.35,
    "sim.dt_s": 1e-3,
    "sim.t_max_s": 5.0,
    "sim.method": "euler",
}


class ConfigError(ValueError):
    pass


def parse_config(text: str, source: str = "<string>") -> dict:
    values = dict(DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if isinstance(DEFAULTS[key], str):
            values[key] = value
        else:
            try:
                values[key] = float(value)
            except ValueError:
                raise ConfigError(f"{source}:{lineno}: {key} expects a number, got {value!r}") from None
    return values


def context_from_values(values: dict) -> PhysicsContext:
    try:
        return PhysicsContext(
            ball=BallParams(values["ball.mass_kg"], values["ball.radius_m"]),
            env=Environment(values["env.gravity"], values["env.air_density"]),
            geom=FlywheelGeometry(
                values["flywheel.lower_radius_m"],
                values["flywheel.upper_radius_m"],
                values["flywheel.upper_speed_ratio"],
                values["flywheel.motor_free_speed_rad_s"],
            ),
            target=TargetSpec(
                values["target.height_m"] - values["launch.height_m"],
                values["target.three_pt_halfwidth_m"],
                values["target.two_pt_halfwidth_m"],
            ),
            launch_height=values["launch.height_m"],
            dt=values["sim.dt_s"],
            t_max=values["sim.t_max_s"],
            method=values["sim.method"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None) -> tuple[PhysicsContext, dict]:
    """Load ``path``, else ``$FCE_CONFIG``, else built-in defaults.

    An explicitly named file (argument or environment) must exist.
    """
    path = path or os.environ.get(ENV_VAR)
    if path is None:
        values = dict(DEFAULTS)
    else:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        values = parse_config(path.read_text(), str(path))
    return context_from_values(values), values


def format_config(values: dict) -> str:
    lines = []
    for key in DEFAULTS:
        value = values[key]
        lines.append(f"{key}={value}" if isinstance(value, str) else f"{key}={value!r}")
    return "\n".join(lines) + "\n"
