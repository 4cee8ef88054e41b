"""Measurement models, disturbance torque, and actuator saturation.

Noise amounts are configured in degrees (matching how star tracker and gyro
datasheets quote them) and converted to radians internally.  All draws come
from the caller's Generator so a scenario's entire random history is fixed by
one seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quat import Array, ZERO_TOL, from_axis_angle, to_axis_angle

DEG = np.pi / 180.0


@dataclass(frozen=True)
class NoiseConfig:
    """Sensor error magnitudes; enabled=False zeroes all of them.

    attitude_cone_deg   half-angle of the eigenaxis error cone (star tracker)
    gyro_sigma_deg_s    per-axis white noise std dev on the measured rate
    bias_walk_deg_s2    per-axis random-walk intensity of the gyro bias
    """

    enabled: bool = True
    attitude_cone_deg: float = 0.01
    gyro_sigma_deg_s: float = 0.01
    bias_walk_deg_s2: float = 0.01

    def __post_init__(self) -> None:
        if min(self.attitude_cone_deg, self.gyro_sigma_deg_s, self.bias_walk_deg_s2) < 0.0:
            raise ValueError("noise magnitudes must be nonnegative")

    @property
    def attitude_cone_rad(self) -> float:
        return self.attitude_cone_deg * DEG if self.enabled else 0.0

    @property
    def gyro_sigma_rad_s(self) -> float:
        return self.gyro_sigma_deg_s * DEG if self.enabled else 0.0

    @property
    def bias_walk_rad_s2(self) -> float:
        return self.bias_walk_deg_s2 * DEG if self.enabled else 0.0


@dataclass(frozen=True)
class DisturbanceConfig:
    """Slow sinusoidal disturbance torque d(t) = A*[cos(ft), cos(ft), -sin(ft)]."""

    enabled: bool = True
    amplitude_nm: float = 0.02
    frequency_rad_s: float = 0.1


def disturbance_torque(cfg: DisturbanceConfig, t: float) -> Array:
    if not cfg.enabled:
        return np.zeros(3)
    p = cfg.frequency_rad_s * t
    return cfg.amplitude_nm * np.array([np.cos(p), np.cos(p), -np.sin(p)])


def measure_attitude(q_true: Array, cone_rad: float, rng: np.random.Generator) -> Array:
    """Star-tracker model: tilt the eigenaxis inside a cone, keep the angle.

    The tilt angle is uniform on [0, cone_rad] and the tilt direction uniform
    around the axis; the rotation angle (hence the scalar part) is unchanged,
    so the output is exactly unit norm.  Two variates are always consumed to
    keep the draw sequence independent of the noise amount.
    """
    tilt = cone_rad * rng.uniform()
    azimuth = rng.uniform(0.0, 2.0 * np.pi)
    qv = q_true[1:]
    s = float(np.linalg.norm(qv))
    if s <= ZERO_TOL or tilt == 0.0:
        return np.asarray(q_true, dtype=float).copy()
    axis, angle = to_axis_angle(q_true)
    # orthonormal pad around the eigenaxis
    helper = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    tilted = (
        np.cos(tilt) * axis + np.sin(tilt) * (np.cos(azimuth) * e1 + np.sin(azimuth) * e2)
    )
    return from_axis_angle(tilted, angle)


def measure_gyro(
    w_true: Array, bias: Array, sigma_rad_s: float, rng: np.random.Generator
) -> Array:
    """Rate gyro model: w + b + v with v zero-mean white, std sigma per axis."""
    return w_true + bias + sigma_rad_s * rng.standard_normal(3)


def bias_step(
    bias: Array, walk_rad_s2: float, dt: float, rng: np.random.Generator
) -> Array:
    """Advance the gyro bias one step of its random walk: b + w*dt."""
    return bias + walk_rad_s2 * rng.standard_normal(3) * dt


def saturate(torque: Array, limit_nm: float) -> Array:
    """Componentwise clip of the commanded torque to +-limit_nm."""
    return np.clip(torque, -limit_nm, limit_nm)
