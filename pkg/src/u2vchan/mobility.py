"""Trajectories, headings and posture schedules for the UAV, vehicle and scatterers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geometry import (
    PostureAngles,
    SphericalAngles,
    as_vec3,
    posture_matrices,
    unit_vectors,
    velocity_rotation_matrices,
)

DEFAULT_GRID_STEP = 1e-3
_TIME_TOL = 1e-9


@dataclass(frozen=True)
class Schedule:
    """Piecewise-linear function of time through ``(times[i], values[i])`` knots.

    The first knot must sit at ``t = 0``; the last value is held afterwards.
    """

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        values = tuple(float(v) for v in self.values)
        if not times or len(times) != len(values):
            raise ValueError("schedule needs matching, non-empty times and values")
        if times[0] != 0.0:
            raise ValueError("schedule must start at t = 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("schedule knot times must be strictly increasing")
        if not all(math.isfinite(v) for v in times + values):
            raise ValueError("schedule contains non-finite entries")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, value: float) -> "Schedule":
        return cls((0.0,), (value,))

    @classmethod
    def ramp(cls, start: float, stop: float, t0: float, t1: float, base: float = 0.0) -> "Schedule":
        """Hold ``base`` until ``t0``, then move linearly to ``stop`` at ``t1``.

        ``start`` is the value at ``t0``; when ``t0 == 0`` the base is ignored.
        """
        if t0 == 0.0:
            return cls((0.0, t1), (start, stop))
        return cls((0.0, t0, t1), (base, start, stop))

    def __call__(self, t):
        return np.interp(t, self.times, self.values)


@dataclass(frozen=True)
class KinematicState:
    position: np.ndarray
    velocity: np.ndarray
    heading: SphericalAngles
    posture: PostureAngles
    time: float


@dataclass(frozen=True)
class MobilityProfile:
    """Time-parameterised motion of one terminal.

    Velocity is ``speed(t) * u(azimuth(t), elevation(t))``; positions are the
    trapezoidal integral of velocity on a uniform grid of step ``grid_step``.
    Posture schedules only matter for the UAV; they default to zero.
    """

    initial_position: np.ndarray
    speed: Schedule
    azimuth: Schedule
    elevation: Schedule = field(default_factory=lambda: Schedule.constant(0.0))
    roll: Schedule = field(default_factory=lambda: Schedule.constant(0.0))
    yaw: Schedule = field(default_factory=lambda: Schedule.constant(0.0))
    pitch: Schedule = field(default_factory=lambda: Schedule.constant(0.0))
    duration: float = 1.0
    grid_step: float = DEFAULT_GRID_STEP

    def __post_init__(self):
        object.__setattr__(self, "initial_position", as_vec3(self.initial_position))
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if not self.grid_step > 0:
            raise ValueError("grid_step must be positive")
        if min(self.speed.values) < 0:
            raise ValueError("speed must be non-negative")

    @classmethod
    def constant_velocity(cls, position, speed: float, azimuth: float,
                          elevation: float = 0.0, duration: float = 1.0, **kw) -> "MobilityProfile":
        return cls(
            initial_position=position,
            speed=Schedule.constant(speed),
            azimuth=Schedule.constant(azimuth),
            elevation=Schedule.constant(elevation),
            duration=duration,
            **kw,
        )

    def is_static(self) -> bool:
        return max(self.speed.values) == 0.0

    def velocities(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        return self.speed(times)[..., None] * unit_vectors(self.azimuth(times), self.elevation(times))

    @cached_property
    def _grid(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = int(math.ceil(self.duration / self.grid_step - 1e-9))
        grid = np.arange(n + 1) * self.grid_step
        vel = self.velocities(grid)
        steps = 0.5 * (vel[1:] + vel[:-1]) * self.grid_step
        pos = np.concatenate([np.zeros((1, 3)), np.cumsum(steps, axis=0)]) + self.initial_position
        return grid, vel, pos

    def positions(self, times) -> np.ndarray:
        """Trapezoid-integrated positions at arbitrary ``times`` in ``[0, duration]``."""
        times = np.asarray(times, dtype=float)
        self._check_times(times)
        if self.is_static():
            return np.broadcast_to(self.initial_position, times.shape + (3,)).copy()
        grid, vel, pos = self._grid
        idx = np.clip(np.floor(times / self.grid_step + 1e-9).astype(int), 0, len(grid) - 1)
        frac = times - grid[idx]
        v_t = self.velocities(times)
        return pos[idx] + 0.5 * (vel[idx] + v_t) * frac[..., None]

    def posture_rotations(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        return posture_matrices(self.roll(times), self.yaw(times), self.pitch(times))

    def heading_rotations(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        return velocity_rotation_matrices(self.azimuth(times), self.elevation(times))

    def has_posture(self) -> bool:
        return any(any(v != 0.0 for v in s.values) for s in (self.roll, self.yaw, self.pitch))

    def without_posture(self) -> "MobilityProfile":
        zero = Schedule.constant(0.0)
        return MobilityProfile(self.initial_position, self.speed, self.azimuth, self.elevation,
                               zero, zero, zero, self.duration, self.grid_step)

    def _check_times(self, times: np.ndarray) -> None:
        if times.size and (times.min() < -_TIME_TOL or times.max() > self.duration + _TIME_TOL):
            raise ValueError(
                f"time outside profile window [0, {self.duration}]: "
                f"[{times.min()}, {times.max()}]"
            )


def sample_state(profile: MobilityProfile, t: float) -> KinematicState:
    """Kinematic snapshot of ``profile`` at time ``t``."""
    t = float(t)
    profile._check_times(np.array([t]))
    t = min(max(t, 0.0), profile.duration)
    heading = SphericalAngles(float(profile.azimuth(t)), float(profile.elevation(t)))
    roll, yaw, pitch = float(profile.roll(t)), float(profile.yaw(t)), float(profile.pitch(t))
    return KinematicState(
        position=profile.positions(np.array([t]))[0],
        velocity=profile.velocities(np.array([t]))[0],
        heading=heading,
        posture=PostureAngles(roll, yaw % (2 * math.pi), pitch),
        time=t,
    )


# Scenario presets -------------------------------------------------------------

PRESET_NAMES = ("paper-fig3", "paper-fig4", "paper-fig5", "paper-fig6", "paper-fig7", "paper-fig8",
                "static", "straight-line")

# Figures 3 to 6 share one flight; the extra names are aliases.
PRESET_ALIASES = {"paper-fig4": "paper-fig3", "paper-fig5": "paper-fig3", "paper-fig6": "paper-fig3"}

PRESET_CARRIER_HZ = {
    "paper-fig3": 2.4e9,
    "paper-fig4": 2.4e9,
    "paper-fig5": 2.4e9,
    "paper-fig6": 2.4e9,
    "paper-fig7": 2.5e9,
    "paper-fig8": 2.6e9,
    "static": 2.4e9,
    "straight-line": 2.4e9,
}

POSTURE_RATE = math.pi / 2  # rad/s


def _link_geometry(distance: float, elevation: float) -> tuple[np.ndarray, np.ndarray]:
    """Tx above the origin-anchored Rx at the given LoS length and elevation."""
    rx = np.zeros(3)
    tx = np.array([distance * math.cos(elevation), 0.0, distance * math.sin(elevation)])
    return tx, rx


def preset_scenario(name: str, grid_step: float = DEFAULT_GRID_STEP) -> tuple[MobilityProfile, MobilityProfile]:
    """Return the ``(tx, rx)`` mobility profiles of a named scenario."""
    name = PRESET_ALIASES.get(name, name)
    if name == "paper-fig3":
        # UAV at 150 m, 50 m/s; pitch ramps over [0, 1] s, roll over [1, 2] s.
        # Heading stays fixed while the fuselage rotates.
        duration = 2.2
        tx = MobilityProfile(
            initial_position=[0.0, 0.0, 150.0],
            speed=Schedule.constant(50.0),
            azimuth=Schedule.constant(math.pi),
            pitch=Schedule.ramp(0.0, math.pi / 2, 0.0, 1.0),
            roll=Schedule.ramp(0.0, math.pi / 2, 1.0, 2.0),
            duration=duration,
            grid_step=grid_step,
        )
        rx = MobilityProfile.constant_velocity(
            [150.0, 0.0, 0.0], 20.0, math.pi / 4, duration=duration, grid_step=grid_step
        )
        return tx, rx
    if name in ("paper-fig7", "paper-fig8"):
        distance, elevation = (1000.0, math.pi / 3) if name == "paper-fig7" else (500.0, math.pi / 6)
        tx_pos, rx_pos = _link_geometry(distance, elevation)
        duration = 1.2
        tx = MobilityProfile.constant_velocity(tx_pos, 40.0, math.pi, duration=duration, grid_step=grid_step)
        rx = MobilityProfile.constant_velocity(rx_pos, 10.0, math.pi / 4, duration=duration, grid_step=grid_step)
        return tx, rx
    if name == "static":
        tx = MobilityProfile.constant_velocity([0.0, 0.0, 150.0], 0.0, 0.0, duration=2.2, grid_step=grid_step)
        rx = MobilityProfile.constant_velocity([150.0, 0.0, 0.0], 0.0, 0.0, duration=2.2, grid_step=grid_step)
        return tx, rx
    if name == "straight-line":
        tx = MobilityProfile.constant_velocity([0.0, 0.0, 150.0], 50.0, 0.0, duration=2.2, grid_step=grid_step)
        rx = MobilityProfile.constant_velocity([150.0, 50.0, 0.0], 20.0, math.pi / 2, duration=2.2,
                                               grid_step=grid_step)
        return tx, rx
    raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
