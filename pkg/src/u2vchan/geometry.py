"""Rotation matrices, fuselage posture and direction vectors.

Conventions
-----------
* Vectors are plain ``numpy`` arrays of shape ``(3,)`` (or ``(..., 3)`` for the
  vectorised helpers).
* Direction angles are (azimuth, elevation): azimuth measured in the x-y plane
  from +x, elevation measured up from the x-y plane.
* The fuselage posture is the intrinsic Z-Y-X Euler composition
  ``R_z(roll) @ R_y(yaw) @ R_x(pitch)``, mapping fuselage coordinates to world
  coordinates. Pitch is the rotation about the fuselage tail-to-nose axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi
ROTATION_TOL = 1e-12


def as_vec3(v) -> np.ndarray:
    """Coerce ``v`` into a finite float64 3-vector."""
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"vector has non-finite components: {arr}")
    return arr


def _check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    return value


@dataclass(frozen=True)
class SphericalAngles:
    """Azimuth/elevation pair in radians.

    Azimuth is wrapped into ``[0, 2*pi)``. Elevations outside
    ``[-pi/2, pi/2]`` are rejected instead of wrapped.
    """

    azimuth: float
    elevation: float

    def __post_init__(self):
        az = _check_finite("azimuth", self.azimuth) % TWO_PI
        if az >= TWO_PI:  # fmod can round up to 2*pi for tiny negatives
            az = 0.0
        el = _check_finite("elevation", self.elevation)
        if not -math.pi / 2 <= el <= math.pi / 2:
            raise ValueError(f"elevation {el} outside [-pi/2, pi/2]")
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "elevation", el)


@dataclass(frozen=True)
class PostureAngles:
    """UAV fuselage posture: roll (about z), yaw (about y), pitch (about x).

    Ranges: roll in [-pi, pi], yaw in [0, 2*pi), pitch in [-pi, pi].
    """

    roll: float = 0.0
    yaw: float = 0.0
    pitch: float = 0.0

    def __post_init__(self):
        roll = _check_finite("roll", self.roll)
        yaw = _check_finite("yaw", self.yaw)
        pitch = _check_finite("pitch", self.pitch)
        if not -math.pi <= roll <= math.pi:
            raise ValueError(f"roll {roll} outside [-pi, pi]")
        if not 0.0 <= yaw < TWO_PI:
            raise ValueError(f"yaw {yaw} outside [0, 2*pi)")
        if not -math.pi <= pitch <= math.pi:
            raise ValueError(f"pitch {pitch} outside [-pi, pi]")
        object.__setattr__(self, "roll", roll)
        object.__setattr__(self, "yaw", yaw)
        object.__setattr__(self, "pitch", pitch)


def rotation_about_x(angle: float) -> np.ndarray:
    """Pitch rotation about the x axis."""
    a = _check_finite("angle", angle)
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_about_y(angle: float) -> np.ndarray:
    """Yaw rotation about the y axis."""
    a = _check_finite("angle", angle)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_about_z(angle: float) -> np.ndarray:
    """Roll rotation about the z axis. Entry (3, 3) is always 1."""
    a = _check_finite("angle", angle)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def posture_matrix(angles: PostureAngles) -> np.ndarray:
    """Fuselage-to-world rotation ``R_z(roll) @ R_y(yaw) @ R_x(pitch)``."""
    return (
        rotation_about_z(angles.roll)
        @ rotation_about_y(angles.yaw)
        @ rotation_about_x(angles.pitch)
    )


def posture_matrix_closed_form(angles: PostureAngles) -> np.ndarray:
    """Expanded elementwise form of :func:`posture_matrix`.

    Kept separate from the product form so each can check the other.
    """
    cw, sw = math.cos(angles.roll), math.sin(angles.roll)
    cf, sf = math.cos(angles.yaw), math.sin(angles.yaw)
    cg, sg = math.cos(angles.pitch), math.sin(angles.pitch)
    return np.array(
        [
            [cw * cf, cw * sf * sg - sw * cg, cw * sf * cg + sw * sg],
            [sw * cf, sw * sf * sg + cw * cg, sw * sf * cg - cw * sg],
            [-sf, cf * sg, cf * cg],
        ]
    )


def velocity_rotation_matrix(heading: SphericalAngles) -> np.ndarray:
    """Rotation aligning a terminal's local frame with its velocity heading.

    ``heading.azimuth`` and ``heading.elevation`` are the azimuth and elevation
    of the velocity vector.
    """
    th, ph = heading.elevation, heading.azimuth
    ct, st = math.cos(th), math.sin(th)
    cp, sp = math.cos(ph), math.sin(ph)
    return np.array(
        [
            [ct * cp, -sp, -st * cp],
            [ct * sp, cp, -st * sp],
            [st, 0.0, ct],
        ]
    )


def angle_unit_vector(angles: SphericalAngles) -> np.ndarray:
    """Unit vector ``[cos(el)cos(az), cos(el)sin(az), sin(el)]``."""
    ce = math.cos(angles.elevation)
    return np.array(
        [
            ce * math.cos(angles.azimuth),
            ce * math.sin(angles.azimuth),
            math.sin(angles.elevation),
        ]
    )


def vector_angles(v) -> SphericalAngles:
    """Direction angles of a non-zero vector (inverse of :func:`angle_unit_vector`)."""
    v = as_vec3(v)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValueError("zero vector has no direction")
    el = math.asin(max(-1.0, min(1.0, v[2] / norm)))
    return SphericalAngles(math.atan2(v[1], v[0]), el)


def fuselage_to_world(angles: PostureAngles, v) -> np.ndarray:
    """Map a fuselage-frame vector into world coordinates."""
    return posture_matrix(angles) @ as_vec3(v)


def is_rotation(m, tol: float = ROTATION_TOL) -> bool:
    """True if ``m`` is orthonormal with determinant +1 within ``tol``."""
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        return False
    ortho = np.max(np.abs(m.T @ m - np.eye(3))) <= tol
    return bool(ortho and abs(np.linalg.det(m) - 1.0) <= tol)


# Vectorised forms used on time grids and sub-path batches.


def unit_vectors(azimuth, elevation) -> np.ndarray:
    """Broadcasted :func:`angle_unit_vector`; returns shape ``(..., 3)``."""
    azimuth = np.asarray(azimuth, dtype=float)
    elevation = np.asarray(elevation, dtype=float)
    ce = np.cos(elevation)
    return np.stack(
        np.broadcast_arrays(ce * np.cos(azimuth), ce * np.sin(azimuth), np.sin(elevation)),
        axis=-1,
    )


def directions(vecs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit vectors, azimuths and elevations of a ``(..., 3)`` batch."""
    vecs = np.asarray(vecs, dtype=float)
    norms = np.linalg.norm(vecs, axis=-1)
    if np.any(norms == 0.0):
        raise ValueError("zero-length direction vector")
    u = vecs / norms[..., None]
    az = np.mod(np.arctan2(u[..., 1], u[..., 0]), TWO_PI)
    el = np.arcsin(np.clip(u[..., 2], -1.0, 1.0))
    return u, az, el


def posture_matrices(roll, yaw, pitch) -> np.ndarray:
    """Broadcasted :func:`posture_matrix` over angle arrays; shape ``(..., 3, 3)``."""
    roll, yaw, pitch = np.broadcast_arrays(
        np.asarray(roll, float), np.asarray(yaw, float), np.asarray(pitch, float)
    )
    cw, sw = np.cos(roll), np.sin(roll)
    cf, sf = np.cos(yaw), np.sin(yaw)
    cg, sg = np.cos(pitch), np.sin(pitch)
    zero, one = np.zeros_like(cw), np.ones_like(cw)
    rz = np.stack([np.stack([cw, -sw, zero], -1), np.stack([sw, cw, zero], -1),
                   np.stack([zero, zero, one], -1)], -2)
    ry = np.stack([np.stack([cf, zero, sf], -1), np.stack([zero, one, zero], -1),
                   np.stack([-sf, zero, cf], -1)], -2)
    rx = np.stack([np.stack([one, zero, zero], -1), np.stack([zero, cg, -sg], -1),
                   np.stack([zero, sg, cg], -1)], -2)
    return rz @ ry @ rx


def velocity_rotation_matrices(azimuth, elevation) -> np.ndarray:
    """Broadcasted :func:`velocity_rotation_matrix`; shape ``(..., 3, 3)``."""
    ph, th = np.broadcast_arrays(np.asarray(azimuth, float), np.asarray(elevation, float))
    ct, st = np.cos(th), np.sin(th)
    cp, sp = np.cos(ph), np.sin(ph)
    zero = np.zeros_like(ct)
    return np.stack(
        [
            np.stack([ct * cp, -sp, -st * cp], -1),
            np.stack([ct * sp, cp, -st * sp], -1),
            np.stack([st, zero, ct], -1),
        ],
        -2,
    )
