"""Coordinate frames, projections, and rigid transforms.

Conventions used across the package:

* sonar frame: x forward, y starboard, z completing the right-handed
  triad (the elevation axis)
* camera frame: z forward (optical axis), x right, y down
* pixel coordinates: u right, v down, continuous; callers round
* angles are radians everywhere; degrees appear only at file and CLI
  boundaries

A sonar measurement (r, theta, phi) is range in meters, bearing
(positive toward starboard), and elevation (toward +z).  The sonar
collapses elevation, so a single range/bearing cell corresponds to an
arc of candidate 3D points swept over the vertical aperture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ORTHONORMAL_TOL = 1e-9


class BehindCamera(ValueError):
    """Projection was requested for a point at or behind the image plane."""


class NonPositiveDepth(ValueError):
    """Back-projection was requested with a depth <= 0."""


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera intrinsics, all in pixels."""

    fx: float
    fy: float
    cu: float
    cv: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(
                f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}"
            )
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if not 0 <= self.cu < self.width:
            raise ValueError(f"cu={self.cu} outside [0, {self.width})")
        if not 0 <= self.cv < self.height:
            raise ValueError(f"cv={self.cv} outside [0, {self.height})")

    def matrix(self) -> np.ndarray:
        """Return the 3x3 intrinsic matrix K."""
        return np.array(
            [
                [self.fx, 0.0, self.cu],
                [0.0, self.fy, self.cv],
                [0.0, 0.0, 1.0],
            ]
        )


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid transform p -> rotation @ p + translation.

    Serves both as the sonar-to-camera mounting (extrinsics) and as a
    sensor-to-world pose.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        rot = np.asarray(self.rotation, dtype=float)
        trans = np.asarray(self.translation, dtype=float)
        if rot.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got shape {rot.shape}")
        if trans.shape != (3,):
            raise ValueError(f"translation must be a 3-vector, got shape {trans.shape}")
        if not np.allclose(rot.T @ rot, np.eye(3), rtol=0.0, atol=ORTHONORMAL_TOL):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > ORTHONORMAL_TOL:
            raise ValueError("rotation determinant must be +1 (no reflections)")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one (3,) point or an (n, 3) batch."""
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        """Inverse transform, p -> rotation.T @ (p - translation)."""
        return RigidTransform(self.rotation.T, -(self.rotation.T @ self.translation))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Transform equal to applying `other` first, then `self`."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )


# The extrinsic calibration is just a rigid transform from the sonar
# frame into the camera frame.
Extrinsics = RigidTransform


def canonical_extrinsics() -> RigidTransform:
    """Idealized mounting: shared origin, sonar forward along the optical axis.

    Maps sonar x (forward) to camera z, sonar y (starboard) to camera x,
    and sonar z to camera y.  This is the unique proper rotation that
    sends positive bearings to the right half of the image; under it
    every candidate point of a fixed-bearing beam projects to one image
    column (u = fx*tan(theta) + cu) regardless of elevation, which is
    what makes the vertical expansion well posed.
    """
    rot = np.array(
        [
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0],
        ]
    )
    return RigidTransform(rot, np.zeros(3))


def spherical_to_cartesian(r, theta, phi) -> np.ndarray:
    """Convert sonar spherical coordinates to Cartesian sonar-frame points.

    Parameters
    ----------
    r : float or array
        Range in meters, > 0.
    theta : float or array
        Bearing in radians, positive toward starboard.
    phi : float or array
        Elevation in radians, toward sonar +z.

    Returns
    -------
    numpy.ndarray
        Point(s) (x, y, z) in the sonar frame; shape (3,) for scalar
        inputs, (n, 3) for length-n inputs.
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    x = r * np.cos(phi) * np.cos(theta)
    y = r * np.cos(phi) * np.sin(theta)
    z = r * np.sin(phi)
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


def transform_sonar_to_camera(points: np.ndarray, extrinsics: RigidTransform) -> np.ndarray:
    """Map sonar-frame points into the camera frame."""
    return extrinsics.apply(points)


def project_to_pixel(points: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Project camera-frame points to continuous pixel coordinates.

    Parameters
    ----------
    points : array, shape (3,) or (n, 3)
        Camera-frame points with positive depth z.
    intrinsics : CameraIntrinsics

    Returns
    -------
    numpy.ndarray
        Pixels (u, v), shape (2,) or (n, 2).  No bounds clipping is
        applied; callers decide what to do with out-of-frame pixels.

    Raises
    ------
    BehindCamera
        If any point has z <= 0.  Cull such points before projecting.
    """
    pts = np.asarray(points, dtype=float)
    z = pts[..., 2]
    if np.any(z <= 0.0):
        raise BehindCamera("point has non-positive camera depth; cull before projecting")
    u = intrinsics.fx * pts[..., 0] / z + intrinsics.cu
    v = intrinsics.fy * pts[..., 1] / z + intrinsics.cv
    return np.stack(np.broadcast_arrays(u, v), axis=-1)


def back_project(pixels: np.ndarray, depth, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Lift pixels to camera-frame points at the given depth.

    The result is depth * K^-1 @ (u, v, 1), written in closed form, so
    project_to_pixel(back_project(p, z)) recovers p exactly up to float
    rounding.

    Parameters
    ----------
    pixels : array, shape (2,) or (n, 2)
    depth : float or array
        Camera depth(s) z > 0 in meters.
    intrinsics : CameraIntrinsics

    Raises
    ------
    NonPositiveDepth
        If any depth is <= 0.
    """
    px = np.asarray(pixels, dtype=float)
    z = np.asarray(depth, dtype=float)
    if np.any(z <= 0.0):
        raise NonPositiveDepth("back-projection depth must be positive")
    x = (px[..., 0] - intrinsics.cu) / intrinsics.fx * z
    y = (px[..., 1] - intrinsics.cv) / intrinsics.fy * z
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


@dataclass(frozen=True)
class Calibration:
    """Joint camera and sonar calibration.

    extrinsics maps sonar-frame points into the camera frame.  Apertures
    are full angular widths in radians; the elevation sweep used by the
    fusion stage runs over [phi_min, phi_max] = [-v/2, +v/2].
    """

    intrinsics: CameraIntrinsics
    extrinsics: RigidTransform
    h_aperture: float
    v_aperture: float
    max_range: float

    def __post_init__(self) -> None:
        if not 0.0 < self.h_aperture < 2.0 * math.pi:
            raise ValueError(f"horizontal aperture out of range: {self.h_aperture}")
        if not 0.0 < self.v_aperture < math.pi:
            raise ValueError(f"vertical aperture out of range: {self.v_aperture}")
        if self.max_range <= 0.0:
            raise ValueError(f"max range must be positive, got {self.max_range}")

    @property
    def phi_min(self) -> float:
        return -0.5 * self.v_aperture

    @property
    def phi_max(self) -> float:
        return 0.5 * self.v_aperture
