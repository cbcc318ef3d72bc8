"""Reconstruction quality metrics: voxel coverage and distance-to-model error.

Coverage counts occupied voxels instead of raw points so that stacking
many points in one spot cannot inflate the score; accuracy measures each
point's unsigned distance to the analytic scene surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulate import SceneModel, distance_to_scene

DEFAULT_RESOLUTION = 0.01


class EmptyCloud(ValueError):
    """Metric requested on a cloud with no points."""


@dataclass(frozen=True)
class VoxelGrid:
    """Set of occupied voxel indices at a fixed resolution.

    A point p occupies voxel floor(p / resolution) per axis, so voxel k
    covers [k, k+1) * resolution and a point on a face belongs to the
    voxel whose lower corner it touches.
    """

    resolution: float
    occupied: frozenset[tuple[int, int, int]]

    def __post_init__(self) -> None:
        if self.resolution <= 0.0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        object.__setattr__(self, "occupied", frozenset(self.occupied))

    @classmethod
    def from_points(cls, points: np.ndarray, resolution: float = DEFAULT_RESOLUTION) -> "VoxelGrid":
        if resolution <= 0.0:
            raise ValueError(f"resolution must be positive, got {resolution}")
        pts = np.asarray(points, dtype=float)
        if pts.size == 0:
            return cls(resolution, frozenset())
        cells = np.floor(pts / resolution).astype(np.int64)
        return cls(resolution, frozenset(map(tuple, cells)))

    def count(self) -> int:
        return len(self.occupied)


def voxel_count(points: np.ndarray, resolution: float = DEFAULT_RESOLUTION) -> int:
    """Number of distinct voxels occupied by the points."""
    return VoxelGrid.from_points(points, resolution).count()


@dataclass(frozen=True)
class ErrorReport:
    """Per-point distances to the scene surface plus summary statistics."""

    distances: np.ndarray
    median: float
    mean: float
    max: float
    p50: float
    p90: float
    p95: float

    @classmethod
    def from_distances(cls, distances: np.ndarray) -> "ErrorReport":
        d = np.asarray(distances, dtype=float)
        if d.size == 0:
            raise EmptyCloud("cannot summarize an empty distance list")
        return cls(
            distances=d,
            median=float(np.median(d)),
            mean=float(np.mean(d)),
            max=float(np.max(d)),
            p50=float(np.percentile(d, 50)),
            p90=float(np.percentile(d, 90)),
            p95=float(np.percentile(d, 95)),
        )


def absolute_error(points: np.ndarray, scene: SceneModel) -> ErrorReport:
    """Unsigned distance from every point to the nearest scene surface.

    Raises EmptyCloud for an empty input; an empty reconstruction has no
    meaningful accuracy, only (zero) coverage.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise EmptyCloud("absolute_error needs at least one point")
    return ErrorReport.from_distances(distance_to_scene(scene, pts))
