"""Voxel coverage and distance-to-surface error statistics."""

import math

import numpy as np
import pytest

from optifuse.geometry import RigidTransform
from optifuse.metrics import EmptyCloud, ErrorReport, VoxelGrid, absolute_error, voxel_count
from optifuse.simulate import Box, Cylinder, SceneModel, transform_scene


def test_voxel_count_merges_points_in_one_cell():
    pts = np.array([[0.0, 0.0, 0.0], [0.004, 0.0, 0.0]])
    assert voxel_count(pts, 0.01) == 1


def test_voxel_count_separates_cells():
    pts = np.array([[0.0, 0.0, 0.0], [0.014, 0.0, 0.0]])
    assert voxel_count(pts, 0.01) == 2


def test_voxel_floor_binning_boundary():
    # floor semantics: 0.01 starts the next cell, -1e-9 the previous one.
    assert voxel_count(np.array([[0.0, 0.0, 0.0], [0.01, 0.0, 0.0]]), 0.01) == 2
    assert voxel_count(np.array([[0.0, 0.0, 0.0], [0.0099, 0.0, 0.0]]), 0.01) == 1
    assert voxel_count(np.array([[0.0, 0.0, 0.0], [-1e-9, 0.0, 0.0]]), 0.01) == 2


def test_voxel_count_duplicate_and_permutation_invariance():
    rng = np.random.default_rng(21)
    pts = rng.uniform(-1.0, 1.0, size=(300, 3))
    base = voxel_count(pts, 0.05)
    doubled = np.vstack([pts, pts])
    assert voxel_count(doubled, 0.05) == base
    shuffled = pts[rng.permutation(len(pts))]
    assert voxel_count(shuffled, 0.05) == base


def test_voxel_grid_exposes_occupied_cells():
    grid = VoxelGrid.from_points(np.array([[0.0, 0.0, 0.0], [0.11, 0.0, 0.0]]), 0.1)
    assert grid.count() == 2
    assert (0, 0, 0) in grid.occupied and (1, 0, 0) in grid.occupied


def test_voxel_count_empty_and_bad_resolution():
    assert voxel_count(np.empty((0, 3)), 0.01) == 0
    with pytest.raises(ValueError):
        voxel_count(np.zeros((2, 3)), 0.0)


def test_error_report_statistics_by_hand():
    report = ErrorReport.from_distances(np.array([1.0, 2.0, 3.0, 4.0]))
    assert report.median == 2.5
    assert report.mean == 2.5
    assert report.max == 4.0
    assert report.p50 == 2.5
    assert report.p90 == pytest.approx(3.7)
    assert report.p95 == pytest.approx(3.85)


def test_error_report_rejects_empty():
    with pytest.raises(EmptyCloud):
        ErrorReport.from_distances(np.empty(0))


def test_absolute_error_against_known_cylinder():
    scene = SceneModel(
        (
            Cylinder(
                center=np.array([2.0, 0.0, 0.0]),
                axis=np.array([0.0, 0.0, 1.0]),
                radius=0.1,
                half_length=0.5,
                intensity=1.0,
            ),
        )
    )
    pts = np.array(
        [
            [1.9, 0.0, 0.0],  # on the lateral surface
            [2.0, 0.0, 0.0],  # on the axis
            [1.5, 0.0, 0.0],  # 0.4 outside
        ]
    )
    report = absolute_error(pts, scene)
    np.testing.assert_allclose(report.distances, [0.0, 0.1, 0.4], atol=1e-12)
    assert report.max == pytest.approx(0.4)


def test_absolute_error_empty_cloud():
    scene = SceneModel(
        (
            Box(
                center=np.zeros(3),
                half_extents=np.array([1.0, 1.0, 1.0]),
                rotation=np.eye(3),
                intensity=1.0,
            ),
        )
    )
    with pytest.raises(EmptyCloud):
        absolute_error(np.empty((0, 3)), scene)


def test_absolute_error_rigid_invariance():
    scene = SceneModel(
        (
            Cylinder(
                center=np.array([1.5, -0.2, 0.0]),
                axis=np.array([0.0, 0.0, 1.0]),
                radius=0.1,
                half_length=0.5,
                intensity=1.0,
            ),
            Box(
                center=np.array([2.5, 0.5, 0.1]),
                half_extents=np.array([0.2, 0.3, 0.4]),
                rotation=np.eye(3),
                intensity=0.8,
            ),
        )
    )
    rng = np.random.default_rng(13)
    pts = rng.uniform(-1.0, 3.0, size=(50, 3))
    angle = 0.7
    rot = np.array(
        [
            [math.cos(angle), -math.sin(angle), 0.0],
            [math.sin(angle), math.cos(angle), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    move = RigidTransform(rot, np.array([0.3, -1.1, 0.25]))
    before = absolute_error(pts, scene)
    after = absolute_error(move.apply(pts), transform_scene(scene, move))
    np.testing.assert_allclose(after.distances, before.distances, atol=1e-9)
