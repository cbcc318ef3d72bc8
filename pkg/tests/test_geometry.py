"""Frames, projections, and rigid transform algebra."""

import math

import numpy as np
import pytest

from optifuse.geometry import (
    BehindCamera,
    Calibration,
    CameraIntrinsics,
    NonPositiveDepth,
    RigidTransform,
    back_project,
    canonical_extrinsics,
    project_to_pixel,
    spherical_to_cartesian,
    transform_sonar_to_camera,
)

INTR = CameraIntrinsics(fx=500.0, fy=500.0, cu=320.0, cv=240.0, width=640, height=480)


def test_spherical_to_cartesian_known_point():
    p = spherical_to_cartesian(1.0, 0.0, math.pi / 6)
    np.testing.assert_allclose(p, [math.sqrt(3) / 2, 0.0, 0.5], atol=1e-15)


def test_spherical_zero_angles_lies_on_x_axis():
    np.testing.assert_array_equal(spherical_to_cartesian(2.5, 0.0, 0.0), [2.5, 0.0, 0.0])


def test_spherical_norm_preserved_for_random_batch():
    rng = np.random.default_rng(7)
    r = rng.uniform(0.1, 10.0, size=500)
    theta = rng.uniform(-1.2, 1.2, size=500)
    phi = rng.uniform(-0.6, 0.6, size=500)
    pts = spherical_to_cartesian(r, theta, phi)
    assert pts.shape == (500, 3)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), r, rtol=1e-12)


def test_spherical_broadcasts_scalar_range_over_angle_grid():
    theta = np.array([0.0, 0.1, 0.2])
    pts = spherical_to_cartesian(2.0, theta, 0.0)
    assert pts.shape == (3, 3)
    np.testing.assert_allclose(pts[:, 1], 2.0 * np.sin(theta))


def test_project_known_points():
    np.testing.assert_allclose(project_to_pixel(np.array([0.1, 0.0, 1.0]), INTR), [370.0, 240.0])
    np.testing.assert_allclose(project_to_pixel(np.array([0.0, -0.2, 2.0]), INTR), [320.0, 190.0])


def test_project_batch_matches_scalar():
    pts = np.array([[0.1, 0.0, 1.0], [0.0, -0.2, 2.0]])
    uv = project_to_pixel(pts, INTR)
    np.testing.assert_allclose(uv, [[370.0, 240.0], [320.0, 190.0]])


def test_project_rejects_nonpositive_depth():
    with pytest.raises(BehindCamera):
        project_to_pixel(np.array([0.0, 0.0, 0.0]), INTR)
    with pytest.raises(BehindCamera):
        project_to_pixel(np.array([[0.1, 0.0, 1.0], [0.1, 0.0, -1.0]]), INTR)


def test_back_project_known_pixel():
    p = back_project(np.array([370.0, 240.0]), 1.0, INTR)
    np.testing.assert_allclose(p, [0.1, 0.0, 1.0], atol=1e-15)


def test_back_project_rejects_nonpositive_depth():
    with pytest.raises(NonPositiveDepth):
        back_project(np.array([320.0, 240.0]), 0.0, INTR)


def test_project_back_project_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(200):
        z = rng.uniform(0.2, 8.0)
        uv = np.array([rng.uniform(0, 640), rng.uniform(0, 480)])
        p = back_project(uv, z, INTR)
        np.testing.assert_allclose(project_to_pixel(p, INTR), uv, atol=1e-9)
        assert p[2] == z


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        CameraIntrinsics(fx=0.0, fy=500.0, cu=320.0, cv=240.0, width=640, height=480)
    with pytest.raises(ValueError):
        CameraIntrinsics(fx=500.0, fy=500.0, cu=700.0, cv=240.0, width=640, height=480)
    with pytest.raises(ValueError):
        CameraIntrinsics(fx=500.0, fy=500.0, cu=320.0, cv=240.0, width=0, height=480)


def test_intrinsics_matrix_layout():
    k = INTR.matrix()
    np.testing.assert_array_equal(k, [[500.0, 0.0, 320.0], [0.0, 500.0, 240.0], [0.0, 0.0, 1.0]])


def test_rigid_transform_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        RigidTransform(np.eye(3) * 2.0, np.zeros(3))


def test_rigid_transform_rejects_reflection():
    flip = np.diag([1.0, 1.0, -1.0])
    with pytest.raises(ValueError):
        RigidTransform(flip, np.zeros(3))


def test_rigid_transform_apply_compose_inverse():
    angle = 0.3
    rot = np.array(
        [
            [math.cos(angle), -math.sin(angle), 0.0],
            [math.sin(angle), math.cos(angle), 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    a = RigidTransform(rot, np.array([1.0, -2.0, 0.5]))
    b = RigidTransform(rot.T, np.array([0.0, 3.0, 0.0]))
    p = np.array([0.2, 0.4, -1.0])
    np.testing.assert_allclose(a.compose(b).apply(p), a.apply(b.apply(p)), atol=1e-12)
    np.testing.assert_allclose(a.inverse().apply(a.apply(p)), p, atol=1e-12)
    np.testing.assert_allclose(RigidTransform.identity().apply(p), p)


def test_transform_sonar_to_camera_is_rotate_then_translate():
    e = RigidTransform(np.eye(3), np.array([0.0, 0.1, 0.0]))
    np.testing.assert_allclose(
        transform_sonar_to_camera(np.array([1.0, 2.0, 3.0]), e), [1.0, 2.1, 3.0]
    )


def test_canonical_extrinsics_is_proper_rotation():
    e = canonical_extrinsics()
    np.testing.assert_allclose(e.rotation @ e.rotation.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(e.rotation) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_array_equal(e.translation, np.zeros(3))
    # Forward maps to the optical axis, starboard to image right.
    np.testing.assert_array_equal(e.apply(np.array([1.0, 0.0, 0.0])), [0.0, 0.0, 1.0])
    np.testing.assert_array_equal(e.apply(np.array([0.0, 1.0, 0.0])), [1.0, 0.0, 0.0])


def test_fixed_bearing_points_share_one_image_column():
    e = canonical_extrinsics()
    theta = 0.1
    expected_u = 500.0 * math.tan(theta) + 320.0
    for phi in np.linspace(-0.4, 0.4, 17):
        for r in (0.5, 1.5, 2.9):
            uv = project_to_pixel(e.apply(spherical_to_cartesian(r, theta, phi)), INTR)
            assert uv[0] == pytest.approx(expected_u, abs=1e-9)


def test_zero_bearing_projects_to_principal_column():
    e = canonical_extrinsics()
    uv = project_to_pixel(e.apply(spherical_to_cartesian(2.0, 0.0, 0.3)), INTR)
    assert uv[0] == 320.0


def test_calibration_aperture_bounds():
    calib = Calibration(INTR, canonical_extrinsics(), math.radians(90), math.radians(10), 3.0)
    assert calib.phi_min == pytest.approx(-math.radians(5))
    assert calib.phi_max == pytest.approx(math.radians(5))
    with pytest.raises(ValueError):
        Calibration(INTR, canonical_extrinsics(), math.radians(90), math.radians(10), -1.0)
