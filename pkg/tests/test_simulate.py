"""Analytic ray casting, distance fields, and the synthetic renderers."""

import math

import numpy as np
import pytest
from scipy.spatial import cKDTree

from optifuse.geometry import CameraIntrinsics, RigidTransform, canonical_extrinsics
from optifuse.simulate import (
    Box,
    Cylinder,
    SceneModel,
    SonarGeometry,
    distance_to_scene,
    pier_scene,
    ray_distance,
    render_camera,
    render_sonar,
    seawall_scene,
    transform_scene,
)

AXIS_Z = np.array([0.0, 0.0, 1.0])


def single_cylinder(center=(2.0, 0.0, 0.0), radius=0.1, half_length=0.5):
    return SceneModel(
        (
            Cylinder(
                center=np.asarray(center, dtype=float),
                axis=AXIS_Z,
                radius=radius,
                half_length=half_length,
                intensity=1.0,
            ),
        )
    )


def single_box(center=(2.2, 0.0, 0.0), half_extents=(0.05, 1.6, 0.6)):
    return Box(
        center=np.asarray(center, dtype=float),
        half_extents=np.asarray(half_extents, dtype=float),
        rotation=np.eye(3),
        intensity=1.0,
    )


def sphere_trace(scene, origin, direction, max_range=10.0):
    """March the unsigned distance field; independent of the analytic caster.

    The hit threshold must exceed the minimum step, or the forced step
    can cross a surface without the unsigned field ever reading as zero.
    """
    direction = direction / np.linalg.norm(direction)
    t = 0.0
    for _ in range(8000):
        d = float(distance_to_scene(scene, origin + t * direction))
        if d < 2e-7:
            return t
        t += max(d, 1e-7)
        if t > max_range:
            return None
    return t


def test_ray_hits_cylinder_front_surface():
    hit = ray_distance(single_cylinder(), np.zeros(3), np.array([1.0, 0.0, 0.0]))
    assert hit is not None
    dist, index = hit
    assert dist == pytest.approx(1.9, abs=1e-12)
    assert index == 0


def test_ray_misses_beside_cylinder():
    assert ray_distance(single_cylinder(), np.zeros(3), np.array([0.0, 1.0, 0.0])) is None


def test_ray_hits_cylinder_cap():
    scene = single_cylinder(center=(0.0, 0.0, -2.0))
    hit = ray_distance(scene, np.zeros(3), np.array([0.0, 0.0, -1.0]))
    assert hit is not None
    assert hit[0] == pytest.approx(1.5, abs=1e-12)  # top cap at z = -1.5


def test_ray_respects_cylinder_height_limit():
    # Aim over the top: at x=2 the cylinder spans z in [-0.5, 0.5].
    direction = np.array([2.0, 0.0, 0.8])
    assert ray_distance(single_cylinder(), np.zeros(3), direction) is None


def test_ray_hits_box_face():
    scene = SceneModel((single_box(),))
    hit = ray_distance(scene, np.zeros(3), np.array([1.0, 0.0, 0.0]))
    assert hit is not None
    assert hit[0] == pytest.approx(2.15, abs=1e-12)


def test_ray_from_inside_box_exits_through_far_face():
    box = single_box(center=(0.0, 0.0, 0.0), half_extents=(1.0, 1.0, 1.0))
    hit = ray_distance(SceneModel((box,)), np.zeros(3), np.array([1.0, 0.0, 0.0]))
    assert hit is not None
    assert hit[0] == pytest.approx(1.0, abs=1e-12)


def test_ray_picks_nearest_of_several_primitives():
    scene = SceneModel(
        (
            single_cylinder(center=(3.0, 0.0, 0.0)).primitives[0],
            single_cylinder(center=(1.5, 0.0, 0.0)).primitives[0],
        )
    )
    dist, index = ray_distance(scene, np.zeros(3), np.array([1.0, 0.0, 0.0]))
    assert index == 1
    assert dist == pytest.approx(1.4, abs=1e-12)


def test_ray_caster_agrees_with_distance_field_marcher():
    scene = SceneModel(pier_scene().primitives + seawall_scene().primitives)
    rng = np.random.default_rng(17)
    hits = 0
    for _ in range(120):
        origin = rng.uniform([-0.5, -1.5, -0.8], [0.5, 1.5, 0.8])
        theta = rng.uniform(-math.pi / 3, math.pi / 3)
        phi = rng.uniform(-0.5, 0.5)
        direction = np.array(
            [math.cos(phi) * math.cos(theta), math.cos(phi) * math.sin(theta), math.sin(phi)]
        )
        analytic = ray_distance(scene, origin, direction)
        marched = sphere_trace(scene, origin, direction)
        if analytic is None:
            # The marcher may stall arbitrarily close to a surface it
            # only grazes, so just require it found no definite hit.
            assert marched is None or marched > 1e-3
        else:
            hits += 1
            assert marched is not None
            assert marched == pytest.approx(analytic[0], abs=5e-4)
    assert hits >= 30


def test_distance_field_known_values():
    scene = single_cylinder()
    assert distance_to_scene(scene, np.array([2.0, 0.0, 0.0])) == pytest.approx(0.1)
    assert distance_to_scene(scene, np.array([1.9, 0.0, 0.0])) == pytest.approx(0.0, abs=1e-15)
    assert distance_to_scene(scene, np.array([1.5, 0.0, 0.0])) == pytest.approx(0.4)
    # Above the top cap: vertical clearance only.
    assert distance_to_scene(scene, np.array([2.0, 0.0, 0.9])) == pytest.approx(0.4)
    # Diagonal clearance from beyond the rim.
    assert distance_to_scene(scene, np.array([2.3, 0.0, 0.8])) == pytest.approx(
        math.hypot(0.2, 0.3)
    )


def test_distance_field_box_values():
    scene = SceneModel((single_box(center=(0.0, 0.0, 0.0), half_extents=(1.0, 2.0, 3.0)),))
    assert distance_to_scene(scene, np.zeros(3)) == pytest.approx(1.0)  # nearest face
    assert distance_to_scene(scene, np.array([1.5, 0.0, 0.0])) == pytest.approx(0.5)
    assert distance_to_scene(scene, np.array([2.0, 3.0, 0.0])) == pytest.approx(math.hypot(1, 1))


def test_distance_field_agrees_with_surface_sampling():
    scene = SceneModel(pier_scene().primitives + seawall_scene().primitives)
    samples = []
    for prim in scene.primitives:
        if isinstance(prim, Cylinder):
            angs = np.linspace(0.0, 2 * math.pi, 400, endpoint=False)
            zs = np.linspace(-prim.half_length, prim.half_length, 160)
            a, z = np.meshgrid(angs, zs)
            lateral = np.stack(
                [
                    prim.center[0] + prim.radius * np.cos(a).ravel(),
                    prim.center[1] + prim.radius * np.sin(a).ravel(),
                    prim.center[2] + z.ravel(),
                ],
                axis=1,
            )
            rr = np.linspace(0.0, prim.radius, 20)
            a2, r2 = np.meshgrid(angs, rr)
            for sign in (-1.0, 1.0):
                caps = np.stack(
                    [
                        prim.center[0] + r2.ravel() * np.cos(a2).ravel(),
                        prim.center[1] + r2.ravel() * np.sin(a2).ravel(),
                        np.full(r2.size, prim.center[2] + sign * prim.half_length),
                    ],
                    axis=1,
                )
                samples.append(caps)
            samples.append(lateral)
        else:
            hx, hy, hz = prim.half_extents
            grid = np.linspace(-1.0, 1.0, 220)
            u, v = np.meshgrid(grid, grid)
            u, v = u.ravel(), v.ravel()
            faces = [
                np.stack([np.full_like(u, s * hx), u * hy, v * hz], axis=1) for s in (-1, 1)
            ]
            faces += [
                np.stack([u * hx, np.full_like(u, s * hy), v * hz], axis=1) for s in (-1, 1)
            ]
            faces += [
                np.stack([u * hx, v * hy, np.full_like(u, s * hz)], axis=1) for s in (-1, 1)
            ]
            samples.append(np.concatenate(faces) @ prim.rotation.T + prim.center)
    tree = cKDTree(np.concatenate(samples))

    rng = np.random.default_rng(23)
    pts = rng.uniform([0.0, -2.0, -1.0], [3.0, 2.0, 1.0], size=(250, 3))
    got = distance_to_scene(scene, pts)
    sampled, _ = tree.query(pts)
    # Sampling pitch bounds how far the discrete estimate can exceed truth.
    np.testing.assert_allclose(got, sampled, atol=0.02)
    assert (got <= sampled + 1e-12).all()


def test_render_sonar_empty_scene_is_noise_bounded():
    geom = SonarGeometry(num_beams=16, num_bins=32)
    empty = SceneModel((single_cylinder(center=(100.0, 0.0, 0.0)).primitives[0],))
    silent = render_sonar(empty, RigidTransform.identity(), geom, noise_amplitude=0.0, seed=0)
    np.testing.assert_array_equal(silent.intensities, np.zeros((16, 32)))
    noisy = render_sonar(empty, RigidTransform.identity(), geom, noise_amplitude=0.05, seed=1)
    assert noisy.intensities.max() <= 0.05
    assert noisy.intensities.min() >= 0.0


def test_render_sonar_peak_bin_matches_ray_distance():
    geom = SonarGeometry()
    frame = render_sonar(single_cylinder(), RigidTransform.identity(), geom, noise_amplitude=0.0,
                         seed=0)
    beam = int(np.argmin(np.abs(frame.bearings)))  # bearing closest to 0
    profile = frame.intensities[beam]
    first = int(np.flatnonzero(profile > 0.0)[0])
    expected = int(np.rint(1.9 / geom.bin_length - 0.5))
    assert first == expected


def test_render_sonar_first_return_tracks_ray_distance_per_beam(pier):
    frame = pier.frame
    geom = pier.geometry
    for b in range(0, frame.num_beams, 7):
        profile = frame.intensities[b]
        nz = np.flatnonzero(profile > 0.0)
        theta = frame.bearings[b]
        direction = np.array([math.cos(theta), math.sin(theta), 0.0])
        hit = ray_distance(pier.scene, np.zeros(3), direction)
        if hit is None:
            assert nz.size == 0
        else:
            assert nz.size > 0
            first_range = (nz[0] + 0.5) * geom.bin_length
            assert abs(first_range - hit[0]) <= geom.bin_length


def test_render_sonar_determinism_and_seed_sensitivity():
    geom = SonarGeometry(num_beams=32, num_bins=64)
    scene = pier_scene()
    a = render_sonar(scene, RigidTransform.identity(), geom, noise_amplitude=0.05, seed=4)
    b = render_sonar(scene, RigidTransform.identity(), geom, noise_amplitude=0.05, seed=4)
    c = render_sonar(scene, RigidTransform.identity(), geom, noise_amplitude=0.05, seed=5)
    np.testing.assert_array_equal(a.intensities, b.intensities)
    assert not np.array_equal(a.intensities, c.intensities)


def test_render_camera_labels_and_background(pier):
    image, mask = render_camera(
        pier.scene,
        pier.pose.compose(pier.extrinsics.inverse()),
        pier.intrinsics,
        background=0.05,
    )
    assert set(np.unique(mask)) == {0, 1, 2, 3, 4}
    assert image.pixels[mask == 0].max() == pytest.approx(0.05)
    # A head-on surface reflects nearly its full material intensity.
    assert image.pixels.max() > 0.9


def test_render_camera_mask_consistent_between_runs(pier):
    image1, mask1 = render_camera(
        pier.scene, pier.pose.compose(pier.extrinsics.inverse()), pier.intrinsics
    )
    image2, mask2 = render_camera(
        pier.scene, pier.pose.compose(pier.extrinsics.inverse()), pier.intrinsics
    )
    np.testing.assert_array_equal(mask1, mask2)
    np.testing.assert_array_equal(image1.pixels, image2.pixels)


def test_transform_scene_moves_surfaces_rigidly():
    scene = SceneModel(pier_scene().primitives + (single_box(),))
    angle = 0.4
    rot = np.array(
        [
            [math.cos(angle), 0.0, math.sin(angle)],
            [0.0, 1.0, 0.0],
            [-math.sin(angle), 0.0, math.cos(angle)],
        ]
    )
    move = RigidTransform(rot, np.array([0.2, -0.4, 0.6]))
    moved = transform_scene(scene, move)
    rng = np.random.default_rng(31)
    pts = rng.uniform(-1.0, 3.0, size=(40, 3))
    np.testing.assert_allclose(
        distance_to_scene(moved, move.apply(pts)),
        distance_to_scene(scene, pts),
        atol=1e-9,
    )


def test_scene_presets_have_expected_shapes():
    pier = pier_scene()
    assert len(pier.primitives) == 4
    assert all(isinstance(p, Cylinder) for p in pier.primitives)
    wall = seawall_scene()
    assert len(wall.primitives) == 6
    assert all(isinstance(p, Box) for p in wall.primitives)


def test_primitive_validation():
    with pytest.raises(ValueError):
        Cylinder(center=np.zeros(3), axis=np.zeros(3), radius=0.1, half_length=0.5, intensity=1.0)
    with pytest.raises(ValueError):
        Cylinder(center=np.zeros(3), axis=AXIS_Z, radius=-0.1, half_length=0.5, intensity=1.0)
    with pytest.raises(ValueError):
        Box(center=np.zeros(3), half_extents=np.array([1.0, -1.0, 1.0]), rotation=np.eye(3),
            intensity=1.0)
    with pytest.raises(ValueError):
        Box(center=np.zeros(3), half_extents=np.ones(3), rotation=np.eye(3) * 2.0, intensity=1.0)
    with pytest.raises(ValueError):
        SceneModel(())
