"""Analytic test scenes with exact ground truth.

Scenes are unions of finite cylinders and oriented boxes.  Both sonar
and camera renders trace rays against closed-form surfaces, so every
synthetic measurement has an exact geometric answer to compare
reconstructions against: first-hit distances for rendering and unsigned
distance to the nearest surface for error metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import CameraIntrinsics, RigidTransform, spherical_to_cartesian
from .segmentation import CameraImage
from .sonar import SonarFrame

_EPS = 1e-9


@dataclass(frozen=True)
class Cylinder:
    """Finite capped cylinder: axis segment center +- half_length, radius."""

    center: np.ndarray
    axis: np.ndarray
    radius: float
    half_length: float
    intensity: float = 1.0

    def __post_init__(self) -> None:
        center = np.asarray(self.center, dtype=float)
        axis = np.asarray(self.axis, dtype=float)
        if center.shape != (3,) or axis.shape != (3,):
            raise ValueError("center and axis must be 3-vectors")
        norm = np.linalg.norm(axis)
        if norm < _EPS:
            raise ValueError("axis direction must be nonzero")
        if self.radius <= 0.0 or self.half_length <= 0.0:
            raise ValueError("radius and half_length must be positive")
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueError(f"intensity must lie in [0, 1], got {self.intensity}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "axis", axis / norm)


@dataclass(frozen=True)
class Box:
    """Oriented box: rotation maps box-local axes into the world."""

    center: np.ndarray
    half_extents: np.ndarray
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    intensity: float = 1.0

    def __post_init__(self) -> None:
        center = np.asarray(self.center, dtype=float)
        half = np.asarray(self.half_extents, dtype=float)
        rot = np.asarray(self.rotation, dtype=float)
        if center.shape != (3,) or half.shape != (3,):
            raise ValueError("center and half_extents must be 3-vectors")
        if np.any(half <= 0.0):
            raise ValueError("half extents must be positive")
        if rot.shape != (3, 3) or not np.allclose(rot.T @ rot, np.eye(3), atol=1e-9):
            raise ValueError("rotation must be a 3x3 orthonormal matrix")
        if not 0.0 <= self.intensity <= 1.0:
            raise ValueError(f"intensity must lie in [0, 1], got {self.intensity}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_extents", half)
        object.__setattr__(self, "rotation", rot)


ScenePrimitive = Cylinder | Box


@dataclass(frozen=True)
class SceneModel:
    """Immutable collection of primitives making up one test scene."""

    primitives: tuple[ScenePrimitive, ...]

    def __post_init__(self) -> None:
        if not self.primitives:
            raise ValueError("scene must contain at least one primitive")
        object.__setattr__(self, "primitives", tuple(self.primitives))


def _ray_cylinder(origins: np.ndarray, dirs: np.ndarray, cyl: Cylinder):
    """First-hit distances and outward normals for n rays against one cylinder.

    Lateral surface via the quadratic on the axis-perpendicular
    components, end caps via plane intersections.  Misses get t = inf.
    """
    n = dirs.shape[0]
    rel = origins - cyl.center
    m_par = rel @ cyl.axis
    d_par = dirs @ cyl.axis
    m_perp = rel - m_par[:, None] * cyl.axis
    d_perp = dirs - d_par[:, None] * cyl.axis

    t_best = np.full(n, np.inf)
    normals = np.zeros((n, 3))

    # Lateral surface: |m_perp + t * d_perp|^2 = r^2.
    a = np.einsum("ij,ij->i", d_perp, d_perp)
    b = 2.0 * np.einsum("ij,ij->i", m_perp, d_perp)
    c = np.einsum("ij,ij->i", m_perp, m_perp) - cyl.radius**2
    disc = b * b - 4.0 * a * c
    solvable = (a > _EPS) & (disc >= 0.0)
    sq = np.sqrt(np.where(solvable, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        roots = np.stack(
            [
                np.where(solvable, (-b - sq) / (2.0 * a), np.inf),
                np.where(solvable, (-b + sq) / (2.0 * a), np.inf),
            ],
            axis=1,
        )
    for k in range(2):
        t = roots[:, k]
        # Missed lanes carry t=inf; inf*0 makes NaN, which the mask drops.
        with np.errstate(invalid="ignore"):
            axial = m_par + t * d_par
            ok = solvable & (t > _EPS) & (np.abs(axial) <= cyl.half_length) & (t < t_best)
        if np.any(ok):
            hit_perp = m_perp[ok] + t[ok, None] * d_perp[ok]
            t_best[ok] = t[ok]
            normals[ok] = hit_perp / cyl.radius

    # End caps at +-half_length along the axis.
    for sign in (1.0, -1.0):
        plane = sign * cyl.half_length
        moving = np.abs(d_par) > _EPS
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(moving, (plane - m_par) / d_par, np.inf)
            radial = m_perp + t[:, None] * d_perp
            inside = np.einsum("ij,ij->i", radial, radial) <= cyl.radius**2
        ok = moving & (t > _EPS) & inside & (t < t_best)
        if np.any(ok):
            t_best[ok] = t[ok]
            normals[ok] = sign * cyl.axis
    return t_best, normals


def _ray_box(origins: np.ndarray, dirs: np.ndarray, box: Box):
    """Slab-test first hits and outward normals for n rays against one box."""
    n = dirs.shape[0]
    p = (origins - box.center) @ box.rotation
    d = dirs @ box.rotation

    moving = np.abs(d) > _EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        t_a = np.where(moving, (-box.half_extents - p) / d, -np.inf)
        t_b = np.where(moving, (box.half_extents - p) / d, np.inf)
    t_low = np.minimum(t_a, t_b)
    t_high = np.maximum(t_a, t_b)
    # Rays parallel to a slab hit it only if they start inside it.
    inside_slab = np.abs(p) <= box.half_extents
    t_low = np.where(moving, t_low, np.where(inside_slab, -np.inf, np.inf))
    t_high = np.where(moving, t_high, np.where(inside_slab, np.inf, -np.inf))

    t_near = t_low.max(axis=1)
    t_far = t_high.min(axis=1)
    hit = t_far >= np.maximum(t_near, _EPS)
    entering = t_near > _EPS
    t_best = np.where(hit, np.where(entering, t_near, t_far), np.inf)

    # Normal: the face whose slab bounds the chosen parameter.
    near_axis = np.argmax(t_low == t_near[:, None], axis=1)
    far_axis = np.argmax(t_high == t_far[:, None], axis=1)
    axis = np.where(entering, near_axis, far_axis)
    local = np.zeros((n, 3))
    rows = np.arange(n)
    sign = np.where(entering, -np.sign(d[rows, axis]), np.sign(d[rows, axis]))
    local[rows, axis] = np.where(sign == 0.0, 1.0, sign)
    normals = local @ box.rotation.T
    return t_best, normals


def raycast(scene: SceneModel, origins: np.ndarray, dirs: np.ndarray):
    """Nearest hit over all primitives for a batch of rays.

    Returns (t, index, normals): distance (inf for a miss), index of the
    primitive hit (-1 for a miss), and outward unit surface normals.
    """
    origins = np.atleast_2d(np.asarray(origins, dtype=float))
    dirs = np.asarray(dirs, dtype=float)
    if origins.shape[0] == 1 and dirs.shape[0] > 1:
        origins = np.broadcast_to(origins, dirs.shape)
    t_best = np.full(dirs.shape[0], np.inf)
    index = np.full(dirs.shape[0], -1)
    normals = np.zeros_like(dirs)
    for i, prim in enumerate(scene.primitives):
        if isinstance(prim, Cylinder):
            t, nrm = _ray_cylinder(origins, dirs, prim)
        else:
            t, nrm = _ray_box(origins, dirs, prim)
        closer = t < t_best
        t_best[closer] = t[closer]
        index[closer] = i
        normals[closer] = nrm[closer]
    return t_best, index, normals


def ray_distance(scene: SceneModel, origin, direction):
    """Distance along one ray to the nearest surface, or None for a miss.

    Returns (distance, primitive_index).  The direction need not be
    normalized; distances are measured in units of its length.
    """
    direction = np.asarray(direction, dtype=float).reshape(1, 3)
    origin = np.asarray(origin, dtype=float).reshape(1, 3)
    t, index, _ = raycast(scene, origin, direction)
    if index[0] < 0:
        return None
    return float(t[0]), int(index[0])


def _distance_cylinder(points: np.ndarray, cyl: Cylinder) -> np.ndarray:
    rel = points - cyl.center
    axial = rel @ cyl.axis
    radial = np.linalg.norm(rel - axial[:, None] * cyl.axis, axis=1)
    dr = radial - cyl.radius
    dz = np.abs(axial) - cyl.half_length
    outside = np.hypot(np.maximum(dr, 0.0), np.maximum(dz, 0.0))
    inside = np.minimum(np.maximum(dr, dz), 0.0)
    return np.abs(outside + inside)


def _distance_box(points: np.ndarray, box: Box) -> np.ndarray:
    local = (points - box.center) @ box.rotation
    q = np.abs(local) - box.half_extents
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
    inside = np.minimum(q.max(axis=1), 0.0)
    return np.abs(outside + inside)


def distance_to_scene(scene: SceneModel, points) -> np.ndarray:
    """Unsigned distance from each point to the nearest primitive surface.

    Points inside a solid report their distance to its boundary, not
    zero, so the metric penalizes reconstructions that sink into
    structure as much as ones that float off it.
    """
    pts = np.asarray(points, dtype=float)
    scalar = pts.ndim == 1
    pts = np.atleast_2d(pts)
    best = np.full(pts.shape[0], np.inf)
    for prim in scene.primitives:
        if isinstance(prim, Cylinder):
            d = _distance_cylinder(pts, prim)
        else:
            d = _distance_box(pts, prim)
        best = np.minimum(best, d)
    return float(best[0]) if scalar else best


@dataclass(frozen=True)
class SonarGeometry:
    """Beam/bin layout of a simulated sonar."""

    num_beams: int = 256
    num_bins: int = 512
    h_aperture: float = math.radians(90.0)
    v_aperture: float = math.radians(10.0)
    max_range: float = 3.0

    def __post_init__(self) -> None:
        if self.num_beams < 1 or self.num_bins < 1:
            raise ValueError("beam and bin counts must be positive")
        if not 0.0 < self.h_aperture < 2.0 * math.pi:
            raise ValueError(f"horizontal aperture out of range: {self.h_aperture}")
        if not 0.0 < self.v_aperture < math.pi:
            raise ValueError(f"vertical aperture out of range: {self.v_aperture}")
        if self.max_range <= 0.0:
            raise ValueError("max range must be positive")

    @property
    def bin_length(self) -> float:
        return self.max_range / self.num_bins


def render_sonar(
    scene: SceneModel,
    pose: RigidTransform,
    geometry: SonarGeometry = SonarGeometry(),
    elevation_samples: int = 64,
    noise_amplitude: float = 0.05,
    seed: int = 0,
) -> SonarFrame:
    """Render one polar sonar frame by casting elevation fans per beam.

    pose maps the sonar frame into the world.  Each ray that hits a
    surface within range deposits its primitive's intensity, scaled by
    the cosine of the incidence angle, into the bin whose center is
    nearest the hit distance; overlapping deposits keep the maximum.
    Seeded uniform noise in [0, noise_amplitude] is added afterwards and
    the frame is clipped to [0, 1].
    """
    if elevation_samples < 1:
        raise ValueError("elevation_samples must be >= 1")
    if noise_amplitude < 0.0:
        raise ValueError("noise amplitude must be non-negative")
    g = geometry
    bearings = (np.arange(g.num_beams) + 0.5) / g.num_beams * g.h_aperture - 0.5 * g.h_aperture
    if elevation_samples == 1:
        phis = np.zeros(1)
    else:
        phis = np.linspace(-0.5 * g.v_aperture, 0.5 * g.v_aperture, elevation_samples)

    theta_grid = np.repeat(bearings, elevation_samples)
    phi_grid = np.tile(phis, g.num_beams)
    dirs_sonar = spherical_to_cartesian(1.0, theta_grid, phi_grid)
    dirs_world = dirs_sonar @ pose.rotation.T
    origins = np.broadcast_to(pose.translation, dirs_world.shape)

    t, index, normals = raycast(scene, origins, dirs_world)
    bins = np.rint(t / g.bin_length - 0.5)
    valid = (index >= 0) & (bins >= 0) & (bins < g.num_bins)

    img = np.zeros((g.num_beams, g.num_bins))
    if np.any(valid):
        beam_of_ray = np.repeat(np.arange(g.num_beams), elevation_samples)
        material = np.array([p.intensity for p in scene.primitives])
        incidence = -np.einsum("ij,ij->i", dirs_world, normals)
        shade = material[index[valid]] * np.maximum(incidence[valid], 0.0)
        np.maximum.at(img, (beam_of_ray[valid], bins[valid].astype(int)), shade)

    if noise_amplitude > 0.0:
        rng = np.random.default_rng(seed)
        img = img + rng.uniform(0.0, noise_amplitude, img.shape)
    return SonarFrame.uniform(np.clip(img, 0.0, 1.0), g.h_aperture, g.v_aperture, g.max_range)


def render_camera(
    scene: SceneModel,
    camera_pose: RigidTransform,
    intrinsics: CameraIntrinsics,
    background: float = 0.05,
) -> tuple[CameraImage, np.ndarray]:
    """Render one grayscale frame plus an exact silhouette mask.

    camera_pose maps the camera frame into the world.  Hit pixels show
    the primitive intensity scaled by the cosine of the incidence
    angle; misses show the background constant.  The mask holds
    1 + primitive index where that primitive is the visible surface and
    0 elsewhere, so mask nonzero matches hit pixels exactly.
    """
    if not 0.0 <= background <= 1.0:
        raise ValueError(f"background must lie in [0, 1], got {background}")
    w, h = intrinsics.width, intrinsics.height
    u = np.arange(w, dtype=float)
    v = np.arange(h, dtype=float)
    uu, vv = np.meshgrid(u, v)
    dirs_cam = np.stack(
        [
            (uu - intrinsics.cu) / intrinsics.fx,
            (vv - intrinsics.cv) / intrinsics.fy,
            np.ones_like(uu),
        ],
        axis=-1,
    ).reshape(-1, 3)
    dirs_cam /= np.linalg.norm(dirs_cam, axis=1, keepdims=True)
    dirs_world = dirs_cam @ camera_pose.rotation.T
    origins = np.broadcast_to(camera_pose.translation, dirs_world.shape)

    t, index, normals = raycast(scene, origins, dirs_world)
    hit = index >= 0
    material = np.array([p.intensity for p in scene.primitives])
    incidence = -np.einsum("ij,ij->i", dirs_world, normals)
    shade = np.where(hit, material[np.maximum(index, 0)] * np.maximum(incidence, 0.0), background)

    img = np.clip(shade.reshape(h, w), 0.0, 1.0)
    mask = np.where(hit, index + 1, 0).reshape(h, w).astype(np.int32)
    return CameraImage(img), mask


def transform_scene(scene: SceneModel, rigid: RigidTransform) -> SceneModel:
    """Apply a rigid transform to every primitive of a scene."""
    moved: list[ScenePrimitive] = []
    for prim in scene.primitives:
        if isinstance(prim, Cylinder):
            moved.append(
                Cylinder(
                    rigid.apply(prim.center),
                    rigid.rotation @ prim.axis,
                    prim.radius,
                    prim.half_length,
                    prim.intensity,
                )
            )
        else:
            moved.append(
                Box(
                    rigid.apply(prim.center),
                    prim.half_extents,
                    rigid.rotation @ prim.rotation,
                    prim.intensity,
                )
            )
    return SceneModel(tuple(moved))


def pier_scene() -> SceneModel:
    """Four vertical pilings, radius 0.1 m, 0.5 m apart, 1.5 m ahead."""
    pilings = tuple(
        Cylinder(
            center=np.array([1.5, y, 0.0]),
            axis=np.array([0.0, 0.0, 1.0]),
            radius=0.1,
            half_length=0.5,
            intensity=1.0,
        )
        for y in (-0.75, -0.25, 0.25, 0.75)
    )
    return SceneModel(pilings)


def seawall_scene() -> SceneModel:
    """A flat wall 2.15 m ahead with five vertical ribs protruding 0.2 m."""
    wall = Box(
        center=np.array([2.2, 0.0, 0.0]),
        half_extents=np.array([0.05, 1.6, 0.6]),
        intensity=1.0,
    )
    ribs = tuple(
        Box(
            center=np.array([2.05, y, 0.0]),
            half_extents=np.array([0.10, 0.12, 0.6]),
            intensity=1.0,
        )
        for y in (-1.2, -0.6, 0.0, 0.6, 1.2)
    )
    return SceneModel((wall,) + ribs)
