"""Camera-sonar fusion: beam arcs, region-cluster matching, vertical expansion.

The sonar gives range and bearing but collapses elevation; the camera
gives dense bearing/elevation structure but no range.  Fusion projects
each sonar return's elevation arc into the image, decides which
segmented region each object cluster explains, then fills that region
with 3D points at the per-column mean depth of the arc samples that
landed there.  The result is a camera-frame point cloud that covers the
full imaged extent of each object instead of a single range slice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .geometry import Calibration, RigidTransform, back_project, project_to_pixel, spherical_to_cartesian
from .segmentation import CameraImage, RegionMap, segment
from .sonar import ClusterSet, PolarReturn, SonarFrame, dbscan_cluster, nearest_return_per_bearing, soca_cfar

DEFAULT_ARC_SAMPLES_CAP = 256


class LengthMismatch(ValueError):
    """Cloud list and pose list differ in length."""


def round_half_up(values: np.ndarray) -> np.ndarray:
    """Round to the nearest integer with halves going up (toward +inf)."""
    return np.floor(np.asarray(values) + 0.5).astype(int)


@dataclass(frozen=True)
class BeamArc:
    """Projected elevation sweep of one sonar return.

    Parallel arrays hold the retained samples: elevation angle,
    sonar-frame point, continuous pixel, and camera depth.  Samples
    behind the camera or landing outside the image are already dropped,
    so all arrays may be empty when the return is invisible to the
    camera.
    """

    source: PolarReturn
    phis: np.ndarray
    points_sonar: np.ndarray
    pixels: np.ndarray
    depths: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.phis)
        if self.points_sonar.shape != (n, 3) or self.pixels.shape != (n, 2) or self.depths.shape != (n,):
            raise ValueError("arc sample arrays must have matching lengths")

    def __len__(self) -> int:
        return len(self.phis)


@dataclass(frozen=True)
class Match:
    """A region matched to the cluster that explains it."""

    region_label: int
    cluster_index: int
    overlap_pixels: int
    cluster_mean_range: float


@dataclass(frozen=True)
class FusedCloud:
    """Camera-frame points with per-point provenance.

    region_labels, columns, and depths record, for each point, the
    matched region it fills, the image column it came from, and the
    column mean depth it was back-projected at.
    """

    points: np.ndarray
    region_labels: np.ndarray
    columns: np.ndarray
    depths: np.ndarray

    def __post_init__(self) -> None:
        n = self.points.shape[0]
        if self.points.shape != (n, 3):
            raise ValueError("points must be (n, 3)")
        for arr in (self.region_labels, self.columns, self.depths):
            if arr.shape != (n,):
                raise ValueError("provenance arrays must have one entry per point")

    def __len__(self) -> int:
        return self.points.shape[0]

    @classmethod
    def empty(cls) -> "FusedCloud":
        return cls(
            np.zeros((0, 3)),
            np.zeros(0, dtype=np.int32),
            np.zeros(0, dtype=np.int32),
            np.zeros(0),
        )

    @classmethod
    def concatenate(cls, clouds: list["FusedCloud"]) -> "FusedCloud":
        if not clouds:
            return cls.empty()
        return cls(
            np.concatenate([c.points for c in clouds]),
            np.concatenate([c.region_labels for c in clouds]),
            np.concatenate([c.columns for c in clouds]),
            np.concatenate([c.depths for c in clouds]),
        )


def adaptive_sample_count(
    ret: PolarReturn, calib: Calibration, cap: int = DEFAULT_ARC_SAMPLES_CAP
) -> int:
    """Pick the elevation sample count so adjacent samples sit within ~1 px vertically.

    The count is the projected vertical span of the arc in pixels plus
    one, clamped to [2, cap].  Arcs entirely behind the camera get the
    minimum; they project to nothing anyway.
    """
    probe_phis = np.array([calib.phi_min, 0.0, calib.phi_max])
    pts = calib.extrinsics.apply(spherical_to_cartesian(ret.r, ret.theta, probe_phis))
    ahead = pts[pts[:, 2] > 0.0]
    if ahead.shape[0] < 2:
        return 2
    v = project_to_pixel(ahead, calib.intrinsics)[:, 1]
    span = float(v.max() - v.min())
    return int(min(cap, max(2, math.ceil(span) + 1)))


def project_beam_arc(ret: PolarReturn, calib: Calibration, n_samples: int) -> BeamArc:
    """Sweep one return over the elevation aperture and project each candidate.

    n_samples elevations are spaced uniformly over [phi_min, phi_max],
    endpoints included.  Samples behind the camera or whose rounded
    pixel falls outside the image are dropped.
    """
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    phis = np.linspace(calib.phi_min, calib.phi_max, n_samples)
    pts_sonar = spherical_to_cartesian(ret.r, ret.theta, phis)
    pts_cam = calib.extrinsics.apply(pts_sonar)
    ahead = pts_cam[:, 2] > 0.0

    phis, pts_sonar, pts_cam = phis[ahead], pts_sonar[ahead], pts_cam[ahead]
    if phis.size == 0:
        return BeamArc(ret, phis, pts_sonar, np.zeros((0, 2)), np.zeros(0))
    pixels = project_to_pixel(pts_cam, calib.intrinsics)
    px = round_half_up(pixels)
    inside = (
        (px[:, 0] >= 0)
        & (px[:, 0] < calib.intrinsics.width)
        & (px[:, 1] >= 0)
        & (px[:, 1] < calib.intrinsics.height)
    )
    return BeamArc(ret, phis[inside], pts_sonar[inside], pixels[inside], pts_cam[inside, 2])


def project_cluster_arcs(
    clusters: ClusterSet, calib: Calibration, cap: int = DEFAULT_ARC_SAMPLES_CAP
) -> list[list[BeamArc]]:
    """Arcs for every return of every cluster, with adaptive sample counts."""
    return [
        [project_beam_arc(ret, calib, adaptive_sample_count(ret, calib, cap)) for ret in cluster]
        for cluster in clusters.clusters
    ]


def _arc_pixel_labels(arcs: list[BeamArc], regions: RegionMap):
    """Flatten a cluster's arcs into rounded pixels, labels, and return indices."""
    if not arcs:
        empty = np.zeros(0, dtype=int)
        return empty, empty, empty, empty
    us, vs, ridx = [], [], []
    for k, arc in enumerate(arcs):
        if len(arc) == 0:
            continue
        px = round_half_up(arc.pixels)
        us.append(px[:, 0])
        vs.append(px[:, 1])
        ridx.append(np.full(len(arc), k))
    if not us:
        empty = np.zeros(0, dtype=int)
        return empty, empty, empty, empty
    u = np.concatenate(us)
    v = np.concatenate(vs)
    r = np.concatenate(ridx)
    return u, v, r, regions.labels[v, u]


def match_regions_to_clusters(
    regions: RegionMap,
    clusters: ClusterSet,
    calib: Calibration,
    n_samples_cap: int = DEFAULT_ARC_SAMPLES_CAP,
    arcs: list[list[BeamArc]] | None = None,
) -> list[Match]:
    """Assign each overlapped region to the cluster nearest in mean range.

    A cluster overlaps a region when at least one of its arc pixels,
    rounded to integers, carries the region's label.  When several
    clusters reach the same region, the one whose overlapping returns
    have the smallest mean range wins: the nearer structure is the one
    the camera actually sees.  Ties break on the lower cluster index.
    Matches come back sorted by region label; a cluster may serve
    several regions, but each region maps to at most one cluster.
    """
    if arcs is None:
        arcs = project_cluster_arcs(clusters, calib, n_samples_cap)
    best: dict[int, tuple[float, int, int]] = {}
    for ci, cluster_arcs in enumerate(arcs):
        u, v, ridx, labels = _arc_pixel_labels(cluster_arcs, regions)
        hits = labels > 0
        if not np.any(hits):
            continue
        ranges = np.array([arc.source.r for arc in cluster_arcs])
        for label in np.unique(labels[hits]):
            sel = labels == label
            touching = np.unique(ridx[sel])
            mean_range = float(ranges[touching].mean())
            overlap = len(np.unique(u[sel] * regions.height + v[sel]))
            key = int(label)
            if key not in best or (mean_range, ci) < (best[key][0], best[key][1]):
                best[key] = (mean_range, ci, overlap)
    return [
        Match(label, ci, overlap, mean_range)
        for label, (mean_range, ci, overlap) in sorted(best.items())
    ]


def expand_and_backproject(
    match: Match,
    regions: RegionMap,
    cluster_arcs: list[BeamArc],
    calib: Calibration,
    row_stride: int = 1,
    column_fill: str = "skip",
) -> FusedCloud:
    """Fill the matched region with points at per-column mean arc depths.

    Each image column holding at least one in-region arc sample gets the
    mean camera depth of those samples; every region pixel in that
    column (rows stepped by row_stride from the top) back-projects at
    that depth.  The fused points therefore forward-project back into
    the region by construction.  Columns without samples are skipped, or
    borrow the nearest sampled column's depth when column_fill is
    "nearest" (ties to the lower column).
    """
    if row_stride < 1:
        raise ValueError(f"row_stride must be >= 1, got {row_stride}")
    if column_fill not in ("skip", "nearest"):
        raise ValueError(f"column_fill must be 'skip' or 'nearest', got {column_fill!r}")
    label = match.region_label
    u, v, _, labels = _arc_pixel_labels(cluster_arcs, regions)
    depths_all = np.concatenate([arc.depths for arc in cluster_arcs if len(arc)]) if len(u) else np.zeros(0)
    sel = labels == label
    if not np.any(sel):
        return FusedCloud.empty()

    column_depth: dict[int, float] = {}
    for col in np.unique(u[sel]):
        column_depth[int(col)] = float(depths_all[sel & (u == col)].mean())

    if column_fill == "nearest":
        region_cols = np.flatnonzero((regions.labels == label).any(axis=0))
        sampled = np.array(sorted(column_depth))
        for col in region_cols:
            if int(col) not in column_depth:
                nearest = sampled[np.argmin(np.abs(sampled - col))]
                column_depth[int(col)] = column_depth[int(nearest)]

    points, labels_out, cols_out, depths_out = [], [], [], []
    for col in sorted(column_depth):
        rows = np.flatnonzero(regions.labels[:, col] == label)[::row_stride]
        if rows.size == 0:
            continue
        zbar = column_depth[col]
        pixels = np.stack([np.full(rows.size, float(col)), rows.astype(float)], axis=1)
        points.append(back_project(pixels, zbar, calib.intrinsics))
        labels_out.append(np.full(rows.size, label, dtype=np.int32))
        cols_out.append(np.full(rows.size, col, dtype=np.int32))
        depths_out.append(np.full(rows.size, zbar))
    if not points:
        return FusedCloud.empty()
    return FusedCloud(
        np.concatenate(points),
        np.concatenate(labels_out),
        np.concatenate(cols_out),
        np.concatenate(depths_out),
    )


def reconstruct_frame(
    frame: SonarFrame,
    image: CameraImage,
    calib: Calibration,
    config: PipelineConfig | None = None,
) -> FusedCloud:
    """Run the full single-frame pipeline and return the fused camera-frame cloud.

    Stages: optical segmentation, CFAR detection, nearest-return
    extraction, density clustering, arc projection, region-cluster
    matching, and vertical expansion.  Empty intermediate results
    short-circuit to an empty cloud rather than raising.
    """
    cfg = config if config is not None else PipelineConfig()
    cfg.validate()

    regions = segment(
        image,
        sigma=cfg.sigma,
        block=cfg.block,
        offset=cfg.offset,
        marker_frac=cfg.marker_frac,
        dilate_px=cfg.dilate_px,
        min_region_size=cfg.min_region_size,
    )
    mask = soca_cfar(frame, cfg.train, cfg.guard, cfg.alpha)
    returns = nearest_return_per_bearing(frame, mask)
    clusters = dbscan_cluster(returns, cfg.eps, cfg.min_pts)
    arcs = project_cluster_arcs(clusters, calib, cfg.arc_samples_cap)
    matches = match_regions_to_clusters(regions, clusters, calib, cfg.arc_samples_cap, arcs=arcs)
    clouds = [
        expand_and_backproject(
            m, regions, arcs[m.cluster_index], calib, cfg.row_stride, cfg.column_fill
        )
        for m in matches
    ]
    return FusedCloud.concatenate(clouds)


def aggregate_clouds(clouds: list, poses: list[RigidTransform]) -> np.ndarray:
    """Apply one rigid transform per cloud and concatenate into an (n, 3) array.

    Accepts FusedCloud instances or bare (n, 3) arrays.  The caller
    decides the pose semantics; this function applies them verbatim.
    """
    if len(clouds) != len(poses):
        raise LengthMismatch(f"{len(clouds)} clouds but {len(poses)} poses")
    parts = []
    for cloud, pose in zip(clouds, poses):
        pts = cloud.points if isinstance(cloud, FusedCloud) else np.asarray(cloud, dtype=float)
        if pts.size:
            parts.append(pose.apply(pts))
    if not parts:
        return np.zeros((0, 3))
    return np.concatenate(parts)
