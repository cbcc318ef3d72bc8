"""Sonar polar-image processing: detection, first-return extraction, clustering.

A forward-looking imaging sonar returns an intensity raster over beams
(bearing) and range bins.  Processing keeps only statistically
significant echoes, reduces each beam to its nearest return (the first
surface the beam met), and groups returns into object clusters in the
zero-elevation Cartesian plane.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np


class WindowTooLarge(ValueError):
    """CFAR train/guard windows do not fit inside the range axis."""


@dataclass(frozen=True)
class SonarFrame:
    """One polar sonar image.

    intensities has shape (num_beams, num_bins) with values in [0, 1];
    row b is the range profile of the beam at bearings[b].  Range bin j
    spans [j, j+1) * bin_length with its center at (j + 0.5) * bin_length.
    v_aperture is the (phi_min, phi_max) elevation interval the sonar
    integrates over.
    """

    intensities: np.ndarray
    bearings: np.ndarray
    bin_length: float
    v_aperture: tuple[float, float]

    def __post_init__(self) -> None:
        img = np.asarray(self.intensities, dtype=float)
        bearings = np.asarray(self.bearings, dtype=float)
        if img.ndim != 2:
            raise ValueError(f"intensities must be 2D, got shape {img.shape}")
        if bearings.shape != (img.shape[0],):
            raise ValueError("bearings must have one entry per beam")
        if img.size and (img.min() < 0.0 or img.max() > 1.0):
            raise ValueError("intensities must lie in [0, 1]")
        if bearings.size > 1 and not np.all(np.diff(bearings) > 0):
            raise ValueError("bearings must be strictly increasing")
        if self.bin_length <= 0.0:
            raise ValueError(f"bin_length must be positive, got {self.bin_length}")
        phi_min, phi_max = self.v_aperture
        if not phi_min < phi_max:
            raise ValueError(f"invalid elevation interval {self.v_aperture}")
        object.__setattr__(self, "intensities", img)
        object.__setattr__(self, "bearings", bearings)
        object.__setattr__(self, "v_aperture", (float(phi_min), float(phi_max)))

    @property
    def num_beams(self) -> int:
        return self.intensities.shape[0]

    @property
    def num_bins(self) -> int:
        return self.intensities.shape[1]

    @property
    def max_range(self) -> float:
        return self.num_bins * self.bin_length

    @classmethod
    def uniform(
        cls,
        intensities: np.ndarray,
        h_aperture: float,
        v_aperture: float,
        max_range: float,
    ) -> "SonarFrame":
        """Build a frame with beam centers spread uniformly over h_aperture."""
        intensities = np.asarray(intensities, dtype=float)
        num_beams, num_bins = intensities.shape
        bearings = (np.arange(num_beams) + 0.5) / num_beams * h_aperture - 0.5 * h_aperture
        return cls(
            intensities,
            bearings,
            max_range / num_bins,
            (-0.5 * v_aperture, 0.5 * v_aperture),
        )


@dataclass(frozen=True)
class PolarReturn:
    """One detected echo: range (bin center, meters), bearing, intensity."""

    r: float
    theta: float
    intensity: float

    def __post_init__(self) -> None:
        if self.r <= 0.0:
            raise ValueError(f"range must be positive, got {self.r}")

    def xy(self) -> tuple[float, float]:
        """Zero-elevation Cartesian position (x forward, y starboard)."""
        return self.r * math.cos(self.theta), self.r * math.sin(self.theta)


@dataclass(frozen=True)
class ClusterSet:
    """DBSCAN output: clusters in discovery order plus unclustered noise."""

    clusters: list[list[PolarReturn]]
    noise: list[PolarReturn]

    def all_returns(self) -> list[PolarReturn]:
        out: list[PolarReturn] = []
        for cluster in self.clusters:
            out.extend(cluster)
        out.extend(self.noise)
        return out


def soca_cfar(
    frame: SonarFrame, train: int = 16, guard: int = 4, alpha: float = 3.0
) -> np.ndarray:
    """Smallest-of cell-averaging CFAR along the range axis of each beam.

    For each cell, the means of the leading and lagging windows (train
    cells each, separated from the cell by guard cells on either side)
    estimate the local noise floor; taking the smaller of the two keeps
    the estimate honest at object edges, where one window is
    contaminated by the object itself.  A cell is a detection when its
    intensity exceeds alpha times that estimate.  Cells whose windows
    would cross the array boundary are never detections.

    Returns a boolean mask with the shape of frame.intensities.
    """
    if train < 1:
        raise ValueError(f"train must be >= 1, got {train}")
    if guard < 0:
        raise ValueError(f"guard must be >= 0, got {guard}")
    if alpha <= 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    half_window = train + guard
    num_bins = frame.num_bins
    if 2 * half_window >= num_bins:
        raise WindowTooLarge(
            f"train+guard={half_window} needs {2 * half_window + 1} bins, frame has {num_bins}"
        )

    x = frame.intensities
    # prefix[:, j] is the sum of the first j cells of each beam.
    prefix = np.zeros((frame.num_beams, num_bins + 1))
    prefix[:, 1:] = np.cumsum(x, axis=1)

    lo, hi = half_window, num_bins - half_window  # valid cell indices [lo, hi)
    lead = (prefix[:, lo - guard : hi - guard] - prefix[:, lo - half_window : hi - half_window]) / train
    lag = (prefix[:, lo + guard + 1 + train : hi + guard + 1 + train] - prefix[:, lo + guard + 1 : hi + guard + 1]) / train
    noise = np.minimum(lead, lag)

    mask = np.zeros(x.shape, dtype=bool)
    mask[:, lo:hi] = x[:, lo:hi] > alpha * noise
    return mask


def nearest_return_per_bearing(frame: SonarFrame, mask: np.ndarray) -> list[PolarReturn]:
    """Reduce each beam to its minimum-range detection.

    The first echo along a beam is the surface the beam met first;
    later detections are occluded structure or multipath.  Ranges are
    bin centers.  Beams without detections contribute nothing, so the
    output is ordered by beam and has at most num_beams entries.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != frame.intensities.shape:
        raise ValueError("mask shape must match frame intensities")
    out: list[PolarReturn] = []
    for b in range(frame.num_beams):
        hits = np.flatnonzero(mask[b])
        if hits.size:
            j = int(hits[0])
            out.append(
                PolarReturn(
                    (j + 0.5) * frame.bin_length,
                    float(frame.bearings[b]),
                    float(frame.intensities[b, j]),
                )
            )
    return out


def dbscan_cluster(
    returns: list[PolarReturn], eps: float = 0.10, min_pts: int = 3
) -> ClusterSet:
    """Density clustering of returns in the zero-elevation Cartesian plane.

    Distances are Euclidean in meters (x = r cos theta, y = r sin theta),
    so eps means the same thing at every range, unlike a bin/beam grid
    metric.  A point is core when at least min_pts points, itself
    included, lie within eps.  Clusters grow from unvisited core points
    in input order with a FIFO expansion, so border points join the
    earliest-formed cluster that reaches them and the result is
    deterministic for a fixed input order.
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    if min_pts < 1:
        raise ValueError(f"min_pts must be >= 1, got {min_pts}")
    n = len(returns)
    if n == 0:
        return ClusterSet([], [])

    xy = np.array([p.xy() for p in returns])
    delta = xy[:, None, :] - xy[None, :, :]
    dist2 = np.einsum("ijk,ijk->ij", delta, delta)
    within = dist2 <= eps * eps
    neighbors = [np.flatnonzero(row) for row in within]
    core = within.sum(axis=1) >= min_pts

    UNVISITED = -1
    labels = np.full(n, UNVISITED)
    next_label = 0
    for start in range(n):
        if labels[start] != UNVISITED or not core[start]:
            continue
        labels[start] = next_label
        queue = deque([start])
        while queue:
            here = queue.popleft()
            for other in neighbors[here]:
                if labels[other] == UNVISITED:
                    labels[other] = next_label
                    if core[other]:
                        queue.append(int(other))
        next_label += 1

    clusters: list[list[PolarReturn]] = [[] for _ in range(next_label)]
    noise: list[PolarReturn] = []
    for i, ret in enumerate(returns):
        if labels[i] == UNVISITED:
            noise.append(ret)
        else:
            clusters[labels[i]].append(ret)
    return ClusterSet(clusters, noise)
