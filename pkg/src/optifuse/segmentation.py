"""Optical segmentation of low-contrast images into regions of interest.

The chain is Gaussian denoising, grayscale conversion, locally adaptive
thresholding, marker-controlled watershed, and a minimum-size filter.
It targets bright structure against darker water without relying on
point features, which scattering media wash out long before they erase
region-scale contrast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.segmentation import watershed

GRAY_WEIGHTS = (0.299, 0.587, 0.114)

# Defaults tuned on the bundled synthetic scenes; PipelineConfig exposes
# every one of them.
DEFAULT_SIGMA = 2.0
DEFAULT_BLOCK = 31
DEFAULT_OFFSET = 0.02
DEFAULT_MARKER_FRAC = 0.5
DEFAULT_DILATE_PX = 3
DEFAULT_MIN_REGION_SIZE = 334


class EvenBlock(ValueError):
    """Adaptive threshold block size must be odd and >= 3."""


@dataclass(frozen=True)
class CameraImage:
    """Raster image with values in [0, 1]: (h, w) gray or (h, w, 3) RGB."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels, dtype=float)
        if not (px.ndim == 2 or (px.ndim == 3 and px.shape[2] == 3)):
            raise ValueError(f"expected (h, w) or (h, w, 3) pixels, got shape {px.shape}")
        if px.shape[0] == 0 or px.shape[1] == 0:
            raise ValueError("image must not be empty")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3


@dataclass(frozen=True)
class RegionMap:
    """Per-pixel integer region labels; 0 is background.

    Labels of surviving regions are dense, starting at 1, in raster scan
    order of first appearance.  region_sizes maps label -> pixel count.
    """

    labels: np.ndarray
    region_sizes: dict[int, int]

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ValueError(f"labels must be 2D, got shape {labels.shape}")
        if labels.size and labels.min() < 0:
            raise ValueError("labels must be non-negative")
        object.__setattr__(self, "labels", labels.astype(np.int32))

    @classmethod
    def from_labels(cls, labels: np.ndarray) -> "RegionMap":
        labels = np.asarray(labels)
        values, counts = np.unique(labels, return_counts=True)
        sizes = {int(v): int(c) for v, c in zip(values, counts) if v > 0}
        return cls(labels, sizes)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    def num_regions(self) -> int:
        return len(self.region_sizes)


def to_gray(img: CameraImage) -> CameraImage:
    """Luminance grayscale conversion (0.299 R + 0.587 G + 0.114 B)."""
    if img.channels == 1:
        return img
    gray = img.pixels @ np.asarray(GRAY_WEIGHTS)
    return CameraImage(np.clip(gray, 0.0, 1.0))


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1D Gaussian taps with radius ceil(3 sigma)."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=float)
    taps = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return taps / taps.sum()


def gaussian_blur(img: CameraImage, sigma: float = DEFAULT_SIGMA) -> CameraImage:
    """Separable Gaussian smoothing with a reflected border.

    The reflected border keeps total intensity unchanged, so the blur
    never brightens or darkens the frame as a whole.
    """
    taps = gaussian_kernel(sigma)

    def smooth(plane: np.ndarray) -> np.ndarray:
        tmp = ndimage.correlate1d(plane, taps, axis=0, mode="reflect")
        return ndimage.correlate1d(tmp, taps, axis=1, mode="reflect")

    if img.channels == 1:
        out = smooth(img.pixels)
    else:
        out = np.stack([smooth(img.pixels[:, :, c]) for c in range(3)], axis=-1)
    return CameraImage(np.clip(out, 0.0, 1.0))


def adaptive_threshold(
    img: CameraImage, block: int = DEFAULT_BLOCK, offset: float = DEFAULT_OFFSET
) -> CameraImage:
    """Binary mask of pixels that exceed their local mean by `offset`.

    The local mean is a block x block box average with a reflected
    border, so the comparison adapts to smooth illumination changes and
    a globally flat image yields no foreground at any positive offset.
    Output pixels are exactly 0.0 or 1.0.
    """
    if img.channels != 1:
        raise ValueError("adaptive_threshold expects a grayscale image")
    if block < 3 or block % 2 == 0:
        raise EvenBlock(f"block must be odd and >= 3, got {block}")
    local_mean = ndimage.uniform_filter(img.pixels, size=block, mode="reflect")
    return CameraImage((img.pixels > local_mean + offset).astype(float))


def watershed_segment(
    binary: CameraImage,
    marker_frac: float = DEFAULT_MARKER_FRAC,
    dilate_px: int = DEFAULT_DILATE_PX,
) -> RegionMap:
    """Split the binary foreground into regions with a marker-controlled watershed.

    Foreground markers are the connected components of pixels whose
    distance transform exceeds marker_frac times its maximum, the
    background marker is the complement of the foreground dilated by
    dilate_px, and flooding runs on the inverted distance map.  Ridge
    pixels where basins meet stay 0, and the result is relabeled into
    4-connected components so labels are dense and unambiguous.
    """
    if not 0.0 < marker_frac <= 1.0:
        raise ValueError(f"marker_frac must be in (0, 1], got {marker_frac}")
    if dilate_px < 0:
        raise ValueError(f"dilate_px must be non-negative, got {dilate_px}")
    foreground = binary.pixels > 0.5
    empty = np.zeros(foreground.shape, dtype=np.int32)
    if not foreground.any():
        return RegionMap.from_labels(empty)

    distance = ndimage.distance_transform_edt(foreground)
    seeds = distance > marker_frac * distance.max()
    seed_labels, num_seeds = ndimage.label(seeds)
    if num_seeds == 0:
        return RegionMap.from_labels(empty)

    if dilate_px > 0:
        reach = ndimage.binary_dilation(foreground, iterations=dilate_px)
    else:
        reach = foreground
    markers = np.zeros(foreground.shape, dtype=np.int32)
    markers[~reach] = 1
    markers[seeds] = seed_labels[seeds] + 1

    flooded = watershed(-distance, markers, connectivity=1, watershed_line=True)
    # Label 1 is the background basin; 0 marks watershed ridges.
    region_pixels = flooded > 1
    relabeled, _ = ndimage.label(region_pixels)
    return RegionMap.from_labels(relabeled)


def filter_regions(regions: RegionMap, min_size: int = DEFAULT_MIN_REGION_SIZE) -> RegionMap:
    """Drop regions smaller than min_size pixels and renumber densely from 1."""
    if min_size < 0:
        raise ValueError(f"min_size must be non-negative, got {min_size}")
    keep = sorted(label for label, size in regions.region_sizes.items() if size >= min_size)
    if not keep:
        return RegionMap(np.zeros_like(regions.labels), {})
    lut = np.zeros(int(regions.labels.max()) + 1, dtype=np.int32)
    sizes: dict[int, int] = {}
    for new, old in enumerate(keep, start=1):
        lut[old] = new
        sizes[new] = regions.region_sizes[old]
    return RegionMap(lut[regions.labels], sizes)


def segment(
    img: CameraImage,
    *,
    sigma: float = DEFAULT_SIGMA,
    block: int = DEFAULT_BLOCK,
    offset: float = DEFAULT_OFFSET,
    marker_frac: float = DEFAULT_MARKER_FRAC,
    dilate_px: int = DEFAULT_DILATE_PX,
    min_region_size: int = DEFAULT_MIN_REGION_SIZE,
) -> RegionMap:
    """Full optical chain: blur, grayscale, adaptive threshold, watershed, size filter.

    Deterministic: identical input and parameters give an identical
    RegionMap.
    """
    blurred = gaussian_blur(img, sigma)
    gray = to_gray(blurred)
    binary = adaptive_threshold(gray, block, offset)
    regions = watershed_segment(binary, marker_frac, dilate_px)
    return filter_regions(regions, min_region_size)
