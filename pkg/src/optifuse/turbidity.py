"""Synthetic water turbidity via a per-channel image formation model.

A clear-water image J degrades to

    I_c = J_c * t_c + (1 - t_c) * B_c,        t_c = exp(-beta_c * d)

per channel c: direct signal attenuated by transmission t plus veiling
light that converges to the background color B as the optical depth
grows.  beta is the attenuation coefficient of the simulated water type
and d the simulated distance through it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .segmentation import CameraImage

# Veiling background color (R, G, B) measured from deep-water imagery.
DEFAULT_BACKGROUND = (0.6240, 0.805, 0.7651)

# Attenuation coefficients (1/m) per water type.  Column order in the
# source table is red, blue, green; water_type() maps columns to named
# channels and rgb_header=True reinterprets them as conventional RGB
# for users convinced the header is a typo.
_ATTENUATION_TABLE: dict[str, tuple[float, float, float]] = {
    "I": (0.85, 0.96, 0.98),
    "5C": (0.67, 0.73, 0.67),
    "7C": (0.62, 0.61, 0.50),
    "9C": (0.55, 0.46, 0.29),
}

WATER_TYPE_NAMES = tuple(_ATTENUATION_TABLE)


class GrayscaleInput(ValueError):
    """Turbidity synthesis needs a 3-channel image."""


@dataclass(frozen=True)
class WaterType:
    """Named water clarity preset with per-channel attenuation in (0, 1].

    beta is ordered (red, green, blue).  rgb_header records which column
    convention built the preset so that relative-mode references use the
    same one.
    """

    name: str
    beta: np.ndarray
    rgb_header: bool = False

    def __post_init__(self) -> None:
        beta = np.asarray(self.beta, dtype=float)
        if beta.shape != (3,):
            raise ValueError(f"beta must have one value per channel, got shape {beta.shape}")
        if np.any(beta <= 0.0) or np.any(beta > 1.0):
            raise ValueError(f"attenuation coefficients must lie in (0, 1], got {beta}")
        object.__setattr__(self, "beta", beta)


def water_type(name: str, rgb_header: bool = False) -> WaterType:
    """Look up a water type preset by name (I, 5C, 7C, or 9C)."""
    if name not in _ATTENUATION_TABLE:
        raise ValueError(f"unknown water type {name!r}, expected one of {WATER_TYPE_NAMES}")
    col1, col2, col3 = _ATTENUATION_TABLE[name]
    if rgb_header:
        red, green, blue = col1, col2, col3
    else:
        red, blue, green = col1, col2, col3
    return WaterType(name, np.array([red, green, blue]), rgb_header)


@dataclass(frozen=True)
class TurbidityParams:
    """Water type, optical path length, veiling color, and coefficient mode.

    In relative mode (the default) the type-I coefficients are
    subtracted channel-wise before computing transmission: source
    imagery is treated as already containing type-I water, so type I
    maps to the identity and clearer-than-type-I channels clamp to zero
    attenuation instead of amplifying.  Absolute mode uses the raw
    coefficients.
    """

    water: WaterType
    depth_m: float = 1.0
    background: tuple[float, float, float] = DEFAULT_BACKGROUND
    mode: str = "relative"

    def __post_init__(self) -> None:
        if self.depth_m <= 0.0:
            raise ValueError(f"depth must be positive, got {self.depth_m}")
        bg = np.asarray(self.background, dtype=float)
        if bg.shape != (3,):
            raise ValueError(f"background must be an RGB triple, got shape {bg.shape}")
        if np.any(bg < 0.0) or np.any(bg > 1.0):
            raise ValueError(f"background must lie in [0, 1], got {bg}")
        if self.mode not in ("relative", "absolute"):
            raise ValueError(f"mode must be 'relative' or 'absolute', got {self.mode!r}")


def transmission(params: TurbidityParams) -> np.ndarray:
    """Per-channel transmission exp(-beta_eff * depth), each in (0, 1]."""
    beta = params.water.beta
    if params.mode == "relative":
        reference = water_type("I", params.water.rgb_header).beta
        beta = np.clip(beta - reference, 0.0, None)
    return np.exp(-beta * params.depth_m)


def apply_turbidity(img: CameraImage, params: TurbidityParams) -> CameraImage:
    """Degrade an RGB image by the configured water column.

    Output pixels are J * t + (1 - t) * B per channel, clamped to
    [0, 1].  Transmission of 1 in every channel returns the input
    pixels unchanged.
    """
    if img.channels != 3:
        raise GrayscaleInput("turbidity synthesis requires an RGB image")
    t = transmission(params)
    background = np.asarray(params.background, dtype=float)
    out = img.pixels * t + (1.0 - t) * background
    return CameraImage(np.clip(out, 0.0, 1.0))
