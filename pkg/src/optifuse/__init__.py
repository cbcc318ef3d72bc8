"""Opti-acoustic scene reconstruction from imaging sonar and a monocular camera.

The package fuses forward-looking sonar range returns with camera
segmentation to recover metric 3D structure: sonar contributes range,
the camera constrains the elevation angle that a single sonar ping
cannot resolve on its own.  A small simulator, a water-turbidity
synthesizer, evaluation metrics, and file formats round out the
pipeline so it can be exercised end to end without hardware.
"""

from .config import PipelineConfig
from .fusion import FusedCloud, aggregate_clouds, reconstruct_frame
from .geometry import (
    Calibration,
    CameraIntrinsics,
    RigidTransform,
    back_project,
    canonical_extrinsics,
    project_to_pixel,
    spherical_to_cartesian,
)
from .metrics import ErrorReport, VoxelGrid, absolute_error, voxel_count
from .segmentation import CameraImage, RegionMap, segment
from .simulate import (
    Box,
    Cylinder,
    SceneModel,
    SonarGeometry,
    pier_scene,
    render_camera,
    render_sonar,
    seawall_scene,
)
from .sonar import ClusterSet, PolarReturn, SonarFrame, dbscan_cluster, soca_cfar
from .turbidity import TurbidityParams, WaterType, apply_turbidity, water_type

__version__ = "0.1.0"

__all__ = [
    "Box",
    "Calibration",
    "CameraImage",
    "CameraIntrinsics",
    "ClusterSet",
    "Cylinder",
    "ErrorReport",
    "FusedCloud",
    "PipelineConfig",
    "PolarReturn",
    "RegionMap",
    "RigidTransform",
    "SceneModel",
    "SonarFrame",
    "SonarGeometry",
    "TurbidityParams",
    "VoxelGrid",
    "WaterType",
    "absolute_error",
    "aggregate_clouds",
    "apply_turbidity",
    "back_project",
    "canonical_extrinsics",
    "dbscan_cluster",
    "pier_scene",
    "project_to_pixel",
    "reconstruct_frame",
    "render_camera",
    "render_sonar",
    "seawall_scene",
    "segment",
    "soca_cfar",
    "spherical_to_cartesian",
    "voxel_count",
    "water_type",
    "__version__",
]
