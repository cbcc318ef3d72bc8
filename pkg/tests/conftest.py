"""Shared fixtures: a small pier scene rendered once per session."""

import numpy as np
import pytest

from optifuse.geometry import Calibration, CameraIntrinsics, RigidTransform, canonical_extrinsics
from optifuse.segmentation import CameraImage
from optifuse.simulate import SonarGeometry, pier_scene, render_camera, render_sonar
from optifuse.turbidity import TurbidityParams, apply_turbidity, water_type

# One line per acceptance criterion, printed after the run summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


class PierBundle:
    """Noise-free render of the four-piling scene from a single pose."""

    def __init__(self):
        self.scene = pier_scene()
        self.geometry = SonarGeometry()
        self.pose = RigidTransform.identity()
        self.intrinsics = CameraIntrinsics(
            fx=500.0, fy=500.0, cu=320.0, cv=240.0, width=640, height=480
        )
        self.extrinsics = canonical_extrinsics()
        self.calib = Calibration(
            self.intrinsics,
            self.extrinsics,
            self.geometry.h_aperture,
            self.geometry.v_aperture,
            self.geometry.max_range,
        )
        self.frame = render_sonar(
            self.scene, self.pose, self.geometry, noise_amplitude=0.0, seed=0
        )
        camera_pose = self.pose.compose(self.extrinsics.inverse())
        gray, self.mask = render_camera(
            self.scene, camera_pose, self.intrinsics, background=0.05
        )
        self.image = CameraImage(np.repeat(gray.pixels[:, :, None], 3, axis=2))
        self.turbid_image = apply_turbidity(
            self.image,
            TurbidityParams(water=water_type("9C"), depth_m=1.0, mode="absolute"),
        )


@pytest.fixture(scope="session")
def pier():
    return PierBundle()
