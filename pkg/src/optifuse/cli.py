"""Command line front end.

Subcommands:

* synth: render a synthetic scene into numbered sonar/camera frame files
* turbidity: degrade a PPM image through a simulated water column
* reconstruct: fuse sonar/camera frame pairs into a point cloud
* eval coverage, eval error: metrics over saved clouds

All diagnostics go to stderr as a single `error: ...` line with exit
code 2; success is exit 0.  OPTIFUSE_THREADS caps reconstruction worker
threads (0 or unset runs frames sequentially); results are ordered by
frame index either way.
"""

from __future__ import annotations

import argparse
import math
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import formats
from .config import PipelineConfig
from .fusion import FusedCloud, reconstruct_frame
from .geometry import Calibration, CameraIntrinsics, RigidTransform, canonical_extrinsics
from .metrics import absolute_error, voxel_count
from .segmentation import CameraImage
from .simulate import SonarGeometry, pier_scene, render_camera, render_sonar, seawall_scene
from .turbidity import WATER_TYPE_NAMES, TurbidityParams, apply_turbidity, water_type

_INDEX_RE = re.compile(r"(\d+)$")


def _frame_index(path: Path) -> int:
    m = _INDEX_RE.search(path.stem)
    if m is None:
        raise ValueError(f"no numeric frame suffix in file name: {path.name}")
    return int(m.group(1))


def _collect_pairs(sonar_arg: str, image_arg: str) -> list[tuple[Path, Path]]:
    """Pair sonar and image inputs by zero-padded numeric filename suffix."""
    sonar_path, image_path = Path(sonar_arg), Path(image_arg)
    for p, what in ((sonar_path, "sonar"), (image_path, "image")):
        if not p.exists():
            raise FileNotFoundError(f"{what} input not found: {p}")
    if sonar_path.is_dir() != image_path.is_dir():
        raise ValueError("--sonar and --image must both be files or both be directories")
    if not sonar_path.is_dir():
        return [(sonar_path, image_path)]

    sonar_files = sorted(sonar_path.glob("*.sfr"))
    # Masks and other byproducts are PGM, so PPM wins when both exist.
    image_files = sorted(image_path.glob("*.ppm")) or sorted(image_path.glob("*.pgm"))
    if not sonar_files:
        raise ValueError(f"no .sfr files in {sonar_path}")
    by_index_sonar = {}
    for f in sonar_files:
        idx = _frame_index(f)
        if idx in by_index_sonar:
            raise ValueError(f"duplicate sonar frame index {idx} in {sonar_path}")
        by_index_sonar[idx] = f
    by_index_image = {}
    for f in image_files:
        idx = _frame_index(f)
        if idx in by_index_image:
            raise ValueError(f"duplicate image frame index {idx} in {image_path}")
        by_index_image[idx] = f
    if set(by_index_sonar) != set(by_index_image):
        missing = sorted(set(by_index_sonar) ^ set(by_index_image))
        raise ValueError(f"unmatched frame indices between sonar and image inputs: {missing}")
    return [(by_index_sonar[i], by_index_image[i]) for i in sorted(by_index_sonar)]


def _run_reconstruct(args) -> int:
    calib_path = Path(args.calib)
    if not calib_path.exists():
        raise FileNotFoundError(f"calibration file not found: {calib_path}")
    calib = formats.read_calibration(calib_path)
    config = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    pairs = _collect_pairs(args.sonar, args.image)
    poses = formats.read_poses(args.poses) if args.poses else None
    if poses is not None and len(poses) != len(pairs):
        raise ValueError(f"{len(poses)} poses given for {len(pairs)} frame pairs")

    def run_one(pair: tuple[Path, Path]):
        frame = formats.read_sonar_frame(pair[0])
        image = formats.read_image(pair[1])
        t0 = time.perf_counter()
        cloud = reconstruct_frame(frame, image, calib, config)
        return cloud, (time.perf_counter() - t0) * 1e3

    workers = int(os.environ.get("OPTIFUSE_THREADS", "0") or "0")
    if workers > 0:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, pairs))
    else:
        results = [run_one(pair) for pair in pairs]

    clouds = []
    for (sonar_file, _), (cloud, ms) in zip(pairs, results):
        print(f"{sonar_file.name}: {len(cloud)} points in {ms:.1f} ms")
        clouds.append(cloud)

    if poses is not None:
        # Clouds are camera-frame; poses map the sonar frame to the world.
        moved = []
        for cloud, pose in zip(clouds, poses):
            to_world = pose.compose(calib.extrinsics.inverse())
            moved.append(
                FusedCloud(
                    to_world.apply(cloud.points) if len(cloud) else cloud.points,
                    cloud.region_labels,
                    cloud.columns,
                    cloud.depths,
                )
            )
        combined = FusedCloud.concatenate(moved)
    else:
        combined = FusedCloud.concatenate(clouds)

    if args.provenance:
        formats.write_ply(args.out, combined.points, combined.region_labels, combined.columns)
    else:
        formats.write_ply(args.out, combined.points)
    if args.xyz:
        formats.write_xyz(args.xyz, combined.points)
    print(f"wrote {len(combined)} points to {args.out}")
    return 0


def _run_synth(args) -> int:
    if args.scene == "pier":
        scene = pier_scene()
    elif args.scene == "seawall":
        scene = seawall_scene()
    else:
        scene = formats.read_scene(args.scene)
    poses = formats.read_poses(args.poses) if args.poses else [RigidTransform.identity()]
    geometry = SonarGeometry(
        num_beams=args.beams,
        num_bins=args.bins,
        h_aperture=math.radians(args.h_aperture_deg),
        v_aperture=math.radians(args.v_aperture_deg),
        max_range=args.max_range,
    )
    intrinsics = CameraIntrinsics(
        fx=args.fx,
        fy=args.fy,
        cu=args.width / 2.0,
        cv=args.height / 2.0,
        width=args.width,
        height=args.height,
    )
    extrinsics = canonical_extrinsics()
    calib = Calibration(
        intrinsics, extrinsics, geometry.h_aperture, geometry.v_aperture, geometry.max_range
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    formats.write_calibration(out_dir / "calib.txt", calib)
    formats.write_scene(out_dir / "scene.txt", scene)
    formats.write_poses(out_dir / "poses.txt", poses)

    sonar_to_camera_inv = extrinsics.inverse()
    for i, pose in enumerate(poses):
        frame = render_sonar(
            scene,
            pose,
            geometry,
            elevation_samples=args.elevation_samples,
            noise_amplitude=args.noise_amplitude,
            seed=args.seed + i,
        )
        camera_pose = pose.compose(sonar_to_camera_inv)
        image, mask = render_camera(scene, camera_pose, intrinsics, background=args.background)
        rgb = CameraImage(np.repeat(image.pixels[:, :, None], 3, axis=2))
        formats.write_sonar_frame(out_dir / f"sonar_{i:03d}.sfr", frame)
        formats.write_ppm(out_dir / f"image_{i:03d}.ppm", rgb)
        formats.write_label_pgm(out_dir / f"mask_{i:03d}.pgm", mask)
        print(f"pose {i:03d}: sonar_{i:03d}.sfr image_{i:03d}.ppm mask_{i:03d}.pgm")
    return 0


def _run_turbidity(args) -> int:
    image = formats.read_image(args.input)
    params = TurbidityParams(
        water=water_type(args.water_type, rgb_header=args.rgb_header),
        depth_m=args.depth,
        mode=args.mode,
    )
    formats.write_ppm(args.out, apply_turbidity(image, params))
    return 0


def _read_cloud(path: str) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"cloud file not found: {p}")
    if p.suffix.lower() in (".xyz", ".csv"):
        return formats.read_xyz(p)
    return formats.read_ply(p)


def _run_eval_coverage(args) -> int:
    print(voxel_count(_read_cloud(args.cloud), args.resolution))
    return 0


def _run_eval_error(args) -> int:
    points = _read_cloud(args.cloud)
    scene = formats.read_scene(args.scene)
    report = absolute_error(points, scene)
    if args.report:
        lines = ["x,y,z,distance"]
        for (x, y, z), d in zip(points, report.distances):
            lines.append(f"{x!r},{y!r},{z!r},{d!r}")
        Path(args.report).write_text("\n".join(lines) + "\n", encoding="ascii")
    for name in ("median", "mean", "max", "p90", "p95"):
        print(f"{name} {getattr(report, name):.6g}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="optifuse")
    sub = parser.add_subparsers(dest="command", required=True)

    rec = sub.add_parser("reconstruct", help="fuse sonar/camera frames into a point cloud")
    rec.add_argument("--sonar", required=True, help="sonar frame file or directory of *.sfr")
    rec.add_argument("--image", required=True, help="image file or directory of *.ppm/*.pgm")
    rec.add_argument("--calib", required=True, help="calibration file")
    rec.add_argument("--config", help="pipeline config file (defaults when omitted)")
    rec.add_argument("--poses", help="sonar-to-world pose file, one line per frame")
    rec.add_argument("--out", required=True, help="output PLY path")
    rec.add_argument("--xyz", help="also write a CSV x,y,z cloud here")
    rec.add_argument("--provenance", action="store_true", help="emit region/column PLY properties")
    rec.set_defaults(func=_run_reconstruct)

    syn = sub.add_parser("synth", help="render a synthetic scene to frame files")
    syn.add_argument("--scene", default="pier", help="pier, seawall, or a scene file path")
    syn.add_argument("--poses", help="sonar-to-world pose file (default: identity)")
    syn.add_argument("--out-dir", required=True)
    syn.add_argument("--beams", type=int, default=256)
    syn.add_argument("--bins", type=int, default=512)
    syn.add_argument("--h-aperture-deg", type=float, default=90.0)
    syn.add_argument("--v-aperture-deg", type=float, default=10.0)
    syn.add_argument("--max-range", type=float, default=3.0)
    syn.add_argument("--elevation-samples", type=int, default=64)
    syn.add_argument("--noise-amplitude", type=float, default=0.05)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--background", type=float, default=0.05)
    syn.add_argument("--fx", type=float, default=500.0)
    syn.add_argument("--fy", type=float, default=500.0)
    syn.add_argument("--width", type=int, default=640)
    syn.add_argument("--height", type=int, default=480)
    syn.set_defaults(func=_run_synth)

    tur = sub.add_parser("turbidity", help="apply synthetic water turbidity to a PPM")
    tur.add_argument("--in", dest="input", required=True, help="input PPM (P6)")
    tur.add_argument("--water-type", required=True, choices=WATER_TYPE_NAMES)
    tur.add_argument("--depth", type=float, default=1.0, help="optical path length in meters")
    tur.add_argument("--mode", choices=("relative", "absolute"), default="relative")
    tur.add_argument("--rgb-header", action="store_true",
                     help="read the coefficient table columns as R,G,B instead of R,B,G")
    tur.add_argument("--out", required=True, help="output PPM path")
    tur.set_defaults(func=_run_turbidity)

    ev = sub.add_parser("eval", help="metrics over saved point clouds")
    evsub = ev.add_subparsers(dest="metric", required=True)
    cov = evsub.add_parser("coverage", help="occupied voxel count")
    cov.add_argument("--cloud", required=True, help="PLY or XYZ cloud")
    cov.add_argument("--resolution", type=float, default=0.01)
    cov.set_defaults(func=_run_eval_coverage)
    err = evsub.add_parser("error", help="distance-to-scene statistics")
    err.add_argument("--cloud", required=True, help="PLY or XYZ cloud")
    err.add_argument("--scene", required=True, help="scene file")
    err.add_argument("--report", help="write per-point CSV here")
    err.set_defaults(func=_run_eval_error)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
