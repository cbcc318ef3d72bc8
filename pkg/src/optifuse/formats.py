"""Readers and writers for every on-disk format the pipeline touches.

Grammars are documented bit-exactly in docs/formats.md.  Writers are
deterministic: the same data always produces the same bytes, which the
end-to-end tests rely on.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .geometry import Calibration, CameraIntrinsics, RigidTransform
from .segmentation import CameraImage
from .simulate import Box, Cylinder, SceneModel, ScenePrimitive
from .sonar import SonarFrame


class FormatError(ValueError):
    """A file does not follow its documented grammar."""


def _fmt(x: float) -> str:
    """Full-precision decimal rendering of a float64."""
    return repr(float(x))


def _fmt32(x: float) -> str:
    """Decimal rendering that round-trips float32 exactly."""
    return f"{float(np.float32(x)):.9g}"


# ---------------------------------------------------------------------------
# netpbm images (PGM P5, PPM P6)

def _parse_pnm_header(data: bytes, path) -> tuple[bytes, list[int], int]:
    """Return (magic, [width, height, maxval], payload_offset)."""
    if len(data) < 2:
        raise FormatError(f"{path}: truncated image file")
    magic = data[:2]
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        if pos >= len(data):
            raise FormatError(f"{path}: truncated image header")
        ch = data[pos : pos + 1]
        if ch == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise FormatError(f"{path}: unterminated comment")
            pos = nl + 1
        elif ch.isspace():
            pos += 1
        elif ch.isdigit():
            end = pos
            while end < len(data) and data[end : end + 1].isdigit():
                end += 1
            fields.append(int(data[pos:end]))
            pos = end
        else:
            raise FormatError(f"{path}: unexpected byte {ch!r} in image header")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError(f"{path}: missing whitespace after image header")
    return magic, fields, pos + 1


def read_image(path) -> CameraImage:
    """Read a PGM (P5) or PPM (P6) image, or PNG when Pillow is installed.

    8-bit samples only; values are scaled to [0, 1].
    """
    path = Path(path)
    if path.suffix.lower() == ".png":
        try:
            from PIL import Image
        except ImportError as exc:
            raise FormatError(f"{path}: PNG support requires Pillow") from exc
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB" if im.mode not in ("L", "I;16") else "L"))
        return CameraImage(arr.astype(float) / 255.0)

    data = path.read_bytes()
    magic, (width, height, maxval), offset = _parse_pnm_header(data, path)
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: expected P5 or P6, got {magic!r}")
    if not 0 < maxval < 256:
        raise FormatError(f"{path}: only 8-bit images supported, maxval={maxval}")
    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    payload = data[offset : offset + expected]
    if len(payload) != expected:
        raise FormatError(f"{path}: expected {expected} pixel bytes, found {len(payload)}")
    arr = np.frombuffer(payload, dtype=np.uint8).astype(float) / maxval
    if channels == 1:
        return CameraImage(arr.reshape(height, width))
    return CameraImage(arr.reshape(height, width, 3))


def _quantize(values: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_pgm(path, image) -> None:
    """Write a grayscale image (CameraImage or 2D array in [0, 1]) as 8-bit P5."""
    arr = image.pixels if isinstance(image, CameraImage) else np.asarray(image, dtype=float)
    if arr.ndim != 2:
        raise FormatError("write_pgm needs a single-channel image")
    h, w = arr.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + _quantize(arr).tobytes())


def write_ppm(path, image: CameraImage) -> None:
    """Write an RGB CameraImage as 8-bit P6."""
    arr = image.pixels if isinstance(image, CameraImage) else np.asarray(image, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise FormatError("write_ppm needs a 3-channel image")
    h, w, _ = arr.shape
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + _quantize(arr).tobytes())


def write_label_pgm(path, labels: np.ndarray) -> None:
    """Write an integer label raster as PGM, 16-bit big-endian when needed."""
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise FormatError("write_label_pgm needs a 2D label array")
    if arr.size and arr.min() < 0:
        raise FormatError("labels must be non-negative")
    top = int(arr.max()) if arr.size else 0
    maxval = max(top, 1)
    if maxval > 65535:
        raise FormatError(f"labels exceed 16-bit PGM range: {maxval}")
    h, w = arr.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    if maxval < 256:
        payload = arr.astype(np.uint8).tobytes()
    else:
        payload = arr.astype(">u2").tobytes()
    Path(path).write_bytes(header + payload)


def read_label_pgm(path) -> np.ndarray:
    """Read a label raster written by write_label_pgm."""
    path = Path(path)
    data = path.read_bytes()
    magic, (width, height, maxval), offset = _parse_pnm_header(data, path)
    if magic != b"P5":
        raise FormatError(f"{path}: expected P5 label image, got {magic!r}")
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    expected = width * height * dtype.itemsize if maxval >= 256 else width * height
    payload = data[offset : offset + expected]
    if len(payload) != expected:
        raise FormatError(f"{path}: truncated label payload")
    return np.frombuffer(payload, dtype=dtype).reshape(height, width).astype(np.int32)


# ---------------------------------------------------------------------------
# key=value text files

def _parse_keyvalues(text: str, path) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in out:
            raise FormatError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


_CALIB_KEYS = (
    "fx",
    "fy",
    "cu",
    "cv",
    "width",
    "height",
    "rot",
    "trans",
    "sonar_h_aperture_deg",
    "sonar_v_aperture_deg",
    "sonar_max_range_m",
)


def read_calibration(path) -> Calibration:
    """Parse a key=value calibration file.

    All keys are required; unknown keys are rejected.  rot holds nine
    row-major floats of the sonar-to-camera rotation, trans the
    translation in meters.
    """
    path = Path(path)
    pairs = _parse_keyvalues(path.read_text(encoding="ascii"), path)
    unknown = set(pairs) - set(_CALIB_KEYS)
    if unknown:
        raise FormatError(f"{path}: unknown calibration keys {sorted(unknown)}")
    missing = set(_CALIB_KEYS) - set(pairs)
    if missing:
        raise FormatError(f"{path}: missing calibration keys {sorted(missing)}")
    try:
        rot = np.array([float(v) for v in pairs["rot"].split()])
        trans = np.array([float(v) for v in pairs["trans"].split()])
        if rot.shape != (9,):
            raise FormatError(f"{path}: rot needs 9 floats, got {rot.size}")
        if trans.shape != (3,):
            raise FormatError(f"{path}: trans needs 3 floats, got {trans.size}")
        intr = CameraIntrinsics(
            fx=float(pairs["fx"]),
            fy=float(pairs["fy"]),
            cu=float(pairs["cu"]),
            cv=float(pairs["cv"]),
            width=int(pairs["width"]),
            height=int(pairs["height"]),
        )
        extr = RigidTransform(rot.reshape(3, 3), trans)
        return Calibration(
            intrinsics=intr,
            extrinsics=extr,
            h_aperture=math.radians(float(pairs["sonar_h_aperture_deg"])),
            v_aperture=math.radians(float(pairs["sonar_v_aperture_deg"])),
            max_range=float(pairs["sonar_max_range_m"]),
        )
    except FormatError:
        raise
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_calibration(path, calib: Calibration) -> None:
    intr = calib.intrinsics
    rot = " ".join(_fmt(v) for v in calib.extrinsics.rotation.ravel())
    trans = " ".join(_fmt(v) for v in calib.extrinsics.translation)
    lines = [
        f"fx={_fmt(intr.fx)}",
        f"fy={_fmt(intr.fy)}",
        f"cu={_fmt(intr.cu)}",
        f"cv={_fmt(intr.cv)}",
        f"width={intr.width}",
        f"height={intr.height}",
        f"rot={rot}",
        f"trans={trans}",
        f"sonar_h_aperture_deg={_fmt(math.degrees(calib.h_aperture))}",
        f"sonar_v_aperture_deg={_fmt(math.degrees(calib.v_aperture))}",
        f"sonar_max_range_m={_fmt(calib.max_range)}",
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


# ---------------------------------------------------------------------------
# sonar frames

_SONAR_MAGIC = "sonarframe v1"


def write_sonar_frame(path, frame: SonarFrame, encoding: str = "float32") -> None:
    """Write a sonar frame: text header, then float32 or CSV intensities.

    float32 payloads are little-endian, beam-major (row-major).  Bearings
    are not stored; they are reconstructed as uniform beam centers over
    the horizontal aperture, which is how every frame in this package is
    produced.
    """
    if encoding not in ("float32", "csv"):
        raise FormatError(f"encoding must be 'float32' or 'csv', got {encoding!r}")
    if frame.num_beams < 2:
        raise FormatError("cannot serialize a single-beam frame; aperture is ambiguous")
    phi_min, phi_max = frame.v_aperture
    h_aperture = frame.num_beams * (frame.bearings[1] - frame.bearings[0])
    header = "\n".join(
        [
            _SONAR_MAGIC,
            f"num_beams {frame.num_beams}",
            f"num_bins {frame.num_bins}",
            f"h_aperture_deg {_fmt(math.degrees(h_aperture))}",
            f"v_aperture_deg {_fmt(math.degrees(phi_max - phi_min))}",
            f"max_range_m {_fmt(frame.max_range)}",
            f"data {encoding}",
        ]
    )
    if encoding == "float32":
        payload = frame.intensities.astype("<f4").tobytes()
        Path(path).write_bytes(header.encode("ascii") + b"\n" + payload)
    else:
        rows = "\n".join(
            ",".join(_fmt(v) for v in row) for row in frame.intensities
        )
        Path(path).write_text(header + "\n" + rows + "\n", encoding="ascii")


def read_sonar_frame(path) -> SonarFrame:
    """Read a sonar frame written by write_sonar_frame."""
    path = Path(path)
    data = path.read_bytes()
    lines: list[str] = []
    pos = 0
    while len(lines) < 7:
        nl = data.find(b"\n", pos)
        if nl < 0:
            raise FormatError(f"{path}: truncated sonar frame header")
        try:
            lines.append(data[pos:nl].decode("ascii"))
        except UnicodeDecodeError as exc:
            raise FormatError(f"{path}: header is not ASCII") from exc
        pos = nl + 1
    if lines[0] != _SONAR_MAGIC:
        raise FormatError(f"{path}: bad magic line {lines[0]!r}")

    fields: dict[str, str] = {}
    for line in lines[1:]:
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise FormatError(f"{path}: malformed header line {line!r}")
        fields[parts[0]] = parts[1]
    expected_keys = {"num_beams", "num_bins", "h_aperture_deg", "v_aperture_deg", "max_range_m", "data"}
    if set(fields) != expected_keys:
        raise FormatError(f"{path}: header keys {sorted(fields)} != {sorted(expected_keys)}")
    try:
        num_beams = int(fields["num_beams"])
        num_bins = int(fields["num_bins"])
        h_aperture = math.radians(float(fields["h_aperture_deg"]))
        v_aperture = math.radians(float(fields["v_aperture_deg"]))
        max_range = float(fields["max_range_m"])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc

    encoding = fields["data"]
    if encoding == "float32":
        expected = num_beams * num_bins * 4
        payload = data[pos : pos + expected]
        if len(payload) != expected:
            raise FormatError(f"{path}: expected {expected} payload bytes, found {len(payload)}")
        img = np.frombuffer(payload, dtype="<f4").astype(float).reshape(num_beams, num_bins)
    elif encoding == "csv":
        rows = data[pos:].decode("ascii").splitlines()
        if len(rows) != num_beams:
            raise FormatError(f"{path}: expected {num_beams} CSV rows, found {len(rows)}")
        try:
            img = np.array([[float(v) for v in row.split(",")] for row in rows])
        except ValueError as exc:
            raise FormatError(f"{path}: bad CSV value: {exc}") from exc
        if img.shape != (num_beams, num_bins):
            raise FormatError(f"{path}: CSV shape {img.shape} != ({num_beams}, {num_bins})")
    else:
        raise FormatError(f"{path}: unknown data encoding {encoding!r}")
    try:
        return SonarFrame.uniform(img, h_aperture, v_aperture, max_range)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# poses

def read_poses(path) -> list[RigidTransform]:
    """Read rigid transforms, one per line: nine row-major rotation floats
    then three translation floats.  `#` comments and blank lines skip."""
    path = Path(path)
    poses: list[RigidTransform] = []
    for lineno, raw in enumerate(path.read_text(encoding="ascii").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 12:
            raise FormatError(f"{path}:{lineno}: expected 12 floats, got {len(parts)}")
        try:
            values = np.array([float(v) for v in parts])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        try:
            poses.append(RigidTransform(values[:9].reshape(3, 3), values[9:]))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if not poses:
        raise FormatError(f"{path}: no poses found")
    return poses


def write_poses(path, poses: list[RigidTransform]) -> None:
    lines = [
        " ".join(_fmt(v) for v in np.concatenate([pose.rotation.ravel(), pose.translation]))
        for pose in poses
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


# ---------------------------------------------------------------------------
# scenes

def parse_scene(text: str, path="<scene>") -> SceneModel:
    """Parse a scene file: one primitive per line.

    cylinder cx cy cz ax ay az radius half_length intensity
    box cx cy cz ex ey ez intensity
    box cx cy cz ex ey ez r11 r12 r13 r21 r22 r23 r31 r32 r33 intensity
    """
    prims: list[ScenePrimitive] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, *rest = line.split()
        try:
            vals = [float(v) for v in rest]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        try:
            if kind == "cylinder":
                if len(vals) != 9:
                    raise FormatError(
                        f"{path}:{lineno}: cylinder needs 9 numbers, got {len(vals)}"
                    )
                prims.append(
                    Cylinder(np.array(vals[0:3]), np.array(vals[3:6]), vals[6], vals[7], vals[8])
                )
            elif kind == "box":
                if len(vals) == 7:
                    prims.append(Box(np.array(vals[0:3]), np.array(vals[3:6]), np.eye(3), vals[6]))
                elif len(vals) == 16:
                    prims.append(
                        Box(
                            np.array(vals[0:3]),
                            np.array(vals[3:6]),
                            np.array(vals[6:15]).reshape(3, 3),
                            vals[15],
                        )
                    )
                else:
                    raise FormatError(
                        f"{path}:{lineno}: box needs 7 or 16 numbers, got {len(vals)}"
                    )
            else:
                raise FormatError(f"{path}:{lineno}: unknown primitive {kind!r}")
        except FormatError:
            raise
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if not prims:
        raise FormatError(f"{path}: scene has no primitives")
    return SceneModel(tuple(prims))


def read_scene(path) -> SceneModel:
    path = Path(path)
    return parse_scene(path.read_text(encoding="ascii"), path)


def scene_to_text(scene: SceneModel) -> str:
    lines = []
    for prim in scene.primitives:
        if isinstance(prim, Cylinder):
            parts = [
                "cylinder",
                *(_fmt(v) for v in prim.center),
                *(_fmt(v) for v in prim.axis),
                _fmt(prim.radius),
                _fmt(prim.half_length),
                _fmt(prim.intensity),
            ]
        else:
            identity = np.allclose(prim.rotation, np.eye(3), atol=0.0)
            parts = ["box", *(_fmt(v) for v in prim.center), *(_fmt(v) for v in prim.half_extents)]
            if not identity:
                parts.extend(_fmt(v) for v in prim.rotation.ravel())
            parts.append(_fmt(prim.intensity))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def write_scene(path, scene: SceneModel) -> None:
    Path(path).write_text(scene_to_text(scene), encoding="ascii")


# ---------------------------------------------------------------------------
# point clouds

def write_ply(path, points: np.ndarray, region_labels=None, columns=None) -> None:
    """Write an ASCII PLY vertex cloud with float32 coordinate semantics.

    When provenance arrays are given they are emitted as extra per-vertex
    integer properties `region` and `column`.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise FormatError("points must be an (n, 3) array")
    provenance = region_labels is not None and columns is not None
    header = [
        "ply",
        "format ascii 1.0",
        f"element vertex {pts.shape[0]}",
        "property float x",
        "property float y",
        "property float z",
    ]
    if provenance:
        header.extend(["property int region", "property int column"])
    header.append("end_header")

    lines = []
    if provenance:
        for (x, y, z), reg, col in zip(pts, region_labels, columns):
            lines.append(f"{_fmt32(x)} {_fmt32(y)} {_fmt32(z)} {int(reg)} {int(col)}")
    else:
        for x, y, z in pts:
            lines.append(f"{_fmt32(x)} {_fmt32(y)} {_fmt32(z)}")
    body = "\n".join(lines)
    text = "\n".join(header) + ("\n" + body if lines else "") + "\n"
    Path(path).write_text(text, encoding="ascii")


def read_ply(path) -> np.ndarray:
    """Read x, y, z from an ASCII PLY vertex cloud; extra properties skip."""
    path = Path(path)
    lines = path.read_text(encoding="ascii").splitlines()
    if not lines or lines[0].strip() != "ply":
        raise FormatError(f"{path}: not a PLY file")
    count = None
    props: list[str] = []
    body_at = None
    in_vertex = False
    for i, line in enumerate(lines[1:], start=1):
        token = line.strip()
        if token == "end_header":
            body_at = i + 1
            break
        if token.startswith("format"):
            if token != "format ascii 1.0":
                raise FormatError(f"{path}: only ascii 1.0 PLY supported")
        elif token.startswith("element"):
            parts = token.split()
            in_vertex = len(parts) == 3 and parts[1] == "vertex"
            if in_vertex:
                count = int(parts[2])
        elif token.startswith("property") and in_vertex:
            props.append(token.split()[-1])
    if body_at is None or count is None:
        raise FormatError(f"{path}: missing vertex element or end_header")
    for axis in ("x", "y", "z"):
        if axis not in props:
            raise FormatError(f"{path}: vertex element lacks property {axis}")
    idx = [props.index(a) for a in ("x", "y", "z")]
    rows = lines[body_at : body_at + count]
    if len(rows) != count:
        raise FormatError(f"{path}: expected {count} vertex rows, found {len(rows)}")
    out = np.zeros((count, 3))
    for i, row in enumerate(rows):
        parts = row.split()
        if len(parts) < len(props):
            raise FormatError(f"{path}: vertex row {i} has {len(parts)} fields, needs {len(props)}")
        try:
            out[i] = [float(parts[j]) for j in idx]
        except ValueError as exc:
            raise FormatError(f"{path}: bad vertex row {i}: {exc}") from exc
    return out


def write_xyz(path, points: np.ndarray) -> None:
    """Write points as CSV lines x,y,z."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise FormatError("points must be an (n, 3) array")
    lines = [f"{_fmt(x)},{_fmt(y)},{_fmt(z)}" for x, y, z in pts]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="ascii")


def read_xyz(path) -> np.ndarray:
    """Read a CSV x,y,z cloud."""
    path = Path(path)
    rows = []
    for lineno, raw in enumerate(path.read_text(encoding="ascii").splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise FormatError(f"{path}:{lineno}: expected x,y,z")
        try:
            rows.append([float(v) for v in parts])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return np.array(rows) if rows else np.zeros((0, 3))
