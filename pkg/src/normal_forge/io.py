"""Readers and writers for the on-disk formats.

Depth and disparity use the KITTI convention: 16-bit single-channel
PNG, value/256, stored 0 = invalid. Normal maps are 16-bit RGB PNGs
mapping [-1, 1] to [0, 65535] per channel with (0, 0, 0) reserved for
invalid. Masks are strict {0, 255} 8-bit PNGs. Calibration, scene
specs and metric reports share one `key=value` line grammar.

All writers are atomic (temp file + rename), so failures never leave
partial outputs.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass

import cv2
import numpy as np

from .camera import CameraIntrinsics, DepthImage, DisparityImage
from .errors import FormatError, ParseError
from .scenes import (
    DEFAULT_FAR,
    BoxObstacle,
    PlaneScene,
    RoadScene,
    SceneSpec,
    SphereScene,
)
from .estimator import NormalMap

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


# ---------------------------------------------------------------- low level


def _atomic_write_bytes(path, data: bytes):
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    try:
        with open(tmp, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _encode_png(arr: np.ndarray) -> bytes:
    ok, buf = cv2.imencode(".png", arr)
    if not ok:
        raise FormatError("PNG encoding failed")
    return buf.tobytes()


def _decode_png(path) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    if not raw.startswith(_PNG_MAGIC):
        raise FormatError(f"{path}: not a PNG file")
    img = cv2.imdecode(np.frombuffer(raw, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise FormatError(f"{path}: PNG decoding failed")
    return img


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


# ------------------------------------------------------- depth & disparity


def _read_u16_gray(path) -> np.ndarray:
    img = _decode_png(path)
    if img.dtype != np.uint16 or img.ndim != 2:
        raise FormatError(
            f"{path}: expected 16-bit single-channel PNG, got {img.dtype} with shape {img.shape}"
        )
    return img


def _quantize_u16(data: np.ndarray, valid: np.ndarray) -> np.ndarray:
    stored = np.clip(_round_half_up(data * 256.0), 0, 65535)
    return np.where(valid, stored, 0).astype(np.uint16)


def read_depth_png(path) -> DepthImage:
    stored = _read_u16_gray(path)
    valid = stored != 0
    return DepthImage(stored.astype(np.float64) / 256.0, valid)


def write_depth_png(z: DepthImage, path):
    _atomic_write_bytes(path, _encode_png(_quantize_u16(z.data, z.valid)))


def read_disparity_png(path, baseline: float) -> DisparityImage:
    stored = _read_u16_gray(path)
    valid = stored != 0
    return DisparityImage(stored.astype(np.float64) / 256.0, valid, baseline=baseline)


def write_disparity_png(d: DisparityImage, path):
    _atomic_write_bytes(path, _encode_png(_quantize_u16(d.data, d.valid)))


# ------------------------------------------------------------- normal maps


def read_normal_png(path) -> NormalMap:
    img = _decode_png(path)
    if img.dtype != np.uint16 or img.ndim != 3 or img.shape[2] != 3:
        raise FormatError(
            f"{path}: expected 16-bit 3-channel PNG, got {img.dtype} with shape {img.shape}"
        )
    rgb = img[..., ::-1].astype(np.float64)
    valid = np.any(img != 0, axis=2)
    comps = rgb / 65535.0 * 2.0 - 1.0
    norms = np.linalg.norm(comps, axis=-1)
    valid &= norms > 1e-6
    safe = np.where(norms > 1e-6, norms, 1.0)
    normals = np.where(valid[..., None], comps / safe[..., None], 0.0)
    return NormalMap(normals, valid)


def write_normal_png(nm: NormalMap, path):
    stored = _round_half_up((nm.normals + 1.0) / 2.0 * 65535.0)
    stored = np.clip(stored, 0, 65535)
    stored = np.where(nm.valid[..., None], stored, 0).astype(np.uint16)
    _atomic_write_bytes(path, _encode_png(stored[..., ::-1]))


# ------------------------------------------------------------------- masks


def read_mask_png(path) -> np.ndarray:
    img = _decode_png(path)
    if img.dtype != np.uint8 or img.ndim != 2:
        raise FormatError(
            f"{path}: expected 8-bit single-channel PNG, got {img.dtype} with shape {img.shape}"
        )
    bad = ~np.isin(img, (0, 255))
    if bad.any():
        y, x = np.argwhere(bad)[0]
        raise FormatError(f"{path}: mask value {img[y, x]} at ({x}, {y}) is neither 0 nor 255")
    return img == 255


def write_mask_png(mask: np.ndarray, path):
    mask = np.asarray(mask, dtype=bool)
    _atomic_write_bytes(path, _encode_png(np.where(mask, 255, 0).astype(np.uint8)))


def write_color_png(rgb: np.ndarray, path):
    """8-bit RGB image (H, W, 3) for visualizations such as error maps."""
    rgb = np.asarray(rgb)
    if rgb.dtype != np.uint8 or rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) uint8 array")
    _atomic_write_bytes(path, _encode_png(rgb[..., ::-1]))


# --------------------------------------------------------- key=value files


def parse_kv_text(text: str) -> dict[str, tuple[str, int]]:
    """Strict `key=value` lines with `#` comments; returns value + line number."""
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {raw.strip()!r}", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not _KEY_RE.match(key):
            raise ParseError(f"invalid key {key!r}", lineno)
        if key in entries:
            raise ParseError(f"duplicate key {key!r}", lineno)
        if not value:
            raise ParseError(f"empty value for key {key!r}", lineno)
        entries[key] = (value, lineno)
    return entries


def _parse_float(value: str, lineno: int, key: str) -> float:
    try:
        v = float(value)
    except ValueError:
        raise ParseError(f"key {key!r}: {value!r} is not a number", lineno) from None
    if not np.isfinite(v):
        raise ParseError(f"key {key!r}: value must be finite", lineno)
    return v


def _parse_floats(value: str, lineno: int, key: str, arity: int) -> tuple[float, ...]:
    parts = [p.strip() for p in value.split(",")]
    if len(parts) != arity:
        raise ParseError(f"key {key!r}: expected {arity} comma-separated values", lineno)
    return tuple(_parse_float(p, lineno, key) for p in parts)


def _parse_int(value: str, lineno: int, key: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"key {key!r}: {value!r} is not an integer", lineno) from None


def _format_value(v) -> str:
    if v is None:
        return "undefined"
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def format_kv(entries: dict) -> str:
    return "".join(f"{k}={_format_value(v)}\n" for k, v in entries.items())


def write_kv(entries: dict, path):
    _atomic_write_bytes(path, format_kv(entries).encode("utf-8"))


# ------------------------------------------------------------- calibration


@dataclass(frozen=True)
class CalibFile:
    """Pinhole intrinsics plus the optional stereo baseline."""

    fx: float
    fy: float
    cx: float
    cy: float
    baseline: float | None = None

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.baseline is not None and self.baseline <= 0:
            raise ValueError("baseline must be positive when present")

    def to_intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(fx=self.fx, fy=self.fy, xo=self.cx, yo=self.cy)


_CALIB_REQUIRED = ("fx", "fy", "cx", "cy")


def parse_calib_text(text: str) -> CalibFile:
    entries = parse_kv_text(text)
    for key, (_, lineno) in entries.items():
        if key not in _CALIB_REQUIRED and key != "baseline":
            raise ParseError(f"unknown calibration key {key!r}", lineno)
    values = {}
    for key in _CALIB_REQUIRED:
        if key not in entries:
            raise ParseError(f"missing required calibration key {key!r}")
        value, lineno = entries[key]
        values[key] = _parse_float(value, lineno, key)
    baseline = None
    if "baseline" in entries:
        baseline = _parse_float(entries["baseline"][0], entries["baseline"][1], "baseline")
    try:
        return CalibFile(baseline=baseline, **values)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def read_calib(path) -> CalibFile:
    with open(path, "r", encoding="utf-8") as f:
        return parse_calib_text(f.read())


def write_calib(calib: CalibFile, path):
    entries = {"fx": calib.fx, "fy": calib.fy, "cx": calib.cx, "cy": calib.cy}
    if calib.baseline is not None:
        entries["baseline"] = calib.baseline
    write_kv(entries, path)


# -------------------------------------------------------------- scene specs


def parse_scene_text(text: str) -> SceneSpec:
    entries = parse_kv_text(text)
    if "kind" not in entries:
        raise ParseError("missing required key 'kind'")
    kind, kind_line = entries["kind"]

    def need(key, arity=1):
        if key not in entries:
            raise ParseError(f"scene kind {kind!r} requires key {key!r}")
        value, lineno = entries[key]
        if arity == 1:
            return _parse_float(value, lineno, key)
        return _parse_floats(value, lineno, key, arity)

    def need_int(key):
        if key not in entries:
            raise ParseError(f"scene kind {kind!r} requires key {key!r}")
        value, lineno = entries[key]
        return _parse_int(value, lineno, key)

    common = {"kind", "width", "height", "fx", "fy", "cx", "cy", "far"}
    per_kind = {
        "plane": {"normal", "d"},
        "sphere": {"center", "radius"},
        "road": {"ground_d"},
    }
    if kind not in per_kind:
        raise ParseError(f"unknown scene kind {kind!r}", kind_line)
    allowed = common | per_kind[kind]
    for key, (_, lineno) in entries.items():
        if key in allowed:
            continue
        if kind == "road" and re.fullmatch(r"box[0-9]+", key):
            continue
        raise ParseError(f"unknown key {key!r} for scene kind {kind!r}", lineno)

    width, height = need_int("width"), need_int("height")
    intr = CameraIntrinsics(fx=need("fx"), fy=need("fy"), xo=need("cx"), yo=need("cy"))
    far = need("far") if "far" in entries else DEFAULT_FAR
    try:
        if kind == "plane":
            return PlaneScene(
                normal=need("normal", 3), d=need("d"),
                width=width, height=height, intrinsics=intr, far=far,
            )
        if kind == "sphere":
            return SphereScene(
                center=need("center", 3), radius=need("radius"),
                width=width, height=height, intrinsics=intr, far=far,
            )
        boxes = []
        index = 1
        while f"box{index}" in entries:
            x, z, sx, sy, sz = need(f"box{index}", 5)
            boxes.append(BoxObstacle(x=x, z=z, size_x=sx, size_y=sy, size_z=sz))
            index += 1
        for key, (_, lineno) in entries.items():
            if re.fullmatch(r"box[0-9]+", key) and not (1 <= int(key[3:]) < index):
                raise ParseError(f"box keys must be consecutive from box1; got {key!r}", lineno)
        return RoadScene(
            ground_d=need("ground_d"), boxes=tuple(boxes),
            width=width, height=height, intrinsics=intr, far=far,
        )
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def read_scene_spec(path) -> SceneSpec:
    with open(path, "r", encoding="utf-8") as f:
        return parse_scene_text(f.read())


def scene_to_entries(spec: SceneSpec) -> dict:
    intr = spec.intrinsics
    entries = {
        "kind": None,
        "width": spec.width,
        "height": spec.height,
        "fx": intr.fx,
        "fy": intr.fy,
        "cx": intr.xo,
        "cy": intr.yo,
        "far": spec.far,
    }
    if isinstance(spec, PlaneScene):
        entries["kind"] = "plane"
        entries["normal"] = ",".join(repr(v) for v in spec.normal)
        entries["d"] = spec.d
    elif isinstance(spec, SphereScene):
        entries["kind"] = "sphere"
        entries["center"] = ",".join(repr(float(v)) for v in spec.center)
        entries["radius"] = spec.radius
    elif isinstance(spec, RoadScene):
        entries["kind"] = "road"
        entries["ground_d"] = spec.ground_d
        for i, box in enumerate(spec.boxes, 1):
            entries[f"box{i}"] = ",".join(
                repr(float(v)) for v in (box.x, box.z, box.size_x, box.size_y, box.size_z)
            )
    else:
        raise ValueError(f"unknown scene spec {type(spec).__name__}")
    return entries


def write_scene_spec(spec: SceneSpec, path):
    write_kv(scene_to_entries(spec), path)


# ----------------------------------------------------------- metric reports


def write_metric_report(entries: dict, path):
    """Flat key=value document; None renders as 'undefined'."""
    write_kv(entries, path)


def read_metric_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        entries = parse_kv_text(f.read())
    out = {}
    for key, (value, _) in entries.items():
        if value == "undefined":
            out[key] = None
        else:
            try:
                out[key] = float(value)
            except ValueError:
                out[key] = value
    return out
