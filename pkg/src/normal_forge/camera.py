"""Pinhole camera model and the depth-style image containers.

Camera frame convention: X right, Y down, Z forward along the optical
axis. Pixel coordinates are continuous with integer values at pixel
centers. Invalid pixels are carried in an explicit boolean mask; the
data plane holds zeros there so arithmetic never consumes garbage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCameraError


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters: focal lengths and principal point, in pixels."""

    fx: float
    fy: float
    xo: float
    yo: float

    def __post_init__(self):
        for name in ("fx", "fy", "xo", "yo"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")


def _as_image_planes(data, valid, positive: bool):
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"image data must be 2-D, got shape {data.shape}")
    if valid is None:
        valid = np.ones(data.shape, dtype=bool)
    else:
        valid = np.asarray(valid, dtype=bool)
        if valid.shape != data.shape:
            raise ValueError(f"mask shape {valid.shape} != data shape {data.shape}")
    checked = data[valid]
    if not np.all(np.isfinite(checked)):
        raise ValueError("valid pixels must be finite")
    if positive and checked.size and checked.min() <= 0:
        raise ValueError("valid pixels must be positive")
    # zero out the data plane under the mask
    data = np.where(valid, data, 0.0)
    return data, valid


@dataclass(frozen=True)
class DepthImage:
    """Per-pixel planar depth Z in meters plus a validity mask."""

    data: np.ndarray
    valid: np.ndarray

    def __init__(self, data, valid=None):
        data, valid = _as_image_planes(data, valid, positive=True)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "valid", valid)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class InverseDepthImage:
    """Per-pixel 1/Z in 1/meters plus a validity mask."""

    data: np.ndarray
    valid: np.ndarray

    def __init__(self, data, valid=None):
        data, valid = _as_image_planes(data, valid, positive=True)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "valid", valid)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class DisparityImage:
    """Per-pixel stereo disparity in pixels plus the rig baseline in meters."""

    data: np.ndarray
    valid: np.ndarray
    baseline: float = field(default=0.0)

    def __init__(self, data, valid=None, baseline: float = 0.0):
        if not (np.isfinite(baseline) and baseline > 0):
            raise ValueError(f"baseline must be positive, got {baseline!r}")
        data, valid = _as_image_planes(data, valid, positive=True)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "baseline", float(baseline))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def backproject(p, z, intr: CameraIntrinsics) -> np.ndarray:
    """Lift pixel(s) p=(x, y) at depth z to 3D camera-frame points.

    Accepts scalars or broadcastable arrays; returns an array with a
    trailing axis of length 3 holding (X, Y, Z).
    """
    x = np.asarray(p[0], dtype=np.float64)
    y = np.asarray(p[1], dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if np.any(z <= 0) or not np.all(np.isfinite(z)):
        raise ValueError("depth must be positive and finite")
    X = z * (x - intr.xo) / intr.fx
    Y = z * (y - intr.yo) / intr.fy
    return np.stack(np.broadcast_arrays(X, Y, z), axis=-1)


def project(point, intr: CameraIntrinsics) -> np.ndarray:
    """Project 3D camera-frame point(s) to pixel coordinates (x, y)."""
    pt = np.asarray(point, dtype=np.float64)
    X, Y, Z = pt[..., 0], pt[..., 1], pt[..., 2]
    if np.any(Z <= 0):
        raise BehindCameraError("cannot project points with Z <= 0")
    x = intr.fx * X / Z + intr.xo
    y = intr.fy * Y / Z + intr.yo
    return np.stack(np.broadcast_arrays(x, y), axis=-1)


def disparity_to_depth(disp: DisparityImage, intr: CameraIntrinsics) -> DepthImage:
    """Z = fx * baseline / disparity; invalidity propagates through the mask."""
    valid = disp.valid & (disp.data > 0)
    z = np.zeros_like(disp.data)
    np.divide(intr.fx * disp.baseline, disp.data, out=z, where=valid)
    return DepthImage(z, valid)


def depth_to_inverse(depth: DepthImage) -> InverseDepthImage:
    """Per-pixel 1/Z on valid pixels; mask preserved."""
    inv = np.zeros_like(depth.data)
    np.divide(1.0, depth.data, out=inv, where=depth.valid)
    return InverseDepthImage(inv, depth.valid.copy())
