"""Analytic depth scenes with exact ground-truth normals.

Three scene kinds: an infinite plane (depth follows the linear
inverse-depth form), a sphere (closed-form ray intersection), and a
road scene (ground plane plus axis-aligned box obstacles) that also
carries a freespace mask. Depth is planar Z-depth; pixels beyond the
far limit or off the surface are invalid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics, DepthImage
from .errors import EmptySceneError
from .estimator import NormalMap

DEFAULT_FAR = 200.0


@dataclass(frozen=True)
class GroundTruthBundle:
    depth: DepthImage
    normals: NormalMap
    freespace: np.ndarray | None = None


def _check_frame(width: int, height: int, far: float):
    if width < 1 or height < 1:
        raise ValueError(f"image size must be positive, got {width}x{height}")
    if not (np.isfinite(far) and far > 0):
        raise ValueError(f"far limit must be positive, got {far!r}")


@dataclass(frozen=True)
class PlaneScene:
    """Plane n . P + d = 0, stored with toward-camera normal and d > 0."""

    normal: tuple[float, float, float]
    d: float
    width: int
    height: int
    intrinsics: CameraIntrinsics
    far: float = DEFAULT_FAR

    def __post_init__(self):
        _check_frame(self.width, self.height, self.far)
        n = np.asarray(self.normal, dtype=np.float64)
        length = float(np.linalg.norm(n))
        if length < 1e-12 or not np.all(np.isfinite(n)):
            raise ValueError("plane normal must be a nonzero finite vector")
        d = float(self.d)
        if d == 0 or not np.isfinite(d):
            raise ValueError("plane must not pass through the camera center")
        n = n / length
        d = d / length
        if d < 0:
            n, d = -n, -d
        object.__setattr__(self, "normal", (float(n[0]), float(n[1]), float(n[2])))
        object.__setattr__(self, "d", d)


@dataclass(frozen=True)
class SphereScene:
    center: tuple[float, float, float]
    radius: float
    width: int
    height: int
    intrinsics: CameraIntrinsics
    far: float = DEFAULT_FAR

    def __post_init__(self):
        _check_frame(self.width, self.height, self.far)
        c = np.asarray(self.center, dtype=np.float64)
        if not np.all(np.isfinite(c)):
            raise ValueError("sphere center must be finite")
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"sphere radius must be positive, got {self.radius!r}")
        if float(np.linalg.norm(c)) <= self.radius:
            raise ValueError("camera center must lie outside the sphere")


@dataclass(frozen=True)
class BoxObstacle:
    """Axis-aligned box resting on the ground plane.

    (x, z) is the footprint center in camera coordinates; the box spans
    size_y meters upward from the ground.
    """

    x: float
    z: float
    size_x: float
    size_y: float
    size_z: float

    def __post_init__(self):
        if min(self.size_x, self.size_y, self.size_z) <= 0:
            raise ValueError("box sizes must be positive")


@dataclass(frozen=True)
class RoadScene:
    """Level camera ground_d meters above a horizontal ground plane."""

    ground_d: float
    boxes: tuple[BoxObstacle, ...]
    width: int
    height: int
    intrinsics: CameraIntrinsics
    far: float = DEFAULT_FAR

    def __post_init__(self):
        _check_frame(self.width, self.height, self.far)
        if not (np.isfinite(self.ground_d) and self.ground_d > 0):
            raise ValueError("ground plane must be below the camera (ground_d > 0)")
        for box in self.boxes:
            lo = np.array([box.x - box.size_x / 2, self.ground_d - box.size_y, box.z - box.size_z / 2])
            hi = np.array([box.x + box.size_x / 2, self.ground_d, box.z + box.size_z / 2])
            if np.all(lo <= 0) and np.all(hi >= 0):
                raise ValueError("box overlaps the camera center")


SceneSpec = PlaneScene | SphereScene | RoadScene


def _pixel_rays(width: int, height: int, intr: CameraIntrinsics):
    """Unnormalized ray directions with unit Z, so ray parameter == depth."""
    dx = (np.arange(width, dtype=np.float64) - intr.xo) / intr.fx
    dy = (np.arange(height, dtype=np.float64) - intr.yo) / intr.fy
    return np.broadcast_to(dx[None, :], (height, width)), np.broadcast_to(
        dy[:, None], (height, width)
    )


def synth_plane(spec: PlaneScene) -> GroundTruthBundle:
    """Depth from the linear inverse-depth form of the plane equation."""
    intr = spec.intrinsics
    dx, dy = _pixel_rays(spec.width, spec.height, intr)
    nx, ny, nz = spec.normal
    inv = -(nx * dx + ny * dy + nz) / spec.d
    valid = inv >= 1.0 / spec.far
    if not np.any(valid):
        raise EmptySceneError("plane is not visible anywhere in the frame")
    z = np.zeros_like(inv)
    np.divide(1.0, inv, out=z, where=valid)
    depth = DepthImage(z, valid)
    normals = np.zeros((spec.height, spec.width, 3), dtype=np.float64)
    normals[valid] = spec.normal
    return GroundTruthBundle(depth, NormalMap(normals, valid))


def synth_sphere(spec: SphereScene) -> GroundTruthBundle:
    """Depth from the nearest positive ray-sphere intersection."""
    dx, dy = _pixel_rays(spec.width, spec.height, spec.intrinsics)
    cx, cy, cz = (float(v) for v in spec.center)
    aa = dx * dx + dy * dy + 1.0
    bb = -2.0 * (dx * cx + dy * cy + cz)
    cc = cx * cx + cy * cy + cz * cz - spec.radius * spec.radius
    disc = bb * bb - 4.0 * aa * cc
    hit = disc >= 0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    # camera outside the sphere: cc > 0, so the near root is (-bb - sq)/(2 aa)
    t = (-bb - sq) / (2.0 * aa)
    valid = hit & (t > 0) & (t <= spec.far)
    if not np.any(valid):
        raise EmptySceneError("sphere does not intersect the view frustum")
    z = np.where(valid, t, 0.0)
    depth = DepthImage(z, valid)

    normals = np.zeros((spec.height, spec.width, 3), dtype=np.float64)
    px, py, pz = z * dx, z * dy, z
    nx = (px - cx) / spec.radius
    ny = (py - cy) / spec.radius
    nz = (pz - cz) / spec.radius
    dot = nx * px + ny * py + nz * pz
    sign = np.where(dot > 0, -1.0, 1.0)
    normals[..., 0] = np.where(valid, sign * nx, 0.0)
    normals[..., 1] = np.where(valid, sign * ny, 0.0)
    normals[..., 2] = np.where(valid, sign * nz, 0.0)
    return GroundTruthBundle(depth, NormalMap(normals, valid))


def synth_road(spec: RoadScene) -> GroundTruthBundle:
    """Nearest-surface depth over ground and boxes, plus the freespace mask."""
    dx, dy = _pixel_rays(spec.width, spec.height, spec.intrinsics)
    big = np.inf

    t_ground = np.where(dy > 0, spec.ground_d / np.where(dy > 0, dy, 1.0), big)
    best_t = t_ground.copy()
    # surface id: 0 ground, then 1 + 6*i + face for box i
    best_id = np.zeros(t_ground.shape, dtype=np.int32)

    dirs = (dx, dy, np.ones_like(dx))
    face_normals = []
    for i, box in enumerate(spec.boxes):
        lo = (box.x - box.size_x / 2, spec.ground_d - box.size_y, box.z - box.size_z / 2)
        hi = (box.x + box.size_x / 2, spec.ground_d, box.z + box.size_z / 2)
        t_near = np.full(dx.shape, -big)
        t_far = np.full(dx.shape, big)
        axis_entry = np.zeros(dx.shape, dtype=np.int32)
        entry_sign = np.zeros(dx.shape, dtype=np.float64)
        inside_all = np.ones(dx.shape, dtype=bool)
        for axis, d_axis in enumerate(dirs):
            parallel = np.abs(d_axis) < 1e-300
            # origin is the camera center: ray position along axis is t * d_axis
            with np.errstate(divide="ignore", invalid="ignore"):
                t0 = np.where(parallel, -big, lo[axis] / np.where(parallel, 1.0, d_axis))
                t1 = np.where(parallel, big, hi[axis] / np.where(parallel, 1.0, d_axis))
            t_lo = np.minimum(t0, t1)
            t_hi = np.maximum(t0, t1)
            # parallel rays must start inside the slab (origin coordinate is 0)
            inside = (lo[axis] <= 0) & (0 <= hi[axis])
            slab_ok = np.where(parallel, inside, True)
            inside_all &= slab_ok
            t_lo = np.where(parallel, -big, t_lo)
            t_hi = np.where(parallel, big, t_hi)
            takes = t_lo > t_near
            axis_entry = np.where(takes, axis, axis_entry)
            entry_sign = np.where(takes, -np.sign(d_axis), entry_sign)
            t_near = np.maximum(t_near, t_lo)
            t_far = np.minimum(t_far, t_hi)
        hit = inside_all & (t_near <= t_far) & (t_near > 0)
        better = hit & (t_near < best_t)
        best_t = np.where(better, t_near, best_t)
        best_id = np.where(better, 1 + i, best_id)
        face_normals.append((axis_entry, entry_sign, better))

    valid = np.isfinite(best_t) & (best_t > 0) & (best_t <= spec.far)
    if not np.any(valid):
        raise EmptySceneError("road scene has no visible surface")
    z = np.where(valid, best_t, 0.0)
    depth = DepthImage(z, valid)

    normals = np.zeros((spec.height, spec.width, 3), dtype=np.float64)
    ground_px = valid & (best_id == 0)
    normals[ground_px] = (0.0, -1.0, 0.0)
    for i, (axis_entry, entry_sign, _) in enumerate(face_normals):
        sel = valid & (best_id == 1 + i)
        for axis in range(3):
            comp = np.where(axis_entry == axis, entry_sign, 0.0)
            normals[..., axis] = np.where(sel, comp, normals[..., axis])
    freespace = ground_px
    return GroundTruthBundle(depth, NormalMap(normals, valid), freespace)


def synthesize(spec: SceneSpec) -> GroundTruthBundle:
    if isinstance(spec, PlaneScene):
        return synth_plane(spec)
    if isinstance(spec, SphereScene):
        return synth_sphere(spec)
    if isinstance(spec, RoadScene):
        return synth_road(spec)
    raise ValueError(f"unknown scene spec {type(spec).__name__}")


def default_road_scene(width: int = 640, height: int = 480) -> RoadScene:
    """The stock road scene used by the freespace pipeline tests."""
    intr = CameraIntrinsics(fx=500.0, fy=500.0, xo=width / 2.0, yo=height / 2.0)
    boxes = (
        BoxObstacle(x=-2.5, z=9.0, size_x=1.6, size_y=1.6, size_z=1.6),
        BoxObstacle(x=0.5, z=14.0, size_x=2.0, size_y=2.2, size_z=2.0),
        BoxObstacle(x=3.2, z=20.0, size_x=2.4, size_y=2.6, size_z=2.4),
    )
    return RoadScene(
        ground_d=1.5, boxes=boxes, width=width, height=height, intrinsics=intr
    )


def add_noise(z: DepthImage, sigma: float, seed: int) -> DepthImage:
    """Seeded zero-mean Gaussian depth noise on valid pixels; mask unchanged."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return DepthImage(z.data.copy(), z.valid.copy())
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, sigma, size=z.data.shape)
    data = np.where(z.valid, z.data + noise, z.data)
    return DepthImage(data, z.valid.copy())
