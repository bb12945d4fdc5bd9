"""Closed-form surface normal estimation from depth images.

The estimator differentiates the inverse-depth image, turns the two
gradients plus each neighbor's 3D displacement into one candidate
normal per neighbor, and aggregates the candidates on the unit sphere:
the azimuth comes straight from the gradients, the inclination from a
closed-form minimizer of the summed angular deviation. Output normals
follow the toward-camera convention (n . P <= 0).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .camera import (
    CameraIntrinsics,
    DepthImage,
    DisparityImage,
    InverseDepthImage,
    disparity_to_depth,
)
from .errors import DegenerateDirectionError, DegenerateNeighborhoodError

# |dZ| below this is treated as iso-depth and the neighbor is skipped
Z_EPS = 1e-6
# vector / gradient components below this are degenerate
NORM_EPS = 1e-12
# relative slack below which v . P is treated as exactly perpendicular;
# such sign ties are broken canonically so the output is invariant to
# kernel negation and depth rescaling
TIE_REL = 1e-9

THREADS_ENV = "NORMAL_FORGE_THREADS"


@dataclass(frozen=True)
class GradientFilter:
    """A named pair of odd-sized correlation kernels (kx, ky).

    Correlation semantics: g(y, x) = sum_ij k[i, j] * I(y + i - ry, x + j - rx)
    with (ry, rx) the kernel center.
    """

    name: str
    kx: np.ndarray
    ky: np.ndarray

    def __post_init__(self):
        for k in (self.kx, self.ky):
            if k.ndim != 2 or k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
                raise ValueError("kernels must be 2-D with odd dimensions")

    @staticmethod
    def central() -> "GradientFilter":
        # gx = I(x-1) - I(x+1), gy = I(y-1) - I(y+1): backward minus forward,
        # i.e. -2x the unit central derivative; the scale/sign cancel downstream
        kx = np.array([[1.0, 0.0, -1.0]])
        return GradientFilter("central", kx, kx.T.copy())

    @staticmethod
    def forward() -> "GradientFilter":
        kx = np.array([[0.0, -1.0, 1.0]])
        return GradientFilter("forward", kx, kx.T.copy())

    @staticmethod
    def sobel() -> "GradientFilter":
        kx = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]]) / 8.0
        return GradientFilter("sobel", kx, kx.T.copy())

    @staticmethod
    def from_name(name: str) -> "GradientFilter":
        try:
            return {
                "central": GradientFilter.central,
                "forward": GradientFilter.forward,
                "sobel": GradientFilter.sobel,
            }[name]()
        except KeyError:
            raise ValueError(f"unknown gradient filter {name!r}") from None

    def negated(self) -> "GradientFilter":
        return GradientFilter(self.name + "-neg", -self.kx, -self.ky)

    def _offsets(self):
        """(dy, dx) offsets carrying nonzero weight, over both kernels."""
        offs = []
        for k in (self.kx, self.ky):
            ry, rx = k.shape[0] // 2, k.shape[1] // 2
            for i in range(k.shape[0]):
                for j in range(k.shape[1]):
                    if k[i, j] != 0 and (i - ry, j - rx) not in offs:
                        offs.append((i - ry, j - rx))
        return offs

    @property
    def halo(self) -> int:
        """Largest |row offset| any kernel tap reaches."""
        return max(k.shape[0] // 2 for k in (self.kx, self.ky))


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Ordered (dcol, drow) neighbor offsets; order fixes summation order."""

    offsets: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.offsets:
            raise ValueError("neighborhood must be non-empty")
        seen = set()
        for off in self.offsets:
            dx, dy = off
            if (dx, dy) == (0, 0):
                raise ValueError("neighborhood cannot contain (0, 0)")
            if off in seen:
                raise ValueError(f"duplicate offset {off}")
            seen.add(off)

    @staticmethod
    def connected8() -> "NeighborhoodSpec":
        return NeighborhoodSpec(
            ((-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1))
        )

    @staticmethod
    def connected4() -> "NeighborhoodSpec":
        return NeighborhoodSpec(((0, -1), (-1, 0), (1, 0), (0, 1)))

    @staticmethod
    def from_size(k: int) -> "NeighborhoodSpec":
        if k == 4:
            return NeighborhoodSpec.connected4()
        if k == 8:
            return NeighborhoodSpec.connected8()
        raise ValueError(f"unsupported neighborhood size {k}; use 4 or 8")

    @property
    def halo(self) -> int:
        return max(max(abs(dx), abs(dy)) for dx, dy in self.offsets)


@dataclass(frozen=True)
class GradientField:
    """Per-pixel inverse-depth gradients (gx, gy) with a validity mask."""

    gx: np.ndarray
    gy: np.ndarray
    valid: np.ndarray

    @property
    def height(self) -> int:
        return self.gx.shape[0]

    @property
    def width(self) -> int:
        return self.gx.shape[1]


@dataclass(frozen=True)
class NormalMap:
    """Per-pixel unit normals (H, W, 3) with a validity mask."""

    normals: np.ndarray
    valid: np.ndarray

    def __init__(self, normals, valid):
        normals = np.asarray(normals, dtype=np.float64)
        valid = np.asarray(valid, dtype=bool)
        if normals.ndim != 3 or normals.shape[2] != 3:
            raise ValueError(f"normals must be (H, W, 3), got {normals.shape}")
        if valid.shape != normals.shape[:2]:
            raise ValueError("mask shape does not match normals")
        norms = np.linalg.norm(normals[valid], axis=-1)
        if norms.size and np.max(np.abs(norms - 1.0)) > 1e-6:
            raise ValueError("valid normals must be unit length within 1e-6")
        normals = np.where(valid[..., None], normals, 0.0)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "valid", valid)

    @property
    def height(self) -> int:
        return self.normals.shape[0]

    @property
    def width(self) -> int:
        return self.normals.shape[1]


@dataclass(frozen=True)
class CandidateNormal:
    """One neighbor's implied unit normal; weight 0 means skipped."""

    vector: np.ndarray
    weight: int


@dataclass(frozen=True)
class SphericalDirection:
    """Unit direction as inclination theta in [0, pi], azimuth phi in [0, 2*pi)."""

    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError(f"theta must be in [0, pi], got {self.theta}")
        if not 0.0 <= self.phi < 2.0 * np.pi:
            raise ValueError(f"phi must be in [0, 2*pi), got {self.phi}")

    def to_vector(self) -> np.ndarray:
        """(sin t cos p, sin t sin p, cos t)."""
        return np.array(
            [
                np.sin(self.theta) * np.cos(self.phi),
                np.sin(self.theta) * np.sin(self.phi),
                np.cos(self.theta),
            ]
        )

    @staticmethod
    def from_vector(v) -> "SphericalDirection":
        v = np.asarray(v, dtype=np.float64)
        n = float(np.linalg.norm(v))
        if n < NORM_EPS:
            raise ValueError("cannot convert a zero vector to spherical form")
        theta = float(np.arccos(np.clip(v[2] / n, -1.0, 1.0)))
        phi = float(np.arctan2(v[1], v[0])) % (2.0 * np.pi)
        return SphericalDirection(theta, phi)


def _shift_into(out: np.ndarray, a: np.ndarray, dy: int, dx: int, fill):
    """out[y, x] = a[y + dy, x + dx], fill outside the image."""
    h, w = a.shape
    y0, y1 = max(0, -dy), min(h, h - dy)
    x0, x1 = max(0, -dx), min(w, w - dx)
    if y0 >= y1 or x0 >= x1:
        out.fill(fill)
        return out
    out[y0:y1, x0:x1] = a[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
    if y0 > 0:
        out[:y0] = fill
    if y1 < h:
        out[y1:] = fill
    if x0 > 0:
        out[y0:y1, :x0] = fill
    if x1 < w:
        out[y0:y1, x1:] = fill
    return out


def _shift(a: np.ndarray, dy: int, dx: int, fill):
    return _shift_into(np.empty_like(a), a, dy, dx, fill)


def _correlate(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    ry, rx = kernel.shape[0] // 2, kernel.shape[1] // 2
    out = np.zeros_like(img)
    for i in range(kernel.shape[0]):
        for j in range(kernel.shape[1]):
            w = kernel[i, j]
            if w != 0:
                out += w * _shift(img, i - ry, j - rx, 0.0)
    return out


def compute_gradients(inv: InverseDepthImage, filt: GradientFilter) -> GradientField:
    """Convolve the inverse-depth image with the filter's kernel pair.

    A pixel is valid only if every nonzero kernel tap of both kernels
    lands on a valid in-bounds pixel; the border band is invalid.
    """
    kh = max(k.shape[0] for k in (filt.kx, filt.ky))
    kw = max(k.shape[1] for k in (filt.kx, filt.ky))
    if inv.height < kh or inv.width < kw:
        raise ValueError(
            f"image {inv.height}x{inv.width} smaller than filter footprint {kh}x{kw}"
        )
    gx = _correlate(inv.data, filt.kx)
    gy = _correlate(inv.data, filt.ky)
    valid = inv.valid.copy()
    for dy, dx in filt._offsets():
        valid &= _shift(inv.valid, dy, dx, False)
    return GradientField(gx, gy, valid)


def candidate_normal(gx: float, gy: float, delta, intr: CameraIntrinsics) -> CandidateNormal:
    """Candidate normal from the center gradients and one neighbor displacement.

    delta is the neighbor-minus-center displacement (dX, dY, dZ) in meters.
    Returns weight 0 when |dZ| < Z_EPS or the unnormalized vector is degenerate.
    """
    dX, dY, dZ = (float(v) for v in delta)
    a = intr.fx * gx
    b = intr.fy * gy
    if abs(dZ) < Z_EPS:
        return CandidateNormal(np.zeros(3), 0)
    c = -(a * dX + b * dY) / dZ
    v = np.array([a, b, c])
    n = float(np.linalg.norm(v))
    if n < NORM_EPS:
        return CandidateNormal(np.zeros(3), 0)
    return CandidateNormal(v / n, 1)


def azimuth(gx: float, gy: float, intr: CameraIntrinsics) -> float:
    """Full-quadrant azimuth of (fx*gx, fy*gy), in [0, 2*pi)."""
    a = intr.fx * gx
    b = intr.fy * gy
    if abs(a) < NORM_EPS and abs(b) < NORM_EPS:
        raise DegenerateDirectionError("both gradient components are degenerate")
    phi = float(np.arctan2(b, a))
    return phi % (2.0 * np.pi)


def inclination(candidates, phi: float) -> float:
    """Closed-form optimal inclination for hemisphere-aligned candidates.

    theta = atan2(sum(nx) cos(phi) + sum(ny) sin(phi), sum(nz)), folded
    into [0, pi]; sums run over weight-1 candidates only.
    """
    num = 0.0
    den = 0.0
    k = 0
    for cand in candidates:
        if cand.weight != 1:
            continue
        nx, ny, nz = cand.vector
        num += nx * np.cos(phi) + ny * np.sin(phi)
        den += nz
        k += 1
    if k == 0:
        raise DegenerateNeighborhoodError("no weight-1 candidates")
    theta = float(np.arctan2(num, den))
    return abs(theta)


@numba.njit(cache=True, nogil=True)
def _accumulate_candidates(
    z, valid, active, a, b, u, g2, offs_dx, offs_dy, w1, w2, acc_a, acc_c, count
):
    """Per-pixel candidate-normal accumulation (the hot loop).

    For each usable neighbor: c = -(a*dX + b*dY)/dZ via the identity
    a*dX + b*dY = dZ*u + Zn*(a*dx/fx + b*dy/fy), candidate v = (a, b, c),
    hemisphere sign from v . P (ties broken by component signs so the
    result is invariant to kernel negation and depth rescaling), then
    sum sigma/|v| and sigma*c/|v| in the fixed neighbor order.
    """
    h, w = z.shape
    k = offs_dx.size
    for y in range(h):
        for x in range(w):
            if not active[y, x]:
                continue
            zc = z[y, x]
            ac = a[y, x]
            bc = b[y, x]
            uc = u[y, x]
            gg = g2[y, x]
            tie_u = TIE_REL * abs(uc)
            sum_a = 0.0
            sum_c = 0.0
            cnt = 0
            for i in range(k):
                yn = y + offs_dy[i]
                xn = x + offs_dx[i]
                if yn < 0 or yn >= h or xn < 0 or xn >= w:
                    continue
                if not valid[yn, xn]:
                    continue
                zn = z[yn, xn]
                dz = zn - zc
                if abs(dz) < Z_EPS:
                    continue
                q = ac * w1[i] + bc * w2[i]
                c = -(dz * uc + zn * q) / dz
                norm = np.sqrt(gg + c * c)
                flip = uc + c
                if abs(flip) <= tie_u + TIE_REL * abs(c):
                    if c > 0:
                        sigma = -1.0
                    elif c < 0:
                        sigma = 1.0
                    elif bc > 0:
                        sigma = -1.0
                    elif bc < 0:
                        sigma = 1.0
                    elif ac > 0:
                        sigma = -1.0
                    else:
                        sigma = 1.0
                elif flip > 0:
                    sigma = -1.0
                else:
                    sigma = 1.0
                wgt = sigma / norm
                sum_a += wgt
                sum_c += wgt * c
                cnt += 1
            acc_a[y, x] = sum_a
            acc_c[y, x] = sum_c
            count[y, x] = cnt


def _resolve_threads(threads) -> int:
    if threads is None:
        threads = os.environ.get(THREADS_ENV, "1")
    threads = int(threads)
    if threads < 1:
        raise ValueError(f"thread count must be >= 1, got {threads}")
    return threads


def _normals_band(zdata, zvalid, intr, filt, nbhd, row0):
    """Vectorized normal estimation over a full-width row band.

    row0 is the absolute image row of the band's first row, so pixel
    coordinates stay global. Every operation is per-pixel over fixed
    inputs, which makes the result independent of how the image is
    banded.
    """
    h, w = zdata.shape
    inv = np.zeros_like(zdata)
    np.divide(1.0, zdata, out=inv, where=zvalid)

    gx = _correlate(inv, filt.kx)
    gy = _correlate(inv, filt.ky)
    gvalid = zvalid.copy()
    for dy, dx in filt._offsets():
        gvalid &= _shift(zvalid, dy, dx, False)

    xgrid = (np.arange(w, dtype=np.float64) - intr.xo) / intr.fx
    ygrid = (np.arange(row0, row0 + h, dtype=np.float64) - intr.yo) / intr.fy

    a = intr.fx * gx
    b = intr.fy * gy
    base = zvalid & gvalid
    degen = base & (np.abs(a) < NORM_EPS) & (np.abs(b) < NORM_EPS)
    active = base & ~degen

    g2 = a * a + b * b
    # u is the gradient-weighted ray direction: a*X + b*Y == z*u, and the
    # neighbor displacement satisfies a*dX + b*dY == dz*u + zn*(a*dx/fx + b*dy/fy)
    u = a * xgrid[None, :]
    u += b * ygrid[:, None]

    acc_a = np.zeros_like(zdata)  # sum of sigma_i / |v_i|
    acc_c = np.zeros_like(zdata)  # sum of sigma_i * c_i / |v_i|
    count = np.zeros(zdata.shape, dtype=np.uint8)
    offs = np.asarray(nbhd.offsets, dtype=np.int64)
    w1 = offs[:, 0] / intr.fx
    w2 = offs[:, 1] / intr.fy
    _accumulate_candidates(
        np.ascontiguousarray(zdata),
        np.ascontiguousarray(zvalid),
        np.ascontiguousarray(active),
        a, b, u, g2,
        offs[:, 0].copy(), offs[:, 1].copy(), w1, w2,
        acc_a, acc_c, count,
    )

    nx = acc_a * a
    ny = acc_a * b
    nz = acc_c
    n2 = nx * nx + ny * ny + nz * nz
    have = active & (count > 0) & (n2 >= NORM_EPS * NORM_EPS)

    normals = np.zeros((h, w, 3), dtype=np.float64)
    inv_len = np.zeros_like(zdata)
    np.divide(1.0, np.sqrt(n2, where=have, out=np.ones_like(n2)), out=inv_len, where=have)
    normals[..., 0] = np.where(have, nx * inv_len, 0.0)
    normals[..., 1] = np.where(have, ny * inv_len, 0.0)
    normals[..., 2] = np.where(have, nz * inv_len, 0.0)

    # all-neighbors-skipped (or fully cancelled) pixels: vertical-surface limit
    fallback = active & ~have
    if np.any(fallback):
        g = np.sqrt(g2, where=fallback, out=np.ones_like(g2))
        normals[..., 0] = np.where(fallback, a / g, normals[..., 0])
        normals[..., 1] = np.where(fallback, b / g, normals[..., 1])

    normals[..., 0] = np.where(degen, 0.0, normals[..., 0])
    normals[..., 1] = np.where(degen, 0.0, normals[..., 1])
    normals[..., 2] = np.where(degen, -1.0, normals[..., 2])

    # re-impose the toward-camera orientation; z > 0 on valid pixels, so
    # the sign of n . P is the sign of nx*xg + ny*yg + nz
    tx = normals[..., 0] * xgrid[None, :]
    ty = normals[..., 1] * ygrid[:, None]
    dot_p = tx + ty
    dot_p += normals[..., 2]
    flip = dot_p > 0
    # perpendicular ties get a canonical sign so the output is invariant
    # to kernel negation (which negates the fallback normals wholesale)
    np.abs(tx, out=tx)
    np.abs(ty, out=ty)
    tx += ty
    tx += np.abs(normals[..., 2])
    tx *= TIE_REL
    tie = np.abs(dot_p) <= tx
    if np.any(tie & base):
        first = np.sign(normals[..., 2])
        second = np.where(
            normals[..., 1] != 0, np.sign(normals[..., 1]), np.sign(normals[..., 0])
        )
        np.copyto(first, second, where=first == 0)
        np.copyto(flip, first > 0, where=tie)
    flip &= base
    normals = np.where(flip[..., None], -normals, normals)
    normals = np.where(base[..., None], normals, 0.0)
    return normals, base


def estimate_normals(
    z: DepthImage,
    intr: CameraIntrinsics,
    filt: GradientFilter | None = None,
    nbhd: NeighborhoodSpec | None = None,
    threads: int | None = None,
) -> NormalMap:
    """Per-pixel surface normals from a depth image.

    Degenerate-gradient pixels emit (0, 0, -1); pixels whose whole
    neighborhood is iso-depth emit the vertical-surface limit
    normalize(fx*gx, fy*gy, 0); borders and invalid inputs stay invalid.
    Output is bit-identical for any thread count.
    """
    filt = filt if filt is not None else GradientFilter.central()
    nbhd = nbhd if nbhd is not None else NeighborhoodSpec.connected8()
    kh = max(k.shape[0] for k in (filt.kx, filt.ky))
    kw = max(k.shape[1] for k in (filt.kx, filt.ky))
    if z.height < max(kh, 3) or z.width < max(kw, 3):
        raise ValueError(f"image {z.height}x{z.width} too small for 3x3 processing")
    threads = _resolve_threads(threads)

    if threads == 1:
        normals, valid = _normals_band(z.data, z.valid, intr, filt, nbhd, 0)
        return NormalMap(normals, valid)

    halo = max(filt.halo, nbhd.halo)
    bounds = np.linspace(0, z.height, threads + 1, dtype=int)
    jobs = []
    for i in range(threads):
        r0, r1 = int(bounds[i]), int(bounds[i + 1])
        if r0 == r1:
            continue
        lo = max(0, r0 - halo)
        hi = min(z.height, r1 + halo)
        jobs.append((r0, r1, lo, hi))

    normals = np.zeros((z.height, z.width, 3), dtype=np.float64)
    valid = np.zeros((z.height, z.width), dtype=bool)

    def run(job):
        r0, r1, lo, hi = job
        n, v = _normals_band(z.data[lo:hi], z.valid[lo:hi], intr, filt, nbhd, lo)
        return r0, r1, lo, n, v

    with ThreadPoolExecutor(max_workers=threads) as pool:
        for r0, r1, lo, n, v in pool.map(run, jobs):
            normals[r0:r1] = n[r0 - lo : r1 - lo]
            valid[r0:r1] = v[r0 - lo : r1 - lo]
    return NormalMap(normals, valid)


def estimate_normals_from_disparity(
    disp: DisparityImage,
    intr: CameraIntrinsics,
    filt: GradientFilter | None = None,
    nbhd: NeighborhoodSpec | None = None,
    threads: int | None = None,
) -> NormalMap:
    """estimate_normals on the depth image implied by the disparity."""
    return estimate_normals(disparity_to_depth(disp, intr), intr, filt, nbhd, threads)
