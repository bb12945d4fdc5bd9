"""Independent total-least-squares plane-fit normal estimator.

Used as a cross-check oracle for the gradient-based estimator: fits a
plane to backprojected window points by minimizing squared orthogonal
distance, i.e. the smallest-eigenvalue direction of the centered 3x3
covariance. The eigenproblem is solved in closed form (trigonometric
eigenvalues, cross-product eigenvectors) so the oracle shares no code
path with the estimator it checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics, DepthImage
from .errors import RankDeficientError
from .estimator import NormalMap

# relative eigenvalue gap below which the fit direction is ambiguous;
# the trigonometric eigenvalue form only resolves near-repeated roots to
# about sqrt(ulp), so this cannot be much tighter
_RANK_TOL = 1e-7


@dataclass(frozen=True)
class PlaneParams:
    """Unit normal and offset of the plane n . P + d = 0."""

    normal: np.ndarray
    offset: float


def _smallest_eigvec_sym3(cxx, cxy, cxz, cyy, cyz, czz):
    """Eigenvector of the smallest eigenvalue of symmetric 3x3 matrices.

    All six arguments broadcast; returns (vx, vy, vz, ok) where ok is
    False where the two smallest eigenvalues are too close for the
    direction to be well defined.
    """
    cxx, cxy, cxz, cyy, cyz, czz = np.broadcast_arrays(
        *(np.asarray(m, dtype=np.float64) for m in (cxx, cxy, cxz, cyy, cyz, czz))
    )
    q = (cxx + cyy + czz) / 3.0
    bxx, byy, bzz = cxx - q, cyy - q, czz - q
    p2 = (bxx * bxx + byy * byy + bzz * bzz) / 6.0 + (
        cxy * cxy + cxz * cxz + cyz * cyz
    ) / 3.0
    p = np.sqrt(p2)
    scale = np.where(p > 0, p, 1.0)
    dxx, dyy, dzz = bxx / scale, byy / scale, bzz / scale
    dxy, dxz, dyz = cxy / scale, cxz / scale, cyz / scale
    # r = det(B)/2 for B = (A - qI)/p; clamp against roundoff
    r = 0.5 * (
        dxx * (dyy * dzz - dyz * dyz)
        - dxy * (dxy * dzz - dyz * dxz)
        + dxz * (dxy * dyz - dyy * dxz)
    )
    r = np.clip(r, -1.0, 1.0)
    ang = np.arccos(r) / 3.0
    lam_max = q + 2.0 * p * np.cos(ang)
    lam_min = q + 2.0 * p * np.cos(ang + 2.0 * np.pi / 3.0)
    lam_mid = 3.0 * q - lam_max - lam_min

    # rows of (A - lam_min I); its null direction is the eigenvector
    m00, m11, m22 = cxx - lam_min, cyy - lam_min, czz - lam_min
    crosses = (
        # row0 x row1
        (cxy * cyz - cxz * m11, cxz * cxy - m00 * cyz, m00 * m11 - cxy * cxy),
        # row0 x row2
        (cxy * m22 - cxz * cyz, cxz * cxz - m00 * m22, m00 * cyz - cxy * cxz),
        # row1 x row2
        (m11 * m22 - cyz * cyz, cyz * cxz - cxy * m22, cxy * cyz - m11 * cxz),
    )
    norms = [np.sqrt(vx * vx + vy * vy + vz * vz) for vx, vy, vz in crosses]
    stacked = np.stack(norms)
    best = np.argmax(stacked, axis=0)
    vx = np.choose(best, [c[0] for c in crosses])
    vy = np.choose(best, [c[1] for c in crosses])
    vz = np.choose(best, [c[2] for c in crosses])
    nrm = np.choose(best, norms)
    safe = np.where(nrm > 0, nrm, 1.0)
    vx, vy, vz = vx / safe, vy / safe, vz / safe

    # one inverse-iteration polish: w = adj(A - lam_min I) v. The adjugate
    # is ~ lam_mid*lam_max times the projector onto the null direction, so
    # the mid-eigenvector leakage of the cross-product estimate (about
    # sqrt(ulp)/gap) gets squared away.
    wx = crosses[2][0] * vx - crosses[1][0] * vy + crosses[0][0] * vz
    wy = crosses[2][1] * vx - crosses[1][1] * vy + crosses[0][1] * vz
    wz = crosses[2][2] * vx - crosses[1][2] * vy + crosses[0][2] * vz
    wn = np.sqrt(wx * wx + wy * wy + wz * wz)
    good = wn > 0
    wsafe = np.where(good, wn, 1.0)
    # keep the polished vector on the same side as the estimate
    side = np.where(wx * vx + wy * vy + wz * vz < 0, -1.0, 1.0) / wsafe
    vx = np.where(good, wx * side, vx)
    vy = np.where(good, wy * side, vy)
    vz = np.where(good, wz * side, vz)

    spread = np.maximum(np.abs(lam_max), 1.0e-300)
    ok = (p > 0) & ((lam_mid - lam_min) > _RANK_TOL * spread) & (nrm > 0)
    return vx, vy, vz, ok


def plane_fit(points) -> PlaneParams:
    """Total-least-squares plane through >= 3 non-collinear 3D points.

    The normal minimizes the summed squared orthogonal distances and is
    flipped so n . centroid <= 0; offset is -n . centroid.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must be (N, 3), got {pts.shape}")
    if pts.shape[0] < 3:
        raise ValueError(f"need at least 3 points, got {pts.shape[0]}")
    centroid = pts.mean(axis=0)
    d = pts - centroid
    cov = d.T @ d / pts.shape[0]
    vx, vy, vz, ok = _smallest_eigvec_sym3(
        cov[0, 0], cov[0, 1], cov[0, 2], cov[1, 1], cov[1, 2], cov[2, 2]
    )
    if not bool(ok):
        raise RankDeficientError("points are collinear or otherwise degenerate")
    n = np.array([float(vx), float(vy), float(vz)])
    if float(n @ centroid) > 0:
        n = -n
    return PlaneParams(n, float(-(n @ centroid)))


def _box_sum(a: np.ndarray, radius: int) -> np.ndarray:
    """Sum of a over the (2r+1)^2 window centered per pixel, clipped at borders.

    The running sums use extended precision: in double, cumulative error
    over the full image leaks through the corner-difference cancellation
    and caps the fitted normals at ~1e-6 rad even on exact planes.
    """
    h, w = a.shape
    ii = np.zeros((h + 1, w + 1), dtype=np.longdouble)
    ii[1:, 1:] = np.cumsum(np.cumsum(a.astype(np.longdouble), axis=0), axis=1)
    rows = np.arange(h)
    cols = np.arange(w)
    y0 = np.clip(rows - radius, 0, h)
    y1 = np.clip(rows + radius + 1, 0, h)
    x0 = np.clip(cols - radius, 0, w)
    x1 = np.clip(cols + radius + 1, 0, w)
    out = (
        ii[np.ix_(y1, x1)] - ii[np.ix_(y0, x1)] - ii[np.ix_(y1, x0)] + ii[np.ix_(y0, x0)]
    )
    return out.astype(np.float64)


def oracle_normal_map(z: DepthImage, intr: CameraIntrinsics, window: int = 5) -> NormalMap:
    """Per-pixel plane_fit over the backprojected valid window points.

    Pixels with fewer than 3 valid window points, or whose window is
    rank deficient, are invalid. Same toward-camera orientation as the
    gradient-based estimator.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    radius = window // 2
    m = z.valid.astype(np.float64)
    xs = (np.arange(z.width, dtype=np.float64) - intr.xo) / intr.fx
    ys = (np.arange(z.height, dtype=np.float64) - intr.yo) / intr.fy
    X = z.data * xs[None, :]
    Y = z.data * ys[:, None]
    Z = z.data

    n = _box_sum(m, radius)
    enough = n >= 3
    safe_n = np.where(enough, n, 1.0)
    mx = _box_sum(X, radius) / safe_n
    my = _box_sum(Y, radius) / safe_n
    mz = _box_sum(Z, radius) / safe_n
    cxx = _box_sum(X * X, radius) / safe_n - mx * mx
    cxy = _box_sum(X * Y, radius) / safe_n - mx * my
    cxz = _box_sum(X * Z, radius) / safe_n - mx * mz
    cyy = _box_sum(Y * Y, radius) / safe_n - my * my
    cyz = _box_sum(Y * Z, radius) / safe_n - my * mz
    czz = _box_sum(Z * Z, radius) / safe_n - mz * mz

    vx, vy, vz, ok = _smallest_eigvec_sym3(cxx, cxy, cxz, cyy, cyz, czz)
    valid = enough & ok
    flip = (vx * mx + vy * my + vz * mz) > 0
    sign = np.where(flip, -1.0, 1.0)
    normals = np.zeros((z.height, z.width, 3), dtype=np.float64)
    normals[..., 0] = np.where(valid, sign * vx, 0.0)
    normals[..., 1] = np.where(valid, sign * vy, 0.0)
    normals[..., 2] = np.where(valid, sign * vz, 0.0)
    return NormalMap(normals, valid)
