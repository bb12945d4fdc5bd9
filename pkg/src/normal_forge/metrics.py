"""Evaluation metrics: angular error for normal maps, the five
segmentation scores, and the geometric freespace baseline.

Undefined ratios (0/0) are reported as None rather than coerced to a
number, so degenerate masks stay visible in reports.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyEvaluationError
from .estimator import NormalMap


@dataclass(frozen=True)
class ConfusionCounts:
    n_tp: int
    n_tn: int
    n_fp: int
    n_fn: int

    def __post_init__(self):
        if min(self.n_tp, self.n_tn, self.n_fp, self.n_fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.n_tp + self.n_tn + self.n_fp + self.n_fn


@dataclass(frozen=True)
class SegmentationScores:
    """The five scores; None marks a 0/0 ratio left undefined."""

    accuracy: float | None
    precision: float | None
    recall: float | None
    fscore: float | None
    iou: float | None

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "fscore": self.fscore,
            "iou": self.iou,
        }


@dataclass(frozen=True)
class AngularErrorMap:
    """Per-pixel angular error in radians plus its mean over valid pixels."""

    errors: np.ndarray
    valid: np.ndarray
    e_aae: float
    m: int


def angular_error(n, n_hat, sign_invariant: bool = False):
    """Angle between two nonzero vectors: acos of the normalized dot.

    Broadcasts over leading axes; the dot-product argument is clamped
    to [-1, 1]. With sign_invariant, returns min(e, pi - e).
    """
    u = np.asarray(n, dtype=np.float64)
    v = np.asarray(n_hat, dtype=np.float64)
    nu = np.linalg.norm(u, axis=-1)
    nv = np.linalg.norm(v, axis=-1)
    if np.any(nu == 0) or np.any(nv == 0):
        raise ValueError("angular_error requires nonzero vectors")
    cosang = np.clip(np.sum(u * v, axis=-1) / (nu * nv), -1.0, 1.0)
    e = np.arccos(cosang)
    if sign_invariant:
        e = np.minimum(e, np.pi - e)
    if e.ndim == 0:
        return float(e)
    return e


def aae(gt: NormalMap, pred: NormalMap, sign_invariant: bool = False) -> AngularErrorMap:
    """Per-pixel angular error over jointly valid pixels and its mean."""
    if gt.normals.shape != pred.normals.shape:
        raise ValueError(
            f"dimension mismatch: gt {gt.normals.shape[:2]} vs pred {pred.normals.shape[:2]}"
        )
    joint = gt.valid & pred.valid
    m = int(np.count_nonzero(joint))
    if m == 0:
        raise EmptyEvaluationError("no jointly valid pixels to evaluate")
    dots = np.sum(gt.normals * pred.normals, axis=-1)
    errors = np.arccos(np.clip(dots, -1.0, 1.0))
    if sign_invariant:
        errors = np.minimum(errors, np.pi - errors)
    errors = np.where(joint, errors, 0.0)
    e_aae = float(errors.sum(dtype=np.float64) / m)
    return AngularErrorMap(errors, joint, e_aae, m)


def confusion(pred: np.ndarray, gt: np.ndarray, valid: np.ndarray | None = None) -> ConfusionCounts:
    """Pixel counts over the valid region, positive = freespace."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"dimension mismatch: pred {pred.shape} vs gt {gt.shape}")
    if valid is None:
        valid = np.ones(pred.shape, dtype=bool)
    valid = np.asarray(valid, dtype=bool)
    if valid.shape != pred.shape:
        raise ValueError(f"dimension mismatch: valid {valid.shape} vs pred {pred.shape}")
    tp = int(np.count_nonzero(valid & pred & gt))
    tn = int(np.count_nonzero(valid & ~pred & ~gt))
    fp = int(np.count_nonzero(valid & pred & ~gt))
    fn = int(np.count_nonzero(valid & ~pred & gt))
    return ConfusionCounts(tp, tn, fp, fn)


def scores(c: ConfusionCounts) -> SegmentationScores:
    """Accuracy, precision, recall, F-score and IoU from the counts."""
    if c.total == 0:
        raise EmptyEvaluationError("all confusion counts are zero")
    tp, tn, fp, fn = c.n_tp, c.n_tn, c.n_fp, c.n_fn

    def ratio(num, den):
        return None if den == 0 else num / den

    return SegmentationScores(
        accuracy=ratio(tp + tn, c.total),
        precision=ratio(tp, tp + fp),
        recall=ratio(tp, tp + fn),
        fscore=ratio(2 * tp * tp, 2 * tp * tp + tp * (fp + fn)),
        iou=ratio(tp, tp + fp + fn),
    )


def normal_freespace(
    nm: NormalMap,
    up,
    max_angle: float,
    largest_component: bool = False,
) -> np.ndarray:
    """Pixels whose normal lies within max_angle of the up direction.

    The comparison is sign-invariant. With largest_component, only the
    largest 4-connected positive region is kept (ties resolved by first
    label in row-major order).
    """
    up = np.asarray(up, dtype=np.float64)
    if abs(float(np.linalg.norm(up)) - 1.0) > 1e-6:
        raise ValueError("up must be a unit vector")
    up = up / np.linalg.norm(up)
    if not (0 < max_angle < np.pi / 2):
        raise ValueError(f"max_angle must be in (0, pi/2), got {max_angle}")
    dots = np.abs(nm.normals @ up)
    ang = np.arccos(np.clip(dots, -1.0, 1.0))
    mask = nm.valid & (ang <= max_angle)
    if largest_component and mask.any():
        structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
        labels, count = ndimage.label(mask, structure=structure)
        if count > 1:
            sizes = np.bincount(labels.ravel())
            sizes[0] = 0
            mask = labels == int(np.argmax(sizes))
    return mask


# piecewise-linear blue -> cyan -> yellow -> red ramp for error maps
_RAMP = np.array(
    [[40, 60, 230], [60, 200, 230], [240, 220, 60], [230, 40, 40]], dtype=np.float64
)


def colorize_angular_errors(aem: AngularErrorMap, saturation: float = np.deg2rad(30.0)) -> np.ndarray:
    """8-bit RGB rendering of an error map; linear ramp up to saturation.

    Invalid pixels are black.
    """
    if saturation <= 0:
        raise ValueError("saturation angle must be positive")
    t = np.clip(aem.errors / saturation, 0.0, 1.0)
    pos = t * (len(_RAMP) - 1)
    idx = np.minimum(pos.astype(np.int64), len(_RAMP) - 2)
    frac = (pos - idx)[..., None]
    rgb = _RAMP[idx] * (1.0 - frac) + _RAMP[idx + 1] * frac
    out = np.where(aem.valid[..., None], rgb, 0.0)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
