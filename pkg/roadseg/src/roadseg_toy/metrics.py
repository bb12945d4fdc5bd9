"""Segmentation scoring and the key=value report format.

Same five metrics and the same flat report grammar the normal-forge
eval command emits; 0/0 ratios stay None.
"""

from __future__ import annotations

import numpy as np


def confusion_counts(pred: np.ndarray, gt: np.ndarray) -> tuple[int, int, int, int]:
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    tp = int(np.count_nonzero(pred & gt))
    tn = int(np.count_nonzero(~pred & ~gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    return tp, tn, fp, fn


def five_scores(tp: int, tn: int, fp: int, fn: int) -> dict:
    def div(a, b):
        return None if b == 0 else a / b

    return {
        "accuracy": div(tp + tn, tp + tn + fp + fn),
        "precision": div(tp, tp + fp),
        "recall": div(tp, tp + fn),
        "fscore": div(2 * tp * tp, 2 * tp * tp + tp * (fp + fn)),
        "iou": div(tp, tp + fp + fn),
    }


def fscore(pred: np.ndarray, gt: np.ndarray) -> float | None:
    return five_scores(*confusion_counts(pred, gt))["fscore"]


def threshold_sweep(prob: np.ndarray, gt: np.ndarray, step: float = 0.01):
    """F-score over prob >= t for t in (0, 1); returns (max_f, argmax_t, curve)."""
    thresholds = np.arange(step, 1.0, step)
    curve = []
    best_f, best_t = 0.0, float(thresholds[0])
    for t in thresholds:
        f = fscore(prob >= t, gt)
        curve.append((float(t), f))
        if f is not None and f > best_f:
            best_f, best_t = float(f), float(t)
    return best_f, best_t, curve


def format_report(entries: dict) -> str:
    def fmt(v):
        if v is None:
            return "undefined"
        if isinstance(v, str):
            return v
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        return repr(float(v))

    return "".join(f"{k}={fmt(v)}\n" for k, v in entries.items())


def write_report(entries: dict, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_report(entries))
