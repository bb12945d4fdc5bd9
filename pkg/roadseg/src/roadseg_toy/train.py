"""Deterministic toy-scale training and evaluation.

SGD with momentum at the 0.001 initial learning rate, pixel-wise binary
cross entropy, early stopping on a held-out validation split. All
randomness flows from the run seed and the thread count is pinned, so a
repeated run reproduces the loss curve exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .data import Sample, load_dataset
from .ladder import ChannelLadder
from .metrics import confusion_counts, five_scores, threshold_sweep
from .model import RoadSegToy, build_model


@dataclass
class TrainConfig:
    """Hyperparameters not fixed by the architecture contract."""

    lr: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 2
    val_fraction: float = 0.2
    patience: int = 30
    threads: int = 1
    depth_scale: float = 30.0
    # optional early exit once the training F-score reaches a target
    target_train_fscore: float | None = None


@dataclass
class History:
    train_loss: list = field(default_factory=list)
    train_fscore: list = field(default_factory=list)
    val_fscore: list = field(default_factory=list)
    stopped_epoch: int = 0
    stop_reason: str = ""


def _stack(samples: list[Sample]):
    normals = torch.stack([s.normals for s in samples])
    gray = torch.stack([s.gray for s in samples])
    target = torch.stack([s.target for s in samples])
    return normals, gray, target


def _split_fscore(model: RoadSegToy, samples: list[Sample], batch: int) -> float:
    model.eval()
    tp = tn = fp = fn = 0
    with torch.no_grad():
        for i in range(0, len(samples), batch):
            normals, gray, target = _stack(samples[i : i + batch])
            prob = model(normals, gray)
            a, b, c, d = confusion_counts(
                prob.numpy() >= 0.5, target.numpy() >= 0.5
            )
            tp, tn, fp, fn = tp + a, tn + b, fp + c, fn + d
    f = five_scores(tp, tn, fp, fn)["fscore"]
    return 0.0 if f is None else float(f)


def train_toy(
    dataset_dir,
    variant: str = "dcsc",
    epochs: int = 200,
    seed: int = 0,
    ladder: ChannelLadder | None = None,
    config: TrainConfig | None = None,
):
    """Train a model on a directory of normal-forge sample folders.

    Returns (model, History). Deterministic for a fixed seed and config.
    """
    config = config or TrainConfig()
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    torch.manual_seed(seed)
    torch.set_num_threads(config.threads)

    samples = load_dataset(dataset_dir, depth_scale=config.depth_scale)
    order = torch.randperm(len(samples), generator=torch.Generator().manual_seed(seed)).tolist()
    samples = [samples[i] for i in order]
    n_val = int(round(config.val_fraction * len(samples)))
    n_val = min(max(n_val, 1 if config.val_fraction > 0 and len(samples) > 1 else 0), len(samples) - 1)
    val = samples[:n_val]
    train = samples[n_val:]
    if not train:
        raise ValueError("empty training split")

    model = build_model(ladder or ChannelLadder.toy(), variant)
    optimizer = torch.optim.SGD(model.parameters(), lr=config.lr, momentum=config.momentum)
    criterion = nn.BCELoss()

    history = History()
    best_val = -1.0
    since_best = 0
    for epoch in range(epochs):
        gen = torch.Generator().manual_seed(seed * 100003 + epoch)
        perm = torch.randperm(len(train), generator=gen).tolist()
        model.train()
        losses = []
        for i in range(0, len(perm), config.batch_size):
            normals, gray, target = _stack([train[j] for j in perm[i : i + config.batch_size]])
            optimizer.zero_grad()
            prob = model(normals, gray)
            loss = criterion(prob.clamp(1e-6, 1 - 1e-6), target)
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
        history.train_loss.append(float(np.mean(losses)))
        history.train_fscore.append(_split_fscore(model, train, config.batch_size))
        if val:
            vf = _split_fscore(model, val, config.batch_size)
            history.val_fscore.append(vf)
            if vf > best_val:
                best_val = vf
                since_best = 0
            else:
                since_best += 1
        history.stopped_epoch = epoch + 1
        if (
            config.target_train_fscore is not None
            and history.train_fscore[-1] >= config.target_train_fscore
        ):
            history.stop_reason = "target_train_fscore"
            break
        if val and since_best > config.patience:
            history.stop_reason = "early_stopping"
            break
    else:
        history.stop_reason = "epochs"
    return model, history


def eval_toy(
    model: RoadSegToy,
    test_dir,
    threshold_step: float = 0.01,
    depth_scale: float = 30.0,
) -> dict:
    """Five scores at threshold 0.5 plus MaxF over a dense threshold sweep."""
    samples = load_dataset(test_dir, depth_scale=depth_scale)
    model.eval()
    probs = []
    targets = []
    with torch.no_grad():
        for s in samples:
            prob = model(s.normals[None], s.gray[None])
            probs.append(prob.numpy().ravel())
            targets.append(s.target.numpy().ravel() >= 0.5)
    prob = np.concatenate(probs)
    gt = np.concatenate(targets)
    report = dict(five_scores(*confusion_counts(prob >= 0.5, gt)))
    max_f, max_t, _ = threshold_sweep(prob, gt, step=threshold_step)
    report["max_f"] = max_f
    report["max_f_threshold"] = max_t
    report["n_images"] = len(samples)
    return report
