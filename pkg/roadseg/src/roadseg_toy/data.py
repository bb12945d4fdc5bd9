"""Dataset plumbing on top of the normal-forge file formats.

Samples live one-per-directory: depth.png (16-bit, value/256 meters,
0 invalid), normals.png (16-bit RGB, [0,65535] -> [-1,1], all-zero
invalid), freespace_gt.png (strict {0,255} mask). The generator shells
out to the `normal-forge` CLI, so only the published file formats are
consumed. The normal map feeds the first encoder and a depth-derived
grayscale triple feeds the second.
"""

from __future__ import annotations

import os
import random
import subprocess
from dataclasses import dataclass

import cv2
import numpy as np
import torch


def _read_png(path):
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise FileNotFoundError(f"cannot decode {path}")
    return img


def read_depth(path) -> np.ndarray:
    """Depth in meters; invalid pixels are 0."""
    stored = _read_png(path)
    if stored.dtype != np.uint16 or stored.ndim != 2:
        raise ValueError(f"{path}: expected 16-bit single-channel depth PNG")
    return stored.astype(np.float32) / 256.0


def read_normals(path) -> np.ndarray:
    """(H, W, 3) normal components in [-1, 1]; invalid pixels are 0."""
    stored = _read_png(path)
    if stored.dtype != np.uint16 or stored.ndim != 3:
        raise ValueError(f"{path}: expected 16-bit 3-channel normal PNG")
    rgb = stored[..., ::-1].astype(np.float32)
    comps = rgb / 65535.0 * 2.0 - 1.0
    invalid = np.all(stored == 0, axis=2)
    comps[invalid] = 0.0
    return comps


def read_mask(path) -> np.ndarray:
    stored = _read_png(path)
    if stored.dtype != np.uint8 or stored.ndim != 2:
        raise ValueError(f"{path}: expected 8-bit mask PNG")
    return stored == 255


@dataclass
class Sample:
    normals: torch.Tensor  # (3, H, W), first encoder stream
    gray: torch.Tensor     # (3, H, W), depth-derived grayscale triple
    target: torch.Tensor   # (1, H, W), freespace in {0, 1}
    name: str


def load_sample(sample_dir, depth_scale: float = 30.0) -> Sample:
    depth = read_depth(os.path.join(sample_dir, "depth.png"))
    normals = read_normals(os.path.join(sample_dir, "normals.png"))
    target = read_mask(os.path.join(sample_dir, "freespace_gt.png"))
    gray = np.clip(depth / depth_scale, 0.0, 1.0).astype(np.float32)
    return Sample(
        normals=torch.from_numpy(np.ascontiguousarray(normals.transpose(2, 0, 1))),
        gray=torch.from_numpy(np.stack([gray, gray, gray])),
        target=torch.from_numpy(target.astype(np.float32))[None],
        name=os.path.basename(os.path.normpath(sample_dir)),
    )


def load_dataset(dataset_dir, depth_scale: float = 30.0) -> list[Sample]:
    dirs = sorted(
        os.path.join(dataset_dir, d)
        for d in os.listdir(dataset_dir)
        if os.path.isdir(os.path.join(dataset_dir, d))
    )
    samples = [load_sample(d, depth_scale) for d in dirs]
    if not samples:
        raise ValueError(f"no sample directories under {dataset_dir}")
    return samples


def _scene_text(size: int, rng: random.Random) -> str:
    """A random road scene spec in the normal-forge key=value grammar."""
    f = size * 0.8
    lines = [
        "kind=road",
        f"width={size}",
        f"height={size}",
        f"fx={f!r}",
        f"fy={f!r}",
        f"cx={size / 2.0!r}",
        f"cy={size / 2.0!r}",
        "ground_d=1.5",
    ]
    lanes = [-3.0, 0.5, 3.5]
    rng.shuffle(lanes)
    for i in range(rng.randint(2, 3)):
        x = lanes[i] + rng.uniform(-0.8, 0.8)
        z = rng.uniform(6.0, 22.0)
        s = rng.uniform(1.2, 2.6)
        lines.append(f"box{i + 1}={x!r},{z!r},{s!r},{rng.uniform(1.0, 2.8)!r},{s!r}")
    return "\n".join(lines) + "\n"


def generate_toy_dataset(outdir, count: int, size: int = 64, seed: int = 0,
                         cli: str = "normal-forge") -> list[str]:
    """Render `count` road samples through the normal-forge CLI.

    Each sample directory ends up with depth.png, normals.png (estimated
    from the depth by the CLI) and freespace_gt.png.
    """
    if size % 32:
        raise ValueError("sample size must be divisible by 32")
    os.makedirs(outdir, exist_ok=True)
    dirs = []
    for i in range(count):
        rng = random.Random(seed * 1_000_003 + i)
        sample_dir = os.path.join(outdir, f"sample_{i:03d}")
        os.makedirs(sample_dir, exist_ok=True)
        spec_path = os.path.join(sample_dir, "scene_request.txt")
        with open(spec_path, "w", encoding="utf-8") as fh:
            fh.write(_scene_text(size, rng))
        subprocess.run(
            [cli, "synth", "--spec", spec_path, "--outdir", sample_dir],
            check=True, capture_output=True, text=True,
        )
        subprocess.run(
            [
                cli, "estimate",
                "--depth", os.path.join(sample_dir, "depth.png"),
                "--calib", os.path.join(sample_dir, "calib.txt"),
                "--out", os.path.join(sample_dir, "normals.png"),
            ],
            check=True, capture_output=True, text=True,
        )
        dirs.append(sample_dir)
    return dirs
