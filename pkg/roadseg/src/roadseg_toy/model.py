"""Two-encoder segmentation network with a densely-connected decoder.

Two structurally identical residual encoders (one for the color-like
stream, one for the surface-normal stream) are fused level by level
with element-wise sums. The decoder is a grid of feature extractors
F[i][j] and upsampling nodes; in the dense variant each F[i][j]
consumes the upsampled node from the level below plus every same-level
predecessor. Deleting edges yields the sparse (U-Net-like) and
no-skip ablation variants. A sigmoid head restores full resolution and
emits a one-channel probability map.
"""

from __future__ import annotations

import torch
from torch import nn

from .ladder import ChannelLadder

VARIANTS = ("nsc", "ssc", "dcsc")


def _conv_bn_relu(in_ch: int, out_ch: int, kernel: int = 3, stride: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, kernel, stride=stride, padding=kernel // 2, bias=False),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(inplace=True),
    )


class BasicBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)
        self.relu = nn.ReLU(inplace=True)
        self.proj = None
        if stride != 1 or in_ch != out_ch:
            self.proj = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_ch),
            )

    def forward(self, x):
        identity = x if self.proj is None else self.proj(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + identity)


class Bottleneck(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, stride: int = 1):
        super().__init__()
        width = out_ch // 4
        self.conv1 = nn.Conv2d(in_ch, width, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(width)
        self.conv2 = nn.Conv2d(width, width, 3, stride=stride, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(width)
        self.conv3 = nn.Conv2d(width, out_ch, 1, bias=False)
        self.bn3 = nn.BatchNorm2d(out_ch)
        self.relu = nn.ReLU(inplace=True)
        self.proj = None
        if stride != 1 or in_ch != out_ch:
            self.proj = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_ch),
            )

    def forward(self, x):
        identity = x if self.proj is None else self.proj(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.relu(self.bn2(self.conv2(out)))
        out = self.bn3(self.conv3(out))
        return self.relu(out + identity)


def _stage(in_ch: int, out_ch: int, blocks: int, stride: int, bottleneck: bool) -> nn.Sequential:
    cls = Bottleneck if bottleneck else BasicBlock
    layers = [cls(in_ch, out_ch, stride=stride)]
    layers += [cls(out_ch, out_ch) for _ in range(blocks - 1)]
    return nn.Sequential(*layers)


class ResidualEncoder(nn.Module):
    """Stem (conv+norm+relu), max pool, then four residual stages.

    Emits five feature maps at strides 2, 4, 8, 16, 32 with the
    ladder's channel counts.
    """

    def __init__(self, ladder: ChannelLadder):
        super().__init__()
        c0, c1, c2, c3, c4 = ladder.channels
        b = ladder.blocks
        self.stem = _conv_bn_relu(3, c0, kernel=7, stride=2)
        self.pool = nn.MaxPool2d(3, stride=2, padding=1)
        self.stage1 = _stage(c0, c1, b[0], 1, ladder.bottleneck)
        self.stage2 = _stage(c1, c2, b[1], 2, ladder.bottleneck)
        self.stage3 = _stage(c2, c3, b[2], 2, ladder.bottleneck)
        self.stage4 = _stage(c3, c4, b[3], 2, ladder.bottleneck)


class UpsampleNode(nn.Module):
    """Doubles resolution and maps to the target level's channel count."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.up = nn.Upsample(scale_factor=2, mode="nearest")
        self.conv = _conv_bn_relu(in_ch, out_ch)

    def forward(self, x):
        return self.conv(self.up(x))


class FeatureExtractor(nn.Module):
    """Two 3x3 conv layers at constant resolution."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.body = nn.Sequential(_conv_bn_relu(in_ch, out_ch), _conv_bn_relu(out_ch, out_ch))

    def forward(self, *inputs):
        return self.body(torch.cat(inputs, dim=1) if len(inputs) > 1 else inputs[0])


class RoadSegToy(nn.Module):
    """Build with a ChannelLadder and a variant in {'nsc', 'ssc', 'dcsc'}."""

    def __init__(self, ladder: ChannelLadder, variant: str = "dcsc"):
        super().__init__()
        variant = variant.lower()
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}; use one of {VARIANTS}")
        self.ladder = ladder
        self.variant = variant
        c = ladder.channels

        self.rgb_encoder = ResidualEncoder(ladder)
        self.normal_encoder = ResidualEncoder(ladder)

        # decoder grid: level i hosts columns j = 1 .. 4-i; the sparse and
        # no-skip variants keep a single chain (the last column per level)
        self.ups = nn.ModuleDict()
        self.extractors = nn.ModuleDict()
        if variant == "dcsc":
            for i in range(3, -1, -1):
                for j in range(1, 5 - i):
                    self.ups[f"u{i}_{j}"] = UpsampleNode(c[i + 1], c[i])
                    self.extractors[f"f{i}_{j}"] = FeatureExtractor((j + 1) * c[i], c[i])
        else:
            for i in range(3, -1, -1):
                j = 4 - i
                self.ups[f"u{i}_{j}"] = UpsampleNode(c[i + 1], c[i])
                in_ch = 2 * c[i] if variant == "ssc" else c[i]
                self.extractors[f"f{i}_{j}"] = FeatureExtractor(in_ch, c[i])

        head_ch = max(c[0] // 2, 8)
        self.head = nn.Sequential(
            nn.Upsample(scale_factor=2, mode="nearest"),
            _conv_bn_relu(c[0], head_ch),
            nn.Conv2d(head_ch, 1, 3, padding=1),
        )

    def _encode(self, rgb, normal):
        """Hierarchical fusion: the rgb stream consumes the fused maps."""
        r = self.rgb_encoder
        n = self.normal_encoder
        nrm = n.stem(normal)
        fused = [r.stem(rgb) + nrm]
        x = r.pool(fused[0])
        nrm = n.pool(nrm)
        for stage_name in ("stage1", "stage2", "stage3", "stage4"):
            x = getattr(r, stage_name)(x)
            nrm = getattr(n, stage_name)(nrm)
            fused.append(x + nrm)
            x = fused[-1]
        return fused

    def forward(self, rgb: torch.Tensor, normal: torch.Tensor) -> torch.Tensor:
        if rgb.shape != normal.shape:
            raise ValueError(f"input shapes differ: {tuple(rgb.shape)} vs {tuple(normal.shape)}")
        if rgb.dim() != 4 or rgb.shape[1] != 3:
            raise ValueError(f"expected (B, 3, H, W) inputs, got {tuple(rgb.shape)}")
        h, w = rgb.shape[2], rgb.shape[3]
        if h % 32 or w % 32:
            raise ValueError(f"input resolution must be divisible by 32, got {h}x{w}")

        e = self._encode(rgb, normal)
        if self.variant == "dcsc":
            nodes = {(i, 0): e[i] for i in range(5)}
            for j in range(1, 5):
                for i in range(4 - j, -1, -1):
                    if j > 4 - i:
                        continue
                    up = self.ups[f"u{i}_{j}"](nodes[(i + 1, j - 1)])
                    preds = [nodes[(i, k)] for k in range(j)]
                    nodes[(i, j)] = self.extractors[f"f{i}_{j}"](up, *preds)
            top = nodes[(0, 4)]
        else:
            x = e[4]
            for i in range(3, -1, -1):
                j = 4 - i
                up = self.ups[f"u{i}_{j}"](x)
                if self.variant == "ssc":
                    x = self.extractors[f"f{i}_{j}"](up, e[i])
                else:
                    x = self.extractors[f"f{i}_{j}"](up)
            top = x
        return torch.sigmoid(self.head(top))


def build_model(ladder: ChannelLadder, variant: str = "dcsc") -> RoadSegToy:
    return RoadSegToy(ladder, variant)


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
