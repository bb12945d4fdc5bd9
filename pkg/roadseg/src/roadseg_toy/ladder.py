"""Encoder channel ladders for the five residual backbone depths."""

from __future__ import annotations

from dataclasses import dataclass

# (c0..c4, blocks per stage, bottleneck?) per backbone tag
_REFERENCE = {
    18: ((64, 64, 128, 256, 512), (2, 2, 2, 2), False),
    34: ((64, 64, 128, 256, 512), (3, 4, 6, 3), False),
    50: ((64, 256, 512, 1024, 2048), (3, 4, 6, 3), True),
    101: ((64, 256, 512, 1024, 2048), (3, 4, 23, 3), True),
    152: ((64, 256, 512, 1024, 2048), (3, 8, 36, 3), True),
}


@dataclass(frozen=True)
class ChannelLadder:
    """Per-level channel counts c0..c4 for a given backbone tag.

    The reference ladders carry the full-width values; `toy` divides
    them uniformly for desk-scale training.
    """

    tag: int
    channels: tuple[int, int, int, int, int]

    def __post_init__(self):
        if self.tag not in _REFERENCE:
            raise ValueError(f"unknown backbone tag {self.tag}; use one of {sorted(_REFERENCE)}")
        if len(self.channels) != 5 or any(c < 1 for c in self.channels):
            raise ValueError(f"ladder needs five positive channel counts, got {self.channels}")
        ref, _, bottleneck = _REFERENCE[self.tag]
        ratios = {r // c for r, c in zip(ref, self.channels) if r % c == 0}
        if len(ratios) != 1 or any(r % c for r, c in zip(ref, self.channels)):
            raise ValueError(
                f"channels {self.channels} are not a uniform division of the tag-{self.tag} "
                f"reference ladder {ref}"
            )
        if bottleneck and self.channels[1] % 4:
            raise ValueError("bottleneck ladders need stage channels divisible by 4")

    @staticmethod
    def reference(tag: int) -> "ChannelLadder":
        return ChannelLadder(tag, _REFERENCE[tag][0])

    @staticmethod
    def toy(tag: int = 18, divisor: int = 4) -> "ChannelLadder":
        ref, _, _ = _REFERENCE[tag]
        if any(c % divisor for c in ref):
            raise ValueError(f"divisor {divisor} does not divide the reference ladder {ref}")
        return ChannelLadder(tag, tuple(c // divisor for c in ref))

    @property
    def blocks(self) -> tuple[int, int, int, int]:
        return _REFERENCE[self.tag][1]

    @property
    def bottleneck(self) -> bool:
        return _REFERENCE[self.tag][2]
