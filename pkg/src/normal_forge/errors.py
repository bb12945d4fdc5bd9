"""Exception types shared across the package.

Everything derives from ValueError so callers that only care about
"bad input" can catch one base class, while tests and the CLI can
distinguish the specific failure mode.
"""


class BehindCameraError(ValueError):
    """3D point has Z <= 0 and cannot be projected."""


class DegenerateDirectionError(ValueError):
    """Both gradient components vanish; azimuth is undefined."""


class DegenerateNeighborhoodError(ValueError):
    """No usable candidate normals in the neighborhood."""


class RankDeficientError(ValueError):
    """Point set does not span a plane (collinear or degenerate)."""


class EmptySceneError(ValueError):
    """Synthetic scene produces no valid pixel."""


class EmptyEvaluationError(ValueError):
    """Metric requested over zero jointly-valid pixels / zero counts."""


class FormatError(ValueError):
    """Image file does not match the expected container format."""


class ParseError(ValueError):
    """Text file could not be parsed; carries a 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
