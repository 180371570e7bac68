"""Human-in-the-loop image correction studio.

Generate an image from a prompt, mark the misrendered region, refine the
sub-prompt, inpaint only that region, and validate the improvement with a
text-image similarity score.
"""

from .errors import StudioError
from .model import (
    BinaryMask,
    MaskSeed,
    PromptRecord,
    RasterImage,
    ScoreReport,
    SessionEvent,
    SessionRecord,
    SessionState,
    Stroke,
    transition,
    validate_session,
)

__all__ = [
    "BinaryMask",
    "MaskSeed",
    "PromptRecord",
    "RasterImage",
    "ScoreReport",
    "SessionEvent",
    "SessionRecord",
    "SessionState",
    "Stroke",
    "StudioError",
    "transition",
    "validate_session",
]

__version__ = "0.1.0"
