"""Source seeking for unicycle robots: gradient-ascent and extremum-seeking steering."""

from ._types import ControlInput, DomainError, PlanarVector, Pose, SourceSeekError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "ControlInput",
    "DomainError",
    "PlanarVector",
    "Pose",
    "SourceSeekError",
    "ValidationError",
    "__version__",
]
