"""Random-circuit observable dynamics and recurrent-network learning."""

from .errors import (
    CapacityError,
    DataFormatError,
    ScrambleError,
    TrainingError,
    ValidationError,
)

__all__ = [
    "CapacityError",
    "DataFormatError",
    "ScrambleError",
    "TrainingError",
    "ValidationError",
]

__version__ = "0.1.0"
