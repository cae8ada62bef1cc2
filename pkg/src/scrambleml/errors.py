"""Exception hierarchy shared across the package.

Every error that can surface through the CLI carries the process exit code
declared for its class of failure: 1 validation, 2 runtime/capacity,
3 I/O or on-disk format.
"""


class ScrambleError(Exception):
    exit_code = 2


class ValidationError(ScrambleError):
    """Bad configuration or arguments; nothing was run."""

    exit_code = 1


class CapacityError(ScrambleError):
    """Request exceeds a configured resource bound (qubit count, dense size)."""

    exit_code = 2


class TrainingError(ScrambleError):
    """Training aborted (non-finite loss, refused optimizer step)."""

    exit_code = 2


class DataFormatError(ScrambleError):
    """On-disk dataset or model file is invalid, corrupted, or truncated."""

    exit_code = 3
