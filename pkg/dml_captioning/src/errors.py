"""Exception hierarchy for DML captioning.

Every error carries the process exit code the command surface reports for it.
"""

from typing import Optional


class DMLError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigError(DMLError):
    """Bad arguments, unknown config keys, or unsatisfiable settings."""

    exit_code = 2


class DataError(DMLError):
    """Dataset schema violations and vocabulary problems."""

    exit_code = 3

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CheckpointError(DMLError):
    """Unreadable checkpoints, format-version mismatches, full disks."""

    exit_code = 3


class NumericError(DMLError):
    """Non-finite values or numerically undefined operations."""

    exit_code = 4


class ShapeError(NumericError):
    """Operand shapes do not agree."""

    def __init__(self, op: str, *shapes):
        shown = " and ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {shown}")
        self.shapes = shapes


class GraphError(NumericError):
    """Misuse of the autograd graph (non-scalar loss, consumed graph)."""


class AssignmentError(NumericError):
    """Infeasible mode assignment (more captions than codebook entries)."""
