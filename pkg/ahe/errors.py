"""
Exception types shared by the services and the CLI.

The command-line surface maps these to exit codes: invalid input is a
usage error (1), unreadable files are I/O errors (2) and solver trouble
is a numerical failure (3).
"""

from __future__ import annotations


class InvalidInputError(ValueError):
    """An operation was called outside its contract (all-BAD mask, size mismatch, ...)."""


class NumericalError(RuntimeError):
    """A linear solve failed or produced non-finite values."""


class ImageFormatError(OSError):
    """An image or mask file could not be read or has an unsupported layout."""
