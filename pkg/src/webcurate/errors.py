"""Exception hierarchy shared across the toolkit.

The CLI maps ValidationError (and subclasses) to exit code 1 and every
other failure to exit code 2.
"""

from __future__ import annotations


class WebcurateError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(WebcurateError):
    """Bad input: violated invariant, malformed config, missing file."""


class ParseError(ValidationError):
    """Malformed record in an input file; carries the offending line."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}:" if line is None else f"{path}:{line}: "
        elif line is not None:
            prefix = f"line {line}: "
        super().__init__(prefix + message)
