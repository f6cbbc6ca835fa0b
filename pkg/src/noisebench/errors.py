"""Exception types shared across the toolkit.

All inherit ValueError so generic validation handling still works; the CLI
maps the data-quality subclasses to its degenerate-data exit code.
"""

from __future__ import annotations


class InsufficientSamplesError(ValueError):
    """Input sample stream is too short for the requested framing."""


class TraceFormatError(ValueError):
    """Raw IQ trace file is malformed (odd length, non-finite samples)."""


class ZeroPowerError(ValueError):
    """An operation that requires strictly positive power received none."""


class DegenerateSpectrumError(ValueError):
    """Spectrum carries no usable structure (all-zero, or no noise group)."""


class EmptyNoiseGroupError(ValueError):
    """A separation mask left no bins classified as noise."""
