"""Resilient SNN inference on reduced-voltage approximate DRAM, at desk scale."""

__version__ = "0.1.0"


class VoltsnnError(Exception):
    """Base class for errors raised by this package."""


class CapacityError(VoltsnnError):
    """Raised when a layout cannot fit the requested data."""
