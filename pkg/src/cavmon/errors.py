"""Exception types raised across the package."""


class CavmonError(Exception):
    """Base class for all package errors."""


class LogFormatError(CavmonError):
    """A telemetry file cannot be read or lacks a required column."""


class NoDataError(CavmonError):
    """An indicator has no usable input frames."""


class WireFormatError(CavmonError):
    """A V2X message byte stream is truncated or garbled."""
