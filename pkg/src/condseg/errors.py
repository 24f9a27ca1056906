"""Exception types shared across the package."""


class CondSegError(Exception):
    """Base class for all package errors."""


class DimensionError(CondSegError):
    """Shape, rank, or dtype contract violation."""


class NumericError(CondSegError):
    """Non-finite values, undefined means, or a failed numeric run."""


class RangeError(CondSegError):
    """Integer argument outside its documented range."""


class ConfigError(CondSegError):
    """Invalid configuration document or checkpoint/model mismatch."""


class ParseError(CondSegError):
    """Malformed serialized data. Carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ChecksumError(CondSegError):
    """Stored checksum does not match the payload."""
