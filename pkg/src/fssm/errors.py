"""Exception types raised across the package."""


class FSSMError(Exception):
    """Base class for all package errors."""


class NonFinite(FSSMError, ValueError):
    pass


class ShapeMismatch(FSSMError, ValueError):
    pass


class NonPositiveDelta(FSSMError, ValueError):
    pass


class OutOfRange(FSSMError, ValueError):
    pass


class DegenerateFit(FSSMError, ValueError):
    pass


class BadMagic(FSSMError, ValueError):
    """File does not start with the expected magic bytes."""


class BadHeader(FSSMError, ValueError):
    """File header is malformed or describes unsupported data."""
