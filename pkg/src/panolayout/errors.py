"""Exception hierarchy shared by the toolkit."""


class PanoLayoutError(Exception):
    """Base class for all toolkit errors."""


class DomainError(PanoLayoutError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class PoleError(DomainError):
    """Azimuth is undefined because the point lies on the vertical axis."""


class GeometryError(PanoLayoutError):
    """A geometric construction failed (degenerate polygon, no intersection, ...)."""


class FormatError(PanoLayoutError, ValueError):
    """Malformed on-disk artifact.

    ``offset`` is the byte offset (for binary files) or ``None``.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ValidationError(FormatError):
    """Well-formed input whose content violates a layout invariant."""
