"""Exception types raised across the package."""


class SplatlocError(Exception):
    """Base class for all package errors."""


class AngleNearPi(SplatlocError):
    """Rotation angle too close to pi for a well-conditioned logarithm."""


class FormatError(SplatlocError):
    """Malformed scene or database file."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class EmptyScene(SplatlocError):
    pass


class DimensionMismatch(SplatlocError):
    pass


class BehindCamera(SplatlocError):
    pass


class InvalidSpec(SplatlocError):
    pass


class SamplingExhausted(SplatlocError):
    """Rejection sampling ran out of attempts."""


class ImageTooSmall(SplatlocError):
    pass


class NoSuccessfulRuns(SplatlocError):
    pass
