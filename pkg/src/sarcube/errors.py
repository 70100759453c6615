"""Exception types raised across the package."""


class SarCubeError(Exception):
    """Base class for all package errors."""


class AlreadyExists(SarCubeError):
    pass


class InvalidSpec(SarCubeError, ValueError):
    pass


class DimMismatch(SarCubeError, ValueError):
    pass


class NotFound(SarCubeError, KeyError):
    def __str__(self):
        # KeyError quotes its argument; keep plain messages
        return str(self.args[0]) if self.args else ""


class OutOfBounds(SarCubeError, IndexError):
    pass


class IntegrityError(SarCubeError):
    pass


class FetchError(SarCubeError):
    pass


class InvalidGeometry(SarCubeError, ValueError):
    pass


class TooSmall(SarCubeError, ValueError):
    pass


class TooFew(SarCubeError, ValueError):
    pass


class ShapeError(SarCubeError, ValueError):
    pass


class InvalidLabel(SarCubeError, ValueError):
    pass


class DivergedError(SarCubeError, RuntimeError):
    """Training produced a non-finite loss.

    ``last_good`` holds the path of the last checkpoint written before the
    divergence, or None when no checkpoint was persisted yet.
    """

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good


class DegenerateLabels(SarCubeError, ValueError):
    pass


class DegenerateScene(SarCubeError, RuntimeError):
    pass
