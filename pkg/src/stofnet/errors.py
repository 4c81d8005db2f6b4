"""Exception and warning types raised across the package."""


class StofnetError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(StofnetError, ValueError):
    pass


class InvalidArgumentError(StofnetError, ValueError):
    pass


class UndefinedSNRError(InvalidInputError):
    pass


class ShapeError(StofnetError, ValueError):
    pass


class ConfigError(StofnetError, ValueError):
    pass


class DuplicateSpikeError(StofnetError, ValueError):
    pass


class FormatError(StofnetError):
    pass


class VersionError(FormatError):
    pass


class ConfigMismatchError(FormatError):
    """A stored model config differs from the one the caller expected.

    The loaded config is attached as ``found`` so callers can inspect it.
    """

    def __init__(self, message, found=None):
        super().__init__(message)
        self.found = found


class UndefinedTPRError(StofnetError, ValueError):
    pass


class TrainingDivergedError(StofnetError, RuntimeError):
    pass


class ZeroFrameWarning(UserWarning):
    pass


class MissingLabelsWarning(UserWarning):
    pass


class NoTruePositivesWarning(UserWarning):
    pass
