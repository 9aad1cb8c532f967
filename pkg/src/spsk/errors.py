"""Exception hierarchy shared across the package."""


class SketchError(Exception):
    """Base class for every error raised by spsk."""


class ParameterError(SketchError, ValueError):
    """A parameter is outside its allowed range."""


class DomainError(ParameterError):
    """A parameter is valid in general but outside the range an analysis covers."""


class DimensionMismatch(SketchError, ValueError):
    pass


class ProvenanceMismatch(SketchError, ValueError):
    """Two sketches (or a sketch and a map) were built from different randomness."""


class DataError(SketchError):
    """Malformed input data. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(DataError):
    """A sketch-set file could not be decoded."""


class VersionError(FormatError):
    pass


class TruncatedError(FormatError):
    pass
