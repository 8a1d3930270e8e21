"""Exception hierarchy. Every error raised on bad input derives from Ri3dError."""


class Ri3dError(Exception):
    """Base class for invalid-input errors (CLI exit code 2)."""


class EmptyCloud(Ri3dError):
    pass


class DegenerateCloud(Ri3dError):
    """No rank-3 displacement triple exists (collinear/coplanar or n < 3)."""

    def __init__(self, message, sample_id=None):
        if sample_id is not None:
            message = f"{sample_id}: {message}"
        super().__init__(message)
        self.sample_id = sample_id


class NumericallyDegenerate(Ri3dError):
    pass


class ShapeError(Ri3dError):
    pass


class UndefinedMetric(Ri3dError):
    pass


class ParseError(Ri3dError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedFormat(ParseError):
    pass


class BadMagic(ParseError):
    pass


class TruncatedFile(ParseError):
    pass


class TensorShapeMismatch(ParseError, ShapeError):
    """A stored tensor has the wrong name set or dimensions for the target."""
