"""Exceptions raised during data loading, validation and scanning."""


class ValidationError(ValueError):
    """Invalid input data or configuration."""


class DuplicateIdError(ValidationError):
    """Two records share the same site id."""


class DuplicateCoordinateError(ValidationError):
    """Two sites share exactly the same planar coordinates."""


class NonFiniteCoordinateError(ValidationError):
    """A site coordinate is NaN or infinite."""


class GridMismatchError(ValidationError):
    """Site ids of the curves do not match the site grid."""


class DegenerateDataError(RuntimeError):
    """The data admit no finite index value (e.g. all curves identical)."""
