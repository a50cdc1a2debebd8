"""Exception types shared across the package."""


class GeometryError(ValueError):
    """Base class for all geometric/numeric input errors raised here."""


class DomainError(GeometryError):
    """A point lies outside the declared domain of a function or chart."""


class MarginError(GeometryError):
    """A point is too close to the domain boundary for the finite-difference stencil."""


class SingularMetricError(GeometryError):
    """The metric matrix is not invertible (or not positive definite) at a point."""


class DegeneratePlaneError(GeometryError):
    """The two vectors supposed to span a 2-plane are linearly dependent."""


class ConstraintError(GeometryError):
    """Input parameters violate a structural constraint (dimensions, signs, ranges)."""


class WrongShapeError(GeometryError):
    """The object has the wrong shape for the requested operation (e.g. fiber count)."""
