"""Exception types shared across the library.

Each class names the contract it guards; all are ValueError subclasses so
callers can catch broadly, except DegenerateWeights (a runtime sampling
failure) and NonFiniteLoss (a numerical failure inside a gradient path).
"""


class ZeroVector(ValueError):
    """Vector norm below the 1e-12 normalization threshold."""


class DimensionMismatch(ValueError):
    """Operands live on different-dimensional spaces."""


class NonFinite(ValueError):
    """Input contains NaN or infinity."""


class EmptyPool(ValueError):
    """An estimator received an empty sample pool."""


class EmptyInput(ValueError):
    """An aggregate received no samples."""


class UnsupportedManifold(ValueError):
    """Operation not defined for this manifold kind."""


class PoolTooSmall(ValueError):
    """Requested negative count exceeds the pool size."""


class NonFiniteLoss(FloatingPointError):
    """A loss or gradient evaluation produced NaN/inf."""


class ShapeMismatch(ValueError):
    """Array shapes disagree with the declared parameter layout."""


class ZeroReference(ValueError):
    """Reference gradient has zero norm; comparison undefined."""


class NonPositiveDensity(ValueError):
    """Density has a non-positive entry where strict positivity is required."""


class InfeasibleFloor(ValueError):
    """Density floor uses up all probability mass: floor * mu(Z) >= 1."""


class DegenerateWeights(RuntimeError):
    """All importance weights underflowed or are non-finite."""


class BinMismatch(ValueError):
    """Histograms have incompatible bin layouts."""


class LengthMismatch(ValueError):
    """Paired sequences have different lengths."""


class ParseError(ValueError):
    """Config file parse failure; message carries the line number."""
