"""Exception hierarchy shared across the toolkit.

Two broad families: validation errors (bad inputs, schema violations,
precondition failures) and numerical errors (well-formed inputs on which a
computation degenerates).  The CLI maps them to exit codes 1 and 2.
"""


class AmfError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(AmfError):
    """Input violates a documented precondition or schema."""


class NumericalError(AmfError):
    """Computation failed or degenerated on otherwise valid input."""


# -- panel construction -------------------------------------------------------

class DegenerateRate(ValidationError):
    """A money-market rate of -100% or worse cannot be compounded."""


class TotalLossUnsupported(ValidationError):
    """A return of -100% or worse; flagged rather than silently dropped."""

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"return at position {index} is <= -1")


class TooShort(ValidationError):
    """Series too short for the requested transform."""


# -- regression core -----------------------------------------------------------

class Underdetermined(ValidationError):
    """Fewer observations than the operation needs for its parameter count."""


class RankDeficient(NumericalError):
    """Design matrix is numerically rank-deficient.

    ``column`` is the index of a column lying (numerically) in the span of
    the others, identified via pivoted QR.
    """

    def __init__(self, column: int, message: str = ""):
        self.column = column
        super().__init__(message or f"design column {column} is linearly dependent")


class NotNested(ValidationError):
    """Model pair handed to the F comparison is not reduced-within-full."""


class PerfectFitDegenerate(NumericalError):
    """Full model has (numerically) zero residual sum of squares."""


class ConstantActuals(NumericalError):
    """Out-of-sample benchmark denominator is zero."""


class InvalidPValue(ValidationError):
    """A p-value outside [0, 1] was passed to the FDR adjustment."""


# -- sparse selection ----------------------------------------------------------

class ConstantColumn(ValidationError):
    """A design column has zero variance and cannot be standardized."""

    def __init__(self, column: int):
        self.column = column
        super().__init__(f"column {column} is constant")


class MaxIterations(NumericalError):
    """Coordinate descent failed to converge within the sweep budget."""


class TooFewObservations(ValidationError):
    """Not enough rows for the requested fold scheme or candidate count."""


class EmptyPath(ValidationError):
    """A regularization path with no grid points was handed to selection."""


# -- clustering ----------------------------------------------------------------

class DegenerateSeries(ValidationError):
    """A series has zero variance over the common support."""


class InsufficientOverlap(ValidationError):
    """Two series share fewer than three observations."""


class InvalidDistance(ValidationError):
    """Distance matrix is asymmetric, negative, or has a nonzero diagonal."""


# -- pipeline ------------------------------------------------------------------

class DegenerateMarket(NumericalError):
    """Market difference column has zero variance; cannot orthogonalize."""


class MissingFactor(ValidationError):
    """A required baseline factor column is absent from the panel."""


class MissingFuture(ValidationError):
    """Not enough post-window observations for out-of-sample evaluation."""


class InvalidCovariance(ValidationError):
    """Synthetic factor covariance is not symmetric positive-definite."""


class ReduceBasis(NumericalError):
    """Spline-expanded design is rank-deficient for the named asset."""

    def __init__(self, asset: str, message: str = ""):
        self.asset = asset
        super().__init__(message or f"spline design rank-deficient for {asset}; reduce basis size")


class DegenerateSplit(ValidationError):
    """A half-period indicator with an empty half."""
