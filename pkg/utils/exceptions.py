"""
Exception hierarchy for the causal digital twin toolkit.

Two branches decide how the command line reports a failure:
``ValidationError`` (bad input, exit code 1) and ``NumericalError``
(the math broke down, exit code 2).
"""


class MicdtError(Exception):
    """Base error for every toolkit failure."""


class ValidationError(MicdtError):
    """Raised when user input or a model file is invalid."""


class NumericalError(MicdtError):
    """Raised when an estimation or simulation step fails numerically."""


# ----------------------------------
# Validation errors
# ----------------------------------

class InputNotFoundError(ValidationError, FileNotFoundError):
    """Input file does not exist."""


class ParseError(ValidationError):
    """A cell or document could not be parsed."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        location = []
        if row is not None:
            location.append(f"row={row}")
        if column is not None:
            location.append(f"column={column}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class EmptyInputError(ValidationError):
    """Input holds no samples."""


class DuplicateLabelError(ValidationError):
    """Two channels share a label."""


class InvalidSeriesError(ValidationError):
    """Series data violates its shape or finiteness invariants."""


class InvalidParameterError(ValidationError):
    """A numeric parameter is outside its allowed range."""


class ConstantChannelError(ValidationError):
    """A channel has zero variance."""

    def __init__(self, label):
        self.label = label
        super().__init__(f"Channel '{label}' is constant (std = 0)")


class LagTooLargeError(ValidationError):
    """Requested lag is not smaller than the series length."""


class InsufficientDataError(ValidationError):
    """Too few samples for the requested fit."""


class DimensionMismatchError(ValidationError):
    """Array shapes or channel counts disagree."""


class UnknownChannelError(ValidationError):
    """A channel label does not exist."""


class SelfPairError(ValidationError):
    """Granger source and target are the same channel."""


class DegenerateCorrelationError(ValidationError):
    """Correlation values make the Yule-Walker system singular."""


class SchemaVersionMismatchError(ValidationError):
    """Model file carries an unsupported schema_version."""


class ModelParseError(ParseError):
    """Model file is not valid model JSON."""


class UnknownEdgeError(ValidationError):
    """Intervention refers to a channel or lag the model does not have."""


class SelfEdgeStructuralError(ValidationError):
    """Intervention would put a value on the structural diagonal."""


class EditSyntaxError(ValidationError):
    """Edit string does not follow the edit grammar."""


class UsageError(ValidationError):
    """Command-line arguments are malformed."""


# ----------------------------------
# Numerical errors
# ----------------------------------

class SingularRegressorsError(NumericalError):
    """Regressor Gram matrix is too ill-conditioned to solve."""


class NumericalDivergenceError(NumericalError):
    """Kalman state covariance lost positive definiteness."""


class RankDeficientError(NumericalError):
    """Sample covariance is not full rank."""


class NoConvergenceError(NumericalError):
    """FastICA stopped at max_iter without meeting the tolerance."""

    def __init__(self, iterations, final_delta):
        self.iterations = iterations
        self.final_delta = final_delta
        super().__init__(
            f"FastICA did not converge after {iterations} iterations "
            f"(final delta {final_delta:.3g}); retry with another seed"
        )


class PermutationDegenerateError(NumericalError):
    """No row permutation of the unmixing matrix has a usable diagonal."""


class SingularStructureError(NumericalError):
    """(I - S0) is numerically singular."""


# ----------------------------------
# Warning categories
# ----------------------------------

class NonGaussianityWarning(UserWarning):
    """Residuals look Gaussian, so LiNGAM identification is doubtful."""


class UnstableModelWarning(UserWarning):
    """Companion matrix spectral radius is at or above one."""
