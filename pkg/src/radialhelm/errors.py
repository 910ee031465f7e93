"""Exception types raised across the package."""


class RadialHelmError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(RadialHelmError):
    """Malformed case or scenario text."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(RadialHelmError):
    """Structurally well-formed input that violates a case invariant."""


class InvalidBranchError(ValidationError):
    """Branch with zero series impedance or identical endpoints."""


class DisconnectedNetworkError(ValidationError):
    """The in-service graph does not connect every node to the slack."""


class InvalidCaseError(ValidationError):
    """Case-level defect that prevents solving (e.g. zero slack voltage)."""


class NumericDomainError(RadialHelmError):
    """Numeric input outside an operation's domain (e.g. zero voltage)."""


class TopologyError(RadialHelmError):
    """Method not applicable to the case topology."""


class SingularSystemError(RadialHelmError):
    """Singular reduced admittance or DLF operator."""


class IllConditionedError(RadialHelmError):
    """Linear system too ill-conditioned to trust; carries an estimate."""

    def __init__(self, message, condition=None):
        self.condition = condition
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3e})"
        super().__init__(message)


class InsufficientResultsError(RadialHelmError):
    """Fewer converged results than an aggregation requires."""


class UsageError(RadialHelmError):
    """Invalid CLI or configuration input."""
