"""Exception hierarchy for qfc."""


class QfcError(Exception):
    """Base class for all qfc errors."""


class InvalidParameterError(QfcError, ValueError):
    pass


class NotApplicableError(QfcError):
    """Raised when a quantum-only check is asked of a hybrid/classical model."""


class RelabelRequiredError(QfcError, ValueError):
    pass


class InvalidWiringError(QfcError, ValueError):
    pass


class AlgebraicLoopError(QfcError):
    pass


class NoSteadyStateError(QfcError):
    """The dynamics matrix is not Hurwitz, so no stationary state exists."""

    def __init__(self, message, eigenvalues=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues


class ResonanceError(QfcError):
    pass


class RiccatiError(QfcError):
    pass


class SynthesisError(QfcError):
    pass


class OptimizationError(QfcError):
    def __init__(self, message, traces=None):
        super().__init__(message)
        self.traces = traces or []


class ConfigError(QfcError):
    pass


class OutputError(QfcError, OSError):
    """Writing a result file failed."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
