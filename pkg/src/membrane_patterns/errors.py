"""Exception hierarchy shared by all modules."""


class MembraneError(Exception):
    """Base class for every error raised by this package."""


class InvalidMeshError(MembraneError, ValueError):
    pass


class InvalidParameterError(MembraneError, ValueError):
    pass


class PreconditionError(MembraneError, ValueError):
    """An input violates the documented precondition of an operation."""


class SingularMatrixError(MembraneError, ArithmeticError):
    pass


class ConvergenceError(MembraneError, ArithmeticError):
    pass


class StepFailure(MembraneError, RuntimeError):
    """A time step could not be completed; ``stats`` carries the partial report."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


class OracleFailure(MembraneError, RuntimeError):
    pass


class ConfigError(MembraneError, ValueError):
    """Configuration text is malformed or violates a constraint.

    ``key`` names the offending dotted key when one can be identified.
    """

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key
