"""Exception types raised by the btes package."""


class BtesError(Exception):
    """Base class for all package errors."""


class ConfigError(BtesError, ValueError):
    """Invalid configuration; ``key`` names the offending entry when known."""

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class AssemblyError(BtesError):
    """Sub-models could not be combined into a consistent system."""


class SimulationDiverged(BtesError, ArithmeticError):
    def __init__(self, step):
        self.step = step
        super().__init__(f"non-finite state at step {step}")


class NumericError(BtesError, ArithmeticError):
    pass


class MeasurementError(BtesError, ValueError):
    """Malformed measurement file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)
