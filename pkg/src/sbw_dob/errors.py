"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A parameter set violates its physical or numerical constraints."""


class DimensionError(ValueError):
    """Matrix or vector shapes do not agree."""


class FilterDegenerateError(ArithmeticError):
    """The innovation covariance is numerically singular."""


class ConvergenceError(RuntimeError):
    """An iteration did not converge; ``last`` carries the final iterate."""

    def __init__(self, message, last=None, iterations=None):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


class DivergenceError(RuntimeError):
    """A simulation produced non-finite values; ``step`` is the failing index."""

    def __init__(self, message, step=None, partial=None):
        super().__init__(message)
        self.step = step
        self.partial = partial


class ConfigError(ValueError):
    """A scenario config file or override could not be parsed or validated."""

    def __init__(self, message, key=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.key = key
        self.line = line
