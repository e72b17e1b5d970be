"""Exception types shared across the simulator."""


class ConfigurationError(ValueError):
    """Inconsistent dimensions, invalid parameters or a rejected config.

    ``fields`` lists the offending configuration field names when known.
    """

    def __init__(self, message, fields=()):
        super().__init__(message)
        self.fields = tuple(fields)


class InputError(ValueError):
    """Malformed data passed to a PHY routine (bad lengths and the like)."""


class DivergenceError(RuntimeError):
    """The adaptive filter produced non-finite or runaway values."""

    def __init__(self, message, iteration):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


class UndefinedMetricError(ValueError):
    """A metric was requested against a zero-norm reference."""


class RankDeficiencyError(ValueError):
    """A least-squares system does not have full column rank."""


class SummaryError(ValueError):
    """Summary statistics were requested over an empty sample."""
