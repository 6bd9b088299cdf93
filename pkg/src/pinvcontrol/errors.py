"""Exception types raised by pinvcontrol."""


class PinvControlError(Exception):
    """Base class for all errors raised by this package."""


class NumericalError(PinvControlError):
    """A numerical routine failed (SVD non-convergence, non-finite objective, ...)."""


class DivergenceError(NumericalError):
    """The state became non-finite during time integration."""

    def __init__(self, time, realization=None):
        self.time = float(time)
        self.realization = realization
        where = f"t = {self.time:.6g}"
        if realization is not None:
            where += f" in realization {realization}"
        super().__init__(f"integration diverged at {where}")


class ConfigError(PinvControlError):
    """Invalid run configuration; ``field`` names the offending entry."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
