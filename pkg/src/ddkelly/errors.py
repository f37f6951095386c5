"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class NoNumeraireError(ArithmeticError):
    """The drift is not in the range of the covariance: no numeraire exists."""

    def __init__(self, message, path_id=None, step=None):
        super().__init__(message)
        self.path_id = path_id
        self.step = step


class ConstraintViolationError(ValueError):
    """A path breaks the alpha-drawdown constraint."""

    def __init__(self, message, first_index):
        super().__init__(message)
        self.first_index = first_index


class SimulationError(RuntimeError):
    """Non-finite model coefficients were produced during simulation."""

    def __init__(self, message, path_id, step):
        super().__init__(f"{message} (path {path_id}, step {step})")
        self.path_id = path_id
        self.step = step
