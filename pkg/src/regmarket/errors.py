"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when an operation rejects its inputs (shape, range or schema)."""


class ConvergenceError(RuntimeError):
    """Solver ran out of sweeps before meeting its tolerance.

    Carries the last iterate so callers can inspect how far the solve got.
    """

    def __init__(self, message, last_beta=None, sweep_delta=None, kkt_residual=None):
        super().__init__(message)
        self.last_beta = last_beta
        self.sweep_delta = sweep_delta
        self.kkt_residual = kkt_residual


class ViabilityError(RuntimeError):
    """A clearing came out worse for the buyer than its own baseline.

    The mechanism guarantees this cannot happen at an exact optimum, so this
    error signals a solver defect rather than a legitimate market outcome.
    """

    def __init__(self, message, market_side=None, baseline_side=None):
        super().__init__(message)
        self.market_side = market_side
        self.baseline_side = baseline_side
