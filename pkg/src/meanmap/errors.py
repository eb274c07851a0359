"""Exception types shared across the library."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition (shape, range, kind mismatch)."""


class NumericalError(RuntimeError):
    """A computation failed numerically (non-PD matrix, dead recursion, ...)."""


class DeadSequenceError(NumericalError):
    """A sequence has zero probability under the model.

    ``timestep`` is the first index at which the scaled forward mass vanished.
    """

    def __init__(self, timestep: int):
        super().__init__(
            f"sequence has zero probability under the model "
            f"(first dead timestep t={timestep})"
        )
        self.timestep = timestep
