"""Exception types shared across the package."""

__all__ = [
    "PropagationError",
    "DegenerateWeightsError",
    "BracketError",
]


class PropagationError(RuntimeError):
    """A forward solve failed. Carries the 1-based substep it failed at."""

    def __init__(self, substep, message):
        super().__init__(f"substep {substep}: {message}")
        self.substep = substep


class DegenerateWeightsError(RuntimeError):
    """All particle weights vanished (all -inf log-weights or NaN)."""


class BracketError(ValueError):
    """Root bracket invalid: no sign change over the given interval."""
