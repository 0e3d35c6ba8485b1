"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: config problems exit 2, numerical
failures exit 3, condition-check failures exit 4.
"""


class FirephaseError(Exception):
    """Base class for all package errors."""


class ConfigError(FirephaseError):
    """Malformed configuration or input file."""


class NumericalError(FirephaseError):
    """A numerical routine failed to produce a usable result."""


class NoCrossing(NumericalError):
    """No threshold crossing found within the search horizon."""


class HorizonExceeded(NumericalError):
    """A simulated trajectory ran past the horizon without firing."""


class AtDiscontinuity(NumericalError):
    """Requested a map derivative at (or too close to) a discontinuity."""


class DegenerateInterval(NumericalError):
    """Time interval too short for the requested kernel evaluation."""


class NonTransversal(NumericalError):
    """Slope gap at the deterministic crossing is not positive."""


class MassDeficit(NumericalError):
    """First-passage mass still missing after the horizon cap."""

    def __init__(self, deficit, periods):
        self.deficit = float(deficit)
        self.periods = int(periods)
        super().__init__(
            f"mass deficit {self.deficit:.3e} after {self.periods} periods"
        )


class NoConvergence(NumericalError):
    """Iteration cap reached before convergence."""

    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)


class ConditionError(FirephaseError):
    """A structural condition on the model is violated."""


class PredictionInvalid(ConditionError):
    """Hypotheses for the limiting-spectrum prediction were not verified."""
