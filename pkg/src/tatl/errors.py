class TatlError(Exception):
    """Base class for errors raised by this package."""


class NumericalFault(TatlError):
    """A non-finite value or a diverging quantity was produced."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class ActionCardinalityError(TatlError, ValueError):
    """Source and target action sets do not have the same number of actions."""


class RankDeficiencyError(TatlError, ValueError):
    """A least-squares problem does not have full column rank."""

    def __init__(self, message, direction=None):
        super().__init__(message)
        self.direction = direction


class MissingArtifactError(TatlError):
    """A pipeline artifact was needed but building it was disallowed."""
