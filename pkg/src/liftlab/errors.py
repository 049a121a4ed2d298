"""Exception types shared across the package."""


class LiftlabError(Exception):
    """Base class for all package-specific failures."""


class InputError(LiftlabError):
    """Malformed or out-of-contract input (bad alphabet, inconsistent sizes, ...)."""


class GuardError(InputError):
    """Instance exceeds a hard size guard for exact enumeration."""


class ConditioningError(LiftlabError):
    """Conditioning on an event of probability zero."""

    def __init__(self, description: str = "event has probability zero"):
        super().__init__(description)
        self.description = description


class SimulationFailure(LiftlabError):
    """A simulation step could not proceed (empty safe set, empty fiber, ...).

    Carries the step name and whatever partial diagnostics the simulator had
    accumulated, so failed runs can still be inspected.
    """

    def __init__(self, step: str, reason: str, diagnostics=None):
        super().__init__(f"{step}: {reason}")
        self.step = step
        self.reason = reason
        self.diagnostics = diagnostics
