class BroadwellError(Exception):
    """Base class for solver failures."""


class NonMonotone(BroadwellError):
    """An inner sweep of the damped map decreased somewhere."""


class BracketViolation(BroadwellError):
    """Even/odd iterates of the alternating scheme crossed."""


class IterationCap(BroadwellError):
    """An iteration hit its cap before reaching tolerance."""


class SingularJacobian(BroadwellError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition
