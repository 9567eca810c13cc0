"""Exception types shared across the package."""


class InfeasibleTargetError(ValueError):
    """Target throughputs violate a region sum constraint (some region's
    throughputs add up to 1 or more)."""

    def __init__(self, message, region=None, total=None):
        super().__init__(message)
        self.region = None if region is None else tuple(region)
        self.total = total


class NotChordalError(ValueError):
    """An operation that requires a chordal graph was given a non-chordal one."""


class StateSpaceCapError(ValueError):
    """Brute-force enumeration would exceed the configured size cap."""


class ConvergenceError(RuntimeError):
    """The fixed-point inverse solver did not converge within the iteration
    budget; usually a sign the requested throughputs are not achievable."""
