"""Exception types shared across the package."""


class TruncationError(ValueError):
    """An operation would produce support outside the configured lattice truncation."""


class DivergentMoment(ArithmeticError):
    """A second momentum moment was requested for a state with 1/p momentum tails."""


class GridTooCoarse(ValueError):
    """The grid's Nyquist momentum cannot represent the requested momentum range."""


class DomainOverflow(RuntimeError):
    """Evolution would advect significant mass beyond the configured grid padding."""


class TruncationLeak(RuntimeError):
    """A density operator carries more mass outside the truncation than the audit budget."""


class UncertaintyViolation(ValueError):
    """Requested Gaussian moments violate the positivity (uncertainty) bound."""
