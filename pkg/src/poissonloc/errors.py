"""Exception types shared across the package."""


class DomainError(ValueError):
    """A mathematical-domain violation (bad kappa, theta outside the box, ...)."""


class DegenerateInputError(DomainError):
    """Geometrically degenerate input: coincident points, zero-length direction."""


class RegimeError(RuntimeError):
    """Operation not defined in the current front regime.

    Raised e.g. when asking for a score or Fisher matrix in the cusp or
    change-point regime, where the intensity is not differentiable in theta.
    """


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


class DataError(ValueError):
    """Malformed observation data; the message names the offending record."""


class SingularFisherError(RuntimeError):
    """Fisher matrix numerically singular; the message names the bad eigenvalue."""


class IdentifiabilityError(RuntimeError):
    """The detector layout cannot separate the two sources.

    Carries the cross witness (two covering lines) when one exists.
    """

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness
