"""Exception types shared across the package."""


class BlochFiberError(Exception):
    """Base class for all package errors."""


class BasisSizeError(BlochFiberError):
    """Requested truncated basis exceeds the configured dimension cap."""


class BasisMismatchError(BlochFiberError):
    """Operands live on different truncated bases."""


class WindowTooLargeError(BlochFiberError):
    """A test window would touch the truncation boundary."""


class InvariantViolationError(BlochFiberError):
    """A structural invariant failed; the message names the first failed check."""


class NotCovariantError(BlochFiberError):
    """Operator does not commute with the symmetry generators."""


class HopRangeError(BlochFiberError):
    """Hop range of an operator (or a composition) exceeds what the truncation supports."""


class InvalidFluxError(BlochFiberError):
    """Flux p/q is not a reduced fraction with q >= 1."""


class GapTooSmallError(BlochFiberError):
    """Selected bands are not separated from their complement by the gap floor."""


class InadmissiblePlaquetteError(BlochFiberError):
    """A plaquette flux reached the principal-branch cut; refine the grid."""


class ConfigError(BlochFiberError):
    """Run configuration is malformed."""


class AliasingWarning(UserWarning):
    """Samples are not bandlimited below the grid Nyquist radius."""
