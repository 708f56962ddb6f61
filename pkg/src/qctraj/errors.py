"""Exception hierarchy for the qctraj package.

Every error raised on purpose by this package derives from QCTrajError so
callers (and the CLI) can separate usage problems from runtime failures.
"""


class QCTrajError(Exception):
    """Base class for all package errors."""


class ConfigError(QCTrajError):
    """Bad or inconsistent user input: config files, overrides, CLI values."""


class GeometryError(QCTrajError):
    """A trajectory or sample point violates the quadrature-box geometry."""


class DivergenceError(QCTrajError):
    """A non-finite value appeared during time integration."""


class StalenessError(QCTrajError):
    """A kernel table was evaluated against a state it was not built from."""


class InternalError(QCTrajError):
    """A structural invariant failed; indicates a bug, not bad input."""
