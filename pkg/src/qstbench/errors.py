"""Exception types shared across the package.

Everything derives from QstError so callers can catch the package's own
failures separately from genuine bugs; most also subclass ValueError so
casual callers get the conventional behaviour.
"""


class QstError(Exception):
    """Base class for all qstbench errors."""


class DimensionError(QstError, ValueError):
    """Vector/matrix/qubit-count mismatch."""


class ArgumentError(QstError, ValueError):
    """Invalid or missing argument (bad p, missing seed, k out of range)."""


class ValidationError(QstError, ValueError):
    """A state failed its physicality invariants."""


class NumericError(QstError, ArithmeticError):
    """A quantity that should be real/finite came out otherwise."""


class ParseError(QstError, ValueError):
    """Malformed file or document."""


class ResourceError(QstError, ValueError):
    """Request exceeds the configured dense-memory/enumeration limits."""


class ShapeError(QstError, ValueError):
    """Tensor shape mismatch in the autodiff graph."""


class DivergenceError(QstError, ArithmeticError):
    """Non-finite gradient or loss during optimization."""


class DegenerateParameterError(QstError, ArithmeticError):
    """Density-matrix head received an (almost) all-zero parameterization."""


class UnsupportedArchitectureError(QstError, ValueError):
    """Requested network architecture is not implemented here."""


class UnsupportedLayerError(QstError, ValueError):
    """Layer cannot be lowered onto the analog crossbar."""


class ConfigError(QstError, ValueError):
    """Experiment configuration failed strict validation."""
