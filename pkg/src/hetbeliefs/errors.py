"""Exception taxonomy.

Configuration and invariant problems map to CLI exit code 1, numerical
failures (blowup, stalled convergence, non-decaying price integrand) to
exit code 2.
"""


class HetBeliefsError(Exception):
    """Base class for all package errors."""


class ConfigError(HetBeliefsError):
    """Malformed input: unparseable file, wrong shapes, missing keys."""


class ValidationError(HetBeliefsError):
    """Structurally valid input that violates a model invariant."""


class NumericalError(HetBeliefsError):
    """A numerical procedure failed and cannot produce a trustworthy result."""
