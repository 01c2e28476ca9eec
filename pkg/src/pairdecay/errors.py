"""Exception types shared across the package.

Each class maps to one CLI exit code (see cli.py), so callers can tell
bad inputs apart from I/O trouble, malformed data files and solver
failures.
"""


class ParameterError(ValueError):
    """Invalid physical parameter or argument (negative rate, bad time, ...)."""


class SchemaError(ValueError):
    """An input file does not conform to the documented CSV/JSON schema."""


class FitError(ValueError):
    """An estimator cannot produce a valid fit from the given data."""


class SolverError(RuntimeError):
    """Root finding failed; indicates an internal error for valid parameters."""


class IntegrationError(RuntimeError):
    """Numerical integration became inconsistent (conservation drift)."""
