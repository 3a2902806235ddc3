"""Exception types shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific type that applies.
"""


class SepsignError(Exception):
    """Base class for all package errors."""


class StructuralError(SepsignError, ValueError):
    """Network containers violate a structural invariant.

    Examples: mismatched node sets, a dyad carrying two signs, a
    decomposition inconsistent with the network it came from.
    """


class TermError(SepsignError, ValueError):
    """A model term is unknown, misconfigured, or bound to the wrong layer."""


class SupportError(SepsignError, ValueError):
    """A dyad-level operation targets a dyad outside its admissible set."""


class ConfigError(SepsignError, ValueError):
    """A run configuration file is malformed or contains unknown keys."""


class DataError(SepsignError, ValueError):
    """An input data file cannot be ingested."""


class InferenceError(SepsignError, RuntimeError):
    """Estimation cannot proceed (e.g. nothing identifiable to fit)."""
