"""Exception types shared across the package.

``ValueError`` is reserved for bad arguments and malformed configuration;
``NumericalError`` marks data-dependent failures of an otherwise valid
computation (degenerate clusters, non-factorizable polynomial coefficients,
empty intersections, ...). The CLI maps the two onto distinct exit codes.
"""


class NumericalError(RuntimeError):
    """A numerical procedure failed on the given data."""
