"""Exception types shared across the package.

All errors derive from ``ValueError`` so callers that do not care about the
distinction can catch a single builtin type. The CLI maps any of these to
exit code 2 (validation failure) and everything else to exit code 1.
"""


class GeometryError(ValueError):
    """Block shapes, counts, or index geometry are inconsistent."""


class DomainError(ValueError):
    """A value lies outside its permitted domain (probabilities outside
    [0, 1], community labels out of range, parameters out of bounds)."""


class DegenerateInputError(ValueError):
    """Input is structurally valid but has no usable content, for example
    a spectral embedding requested on an all-zero matrix."""


class ValidationError(ValueError):
    """External input (files, CLI configuration) failed validation."""
