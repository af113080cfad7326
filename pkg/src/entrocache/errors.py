"""Exception hierarchy shared across the package.

Two branches matter to the CLI: ``InputError`` maps to exit code 1
(unusable files, dimensions, or parameters), ``InternalError`` to exit
code 2 (an invariant broke mid-computation).
"""


class EntroCacheError(Exception):
    """Base class for all package-specific errors."""


class InputError(EntroCacheError):
    """User-supplied files, dimensions, or parameters are unusable."""


class InternalError(EntroCacheError):
    """An internal invariant was violated mid-computation."""


class NonDivisibleGrid(InputError):
    """Frame dimensions are not divisible by the requested patch grid."""


class TokenOutOfRange(InputError):
    """A token index lies outside the patch grid."""


class EmptyHistogram(InternalError):
    """A histogram with zero total pixels carries no distribution."""


class NotADistribution(InternalError):
    """A probability vector does not sum to 1 within tolerance."""


class DimensionMismatch(InputError):
    """Array shapes disagree with the configured dimensions."""


class ColdCacheReuse(InternalError):
    """A nonempty reuse set was applied to an empty KV cache."""


class EmptyTrace(InputError):
    """A run report needs at least one per-step record."""


class InvalidSpec(InputError):
    """A synthetic scene description is inconsistent."""


class FileFormatError(InputError):
    """A binary or image container violates its format contract."""
