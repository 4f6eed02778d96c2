"""Exception types shared across the package.

Everything raised on purpose derives from :class:`BleuBoundError` so callers
(and the command line front end) can distinguish our failures from genuine
bugs or I/O problems.
"""


class BleuBoundError(Exception):
    """Base class for all errors raised by bleubound."""


class UnknownToken(BleuBoundError):
    """A token was not present in the vocabulary."""


class IdOutOfRange(BleuBoundError):
    """A token id fell outside [0, vocab_size)."""


class NonFiniteInput(BleuBoundError):
    """An input array contained NaN or infinity."""


class LengthTooShort(BleuBoundError):
    """A sequence is too short for the requested n-gram order."""


class ZeroLength(BleuBoundError):
    """Candidate or reference length of zero where a positive length is required."""


class EmptyText(BleuBoundError):
    """An empty token sequence was passed where text is required."""


class EmptyCorpus(BleuBoundError):
    """Corpus-level scoring was asked for zero sentence pairs."""


class PositionOutOfRange(BleuBoundError):
    """A candidate position index is not a valid n-gram start."""


class InstanceTooLarge(BleuBoundError):
    """Exhaustive enumeration would exceed the configured outcome cap."""


class ShapeMismatch(BleuBoundError):
    """Array dimensions disagree with the vocabulary or with each other."""
