"""Vocabulary handling, token sequences, and per-position word distributions.

Tokenisation is deliberately dumb: whitespace splitting, case preserved.  The
interesting objects are :class:`DistMatrix` (a row-stochastic matrix holding
one word distribution per output position) and the one-hot view used by the
exact-BLEU matrix form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import IdOutOfRange, NonFiniteInput, UnknownToken

# Row sums of a distribution matrix must match 1 to this tolerance.
ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Vocab:
    """Immutable token <-> id mapping; ids follow first-occurrence order."""

    tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise ValueError("vocabulary contains duplicate tokens")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index  # type: ignore[attr-defined]

    @property
    def size(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        try:
            return self._index[token]  # type: ignore[attr-defined]
        except KeyError:
            raise UnknownToken(f"token {token!r} is not in the vocabulary") from None

    def token_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.tokens):
            raise IdOutOfRange(
                f"id {token_id} outside [0, {len(self.tokens)})"
            )
        return self.tokens[token_id]


def build_vocab(lines: Iterable[str]) -> Vocab:
    """Collect distinct whitespace tokens from ``lines`` in first-seen order."""
    seen: dict[str, None] = {}
    for line in lines:
        for tok in line.split():
            seen.setdefault(tok, None)
    return Vocab(tuple(seen))


@dataclass(frozen=True)
class TokenSeq:
    """A sentence as a tuple of vocabulary ids."""

    ids: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self) -> Iterator[int]:
        return iter(self.ids)

    def __getitem__(self, i):
        return self.ids[i]


def token_ids(seq: "TokenSeq | Sequence[int]") -> tuple[int, ...]:
    """Normalise a TokenSeq or any int sequence to a plain tuple of ids."""
    if isinstance(seq, TokenSeq):
        return seq.ids
    return tuple(int(t) for t in seq)


def encode(line: str, vocab: Vocab) -> TokenSeq:
    """Whitespace-tokenise ``line`` and map every token to its id.

    Raises UnknownToken for out-of-vocabulary tokens; there is no UNK id.
    """
    return TokenSeq(tuple(vocab.id_of(tok) for tok in line.split()))


def decode(seq: TokenSeq | Sequence[int], vocab: Vocab) -> str:
    """Inverse of :func:`encode` up to whitespace normalisation."""
    return " ".join(vocab.token_of(i) for i in token_ids(seq))


@dataclass(frozen=True)
class OneHotSeq:
    """One-hot matrix view of a token sequence.

    ``matrix`` has shape [len, vocab_size] with exactly one 1 per row; ``ids``
    keeps the sequence around so n-gram code can compare ids instead of
    multiplying indicator matrices.
    """

    matrix: np.ndarray
    ids: tuple[int, ...]
    vocab_size: int

    def __len__(self) -> int:
        return len(self.ids)


def to_onehot(seq: TokenSeq | Sequence[int], vocab_size: int) -> OneHotSeq:
    ids = token_ids(seq)
    if vocab_size < 1:
        raise ValueError("vocab_size must be positive")
    for t in ids:
        if not 0 <= t < vocab_size:
            raise IdOutOfRange(f"id {t} outside [0, {vocab_size})")
    mat = np.zeros((len(ids), vocab_size), dtype=np.float64)
    if ids:
        mat[np.arange(len(ids)), list(ids)] = 1.0
    return OneHotSeq(matrix=mat, ids=ids, vocab_size=vocab_size)


class DistMatrix:
    """One categorical distribution over the vocabulary per output position.

    ``probs`` is float64, non-negative, and every row sums to 1 within
    ROW_SUM_TOL.  When built from logits the original logits are retained.
    """

    __slots__ = ("probs", "logits")

    def __init__(self, probs: np.ndarray, logits: np.ndarray | None = None):
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim != 2:
            raise ValueError(f"expected a 2-d array, got shape {probs.shape}")
        if probs.shape[1] < 1:
            raise ValueError("vocabulary dimension must be positive")
        if not np.all(np.isfinite(probs)):
            raise NonFiniteInput("probabilities contain NaN or infinity")
        if np.any(probs < 0):
            raise ValueError("probabilities must be non-negative")
        row_sums = probs.sum(axis=1)
        if probs.shape[0] and np.max(np.abs(row_sums - 1.0)) > ROW_SUM_TOL:
            worst = float(np.max(np.abs(row_sums - 1.0)))
            raise ValueError(f"rows must sum to 1 (worst deviation {worst:.3e})")
        self.probs = probs
        self.logits = logits

    @property
    def length(self) -> int:
        return self.probs.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.probs.shape[1]

    @classmethod
    def from_probs(cls, probs: np.ndarray) -> "DistMatrix":
        return cls(probs)

    @classmethod
    def degenerate(cls, seq: TokenSeq | Sequence[int], vocab_size: int) -> "DistMatrix":
        """One-hot rows that put all mass on the tokens of ``seq``."""
        return cls(to_onehot(seq, vocab_size).matrix)


def softmax_rows(logits: np.ndarray) -> DistMatrix:
    """Row-wise softmax with max subtraction; rejects non-finite input."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise NonFiniteInput("logits contain NaN or infinity")
    shifted = logits - logits.max(axis=1, keepdims=True)
    np.exp(shifted, out=shifted)
    shifted /= shifted.sum(axis=1, keepdims=True)
    return DistMatrix(shifted, logits=logits)


def argmax_decode(p: DistMatrix) -> TokenSeq:
    """Most likely token per position; ties resolved to the lowest id."""
    return TokenSeq(tuple(int(i) for i in np.argmax(p.probs, axis=1)))
