"""Ground-truth oracles: Monte-Carlo and exhaustive expected BLEU.

All randomness flows through counter-based Philox generators seeded from
explicit integers; nothing ever reads the wall clock.  Monte-Carlo sampling
is chunked with one derived stream per chunk and the chunk statistics are
merged in index order, so estimates depend only on (inputs, samples, seed),
not on scheduling or thread counts.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bleu import BleuConfig, bleu, brevity_penalty
from .errors import EmptyText, InstanceTooLarge
from .text import DistMatrix, TokenSeq, token_ids

__all__ = [
    "McEstimate",
    "ExactExpectation",
    "make_rng",
    "derived_rng",
    "derived_seed",
    "sample_candidate",
    "score_samples",
    "mc_expected_bleu",
    "exhaustive_expected_overlap",
    "exhaustive_expected_bleu",
    "DEFAULT_ENUM_CAP",
]

# Fixed chunk size for Monte-Carlo sampling; part of the determinism contract,
# do not make it configurable.
MC_CHUNK = 65536

# Outcome-space cap for exhaustive enumeration, overridable per call or via
# the BLEUBOUND_ENUM_CAP environment variable.
DEFAULT_ENUM_CAP = 1_000_000

# Candidate distributions with at most this many outcomes get scored through
# a dedupe cache instead of per-sample rescoring.
_OUTCOME_CACHE_MAX = 4096

# spawn_key tags for derived streams, one per consumer.
TAG_MC = 1
TAG_REINFORCE = 2
TAG_TOY_INSTANCE = 3
TAG_TOY_EVAL = 4
TAG_FD = 5
TAG_SUITE = 6


def make_rng(seed: int) -> np.random.Generator:
    """Philox generator for an explicit integer seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def derived_rng(seed: int, *path: int) -> np.random.Generator:
    """Independent Philox stream addressed by (seed, *path)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def derived_seed(seed: int, *path: int) -> int:
    """A plain integer seed derived from (seed, *path), for APIs taking ints."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class McEstimate:
    """Sample mean of BLEU over drawn candidates, with its standard error."""

    mean: float
    std_error: float
    samples: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "samples": self.samples,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ExactExpectation:
    """Exact expectation from full outcome enumeration."""

    value: float
    outcomes_enumerated: int

    def to_dict(self) -> dict:
        return {"value": self.value, "outcomes": self.outcomes_enumerated}


def _resolve_cap(cap: int | None) -> int:
    if cap is not None:
        return int(cap)
    env = os.environ.get("BLEUBOUND_ENUM_CAP")
    return int(env) if env else DEFAULT_ENUM_CAP


def _sample_ids(cum: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` id rows from per-position cumulative distributions."""
    length, vocab = cum.shape
    u = rng.random((count, length))
    out = np.empty((count, length), dtype=np.int64)
    for t in range(length):
        out[:, t] = np.searchsorted(cum[t], u[:, t], side="right")
    np.minimum(out, vocab - 1, out=out)
    return out


def sample_candidate(p: DistMatrix, rng: np.random.Generator | int) -> TokenSeq:
    """One candidate sequence drawn position-wise from ``p``."""
    if isinstance(rng, (int, np.integer)):
        rng = make_rng(int(rng))
    cum = np.cumsum(p.probs, axis=1)
    ids = _sample_ids(cum, 1, rng)[0]
    return TokenSeq(tuple(int(i) for i in ids))


def _clipped_overlap(x: tuple[int, ...], ref_counts: dict, n: int) -> int:
    # Same quantity as bleu.count_overlap, inlined for the enumeration loop.
    if len(x) < n:
        return 0
    counts: dict = {}
    for i in range(len(x) - n + 1):
        g = x[i : i + n]
        counts[g] = counts.get(g, 0) + 1
    return sum(min(c, ref_counts.get(g, 0)) for g, c in counts.items())


def score_samples(
    ids: np.ndarray,
    ref: TokenSeq | Sequence[int],
    cfg: BleuConfig,
    vocab_size: int,
) -> np.ndarray:
    """BLEU of every row of ``ids`` against ``ref``, as float64.

    Two fast routes agree with calling :func:`bleu` row by row to floating
    point roundoff: a vectorised unigram path, and an outcome-dedupe path
    when the whole outcome space is small.
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 2:
        raise ValueError(f"expected [samples, len] ids, got shape {ids.shape}")
    n_samples, length = ids.shape
    ref_ids = token_ids(ref)
    if length == 0 or not ref_ids:
        raise EmptyText("candidate and reference must be non-empty")

    if cfg.max_order == 1:
        return _score_unigram(ids, ref_ids, cfg)

    if vocab_size ** length <= _OUTCOME_CACHE_MAX:
        codes = ids @ (vocab_size ** np.arange(length - 1, -1, -1, dtype=np.int64))
        _, first, inverse = np.unique(codes, return_index=True, return_inverse=True)
        uniq_scores = np.array(
            [bleu(tuple(ids[i]), ref_ids, cfg).score for i in first], dtype=np.float64
        )
        return uniq_scores[inverse]

    return np.array(
        [bleu(tuple(row), ref_ids, cfg).score for row in ids], dtype=np.float64
    )


def _score_unigram(ids: np.ndarray, ref_ids: tuple[int, ...], cfg: BleuConfig) -> np.ndarray:
    # BLEU with max_order 1 is bp * clipped_unigram_overlap / len.
    n_samples, length = ids.shape
    uniq, counts = np.unique(np.asarray(ref_ids, dtype=np.int64), return_counts=True)
    hits = (ids[:, :, None] == uniq[None, None, :]).sum(axis=1)
    clipped = np.minimum(hits, counts[None, :])
    overlap = clipped.sum(axis=1)
    bp = brevity_penalty(length, len(ref_ids)) if cfg.use_bp else 1.0
    return bp * overlap / float(length)


def mc_expected_bleu(
    p: DistMatrix,
    ref: TokenSeq | Sequence[int],
    cfg: BleuConfig = BleuConfig(),
    samples: int = 10_000,
    seed: int = 0,
) -> McEstimate:
    """Monte-Carlo estimate of E[BLEU(X, ref)] with X ~ p position-wise."""
    if samples < 1:
        raise ValueError("samples must be positive")
    ref_ids = token_ids(ref)
    if p.length == 0 or not ref_ids:
        raise EmptyText("candidate distribution and reference must be non-empty")
    cum = np.cumsum(p.probs, axis=1)
    mean = 0.0
    m2 = 0.0
    seen = 0
    n_chunks = (samples + MC_CHUNK - 1) // MC_CHUNK
    for k in range(n_chunks):
        size = min(MC_CHUNK, samples - k * MC_CHUNK)
        rng = derived_rng(seed, TAG_MC, k)
        vals = score_samples(_sample_ids(cum, size, rng), ref_ids, cfg, p.vocab_size)
        c_mean = float(vals.mean())
        c_m2 = float(((vals - c_mean) ** 2).sum())
        delta = c_mean - mean
        total = seen + size
        mean += delta * size / total
        m2 += c_m2 + delta * delta * seen * size / total
        seen = total
    if seen > 1:
        std_error = math.sqrt(m2 / (seen - 1) / seen)
    else:
        std_error = 0.0
    return McEstimate(mean=mean, std_error=std_error, samples=samples, seed=seed)


def _check_enumerable(p: DistMatrix, cap: int | None) -> int:
    if p.length == 0:
        raise EmptyText("candidate distribution must be non-empty")
    limit = _resolve_cap(cap)
    total = p.vocab_size ** p.length
    if total > limit:
        raise InstanceTooLarge(
            f"{p.vocab_size}^{p.length} = {total} outcomes exceeds cap {limit}"
        )
    return total


def exhaustive_expected_overlap(
    p: DistMatrix,
    ref: TokenSeq | Sequence[int],
    n: int,
    cap: int | None = None,
) -> ExactExpectation:
    """Exact E[clipped order-n overlap] by summing over every outcome."""
    if n < 1:
        raise ValueError("n-gram order must be at least 1")
    total = _check_enumerable(p, cap)
    ref_ids = token_ids(ref)
    if not ref_ids:
        raise EmptyText("reference must be non-empty")
    ref_counts: dict = {}
    for i in range(len(ref_ids) - n + 1):
        g = ref_ids[i : i + n]
        ref_counts[g] = ref_counts.get(g, 0) + 1
    rows = [tuple(float(q) for q in row) for row in p.probs]
    length = p.length

    def terms():
        for x in itertools.product(range(p.vocab_size), repeat=length):
            prob = 1.0
            for t in range(length):
                prob *= rows[t][x[t]]
            yield prob * _clipped_overlap(x, ref_counts, n)

    return ExactExpectation(value=math.fsum(terms()), outcomes_enumerated=total)


def exhaustive_expected_bleu(
    p: DistMatrix,
    ref: TokenSeq | Sequence[int],
    cfg: BleuConfig = BleuConfig(),
    cap: int | None = None,
) -> ExactExpectation:
    """Exact E[BLEU(X, ref)] by summing over every outcome."""
    total = _check_enumerable(p, cap)
    ref_ids = token_ids(ref)
    if not ref_ids:
        raise EmptyText("reference must be non-empty")
    rows = [tuple(float(q) for q in row) for row in p.probs]
    length = p.length

    def terms():
        for x in itertools.product(range(p.vocab_size), repeat=length):
            prob = 1.0
            for t in range(length):
                prob *= rows[t][x[t]]
            yield prob * bleu(x, ref_ids, cfg).score

    return ExactExpectation(value=math.fsum(terms()), outcomes_enumerated=total)
