"""Exact BLEU: clipped n-gram counting and the equivalent matrix form.

The count form is the classic Papineni definition for a single reference.
The matrix form builds the n-gram match matrices S (candidate vs candidate)
and P (reference vs candidate) and recovers the same clipped overlap as
sum_i min(1, v_y[i] / v_x[i]); it exists so the differentiable bound has an
exact discrete counterpart to be checked against.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import EmptyCorpus, EmptyText, LengthTooShort, ZeroLength
from .text import OneHotSeq, TokenSeq, token_ids

__all__ = [
    "BleuConfig",
    "NGramStats",
    "BleuBreakdown",
    "count_overlap",
    "ngram_stats",
    "overlap_matrix_form",
    "brevity_penalty",
    "bleu",
    "corpus_bleu",
]


@dataclass(frozen=True)
class BleuConfig:
    """Scoring configuration.

    weights=None means uniform 1/max_order.  When the candidate is shorter
    than some order n, that order is skipped and the remaining weights are
    renormalised, unless strict_short is set, in which case LengthTooShort
    is raised instead.
    """

    max_order: int = 4
    weights: tuple[float, ...] | None = None
    use_bp: bool = True
    strict_short: bool = False

    def __post_init__(self) -> None:
        if self.max_order < 1:
            raise ValueError("max_order must be at least 1")
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if len(w) != self.max_order:
                raise ValueError(
                    f"got {len(w)} weights for max_order {self.max_order}"
                )
            if any(x < 0 for x in w):
                raise ValueError("weights must be non-negative")
            if abs(sum(w) - 1.0) > 1e-12:
                raise ValueError(f"weights must sum to 1, got {sum(w)!r}")
            object.__setattr__(self, "weights", w)

    def order_weights(self) -> tuple[float, ...]:
        if self.weights is None:
            return tuple(1.0 / self.max_order for _ in range(self.max_order))
        return self.weights


def _grams(ids: Sequence[int], n: int) -> list[tuple[int, ...]]:
    return [tuple(ids[i : i + n]) for i in range(len(ids) - n + 1)]


def count_overlap(cand: TokenSeq | Sequence[int], ref: TokenSeq | Sequence[int], n: int) -> int:
    """Clipped order-n overlap: sum over distinct candidate n-grams of
    min(count in candidate, count in reference)."""
    if n < 1:
        raise ValueError("n-gram order must be at least 1")
    cand_ids = token_ids(cand)
    ref_ids = token_ids(ref)
    if len(cand_ids) < n or len(ref_ids) < n:
        return 0
    ref_counts = Counter(_grams(ref_ids, n))
    total = 0
    for gram, c in Counter(_grams(cand_ids, n)).items():
        total += min(c, ref_counts.get(gram, 0))
    return total


@dataclass(frozen=True)
class NGramStats:
    """Match matrices for one order.

    s[i, j] = 1 iff candidate n-grams at positions i and j are equal
    (shape [R, R] with R = len_x - n + 1); p[a, i] = 1 iff the reference
    n-gram at a equals the candidate n-gram at i.  v_x and v_y are the
    column sums of s and p.
    """

    n: int
    s: np.ndarray
    p: np.ndarray
    v_x: np.ndarray
    v_y: np.ndarray


def _window_equal(wa: np.ndarray, wb: np.ndarray) -> np.ndarray:
    # Pairwise equality of two stacks of n-gram windows, via id comparison.
    return np.all(wa[:, None, :] == wb[None, :, :], axis=2).astype(np.float64)


def ngram_stats(x: OneHotSeq, y: OneHotSeq, n: int) -> NGramStats:
    """Build S, P and their column sums for order ``n``.

    Requires both sequences to have at least one order-n window.
    """
    if n < 1:
        raise ValueError("n-gram order must be at least 1")
    if len(x) < n:
        raise LengthTooShort(f"candidate has {len(x)} tokens, needs {n}")
    if len(y) < n:
        raise LengthTooShort(f"reference has {len(y)} tokens, needs {n}")
    wx = sliding_window_view(np.asarray(x.ids, dtype=np.int64), n)
    wy = sliding_window_view(np.asarray(y.ids, dtype=np.int64), n)
    s = _window_equal(wx, wx)
    p = _window_equal(wy, wx)
    return NGramStats(n=n, s=s, p=p, v_x=s.sum(axis=0), v_y=p.sum(axis=0))


def overlap_matrix_form(x: OneHotSeq, y: OneHotSeq, n: int) -> float:
    """Clipped overlap computed from match-matrix column sums.

    Equals count_overlap exactly: grouping the i-sum by distinct n-gram g
    turns sum_i min(1, v_y[i]/v_x[i]) into sum_g min(count_x(g), count_y(g)).
    A reference shorter than n has no n-grams, so the overlap is 0.
    """
    if n < 1:
        raise ValueError("n-gram order must be at least 1")
    if len(x) < n:
        raise LengthTooShort(f"candidate has {len(x)} tokens, needs {n}")
    if len(y) < n:
        return 0.0
    stats = ngram_stats(x, y, n)
    return float(np.minimum(1.0, stats.v_y / stats.v_x).sum())


def brevity_penalty(cand_len: int, ref_len: int) -> float:
    """exp(1 - r/c) capped at 1; lengths must be positive."""
    if cand_len < 1 or ref_len < 1:
        raise ZeroLength(f"need positive lengths, got c={cand_len} r={ref_len}")
    if cand_len > ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / cand_len)


@dataclass(frozen=True)
class BleuBreakdown:
    """Score plus everything that went into it."""

    score: float
    bp: float
    precisions: tuple[float, ...]
    overlaps: tuple[float, ...]
    cand_len: int
    ref_len: int
    orders: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "bp": self.bp,
            "precisions": list(self.precisions),
            "overlaps": list(self.overlaps),
            "cand_len": self.cand_len,
            "ref_len": self.ref_len,
        }


def _select_orders(cfg: BleuConfig, denominators: Sequence[float]) -> list[int]:
    # Orders whose precision denominator is positive; optionally strict.
    usable = [n for n in range(1, cfg.max_order + 1) if denominators[n - 1] > 0]
    if cfg.strict_short and len(usable) < cfg.max_order:
        missing = sorted(set(range(1, cfg.max_order + 1)) - set(usable))
        raise LengthTooShort(f"no candidate n-grams for orders {missing}")
    return usable


def _geometric_score(
    cfg: BleuConfig,
    orders: Sequence[int],
    precisions: Sequence[float],
    bp: float,
) -> float:
    w = cfg.order_weights()
    total_w = sum(w[n - 1] for n in orders)
    if total_w <= 0.0:
        return 0.0
    log_sum = 0.0
    for n in orders:
        wn = w[n - 1] / total_w
        if wn == 0.0:
            continue
        p = precisions[n - 1]
        if p <= 0.0:
            return 0.0
        log_sum += wn * math.log(p)
    return bp * math.exp(log_sum)


def bleu(
    cand: TokenSeq | Sequence[int],
    ref: TokenSeq | Sequence[int],
    cfg: BleuConfig = BleuConfig(),
) -> BleuBreakdown:
    """Sentence BLEU against a single reference."""
    cand_ids = token_ids(cand)
    ref_ids = token_ids(ref)
    if not cand_ids or not ref_ids:
        raise EmptyText("candidate and reference must be non-empty")
    c, r = len(cand_ids), len(ref_ids)
    overlaps = []
    precisions = []
    denoms = []
    for n in range(1, cfg.max_order + 1):
        d = max(c - n + 1, 0)
        denoms.append(d)
        o = count_overlap(cand_ids, ref_ids, n) if d > 0 else 0
        overlaps.append(float(o))
        precisions.append(o / d if d > 0 else 0.0)
    orders = _select_orders(cfg, denoms)
    bp = brevity_penalty(c, r) if cfg.use_bp else 1.0
    score = _geometric_score(cfg, orders, precisions, bp)
    return BleuBreakdown(
        score=score,
        bp=bp,
        precisions=tuple(precisions),
        overlaps=tuple(overlaps),
        cand_len=c,
        ref_len=r,
        orders=tuple(orders),
    )


def corpus_bleu(
    pairs: Iterable[tuple[TokenSeq | Sequence[int], TokenSeq | Sequence[int]]],
    cfg: BleuConfig = BleuConfig(),
) -> BleuBreakdown:
    """Corpus BLEU: overlaps, denominators, and lengths pooled before ratios."""
    pair_list = list(pairs)
    if not pair_list:
        raise EmptyCorpus("corpus BLEU needs at least one sentence pair")
    tot_overlap = [0.0] * cfg.max_order
    tot_denom = [0.0] * cfg.max_order
    tot_c = 0
    tot_r = 0
    for cand, ref in pair_list:
        cand_ids = token_ids(cand)
        ref_ids = token_ids(ref)
        if not cand_ids or not ref_ids:
            raise EmptyText("corpus contains an empty candidate or reference")
        tot_c += len(cand_ids)
        tot_r += len(ref_ids)
        for n in range(1, cfg.max_order + 1):
            d = max(len(cand_ids) - n + 1, 0)
            if d > 0:
                tot_denom[n - 1] += d
                tot_overlap[n - 1] += count_overlap(cand_ids, ref_ids, n)
    precisions = tuple(
        (tot_overlap[i] / tot_denom[i]) if tot_denom[i] > 0 else 0.0
        for i in range(cfg.max_order)
    )
    orders = _select_orders(cfg, tot_denom)
    bp = brevity_penalty(tot_c, tot_r) if cfg.use_bp else 1.0
    score = _geometric_score(cfg, orders, precisions, bp)
    return BleuBreakdown(
        score=score,
        bp=bp,
        precisions=precisions,
        overlaps=tuple(tot_overlap),
        cand_len=tot_c,
        ref_len=tot_r,
        orders=tuple(orders),
    )
