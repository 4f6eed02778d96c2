"""Differentiable lower bound on the expected clipped n-gram overlap.

For a candidate distribution q (one categorical per position) and a single
reference, the bound for order n sums, over candidate start positions i and
distinct reference n-grams g,

    prod_k q[i+k, g_k] * min(1, count_ref(g) / (1 + sum_{l != i} prod_k q[l+k, g_k]))

Only distinct reference n-grams are touched, so the cost per order is
O((len - n + 1) * distinct_ref_ngrams * n) regardless of vocabulary size.
At a one-hot q the bound reproduces the exact clipped overlap; for unique
reference n-grams it never exceeds the true expectation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .bleu import BleuConfig, _geometric_score, _select_orders
from .errors import EmptyText, LengthTooShort, PositionOutOfRange
from .text import DistMatrix, TokenSeq, token_ids

__all__ = [
    "RefNGramIndex",
    "LbResult",
    "lb_overlap_component",
    "lb_overlap",
    "lb_bleu",
    "convexity_probe",
]


@dataclass(frozen=True, eq=False)
class OrderGrams:
    """Distinct reference n-grams of one order, in column form.

    cols[k, u] is the k-th token id of the u-th distinct n-gram; counts[u]
    is that n-gram's multiplicity in the reference.
    """

    n: int
    grams: tuple[tuple[int, ...], ...]
    cols: np.ndarray
    counts: np.ndarray

    @property
    def distinct(self) -> int:
        return len(self.grams)


@dataclass(frozen=True, eq=False)
class RefNGramIndex:
    """Distinct reference n-grams with multiplicities for orders 1..max_order."""

    max_order: int
    ref_len: int
    orders: tuple[OrderGrams, ...]

    @classmethod
    def from_ref(cls, ref: TokenSeq | Sequence[int], max_order: int) -> "RefNGramIndex":
        ref_ids = token_ids(ref)
        if not ref_ids:
            raise EmptyText("reference must be non-empty")
        if max_order < 1:
            raise ValueError("max_order must be at least 1")
        per_order = []
        for n in range(1, max_order + 1):
            counts: dict[tuple[int, ...], int] = {}
            for i in range(len(ref_ids) - n + 1):
                g = ref_ids[i : i + n]
                counts[g] = counts.get(g, 0) + 1
            grams = tuple(counts)
            cols = np.array(
                [[g[k] for g in grams] for k in range(n)], dtype=np.int64
            ).reshape(n, len(grams))
            per_order.append(
                OrderGrams(
                    n=n,
                    grams=grams,
                    cols=cols,
                    counts=np.array([counts[g] for g in grams], dtype=np.float64),
                )
            )
        return cls(max_order=max_order, ref_len=len(ref_ids), orders=tuple(per_order))

    def order(self, n: int) -> OrderGrams:
        if not 1 <= n <= self.max_order:
            raise ValueError(f"order {n} outside 1..{self.max_order}")
        return self.orders[n - 1]

    @property
    def unique_words(self) -> bool:
        """True when every reference word occurs exactly once."""
        return bool(np.all(self.orders[0].counts == 1.0))


class OrderState(NamedTuple):
    """Forward-pass intermediates of the bound for one order."""

    a: np.ndarray        # [rows, distinct] product of per-offset factors
    factors: list        # n arrays [rows, distinct], factors[k] = q[i+k, g_k]
    totals: np.ndarray   # [distinct] column sums of a
    denom: np.ndarray    # [rows, distinct] 1 + totals - a
    ratio: np.ndarray    # [rows, distinct] counts / denom
    clipped: np.ndarray  # [rows, distinct] min(1, ratio)
    rows: np.ndarray     # [rows] candidate start positions
    value: float         # sum(a * clipped)


def _order_state(probs: np.ndarray, og: OrderGrams) -> OrderState:
    """Evaluate one order of the bound, keeping what the gradient needs."""
    length = probs.shape[0]
    n = og.n
    rows = np.arange(length - n + 1)
    if og.distinct == 0:
        empty = np.zeros((len(rows), 0))
        return OrderState(empty, [], np.zeros(0), empty, empty, empty, rows, 0.0)
    factors = [probs[rows[:, None] + k, og.cols[k][None, :]] for k in range(n)]
    a = factors[0].copy()
    for f in factors[1:]:
        a *= f
    totals = a.sum(axis=0)
    denom = 1.0 + totals[None, :] - a
    ratio = og.counts[None, :] / denom
    clipped = np.minimum(1.0, ratio)
    value = float((a * clipped).sum())
    return OrderState(a, factors, totals, denom, ratio, clipped, rows, value)


def lb_overlap_component(
    p: DistMatrix, ref: TokenSeq | Sequence[int], n: int, i: int
) -> float:
    """One start position's share of the order-n bound."""
    if n < 1:
        raise ValueError("n-gram order must be at least 1")
    if p.length < n:
        raise LengthTooShort(f"candidate length {p.length} below order {n}")
    if not 0 <= i <= p.length - n:
        raise PositionOutOfRange(
            f"start {i} invalid for length {p.length} order {n}"
        )
    index = RefNGramIndex.from_ref(ref, n)
    state = _order_state(p.probs, index.order(n))
    if state.a.shape[1] == 0:
        return 0.0
    return float((state.a[i] * state.clipped[i]).sum())


def lb_overlap(p: DistMatrix, ref: TokenSeq | Sequence[int], n: int) -> float:
    """Lower bound on E[clipped order-n overlap] under q = p."""
    if n < 1:
        raise ValueError("n-gram order must be at least 1")
    if p.length < n:
        raise LengthTooShort(f"candidate length {p.length} below order {n}")
    index = RefNGramIndex.from_ref(ref, n)
    return _order_state(p.probs, index.order(n)).value


@dataclass(frozen=True)
class LbResult:
    """Per-order bound values and the aggregated objective.

    Lists cover orders 1..max_order; entries for orders the candidate is too
    short for are zero placeholders and are excluded from the aggregate (the
    `orders` field says which ones contributed).  `aggregate` multiplies the
    selected per-order precisions (smoothed ones when smoothing was on) under
    renormalised weights; `bound_value` is aggregate - 1.
    """

    lb_overlaps: tuple[float, ...]
    lb_precisions: tuple[float, ...]
    smoothed_precisions: tuple[float, ...]
    aggregate: float
    bound_value: float
    orders: tuple[int, ...]
    smoothing: bool
    unique_reference: bool

    def to_dict(self) -> dict:
        return {
            "lb_overlaps": list(self.lb_overlaps),
            "lb_precisions": list(self.lb_precisions),
            "smoothed": list(self.smoothed_precisions),
            "aggregate": self.aggregate,
            "bound_value": self.bound_value,
        }


def lb_bleu(
    p: DistMatrix,
    ref: TokenSeq | Sequence[int],
    cfg: BleuConfig = BleuConfig(),
    smoothing: bool = False,
) -> LbResult:
    """Aggregate the per-order bounds into a BLEU-shaped objective.

    The brevity penalty plays no role here: the bound is on the precision
    part only.  Smoothing replaces each precision (LB_n)/(L-n+1) by
    (LB_n+1)/(L-n+2), which is no longer a bound but keeps logs finite.
    """
    ref_ids = token_ids(ref)
    if p.length == 0 or not ref_ids:
        raise EmptyText("candidate distribution and reference must be non-empty")
    length = p.length
    index = RefNGramIndex.from_ref(ref_ids, cfg.max_order)
    overlaps = []
    precisions = []
    smoothed = []
    denoms = []
    for n in range(1, cfg.max_order + 1):
        d = length - n + 1
        denoms.append(max(d, 0))
        if d > 0:
            val = _order_state(p.probs, index.order(n)).value
            overlaps.append(val)
            precisions.append(val / d)
            smoothed.append((val + 1.0) / (d + 1.0))
        else:
            overlaps.append(0.0)
            precisions.append(0.0)
            smoothed.append(0.0)
    orders = _select_orders(cfg, denoms)
    used = smoothed if smoothing else precisions
    aggregate = _geometric_score(cfg, orders, used, bp=1.0)
    return LbResult(
        lb_overlaps=tuple(overlaps),
        lb_precisions=tuple(precisions),
        smoothed_precisions=tuple(smoothed),
        aggregate=aggregate,
        bound_value=aggregate - 1.0,
        orders=tuple(orders),
        smoothing=smoothing,
        unique_reference=index.unique_words,
    )


def convexity_probe(
    a: float,
    b: float,
    c: Sequence[float],
    x: Sequence[float],
    y: Sequence[float],
    alpha: float,
) -> tuple[float, float]:
    """Evaluate f(z) = min(1, a / (1 + b + c.z)) at a convex combination.

    Returns (f(alpha*x + (1-alpha)*y), alpha*f(x) + (1-alpha)*f(y)); for
    non-negative inputs f is convex, so lhs <= rhs.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    c_arr = np.asarray(c, dtype=np.float64)
    x_arr = np.asarray(x, dtype=np.float64)
    y_arr = np.asarray(y, dtype=np.float64)
    if not (c_arr.shape == x_arr.shape == y_arr.shape):
        raise ValueError("c, x, y must have matching shapes")

    def f(z: np.ndarray) -> float:
        return min(1.0, a / (1.0 + b + float(c_arr @ z)))

    lhs = f(alpha * x_arr + (1.0 - alpha) * y_arr)
    rhs = alpha * f(x_arr) + (1.0 - alpha) * f(y_arr)
    return lhs, rhs
