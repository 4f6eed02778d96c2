"""Closed-form gradient of the bound aggregate with respect to logits.

The chain has four links: per-order bound terms in the factor products A,
A back to the probability entries through leave-one-out prefix/suffix
products, the geometric aggregate over orders, and the softmax Jacobian.
The min(1, ratio) kink uses the flat branch (zero derivative at and above
ratio 1), so away from the kink the result matches central differences to
first order in the step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bleu import BleuConfig, _select_orders
from .bound import RefNGramIndex, _order_state, lb_bleu
from .errors import NonFiniteInput
from .text import TokenSeq, softmax_rows, token_ids
from . import oracle

__all__ = [
    "GradResult",
    "FdReport",
    "grad_lb",
    "grad_lb_indexed",
    "finite_diff_check",
    "sample_check_instance",
    "gradcheck_suite",
]


@dataclass(frozen=True, eq=False)
class GradResult:
    """Objective value and its gradient with respect to the logits."""

    objective_value: float
    grad_logits: np.ndarray


@dataclass(frozen=True)
class FdReport:
    """Worst-case disagreement between analytic and numeric derivatives."""

    max_rel_error: float
    max_abs_error: float
    step: float
    entries_checked: int

    def to_dict(self) -> dict:
        return {
            "max_rel_error": self.max_rel_error,
            "max_abs_error": self.max_abs_error,
            "step": self.step,
            "entries_checked": self.entries_checked,
        }


def grad_lb(
    logits: np.ndarray,
    ref: TokenSeq | Sequence[int],
    cfg: BleuConfig = BleuConfig(),
    smoothing: bool = False,
) -> GradResult:
    """Value and logits-gradient of the (optionally smoothed) bound aggregate."""
    index = RefNGramIndex.from_ref(token_ids(ref), cfg.max_order)
    return grad_lb_indexed(logits, index, cfg, smoothing)


def grad_lb_indexed(
    logits: np.ndarray,
    index: RefNGramIndex,
    cfg: BleuConfig = BleuConfig(),
    smoothing: bool = False,
) -> GradResult:
    """Same as :func:`grad_lb` with a prebuilt reference index (hot loops)."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ValueError(f"expected [len, vocab] logits, got shape {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise NonFiniteInput("logits contain NaN or infinity")
    probs = softmax_rows(logits).probs
    length, vocab = probs.shape
    smooth = 1.0 if smoothing else 0.0

    denoms = [max(length - n + 1, 0) for n in range(1, cfg.max_order + 1)]
    orders = _select_orders(cfg, denoms)
    w = cfg.order_weights()
    total_w = sum(w[n - 1] for n in orders)
    zero = GradResult(0.0, np.zeros_like(logits))
    if total_w <= 0.0:
        return zero

    states: list[tuple[int, float, object]] = []
    log_sum = 0.0
    for n in orders:
        wn = w[n - 1] / total_w
        if wn == 0.0:
            continue
        state = _order_state(probs, index.order(n))
        precision = (state.value + smooth) / (denoms[n - 1] + smooth)
        if precision <= 0.0:
            # No reference n-grams of this order: the objective is constant 0.
            return zero
        log_sum += wn * math.log(precision)
        states.append((n, wn / precision / (denoms[n - 1] + smooth), state))
    aggregate = math.exp(log_sum)

    # d aggregate / d q, kept sparse: only entries q[i+k, g_k] matter.  The
    # softmax backward needs q*g_q and the per-row dot <g_q, q>, both of which
    # the sparse entries determine.
    dot = np.zeros(length)
    grad = np.zeros_like(probs)
    sparse: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
    for n, scale, state in states:
        og = index.order(n)
        if og.distinct == 0:
            continue
        active = state.ratio < 1.0
        # d LB_n / d A[i,u]: the direct min(...) term plus the shrinkage every
        # other row's denominator feels when A[i,u] grows.
        shrink = np.where(active, state.a * og.counts[None, :] / state.denom**2, 0.0)
        grad_a = (state.clipped - (shrink.sum(axis=0)[None, :] - shrink)) * (
            aggregate * scale
        )
        n_rows = len(state.rows)
        ones = np.ones((n_rows, og.distinct))
        prefix = ones
        loo = []
        for k in range(og.n):
            loo.append(prefix)
            prefix = prefix * state.factors[k] if k + 1 < og.n else prefix
        suffix = ones
        for k in range(og.n - 1, -1, -1):
            loo[k] = loo[k] * suffix if og.n > 1 else loo[k]
            if k > 0:
                suffix = suffix * state.factors[k]
        for k in range(og.n):
            # q * dL/dq at the touched entries equals factors[k] * dL/dA * loo.
            qval = grad_a * loo[k] * state.factors[k]
            rows_k = state.rows + k
            np.add.at(grad, (rows_k[:, None], og.cols[k][None, :]), qval)
            np.add.at(dot, rows_k, qval.sum(axis=1))
    grad -= probs * dot[:, None]
    return GradResult(objective_value=aggregate, grad_logits=grad)


def _objective(
    logits: np.ndarray,
    ref_ids: tuple[int, ...],
    cfg: BleuConfig,
    smoothing: bool,
) -> float:
    return lb_bleu(softmax_rows(logits), ref_ids, cfg, smoothing=smoothing).aggregate


def finite_diff_check(
    logits: np.ndarray,
    ref: TokenSeq | Sequence[int],
    cfg: BleuConfig = BleuConfig(),
    smoothing: bool = False,
    step: float = 1e-5,
    entries: int | None = None,
    seed: int = 0,
    corrupt_first_entry: float = 0.0,
) -> FdReport:
    """Compare the analytic gradient against central differences.

    ``entries`` limits how many coordinates are probed (all by default);
    ``corrupt_first_entry`` adds a constant to one analytic entry so that a
    harness can confirm the check actually fails when it should.
    """
    logits = np.asarray(logits, dtype=np.float64)
    ref_ids = token_ids(ref)
    analytic = grad_lb(logits, ref_ids, cfg, smoothing).grad_logits.copy()
    analytic[0, 0] += corrupt_first_entry
    length, vocab = logits.shape
    n_total = length * vocab
    if entries is None or entries >= n_total:
        flat = np.arange(n_total)
    else:
        if entries < 1:
            raise ValueError("entries must be positive")
        flat = oracle.derived_rng(seed, oracle.TAG_FD).choice(
            n_total, size=entries, replace=False
        )
    max_rel = 0.0
    max_abs = 0.0
    for idx in flat:
        t, j = divmod(int(idx), vocab)
        bumped = logits.copy()
        bumped[t, j] += step
        hi = _objective(bumped, ref_ids, cfg, smoothing)
        bumped[t, j] -= 2.0 * step
        lo = _objective(bumped, ref_ids, cfg, smoothing)
        numeric = (hi - lo) / (2.0 * step)
        diff = abs(analytic[t, j] - numeric)
        rel = diff / max(abs(analytic[t, j]), abs(numeric), 1e-8)
        max_abs = max(max_abs, diff)
        max_rel = max(max_rel, rel)
    return FdReport(
        max_rel_error=max_rel,
        max_abs_error=max_abs,
        step=step,
        entries_checked=len(flat),
    )


def sample_check_instance(
    rng: np.random.Generator,
    max_len: int = 6,
    max_vocab: int = 8,
    max_order: int = 4,
    kink_margin: float = 1e-3,
) -> tuple[np.ndarray, TokenSeq, BleuConfig]:
    """Random small instance whose bound terms stay clear of the min kink.

    Central differences are meaningless where some ratio sits within
    ``kink_margin`` of 1, so instances are redrawn until all ratios clear it.
    """
    for _ in range(500):
        length = int(rng.integers(2, max_len + 1))
        vocab = int(rng.integers(2, max_vocab + 1))
        order = int(rng.integers(1, min(max_order, length) + 1))
        logits = rng.standard_normal((length, vocab))
        ref = TokenSeq(tuple(int(i) for i in rng.integers(0, vocab, size=length)))
        cfg = BleuConfig(max_order=order, use_bp=False)
        probs = softmax_rows(logits).probs
        index = RefNGramIndex.from_ref(ref.ids, order)
        clear = True
        for n in range(1, order + 1):
            state = _order_state(probs, index.order(n))
            if state.ratio.size and np.min(np.abs(state.ratio - 1.0)) < kink_margin:
                clear = False
                break
        if clear:
            return logits, ref, cfg
    raise RuntimeError("could not draw a kink-free instance in 500 tries")


def gradcheck_suite(
    instances: int = 100,
    step: float = 1e-5,
    seed: int = 0,
    smoothing: bool = False,
    corrupt_first_entry: float = 0.0,
    max_len: int = 6,
    max_vocab: int = 8,
    max_order: int = 4,
) -> FdReport:
    """Run finite_diff_check over a suite of random small instances."""
    if instances < 1:
        raise ValueError("instances must be positive")
    rng = oracle.derived_rng(seed, oracle.TAG_SUITE)
    max_rel = 0.0
    max_abs = 0.0
    checked = 0
    for _ in range(instances):
        logits, ref, cfg = sample_check_instance(
            rng, max_len=max_len, max_vocab=max_vocab, max_order=max_order
        )
        report = finite_diff_check(
            logits,
            ref,
            cfg,
            smoothing=smoothing,
            step=step,
            corrupt_first_entry=corrupt_first_entry,
        )
        max_rel = max(max_rel, report.max_rel_error)
        max_abs = max(max_abs, report.max_abs_error)
        checked += report.entries_checked
    return FdReport(
        max_rel_error=max_rel, max_abs_error=max_abs, step=step, entries_checked=checked
    )
