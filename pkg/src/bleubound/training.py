"""Toy optimisation task, REINFORCE estimator, and gradient comparison.

The toy task maximises the bound aggregate over the logits of a single
random instance and tracks three curves: the bound itself, exact BLEU of
the argmax decode, and a Monte-Carlo estimate of expected BLEU.  Everything
is deterministic given the config seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .bleu import BleuConfig, bleu
from .bound import RefNGramIndex, lb_bleu
from .errors import NonFiniteInput
from .gradients import grad_lb, grad_lb_indexed
from .oracle import (
    TAG_REINFORCE,
    TAG_TOY_EVAL,
    TAG_TOY_INSTANCE,
    derived_rng,
    derived_seed,
    exhaustive_expected_bleu,
    mc_expected_bleu,
    score_samples,
    _sample_ids,
)
from .text import DistMatrix, TokenSeq, argmax_decode, softmax_rows, token_ids

__all__ = [
    "Adam",
    "Sgd",
    "ToyConfig",
    "CurvePoint",
    "ReinforceEstimate",
    "GradComparison",
    "gen_toy_instance",
    "run_toy",
    "write_curve_csv",
    "summarize_curve",
    "reinforce_grad",
    "compare_gradients",
    "CURVE_CSV_HEADER",
]

CURVE_CSV_HEADER = "step,lb,exact_argmax_bleu,mc_mean,mc_stderr"


class Adam:
    """Adam in ascent form: params move along +grad.

    Standard bias-corrected moments; a zero gradient leaves the parameters
    exactly unchanged.
    """

    def __init__(
        self,
        lr: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise ValueError("betas must lie in [0, 1)")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: np.ndarray | None = None
        self._v: np.ndarray | None = None

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        """Update ``params`` in place and return it."""
        if self._m is None:
            self._m = np.zeros_like(params)
            self._v = np.zeros_like(params)
            self._buf = np.empty_like(params)
            self._upd = np.empty_like(params)
        self.t += 1
        m, v, buf, upd = self._m, self._v, self._buf, self._upd
        m *= self.beta1
        np.multiply(grad, 1.0 - self.beta1, out=buf)
        m += buf
        v *= self.beta2
        np.multiply(grad, grad, out=buf)
        buf *= 1.0 - self.beta2
        v += buf
        np.divide(v, 1.0 - self.beta2**self.t, out=buf)
        np.sqrt(buf, out=buf)
        buf += self.eps
        np.divide(m, buf, out=upd)
        upd *= self.lr / (1.0 - self.beta1**self.t)
        params += upd
        return params


class Sgd:
    """Plain gradient ascent."""

    def __init__(self, lr: float = 1e-4):
        self.lr = lr

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        params += self.lr * grad
        return params


def make_optimizer(name: str, lr: float):
    if name == "adam":
        return Adam(lr=lr)
    if name == "sgd":
        return Sgd(lr=lr)
    raise ValueError(f"unknown optimizer {name!r}")


@dataclass(frozen=True)
class ToyConfig:
    """Configuration of the synthetic optimisation run.

    The reference is unique-token by default (resampled until all tokens are
    distinct), which keeps the run inside the bound's proven regime.
    """

    length: int = 10
    vocab_size: int = 10_000
    max_order: int = 1
    weights: tuple[float, ...] | None = None
    learning_rate: float = 1e-4
    optimizer: str = "adam"
    steps: int = 12_000
    eval_every: int = 1_200
    mc_samples: int = 262_144
    smoothing: bool = True
    unique_reference: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.length < 1 or self.vocab_size < 2:
            raise ValueError("need length >= 1 and vocab_size >= 2")
        if self.steps < 1 or self.eval_every < 1 or self.mc_samples < 1:
            raise ValueError("steps, eval_every, mc_samples must be positive")
        if self.max_order > self.length:
            raise ValueError("max_order cannot exceed the sequence length")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.unique_reference and self.length > self.vocab_size:
            raise ValueError("unique reference impossible with length > vocab_size")

    def bleu_config(self) -> BleuConfig:
        # Candidate and reference lengths coincide in the toy, so BP would be
        # exactly 1; keeping it off matches the bound's precision-only scope.
        return BleuConfig(
            max_order=self.max_order, weights=self.weights, use_bp=False
        )


@dataclass(frozen=True)
class CurvePoint:
    """One evaluation snapshot of the toy run."""

    step: int
    lb_aggregate: float
    exact_bleu_argmax: float
    mc_mean: float
    mc_std_error: float


def gen_toy_instance(
    cfg: ToyConfig, rng: np.random.Generator | None = None
) -> tuple[np.ndarray, TokenSeq]:
    """Standard-normal logits and a uniform random reference."""
    if rng is None:
        rng = derived_rng(cfg.seed, TAG_TOY_INSTANCE)
    logits = rng.standard_normal((cfg.length, cfg.vocab_size))
    while True:
        ref = tuple(int(i) for i in rng.integers(0, cfg.vocab_size, size=cfg.length))
        if not cfg.unique_reference or len(set(ref)) == cfg.length:
            return logits, TokenSeq(ref)


def _eval_point(
    step: int,
    eval_index: int,
    logits: np.ndarray,
    ref: TokenSeq,
    cfg: ToyConfig,
    bcfg: BleuConfig,
) -> CurvePoint:
    p = softmax_rows(logits)
    lb = lb_bleu(p, ref, bcfg, smoothing=False).aggregate
    exact = bleu(argmax_decode(p), ref, bcfg).score
    mc = mc_expected_bleu(
        p,
        ref,
        bcfg,
        samples=cfg.mc_samples,
        seed=derived_seed(cfg.seed, TAG_TOY_EVAL, eval_index),
    )
    return CurvePoint(
        step=step,
        lb_aggregate=lb,
        exact_bleu_argmax=exact,
        mc_mean=mc.mean,
        mc_std_error=mc.std_error,
    )


def run_toy(cfg: ToyConfig = ToyConfig()) -> list[CurvePoint]:
    """Maximise the bound aggregate by gradient ascent; return the curve.

    The optimiser climbs the smoothed aggregate when cfg.smoothing is set,
    but the reported lb_aggregate is always the unsmoothed bound (the
    smoothed surrogate is not a lower bound on expected BLEU).
    """
    bcfg = cfg.bleu_config()
    logits, ref = gen_toy_instance(cfg)
    index = RefNGramIndex.from_ref(ref.ids, cfg.max_order)
    opt = make_optimizer(cfg.optimizer, cfg.learning_rate)
    points = [_eval_point(0, 0, logits, ref, cfg, bcfg)]
    for step in range(1, cfg.steps + 1):
        res = grad_lb_indexed(logits, index, bcfg, smoothing=cfg.smoothing)
        logits = opt.step(logits, res.grad_logits)
        if step % cfg.eval_every == 0:
            points.append(
                _eval_point(step, step // cfg.eval_every, logits, ref, cfg, bcfg)
            )
    return points


def write_curve_csv(points: Sequence[CurvePoint], fh: IO[str]) -> None:
    fh.write(CURVE_CSV_HEADER + "\n")
    for pt in points:
        fh.write(
            f"{pt.step},{pt.lb_aggregate!r},{pt.exact_bleu_argmax!r},"
            f"{pt.mc_mean!r},{pt.mc_std_error!r}\n"
        )


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson correlation; 0.0 when either side has no variance."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if len(x) < 2:
        return 0.0
    xc = x - x.mean()
    yc = y - y.mean()
    nx = math.sqrt(float(xc @ xc))
    ny = math.sqrt(float(yc @ yc))
    if nx == 0.0 or ny == 0.0:
        return 0.0
    return float(xc @ yc) / (nx * ny)


def summarize_curve(points: Sequence[CurvePoint]) -> dict:
    """Endpoint scores, bound/MC consistency, and the LB-vs-MC correlation."""
    lbs = [pt.lb_aggregate for pt in points]
    mcs = [pt.mc_mean for pt in points]
    return {
        "steps": points[-1].step,
        "eval_points": len(points),
        "initial_exact_argmax_bleu": points[0].exact_bleu_argmax,
        "final_exact_argmax_bleu": points[-1].exact_bleu_argmax,
        "initial_lb": points[0].lb_aggregate,
        "final_lb": points[-1].lb_aggregate,
        "bound_within_mc_3se": all(
            pt.lb_aggregate <= pt.mc_mean + 3.0 * pt.mc_std_error for pt in points
        ),
        "pearson_lb_mc": pearson(lbs, mcs),
    }


@dataclass(frozen=True, eq=False)
class ReinforceEstimate:
    """Score-function gradient estimate of expected BLEU.

    grad_std_error is the per-entry plug-in standard error; with the mean
    baseline it ignores the O(1/samples) correlation the baseline induces.
    """

    grad_logits: np.ndarray
    samples: int
    baseline: float
    seed: int
    grad_std_error: np.ndarray


def reinforce_grad(
    logits: np.ndarray,
    ref: TokenSeq | Sequence[int],
    cfg: BleuConfig = BleuConfig(),
    samples: int = 4096,
    baseline_mode: str = "mean",
    seed: int = 0,
) -> ReinforceEstimate:
    """Estimate d E[BLEU] / d logits by sampling candidates from softmax(logits).

    The per-sample term is (reward - baseline) * (onehot(x) - probs); with
    baseline_mode="mean" the baseline is the batch mean reward.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    if baseline_mode not in ("mean", "none"):
        raise ValueError(f"unknown baseline_mode {baseline_mode!r}")
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise NonFiniteInput("logits contain NaN or infinity")
    p = softmax_rows(logits)
    length, vocab = p.probs.shape
    ref_ids = token_ids(ref)
    ids = _sample_ids(np.cumsum(p.probs, axis=1), samples, derived_rng(seed, TAG_REINFORCE))
    rewards = score_samples(ids, ref_ids, cfg, vocab)
    baseline = float(rewards.mean()) if baseline_mode == "mean" else 0.0
    w = rewards - baseline
    w_sum = float(w.sum())
    w2 = w * w
    w2_sum = float(w2.sum())
    grad = np.empty((length, vocab))
    m2 = np.empty((length, vocab))
    for t in range(length):
        hits_w = np.bincount(ids[:, t], weights=w, minlength=vocab)
        hits_w2 = np.bincount(ids[:, t], weights=w2, minlength=vocab)
        q = p.probs[t]
        grad[t] = (hits_w - w_sum * q) / samples
        # E[w^2 (1[x=c]-q)^2] pieces: the indicator is 0/1 so its square folds.
        m2[t] = hits_w2 * (1.0 - 2.0 * q) + w2_sum * q * q
    if samples > 1:
        var = np.maximum(m2 / samples - grad**2, 0.0) * samples / (samples - 1)
        std_error = np.sqrt(var / samples)
    else:
        std_error = np.zeros_like(grad)
    return ReinforceEstimate(
        grad_logits=grad,
        samples=samples,
        baseline=baseline,
        seed=seed,
        grad_std_error=std_error,
    )


@dataclass(frozen=True, eq=False)
class ReinforceSweepEntry:
    """REINFORCE repeated at one sample count."""

    samples: int
    repeats: int
    mean_grad: np.ndarray
    entry_variance: np.ndarray
    variance_sum: float
    cosine_vs_exact: float


@dataclass(frozen=True, eq=False)
class GradComparison:
    """Bound gradient and REINFORCE vs the exact expected-BLEU gradient."""

    exact_grad: np.ndarray
    lb_grad: np.ndarray
    lb_deterministic: bool
    cosine_lb_vs_exact: float
    reinforce: tuple[ReinforceSweepEntry, ...]

    def to_dict(self) -> dict:
        return {
            "exact_grad": self.exact_grad.tolist(),
            "lb_grad": self.lb_grad.tolist(),
            "lb_deterministic": self.lb_deterministic,
            "cosine_lb_vs_exact": self.cosine_lb_vs_exact,
            "reinforce": [
                {
                    "samples": e.samples,
                    "repeats": e.repeats,
                    "mean_grad": e.mean_grad.tolist(),
                    "entry_variance": e.entry_variance.tolist(),
                    "variance_sum": e.variance_sum,
                    "cosine_vs_exact": e.cosine_vs_exact,
                }
                for e in self.reinforce
            ],
        }


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float((a * b).sum()) / (na * nb)


def exact_bleu_grad(
    logits: np.ndarray,
    ref: TokenSeq | Sequence[int],
    cfg: BleuConfig = BleuConfig(),
    step: float = 1e-5,
    cap: int | None = None,
) -> np.ndarray:
    """Central differences of the exhaustively enumerated E[BLEU]."""
    logits = np.asarray(logits, dtype=np.float64)
    length, vocab = logits.shape
    grad = np.empty_like(logits)
    for t in range(length):
        for j in range(vocab):
            bumped = logits.copy()
            bumped[t, j] += step
            hi = exhaustive_expected_bleu(softmax_rows(bumped), ref, cfg, cap).value
            bumped[t, j] -= 2.0 * step
            lo = exhaustive_expected_bleu(softmax_rows(bumped), ref, cfg, cap).value
            grad[t, j] = (hi - lo) / (2.0 * step)
    return grad


def compare_gradients(
    logits: np.ndarray,
    ref: TokenSeq | Sequence[int],
    cfg: BleuConfig = BleuConfig(),
    samples: int = 4096,
    repeats: int = 64,
    growth: tuple[int, ...] = (1, 2, 4),
    seed: int = 0,
    fd_step: float = 1e-5,
    cap: int | None = None,
) -> GradComparison:
    """Line up the three gradient routes on one enumerable instance."""
    if repeats < 2:
        raise ValueError("repeats must be at least 2 for a variance estimate")
    exact = exact_bleu_grad(logits, ref, cfg, step=fd_step, cap=cap)
    first = grad_lb(logits, ref, cfg)
    second = grad_lb(logits, ref, cfg)
    deterministic = bool(
        np.array_equal(first.grad_logits, second.grad_logits)
    )
    entries = []
    for gi, factor in enumerate(growth):
        n_samples = samples * factor
        stack = np.stack(
            [
                reinforce_grad(
                    logits,
                    ref,
                    cfg,
                    samples=n_samples,
                    seed=derived_seed(seed, TAG_REINFORCE, gi, r),
                ).grad_logits
                for r in range(repeats)
            ]
        )
        entry_var = stack.var(axis=0, ddof=1)
        entries.append(
            ReinforceSweepEntry(
                samples=n_samples,
                repeats=repeats,
                mean_grad=stack.mean(axis=0),
                entry_variance=entry_var,
                variance_sum=float(entry_var.sum()),
                cosine_vs_exact=cosine(stack.mean(axis=0), exact),
            )
        )
    return GradComparison(
        exact_grad=exact,
        lb_grad=first.grad_logits,
        lb_deterministic=deterministic,
        cosine_lb_vs_exact=cosine(first.grad_logits, exact),
        reinforce=tuple(entries),
    )
