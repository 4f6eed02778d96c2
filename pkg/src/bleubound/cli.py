"""Command line front end.

Subcommands: bleu, lb, expected, gradcheck, toy, compare-grad.  Exit codes:
0 success, 1 failed check (gradcheck below threshold), 2 usage or shape
errors, 3 unreadable input files, 4 instance too large to enumerate.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

import numpy as np

from .bleu import BleuConfig, bleu, corpus_bleu
from .bound import lb_bleu
from .errors import BleuBoundError, InstanceTooLarge, ShapeMismatch
from .gradients import gradcheck_suite
from .oracle import (
    ExactExpectation,
    exhaustive_expected_bleu,
    exhaustive_expected_overlap,
    mc_expected_bleu,
)
from .text import DistMatrix, Vocab, build_vocab, encode, softmax_rows
from .training import (
    ToyConfig,
    compare_gradients,
    gen_toy_instance,
    run_toy,
    summarize_curve,
    write_curve_csv,
)

GRADCHECK_THRESHOLD = 1e-4


class InputFileError(Exception):
    """A file argument could not be read or parsed; maps to exit 3."""


def _read_lines(path: str) -> list[str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise InputFileError(f"{path}: {exc}") from exc


def _read_sentences(path: str) -> list[str]:
    lines = [ln for ln in _read_lines(path) if ln.strip()]
    if not lines:
        raise ShapeMismatch(f"{path}: no sentences found")
    return lines


def _read_single_sentence(path: str) -> str:
    lines = _read_sentences(path)
    if len(lines) != 1:
        raise ShapeMismatch(f"{path}: expected exactly one sentence, got {len(lines)}")
    return lines[0]


def _read_vocab(path: str) -> Vocab:
    tokens = [ln.strip() for ln in _read_lines(path) if ln.strip()]
    if not tokens:
        raise ShapeMismatch(f"{path}: empty vocabulary file")
    return Vocab(tuple(tokens))


def _read_logits(path: str, header: bool) -> np.ndarray:
    try:
        arr = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    except OSError as exc:
        raise InputFileError(f"{path}: {exc}") from exc
    except ValueError as exc:
        raise InputFileError(f"{path}: cannot parse as CSV of numbers ({exc})") from exc
    return arr.astype(np.float64)


def _parse_weights(text: str | None, max_order: int) -> tuple[float, ...] | None:
    if text is None:
        return None
    try:
        w = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ValueError(f"cannot parse weights {text!r}") from None
    if len(w) != max_order:
        raise ValueError(f"got {len(w)} weights for max_order {max_order}")
    return w


def _bleu_config(args: argparse.Namespace, use_bp: bool) -> BleuConfig:
    return BleuConfig(
        max_order=args.max_order,
        weights=_parse_weights(args.weights, args.max_order),
        use_bp=use_bp,
    )


def _open_output(args: argparse.Namespace):
    if args.output:
        return open(args.output, "w", encoding="utf-8")
    return None


def _emit(payload: dict, args: argparse.Namespace) -> None:
    """Write one flat-ish result dict as JSON or key,value CSV."""
    if getattr(args, "format", "json") == "csv":
        lines = []
        for key, val in payload.items():
            if isinstance(val, (list, tuple)):
                val = ";".join(repr(v) for v in val)
            lines.append(f"{key},{val}")
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(payload, indent=2) + "\n"
    out = _open_output(args)
    if out is None:
        sys.stdout.write(text)
    else:
        with out:
            out.write(text)


def _add_common(parser: argparse.ArgumentParser, max_order_default: int = 4) -> None:
    parser.add_argument(
        "--max-order", type=int, default=max_order_default, help="highest n-gram order"
    )
    parser.add_argument(
        "--weights",
        type=str,
        default=None,
        help="comma separated per-order weights summing to 1 (default uniform)",
    )
    parser.add_argument("--seed", type=int, default=0, help="RNG seed (never wall clock)")
    parser.add_argument(
        "--threads",
        type=int,
        default=max(os.cpu_count() or 1, 1),
        help="thread budget; results never depend on it (single-instance "
        "commands run sequentially)",
    )
    parser.add_argument("--output", type=str, default=None, help="write result here")
    parser.add_argument(
        "--format", choices=("json", "csv"), default="json", help="output encoding"
    )


def _logits_and_ref(args: argparse.Namespace):
    ref_line = _read_single_sentence(args.ref)
    vocab = _read_vocab(args.vocab) if args.vocab else build_vocab([ref_line])
    ref = encode(ref_line, vocab)
    logits = _read_logits(args.logits, args.header)
    if logits.shape[1] != vocab.size:
        raise ShapeMismatch(
            f"logits have {logits.shape[1]} columns but the vocabulary has "
            f"{vocab.size} tokens"
        )
    return logits, ref, vocab


def _cmd_bleu(args: argparse.Namespace) -> int:
    cand_lines = _read_sentences(args.cand)
    ref_lines = _read_sentences(args.ref)
    if len(cand_lines) != len(ref_lines):
        raise ShapeMismatch(
            f"{len(cand_lines)} candidates vs {len(ref_lines)} references"
        )
    vocab = build_vocab(cand_lines + ref_lines)
    cfg = _bleu_config(args, use_bp=not args.no_bp)
    pairs = [
        (encode(c, vocab), encode(r, vocab)) for c, r in zip(cand_lines, ref_lines)
    ]
    breakdowns = [bleu(c, r, cfg) for c, r in pairs]
    corpus = corpus_bleu(pairs, cfg)
    out = _open_output(args)
    fh = out if out is not None else sys.stdout
    try:
        if args.format == "csv":
            orders = range(1, cfg.max_order + 1)
            header = ["pair", "score", "bp", "cand_len", "ref_len"]
            header += [f"p{n}" for n in orders] + [f"o{n}" for n in orders]
            fh.write(",".join(header) + "\n")
            for i, b in enumerate(breakdowns + [corpus]):
                label = str(i) if i < len(breakdowns) else "corpus"
                row = [label, repr(b.score), repr(b.bp), str(b.cand_len), str(b.ref_len)]
                row += [repr(p) for p in b.precisions]
                row += [repr(o) for o in b.overlaps]
                fh.write(",".join(row) + "\n")
        else:
            for b in breakdowns:
                fh.write(json.dumps(b.to_dict()) + "\n")
            fh.write(json.dumps({"corpus": corpus.to_dict()}) + "\n")
    finally:
        if out is not None:
            out.close()
    return 0


def _cmd_lb(args: argparse.Namespace) -> int:
    logits, ref, _ = _logits_and_ref(args)
    cfg = _bleu_config(args, use_bp=False)
    result = lb_bleu(softmax_rows(logits), ref, cfg, smoothing=args.smoothing)
    _emit(result.to_dict(), args)
    return 0


def _cmd_expected(args: argparse.Namespace) -> int:
    logits, ref, _ = _logits_and_ref(args)
    cfg = _bleu_config(args, use_bp=args.with_bp)
    p = softmax_rows(logits)
    if args.order is not None:
        if args.mode != "exhaustive":
            raise ValueError("--order requires --mode exhaustive")
        est = exhaustive_expected_overlap(p, ref, args.order)
        if args.precision:
            denom = p.length - args.order + 1
            if denom < 1:
                raise ValueError(
                    f"no order-{args.order} windows in a length-{p.length} candidate"
                )
            est = ExactExpectation(
                value=est.value / denom,
                outcomes_enumerated=est.outcomes_enumerated,
            )
        _emit(est.to_dict(), args)
    elif args.mode == "exhaustive":
        est = exhaustive_expected_bleu(p, ref, cfg)
        _emit(est.to_dict(), args)
    else:
        est = mc_expected_bleu(p, ref, cfg, samples=args.samples, seed=args.seed)
        _emit(est.to_dict(), args)
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    report = gradcheck_suite(
        instances=args.instances,
        step=args.step,
        seed=args.seed,
        smoothing=args.smoothing,
        corrupt_first_entry=args.corrupt,
        max_len=args.max_len,
        max_vocab=args.max_vocab,
        max_order=args.max_order,
    )
    _emit(report.to_dict(), args)
    return 0 if report.max_rel_error < GRADCHECK_THRESHOLD else 1


def _cmd_toy(args: argparse.Namespace) -> int:
    cfg = ToyConfig(
        length=args.len,
        vocab_size=args.vocab_size,
        max_order=args.max_order,
        weights=_parse_weights(args.weights, args.max_order),
        learning_rate=args.lr,
        optimizer=args.optimizer,
        steps=args.steps,
        eval_every=args.eval_every,
        mc_samples=args.samples,
        smoothing=not args.no_smoothing,
        seed=args.seed,
    )
    points = run_toy(cfg)
    summary = summarize_curve(points)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            write_curve_csv(points, fh)
        plot_path = args.plot
        if plot_path is None and not args.no_plot:
            plot_path = os.path.splitext(args.output)[0] + ".png"
        if plot_path:
            from .plotting import render_curve_figure

            render_curve_figure(points, plot_path, title=f"toy run, seed {cfg.seed}")
            summary["figure"] = plot_path
        summary["curve_csv"] = args.output
        sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    else:
        write_curve_csv(points, sys.stdout)
        if args.plot:
            from .plotting import render_curve_figure

            render_curve_figure(points, args.plot, title=f"toy run, seed {cfg.seed}")
            summary["figure"] = args.plot
        sys.stderr.write(json.dumps(summary, indent=2) + "\n")
    return 0


def _cmd_compare_grad(args: argparse.Namespace) -> int:
    toy = ToyConfig(
        length=args.len,
        vocab_size=args.vocab_size,
        max_order=args.max_order,
        weights=_parse_weights(args.weights, args.max_order),
        seed=args.seed,
        unique_reference=args.len <= args.vocab_size,
    )
    logits, ref = gen_toy_instance(toy)
    cfg = BleuConfig(
        max_order=args.max_order,
        weights=_parse_weights(args.weights, args.max_order),
        use_bp=not args.no_bp,
    )
    comparison = compare_gradients(
        logits,
        ref,
        cfg,
        samples=args.samples,
        repeats=args.repeats,
        seed=args.seed,
    )
    if args.plot:
        from .plotting import render_compare_figure

        render_compare_figure(comparison, args.plot)
    _emit(comparison.to_dict(), args)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bleubound",
        description="Expected-BLEU lower bound: scoring, oracles, gradients",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_bleu = sub.add_parser("bleu", help="exact BLEU for aligned corpus files")
    p_bleu.add_argument("cand", help="candidate sentences, one per line")
    p_bleu.add_argument("ref", help="reference sentences, one per line")
    p_bleu.add_argument("--no-bp", action="store_true", help="drop the brevity penalty")
    _add_common(p_bleu)
    p_bleu.set_defaults(func=_cmd_bleu)

    p_lb = sub.add_parser("lb", help="lower bound for a logits file")
    p_lb.add_argument("logits", help="CSV of logits, one row per position")
    p_lb.add_argument("ref", help="file holding the single reference sentence")
    p_lb.add_argument("--vocab", default=None, help="vocabulary file, one token per line")
    p_lb.add_argument(
        "--header", action="store_true", help="logits CSV starts with a header row"
    )
    p_lb.add_argument(
        "--smoothing", action="store_true", help="use (LB+1)/(len-n+2) precisions"
    )
    _add_common(p_lb)
    p_lb.set_defaults(func=_cmd_lb)

    p_exp = sub.add_parser("expected", help="expected BLEU under a logits file")
    p_exp.add_argument("logits", help="CSV of logits, one row per position")
    p_exp.add_argument("ref", help="file holding the single reference sentence")
    p_exp.add_argument("--vocab", default=None, help="vocabulary file")
    p_exp.add_argument("--header", action="store_true", help="skip a logits header row")
    p_exp.add_argument(
        "--mode", choices=("mc", "exhaustive"), default="mc", help="estimator"
    )
    p_exp.add_argument(
        "--samples", type=int, default=10_000, help="Monte-Carlo sample count"
    )
    p_exp.add_argument(
        "--with-bp",
        action="store_true",
        help="include the brevity penalty (off by default for the oracle)",
    )
    p_exp.add_argument(
        "--order",
        type=int,
        default=None,
        help="report the expected order-n overlap instead of BLEU (exhaustive only)",
    )
    p_exp.add_argument(
        "--precision",
        action="store_true",
        help="divide the --order overlap by len-n+1",
    )
    _add_common(p_exp)
    p_exp.set_defaults(func=_cmd_expected)

    p_gc = sub.add_parser("gradcheck", help="finite-difference gradient audit")
    p_gc.add_argument("--instances", type=int, default=100, help="random instances")
    p_gc.add_argument("--step", type=float, default=1e-5, help="central difference step")
    p_gc.add_argument("--smoothing", action="store_true", help="check smoothed objective")
    p_gc.add_argument(
        "--corrupt",
        type=float,
        default=0.0,
        help="self-test: add this to one analytic entry, should force exit 1",
    )
    p_gc.add_argument("--max-len", type=int, default=6, help="max candidate length")
    p_gc.add_argument("--max-vocab", type=int, default=8, help="max vocabulary size")
    _add_common(p_gc)
    p_gc.set_defaults(func=_cmd_gradcheck)

    p_toy = sub.add_parser("toy", help="optimise the bound on a synthetic instance")
    p_toy.add_argument("--len", type=int, default=10, help="sequence length")
    p_toy.add_argument("--vocab-size", type=int, default=10_000, help="vocabulary size")
    p_toy.add_argument("--lr", type=float, default=1e-4, help="learning rate")
    p_toy.add_argument(
        "--optimizer", choices=("adam", "sgd"), default="adam", help="update rule"
    )
    p_toy.add_argument("--steps", type=int, default=12_000, help="gradient steps")
    p_toy.add_argument("--eval-every", type=int, default=1_200, help="evaluation period")
    p_toy.add_argument(
        "--samples", type=int, default=262_144, help="MC samples per evaluation"
    )
    p_toy.add_argument(
        "--no-smoothing", action="store_true", help="optimise the raw bound"
    )
    p_toy.add_argument("--plot", default=None, help="write the curve figure here")
    p_toy.add_argument(
        "--no-plot", action="store_true", help="skip the figure even with --output"
    )
    _add_common(p_toy, max_order_default=1)
    p_toy.set_defaults(func=_cmd_toy)

    p_cg = sub.add_parser(
        "compare-grad", help="bound and REINFORCE gradients vs the exact one"
    )
    p_cg.add_argument("--len", type=int, default=2, help="sequence length")
    p_cg.add_argument("--vocab-size", type=int, default=2, help="vocabulary size")
    p_cg.add_argument("--samples", type=int, default=4096, help="REINFORCE samples")
    p_cg.add_argument("--repeats", type=int, default=64, help="repeats per sample count")
    p_cg.add_argument("--no-bp", action="store_true", help="drop the brevity penalty")
    p_cg.add_argument("--plot", default=None, help="write the variance figure here")
    _add_common(p_cg, max_order_default=2)
    p_cg.set_defaults(func=_cmd_compare_grad)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be positive")
    try:
        return args.func(args)
    except InstanceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except InputFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (BleuBoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
