"""Differentiable lower bound for expected BLEU under per-position softmax.

The package splits into exact scoring (`bleu`), sampling and enumeration
oracles (`oracle`), the bound and its closed-form gradient (`bound`,
`gradients`), and a synthetic optimisation task (`training`).
"""

from .bleu import (
    BleuBreakdown,
    BleuConfig,
    NGramStats,
    bleu,
    brevity_penalty,
    corpus_bleu,
    count_overlap,
    ngram_stats,
    overlap_matrix_form,
)
from .bound import (
    LbResult,
    RefNGramIndex,
    convexity_probe,
    lb_bleu,
    lb_overlap,
    lb_overlap_component,
)
from .errors import (
    BleuBoundError,
    EmptyCorpus,
    EmptyText,
    IdOutOfRange,
    InstanceTooLarge,
    LengthTooShort,
    NonFiniteInput,
    PositionOutOfRange,
    ShapeMismatch,
    UnknownToken,
    ZeroLength,
)
from .gradients import (
    FdReport,
    GradResult,
    finite_diff_check,
    grad_lb,
    gradcheck_suite,
    sample_check_instance,
)
from .oracle import (
    DEFAULT_ENUM_CAP,
    ExactExpectation,
    McEstimate,
    derived_rng,
    derived_seed,
    exhaustive_expected_bleu,
    exhaustive_expected_overlap,
    make_rng,
    mc_expected_bleu,
    sample_candidate,
    score_samples,
)
from .text import (
    DistMatrix,
    OneHotSeq,
    TokenSeq,
    Vocab,
    argmax_decode,
    build_vocab,
    decode,
    encode,
    softmax_rows,
    to_onehot,
)
from .training import (
    Adam,
    CurvePoint,
    GradComparison,
    ReinforceEstimate,
    Sgd,
    ToyConfig,
    compare_gradients,
    gen_toy_instance,
    reinforce_grad,
    run_toy,
    summarize_curve,
    write_curve_csv,
)

__version__ = "0.1.0"
