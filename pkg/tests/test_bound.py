"""The expected-overlap lower bound: values, validity, tightness, shape."""

import numpy as np
import pytest

from bleubound.bleu import BleuConfig, bleu, count_overlap
from bleubound.bound import (
    RefNGramIndex,
    convexity_probe,
    lb_bleu,
    lb_overlap,
    lb_overlap_component,
)
from bleubound.errors import EmptyText, LengthTooShort, PositionOutOfRange
from bleubound.oracle import derived_rng, exhaustive_expected_overlap
from bleubound.text import DistMatrix, softmax_rows

UNIFORM_2X2 = DistMatrix.from_probs(np.full((2, 2), 0.5))


def random_unique_ref(rng, vocab, length):
    return tuple(int(x) for x in rng.permutation(vocab)[:length])


class TestWorkedValues:
    """Uniform 2x2 candidate against reference (0, 1), traced by hand."""

    def test_unigram_component(self):
        # a = 1/2, denominator 1 + 1 - 1/2 = 3/2, both grams clip to 2/3:
        # component = 2 * (1/2) * (2/3) / 2 per gram pair -> 2/3 total.
        got = lb_overlap_component(UNIFORM_2X2, (0, 1), 1, 0)
        assert got == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_unigram_total(self):
        assert lb_overlap(UNIFORM_2X2, (0, 1), 1) == pytest.approx(4.0 / 3.0, abs=1e-12)

    def test_components_sum_to_total(self):
        parts = [lb_overlap_component(UNIFORM_2X2, (0, 1), 1, i) for i in (0, 1)]
        assert sum(parts) == pytest.approx(lb_overlap(UNIFORM_2X2, (0, 1), 1), abs=1e-12)

    def test_bigram_component(self):
        assert lb_overlap_component(UNIFORM_2X2, (0, 1), 2, 0) == pytest.approx(
            0.25, abs=1e-12
        )

    def test_precisions_and_smoothing(self):
        res = lb_bleu(UNIFORM_2X2, (0, 1), BleuConfig(max_order=1))
        assert res.lb_precisions[0] == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert res.smoothed_precisions[0] == pytest.approx(7.0 / 9.0, abs=1e-12)
        assert res.aggregate == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert res.bound_value == pytest.approx(-1.0 / 3.0, abs=1e-12)

    def test_below_true_expectation(self):
        exact = exhaustive_expected_overlap(UNIFORM_2X2, (0, 1), 1).value
        assert lb_overlap(UNIFORM_2X2, (0, 1), 1) <= exact + 1e-12


class TestValidation:
    def test_short_candidate(self):
        with pytest.raises(LengthTooShort):
            lb_overlap(UNIFORM_2X2, (0, 1), 3)

    def test_position_range(self):
        with pytest.raises(PositionOutOfRange):
            lb_overlap_component(UNIFORM_2X2, (0, 1), 2, 1)
        with pytest.raises(PositionOutOfRange):
            lb_overlap_component(UNIFORM_2X2, (0, 1), 1, -1)

    def test_order_validation(self):
        with pytest.raises(ValueError):
            lb_overlap(UNIFORM_2X2, (0, 1), 0)

    def test_empty_inputs(self):
        with pytest.raises(EmptyText):
            lb_bleu(UNIFORM_2X2, ())
        with pytest.raises(EmptyText):
            lb_bleu(DistMatrix.from_probs(np.zeros((0, 2))), (0,))

    def test_ref_without_ngrams_of_order(self):
        # Reference shorter than n: no distinct n-grams, bound is 0.
        assert lb_overlap(UNIFORM_2X2, (0,), 2) == 0.0


class TestBoundValidity:
    def test_random_instances_below_exhaustive(self):
        rng = derived_rng(101, 0)
        for trial in range(30):
            length = int(rng.integers(1, 5))
            vocab = int(rng.integers(max(2, length), 5))
            ref = random_unique_ref(rng, vocab, length)
            p = DistMatrix.from_probs(rng.dirichlet(np.ones(vocab), size=length))
            for n in range(1, length + 1):
                lb = lb_overlap(p, ref, n)
                exact = exhaustive_expected_overlap(p, ref, n).value
                assert lb <= exact + 1e-12, (
                    f"trial {trial}: order {n} bound {lb} above exact {exact}"
                )

    def test_duplicate_reference_words_leave_proven_regime(self):
        """With repeated reference words the clipped counts can interact and
        the formula is no longer certified; the result is still finite and
        non-negative, and the flag says the guarantee is gone."""
        rng = derived_rng(102, 0)
        for _ in range(20):
            length = int(rng.integers(2, 5))
            vocab = int(rng.integers(2, 4))
            ref = tuple(int(x) for x in rng.integers(0, vocab, size=length))
            p = DistMatrix.from_probs(rng.dirichlet(np.ones(vocab), size=length))
            val = lb_overlap(p, ref, 1)
            assert np.isfinite(val) and val >= 0.0
            res = lb_bleu(p, ref, BleuConfig(max_order=1))
            assert res.unique_reference == (len(set(ref)) == len(ref))


class TestTightnessAtOneHot:
    def test_degenerate_equals_count_overlap(self):
        rng = derived_rng(103, 0)
        for trial in range(40):
            length = int(rng.integers(1, 8))
            vocab = int(rng.integers(max(2, length), 10))
            ref = random_unique_ref(rng, vocab, length)
            cand = tuple(int(x) for x in rng.integers(0, vocab, size=length))
            p = DistMatrix.degenerate(cand, vocab)
            for n in range(1, length + 1):
                lb = lb_overlap(p, ref, n)
                want = count_overlap(cand, ref, n)
                assert lb == pytest.approx(want, abs=1e-9), (
                    f"trial {trial} n={n}: {lb} != {want}"
                )

    def test_degenerate_aggregate_equals_bleu(self):
        rng = derived_rng(104, 0)
        cfg = BleuConfig(max_order=2, use_bp=False)
        for _ in range(20):
            vocab = 6
            ref = random_unique_ref(rng, vocab, 4)
            cand = tuple(int(x) for x in rng.integers(0, vocab, size=4))
            res = lb_bleu(DistMatrix.degenerate(cand, vocab), ref, cfg)
            assert res.aggregate == pytest.approx(bleu(cand, ref, cfg).score, abs=1e-9)


class TestSparsity:
    def test_matches_dense_enumeration(self):
        # Brute force over every possible n-gram; absent ones clip to zero.
        rng = derived_rng(105, 0)
        for _ in range(25):
            length = int(rng.integers(2, 5))
            vocab = int(rng.integers(2, 5))
            n = int(rng.integers(1, 3))
            if length < n:
                continue
            ref = tuple(int(x) for x in rng.integers(0, vocab, size=length))
            probs = rng.dirichlet(np.ones(vocab), size=length)
            p = DistMatrix.from_probs(probs)

            ref_counts: dict = {}
            for i in range(length - n + 1):
                g = ref[i : i + n]
                ref_counts[g] = ref_counts.get(g, 0) + 1
            rows = length - n + 1
            dense = 0.0
            import itertools

            for gram in itertools.product(range(vocab), repeat=n):
                c = ref_counts.get(gram, 0)
                if c == 0:
                    continue
                a = np.ones(rows)
                for k in range(n):
                    a *= probs[np.arange(rows) + k, gram[k]]
                total = a.sum()
                dense += float(
                    (a * np.minimum(1.0, c / (1.0 + total - a))).sum()
                )
            assert lb_overlap(p, ref, n) == pytest.approx(dense, abs=1e-12)


class TestMonotonicityInTargetMass:
    def test_component_rises_with_mass_on_single_ref_token(self):
        # References with one distinct token: the position's component is
        # linear in q[i, m], so shifting mass onto m can only help.
        rng = derived_rng(106, 0)
        for trial in range(100):
            length = int(rng.integers(2, 6))
            vocab = int(rng.integers(2, 7))
            m = int(rng.integers(0, vocab))
            ref = (m,) * length
            q = rng.dirichlet(np.ones(vocab), size=length)
            i = int(rng.integers(0, length))
            delta = float(rng.uniform(0.0, 1.0 - q[i, m]))
            q2 = q.copy()
            q2[i] *= (1.0 - q[i, m] - delta) / (1.0 - q[i, m])
            q2[i, m] = q[i, m] + delta
            before = lb_overlap_component(DistMatrix.from_probs(q), ref, 1, i)
            after = lb_overlap_component(DistMatrix.from_probs(q2), ref, 1, i)
            assert after >= before - 1e-12, f"trial {trial}: {after} < {before}"


class TestAggregate:
    def test_range(self):
        rng = derived_rng(107, 0)
        for _ in range(50):
            length = int(rng.integers(1, 7))
            vocab = int(rng.integers(2, 8))
            ref = tuple(int(x) for x in rng.integers(0, vocab, size=length))
            p = softmax_rows(rng.standard_normal((length, vocab)))
            res = lb_bleu(p, ref, BleuConfig(max_order=min(3, length)))
            assert 0.0 <= res.aggregate <= 1.0 + 1e-12
            assert -1.0 - 1e-12 <= res.bound_value <= 1e-12

    def test_smoothing_formula(self):
        rng = derived_rng(108, 0)
        for _ in range(30):
            length = int(rng.integers(2, 7))
            vocab = 5
            ref = tuple(int(x) for x in rng.integers(0, vocab, size=length))
            p = softmax_rows(rng.standard_normal((length, vocab)))
            res = lb_bleu(p, ref, BleuConfig(max_order=2), smoothing=True)
            for n in res.orders:
                lb_n = res.lb_overlaps[n - 1]
                want = (lb_n + 1.0) / (length - n + 2.0)
                assert res.smoothed_precisions[n - 1] == pytest.approx(want, abs=1e-12)

    def test_short_candidate_skips_orders(self):
        p = softmax_rows(np.zeros((1, 3)))
        res = lb_bleu(p, (0, 1), BleuConfig(max_order=3))
        assert res.orders == (1,)
        assert res.lb_overlaps[1] == 0.0 and res.lb_overlaps[2] == 0.0
        assert res.aggregate == pytest.approx(res.lb_precisions[0], abs=1e-12)

    def test_strict_short_raises(self):
        p = softmax_rows(np.zeros((1, 3)))
        with pytest.raises(LengthTooShort):
            lb_bleu(p, (0, 1), BleuConfig(max_order=3, strict_short=True))

    def test_to_dict_schema(self):
        d = lb_bleu(UNIFORM_2X2, (0, 1), BleuConfig(max_order=1)).to_dict()
        assert set(d) == {
            "lb_overlaps",
            "lb_precisions",
            "smoothed",
            "aggregate",
            "bound_value",
        }

    def test_smoothed_aggregate_uses_smoothed_precisions(self):
        raw = lb_bleu(UNIFORM_2X2, (0, 1), BleuConfig(max_order=1), smoothing=False)
        smoothed = lb_bleu(UNIFORM_2X2, (0, 1), BleuConfig(max_order=1), smoothing=True)
        assert smoothed.aggregate == pytest.approx(7.0 / 9.0, abs=1e-12)
        assert raw.aggregate == pytest.approx(2.0 / 3.0, abs=1e-12)


class TestRefNGramIndex:
    def test_distinct_grams_and_counts(self):
        idx = RefNGramIndex.from_ref((0, 1, 0, 1), 2)
        order1 = idx.order(1)
        assert order1.grams == ((0,), (1,))
        np.testing.assert_array_equal(order1.counts, [2, 2])
        order2 = idx.order(2)
        assert order2.grams == ((0, 1), (1, 0))
        np.testing.assert_array_equal(order2.counts, [2, 1])

    def test_unique_words_flag(self):
        assert RefNGramIndex.from_ref((0, 1, 2), 1).unique_words
        assert not RefNGramIndex.from_ref((0, 1, 0), 1).unique_words

    def test_empty_ref(self):
        with pytest.raises(EmptyText):
            RefNGramIndex.from_ref((), 1)


class TestConvexityProbe:
    def test_worked_example(self):
        lhs, rhs = convexity_probe(1.0, 0.0, [1.0], [0.0], [1.0], 0.5)
        assert lhs == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert rhs == pytest.approx(0.75, abs=1e-12)
        assert lhs <= rhs

    def test_random_draws_stay_convex(self):
        # a <= 1 + b keeps the clip's kink at the domain boundary, which is
        # the regime unique references produce (count 1, denominator >= 1).
        rng = derived_rng(109, 0)
        for trial in range(500):
            d = int(rng.integers(1, 6))
            b = float(rng.uniform(0.0, 2.0))
            a = float(rng.uniform(0.05, 1.0 + b))
            c = rng.uniform(0.0, 2.0, size=d)
            x = rng.uniform(0.0, 1.0, size=d)
            y = rng.uniform(0.0, 1.0, size=d)
            alpha = float(rng.uniform(0.0, 1.0))
            lhs, rhs = convexity_probe(a, b, c, x, y, alpha)
            assert lhs <= rhs + 1e-12, f"trial {trial}: {lhs} > {rhs}"

    def test_interior_kink_breaks_convexity(self):
        # With a > 1 + b the flat branch reaches into the domain and the
        # midpoint can sit above the chord; duplicate-count regimes lose
        # the Jensen step for exactly this reason.
        lhs, rhs = convexity_probe(2.0, 0.0, [2.0], [0.0], [1.0], 0.5)
        assert lhs == pytest.approx(1.0, abs=1e-12)
        assert rhs == pytest.approx(5.0 / 6.0, abs=1e-12)
        assert lhs > rhs

    def test_validation(self):
        with pytest.raises(ValueError):
            convexity_probe(1.0, 0.0, [1.0], [0.0], [1.0, 2.0], 0.5)
        with pytest.raises(ValueError):
            convexity_probe(1.0, 0.0, [1.0], [0.0], [1.0], 1.5)
