import itertools
import math
from functools import lru_cache

import numpy as np
import pytest

from ctcfuse import ctc
from ctcfuse.decode import (
    Hypothesis,
    Lexicon,
    edit_distance_metrics,
    greedy_decode,
    pooled_metrics,
    prefix_beam_search,
    uniform_unigram,
)
from ctcfuse.errors import EmptyReference


def random_posteriors(rng, T, K):
    y = rng.uniform(0.05, 1.0, size=(T, K + 1))
    return y / y.sum(axis=1, keepdims=True)


def exhaustive_best_path(y):
    """Oracle: argmax over every frame labeling, collapsed."""
    T, K1 = y.shape
    best, best_p = None, -1.0
    for path in itertools.product(range(K1), repeat=T):
        p = 1.0
        for t, lab in enumerate(path):
            p *= y[t, lab]
        if p > best_p:
            best, best_p = path, p
    return ctc.collapse(best)


def exhaustive_prefix_marginals(y):
    """Oracle: total probability of every collapsed sequence."""
    T, K1 = y.shape
    marginals = {}
    for path in itertools.product(range(K1), repeat=T):
        p = 1.0
        for t, lab in enumerate(path):
            p *= y[t, lab]
        key = ctc.collapse(path)
        marginals[key] = marginals.get(key, 0.0) + p
    return marginals


class TestGreedy:
    def test_collapse_of_argmax(self):
        y = np.zeros((5, 4))
        for t, lab in enumerate([0, 1, 1, 0, 3]):
            y[t, lab] = 0.7
        y += 0.1
        y /= y.sum(axis=1, keepdims=True)
        assert greedy_decode(y) == (1, 3)

    def test_all_blank(self):
        y = np.full((4, 3), 0.1)
        y[:, 0] = 0.8
        assert greedy_decode(y) == ()

    def test_matches_exhaustive_best_path(self):
        rng = np.random.default_rng(31)
        for _ in range(30):
            T = int(rng.integers(1, 7))
            K = int(rng.integers(1, 4))
            y = random_posteriors(rng, T, K)
            assert greedy_decode(y) == exhaustive_best_path(y)


class TestPrefixBeam:
    def test_degenerate_single_path(self):
        y = np.zeros((4, 3))
        path = [0, 1, 1, 2]
        for t, lab in enumerate(path):
            y[t, lab] = 1.0
        hyps = prefix_beam_search(y, beam_width=4)
        assert hyps[0].tokens == (1, 2)
        assert hyps[0].score == pytest.approx(0.0, abs=1e-12)

    def test_saturated_beam_matches_exhaustive_marginals(self):
        rng = np.random.default_rng(32)
        for _ in range(12):
            T = int(rng.integers(1, 7))
            K = int(rng.integers(1, 4))
            y = random_posteriors(rng, T, K)
            hyps = prefix_beam_search(y, beam_width=(K + 1) ** T + 8)
            marg = exhaustive_prefix_marginals(y)
            expect_seq, expect_p = max(marg.items(), key=lambda kv: (kv[1], kv[0]))
            best = max(marg.values())
            ties = [k for k, v in marg.items() if abs(v - best) < 1e-15]
            expect_seq = min(ties)
            assert hyps[0].tokens == expect_seq
            assert hyps[0].score == pytest.approx(math.log(marg[expect_seq]), rel=1e-9)

    def test_top_hypothesis_beats_greedy_path_score(self):
        rng = np.random.default_rng(37)
        for _ in range(15):
            T = int(rng.integers(2, 7))
            K = int(rng.integers(1, 4))
            y = random_posteriors(rng, T, K)
            greedy_path = tuple(int(i) for i in np.argmax(y, axis=1))
            greedy_score = math.log(ctc.path_probability(y, greedy_path))
            top = prefix_beam_search(y, beam_width=8)[0]
            assert top.score >= greedy_score - 1e-12

    def test_beam_width_monotonicity(self):
        rng = np.random.default_rng(33)
        y = random_posteriors(rng, 8, 3)
        prev = -np.inf
        for width in (1, 2, 4, 8, 16, 32, 64):
            score = prefix_beam_search(y, beam_width=width)[0].score
            assert score >= prev - 1e-12
            prev = score

    def test_beam_one_matches_greedy_on_dominant_paths(self):
        rng = np.random.default_rng(34)
        for _ in range(10):
            T, K = 6, 3
            y = np.full((T, K + 1), 0.02)
            for t in range(T):
                y[t, int(rng.integers(0, K + 1))] = 1.0
            y /= y.sum(axis=1, keepdims=True)
            hyp = prefix_beam_search(y, beam_width=1)[0]
            assert hyp.tokens == greedy_decode(y)

    def test_word_mode_with_lexicon(self):
        lex = Lexicon({"ab": [(1, 2)], "c": [(3,)]})
        # frames spell a b c -> words "ab" "c"
        y = np.zeros((5, 4))
        for t, lab in enumerate([1, 2, 0, 3, 3]):
            y[t, lab] = 1.0
        hyps = prefix_beam_search(y, beam_width=8, lexicon=lex)
        assert hyps[0].tokens == ("ab", "c")

    def test_word_mode_lm_reranks(self):
        lex = Lexicon({"u": [(1,)], "v": [(2,)]})
        y = np.array(
            [
                [0.02, 0.49, 0.47, 0.02],
                [0.96, 0.02, 0.01, 0.01],
            ]
        )
        no_lm = prefix_beam_search(y, beam_width=8, lexicon=lex)
        assert no_lm[0].tokens == ("u",)
        lm = uniform_unigram(["u", "v"])
        lm.ngrams[("u",)] = (-3.0, None)  # make "u" expensive
        lm.ngrams[("v",)] = (-0.1, None)
        with_lm = prefix_beam_search(y, beam_width=8, lexicon=lex, lm=lm, lm_weight=1.0)
        assert with_lm[0].tokens == ("v",)


class TestEditMetrics:
    def test_equal(self):
        m = edit_distance_metrics(["the", "speech"], ["the", "speech"])
        assert m.errors == 0 and m.error_rate == 0.0 and m.accuracy == 100.0

    def test_single_substitution(self):
        m = edit_distance_metrics(["the", "speech"], ["the", "peach"])
        assert (m.substitutions, m.deletions, m.insertions) == (1, 0, 0)
        assert m.error_rate == pytest.approx(0.5)

    def test_insertion_makes_negative_accuracy(self):
        m = edit_distance_metrics(["a"], ["b", "c", "d"])
        assert m.accuracy < 0

    def test_empty_reference(self):
        with pytest.raises(EmptyReference):
            edit_distance_metrics([], ["x"])

    def test_matches_recursive_oracle(self):
        def oracle(ref, hyp):
            @lru_cache(maxsize=None)
            def go(i, j):
                if i == 0:
                    return (0, 0, j)  # j insertions
                if j == 0:
                    return (0, i, 0)  # i deletions
                cands = []
                s, d, ins = go(i - 1, j - 1)
                cands.append((s + (ref[i - 1] != hyp[j - 1]), d, ins))
                s, d, ins = go(i - 1, j)
                cands.append((s, d + 1, ins))
                s, d, ins = go(i, j - 1)
                cands.append((s, d, ins + 1))
                return min(cands, key=lambda c: sum(c))

            return go(len(ref), len(hyp))

        rng = np.random.default_rng(35)
        for _ in range(60):
            ref = [int(x) for x in rng.integers(0, 4, size=rng.integers(1, 9))]
            hyp = [int(x) for x in rng.integers(0, 4, size=rng.integers(0, 9))]
            m = edit_distance_metrics(ref, hyp)
            assert m.errors == sum(oracle(tuple(ref), tuple(hyp)))

    def test_distance_symmetry_and_triangle(self):
        rng = np.random.default_rng(36)

        def dist(a, b):
            if not a:
                return len(b)
            return edit_distance_metrics(a, b).errors

        for _ in range(40):
            seqs = [
                [int(x) for x in rng.integers(0, 3, size=rng.integers(1, 7))] for _ in range(3)
            ]
            a, b, c = seqs
            assert dist(a, b) == dist(b, a)
            assert dist(a, c) <= dist(a, b) + dist(b, c)

    def test_pooled_uses_corpus_totals(self):
        pairs = [((1, 2), (1, 3)), ((1,), (1, 2, 3))]
        pooled = pooled_metrics(pairs)
        assert pooled.length == 3
        assert pooled.errors == 3  # 1 sub + 2 ins
        assert pooled.error_rate == pytest.approx(1.0)
