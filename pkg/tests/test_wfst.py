import itertools
import math

import numpy as np
import pytest

from ctcfuse import ctc
from ctcfuse.decode import (
    DecodeGraph,
    Lexicon,
    NGramModel,
    build_grammar_fst,
    build_lexicon_fst,
    build_token_fst,
    compose,
    read_arpa,
    sentence_logprob,
    transduce,
    viterbi_decode,
    write_arpa,
)
from ctcfuse.errors import AlphabetMismatch, NoPathFound, ParseError
from ctcfuse.units import LabelAlphabet

LN10 = math.log(10.0)
AB3 = LabelAlphabet(("a", "b", "c"))

# Consistency: every gram's context exists, and explicit entries always beat
# their backoff route, so shortest-path scores match direct backoff scoring.
TOY_ARPA = """\
\\data\\
ngram 1=5
ngram 2=6
ngram 3=3

\\1-grams:
-99\t<s>\t-0.2
-0.55\tx\t-0.2
-0.55\ty\t-0.2
-0.8\tz\t-0.2
-0.8\t</s>

\\2-grams:
-0.3\t<s> x\t-0.2
-0.25\tx y\t-0.2
-0.3\ty z\t-0.1
-0.2\tz </s>
-0.5\ty x\t-0.1
-0.6\tx </s>

\\3-grams:
-0.15\t<s> x y
-0.2\tx y z
-0.2\ty x y

\\end\\
"""


@pytest.fixture
def toy_lm(tmp_path):
    path = tmp_path / "toy.arpa"
    path.write_text(TOY_ARPA)
    return read_arpa(path)


class TestArpa:
    def test_roundtrip(self, toy_lm, tmp_path):
        out = tmp_path / "copy.arpa"
        write_arpa(out, toy_lm)
        again = read_arpa(out)
        assert again.order == 3
        assert again.ngrams == toy_lm.ngrams

    def test_backoff_scoring(self, toy_lm):
        # p(z | x) falls back: bow(x) + p(z) = -0.2 + -0.8
        from ctcfuse.decode import word_logprob

        assert word_logprob(toy_lm, ("x",), "z") == pytest.approx(-1.0)
        assert word_logprob(toy_lm, ("<s>", "x"), "y") == pytest.approx(-0.15)

    def test_declared_count_mismatch(self, tmp_path):
        bad = tmp_path / "bad.arpa"
        bad.write_text("\\data\\\nngram 1=3\n\n\\1-grams:\n-0.1\ta\n\n\\end\\\n")
        with pytest.raises(ParseError):
            read_arpa(bad)

    def test_vocabulary(self, toy_lm):
        assert {"x", "y", "z"} <= toy_lm.vocabulary


class TestTokenFst:
    def test_accepts_blank_bounded_run(self):
        g = build_token_fst(AB3)
        hyp = transduce(g, [0, 1, 1, 0])
        assert hyp is not None and hyp.tokens == (1,)

    def test_total_on_random_strings(self):
        g = build_token_fst(AB3)
        rng = np.random.default_rng(40)
        for _ in range(1000):
            T = int(rng.integers(1, 11))
            labels = [int(x) for x in rng.integers(0, 4, size=T)]
            hyp = transduce(g, labels)
            assert hyp is not None
            assert hyp.tokens == ctc.collapse(labels)


class TestLexiconFile:
    def test_roundtrip(self, tmp_path):
        from ctcfuse.decode import read_lexicon, write_lexicon

        lex = Lexicon({"ab": [(1, 2)], "ca": [(3, 1), (3, 2)]}, AB3)
        path = tmp_path / "lex.txt"
        write_lexicon(path, lex)
        assert path.read_text() == "ab a b\nca c a\nca c b\n"
        back = read_lexicon(path, AB3)
        assert back.entries == lex.entries

    def test_unknown_unit(self, tmp_path):
        from ctcfuse.decode import read_lexicon

        path = tmp_path / "lex.txt"
        path.write_text("word a q\n")
        with pytest.raises(ParseError, match="lex.txt:1"):
            read_lexicon(path, AB3)


class TestLexiconFst:
    def test_single_word(self):
        lex = Lexicon({"a": [(1,)]})
        g = build_lexicon_fst(lex)
        assert transduce(g, [1]).tokens == ("a",)

    def test_word_sequence(self):
        lex = Lexicon({"ab": [(1, 2)], "c": [(3,)]})
        g = build_lexicon_fst(lex)
        assert transduce(g, [1, 2, 3]).tokens == ("ab", "c")
        assert transduce(g, [1]) is None  # partial pronunciation rejected

    def test_composed_with_token_matches_collapse_lookup(self):
        lex = Lexicon({"p": [(1,)], "q": [(2, 1)]})
        tl = compose(build_token_fst(AB3), build_lexicon_fst(lex))
        rng = np.random.default_rng(41)

        def parse(units):
            # oracle: all segmentations of the unit string into pronunciations
            if units == ():
                return [()]
            out = []
            for word, prons in lex.entries.items():
                for p in prons:
                    if units[: len(p)] == p:
                        out.extend([(word,) + rest for rest in parse(units[len(p) :])])
            return out

        hits = 0
        for _ in range(300):
            labels = [int(x) for x in rng.integers(0, 3, size=rng.integers(1, 8))]
            hyp = transduce(tl, labels)
            parses = parse(ctc.collapse(labels))
            if hyp is None:
                assert parses == []
            else:
                assert hyp.tokens in parses
                hits += 1
        assert hits > 20


class TestGrammarFst:
    def test_unit_probability_word_gets_zero_weight(self):
        lm = NGramModel(order=1, ngrams={("a",): (0.0, None), ("</s>",): (-0.1, None)})
        g = build_grammar_fst(lm)
        weights = [a.weight for row in g.arcs for a in row if a.ilabel == "a"]
        assert weights == [0.0]

    def test_matches_direct_scoring_on_random_sentences(self, toy_lm):
        g = build_grammar_fst(toy_lm)
        rng = np.random.default_rng(42)
        vocab = ["x", "y", "z"]
        for _ in range(100):
            sent = [vocab[int(i)] for i in rng.integers(0, 3, size=rng.integers(1, 5))]
            hyp = transduce(g, sent)
            expected = LN10 * sentence_logprob(toy_lm, sent)
            assert hyp is not None
            assert hyp.score == pytest.approx(expected, rel=1e-9, abs=1e-9)

    def test_drops_words_missing_from_lexicon(self, toy_lm, caplog):
        g = build_grammar_fst(toy_lm, lexicon_words=["x", "y"])
        labels = {a.ilabel for row in g.arcs for a in row if a.ilabel is not None}
        assert "z" not in labels


class TestCompose:
    def test_identity_acceptor_preserves_scores(self):
        token = build_token_fst(AB3)
        ident = DecodeGraph()
        ident.set_final(0, 0.0)
        for k in range(1, 4):
            ident.add_arc(0, 0, k, k, 0.0)
        composed = compose(token, ident)
        rng = np.random.default_rng(43)
        for _ in range(50):
            labels = [int(x) for x in rng.integers(0, 4, size=rng.integers(1, 8))]
            a = transduce(token, labels)
            b = transduce(composed, labels)
            assert a.tokens == b.tokens
            assert a.score == pytest.approx(b.score, abs=1e-12)

    def test_alphabet_mismatch(self):
        token = build_token_fst(AB3)
        lm = NGramModel(order=1, ngrams={("w",): (-0.1, None), ("</s>",): (-0.5, None)})
        with pytest.raises(AlphabetMismatch):
            compose(token, build_grammar_fst(lm))

    def test_weights_add(self):
        a = DecodeGraph()
        s1 = a.add_state()
        a.add_arc(0, s1, 1, "u", 0.25)
        a.set_final(s1, 0.5)
        b = DecodeGraph()
        t1 = b.add_state()
        b.add_arc(0, t1, "u", "v", 0.75)
        b.set_final(t1, 0.25)
        c = compose(a, b)
        hyp = transduce(c, [1])
        assert hyp.score == pytest.approx(-(0.25 + 0.75 + 0.5 + 0.25))


def toy_word_graph():
    lex = Lexicon({"go": [(1,)], "do": [(2, 1)], "so": [(3, 2)]})
    lm_grams = {
        ("<s>",): (-99.0, -0.2),
        ("go",): (-0.5, -0.2),
        ("do",): (-0.6, -0.2),
        ("so",): (-0.7, -0.2),
        ("</s>",): (-0.4, None),
        ("<s>", "go"): (-0.3, -0.1),
        ("go", "do"): (-0.4, -0.1),
        ("do", "so"): (-0.5, None),
        ("go", "</s>"): (-0.3, None),
        ("<s>", "go", "do"): (-0.25, None),
    }
    lm = NGramModel(order=3, ngrams=lm_grams)
    graph = compose(compose(build_token_fst(AB3), build_lexicon_fst(lex)), build_grammar_fst(lm))
    return lex, lm, graph


class TestViterbi:
    def test_single_word_deterministic(self):
        lex = Lexicon({"hi": [(1,)]})
        lm = NGramModel(order=1, ngrams={("hi",): (-0.2, None), ("</s>",): (-0.3, None)})
        graph = compose(compose(build_token_fst(AB3), build_lexicon_fst(lex)), build_grammar_fst(lm))
        y = np.array([[0.05, 0.9, 0.03, 0.02], [0.9, 0.05, 0.03, 0.02]])
        hyp = viterbi_decode(graph, y)
        assert hyp.tokens == ("hi",)

    def test_matches_brute_force_word_search(self):
        lex, lm, graph = toy_word_graph()
        rng = np.random.default_rng(44)

        def parse(units):
            if units == ():
                return [()]
            out = []
            for word, prons in lex.entries.items():
                for p in prons:
                    if units[: len(p)] == p:
                        out.extend([(word,) + rest for rest in parse(units[len(p) :])])
            return out

        for _ in range(8):
            T = int(rng.integers(2, 6))
            y = rng.uniform(0.05, 1.0, size=(T, 4))
            y /= y.sum(axis=1, keepdims=True)
            best_cost, best_words = math.inf, None
            for path in itertools.product(range(4), repeat=T):
                acoustic = -sum(math.log(y[t, lab]) for t, lab in enumerate(path))
                for words in parse(ctc.collapse(path)):
                    cost = acoustic - LN10 * sentence_logprob(lm, words)
                    if cost < best_cost - 1e-12:
                        best_cost, best_words = cost, words
            hyp = viterbi_decode(graph, y)
            assert hyp.tokens == best_words
            assert -hyp.score == pytest.approx(best_cost, rel=1e-9)

    def test_per_frame_scaling_keeps_argmin(self):
        lex, lm, graph = toy_word_graph()
        rng = np.random.default_rng(45)
        y = rng.uniform(0.05, 1.0, size=(5, 4))
        y /= y.sum(axis=1, keepdims=True)
        base = viterbi_decode(graph, y)
        scaled = y * rng.uniform(0.5, 2.0, size=(5, 1))
        assert viterbi_decode(graph, scaled).tokens == base.tokens

    def test_no_path(self):
        lex = Lexicon({"long": [(1, 2, 3)]})
        lm = NGramModel(order=1, ngrams={("long",): (-0.2, None), ("</s>",): (-0.3, None)})
        graph = compose(compose(build_token_fst(AB3), build_lexicon_fst(lex)), build_grammar_fst(lm))
        # no blank mass, so the empty sentence is unreachable, and two frames
        # cannot complete the only three-unit pronunciation
        y = np.array([[0.0, 1 / 3, 1 / 3, 1 / 3], [0.0, 1 / 3, 1 / 3, 1 / 3]])
        with pytest.raises(NoPathFound):
            viterbi_decode(graph, y)
