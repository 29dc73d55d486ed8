"""Posteriorgram decoding: best-path, prefix beam search, transducer
composition + Viterbi, and edit-distance scoring."""

from .arpa import NGramModel, read_arpa, sentence_logprob, uniform_unigram, word_logprob, write_arpa
from .lexicon import Lexicon, read_lexicon, write_lexicon
from .metrics import EditMetrics, edit_distance_metrics, pooled_metrics
from .search import Hypothesis, greedy_decode, prefix_beam_search
from .wfst import (
    EPS,
    DecodeGraph,
    build_grammar_fst,
    build_lexicon_fst,
    build_token_fst,
    compose,
    transduce,
    viterbi_decode,
)

__all__ = [
    "NGramModel",
    "read_arpa",
    "sentence_logprob",
    "uniform_unigram",
    "word_logprob",
    "write_arpa",
    "Lexicon",
    "read_lexicon",
    "write_lexicon",
    "EditMetrics",
    "edit_distance_metrics",
    "pooled_metrics",
    "Hypothesis",
    "greedy_decode",
    "prefix_beam_search",
    "EPS",
    "DecodeGraph",
    "build_grammar_fst",
    "build_lexicon_fst",
    "build_token_fst",
    "compose",
    "transduce",
    "viterbi_decode",
]
