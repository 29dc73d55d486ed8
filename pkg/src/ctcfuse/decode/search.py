"""Best-path and prefix beam decoding of posteriorgrams.

Scores are natural-log probabilities. Ties are broken toward the
lexicographically smaller token sequence so results are bit-stable.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..ctc import _probs, collapse
from ..units import BLANK_ID

LOG_ZERO = float("-inf")


@dataclass(frozen=True)
class Hypothesis:
    tokens: tuple
    score: float


def _lse(a: float, b: float) -> float:
    if a == LOG_ZERO:
        return b
    if b == LOG_ZERO:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


def greedy_decode(y) -> tuple[int, ...]:
    """Per-frame argmax (ties to the lowest index) followed by collapse."""
    probs = _probs(y)
    return collapse(np.argmax(probs, axis=1))


def prefix_beam_search(
    y,
    beam_width: int,
    lm=None,
    lexicon=None,
    lm_weight: float = 1.0,
    n_best: int | None = None,
) -> list[Hypothesis]:
    """Merge frame paths by collapsed prefix, keeping the best beam_width.

    Without a lexicon the hypotheses are unit sequences. With a lexicon (and
    optionally an n-gram model over its words) unit prefixes are constrained
    to pronunciation prefixes and words are scored when a pronunciation
    completes; hypotheses are then word sequences.
    """
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    probs = _probs(y)
    with np.errstate(divide="ignore"):
        logy = np.log(probs)
    if lexicon is None:
        return _unit_beam(logy, beam_width, n_best)
    return _word_beam(logy, beam_width, lexicon, lm, lm_weight, n_best)


def _unit_beam(logy: np.ndarray, beam_width: int, n_best: int | None) -> list[Hypothesis]:
    T, K1 = logy.shape
    beams = {(): (0.0, LOG_ZERO)}  # prefix -> (log p ending in blank, in non-blank)
    for t in range(T):
        nxt: dict[tuple, list[float]] = {}

        def bump(key, which, value):
            slot = nxt.setdefault(key, [LOG_ZERO, LOG_ZERO])
            slot[which] = _lse(slot[which], value)

        for prefix, (pb, pnb) in beams.items():
            total = _lse(pb, pnb)
            bump(prefix, 0, total + logy[t, BLANK_ID])
            for k in range(1, K1):
                lp = logy[t, k]
                if lp == LOG_ZERO:
                    continue
                if prefix and prefix[-1] == k:
                    bump(prefix, 1, pnb + lp)  # extend the run of k
                    bump(prefix + (k,), 1, pb + lp)  # new k after a blank
                else:
                    bump(prefix + (k,), 1, total + lp)
        beams = _prune(nxt, beam_width)
    ranked = sorted(beams.items(), key=lambda kv: (-_lse(*kv[1]), kv[0]))
    top = ranked[: n_best or beam_width]
    return [Hypothesis(tokens=pre, score=_lse(*pp)) for pre, pp in top]


def _prune(nxt: dict, beam_width: int) -> dict:
    ranked = sorted(nxt.items(), key=lambda kv: (-_lse(kv[1][0], kv[1][1]), kv[0]))
    return {k: (v[0], v[1]) for k, v in ranked[:beam_width]}


def _word_beam(logy, beam_width, lexicon, lm, lm_weight, n_best) -> list[Hypothesis]:
    from .arpa import sentence_start, word_logprob

    prefixes = lexicon.pronunciation_prefixes()
    prons = lexicon.pronunciation_index()
    ln10 = math.log(10.0)

    # state: (units emitted, committed words, pending units) -> (pb, pnb, lm score)
    start = ((), (), ())
    beams = {start: (0.0, LOG_ZERO, 0.0)}
    T, K1 = logy.shape
    for t in range(T):
        nxt = {}

        def bump(key, which, value, lm_score):
            slot = nxt.setdefault(key, [LOG_ZERO, LOG_ZERO, lm_score])
            slot[which] = _lse(slot[which], value)

        for (units, words, pending), (pb, pnb, lms) in beams.items():
            total = _lse(pb, pnb)
            bump((units, words, pending), 0, total + logy[t, BLANK_ID], lms)
            for k in range(1, K1):
                lp = logy[t, k]
                if lp == LOG_ZERO:
                    continue
                if units and units[-1] == k:
                    bump((units, words, pending), 1, pnb + lp, lms)
                    base = pb + lp
                else:
                    base = total + lp
                grown = pending + (k,)
                if grown in prefixes:
                    bump((units + (k,), words, grown), 1, base, lms)
                for word in prons.get(grown, ()):
                    add = 0.0
                    if lm is not None:
                        add = lm_weight * ln10 * word_logprob(lm, sentence_start(words), word)
                    bump((units + (k,), words + (word,), ()), 1, base, lms + add)
        ranked = sorted(
            nxt.items(), key=lambda kv: (-(_lse(kv[1][0], kv[1][1]) + kv[1][2]), kv[0])
        )
        beams = {k: tuple(v) for k, v in ranked[:beam_width]}

    finals = []
    for (units, words, pending), (pb, pnb, lms) in beams.items():
        if pending:
            continue
        score = _lse(pb, pnb) + lms
        if lm is not None:
            score += lm_weight * ln10 * word_logprob(lm, sentence_start(words), "</s>")
        finals.append(Hypothesis(tokens=words, score=score))
    finals.sort(key=lambda h: (-h.score, h.tokens))
    return finals[: n_best or beam_width]
