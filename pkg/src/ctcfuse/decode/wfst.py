"""Weighted transducers over the tropical semiring (min, +) and their
composition into a decoding graph: frame labels -> collapsed units ->
words -> language-model-scored words.

Labels: frame/unit labels are ints (0 = blank), words are strings, and
None is epsilon. All weights are -ln(probability), so path weights add.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..ctc import _probs
from ..errors import AlphabetMismatch, NoPathFound
from ..units import BLANK_ID, LabelAlphabet
from .arpa import BOS, EOS, NGramModel
from .lexicon import Lexicon
from .search import Hypothesis

log = logging.getLogger(__name__)

EPS = None
LN10 = math.log(10.0)


@dataclass
class Arc:
    dest: int
    ilabel: object  # int, str, or EPS
    olabel: object
    weight: float


@dataclass
class DecodeGraph:
    start: int = 0
    arcs: list[list[Arc]] = field(default_factory=lambda: [[]])
    finals: dict[int, float] = field(default_factory=dict)

    def add_state(self) -> int:
        self.arcs.append([])
        return len(self.arcs) - 1

    def add_arc(self, src: int, dest: int, ilabel, olabel, weight: float = 0.0) -> None:
        if not math.isfinite(weight):
            raise ValueError("arc weights must be finite")
        self.arcs[src].append(Arc(dest, ilabel, olabel, weight))

    def set_final(self, state: int, weight: float = 0.0) -> None:
        self.finals[state] = weight

    @property
    def num_states(self) -> int:
        return len(self.arcs)

    def input_symbols(self) -> set:
        return {a.ilabel for row in self.arcs for a in row if a.ilabel is not EPS}

    def output_symbols(self) -> set:
        return {a.olabel for row in self.arcs for a in row if a.olabel is not EPS}

    def validate(self) -> None:
        if not self.finals:
            raise NoPathFound("graph has no final state")


def build_token_fst(alphabet: LabelAlphabet) -> DecodeGraph:
    """Transducer mapping any frame-label string to its collapsed unit string.

    State 0 is "just saw blank"; state k is "inside a run of unit k". Units
    are emitted on run entry; repeats and blanks map to epsilon.
    """
    g = DecodeGraph()
    g.set_final(0, 0.0)
    unit_state = {}
    for k in range(1, alphabet.size + 1):
        unit_state[k] = g.add_state()
        g.set_final(unit_state[k], 0.0)
    g.add_arc(0, 0, BLANK_ID, EPS)
    for k, sk in unit_state.items():
        g.add_arc(0, sk, k, k)
        g.add_arc(sk, sk, k, EPS)
        g.add_arc(sk, 0, BLANK_ID, EPS)
        for j, sj in unit_state.items():
            if j != k:
                g.add_arc(sk, sj, j, j)
    return g


def build_lexicon_fst(lex: Lexicon, allow_boundary_blank: bool = False) -> DecodeGraph:
    """Transducer mapping unit sequences to word sequences, looped at state 0.

    The word label is emitted on the first unit of each pronunciation.
    """
    g = DecodeGraph()
    g.set_final(0, 0.0)
    if allow_boundary_blank:
        g.add_arc(0, 0, BLANK_ID, EPS)
    for word, prons in lex.entries.items():
        for pron in prons:
            src = 0
            for i, unit in enumerate(pron):
                dest = 0 if i == len(pron) - 1 else g.add_state()
                g.add_arc(src, dest, unit, word if i == 0 else EPS)
                src = dest
    return g


def build_grammar_fst(lm: NGramModel, lexicon_words=None) -> DecodeGraph:
    """Acceptor over words with one state per n-gram context; backoff moves
    are epsilon arcs. Sentence-end probability lands on final weights.

    Words in the model but absent from the lexicon are dropped (logged).
    """
    allowed = set(lexicon_words) if lexicon_words is not None else None
    contexts = sorted(
        {g for g in lm.ngrams if len(g) < lm.order} | {()},
        key=lambda c: (len(c), c),
    )
    g = DecodeGraph()
    state_of = {}
    for ctx in contexts:
        state_of[ctx] = 0 if ctx == () else g.add_state()
    start_ctx = (BOS,) if (BOS,) in state_of else ()
    g.start = state_of[start_ctx]

    def suffix_state(gram: tuple) -> int:
        while gram not in state_of:
            gram = gram[1:]
        return state_of[gram]

    dropped = set()
    for gram, (log10p, _) in lm.ngrams.items():
        context, word = gram[:-1], gram[-1]
        if context not in state_of:
            continue  # full-order grams are arcs, not states
        if word == EOS:
            g.set_final(state_of[context], -LN10 * log10p)
            continue
        if word == BOS:
            continue
        if allowed is not None and word not in allowed:
            dropped.add(word)
            continue
        g.add_arc(state_of[context], suffix_state(gram), word, word, -LN10 * log10p)
    for ctx in contexts:
        if ctx == ():
            continue
        g.add_arc(state_of[ctx], suffix_state(ctx[1:]), EPS, EPS, -LN10 * lm.backoff(ctx))
    if dropped:
        log.warning("dropped %d language-model words missing from lexicon: %s",
                    len(dropped), sorted(dropped))
    g.validate()
    return g


def compose(a: DecodeGraph, b: DecodeGraph) -> DecodeGraph:
    """Transducer composition; weights add. Epsilon moves on either side are
    taken independently, which may duplicate paths but never changes the
    minimum path weight."""
    a_out = a.output_symbols()
    b_in = b.input_symbols()
    if a_out and b_in and not (a_out & b_in):
        raise AlphabetMismatch("no shared symbols between outputs of a and inputs of b")

    g = DecodeGraph()
    g.arcs = []
    state_of: dict[tuple[int, int], int] = {}

    def state(pair) -> int:
        if pair not in state_of:
            g.arcs.append([])
            state_of[pair] = len(g.arcs) - 1
        return state_of[pair]

    g.start = state((a.start, b.start))
    queue = [(a.start, b.start)]
    seen = {(a.start, b.start)}
    while queue:
        sa, sb = queue.pop()
        src = state((sa, sb))
        moves = []
        for arc_a in a.arcs[sa]:
            if arc_a.olabel is EPS:
                moves.append(((arc_a.dest, sb), arc_a.ilabel, EPS, arc_a.weight))
            else:
                for arc_b in b.arcs[sb]:
                    if arc_b.ilabel == arc_a.olabel:
                        moves.append(
                            ((arc_a.dest, arc_b.dest), arc_a.ilabel, arc_b.olabel,
                             arc_a.weight + arc_b.weight)
                        )
        for arc_b in b.arcs[sb]:
            if arc_b.ilabel is EPS:
                moves.append(((sa, arc_b.dest), EPS, arc_b.olabel, arc_b.weight))
        for pair, il, ol, w in moves:
            dest = state(pair)
            g.arcs[src].append(Arc(dest, il, ol, w))
            if pair not in seen:
                seen.add(pair)
                queue.append(pair)
    for pair, idx in state_of.items():
        if pair[0] in a.finals and pair[1] in b.finals:
            g.finals[idx] = a.finals[pair[0]] + b.finals[pair[1]]
    return g


def _better(cost_a, out_a, cost_b, out_b) -> bool:
    """True when (cost_a, out_a) wins: lower cost, then smaller output string."""
    if cost_a != cost_b:
        return cost_a < cost_b
    return tuple(map(str, out_a)) < tuple(map(str, out_b))


def _eps_closure(g: DecodeGraph, dist: dict) -> dict:
    """Relax epsilon-input arcs to a fixed point (no negative eps cycles)."""
    changed = True
    rounds = 0
    while changed and rounds <= g.num_states + 1:
        changed = False
        rounds += 1
        for s, (cost, outs) in list(dist.items()):
            for arc in g.arcs[s]:
                if arc.ilabel is not EPS:
                    continue
                new_cost = cost + arc.weight
                new_outs = outs if arc.olabel is EPS else outs + (arc.olabel,)
                cur = dist.get(arc.dest)
                if cur is None or _better(new_cost, new_outs, cur[0], cur[1]):
                    dist[arc.dest] = (new_cost, new_outs)
                    changed = True
    return dist


def viterbi_decode(g: DecodeGraph, y, acoustic_scale: float = 1.0) -> Hypothesis:
    """Tropical shortest path through the graph driven by the posteriorgram:
    consuming frame t on an arc with input label l costs
    arc.weight - acoustic_scale * log y_t[l]."""
    if acoustic_scale <= 0:
        raise ValueError("acoustic_scale must be positive")
    probs = _probs(y)
    with np.errstate(divide="ignore"):
        frame_cost = -acoustic_scale * np.log(probs)
    dist = _eps_closure(g, {g.start: (0.0, ())})
    for t in range(probs.shape[0]):
        nxt: dict[int, tuple[float, tuple]] = {}
        for s, (cost, outs) in dist.items():
            for arc in g.arcs[s]:
                if arc.ilabel is EPS:
                    continue
                step = frame_cost[t, arc.ilabel]
                if not math.isfinite(step):
                    continue
                new_cost = cost + arc.weight + step
                new_outs = outs if arc.olabel is EPS else outs + (arc.olabel,)
                cur = nxt.get(arc.dest)
                if cur is None or _better(new_cost, new_outs, cur[0], cur[1]):
                    nxt[arc.dest] = (new_cost, new_outs)
        dist = _eps_closure(g, nxt)
        if not dist:
            raise NoPathFound(f"no surviving path at frame {t}")
    best = None
    for s, (cost, outs) in dist.items():
        if s in g.finals:
            total = cost + g.finals[s]
            if best is None or _better(total, outs, best[0], best[1]):
                best = (total, outs)
    if best is None:
        raise NoPathFound("no final state reachable after the last frame")
    return Hypothesis(tokens=best[1], score=-best[0])


def transduce(g: DecodeGraph, labels) -> Hypothesis | None:
    """Run an exact input-label sequence through the graph; None if rejected."""
    dist = _eps_closure(g, {g.start: (0.0, ())})
    for lab in labels:
        nxt: dict[int, tuple[float, tuple]] = {}
        for s, (cost, outs) in dist.items():
            for arc in g.arcs[s]:
                if arc.ilabel is EPS or arc.ilabel != lab:
                    continue
                new_cost = cost + arc.weight
                new_outs = outs if arc.olabel is EPS else outs + (arc.olabel,)
                cur = nxt.get(arc.dest)
                if cur is None or _better(new_cost, new_outs, cur[0], cur[1]):
                    nxt[arc.dest] = (new_cost, new_outs)
        dist = _eps_closure(g, nxt)
        if not dist:
            return None
    best = None
    for s, (cost, outs) in dist.items():
        if s in g.finals:
            total = cost + g.finals[s]
            if best is None or _better(total, outs, best[0], best[1]):
                best = (total, outs)
    return None if best is None else Hypothesis(tokens=best[1], score=-best[0])
