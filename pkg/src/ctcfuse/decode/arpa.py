"""Backoff n-gram language models in the ARPA text format.

Probabilities and backoff weights are stored as log10 values, exactly as
read. Scoring follows the standard recursion: use an explicit n-gram when
present, otherwise back off (adding the context's backoff weight) and retry
with a shortened history.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ParseError

BOS = "<s>"
EOS = "</s>"


@dataclass
class NGramModel:
    order: int
    ngrams: dict[tuple[str, ...], tuple[float, float | None]]  # gram -> (log10 p, log10 backoff)
    vocabulary: set[str] = field(default_factory=set)

    def __post_init__(self):
        if self.order < 1:
            raise ParseError("n-gram order must be >= 1")
        if not self.vocabulary:
            self.vocabulary = {g[-1] for g in self.ngrams if len(g) == 1}

    def logprob(self, gram: tuple[str, ...]) -> float | None:
        entry = self.ngrams.get(gram)
        return entry[0] if entry else None

    def backoff(self, context: tuple[str, ...]) -> float:
        entry = self.ngrams.get(context)
        if entry is None or entry[1] is None:
            return 0.0
        return entry[1]


def sentence_start(words) -> tuple[str, ...]:
    return (BOS,) + tuple(words)


def word_logprob(model: NGramModel, context: tuple[str, ...], word: str) -> float:
    """log10 P(word | context) with backoff; context may be any length."""
    context = tuple(context)[-(model.order - 1) :] if model.order > 1 else ()
    while True:
        p = model.logprob(context + (word,))
        if p is not None:
            return p
        if not context:
            # unseen unigram: spread the tiniest representable mass
            return -99.0
        penalty = model.backoff(context)
        context = context[1:]
        return penalty + word_logprob(model, context, word)


def sentence_logprob(model: NGramModel, words, include_eos: bool = True) -> float:
    """log10 probability of a word sequence framed by sentence markers."""
    history = (BOS,)
    total = 0.0
    for w in words:
        total += word_logprob(model, history, w)
        history = history + (w,)
    if include_eos:
        total += word_logprob(model, history, EOS)
    return total


def read_arpa(path) -> NGramModel:
    path = Path(path)
    ngrams: dict[tuple[str, ...], tuple[float, float | None]] = {}
    declared: dict[int, int] = {}
    section = None  # None -> before \data\; 0 -> in \data\; n -> in n-grams
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line == "\\data\\":
                section = 0
                continue
            if line == "\\end\\":
                break
            if line.startswith("\\") and line.endswith("-grams:"):
                try:
                    section = int(line[1:].split("-")[0])
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: bad section header {line!r}") from None
                continue
            if section == 0:
                if line.startswith("ngram"):
                    try:
                        order_part, count = line.split("=")
                        declared[int(order_part.split()[1])] = int(count)
                    except (ValueError, IndexError):
                        raise ParseError(f"{path}:{lineno}: bad ngram count line") from None
                continue
            if section is None:
                raise ParseError(f"{path}:{lineno}: content before \\data\\ header")
            fields = line.split()
            if len(fields) < section + 1:
                raise ParseError(f"{path}:{lineno}: too few fields for a {section}-gram")
            try:
                prob = float(fields[0])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: bad probability {fields[0]!r}") from None
            gram = tuple(fields[1 : 1 + section])
            backoff = None
            if len(fields) > section + 1:
                try:
                    backoff = float(fields[1 + section])
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: bad backoff weight") from None
            ngrams[gram] = (prob, backoff)
    if not ngrams:
        raise ParseError(f"{path}: no n-gram entries")
    order = max(len(g) for g in ngrams)
    for n, count in declared.items():
        actual = sum(1 for g in ngrams if len(g) == n)
        if actual != count:
            raise ParseError(f"{path}: declared {count} {n}-grams, found {actual}")
    return NGramModel(order=order, ngrams=ngrams)


def write_arpa(path, model: NGramModel) -> None:
    orders = sorted({len(g) for g in model.ngrams})
    with open(path, "w") as fh:
        fh.write("\\data\\\n")
        for n in orders:
            fh.write(f"ngram {n}={sum(1 for g in model.ngrams if len(g) == n)}\n")
        for n in orders:
            fh.write(f"\n\\{n}-grams:\n")
            for gram, (prob, backoff) in model.ngrams.items():
                if len(gram) != n:
                    continue
                tail = "" if backoff is None else f"\t{backoff}"
                fh.write(f"{prob}\t{' '.join(gram)}{tail}\n")
        fh.write("\n\\end\\\n")


def uniform_unigram(words) -> NGramModel:
    """Flat unigram over the given words plus the sentence-end marker."""
    words = list(words)
    p = math.log10(1.0 / (len(words) + 1))
    ngrams: dict[tuple[str, ...], tuple[float, float | None]] = {(BOS,): (-99.0, None)}
    for w in words:
        ngrams[(w,)] = (p, None)
    ngrams[(EOS,)] = (p, None)
    return NGramModel(order=1, ngrams=ngrams)
