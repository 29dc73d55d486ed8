"""Pronunciation lexicon: word -> one or more unit-id sequences.

Text format, one pronunciation per line: `WORD unit1 unit2 ...`.
"""

from dataclasses import dataclass, field
from pathlib import Path

from ..errors import DataError, ParseError
from ..units import LabelAlphabet


@dataclass
class Lexicon:
    entries: dict[str, list[tuple[int, ...]]]
    alphabet: LabelAlphabet = field(repr=False, default=None)

    def __post_init__(self):
        if not self.entries:
            raise DataError("lexicon must contain at least one entry")
        for word, prons in self.entries.items():
            if not prons or any(len(p) == 0 for p in prons):
                raise DataError(f"word {word!r} has an empty pronunciation")
            if self.alphabet is not None:
                for p in prons:
                    for u in p:
                        if not 1 <= u <= self.alphabet.size:
                            raise DataError(f"word {word!r} uses invalid unit id {u}")

    @property
    def words(self) -> list[str]:
        return list(self.entries)

    def pronunciation_index(self) -> dict[tuple[int, ...], list[str]]:
        """pronunciation -> words sharing it (homophones), insertion order."""
        index: dict[tuple[int, ...], list[str]] = {}
        for word, prons in self.entries.items():
            for p in prons:
                index.setdefault(p, []).append(word)
        return index

    def pronunciation_prefixes(self) -> set[tuple[int, ...]]:
        """All proper, non-empty prefixes of any pronunciation."""
        out: set[tuple[int, ...]] = set()
        for prons in self.entries.values():
            for p in prons:
                for i in range(1, len(p)):
                    out.add(p[:i])
        return out


def read_lexicon(path, alphabet: LabelAlphabet) -> Lexicon:
    path = Path(path)
    entries: dict[str, list[tuple[int, ...]]] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise ParseError(f"{path}:{lineno}: expected `WORD unit1 ...`")
            try:
                ids = alphabet.ids_of(parts[1:])
            except DataError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            entries.setdefault(parts[0], []).append(ids)
    if not entries:
        raise ParseError(f"{path}: empty lexicon")
    return Lexicon(entries, alphabet)


def write_lexicon(path, lex: Lexicon) -> None:
    with open(path, "w") as fh:
        for word, prons in lex.entries.items():
            for p in prons:
                names = lex.alphabet.names_of(p) if lex.alphabet else [str(u) for u in p]
                fh.write(f"{word} {' '.join(names)}\n")
