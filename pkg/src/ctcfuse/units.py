"""Output unit alphabets and target label sequences.

Unit ids are 1-based; id 0 is the reserved blank and never names a unit.
"""

from dataclasses import dataclass, field

from .errors import DataError

BLANK_ID = 0


@dataclass(frozen=True)
class LabelAlphabet:
    """Ordered set of K output units (phonemes or visemes), blank excluded."""

    units: tuple[str, ...]

    def __post_init__(self):
        if len(self.units) < 1:
            raise DataError("alphabet needs at least one unit")
        if len(set(self.units)) != len(self.units):
            raise DataError("duplicate unit names in alphabet")

    @property
    def size(self) -> int:
        return len(self.units)

    def id_of(self, name: str) -> int:
        try:
            return self.units.index(name) + 1
        except ValueError:
            raise DataError(f"unknown unit {name!r}") from None

    def name_of(self, unit_id: int) -> str:
        if not 1 <= unit_id <= len(self.units):
            raise DataError(f"unit id {unit_id} out of range")
        return self.units[unit_id - 1]

    def ids_of(self, names) -> tuple[int, ...]:
        return tuple(self.id_of(n) for n in names)

    def names_of(self, ids) -> tuple[str, ...]:
        return tuple(self.name_of(i) for i in ids)


@dataclass(frozen=True)
class LabelSequence:
    """Target sequence z_1..z_U of non-blank unit ids over an alphabet."""

    ids: tuple[int, ...]
    alphabet: LabelAlphabet = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))
        if len(self.ids) < 1:
            raise DataError("label sequence must contain at least one unit")
        for i in self.ids:
            if not 1 <= i <= self.alphabet.size:
                raise DataError(f"label id {i} outside alphabet of size {self.alphabet.size}")

    def __len__(self) -> int:
        return len(self.ids)

    def names(self) -> tuple[str, ...]:
        return self.alphabet.names_of(self.ids)

    @classmethod
    def from_names(cls, names, alphabet: LabelAlphabet) -> "LabelSequence":
        return cls(alphabet.ids_of(names), alphabet)
