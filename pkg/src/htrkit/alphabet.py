"""Label alphabets: the output classes of the recognizer.

Index 0 is always the blank separator symbol; real character classes
start at index 1. The default alphabet has 78 real classes (52
case-sensitive letters, 10 digits, 15 punctuation marks, space) for a
total of 79 network outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError

BLANK_INDEX = 0
BLANK_CHAR = "—"  # display-only stand-in when printing raw paths

_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
_DIGITS = "0123456789"
_PUNCTUATION = ".,;:!?'\"-()/&#*"  # 15 marks
_DEFAULT_SYMBOLS = _LETTERS + _DIGITS + _PUNCTUATION + " "


@dataclass(frozen=True)
class LabelAlphabet:
    """Ordered set of real character classes plus the reserved blank.

    ``symbols`` holds only the real classes; blank is implicit at index
    0, so network outputs and posterior rows have ``size = len(symbols)
    + 1`` columns.
    """

    symbols: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.symbols:
            raise ConfigError("alphabet needs at least one real symbol")
        if len(set(self.symbols)) != len(self.symbols):
            raise ConfigError("alphabet symbols must be unique")
        object.__setattr__(
            self, "_index", {s: i + 1 for i, s in enumerate(self.symbols)}
        )

    @property
    def blank_index(self) -> int:
        return BLANK_INDEX

    @property
    def size(self) -> int:
        """Number of output classes including blank."""
        return len(self.symbols) + 1

    def index_of(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise ConfigError(f"symbol {symbol!r} not in alphabet") from None

    def symbol_of(self, index: int) -> str:
        if index == BLANK_INDEX:
            raise ConfigError("blank has no character; it never appears in transcripts")
        if not 1 <= index < self.size:
            raise ConfigError(f"label index {index} out of range for size {self.size}")
        return self.symbols[index - 1]

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index

    def encode(self, text: str) -> list[int]:
        """Transcript string -> real-label indices (no blanks)."""
        return [self.index_of(c) for c in text]

    def decode(self, labels: list[int]) -> str:
        """Real-label indices -> transcript string."""
        return "".join(self.symbol_of(i) for i in labels)

    @classmethod
    def from_text(cls, text: str) -> "LabelAlphabet":
        """Alphabet built from the distinct characters of ``text``, sorted."""
        return cls(tuple(sorted(set(text))))

    @classmethod
    def default(cls) -> "LabelAlphabet":
        """The 79-class alphabet (78 real classes + blank)."""
        return cls(tuple(_DEFAULT_SYMBOLS))
