"""String interning: a dense bijection between strings and 32-bit values."""

from __future__ import annotations

from collections.abc import Iterable

from .column import VALUE_MAX


class Dictionary:
    """Bidirectional map string <-> value; ids are handed out densely from 0."""

    def __init__(self, strings: Iterable[str] = ()):
        self._ids: dict[str, int] = {}
        self._strings: list[str] = []
        for s in strings:
            self.encode(s)

    def encode(self, s: str) -> int:
        try:
            return self._ids[s]
        except KeyError:
            pass
        if not isinstance(s, str):
            raise TypeError(f"only strings can be interned, got {type(s).__name__}")
        if len(self._strings) > VALUE_MAX:
            raise OverflowError("dictionary exhausted the 32-bit value space")
        value = self._ids[s] = len(self._strings)
        self._strings.append(s)
        return value

    def decode(self, value: int) -> str:
        value = int(value)
        if not 0 <= value < len(self._strings):
            raise KeyError(value)
        return self._strings[value]

    def lookup(self, s: str) -> int | None:
        return self._ids.get(s)

    @property
    def next_id(self) -> int:
        return len(self._strings)

    def __len__(self) -> int:
        return len(self._strings)

    def __contains__(self, s) -> bool:
        return s in self._ids

    def __repr__(self) -> str:
        return f"Dictionary({len(self)} strings)"
