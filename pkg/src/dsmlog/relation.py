"""N-ary relations stored as aligned columns (decomposed storage).

Row ``i`` of a version is ``(cols[0].raw[i], ..., cols[n-1].raw[i])``; the
tuple id is the array position, so the surrogate id column is implicit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .column import ID_DTYPE, VALUE_DTYPE, Column, as_ids


class VersionKind(enum.Enum):
    FULL = "full"
    DELTA = "delta"
    NEW = "new"


class Version:
    """One immutable snapshot (full, delta or new) of an n-ary relation."""

    __slots__ = ("columns",)

    def __init__(self, columns):
        columns = tuple(c if isinstance(c, Column) else Column(c) for c in columns)
        if not columns:
            raise ValueError("a relation version needs at least one column")
        n = len(columns[0])
        if any(len(c) != n for c in columns):
            raise ValueError("columns of a version must have equal length")
        self.columns = columns

    @classmethod
    def empty(cls, arity: int) -> "Version":
        return cls([Column() for _ in range(arity)])

    @property
    def arity(self) -> int:
        return len(self.columns)

    def __len__(self) -> int:
        return len(self.columns[0])

    def __repr__(self) -> str:
        return f"Version(arity={self.arity}, rows={len(self)})"

    def rows(self) -> np.ndarray:
        """Reconstruct rows as an ``(n, arity)`` uint32 array."""
        return np.stack([c.raw for c in self.columns], axis=1) if len(self) else \
            np.empty((0, self.arity), dtype=VALUE_DTYPE)

    def to_tuples(self) -> list[tuple[int, ...]]:
        return [tuple(r) for r in self.rows().tolist()]

    def take(self, ids) -> "Version":
        ids = as_ids(ids)
        return Version([Column(c.gather(ids), _owned=True) for c in self.columns])

    def append(self, other: "Version") -> "Version":
        if other.arity != self.arity:
            raise ValueError(f"arity mismatch: {self.arity} vs {other.arity}")
        if len(other) == 0:
            return self
        return Version([a.append(b.raw) for a, b in zip(self.columns, other.columns)])

    @classmethod
    def concat(cls, parts: list["Version"], arity: int) -> "Version":
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty(arity)
        if len(parts) == 1:
            return parts[0]
        return cls([
            Column(np.concatenate([p.columns[j].raw for p in parts]), _owned=True)
            for j in range(arity)
        ])


def decompose(rows, arity: int | None = None) -> Version:
    """Split row tuples into one column per attribute; duplicates are kept."""
    arr = np.asarray(rows)
    if arr.size == 0:
        if arity is None:
            arity = arr.shape[1] if arr.ndim == 2 else 0
        if arity < 1:
            raise ValueError("cannot infer the arity of an empty row array")
        return Version.empty(arity)
    if arr.ndim != 2:
        raise ValueError("rows must all have the same arity")
    if arity is not None and arr.shape[1] != arity:
        raise ValueError(f"expected arity {arity}, rows have arity {arr.shape[1]}")
    return Version([Column(arr[:, j]) for j in range(arr.shape[1])])


def reconstruct(ver: Version) -> list[tuple[int, ...]]:
    return ver.to_tuples()


def first_occurrences(ver: Version) -> np.ndarray:
    """Ascending ids of the first occurrence of every distinct row."""
    n = len(ver)
    if n == 0:
        return np.empty(0, dtype=ID_DTYPE)
    # lexsort is stable, so within a group of equal rows the smallest id comes first
    order = np.lexsort([c.raw for c in reversed(ver.columns)])
    head = np.ones(n, dtype=bool)
    same = np.ones(n - 1, dtype=bool)
    for c in ver.columns:
        v = c.raw[order]
        same &= v[1:] == v[:-1]
    head[1:] = ~same
    return np.sort(order[head]).astype(ID_DTYPE, copy=False)


def dedup_rows(ver: Version) -> Version:
    """Keep one copy of every row (smallest id), in first-occurrence order."""
    keep = first_occurrences(ver)
    if len(keep) == len(ver):
        return ver
    return ver.take(keep)


@dataclass
class Relation:
    """A named relation with its three semi-naive versions."""

    name: str
    arity: int
    full: Version = None
    delta: Version = None
    new: Version = None
    merges: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.arity < 1:
            raise ValueError(f"relation {self.name!r} must have arity >= 1")
        for kind in VersionKind:
            if getattr(self, kind.value) is None:
                setattr(self, kind.value, Version.empty(self.arity))

    def version(self, kind: VersionKind) -> Version:
        return getattr(self, kind.value)


def merge_delta(rel: Relation) -> Relation:
    """Append DELTA to FULL (new rows take the next dense ids) and clear NEW.

    DELTA is kept as is: it names the rows added by this merge, which the next
    iteration reads.  DELTA must already be disjoint from FULL.
    """
    return Relation(
        name=rel.name,
        arity=rel.arity,
        full=rel.full.append(rel.delta),
        delta=rel.delta,
        new=Version.empty(rel.arity),
        merges=rel.merges + 1,
    )
