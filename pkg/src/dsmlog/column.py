"""Single-attribute column: raw values, value-sorted index, unique-value ranges.

A column keeps its raw array in insertion order and never compresses it.  The
index has two layers: ``sorted_idx`` is a permutation of tuple ids ordered by
value (ties by ascending id) and the unique index maps each distinct value to
the ``(start, count)`` slice of ``sorted_idx`` holding that value.
"""

from __future__ import annotations

from collections.abc import Iterator, Mapping
from typing import NamedTuple

import numpy as np

from . import parallel

VALUE_DTYPE = np.uint32
ID_DTYPE = np.int32
POS_DTYPE = np.int64
VALUE_MAX = int(np.iinfo(VALUE_DTYPE).max)


class MatchRange(NamedTuple):
    start: int
    count: int


def as_values(values) -> np.ndarray:
    """Coerce to a 1-d uint32 array, rejecting anything outside the domain."""
    if isinstance(values, np.ndarray) and values.dtype == VALUE_DTYPE:
        return values.reshape(-1)
    arr = np.asarray(values)
    if arr.size == 0:
        return np.empty(0, dtype=VALUE_DTYPE)
    if arr.dtype.kind not in "iu":
        raise TypeError(f"column values must be integers, got dtype {arr.dtype}")
    if arr.min() < 0 or arr.max() > VALUE_MAX:
        raise ValueError("column values must lie in the unsigned 32-bit range")
    return arr.astype(VALUE_DTYPE).reshape(-1)


def as_ids(ids) -> np.ndarray:
    """A 1-d integer array of tuple ids (any integer dtype is kept as is)."""
    arr = np.asarray(ids)
    if arr.size == 0:
        return np.empty(0, dtype=ID_DTYPE)
    if arr.dtype.kind not in "iu":
        raise TypeError(f"tuple ids must be integers, got dtype {arr.dtype}")
    return arr.reshape(-1)


class UniqueIndex(Mapping):
    """Map value -> MatchRange, stored as three parallel arrays sorted by key."""

    __slots__ = ("key_values", "starts", "counts")

    def __init__(self, keys: np.ndarray, starts: np.ndarray, counts: np.ndarray):
        self.key_values = keys
        self.starts = starts
        self.counts = counts

    @classmethod
    def from_sorted_values(cls, sorted_vals: np.ndarray) -> "UniqueIndex":
        n = len(sorted_vals)
        if n == 0:
            empty = np.empty(0, dtype=POS_DTYPE)
            return cls(np.empty(0, dtype=VALUE_DTYPE), empty, empty.copy())
        breaks = np.flatnonzero(sorted_vals[1:] != sorted_vals[:-1]) + 1
        starts = np.concatenate(([0], breaks)).astype(POS_DTYPE)
        counts = np.diff(np.concatenate((starts, [n]))).astype(POS_DTYPE)
        return cls(sorted_vals[starts], starts, counts)

    def lookup(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised probe.  Misses come back with count 0 (and start 0)."""
        values = np.asarray(values)
        m = len(values)
        if m == 0 or len(self.key_values) == 0:
            return np.zeros(m, dtype=POS_DTYPE), np.zeros(m, dtype=POS_DTYPE)
        slot = np.searchsorted(self.key_values, values)
        slot_c = np.minimum(slot, len(self.key_values) - 1)
        hit = self.key_values[slot_c] == values
        starts = np.where(hit, self.starts[slot_c], 0)
        counts = np.where(hit, self.counts[slot_c], 0)
        return starts, counts

    def __getitem__(self, value) -> MatchRange:
        value = int(value)
        if not 0 <= value <= VALUE_MAX:
            raise KeyError(value)
        slot = int(np.searchsorted(self.key_values, value))
        if slot == len(self.key_values) or int(self.key_values[slot]) != value:
            raise KeyError(value)
        return MatchRange(int(self.starts[slot]), int(self.counts[slot]))

    def __iter__(self) -> Iterator[int]:
        return iter(self.key_values.tolist())

    def __len__(self) -> int:
        return len(self.key_values)

    def __repr__(self) -> str:
        return f"UniqueIndex({dict(self)!r})"


def build_index(raw) -> tuple[np.ndarray, UniqueIndex]:
    """Return ``(sorted_idx, unique_idx)`` for a raw value array.

    The stable sort puts equal values in ascending tuple-id order.
    """
    raw = as_values(raw)
    sorted_idx = np.argsort(raw, kind="stable").astype(ID_DTYPE, copy=False)
    return sorted_idx, UniqueIndex.from_sorted_values(raw[sorted_idx])


class Column:
    """One decomposed attribute.

    The index is built lazily on first use and cached; a column never changes
    after construction, so ``append`` returns a new column.
    """

    __slots__ = ("raw", "_sorted_idx", "_unique", "_buf", "_fill")

    def __init__(self, raw=(), *, _owned: bool = False):
        raw = as_values(raw)
        if not _owned and raw.flags.writeable:
            raw = raw.copy()
        raw.flags.writeable = False
        self.raw = raw
        self._sorted_idx: np.ndarray | None = None
        self._unique: UniqueIndex | None = None
        # growable backing store shared by successive appends; _fill[0] is its used length
        self._buf: np.ndarray | None = None
        self._fill: list[int] | None = None

    def __len__(self) -> int:
        return len(self.raw)

    def __repr__(self) -> str:
        return f"Column(n={len(self.raw)}, distinct={len(self.unique_idx)})"

    @property
    def indexed(self) -> bool:
        return self._sorted_idx is not None

    def _ensure_index(self) -> None:
        if self._sorted_idx is None:
            self._set_index(*build_index(self.raw))

    def _set_index(self, sorted_idx: np.ndarray, unique: UniqueIndex) -> None:
        for arr in (sorted_idx, unique.key_values, unique.starts, unique.counts):
            arr.flags.writeable = False
        self._unique = unique
        self._sorted_idx = sorted_idx

    @property
    def sorted_idx(self) -> np.ndarray:
        self._ensure_index()
        return self._sorted_idx

    @property
    def sorted_values(self) -> np.ndarray:
        return self.raw[self.sorted_idx]

    @property
    def unique_idx(self) -> UniqueIndex:
        self._ensure_index()
        return self._unique

    def probe(self, value) -> MatchRange | None:
        try:
            return self.unique_idx[value]
        except KeyError:
            return None

    def probe_many(self, values) -> tuple[np.ndarray, np.ndarray]:
        """Probe every value; returns ``(starts, counts)`` with count 0 on a miss."""
        values = np.asarray(values)
        unique = self.unique_idx
        parts = parallel.map_chunks(lambda lo, hi: unique.lookup(values[lo:hi]), len(values))
        if len(parts) == 1:
            return parts[0]
        return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))

    def gather(self, ids) -> np.ndarray:
        ids = as_ids(ids)
        if len(ids) and (ids.min() < 0 or ids.max() >= len(self.raw)):
            raise IndexError(f"tuple id out of range for column of length {len(self.raw)}")
        parts = parallel.map_chunks(lambda lo, hi: self.raw[ids[lo:hi]], len(ids))
        return parts[0] if len(parts) == 1 else np.concatenate(parts)

    def append(self, new_values) -> "Column":
        """Append values (taking the next dense ids) and return the reindexed column.

        When this column's index already exists the sorted delta is merged into
        it instead of re-sorting everything; the result is identical to
        ``build_index`` over the concatenated raw array.
        """
        new_values = as_values(new_values)
        if len(new_values) == 0:
            return self
        n = len(self.raw)
        out = self._grow(new_values)
        if self._sorted_idx is None or n == 0:
            return out
        out._set_index(*_merge_index(self._sorted_idx, self._unique, new_values, n))
        return out

    def _grow(self, new_values: np.ndarray) -> "Column":
        # Only the column owning the end of the buffer may write past it; the
        # older views stop at their own length and never see the new values.
        n, m = len(self.raw), len(new_values)
        buf, fill = self._buf, self._fill
        if buf is None or fill[0] != n or len(buf) < n + m:
            buf = np.empty(max(2 * (n + m), 64), dtype=VALUE_DTYPE)
            buf[:n] = self.raw
            fill = [n]
        buf[n:n + m] = new_values
        fill[0] = n + m
        out = Column(buf[:n + m], _owned=True)
        out._buf, out._fill = buf, fill
        return out


def _empty(n: int, dtype) -> np.ndarray:
    """Uninitialised array whose allocation is rounded up to a size class.

    A relation's index grows by a little every iteration.  Rounding keeps the
    allocation size constant across many merges, so the allocator can reuse
    freed memory instead of mapping (and faulting in) fresh pages each time.
    """
    if n < 4096:
        return np.empty(n, dtype=dtype)
    top = 1 << (n.bit_length() - 1)
    cap = top + -(-(n - top) // (top >> 2)) * (top >> 2)
    return np.empty(cap, dtype=dtype)[:n]


def _insert_sorted(sorted_idx: np.ndarray, at: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """``np.insert`` for non-decreasing insertion points, using size-class buffers."""
    total = len(sorted_idx) + len(ids)
    new_pos = at + np.arange(len(ids))
    keep = _empty(total, bool)
    keep.fill(True)
    keep[new_pos] = False
    out = _empty(total, ID_DTYPE)
    out[new_pos] = ids
    out[keep] = sorted_idx
    return out


def _merge_index(sorted_idx: np.ndarray, unique: UniqueIndex, new_values: np.ndarray,
                 n: int) -> tuple[np.ndarray, UniqueIndex]:
    d_order = np.argsort(new_values, kind="stable")
    d_vals = new_values[d_order]

    # insert after the run of equal old values: old ids are smaller
    slot = np.searchsorted(unique.key_values, d_vals)
    slot_c = np.minimum(slot, len(unique.key_values) - 1)
    hit = (slot < len(unique.key_values)) & (unique.key_values[slot_c] == d_vals)
    run_end = unique.starts + unique.counts
    at = np.where(slot < len(unique.key_values), unique.starts[slot_c], n)
    at = np.where(hit, run_end[slot_c], at)
    merged_idx = _insert_sorted(sorted_idx, at, (d_order + n).astype(ID_DTYPE))

    d_keys, d_counts = np.unique(d_vals, return_counts=True)
    keys = np.union1d(unique.key_values, d_keys).astype(VALUE_DTYPE, copy=False)
    counts = np.zeros(len(keys), dtype=POS_DTYPE)
    counts[np.searchsorted(keys, unique.key_values)] += unique.counts
    counts[np.searchsorted(keys, d_keys)] += d_counts
    starts = np.zeros(len(keys), dtype=POS_DTYPE)
    np.cumsum(counts[:-1], out=starts[1:])
    return merged_idx, UniqueIndex(keys, starts, counts)


def append_and_reindex(col: Column, new_values) -> Column:
    return col.append(new_values)
