"""Relational algebra kernels over decomposed relations.

Each kernel follows the same bulk shape: a counting phase, one allocation of
the exact output size, and a write phase where every worker owns a disjoint
slice of the output.  Joins return tuple-id pairs only; values are read when a
projection asks for them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import parallel
from .column import ID_DTYPE, POS_DTYPE, Column, as_ids
from .relation import Version

_EMPTY_IDS = np.empty(0, dtype=ID_DTYPE)


def _raw(col) -> np.ndarray:
    return col.raw if isinstance(col, Column) else np.asarray(col)


def _concat(parts: list[np.ndarray]) -> np.ndarray:
    return parts[0] if len(parts) == 1 else np.concatenate(parts)


@dataclass(frozen=True)
class IdPairSet:
    """Matched tuple ids of a binary join, aligned by position."""

    a_ids: np.ndarray
    b_ids: np.ndarray

    def __post_init__(self):
        if len(self.a_ids) != len(self.b_ids):
            raise ValueError("IdPairSet arrays must have equal length")

    def __len__(self) -> int:
        return len(self.a_ids)

    def take(self, keep: np.ndarray) -> "IdPairSet":
        return IdPairSet(self.a_ids[keep], self.b_ids[keep])

    def as_set(self) -> set[tuple[int, int]]:
        return set(zip(self.a_ids.tolist(), self.b_ids.tolist()))


@dataclass(frozen=True)
class MatchVector:
    """Phase-1 state of a join: non-empty build-side ranges per matched probe id.

    ``pos_buf`` is the exclusive prefix sum of ``counts``; ``total_size`` is
    their sum and the exact length of the join output.
    """

    starts: np.ndarray
    counts: np.ndarray
    matched: np.ndarray
    pos_buf: np.ndarray
    total_size: int


# -- selection / projection ------------------------------------------------


def select_eq(col: Column, value) -> np.ndarray:
    """Ascending ids whose value equals ``value``."""
    rng = col.probe(value)
    if rng is None:
        return _EMPTY_IDS
    # ties in sorted_idx are already in ascending id order
    return np.array(col.sorted_idx[rng.start:rng.start + rng.count], dtype=ID_DTYPE)


def filter_eq(ver: Version, i: int, j: int, ids=None) -> np.ndarray:
    """Ids (optionally restricted to ``ids``) where column i equals column j."""
    ids = np.arange(len(ver), dtype=ID_DTYPE) if ids is None else as_ids(ids)
    a, b = ver.columns[i].raw, ver.columns[j].raw
    parts = parallel.map_chunks(lambda lo, hi: ids[lo:hi][a[ids[lo:hi]] == b[ids[lo:hi]]], len(ids))
    return _concat(parts)


def filter_neq(ver: Version, i: int, j: int) -> np.ndarray:
    """Ids where column i differs from column j."""
    if not (0 <= i < ver.arity and 0 <= j < ver.arity):
        raise IndexError(f"guard columns ({i}, {j}) out of range for arity {ver.arity}")
    a, b = ver.columns[i].raw, ver.columns[j].raw
    parts = parallel.map_chunks(lambda lo, hi: np.flatnonzero(a[lo:hi] != b[lo:hi]) + lo, len(ver))
    return _concat(parts).astype(ID_DTYPE, copy=False)


def project(ver: Version, ids, col_map) -> Version:
    """Materialise ``ver.columns[col_map[k]].raw[ids]`` for every output column k."""
    ids = as_ids(ids)
    col_map = list(col_map)
    if not col_map:
        raise ValueError("projection needs at least one output column")
    if len(ids) == 0:
        return Version.empty(len(col_map))
    cache: dict[int, Column] = {}
    out = []
    for src in col_map:
        if src not in cache:
            cache[src] = Column(ver.columns[src].gather(ids), _owned=True)
        out.append(cache[src])
    return Version(out)


# -- join ---------------------------------------------------------------------


def join_count(probe, build: Column) -> MatchVector:
    """Phase 1: probe every value of ``probe`` in ``build``'s unique index.

    ``probe`` may be a Column or a raw value array (only raw values are read).
    """
    values = _raw(probe)
    starts, counts = build.probe_many(values)
    matched = np.flatnonzero(counts > 0).astype(ID_DTYPE, copy=False)
    starts, counts = starts[matched], counts[matched]
    total_size = int(counts.sum())
    pos_buf = np.zeros(len(counts), dtype=POS_DTYPE)
    if len(counts) > 1:
        np.cumsum(counts[:-1], out=pos_buf[1:])
    return MatchVector(starts, counts, matched, pos_buf, total_size)


def join_write(mv: MatchVector, build: Column) -> IdPairSet:
    """Phase 2: every output slot locates its range by binary search over pos_buf."""
    sorted_idx = build.sorted_idx
    a_out = np.empty(mv.total_size, dtype=ID_DTYPE)
    b_out = np.empty(mv.total_size, dtype=ID_DTYPE)

    def write(lo: int, hi: int) -> None:
        n = np.arange(lo, hi, dtype=POS_DTYPE)
        j = np.searchsorted(mv.pos_buf, n, side="right") - 1
        a_out[lo:hi] = mv.matched[j]
        b_out[lo:hi] = sorted_idx[mv.starts[j] + (n - mv.pos_buf[j])]

    if mv.total_size:
        parallel.map_chunks(write, mv.total_size)
    return IdPairSet(a_out, b_out)


def column_join(probe, build: Column) -> IdPairSet:
    """All id pairs ``(a, b)`` with ``probe.raw[a] == build.raw[b]``.

    Pairs are grouped by probe id (ascending); within a group build ids follow
    the build column's sorted index, i.e. ascending.
    """
    return join_write(join_count(probe, build), build)


def filter_pairs_eq(pairs: IdPairSet, col_a, col_b) -> IdPairSet:
    """Keep pairs whose values also agree on a second column pair."""
    a, b = _raw(col_a), _raw(col_b)

    def keep(lo: int, hi: int) -> np.ndarray:
        return np.flatnonzero(a[pairs.a_ids[lo:hi]] == b[pairs.b_ids[lo:hi]]) + lo

    return pairs.take(_concat(parallel.map_chunks(keep, len(pairs))))


# -- deduplication, difference, union -----------------------------------------


def deduplicate(new: Version, full: Version) -> np.ndarray:
    """Bitmap over NEW's ids: True where the row already exists in FULL.

    Every column of NEW is probed against the matching FULL column in its own
    pass.  Rows missing from any column's unique index drop out before the
    overlap check.  For the rest, the id run of the narrowest column is
    enumerated and each candidate id is accepted if FULL holds the NEW row's
    value in every other column at that id, which is membership in that
    column's id run.
    """
    if new.arity != full.arity:
        raise ValueError(f"arity mismatch: NEW {new.arity} vs FULL {full.arity}")
    flags = np.zeros(len(new), dtype=bool)
    if len(new) == 0 or len(full) == 0:
        return flags

    probes = [fc.probe_many(nc.raw) for nc, fc in zip(new.columns, full.columns)]
    counts = np.stack([c for _, c in probes], axis=1)
    alive = np.flatnonzero((counts > 0).all(axis=1))
    if len(alive) == 0:
        return flags

    counts = counts[alive]
    narrowest = np.argmin(counts, axis=1)
    for j in range(new.arity):
        group = alive[narrowest == j]
        if len(group) == 0:
            continue
        others = [k for k in range(new.arity) if k != j]
        if not others:
            flags[group] = True
            continue
        starts, sizes = probes[j][0][group], probes[j][1][group]
        sorted_idx = full.columns[j].sorted_idx

        def check(lo: int, hi: int) -> np.ndarray:
            g, s, k = group[lo:hi], starts[lo:hi], sizes[lo:hi]
            # positions fit in 32 bits whenever FULL and the candidate list do
            dt = ID_DTYPE if int(k.sum()) + len(sorted_idx) < np.iinfo(ID_DTYPE).max else POS_DTYPE
            pos = np.zeros(len(k), dtype=dt)
            np.cumsum(k[:-1], out=pos[1:])
            at = np.repeat((s - pos).astype(dt, copy=False), k)
            at += np.arange(len(at), dtype=dt)
            cand = sorted_idx[at]
            ok = full.columns[others[0]].raw[cand] == np.repeat(new.columns[others[0]].raw[g], k)
            for other in others[1:]:
                ok &= full.columns[other].raw[cand] == np.repeat(new.columns[other].raw[g], k)
            # every run is non-empty, so reduceat sees one segment per row
            return g[np.logical_or.reduceat(ok, pos)]

        # chunks split the rows (not the candidates) so each chunk owns whole runs
        hits = _concat(parallel.map_chunks(check, len(group)))
        flags[hits] = True
    return flags


def difference(new: Version, flags) -> Version:
    """Rows of NEW whose flag is False, re-densified in their original order."""
    flags = np.asarray(flags, dtype=bool)
    if len(flags) != len(new):
        raise ValueError("flag bitmap must be aligned with NEW")
    if not flags.any():
        return new
    return new.take(np.flatnonzero(~flags))


def union_concat(full: Version, delta: Version) -> Version:
    """Set union of disjoint versions, realised as column-wise concatenation."""
    return full.append(delta)
