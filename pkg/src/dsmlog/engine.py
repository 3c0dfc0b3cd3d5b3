"""Semi-naive fixpoint evaluation over decomposed relations.

Every iteration evaluates the delta variants of all rules, pools their output
per head relation into NEW, removes rows already in FULL and merges what is
left once per relation.  Iteration 0 additionally runs the rules whose bodies
mention no derived relation; those never need to run again.
"""

from __future__ import annotations

import logging
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import parallel
from .compiler import RulePlan, compile_program, execute
from .dictionary import Dictionary
from .kernels import deduplicate, difference
from .relation import Relation, Version, VersionKind, decompose, dedup_rows, merge_delta
from .syntax import Program, ProgramError, validate_program

log = logging.getLogger(__name__)

FULL, DELTA = VersionKind.FULL, VersionKind.DELTA


@dataclass(frozen=True)
class Variant:
    """A plan together with the version each body atom reads."""

    plan: RulePlan
    kinds: tuple[VersionKind, ...]

    @property
    def delta_atom(self) -> int | None:
        return self.kinds.index(DELTA) if DELTA in self.kinds else None


@dataclass
class IterationStats:
    iteration: int
    delta: dict[str, int] = field(default_factory=dict)
    new: dict[str, int] = field(default_factory=dict)
    full: dict[str, int] = field(default_factory=dict)
    merges: dict[str, int] = field(default_factory=dict)
    ms: dict[str, float] = field(default_factory=dict)
    elapsed_ms: float = 0.0


@dataclass
class EvaluationState:
    relations: dict[str, Relation]
    idb: frozenset[str]
    plans: list[RulePlan]
    iteration: int = 0
    stats: list[IterationStats] = field(default_factory=list)
    dictionary: Dictionary | None = None

    @property
    def saturated(self) -> bool:
        return bool(self.stats) and not any(self.stats[-1].delta.values())

    def rows(self, name: str) -> list[tuple[int, ...]]:
        return self.relations[name].full.to_tuples()

    def row_set(self, name: str) -> set[tuple[int, ...]]:
        return set(self.rows(name))

    def sizes(self) -> dict[str, int]:
        return {name: len(rel.full) for name, rel in self.relations.items()}


def delta_rewrite(plan: RulePlan, idb) -> list[Variant]:
    """Semi-naive variants: one per body occurrence of a derived relation.

    Variant i reads occurrence i from DELTA and every other atom from FULL.
    FULL already contains DELTA after each merge, so reading FULL elsewhere
    is complete; the overlap it introduces is removed by deduplication.
    A rule with no derived relation in its body yields one all-FULL variant.
    """
    occurrences = [i for i, rel in enumerate(plan.relations) if rel in idb]
    if not occurrences:
        return [Variant(plan, (FULL,) * len(plan.scans))]
    return [
        Variant(plan, tuple(DELTA if j == i else FULL for j in range(len(plan.scans))))
        for i in occurrences
    ]


def _as_version(rows, arity: int) -> Version:
    if isinstance(rows, Version):
        return rows
    if isinstance(rows, np.ndarray):
        return decompose(rows.reshape(-1, arity) if rows.size else rows, arity)
    return decompose(list(rows), arity)


def seed(program: Program, edb: Mapping[str, object] | None = None,
         dictionary: Dictionary | None = None) -> EvaluationState:
    """Build the initial state: FULL = DELTA = deduplicated facts, NEW empty.

    ``edb`` maps relation names to row arrays (or Versions) of already encoded
    values.  Facts written in the program are encoded through ``dictionary``.
    """
    diagnostics = validate_program(program)
    if diagnostics:
        raise ProgramError(diagnostics)
    dictionary = dictionary if dictionary is not None else Dictionary()
    plans = compile_program(program, dictionary)
    edb = dict(edb or {})
    unknown = sorted(set(edb) - set(program.relations))
    if unknown:
        log.warning("facts supplied for relations the program never mentions: %s", unknown)

    relations = {}
    for name, arity in program.relations.items():
        parts = []
        if name in program.facts:
            rows = [[_encode_fact_value(c, dictionary) for c in row] for row in program.facts[name]]
            parts.append(decompose(rows, arity))
        if name in edb:
            parts.append(_as_version(edb[name], arity))
        facts = dedup_rows(Version.concat(parts, arity))
        relations[name] = Relation(name, arity, full=facts, delta=facts)
    return EvaluationState(relations, frozenset(program.idb()), plans, dictionary=dictionary)


def _encode_fact_value(const, dictionary: Dictionary) -> int:
    return const.value if isinstance(const.value, int) else dictionary.encode(const.value)


def variants_for(state: EvaluationState) -> list[Variant]:
    out = []
    for plan in state.plans:
        vs = delta_rewrite(plan, state.idb)
        if state.iteration == 0 or vs[0].delta_atom is not None:
            out.extend(vs)
    return out


def run_iteration(state: EvaluationState, check: bool = False) -> tuple[EvaluationState, dict[str, int]]:
    """Evaluate one semi-naive round and merge its results.

    With ``check`` the FULL-uniqueness and column-alignment invariants are
    asserted after every merge.
    """
    started = time.perf_counter()
    stats = IterationStats(state.iteration)
    produced: dict[str, list[Version]] = defaultdict(list)
    timing: dict[str, float] = defaultdict(float)

    for variant in variants_for(state):
        t0 = time.perf_counter()
        sources = [state.relations[rel].version(kind)
                   for rel, kind in zip(variant.plan.relations, variant.kinds)]
        if any(len(s) == 0 for s in sources):
            continue
        out = execute(variant.plan, sources)
        if len(out):
            produced[variant.plan.target].append(out)
        timing[variant.plan.target] += time.perf_counter() - t0

    relations = dict(state.relations)
    for name, rel in state.relations.items():
        t0 = time.perf_counter()
        if name not in state.idb:
            # nothing derives into it; its delta is spent after the first round
            if len(rel.delta):
                relations[name] = Relation(name, rel.arity, full=rel.full, merges=rel.merges)
            stats.delta[name] = 0
            continue
        new = dedup_rows(Version.concat(produced.get(name, []), rel.arity))
        flags = deduplicate(new, rel.full)
        delta = difference(new, flags)
        merged = merge_delta(Relation(name, rel.arity, full=rel.full, delta=delta, new=new,
                                      merges=rel.merges))
        relations[name] = merged
        stats.new[name] = len(new)
        stats.delta[name] = len(delta)
        stats.merges[name] = merged.merges - rel.merges
        timing[name] += time.perf_counter() - t0
        if check:
            _check_relation(merged)

    for name, rel in relations.items():
        stats.full[name] = len(rel.full)
        stats.ms[name] = timing.get(name, 0.0) * 1000.0
    stats.elapsed_ms = (time.perf_counter() - started) * 1000.0
    log.debug("iteration %d: %s", state.iteration, stats.delta)

    next_state = EvaluationState(relations, state.idb, state.plans, state.iteration + 1,
                                 state.stats + [stats], state.dictionary)
    return next_state, dict(stats.delta)


def _check_relation(rel: Relation) -> None:
    for ver in (rel.full, rel.delta, rel.new):
        lengths = {len(c) for c in ver.columns}
        assert len(lengths) == 1, f"{rel.name}: misaligned columns {lengths}"
    rows = rel.full.rows()
    if len(rows):
        distinct = np.unique(rows, axis=0)
        assert len(distinct) == len(rows), f"{rel.name}: FULL contains duplicate rows"


def evaluate(program: Program, edb: Mapping[str, object] | None = None, *,
             dictionary: Dictionary | None = None, workers: int | None = None,
             max_iterations: int | None = None, check: bool = False) -> EvaluationState:
    """Run ``program`` over ``edb`` to its least fixpoint."""
    with parallel.workers(workers or parallel.get_workers()):
        state = seed(program, edb, dictionary)
        while True:
            state, deltas = run_iteration(state, check=check)
            if not any(deltas.values()):
                return state
            if max_iterations is not None and state.iteration >= max_iterations:
                raise RuntimeError(f"no fixpoint after {max_iterations} iterations")
