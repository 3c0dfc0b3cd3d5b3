"""Naive bottom-up evaluator over Python sets of tuples.

This is the ground truth for the engine's tests.  It shares only the AST with
the engine and deliberately avoids the column store and kernels.  A rule body
is matched set-at-a-time: the list of variable bindings is extended atom by
atom through a throwaway dict index on the positions already bound.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Callable, Iterable, Mapping

from .syntax import Constant, Program, Rule, Variable

RowSet = dict[str, set[tuple]]


def _constant(const: Constant, encode: Callable[[str], int] | None):
    if isinstance(const.value, str) and encode is not None:
        return encode(const.value)
    return const.value


def _getter(positions):
    positions = tuple(positions)
    return lambda t: tuple(t[p] for p in positions)


class _Index:
    def __init__(self, rows: RowSet):
        self.rows = rows
        self._cache: dict[tuple, dict] = {}

    def lookup_table(self, relation, key_pos, key_consts, same, out_pos):
        """Map (values at key_pos) -> list of row projections onto out_pos.

        Only rows whose ``key_consts`` positions hold the given constants and
        whose ``same`` position pairs agree are indexed.
        """
        sig = (relation, key_pos, key_consts, same, out_pos)
        table = self._cache.get(sig)
        if table is None:
            table = defaultdict(list)
            for row in self.rows.get(relation, ()):
                if all(row[p] == v for p, v in key_consts) and all(row[i] == row[j] for i, j in same):
                    table[tuple(row[p] for p in key_pos)].append(tuple(row[p] for p in out_pos))
            self._cache[sig] = table
        return table


def _apply(rule: Rule, index: _Index, encode) -> set[tuple]:
    names: list[str] = []  # variable order of a binding tuple
    bindings: list[tuple] = [()]
    tail_vars = {a.name for a in rule.head.args if isinstance(a, Variable)}
    tail_vars |= {v.name for g in rule.guards for v in (g.left, g.right)}
    needed_after = []
    for atom in reversed(rule.body):
        needed_after.append(set(tail_vars))
        tail_vars |= set(atom.variables())
    needed_after.reverse()

    for atom, needed in zip(rule.body, needed_after):
        key_pos, bind_slots, consts, same, out_pos, first = [], [], [], [], [], {}
        for p, arg in enumerate(atom.args):
            if isinstance(arg, Constant):
                consts.append((p, _constant(arg, encode)))
            elif arg.name in names:
                key_pos.append(p)
                bind_slots.append(names.index(arg.name))
            elif arg.name in first:
                same.append((first[arg.name], p))
            else:
                first[arg.name] = p
                out_pos.append(p)
        table = index.lookup_table(atom.relation, tuple(key_pos), tuple(consts), tuple(same),
                                   tuple(out_pos))
        key_of = _getter(bind_slots)
        bindings = [b + t for b in bindings for t in table.get(key_of(b), ())]
        names += [a.name for a in (atom.args[p] for p in out_pos)]
        if not bindings:
            return set()
        # drop variables nothing later refers to; set semantics make this exact
        keep = [i for i, n in enumerate(names) if n in needed]
        if len(keep) < len(names):
            project = _getter(keep)
            bindings = list({project(b) for b in bindings})
            names = [names[i] for i in keep]

    slot = {n: i for i, n in enumerate(names)}
    for g in rule.guards:
        i, j = slot[g.left.name], slot[g.right.name]
        bindings = [b for b in bindings if b[i] != b[j]]
    head = [(True, slot[a.name]) if isinstance(a, Variable) else (False, _constant(a, encode))
            for a in rule.head.args]
    return {tuple(b[x] if is_var else x for is_var, x in head) for b in bindings}


def single_step(rule: Rule, rows: RowSet, encode: Callable[[str], int] | None = None) -> set[tuple]:
    """Head tuples produced by one application of ``rule`` to ``rows``."""
    return _apply(rule, _Index(rows), encode)


def naive_evaluate(program: Program, edb: Mapping[str, Iterable[tuple]] | None = None,
                   encode: Callable[[str], int] | None = None) -> RowSet:
    """Least model of ``program`` over ``edb`` by repeated full rule application.

    ``encode`` maps string constants to values; without it strings are kept
    as they are.
    """
    rows: RowSet = {name: set() for name in program.relations}
    for name, facts in program.facts.items():
        rows[name] |= {tuple(_constant(c, encode) for c in row) for row in facts}
    for name, facts in (edb or {}).items():
        rows.setdefault(name, set()).update(tuple(int(v) for v in row) for row in facts)

    while True:
        index = _Index(rows)
        derived = defaultdict(set)
        for rule in program.rules:
            derived[rule.head.relation] |= _apply(rule, index, encode)
        changed = False
        for name, tuples in derived.items():
            fresh = tuples - rows[name]
            if fresh:
                rows[name] = rows[name] | fresh
                changed = True
        if not changed:
            return rows
