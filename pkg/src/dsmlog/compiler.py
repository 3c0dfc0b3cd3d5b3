"""Compile rules into relational algebra plans and execute them.

Body atoms are joined left to right.  For every join step the first variable
(in the right atom's argument order) shared with the atoms already joined is
the hash-join column; further shared variables become residual equality
filters.  Constants and repeated variables inside one atom become selections
applied before the atom is joined.  Inequality guards run on the projected
candidate rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .column import ID_DTYPE, VALUE_DTYPE, Column
from .dictionary import Dictionary
from .kernels import column_join, filter_eq, filter_neq, filter_pairs_eq, project, select_eq
from .relation import Version
from .syntax import Constant, Diagnostic, Program, ProgramError, Rule, Variable


@dataclass(frozen=True)
class Slot:
    """Column ``column`` of body atom ``atom``."""

    atom: int
    column: int


@dataclass(frozen=True)
class Scan:
    atom: int
    relation: str
    arity: int
    selections: tuple[tuple[int, int], ...] = ()
    equalities: tuple[tuple[int, int], ...] = ()

    @property
    def filtered(self) -> bool:
        return bool(self.selections or self.equalities)


@dataclass(frozen=True)
class JoinStep:
    right: int
    probe: Slot
    build_column: int
    residuals: tuple[tuple[Slot, int], ...] = ()


Output = Union[Slot, int]


@dataclass(frozen=True)
class RulePlan:
    target: str
    head_arity: int
    scans: tuple[Scan, ...]
    joins: tuple[JoinStep, ...]
    # head columns first, then any guard-only variables; an int is a constant
    outputs: tuple[Output, ...]
    guards: tuple[tuple[int, int], ...]
    rule: Rule = field(default=None, compare=False)

    @property
    def relations(self) -> tuple[str, ...]:
        return tuple(s.relation for s in self.scans)

    def describe(self) -> str:
        lines = [f"plan for {self.rule}" if self.rule else f"plan -> {self.target}"]
        for scan in self.scans:
            extra = []
            if scan.selections:
                extra.append("select " + ", ".join(f"col{c}={v}" for c, v in scan.selections))
            if scan.equalities:
                extra.append("filter " + ", ".join(f"col{a}=col{b}" for a, b in scan.equalities))
            lines.append(f"  atom {scan.atom}: {scan.relation}" + (f" [{'; '.join(extra)}]" if extra else ""))
        for step in self.joins:
            res = "".join(f", residual atom{s.atom}.col{s.column}=col{c}" for s, c in step.residuals)
            lines.append(f"  join atom{step.probe.atom}.col{step.probe.column} "
                         f"with atom{step.right}.col{step.build_column}{res}")
        outs = ", ".join(f"atom{o.atom}.col{o.column}" if isinstance(o, Slot) else str(o)
                         for o in self.outputs)
        lines.append(f"  project ({outs})")
        for i, j in self.guards:
            lines.append(f"  guard out{i} != out{j}")
        if len(self.outputs) > self.head_arity:
            lines.append(f"  project out0..out{self.head_arity - 1}")
        return "\n".join(lines)


def encode_constant(const: Constant, dictionary: Dictionary | None) -> int:
    if isinstance(const.value, int):
        return const.value
    if dictionary is None:
        raise ValueError(f"string constant {const} needs a dictionary")
    return dictionary.encode(const.value)


def compile_rule(rule: Rule, program: Program | None = None,
                 dictionary: Dictionary | None = None) -> RulePlan:
    """Translate one validated rule into a :class:`RulePlan`."""
    fn = program.filename if program is not None else "<input>"
    scans, bound = [], {}
    for idx, atom in enumerate(rule.body):
        sel, eqs, first_col = [], [], {}
        for col, arg in enumerate(atom.args):
            if isinstance(arg, Constant):
                sel.append((col, encode_constant(arg, dictionary)))
            elif arg.name in first_col:
                eqs.append((first_col[arg.name], col))
            else:
                first_col[arg.name] = col
        scans.append(Scan(idx, atom.relation, atom.arity, tuple(sel), tuple(eqs)))

    # variable -> slot of its first binding on the left side
    for col, arg in enumerate(rule.body[0].args):
        if isinstance(arg, Variable):
            bound.setdefault(arg.name, Slot(0, col))

    joins = []
    for idx, atom in enumerate(rule.body[1:], start=1):
        shared = []
        seen_here = set()
        for col, arg in enumerate(atom.args):
            if isinstance(arg, Variable) and arg.name in bound and arg.name not in seen_here:
                shared.append((bound[arg.name], col))
                seen_here.add(arg.name)
        if not shared:
            raise ProgramError([Diagnostic(
                f"atom {atom} shares no variable with the atoms before it "
                "(cross products are not supported)", atom.pos, fn)])
        (probe, build_col), residuals = shared[0], tuple(shared[1:])
        joins.append(JoinStep(idx, probe, build_col, residuals))
        for col, arg in enumerate(atom.args):
            if isinstance(arg, Variable):
                bound.setdefault(arg.name, Slot(idx, col))

    outputs: list[Output] = []
    for arg in rule.head.args:
        if isinstance(arg, Constant):
            outputs.append(encode_constant(arg, dictionary))
        elif arg.name in bound:
            outputs.append(bound[arg.name])
        else:
            raise ProgramError([Diagnostic(
                f"head variable {arg.name!r} does not occur in the body", rule.head.pos, fn)])

    out_index = {arg.name: i for i, arg in enumerate(rule.head.args) if isinstance(arg, Variable)}
    guards = []
    for g in rule.guards:
        pair = []
        for var in (g.left, g.right):
            if var.name not in bound:
                raise ProgramError([Diagnostic(
                    f"guard variable {var.name!r} does not occur in a body atom", g.pos, fn)])
            if var.name not in out_index:
                out_index[var.name] = len(outputs)
                outputs.append(bound[var.name])
            pair.append(out_index[var.name])
        guards.append(tuple(pair))

    return RulePlan(rule.head.relation, rule.head.arity, tuple(scans), tuple(joins),
                    tuple(outputs), tuple(guards), rule)


def compile_program(program: Program, dictionary: Dictionary | None = None) -> list[RulePlan]:
    return [compile_rule(r, program, dictionary) for r in program.rules]


# -- execution -----------------------------------------------------------------


def scan_ids(scan: Scan, ver: Version) -> np.ndarray:
    """Ascending ids of ``ver`` that pass the scan's constant and equality filters."""
    if not scan.selections:
        ids = np.arange(len(ver), dtype=ID_DTYPE)
    else:
        col, value = scan.selections[0]
        ids = select_eq(ver.columns[col], value)
        for col, value in scan.selections[1:]:
            ids = np.intersect1d(ids, select_eq(ver.columns[col], value), assume_unique=True)
    for i, j in scan.equalities:
        if len(ids) == 0:
            break
        ids = filter_eq(ver, i, j, ids)
    return ids


def execute(plan: RulePlan, sources: Sequence[Version]) -> Version:
    """Run the plan once; ``sources[i]`` is the version read for body atom i.

    Joins carry only tuple ids per atom; values are gathered for join keys and
    for the final projection.
    """
    if len(sources) != len(plan.scans):
        raise ValueError(f"plan has {len(plan.scans)} atoms, got {len(sources)} sources")
    empty = Version.empty(plan.head_arity)
    ids: dict[int, np.ndarray] = {0: scan_ids(plan.scans[0], sources[0])}
    if len(ids[0]) == 0:
        return empty

    for step in plan.joins:
        right = sources[step.right]
        scan = plan.scans[step.right]
        sel = scan_ids(scan, right) if scan.filtered else None
        build = right if sel is None else right.take(sel)
        probe_vals = sources[step.probe.atom].columns[step.probe.column].gather(ids[step.probe.atom])
        pairs = column_join(probe_vals, build.columns[step.build_column])
        for slot, col in step.residuals:
            left_vals = sources[slot.atom].columns[slot.column].gather(ids[slot.atom])
            pairs = filter_pairs_eq(pairs, left_vals, build.columns[col])
        if len(pairs) == 0:
            return empty
        ids = {atom: v[pairs.a_ids] for atom, v in ids.items()}
        ids[step.right] = pairs.b_ids if sel is None else sel[pairs.b_ids]

    n = len(next(iter(ids.values())))
    cols = []
    for out in plan.outputs:
        if isinstance(out, Slot):
            cols.append(Column(sources[out.atom].columns[out.column].gather(ids[out.atom]), _owned=True))
        else:
            cols.append(Column(np.full(n, out, dtype=VALUE_DTYPE), _owned=True))
    cand = Version(cols)
    for i, j in plan.guards:
        cand = project(cand, filter_neq(cand, i, j), range(cand.arity))
        if len(cand) == 0:
            return empty
    if cand.arity > plan.head_arity:
        cand = Version(cand.columns[:plan.head_arity])
    return cand
