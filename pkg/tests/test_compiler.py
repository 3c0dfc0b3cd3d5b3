import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsmlog.compiler import Slot, compile_program, compile_rule, execute
from dsmlog.dictionary import Dictionary
from dsmlog.oracle import single_step
from dsmlog.relation import decompose
from dsmlog.syntax import ProgramError, parse_program

from conftest import DOMAIN, EDB_ARITY, IDB_ARITY, random_program_source


def plan_of(src, **kw):
    prog = parse_program(src, validate=False)
    return compile_rule(prog.rules[0], prog, **kw)


def run(src, rows):
    prog = parse_program(src)
    plan = compile_rule(prog.rules[0], prog)
    sources = [decompose(sorted(rows.get(r, ())), prog.relations[r]) for r in plan.relations]
    return set(execute(plan, sources).to_tuples()), single_step(prog.rules[0], rows)


def test_recursive_rule_plan(tc_program):
    plan = compile_rule(tc_program.rules[1], tc_program)
    assert plan.relations == ("edge", "reach")
    (step,) = plan.joins
    assert step.probe == Slot(0, 1) and step.build_column == 0
    assert step.residuals == ()
    assert plan.outputs == (Slot(0, 0), Slot(1, 1))
    assert "join atom0.col1 with atom1.col0" in plan.describe()


def test_residual_equalities_and_selections():
    plan = plan_of("r(x, y) :- e(x, y), e(y, x).")
    (step,) = plan.joins
    assert step.probe == Slot(0, 1) and step.build_column == 0
    assert step.residuals == ((Slot(0, 0), 1),)

    plan = plan_of("r(x) :- e(x, 3), e(x, x).")
    assert plan.scans[0].selections == ((1, 3),)
    assert plan.scans[1].equalities == ((0, 1),)


def test_guard_only_variable_is_projected_then_dropped():
    plan = plan_of("r(x) :- e(x, y), e(y, z), x != z.")
    assert plan.head_arity == 1
    assert len(plan.outputs) == 2
    assert plan.guards == ((0, 1),)
    got, want = run("r(x) :- e(x, y), e(y, z), x != z.", {"e": {(1, 2), (2, 1), (2, 3)}})
    assert got == want == {(1,)}


def test_head_constants_and_string_constants():
    d = Dictionary()
    plan = plan_of('r(x, "k") :- e(x, "a").', dictionary=d)
    assert plan.scans[0].selections == ((1, d.lookup("a")),)
    assert plan.outputs[1] == d.lookup("k")
    with pytest.raises(ValueError):
        plan_of('r(x) :- e(x, "a").')


def test_cross_product_rejected():
    with pytest.raises(ProgramError) as exc:
        plan_of("r(x, y) :- e(x, x), f(y).")
    assert "cross products" in str(exc.value)


def test_execute_examples():
    edges = {(1, 2), (2, 3), (3, 1), (3, 3)}
    for src in ["r(x, z) :- e(x, y), e(y, z).",
                "r(x, y) :- e(x, y), e(y, x).",
                "r(x) :- e(x, x).",
                "r(x, y) :- e(x, y), x != y.",
                "r(y) :- e(3, y).",
                "r(x, w) :- e(x, y), e(y, z), e(z, w), x != w."]:
        got, want = run(src, {"e": edges})
        assert got == want, src


def test_execute_checks_source_count(tc_program):
    plan = compile_rule(tc_program.rules[1], tc_program)
    with pytest.raises(ValueError):
        execute(plan, [decompose([(1, 2)])])


def test_execute_on_empty_versions(tc_program):
    plan = compile_rule(tc_program.rules[1], tc_program)
    out = execute(plan, [decompose([], arity=2), decompose([(1, 2)])])
    assert len(out) == 0 and out.arity == 2


def random_rows(rnd, arity):
    return {tuple(rnd.randrange(DOMAIN) for _ in range(arity)) for _ in range(rnd.randint(0, 15))}


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32))
def test_compiled_rules_match_single_step(seed):
    rnd = random.Random(seed)
    prog = parse_program(random_program_source(rnd))
    rows = {name: random_rows(rnd, a) for name, a in {**EDB_ARITY, **IDB_ARITY}.items()}
    for rule, plan in zip(prog.rules, compile_program(prog)):
        sources = [decompose(sorted(rows[r]), prog.relations[r]) for r in plan.relations]
        got = execute(plan, sources).to_tuples()
        assert set(got) == single_step(rule, rows), str(rule)


def test_compiled_rules_match_single_step_chunked(chunked):
    for seed in range(20):
        rnd = random.Random(seed)
        prog = parse_program(random_program_source(rnd))
        rows = {name: random_rows(rnd, a) for name, a in {**EDB_ARITY, **IDB_ARITY}.items()}
        for rule, plan in zip(prog.rules, compile_program(prog)):
            sources = [decompose(sorted(rows[r]), prog.relations[r]) for r in plan.relations]
            assert set(execute(plan, sources).to_tuples()) == single_step(rule, rows)
