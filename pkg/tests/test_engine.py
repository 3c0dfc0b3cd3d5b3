import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsmlog.compiler import compile_rule
from dsmlog.dictionary import Dictionary
from dsmlog.engine import delta_rewrite, evaluate, run_iteration, seed
from dsmlog.oracle import naive_evaluate
from dsmlog.relation import VersionKind
from dsmlog.syntax import ProgramError, parse_program

from conftest import SG_SOURCE, edb_arrays, path_edges, random_edb, random_program_source

FULL, DELTA = VersionKind.FULL, VersionKind.DELTA


def test_seed_deduplicates_and_sets_full_equal_delta():
    prog = parse_program("e(1, 2). e(1, 2). e(2, 3).\nr(x, y) :- e(x, y).")
    state = seed(prog, {"e": np.array([[2, 3], [4, 5]], dtype=np.uint32)})
    e = state.relations["e"]
    assert e.full.to_tuples() == [(1, 2), (2, 3), (4, 5)]
    assert e.delta.to_tuples() == e.full.to_tuples()
    assert len(e.new) == 0
    assert len(state.relations["r"].full) == 0
    assert state.iteration == 0


def test_seed_rejects_invalid_program():
    prog = parse_program("r(x, y) :- e(x, z).", validate=False)
    with pytest.raises(ProgramError):
        seed(prog)


def test_delta_rewrite_variant_counts(tc_program):
    idb = tc_program.idb()
    base, rec = (compile_rule(r, tc_program) for r in tc_program.rules)
    assert [v.kinds for v in delta_rewrite(base, idb)] == [(FULL,)]
    assert [v.kinds for v in delta_rewrite(rec, idb)] == [(FULL, DELTA)]

    prog = parse_program("p(x, y) :- e(x, y).\np(x, z) :- p(x, y), e(y, w), p(w, z).")
    plan = compile_rule(prog.rules[1], prog)
    kinds = [v.kinds for v in delta_rewrite(plan, prog.idb())]
    assert kinds == [(DELTA, FULL, FULL), (FULL, FULL, DELTA)]


def test_path_three_iterations(tc_program):
    state = evaluate(tc_program, {"edge": np.array([[1, 2], [2, 3]], dtype=np.uint32)})
    assert state.row_set("reach") == {(1, 2), (1, 3), (2, 3)}
    assert [s.delta["reach"] for s in state.stats] == [2, 1, 0]
    assert state.iteration == 3
    assert state.saturated


def test_path_ten(tc_program):
    state = evaluate(tc_program, {"edge": np.array(path_edges(10), dtype=np.uint32)})
    assert len(state.relations["reach"].full) == 45
    assert state.row_set("reach") == {(i, j) for i in range(10) for j in range(i + 1, 10)}


def test_one_merge_per_relation_per_iteration(sg_program, rng):
    edges = rng.integers(0, 30, (80, 2))
    state = evaluate(sg_program, {"edge": edges})
    for it in state.stats:
        assert it.merges == {"sg": 1}
    assert state.relations["sg"].merges == state.iteration


def test_full_grows_by_appending(tc_program):
    state = seed(tc_program, {"edge": np.array(path_edges(8), dtype=np.uint32)})
    prev = []
    while True:
        old_full = state.relations["reach"].full.to_tuples()
        state, deltas = run_iteration(state, check=True)
        rel = state.relations["reach"]
        full = rel.full.to_tuples()
        assert full[:len(old_full)] == old_full  # existing rows keep their ids
        assert full[len(old_full):] == rel.delta.to_tuples()
        assert not set(rel.delta.to_tuples()) & set(old_full)
        assert len(full) == len(set(full))
        assert len(full) >= len(prev)
        prev = full
        if not any(deltas.values()):
            break


def test_facts_for_derived_relation_are_kept():
    prog = parse_program("p(9, 9).\np(x, y) :- e(x, y).\ne(1, 2).")
    assert evaluate(prog).row_set("p") == {(9, 9), (1, 2)}


def test_string_facts_use_dictionary():
    prog = parse_program('parent("ann", "bob"). parent("bob", "cy").\n'
                         'anc(x, y) :- parent(x, y).\nanc(x, z) :- parent(x, y), anc(y, z).\n'
                         'root_of_cy(x) :- anc(x, "cy").')
    d = Dictionary()
    state = evaluate(prog, dictionary=d)
    decoded = {tuple(d.decode(v) for v in r) for r in state.row_set("anc")}
    assert decoded == {("ann", "bob"), ("bob", "cy"), ("ann", "cy")}
    assert {d.decode(r[0]) for r in state.row_set("root_of_cy")} == {"ann", "bob"}


def test_max_iterations(tc_program):
    with pytest.raises(RuntimeError):
        evaluate(tc_program, {"edge": np.array(path_edges(20))}, max_iterations=3)


def test_empty_input(tc_program):
    state = evaluate(tc_program)
    assert state.sizes() == {"reach": 0, "edge": 0}
    assert state.iteration == 1


def naive_sets(prog, edb):
    return naive_evaluate(prog, edb)


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2**32))
def test_semi_naive_equals_naive(seed_):
    rnd = random.Random(seed_)
    prog = parse_program(random_program_source(rnd))
    edb = random_edb(rnd)
    state = evaluate(prog, edb_arrays(edb, prog), check=True)
    want = naive_sets(prog, edb)
    for name in prog.relations:
        assert state.row_set(name) == want[name], name


def test_semi_naive_equals_naive_chunked(chunked):
    for s in range(15):
        rnd = random.Random(s)
        prog = parse_program(random_program_source(rnd, n_rules=5))
        edb = random_edb(rnd, n=20)
        state = evaluate(prog, edb_arrays(edb, prog))
        want = naive_sets(prog, edb)
        assert all(state.row_set(n) == want[n] for n in prog.relations)


def test_same_generation_matches_naive(rng):
    prog = parse_program(SG_SOURCE)
    for _ in range(3):
        edges = rng.integers(0, 25, (60, 2))
        state = evaluate(prog, {"edge": edges})
        want = naive_evaluate(prog, {"edge": [tuple(e) for e in edges.tolist()]})
        assert state.row_set("sg") == want["sg"]


def test_result_independent_of_workers(sg_program, rng, monkeypatch):
    from dsmlog import parallel
    monkeypatch.setattr(parallel, "MIN_CHUNK", 16)
    edges = rng.integers(0, 40, (150, 2))
    results = [evaluate(sg_program, {"edge": edges}, workers=w).rows("sg") for w in (1, 3, 8)]
    assert results[0] == results[1] == results[2]


UNIVERSITY = """
subOrganizationOf(x, z) :- subOrganizationOf(x, y), subOrganizationOf(y, z).
memberOf(x, y) :- worksFor(x, y).
memberOf(x, y) :- headOf(x, y).
worksFor(x, y) :- headOf(x, y).
memberOf(x, z) :- memberOf(x, y), subOrganizationOf(y, z).
person(x) :- memberOf(x, y).
employee(x) :- worksFor(x, y).
student(x) :- takesCourse(x, c), teacherOf(t, c).
degreeFrom(x, u) :- doctoralDegreeFrom(x, u).
hasAlumnus(u, x) :- degreeFrom(x, u).
colleague(x, y) :- worksFor(x, d), worksFor(y, d), x != y.
"""


def test_university_style_program(rng):
    prog = parse_program(UNIVERSITY)
    depts = [(10 + i, 5 + i % 3) for i in range(9)] + [(5, 1), (6, 1), (7, 2)]
    edb = {
        "subOrganizationOf": depts,
        "worksFor": [(100 + i, 10 + int(rng.integers(9))) for i in range(40)],
        "headOf": [(200 + i, 10 + i) for i in range(9)],
        "takesCourse": [(300 + i, 50 + int(rng.integers(5))) for i in range(30)],
        "teacherOf": [(100 + i, 50 + i) for i in range(4)],
        "doctoralDegreeFrom": [(100 + i, 1 + i % 2) for i in range(10)],
    }
    state = evaluate(prog, edb_arrays(edb, prog), check=True)
    want = naive_evaluate(prog, edb)
    for name in prog.relations:
        assert state.row_set(name) == want[name], name
    assert len(state.row_set("memberOf")) > len(edb["worksFor"])
