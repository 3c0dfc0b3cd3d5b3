import numpy as np
import pytest

from dsmlog import parallel
from dsmlog.syntax import parse_program

TC_SOURCE = """
reach(x, y) :- edge(x, y).
reach(x, z) :- edge(x, y), reach(y, z).
"""

SG_SOURCE = """
sg(x, y) :- edge(p, x), edge(p, y), x != y.
sg(x, y) :- edge(a, x), sg(a, b), edge(b, y), x != y.
"""


@pytest.fixture
def tc_program():
    return parse_program(TC_SOURCE)


@pytest.fixture
def sg_program():
    return parse_program(SG_SOURCE)


@pytest.fixture
def rng():
    return np.random.default_rng(20241018)


@pytest.fixture(params=[1, 4], ids=["w1", "w4"])
def chunked(request, monkeypatch):
    """Run with tiny chunks so the multi-chunk code paths execute."""
    monkeypatch.setattr(parallel, "MIN_CHUNK", 7)
    with parallel.workers(request.param):
        yield request.param


def brute_sorted_idx(raw):
    return sorted(range(len(raw)), key=lambda i: (int(raw[i]), i))


def brute_unique(raw):
    order = brute_sorted_idx(raw)
    out = {}
    for pos, i in enumerate(order):
        v = int(raw[i])
        start, count = out.get(v, (pos, 0))
        out[v] = (start, count + 1)
    return out


def skewed_values(rng, n, *, domain=50, dup_frac=None):
    """Values with a heavy hitter: ``dup_frac`` of entries share one value."""
    if dup_frac is None:
        dup_frac = rng.choice([0.0, 0.5, 0.9])
    vals = rng.integers(0, domain, n)
    hot = rng.random(n) < dup_frac
    vals[hot] = rng.integers(0, domain)
    return vals.astype(np.uint32)


def path_edges(n):
    return [(i, i + 1) for i in range(n - 1)]


def cycle_edges(n):
    return [(i, (i + 1) % n) for i in range(n)]


# -- random programs ---------------------------------------------------------

EDB_ARITY = {"e": 2, "f": 1, "g": 3}
IDB_ARITY = {"p": 2, "q": 2, "t": 1, "u": 3}
DOMAIN = 6


def random_atom(rnd, name, arity, bound, fresh):
    args = []
    anchor = rnd.randrange(arity)
    for i in range(arity):
        if i == anchor:
            args.append(rnd.choice(sorted(bound)) if bound else fresh())
        elif rnd.random() < 0.08:
            args.append(str(rnd.randrange(DOMAIN)))
        elif rnd.random() < 0.45 and (bound or args):
            pool = sorted(bound | {a for a in args if not a.isdigit()})
            args.append(rnd.choice(pool) if pool else fresh())
        else:
            args.append(fresh())
    return f"{name}({', '.join(args)})"


def random_rule(rnd, head, arities, body_names):
    counter = iter(range(100))
    fresh = lambda: f"v{next(counter)}"  # noqa: E731
    bound: set[str] = set()
    body = []
    for _ in range(rnd.randint(1, 3)):
        name = rnd.choice(body_names)
        atom = random_atom(rnd, name, arities[name], bound, fresh)
        body.append(atom)
        inner = atom[atom.index("(") + 1:-1].split(", ")
        bound |= {a for a in inner if not a.isdigit()}
    head_args = [rnd.choice(sorted(bound)) if rnd.random() > 0.1 else str(rnd.randrange(DOMAIN))
                 for _ in range(arities[head])]
    guards = []
    if len(bound) > 1 and rnd.random() < 0.3:
        a, b = rnd.sample(sorted(bound), 2)
        guards.append(f"{a} != {b}")
    return f"{head}({', '.join(head_args)}) :- {', '.join(body + guards)}."


def random_program_source(rnd, n_rules=None):
    """A valid random program; most derived relations get an EDB-only base rule."""
    arities = {**EDB_ARITY, **IDB_ARITY}
    lines = []
    for head in sorted(IDB_ARITY):
        if rnd.random() < 0.7:
            lines.append(random_rule(rnd, head, arities, sorted(EDB_ARITY)))
    n_rules = len(lines) + (n_rules or rnd.randint(1, 4))
    while len(lines) < n_rules:
        lines.append(random_rule(rnd, rnd.choice(sorted(IDB_ARITY)), arities, sorted(arities)))
    return "\n".join(lines) + "\n"


def random_edb(rnd, n=None):
    out = {}
    for name, arity in EDB_ARITY.items():
        k = rnd.randint(3, 30) if n is None else n
        out[name] = sorted({tuple(rnd.randrange(DOMAIN) for _ in range(arity)) for _ in range(k)})
    return out


def edb_arrays(edb, program):
    arities = program.relations
    return {k: np.array(v, dtype=np.uint32).reshape(-1, arities[k])
            for k, v in edb.items() if k in arities}


# -- acceptance reporting ----------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call":
        return
    n, title = mark.args
    status = "PASS" if report.passed else "FAIL"
    _CRITERIA[n] = (title, status, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, status, secs = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {title}  ({secs:.1f} s)")
