"""Batch command line: run a program over a directory of fact files."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import TextIO

from . import parallel
from .dictionary import Dictionary
from .engine import EvaluationState, evaluate
from .io import FactFileError, detect_encoding, dump_relation, load_facts
from .syntax import Constant, DatalogError, Program, Variable, parse_program

log = logging.getLogger("dsmlog")


@dataclass
class RunConfig:
    program: Path
    facts: Path | None = None
    out: Path | None = None
    workers: int = parallel.max_workers()
    stats: bool = False
    dump: tuple[str, ...] | None = None
    check: bool = False


def string_columns(program: Program, loaded_as_strings: set[str]) -> dict[str, frozenset[int]]:
    """Columns holding dictionary ids, per relation, propagated through rules.

    A head column is encoded when it is a string constant or a variable bound
    to an encoded body column.
    """
    enc: dict[str, set[int]] = {name: set() for name in program.relations}
    for name in loaded_as_strings:
        enc[name] = set(range(program.relations[name]))
    for name, rows in program.facts.items():
        for row in rows:
            enc[name] |= {i for i, c in enumerate(row) if isinstance(c.value, str)}
    changed = True
    while changed:
        changed = False
        for rule in program.rules:
            bound = {arg.name for atom in rule.body for i, arg in enumerate(atom.args)
                     if isinstance(arg, Variable) and i in enc[atom.relation]}
            cols = {i for i, arg in enumerate(rule.head.args)
                    if (isinstance(arg, Variable) and arg.name in bound)
                    or (isinstance(arg, Constant) and isinstance(arg.value, str))}
            if not cols <= enc[rule.head.relation]:
                enc[rule.head.relation] |= cols
                changed = True
    return {name: frozenset(cols) for name, cols in enc.items()}


def print_summary(state: EvaluationState, elapsed: float, out: TextIO) -> None:
    sizes = state.sizes()
    width = max([len(n) for n in sizes] + [8])
    print(f"{'relation':<{width}}  size", file=out)
    for name in sorted(sizes):
        print(f"{name:<{width}}  {sizes[name]}", file=out)
    print(f"iterations: {state.iteration}", file=out)
    print(f"wall time: {elapsed * 1000.0:.1f} ms", file=out)


def print_stats(state: EvaluationState, out: TextIO) -> None:
    for it in state.stats:
        for name in sorted(state.idb):
            print(f"iter={it.iteration} rel={name} delta={it.delta.get(name, 0)} "
                  f"ms={it.ms.get(name, 0.0):.3f}", file=out)


def run(config: RunConfig, stdout: TextIO = sys.stdout, stderr: TextIO = sys.stderr) -> int:
    """Parse, validate, load, evaluate, dump and summarise; returns the exit code."""
    started = time.perf_counter()
    try:
        text = Path(config.program).read_text(encoding="utf-8")
        program = parse_program(text, filename=str(config.program))
    except OSError as exc:
        print(f"error: cannot read program: {exc}", file=stderr)
        return 2
    except DatalogError as exc:
        print(str(exc), file=stderr)
        return 1
    if config.workers < 1:
        print("error: --workers must be >= 1", file=stderr)
        return 2

    dictionary = Dictionary()
    edb, as_strings = {}, set()
    if config.facts is not None:
        facts_dir = Path(config.facts)
        if not facts_dir.is_dir():
            print(f"error: facts directory {facts_dir} does not exist", file=stderr)
            return 2
        for name in sorted(program.relations):
            path = facts_dir / f"{name}.tsv"
            if not path.exists():
                continue
            try:
                if detect_encoding(path) == "string":
                    as_strings.add(name)
                edb[name] = load_facts(path, program.relations[name], dictionary)
            except (FactFileError, UnicodeDecodeError) as exc:
                print(f"error: {exc}", file=stderr)
                return 1
            log.info("loaded %d facts for %s", len(edb[name]), name)

    try:
        state = evaluate(program, edb, dictionary=dictionary, workers=config.workers,
                         check=config.check)
    except DatalogError as exc:
        print(str(exc), file=stderr)
        return 1
    elapsed = time.perf_counter() - started

    if config.dump is not None or config.out is not None:
        if config.out is None:
            print("error: --dump needs --out", file=stderr)
            return 2
        wanted = list(config.dump) if config.dump else sorted(program.idb())
        missing = [n for n in wanted if n not in state.relations]
        if missing:
            print(f"error: unknown relation(s) to dump: {', '.join(missing)}", file=stderr)
            return 2
        out_dir = Path(config.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        encoded = string_columns(program, as_strings)
        for name in wanted:
            dump_relation(state.relations[name], dictionary, out_dir / f"{name}.tsv",
                          columns=encoded[name])

    if config.stats:
        print_stats(state, stdout)
    print_summary(state, elapsed, stdout)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dsmlog", description="Column-oriented Datalog engine")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="evaluate a program to fixpoint")
    p.add_argument("program", type=Path)
    p.add_argument("--facts", type=Path, help="directory of <relation>.tsv files")
    p.add_argument("--out", type=Path, help="directory for dumped relations")
    p.add_argument("--workers", type=int, default=parallel.max_workers())
    p.add_argument("--stats", action="store_true", help="print per-iteration delta sizes")
    p.add_argument("--dump", help="comma-separated relations to dump (default: all derived)")
    p.add_argument("--check", action="store_true", help="assert storage invariants every iteration")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    dump = tuple(n.strip() for n in args.dump.split(",") if n.strip()) if args.dump else None
    config = RunConfig(args.program, args.facts, args.out, args.workers, args.stats, dump, args.check)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
