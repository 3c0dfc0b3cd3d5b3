"""Column-oriented Datalog engine with semi-naive evaluation."""

from .column import Column, MatchRange, UniqueIndex, append_and_reindex, build_index
from .compiler import RulePlan, compile_program, compile_rule, execute
from .dictionary import Dictionary
from .engine import EvaluationState, delta_rewrite, evaluate, run_iteration, seed
from .kernels import (
    IdPairSet,
    MatchVector,
    column_join,
    deduplicate,
    difference,
    filter_neq,
    filter_pairs_eq,
    join_count,
    join_write,
    project,
    select_eq,
    union_concat,
)
from .oracle import naive_evaluate, single_step
from .relation import Relation, Version, VersionKind, decompose, dedup_rows, merge_delta, reconstruct
from .syntax import (
    DatalogError,
    DatalogSyntaxError,
    Diagnostic,
    Program,
    ProgramError,
    parse_program,
    validate_program,
)

__version__ = "0.1.0"
