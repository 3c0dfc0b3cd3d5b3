"""Tab-separated fact files.

A file is read in one of two modes, picked from its first line: if every field
there is an unsigned 32-bit integer, all lines must be integers and are used
as values directly; otherwise every field of the file is interned through the
dictionary.  Strings escape backslash, tab, newline and carriage return.
"""

from __future__ import annotations

import os
import re
from pathlib import Path

import numpy as np

from .column import VALUE_DTYPE, VALUE_MAX
from .dictionary import Dictionary
from .relation import Relation, Version

_UINT = re.compile(r"[0-9]+\Z")
_ESCAPE = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPE = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}


class FactFileError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def escape(s: str) -> str:
    return "".join(_ESCAPE.get(ch, ch) for ch in s)


def unescape(s: str) -> str:
    if "\\" not in s:
        return s
    out, i = [], 0
    while i < len(s):
        if s[i] == "\\" and i + 1 < len(s) and s[i + 1] in _UNESCAPE:
            out.append(_UNESCAPE[s[i + 1]])
            i += 2
        else:
            out.append(s[i])
            i += 1
    return "".join(out)


def _is_uint(field: str) -> bool:
    return bool(_UINT.match(field)) and int(field) <= VALUE_MAX


def _lines(path):
    with open(path, encoding="utf-8", newline="\n") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line.endswith("\r"):
                line = line[:-1]
            yield lineno, line


def detect_encoding(path) -> str:
    """``"int"`` or ``"string"`` for a fact file (an empty file counts as int)."""
    for _, line in _lines(path):
        if all(_is_uint(f) for f in line.split("\t")):
            return "int"
        return "string"
    return "int"


def load_facts(path, arity: int, dictionary: Dictionary) -> np.ndarray:
    """Read a TSV fact file into an ``(n, arity)`` uint32 array, in file order."""
    mode = detect_encoding(path)
    rows: list[list[int]] = []
    for lineno, line in _lines(path):
        fields = line.split("\t")
        if len(fields) != arity:
            raise FactFileError(path, lineno, f"expected {arity} fields, found {len(fields)}")
        if mode == "int":
            row = []
            for f in fields:
                if not _UINT.match(f):
                    raise FactFileError(path, lineno, f"{f!r} is not an unsigned integer "
                                        "(file was detected as all-integer from its first line)")
                v = int(f)
                if v > VALUE_MAX:
                    raise FactFileError(path, lineno, f"integer {v} overflows 32 bits")
                row.append(v)
            rows.append(row)
        else:
            rows.append([dictionary.encode(unescape(f)) for f in fields])
    if not rows:
        return np.empty((0, arity), dtype=VALUE_DTYPE)
    return np.asarray(rows, dtype=np.int64).astype(VALUE_DTYPE)


def format_rows(rows, dictionary: Dictionary | None = None, columns=None) -> list[str]:
    """Render rows as TSV lines, sorted lexicographically.

    Values in ``columns`` (every column when None) are decoded through
    ``dictionary`` first; without a dictionary nothing is decoded.
    """
    rows = [tuple(r) for r in rows]
    if dictionary is None or not rows:
        return ["\t".join(str(v) for v in r) for r in sorted(rows)]
    cols = range(len(rows[0])) if columns is None else columns
    cells = sorted(tuple(dictionary.decode(v) if i in cols else v for i, v in enumerate(r))
                   for r in rows)
    return ["\t".join(escape(v) if isinstance(v, str) else str(v) for v in r) for r in cells]


def dump_relation(rel: Relation | Version, dictionary: Dictionary | None, path,
                  columns=None) -> int:
    """Write FULL rows as sorted TSV; see :func:`format_rows` for decoding."""
    ver = rel.full if isinstance(rel, Relation) else rel
    lines = format_rows(ver.rows().tolist(), dictionary, columns)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(line + "\n" for line in lines)
    os.replace(tmp, path)
    return len(lines)
