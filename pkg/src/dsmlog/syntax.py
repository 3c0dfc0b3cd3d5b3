"""Datalog AST and a recursive-descent parser for a Souffle-like surface syntax.

    .decl edge(from, to)            // optional; arity otherwise comes from first use
    edge(1, 2).  edge("a", "b").    // facts
    reach(x, y) :- edge(x, y).
    sg(x, y) :- edge(p, x), edge(p, y), x != y.

Comments are ``//`` to end of line or ``/* ... */``.  ``_`` is an anonymous
variable.  Constants are unsigned integers or double-quoted strings.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union


@dataclass(frozen=True)
class Pos:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NOWHERE = Pos(0, 0)


class DatalogError(Exception):
    """Base class for syntax and semantic errors in Datalog source."""


@dataclass(frozen=True)
class Diagnostic:
    message: str
    pos: Pos = NOWHERE
    filename: str = "<input>"

    def __str__(self) -> str:
        return f"{self.filename}:{self.pos}: {self.message}"


class DatalogSyntaxError(DatalogError):
    def __init__(self, diagnostic: Diagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


class ProgramError(DatalogError):
    """Raised when a syntactically valid program fails validation."""

    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("\n".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Constant:
    value: Union[int, str]

    def __str__(self) -> str:
        if isinstance(self.value, str):
            escaped = self.value.replace("\\", "\\\\").replace('"', '\\"')
            escaped = escaped.replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")
            return f'"{escaped}"'
        return str(self.value)


Term = Union[Variable, Constant]


@dataclass(frozen=True)
class Atom:
    relation: str
    args: tuple[Term, ...]
    pos: Pos = field(default=NOWHERE, compare=False)

    @property
    def arity(self) -> int:
        return len(self.args)

    def variables(self) -> list[str]:
        return [a.name for a in self.args if isinstance(a, Variable)]

    def __str__(self) -> str:
        return f"{self.relation}({', '.join(map(str, self.args))})"


@dataclass(frozen=True)
class Guard:
    """``left != right`` between two body variables."""

    left: Variable
    right: Variable
    pos: Pos = field(default=NOWHERE, compare=False)

    def __str__(self) -> str:
        return f"{self.left} != {self.right}"


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple[Atom, ...]
    guards: tuple[Guard, ...] = ()
    pos: Pos = field(default=NOWHERE, compare=False)

    def body_variables(self) -> set[str]:
        return {v for atom in self.body for v in atom.variables()}

    def __str__(self) -> str:
        parts = [str(a) for a in self.body] + [str(g) for g in self.guards]
        return f"{self.head} :- {', '.join(parts)}."


@dataclass
class Program:
    relations: dict[str, int] = field(default_factory=dict)
    facts: dict[str, list[tuple[Constant, ...]]] = field(default_factory=dict)
    rules: list[Rule] = field(default_factory=list)
    declared: dict[str, int] = field(default_factory=dict)
    filename: str = field(default="<input>", compare=False)
    # first source position at which each relation was seen
    first_use: dict[str, Pos] = field(default_factory=dict, compare=False)

    def idb(self) -> set[str]:
        return {r.head.relation for r in self.rules}

    def __str__(self) -> str:
        lines = [f".decl {name}({', '.join(f'a{i}' for i in range(arity))})"
                 for name, arity in self.declared.items()]
        for name, rows in self.facts.items():
            lines += [f"{name}({', '.join(map(str, row))})." for row in rows]
        lines += [str(r) for r in self.rules]
        return "\n".join(lines) + ("\n" if lines else "")


# -- tokenizer -----------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*|\#[^\n]*|/\*.*?\*/)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<number>[0-9]+)
  | (?P<directive>\.[A-Za-z_]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op>:-|!=|<=|>=|<|>|=|!|[(),.:~])
""", re.VERBOSE | re.DOTALL)

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", '"': '"'}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: Pos


def tokenize(text: str, filename: str = "<input>") -> list[Token]:
    tokens = []
    i, line, line_start = 0, 1, 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        pos = Pos(line, i - line_start + 1)
        if m is None:
            raise DatalogSyntaxError(Diagnostic(f"unexpected character {text[i]!r}", pos, filename))
        kind, chunk = m.lastgroup, m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, chunk, pos))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = i + chunk.rindex("\n") + 1
        i = m.end()
    tokens.append(Token("eof", "", Pos(line, i - line_start + 1)))
    return tokens


def _unquote(text: str) -> str:
    body, out, i = text[1:-1], [], 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            out.append(_ESCAPES.get(body[i + 1], body[i + 1]))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


# -- parser --------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str, filename: str):
        self.filename = filename
        self.tokens = tokenize(text, filename)
        self.i = 0
        self.program = Program(filename=filename)
        self._anon = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, pos: Pos | None = None):
        raise DatalogSyntaxError(Diagnostic(message, pos or self.tok.pos, self.filename))

    def advance(self) -> Token:
        tok = self.tok
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind not in ("op",):
            shown = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {shown!r}")
        return self.advance()

    def parse(self) -> Program:
        while self.tok.kind != "eof":
            if self.tok.kind == "directive":
                self.directive()
            else:
                self.clause()
        return self.program

    def directive(self):
        tok = self.advance()
        if tok.text != ".decl":
            self.error(f"unsupported directive {tok.text!r}", tok.pos)
        name = self.relation_name()
        self.expect("(")
        arity = 0
        while True:
            if self.tok.kind != "ident":
                self.error("expected an attribute name in .decl")
            self.advance()
            if self.tok.text == ":":
                self.advance()
                if self.tok.kind != "ident":
                    self.error("expected an attribute type after ':'")
                self.advance()
            arity += 1
            if self.tok.text == ",":
                self.advance()
                continue
            break
        self.expect(")")
        self.program.declared[name] = arity
        self.program.first_use.setdefault(name, tok.pos)

    def relation_name(self) -> str:
        if self.tok.kind != "ident":
            self.error(f"expected a relation name, found {self.tok.text or 'end of input'!r}")
        return self.advance().text

    def term(self) -> Term:
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            return Constant(int(tok.text))
        if tok.kind == "string":
            self.advance()
            return Constant(_unquote(tok.text))
        if tok.kind == "ident":
            self.advance()
            if tok.text == "_":
                self._anon += 1
                return Variable(f"_{self._anon}")
            return Variable(tok.text)
        self.error(f"expected a variable or constant, found {tok.text or 'end of input'!r}")

    def atom(self) -> Atom:
        pos = self.tok.pos
        if self.tok.text in ("!", "~") or (self.tok.kind == "ident" and self.tok.text == "not"
                                           and self.tokens[self.i + 1].kind == "ident"):
            self.error("negation is not supported (positive Datalog only)")
        name = self.relation_name()
        if self.tok.text != "(":
            self.error(f"expected '(' after relation name {name!r}")
        self.advance()
        args = [self.term()]
        while self.tok.text == ",":
            self.advance()
            args.append(self.term())
        self.expect(")")
        return Atom(name, tuple(args), pos)

    def body_literal(self):
        tok = self.tok
        nxt = self.tokens[self.i + 1]
        if tok.kind in ("ident", "number", "string") and nxt.kind == "op" and \
                nxt.text in ("!=", "=", "<", "<=", ">", ">="):
            left = self.term()
            op = self.advance()
            right = self.term()
            if op.text != "!=":
                self.error(f"comparison {op.text!r} is not supported; only '!=' guards are", op.pos)
            if not (isinstance(left, Variable) and isinstance(right, Variable)):
                self.error("'!=' guards must compare two variables", tok.pos)
            return Guard(left, right, tok.pos)
        return self.atom()

    def clause(self):
        head = self.atom()
        if self.tok.text == ".":
            self.advance()
            if any(isinstance(a, Variable) for a in head.args):
                self.error(f"fact {head.relation!r} must be ground", head.pos)
            self.program.facts.setdefault(head.relation, []).append(head.args)
            self.program.first_use.setdefault(head.relation, head.pos)
            return
        if self.tok.text != ":-":
            self.error(f"expected ':-' or '.', found {self.tok.text or 'end of input'!r}")
        pos = head.pos
        self.advance()
        body, guards = [], []
        while True:
            lit = self.body_literal()
            (guards if isinstance(lit, Guard) else body).append(lit)
            if self.tok.text == ",":
                self.advance()
                continue
            break
        self.expect(".")
        if not body:
            self.error("a rule needs at least one body atom", pos)
        rule = Rule(head, tuple(body), tuple(guards), pos)
        self.program.rules.append(rule)
        for atom in (head, *body):
            self.program.first_use.setdefault(atom.relation, atom.pos)


def parse_program(text: str, filename: str = "<input>", validate: bool = True) -> Program:
    """Parse Datalog source.

    Syntax errors raise :class:`DatalogSyntaxError`.  With ``validate`` (the
    default) semantic problems raise :class:`ProgramError`; otherwise the
    program is returned as parsed and :func:`validate_program` reports them.
    """
    program = _Parser(text, filename).parse()
    _infer_arities(program)
    if validate:
        diagnostics = validate_program(program)
        if diagnostics:
            raise ProgramError(diagnostics)
    return program


def _atoms_in_order(program: Program):
    for name, rows in program.facts.items():
        for row in rows:
            yield Atom(name, row, program.first_use.get(name, NOWHERE))
    for rule in program.rules:
        yield rule.head
        yield from rule.body


def _infer_arities(program: Program) -> None:
    program.relations = dict(program.declared)
    uses = sorted(
        ((a.pos.line, a.pos.col), a.relation, a.arity) for a in _atoms_in_order(program)
    )
    for _, name, arity in uses:
        program.relations.setdefault(name, arity)


def validate_program(program: Program) -> list[Diagnostic]:
    """All reasons the program cannot be compiled; empty when it is fine."""
    fn = program.filename
    diags: list[Diagnostic] = []
    for atom in _atoms_in_order(program):
        expected = program.relations.get(atom.relation)
        if expected is not None and atom.arity != expected:
            diags.append(Diagnostic(
                f"relation {atom.relation!r} used with arity {atom.arity}, expected {expected}",
                atom.pos, fn))
        for arg in atom.args:
            if isinstance(arg, Constant) and isinstance(arg.value, int) and arg.value > 0xFFFFFFFF:
                diags.append(Diagnostic(
                    f"integer constant {arg.value} does not fit in 32 bits", atom.pos, fn))
    for rule in program.rules:
        bound = rule.body_variables()
        for arg in rule.head.args:
            if isinstance(arg, Variable) and arg.name not in bound:
                diags.append(Diagnostic(
                    f"head variable {arg.name!r} does not occur in the body "
                    "(rules must be range-restricted; existential heads are unsupported)",
                    rule.head.pos, fn))
        for guard in rule.guards:
            for var in (guard.left, guard.right):
                if var.name not in bound:
                    diags.append(Diagnostic(
                        f"guard variable {var.name!r} does not occur in a body atom", guard.pos, fn))
        seen = set(rule.body[0].variables())
        for atom in rule.body[1:]:
            vs = set(atom.variables())
            if not vs & seen:
                diags.append(Diagnostic(
                    f"atom {atom} shares no variable with the atoms before it "
                    "(cross products are not supported)", atom.pos, fn))
            seen |= vs
    return diags
