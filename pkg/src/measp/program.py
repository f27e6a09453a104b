"""Ground disjunctive logic programs: data model, parser, printer.

Surface syntax (see docs/grammar.md for the full grammar):

    a | b :- c.
    b :- not a, not c.
    :- a, b.          % constraint
    p(1, x).          % fact

Statements end with `.`, disjunction is written `|` or `v`, implication
`:-`, default negation `not `, body literals are comma separated and `%`
starts a line comment.  Programs must be ground: an identifier starting
with an uppercase letter (or `_`) is rejected as a variable.  Classical
negation `-a` is accepted and folded into the predicate name.

The parser is a single pass over the input with memory proportional to the
parsed program; it never re-reads earlier text.
"""

from __future__ import annotations

import io
import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, TextIO

_PREDICATE_RE = re.compile(r"-?[a-z][A-Za-z0-9_]*\Z")
_CONSTANT_RE = re.compile(r"(?:[a-z][A-Za-z0-9_]*|-?[0-9]+)\Z")


class ParseError(Exception):
    """Problem in the input text, located at a 1-based line/column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class GroundSyntaxError(ParseError):
    """Malformed statement."""


class VariableError(ParseError):
    """A variable occurred in what must be a ground program."""


@dataclass(frozen=True)
class Atom:
    """A ground atom: predicate name plus constant arguments."""

    predicate: str
    args: tuple[str, ...] = ()

    def __post_init__(self):
        if not _PREDICATE_RE.match(self.predicate):
            raise ValueError(f"invalid predicate name: {self.predicate!r}")
        for a in self.args:
            if not _CONSTANT_RE.match(a):
                raise ValueError(f"invalid constant term: {a!r}")

    def __str__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({','.join(self.args)})"


@dataclass(frozen=True)
class Literal:
    """An atom, possibly under default negation."""

    atom: Atom
    negated: bool = False

    def __str__(self) -> str:
        return f"not {self.atom}" if self.negated else str(self.atom)


@dataclass(frozen=True)
class Rule:
    """head_1 | ... | head_n :- body_1, ..., body_m.

    The head is a set of atoms (kept in source order, duplicates are
    rejected here; the parser deduplicates before constructing).  A rule
    with a single head atom and empty body is a fact, an empty head makes
    a constraint.
    """

    head: tuple[Atom, ...]
    body: tuple[Literal, ...] = ()

    def __post_init__(self):
        if len(set(self.head)) != len(self.head):
            raise ValueError("duplicate atoms in rule head")

    @property
    def is_fact(self) -> bool:
        return len(self.head) == 1 and not self.body

    @property
    def is_constraint(self) -> bool:
        return len(self.head) == 0

    @property
    def is_normal(self) -> bool:
        return len(self.head) == 1

    @property
    def is_disjunctive_fact(self) -> bool:
        return len(self.head) >= 2 and not self.body

    @property
    def is_horn(self) -> bool:
        return len(self.head) <= 1 and not any(l.negated for l in self.body)

    def atoms(self) -> Iterator[Atom]:
        """All atoms of the rule, head first, in source order."""
        yield from self.head
        for lit in self.body:
            yield lit.atom

    def __str__(self) -> str:
        head = " | ".join(str(a) for a in self.head)
        if not self.body:
            return f"{head}."
        body = ", ".join(str(l) for l in self.body)
        return f"{head} :- {body}." if head else f":- {body}."


@dataclass(frozen=True)
class GroundProgram:
    """A sequence of ground rules plus a dense atom <-> id table.

    `atoms[i]` is the atom with id `i`; ids are assigned in first-occurrence
    order (head before body, rules in source order).  Programs are immutable
    and safe to share across threads.
    """

    rules: tuple[Rule, ...]
    atoms: tuple[Atom, ...]

    def __post_init__(self):
        occurring = {a for r in self.rules for a in r.atoms()}
        if len(set(self.atoms)) != len(self.atoms) or set(self.atoms) != occurring:
            raise ValueError("atom table must list each occurring atom exactly once")

    @classmethod
    def from_rules(cls, rules: Iterable[Rule]) -> "GroundProgram":
        rules = tuple(rules)
        table: dict[Atom, None] = {}
        for r in rules:
            for a in r.atoms():
                table.setdefault(a)
        return cls(rules=rules, atoms=tuple(table))

    @cached_property
    def atom_ids(self) -> dict[Atom, int]:
        return {a: i for i, a in enumerate(self.atoms)}

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def atom_id(self, atom: Atom) -> int:
        try:
            return self.atom_ids[atom]
        except KeyError:
            raise ValueError(f"atom not in program: {atom}") from None

    @property
    def has_disjunctive_rule(self) -> bool:
        return any(len(r.head) >= 2 for r in self.rules)


# --- tokenizer -------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""(?P<WS>[ \t\r\f]+)
      | (?P<COMMENT>%[^\n]*)
      | (?P<IMPLIES>:-)
      | (?P<IDENT>[a-z][A-Za-z0-9_]*)
      | (?P<VAR>[A-Z_][A-Za-z0-9_]*)
      | (?P<INT>[0-9]+)
      | (?P<PIPE>\|)
      | (?P<COMMA>,)
      | (?P<DOT>\.)
      | (?P<LPAREN>\()
      | (?P<RPAREN>\))
      | (?P<MINUS>-)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    value: str
    line: int
    column: int


_EOF = "EOF"


def _tokens(lines: Iterable[str]) -> Iterator[_Token]:
    line_no = 0
    for line_no, text in enumerate(lines, 1):
        pos = 0
        while pos < len(text):
            if text[pos] == "\n":
                pos += 1
                continue
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                raise GroundSyntaxError(
                    f"unexpected character {text[pos]!r}", line_no, pos + 1
                )
            kind = m.lastgroup or ""
            if kind == "VAR":
                raise VariableError(
                    f"variable {m.group()!r} in ground program", line_no, pos + 1
                )
            if kind not in ("WS", "COMMENT"):
                value = m.group()
                if kind == "IDENT" and value == "not":
                    kind = "NOT"
                yield _Token(kind, value, line_no, pos + 1)
            pos = m.end()
    yield _Token(_EOF, "", line_no + 1, 1)


# --- parser ----------------------------------------------------------------


class _Parser:
    def __init__(self, lines: Iterable[str]):
        self._stream = _tokens(lines)
        self._buffer: deque[_Token] = deque()

    def _peek(self, offset: int = 0) -> _Token:
        while len(self._buffer) <= offset:
            self._buffer.append(next(self._stream))
        return self._buffer[offset]

    def _next(self) -> _Token:
        self._peek()
        return self._buffer.popleft()

    def _expect(self, kind: str, what: str) -> _Token:
        tok = self._next()
        if tok.kind != kind:
            raise GroundSyntaxError(
                f"expected {what}, found {tok.value!r}" if tok.kind != _EOF
                else f"expected {what}, found end of input",
                tok.line, tok.column,
            )
        return tok

    def _parse_atom(self) -> Atom:
        tok = self._next()
        if tok.kind == "MINUS":
            name_tok = self._expect("IDENT", "predicate name after '-'")
            predicate = "-" + name_tok.value
        elif tok.kind == "IDENT":
            predicate = tok.value
        else:
            found = tok.value if tok.kind != _EOF else "end of input"
            raise GroundSyntaxError(f"expected atom, found {found!r}", tok.line, tok.column)
        args: list[str] = []
        if self._peek().kind == "LPAREN":
            self._next()
            while True:
                args.append(self._parse_constant())
                sep = self._next()
                if sep.kind == "RPAREN":
                    break
                if sep.kind != "COMMA":
                    raise GroundSyntaxError(
                        f"expected ',' or ')' in argument list, found {sep.value!r}",
                        sep.line, sep.column,
                    )
        return Atom(predicate, tuple(args))

    def _parse_constant(self) -> str:
        tok = self._next()
        if tok.kind == "IDENT":
            return tok.value
        if tok.kind == "INT":
            return tok.value
        if tok.kind == "MINUS":
            num = self._expect("INT", "integer after '-'")
            return "-" + num.value
        found = tok.value if tok.kind != _EOF else "end of input"
        raise GroundSyntaxError(f"expected constant term, found {found!r}", tok.line, tok.column)

    def _at_disjunction_sep(self) -> bool:
        tok = self._peek()
        if tok.kind == "PIPE":
            return True
        # `v` doubles as a disjunction separator when an atom follows;
        # otherwise it is an ordinary predicate name.
        return (
            tok.kind == "IDENT"
            and tok.value == "v"
            and self._peek(1).kind in ("IDENT", "MINUS")
        )

    def _parse_rule(self) -> Rule:
        head: list[Atom] = []
        seen: set[Atom] = set()
        if self._peek().kind != "IMPLIES":
            while True:
                atom = self._parse_atom()
                if atom not in seen:  # H(r) is a set: drop duplicates
                    seen.add(atom)
                    head.append(atom)
                if not self._at_disjunction_sep():
                    break
                self._next()
        body: list[Literal] = []
        tok = self._peek()
        if tok.kind == "IMPLIES":
            self._next()
            if self._peek().kind != "DOT":
                while True:
                    negated = False
                    if self._peek().kind == "NOT":
                        self._next()
                        negated = True
                    body.append(Literal(self._parse_atom(), negated))
                    if self._peek().kind != "COMMA":
                        break
                    self._next()
        self._expect("DOT", "'.' at end of statement")
        return Rule(tuple(head), tuple(body))

    def parse_program(self) -> GroundProgram:
        rules = []
        while self._peek().kind != _EOF:
            rules.append(self._parse_rule())
        return GroundProgram.from_rules(rules)


def parse_ground_program(source: str | TextIO) -> GroundProgram:
    """Parse ground program text (a string or a line-iterable stream).

    Raises GroundSyntaxError with line/column on malformed input, and
    VariableError if a variable (uppercase identifier) occurs.
    """
    lines = io.StringIO(source) if isinstance(source, str) else source
    return _Parser(lines).parse_program()


def print_program(p: GroundProgram) -> str:
    """Canonical text of `p`: one rule per line, `|` for disjunction.

    Round-trips: parse_ground_program(print_program(p)) == p.
    """
    return "\n".join(str(r) for r in p.rules)
