"""Reference semantics for ground programs: reduct, answer-set checks,
brute-force enumeration.

Public checks (`rule_satisfied`, `is_model`) evaluate rules directly over
atom sets; the enumeration uses an equivalent bitmask representation so the
exhaustive search stays usable up to the atom cap.  Tests cross-check the
two paths against each other.  Programs beyond `max_atoms` are refused
(OracleScaleError) because the subset-minimality search is exponential by
design; competitive solving is the job of external engines.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

from .program import Atom, GroundProgram, Literal, Rule

DEFAULT_MAX_ORACLE_ATOMS = 24


class OracleScaleError(Exception):
    """Raised when a program is too large for the brute-force oracle."""


@dataclass(frozen=True)
class Interpretation:
    """A set of true atom ids over a specific program's atom table."""

    program: GroundProgram
    true_ids: frozenset[int]

    def __post_init__(self):
        n = self.program.n_atoms
        bad = [i for i in self.true_ids if not 0 <= i < n]
        if bad:
            raise ValueError(f"atom ids out of range for program: {sorted(bad)}")

    @classmethod
    def from_atoms(cls, program: GroundProgram, atoms: Iterable[Atom]) -> "Interpretation":
        return cls(program, frozenset(program.atom_id(a) for a in atoms))

    @classmethod
    def from_names(cls, program: GroundProgram, names: Iterable[str]) -> "Interpretation":
        """Convenience: build from predicate names of zero-arity atoms."""
        return cls.from_atoms(program, (Atom(n) for n in names))

    def atoms(self) -> frozenset[Atom]:
        return frozenset(self.program.atoms[i] for i in self.true_ids)

    def __contains__(self, atom: Atom) -> bool:
        return self.program.atom_ids.get(atom, -1) in self.true_ids


# --- direct evaluation over atom sets ---------------------------------------


def _literal_true(lit: Literal, true_atoms: frozenset[Atom]) -> bool:
    return (lit.atom in true_atoms) != lit.negated


def head_true(rule: Rule, true_atoms: frozenset[Atom]) -> bool:
    return any(a in true_atoms for a in rule.head)


def body_true(rule: Rule, true_atoms: frozenset[Atom]) -> bool:
    return all(_literal_true(l, true_atoms) for l in rule.body)


def rule_satisfied(rule: Rule, interpretation: Interpretation) -> bool:
    """True iff the head is true w.r.t. the interpretation or the body is false."""
    true_atoms = interpretation.atoms()
    return head_true(rule, true_atoms) or not body_true(rule, true_atoms)


def is_model(p: GroundProgram, interpretation: Interpretation) -> bool:
    """True iff every rule of `p` is satisfied w.r.t. the interpretation."""
    true_atoms = interpretation.atoms()
    return all(
        head_true(r, true_atoms) or not body_true(r, true_atoms) for r in p.rules
    )


def reduct(p: GroundProgram, interpretation: Interpretation) -> GroundProgram:
    """The positive program obtained w.r.t. the interpretation.

    Rules whose negated body atoms intersect the interpretation are
    dropped; the remaining rules keep only their positive body literals.
    The result is a fresh program with its own atom table.
    """
    true_atoms = interpretation.atoms()
    kept: list[Rule] = []
    for r in p.rules:
        if any(l.negated and l.atom in true_atoms for l in r.body):
            continue
        positive = tuple(l for l in r.body if not l.negated)
        kept.append(Rule(r.head, positive) if len(positive) != len(r.body) else r)
    return GroundProgram.from_rules(kept)


# --- bitmask core for the exhaustive search ---------------------------------

# A rule is (head_mask, pos_mask, neg_mask); an interpretation is an int.


def _compile_rules(p: GroundProgram) -> list[tuple[int, int, int]]:
    ids = p.atom_ids
    out = []
    for r in p.rules:
        head = pos = neg = 0
        for a in r.head:
            head |= 1 << ids[a]
        for l in r.body:
            if l.negated:
                neg |= 1 << ids[l.atom]
            else:
                pos |= 1 << ids[l.atom]
        out.append((head, pos, neg))
    return out


def _reduct_masks(rules: list[tuple[int, int, int]], i_mask: int) -> list[tuple[int, int]]:
    return [(h, pos) for h, pos, neg in rules if not neg & i_mask]


def _is_model_masks(red: list[tuple[int, int]], m: int) -> bool:
    # satisfied: head intersects m, or some positive body atom is false
    return all(h & m or pos & ~m for h, pos in red)


def _stable(rules: list[tuple[int, int, int]], i_mask: int) -> bool:
    red = _reduct_masks(rules, i_mask)
    if not _is_model_masks(red, i_mask):
        return False
    if i_mask == 0:
        return True  # the empty set has no proper subset
    sub = (i_mask - 1) & i_mask
    while True:  # all proper submasks, 0 included
        if _is_model_masks(red, sub):
            return False
        if sub == 0:
            return True
        sub = (sub - 1) & i_mask


def is_answer_set(p: GroundProgram, interpretation: Interpretation) -> bool:
    """Check the stability condition by explicit search over subsets.

    The interpretation must be a model of the reduct and no proper subset
    of its true atoms may be one; exponential in the number of true atoms,
    which is fine at oracle scale.
    """
    if interpretation.program is not p and interpretation.program != p:
        raise ValueError("interpretation is bound to a different program")
    i_mask = 0
    for i in interpretation.true_ids:
        i_mask |= 1 << i
    return _stable(_compile_rules(p), i_mask)


def _masks_lex(n: int) -> Iterator[int]:
    # Interpretations ordered lexicographically by their sorted id tuple:
    # {}, {0}, {0,1}, {0,1,2}, ..., {0,2}, ..., {1}, {1,2}, ...
    def rec(start: int, mask: int) -> Iterator[int]:
        yield mask
        for j in range(start, n):
            yield from rec(j + 1, mask | 1 << j)

    return rec(0, 0)


def enumerate_answer_sets(
    p: GroundProgram,
    max_atoms: int = DEFAULT_MAX_ORACLE_ATOMS,
    limit: int | None = None,
) -> list[Interpretation]:
    """All answer sets of `p` (up to `limit`), lexicographic by id set.

    Tests every interpretation for stability; refuses programs with more
    than `max_atoms` atoms.
    """
    if limit is not None and limit < 1:
        raise ValueError("limit must be >= 1")
    n = p.n_atoms
    if n > max_atoms:
        raise OracleScaleError(
            f"oracle scale exceeded: {n} atoms > cap {max_atoms}"
        )
    rules = _compile_rules(p)
    found: list[Interpretation] = []
    for mask in _masks_lex(n):
        if _stable(rules, mask):
            ids = frozenset(i for i in range(n) if mask >> i & 1)
            found.append(Interpretation(p, ids))
            if limit is not None and len(found) >= limit:
                break
    return found


def has_answer_set(p: GroundProgram, max_atoms: int = DEFAULT_MAX_ORACLE_ATOMS) -> bool:
    """Decide consistency: True iff at least one answer set exists."""
    return bool(enumerate_answer_sets(p, max_atoms=max_atoms, limit=1))
