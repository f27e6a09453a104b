import itertools
import random

import pytest

from measp.program import Atom, GroundProgram, Literal, Rule, parse_ground_program
from measp.semantics import (
    Interpretation,
    OracleScaleError,
    enumerate_answer_sets,
    has_answer_set,
    is_answer_set,
    is_model,
    reduct,
    rule_satisfied,
)

FIVE_RULE_TEXT = "a | b :- c.  b :- not a, not c.  a | c :- not b.  k :- a.  k :- b."


@pytest.fixture
def five_rule():
    return parse_ground_program(FIVE_RULE_TEXT)


def interp(p, names):
    return Interpretation.from_names(p, names)


def test_rule_satisfied_body_false(five_rule):
    i = interp(five_rule, ["b", "k"])
    k_from_a = five_rule.rules[3]  # k :- a.
    assert rule_satisfied(k_from_a, i)


def test_rule_satisfied_constraint():
    p = parse_ground_program(":- a.")
    i = interp(p, ["a"])
    assert not rule_satisfied(p.rules[0], i)


def test_rule_satisfied_disjunctive_head():
    p = parse_ground_program("a | b :- c.")
    i = interp(p, ["c"])
    assert not rule_satisfied(p.rules[0], i)
    assert rule_satisfied(p.rules[0], interp(p, ["c", "b"]))
    assert rule_satisfied(p.rules[0], interp(p, []))


def test_reduct_matches_worked_example(five_rule):
    i = interp(five_rule, ["b", "k"])
    expected = parse_ground_program("a | b :- c.  b.  k :- a.  k :- b.")
    assert reduct(five_rule, i) == expected


def test_reduct_positive_program_is_identity():
    p = parse_ground_program("a | b :- c.  c.  :- a, b.")
    i = interp(p, ["c"])
    assert reduct(p, i) == p


def test_reduct_under_empty_interpretation():
    p = parse_ground_program("b :- not a.")
    i = interp(p, [])
    assert reduct(p, i) == parse_ground_program("b.")


def test_reduct_always_positive():
    rng = random.Random(99)
    for _ in range(200):
        p = _random_program(rng)
        ids = frozenset(i for i in range(p.n_atoms) if rng.random() < 0.5)
        r = reduct(p, Interpretation(p, ids))
        assert all(not l.negated for rule in r.rules for l in rule.body)


def test_is_answer_set_paper_example(five_rule):
    assert is_answer_set(five_rule, interp(five_rule, ["b", "k"]))
    assert not is_answer_set(five_rule, interp(five_rule, ["b"]))
    assert not is_answer_set(five_rule, interp(five_rule, ["a", "b", "k"]))


def test_is_answer_set_empty_program():
    empty = GroundProgram.from_rules([])
    assert is_answer_set(empty, Interpretation(empty, frozenset()))
    with pytest.raises(ValueError):
        Interpretation(empty, frozenset({0}))


def test_is_answer_set_rejects_nonminimal():
    p = parse_ground_program("a | b.")
    assert not is_answer_set(p, interp(p, ["a", "b"]))
    assert is_answer_set(p, interp(p, ["a"]))
    assert is_answer_set(p, interp(p, ["b"]))


def test_is_answer_set_checks_program_identity(five_rule):
    other = parse_ground_program("a.")
    with pytest.raises(ValueError):
        is_answer_set(five_rule, interp(other, ["a"]))


def test_enumerate_single_fact():
    p = parse_ground_program("a.")
    result = enumerate_answer_sets(p)
    assert [sorted(i.true_ids) for i in result] == [[0]]


def test_enumerate_disjunctive_with_constraint():
    p = parse_ground_program("a | b.  :- a.")
    result = enumerate_answer_sets(p)
    assert [i.atoms() for i in result] == [frozenset({Atom("b")})]


def test_enumerate_five_rule_program(five_rule):
    result = enumerate_answer_sets(five_rule)
    got = {frozenset(str(a) for a in i.atoms()) for i in result}
    assert got == {frozenset({"a", "k"}), frozenset({"b", "k"})}


def test_enumerate_inconsistent():
    p = parse_ground_program("a | b.  :- a.  :- b.")
    assert enumerate_answer_sets(p) == []
    assert not has_answer_set(p)


def test_enumerate_scale_cap():
    rules = [Rule((Atom(f"p{i}"),)) for i in range(25)]
    p = GroundProgram.from_rules(rules)
    with pytest.raises(OracleScaleError):
        enumerate_answer_sets(p)  # default cap is 24
    small = GroundProgram.from_rules([Rule((Atom(f"p{i}"),)) for i in range(5)])
    with pytest.raises(OracleScaleError):
        enumerate_answer_sets(small, max_atoms=4)
    assert len(enumerate_answer_sets(small, max_atoms=5)) == 1


def test_enumerate_limit():
    p = parse_ground_program("a | b.")
    assert len(enumerate_answer_sets(p, limit=1)) == 1
    with pytest.raises(ValueError):
        enumerate_answer_sets(p, limit=0)


def test_enumeration_order_lexicographic():
    p = parse_ground_program("a | b. b | c. a | c.")
    # answer sets: any pair of two atoms is a minimal model of this positive program
    result = enumerate_answer_sets(p)
    assert [tuple(sorted(i.true_ids)) for i in result] == [(0, 1), (0, 2), (1, 2)]


def _random_program(rng: random.Random) -> GroundProgram:
    n_atoms = rng.randint(1, 6)
    names = [f"x{i}" for i in range(n_atoms)]
    rules = []
    for _ in range(rng.randint(1, 8)):
        head = tuple(
            Atom(n) for n in rng.sample(names, k=rng.randint(0, min(2, n_atoms)))
        )
        body = tuple(
            Literal(Atom(rng.choice(names)), rng.random() < 0.4)
            for _ in range(rng.randint(0, 3))
        )
        if not head and not body:
            continue
        rules.append(Rule(head, body))
    if not rules:
        rules = [Rule((Atom("x0"),))]
    return GroundProgram.from_rules(rules)


def _naive_minimal_models(p: GroundProgram):
    """Subset-minimal models of a positive program via direct set evaluation."""
    atoms = list(p.atoms)
    models = []
    for k in range(len(atoms) + 1):
        for combo in itertools.combinations(range(len(atoms)), k):
            i = Interpretation(p, frozenset(combo))
            if is_model(p, i):
                models.append(frozenset(combo))
    return [m for m in models if not any(o < m for o in models)]


def test_positive_programs_agree_with_minimal_models():
    # cross-check: bitmask stability path vs direct minimal-model search
    rng = random.Random(4242)
    checked = 0
    for _ in range(150):
        p = _random_program(rng)
        positive = GroundProgram.from_rules(
            [
                Rule(r.head, tuple(l for l in r.body if not l.negated))
                for r in p.rules
            ]
        )
        minimal = set(_naive_minimal_models(positive))
        for ids in _all_id_sets(positive.n_atoms):
            i = Interpretation(positive, ids)
            assert is_answer_set(positive, i) == (ids in minimal)
            checked += 1
    assert checked > 1000


def _all_id_sets(n):
    for k in range(n + 1):
        for combo in itertools.combinations(range(n), k):
            yield frozenset(combo)


def test_enumeration_agrees_with_is_answer_set():
    rng = random.Random(77)
    for _ in range(100):
        p = _random_program(rng)
        enumerated = {i.true_ids for i in enumerate_answer_sets(p)}
        for ids in _all_id_sets(p.n_atoms):
            assert (ids in enumerated) == is_answer_set(p, Interpretation(p, ids))


def test_answer_sets_form_antichain():
    rng = random.Random(123)
    for _ in range(200):
        p = _random_program(rng)
        sets = [i.true_ids for i in enumerate_answer_sets(p)]
        for a, b in itertools.combinations(sets, 2):
            assert not a < b and not b < a
