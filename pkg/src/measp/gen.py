"""Synthetic instances and performance matrices for desk-scale experiments.

Program families stay small (the built-in oracle is exponential): random
normal programs with up to three body literals, disjunctive pigeonhole
assignments, fact-heavy programs, and constraint-heavy programs.  The same
seed always produces the same corpus.

`matrix_from_counts` fabricates a performance matrix whose per-solver
solved/unique aggregates match prescribed numbers; handy for reproducing
published aggregate tables without the original runs.
"""

from __future__ import annotations

import heapq
import random
from pathlib import Path
from typing import Mapping, Sequence

from .program import Atom, GroundProgram, Literal, Rule, print_program
from .selection import NP, SOLVED, TIMEOUT, InstanceInfo, PerformanceMatrix, RunOutcome


def _atoms(n: int) -> list[Atom]:
    return [Atom(f"x{i}") for i in range(n)]


def random_normal_program(
    rng: random.Random, n_atoms: int = 8, n_rules: int = 15
) -> GroundProgram:
    """Normal rules with 1..3 body literals and mixed default negation."""
    atoms = _atoms(n_atoms)
    rules = []
    for _ in range(n_rules):
        head = (rng.choice(atoms),)
        body = tuple(
            Literal(rng.choice(atoms), rng.random() < 0.4)
            for _ in range(rng.randint(1, 3))
        )
        rules.append(Rule(head, body))
    return GroundProgram.from_rules(rules)


def fact_heavy_program(
    rng: random.Random, n_atoms: int = 8, n_rules: int = 16
) -> GroundProgram:
    """Mostly facts plus a few positive horn rules; no constraints."""
    atoms = _atoms(n_atoms)
    n_facts = max(1, round(n_rules * 0.75))
    rules = [Rule((rng.choice(atoms),)) for _ in range(n_facts)]
    for _ in range(n_rules - n_facts):
        head = (rng.choice(atoms),)
        body = tuple(
            Literal(rng.choice(atoms)) for _ in range(rng.randint(1, 2))
        )
        rules.append(Rule(head, body))
    return GroundProgram.from_rules(rules)


def constraint_heavy_program(
    rng: random.Random, n_atoms: int = 8, n_rules: int = 16
) -> GroundProgram:
    """A few facts, many constraints, rest normal rules."""
    atoms = _atoms(n_atoms)
    n_facts = max(1, round(n_rules * 0.2))
    n_constraints = max(1, round(n_rules * 0.4))
    rules: list[Rule] = [Rule((rng.choice(atoms),)) for _ in range(n_facts)]
    for _ in range(n_constraints):
        body = tuple(
            Literal(rng.choice(atoms), rng.random() < 0.5)
            for _ in range(rng.randint(1, 3))
        )
        rules.append(Rule((), body))
    for _ in range(n_rules - n_facts - n_constraints):
        head = (rng.choice(atoms),)
        body = tuple(
            Literal(rng.choice(atoms), rng.random() < 0.4)
            for _ in range(rng.randint(1, 2))
        )
        rules.append(Rule(head, body))
    return GroundProgram.from_rules(rules)


def pigeonhole_program(pigeons: int, holes: int) -> GroundProgram:
    """Disjunctive hole assignment with exclusion constraints.

    Inconsistent exactly when pigeons > holes; atom count is pigeons*holes,
    so keep both small for oracle use.
    """
    if pigeons < 1 or holes < 1:
        raise ValueError("pigeons and holes must be >= 1")
    rules = []
    for p in range(1, pigeons + 1):
        rules.append(
            Rule(tuple(Atom("in", (str(p), str(h))) for h in range(1, holes + 1)))
        )
    for h in range(1, holes + 1):
        for p1 in range(1, pigeons + 1):
            for p2 in range(p1 + 1, pigeons + 1):
                rules.append(
                    Rule(
                        (),
                        (
                            Literal(Atom("in", (str(p1), str(h)))),
                            Literal(Atom("in", (str(p2), str(h)))),
                        ),
                    )
                )
    return GroundProgram.from_rules(rules)


def random_mixed_program(rng: random.Random, max_atoms: int = 10) -> GroundProgram:
    """Arbitrary mix of facts, disjunctions, constraints; for property tests."""
    n_atoms = rng.randint(1, max_atoms)
    atoms = _atoms(n_atoms)
    rules = []
    for _ in range(rng.randint(1, 20)):
        head = tuple(
            dict.fromkeys(rng.choice(atoms) for _ in range(rng.randint(0, 3)))
        )
        body = tuple(
            Literal(rng.choice(atoms), rng.random() < 0.4)
            for _ in range(rng.randint(0, 4))
        )
        if not head and not body:
            head = (rng.choice(atoms),)
        rules.append(Rule(head, body))
    return GroundProgram.from_rules(rules)


FAMILIES = ("random3", "pigeonhole", "facty", "constrainty")


def generate_program(family: str, seed: int, index: int) -> GroundProgram:
    """Deterministic instance `index` of a family under `seed`."""
    rng = random.Random(f"{family}:{seed}:{index}")
    if family == "random3":
        return random_normal_program(rng, n_atoms=rng.randint(5, 9))
    if family == "pigeonhole":
        holes = rng.randint(2, 3)
        return pigeonhole_program(holes + rng.choice([-1, 0, 1]), holes)
    if family == "facty":
        return fact_heavy_program(rng, n_atoms=rng.randint(5, 9))
    if family == "constrainty":
        return constraint_heavy_program(rng, n_atoms=rng.randint(5, 9))
    raise ValueError(f"unknown family {family!r}; known: {FAMILIES}")


def write_instances(
    out_dir: str | Path, family: str, count: int, seed: int
) -> list[Path]:
    """Write `count` instances as `<family>__<index>.gasp` files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        p = generate_program(family, seed, i)
        path = out / f"{family}__{seed}_{i:04d}.gasp"
        path.write_text(print_program(p) + "\n", encoding="utf-8")
        paths.append(path)
    return paths


# --- synthetic performance matrices ------------------------------------------


def matrix_from_counts(
    counts: Mapping[str, tuple[int, int]],
    family: str = "synthetic",
    complexity: str = NP,
    solved_time: float = 1.0,
) -> PerformanceMatrix:
    """Build a matrix whose solved/unique aggregates equal `counts`.

    counts maps solver -> (solved, unique).  Each solver gets its unique
    instances; the remaining solved counts are met by shared instances
    covered by two (or once, three) solvers at a time so they stay
    non-unique.  Unsolvable cells become timeouts.
    """
    for s, (solved, unique) in counts.items():
        if unique < 0 or solved < unique:
            raise ValueError(f"invalid counts for {s}: solved={solved} unique={unique}")
    solvers = list(counts)
    solved_by: dict[str, set[str]] = {s: set() for s in solvers}
    instances: list[str] = []

    def add_instance(winners: Sequence[str]) -> None:
        name = f"i{len(instances):05d}"
        instances.append(name)
        for w in winners:
            solved_by[w].add(name)

    for s, (_, unique) in counts.items():
        for _ in range(unique):
            add_instance([s])

    need = {s: solved - unique for s, (solved, unique) in counts.items()}
    if sum(need.values()) % 2 == 1:
        top3 = heapq.nlargest(3, need, key=need.get)
        if len(top3) < 3 or need[top3[2]] < 1:
            raise ValueError("cannot realise counts: odd shared demand")
        add_instance(top3)
        for s in top3:
            need[s] -= 1
    heap = [(-n, s) for s, n in need.items() if n > 0]
    heapq.heapify(heap)
    while heap:
        n1, s1 = heapq.heappop(heap)
        if not heap:
            raise ValueError("cannot realise counts: lone shared demand left")
        n2, s2 = heapq.heappop(heap)
        add_instance([s1, s2])
        if n1 + 1 < 0:
            heapq.heappush(heap, (n1 + 1, s1))
        if n2 + 1 < 0:
            heapq.heappush(heap, (n2 + 1, s2))

    infos = [InstanceInfo(name, family, complexity) for name in instances]
    cells = {}
    for s in solvers:
        for name in instances:
            if name in solved_by[s]:
                cells[(s, name)] = RunOutcome(SOLVED, solved_time)
            else:
                cells[(s, name)] = RunOutcome(TIMEOUT)
    return PerformanceMatrix(solvers, infos, cells)


def overlapping_variants_matrix() -> PerformanceMatrix:
    """25 heavily overlapping engine variants, 10 uniquely solved instances.

    Five variants carry the real signal: sliding 8-instance windows over a
    24-instance shared pool plus 2 private instances each.  The other 20
    solve strict sub-windows, so they are dominated and also keep every
    shared instance non-unique.  The greedy policy should recover exactly
    the five windowed variants, whose union covers everything.
    """
    shared = [f"s{j:02d}" for j in range(24)]
    solved_by: dict[str, set[str]] = {}
    for i in range(5):
        window = set(shared[4 * i : 4 * i + 8])
        solved_by[f"v{i}"] = window | {f"u{i}a", f"u{i}b"}
    for j in range(20):
        i, drop = j % 5, j // 5
        window = shared[4 * i : 4 * i + 8]
        solved_by[f"r{j:02d}"] = set(window) - {window[2 * drop]} - {window[2 * drop + 1]}
    names = sorted({n for s in solved_by.values() for n in s})
    instances = [InstanceInfo(n, "variants", NP) for n in names]
    cells = {}
    for engine, wins in solved_by.items():
        for n in names:
            cells[(engine, n)] = (
                RunOutcome(SOLVED, 1.0) if n in wins else RunOutcome(TIMEOUT)
            )
    return PerformanceMatrix(sorted(solved_by), instances, cells)


# Solved/unique aggregates of a published 16-solver comparison on NP
# instances; the claspD and claspfolio rows carry no counts there, so the
# fabricated matrix has these 14 solvers.
TABLE2_COUNTS: dict[str, tuple[int, int]] = {
    "clasp": (445, 26),
    "cmodels": (333, 6),
    "dlv": (241, 37),
    "idp": (419, 15),
    "lp2diffgz3": (254, 0),
    "lp2difflgz3": (242, 0),
    "lp2difflz3": (248, 0),
    "lp2diffz3": (307, 0),
    "lp2sat2gminisat": (328, 0),
    "lp2sat2lgminisat": (322, 0),
    "lp2sat2lminisat": (324, 0),
    "lp2sat2minisat": (336, 0),
    "smodels": (134, 0),
    "sup": (311, 1),
}


def table2_matrix() -> PerformanceMatrix:
    return matrix_from_counts(TABLE2_COUNTS)
