import io
import random

import pytest

from measp.gen import (
    TABLE2_COUNTS,
    matrix_from_counts,
    overlapping_variants_matrix,
    table2_matrix,
)
from measp.selection import (
    BEYOND_NP,
    SOLVED,
    TIMEOUT,
    EngineEntry,
    EnginePool,
    InstanceInfo,
    PerformanceMatrix,
    RunOutcome,
    SelectionError,
    greedy_pool,
    remove_dominated,
    select_by_uniqueness,
    sota,
    unique_counts,
)


def matrix(solved, times=None, families=None, classes=None):
    """solved: {solver: set(instances)}; every named instance appears."""
    solvers = list(solved)
    names = sorted({i for s in solved.values() for i in s})
    times = times or {}
    instances = [
        InstanceInfo(
            n,
            family=(families or {}).get(n, "fam"),
            complexity=(classes or {}).get(n, "NP"),
        )
        for n in names
    ]
    cells = {}
    for s in solvers:
        for n in names:
            if n in solved[s]:
                cells[(s, n)] = RunOutcome(SOLVED, times.get((s, n), 1.0))
            else:
                cells[(s, n)] = RunOutcome(TIMEOUT)
    return PerformanceMatrix(solvers, instances, cells)


# --- RunOutcome / matrix basics ------------------------------------------------


def test_run_outcome_validation():
    with pytest.raises(ValueError):
        RunOutcome("flying")
    with pytest.raises(ValueError):
        RunOutcome(SOLVED)  # solved needs cpu_seconds
    with pytest.raises(ValueError):
        RunOutcome(SOLVED, -1.0)
    with pytest.raises(ValueError):
        RunOutcome(SOLVED, 1.0, answer="maybe")


def test_matrix_requires_every_cell():
    info = [InstanceInfo("i1"), InstanceInfo("i2")]
    cells = {("A", "i1"): RunOutcome(TIMEOUT)}
    with pytest.raises(ValueError, match="grid"):
        PerformanceMatrix(["A"], info, cells)


def test_matrix_csv_roundtrip():
    m = matrix(
        {"A": {"i1", "i2"}, "B": {"i2"}},
        times={("A", "i1"): 0.125, ("A", "i2"): 3.5, ("B", "i2"): 1.0},
        classes={"i1": BEYOND_NP},
    )
    buf = io.StringIO()
    m.write_csv(buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == "solver,instance,family,class,status,cpu_seconds"
    again = PerformanceMatrix.read_csv(io.StringIO(text))
    assert again == m


def test_matrix_csv_rejects_bad_header():
    with pytest.raises(ValueError, match="header"):
        PerformanceMatrix.read_csv(io.StringIO("a,b,c\n"))


# --- unique counts / threshold selection ----------------------------------------


def test_unique_counts_simple():
    m = matrix({"A": {"i1", "i2"}, "B": {"i2"}})
    assert unique_counts(m) == {"A": 1, "B": 0}


def test_unique_counts_single_solver():
    m = matrix({"A": {"i1", "i2", "i3"}})
    assert unique_counts(m) == {"A": 3}


def test_unique_counts_identical_sets():
    m = matrix({"A": {"i1", "i2"}, "B": {"i1", "i2"}})
    assert unique_counts(m) == {"A": 0, "B": 0}


def test_table2_matrix_reproduces_published_aggregates():
    m = table2_matrix()
    uniques = unique_counts(m)
    for solver, (solved, unique) in TABLE2_COUNTS.items():
        assert m.solved_count(solver) == solved, solver
        assert uniques[solver] == unique, solver


def test_select_by_uniqueness_threshold_five():
    pool = select_by_uniqueness(table2_matrix(), threshold=5)
    assert pool.names == ("clasp", "idp", "cmodels", "dlv")  # solved desc


def test_select_by_uniqueness_threshold_one_adds_sup():
    pool = select_by_uniqueness(table2_matrix(), threshold=1)
    assert set(pool.names) == {"clasp", "idp", "cmodels", "dlv", "sup"}


def test_select_by_uniqueness_all_overlapping_errors():
    m = matrix({"A": {"i1"}, "B": {"i1"}})
    with pytest.raises(SelectionError, match="extended policy"):
        select_by_uniqueness(m, threshold=1)


def test_select_by_uniqueness_scale_invariant():
    base = {"A": {"i1", "i2"}, "B": {"i3"}}
    m1 = matrix(base, times={("A", "i1"): 1.0, ("A", "i2"): 2.0, ("B", "i3"): 3.0})
    m2 = matrix(base, times={("A", "i1"): 10.0, ("A", "i2"): 20.0, ("B", "i3"): 30.0})
    assert select_by_uniqueness(m1, 1).names == select_by_uniqueness(m2, 1).names


def test_capabilities_reach_the_pool():
    m = matrix({"A": {"i1"}, "B": {"i2"}})
    pool = select_by_uniqueness(m, 1, capabilities={"B": True})
    assert pool.entry("B").handles_disjunctive
    assert not pool.entry("A").handles_disjunctive


def test_warning_when_no_disjunctive_engine_for_beyond_np():
    m = matrix({"A": {"i1"}, "B": {"i2"}}, classes={"i1": BEYOND_NP})
    with pytest.warns(UserWarning, match="BeyondNP"):
        select_by_uniqueness(m, 1)


# --- dominance -------------------------------------------------------------------


def test_remove_dominated_subset():
    m = matrix({"s": {"i1", "i2"}, "t": {"i1"}})
    assert remove_dominated(m) == {"s"}


def test_remove_dominated_tie_keeps_faster():
    m = matrix(
        {"slow": {"i1", "i2"}, "fast": {"i1", "i2"}},
        times={
            ("slow", "i1"): 10.0,
            ("slow", "i2"): 10.0,
            ("fast", "i1"): 5.0,
            ("fast", "i2"): 5.0,
        },
    )
    assert remove_dominated(m) == {"fast"}


def test_remove_dominated_tie_then_name():
    m = matrix({"b": {"i1"}, "a": {"i1"}})
    assert remove_dominated(m) == {"a"}


def test_remove_dominated_incomparable_sets_all_kept():
    m = matrix({"A": {"i1", "i2"}, "B": {"i2", "i3"}, "C": {"i3", "i1"}})
    assert remove_dominated(m) == {"A", "B", "C"}


def test_remove_dominated_never_lowers_sota():
    rng = random.Random(1234)
    names = [f"i{k}" for k in range(12)]
    for _ in range(50):
        solved = {
            s: {n for n in names if rng.random() < 0.4}
            for s in ("A", "B", "C", "D")
        }
        m = matrix(solved)
        before = sota(m, list(solved)).solved
        survivors = remove_dominated(m)
        after = sota(m, sorted(survivors)).solved
        assert after == before


# --- greedy pool -----------------------------------------------------------------


def test_greedy_pool_disjoint_sets_selects_all():
    m = matrix({"A": {"i1"}, "B": {"i2"}, "C": {"i3"}})
    assert set(greedy_pool(m).names) == {"A", "B", "C"}


def test_greedy_pool_nested_sets_selects_maximal():
    m = matrix({"big": {"i1", "i2", "i3"}, "small": {"i1"}, "mid": {"i1", "i2"}})
    assert greedy_pool(m).names == ("big",)


def test_greedy_pool_overlapping_variants():
    # 25 heavily overlapping variants, 10 uniquely solved instances overall:
    # the greedy policy keeps 5 engines covering the union of all 25
    m = overlapping_variants_matrix()
    total_unique = sum(1 for c in unique_counts(m).values() if c) * 2
    assert total_unique == 10
    assert sum(unique_counts(m).values()) == 10
    pool = greedy_pool(m, distinguishability=1)
    assert pool.names == ("v0", "v1", "v2", "v3", "v4")
    union_all = {
        i.name for i in m.instances if any(m.outcome(s, i.name).solved for s in m.solvers)
    }
    assert sota(m, pool.names).solved == len(union_all)


def test_greedy_pool_distinguishability_guard():
    # A brings 3 fresh uniques but shrinks B's uniques to 4; with a
    # distinguishability demand of 5 it must stay out
    m = matrix(
        {
            "A": {"i1", "i2", "i3", "i4", "i5"},
            "B": {"i4", "i5", "i6", "i7", "i8", "i9"},
        }
    )
    assert set(greedy_pool(m, distinguishability=1).names) == {"A", "B"}
    assert set(greedy_pool(m, distinguishability=3).names) == {"A", "B"}
    assert greedy_pool(m, distinguishability=5).names == ("B",)


# --- sota ------------------------------------------------------------------------


def test_sota_single_engine_equals_row():
    m = matrix({"A": {"i1", "i3"}, "B": {"i2"}})
    r = sota(m, ["A"])
    assert r.solved == 2
    assert r.best["i1"] == ("A", m.outcome("A", "i1"))
    assert r.best["i2"] is None


def test_sota_disjoint_union():
    m = matrix({"A": {"i1", "i2", "i3"}, "B": {"i4", "i5", "i6", "i7"}})
    assert sota(m, ["A", "B"]).solved == 7


def test_sota_equals_union_on_random_matrices():
    rng = random.Random(777)
    for _ in range(50):
        solved = {
            s: {f"i{k}" for k in range(10) if rng.random() < 0.5}
            for s in ("A", "B", "C")
        }
        if not any(solved.values()):
            continue
        m = matrix(solved)
        best = sota(m, ["A", "B", "C"])
        assert best.solved == len(set().union(*solved.values()))
        assert best.solved >= max(m.solved_count(s) for s in m.solvers)
        assert sum(unique_counts(m).values()) <= len(m.instances)


def test_sota_picks_fastest_and_is_monotone():
    m = matrix(
        {"A": {"i1"}, "B": {"i1"}},
        times={("A", "i1"): 2.0, ("B", "i1"): 1.0},
    )
    r = sota(m, ["A", "B"])
    assert r.best["i1"][0] == "B"
    assert r.total_time == 1.0
    assert sota(m, ["A"]).solved <= r.solved


def test_sota_unknown_engine():
    m = matrix({"A": {"i1"}})
    with pytest.raises(ValueError, match="missing"):
        sota(m, ["A", "ghost"])


def test_pool_validation():
    with pytest.raises(ValueError):
        EnginePool(())
    with pytest.raises(ValueError):
        EnginePool((EngineEntry("x"), EngineEntry("x")))


def test_matrix_from_counts_rejects_impossible():
    with pytest.raises(ValueError):
        matrix_from_counts({"A": (1, 2)})
