import csv
import sys
import textwrap
from pathlib import Path

import pytest

from measp.features import FEATURE_COUNT, FeatureVector
from measp.gen import write_instances
from measp.learn import LabeledDataset, train
from measp.program import print_program
from measp.runner import (
    BenchPlan,
    EngineError,
    EngineSpec,
    Limits,
    NoCapableEngineError,
    SanityCheckError,
    bench,
    builtin_oracle_spec,
    discover_instances,
    instance_family,
    load_registry,
    run_engine,
    solve,
)
from measp.selection import (
    ANSWER_FOUND,
    ERROR,
    INCONSISTENT,
    SOLVED,
    TIMEOUT,
    EngineEntry,
    EnginePool,
)

VERSION = "cheap52.v1"
PY = sys.executable


def fake_engine(command, **kw):
    return EngineSpec(name="fake", kind="external", command=command, **kw)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


# --- registry -----------------------------------------------------------------


def test_load_registry(tmp_path):
    reg = write(
        tmp_path,
        "engines.ini",
        textwrap.dedent(
            """
            [oracle]
            kind = builtin
            handles_disjunctive = yes

            [ext]
            kind = external
            command = solver --flag {instance}
            answer_prefix = SAT
            """
        ),
    )
    engines = load_registry(reg)
    assert list(engines) == ["oracle", "ext"]
    assert engines["oracle"].kind == "builtin-oracle"
    assert engines["oracle"].handles_disjunctive
    assert engines["ext"].answer_prefix == "SAT"
    assert not engines["ext"].handles_disjunctive


def test_load_registry_errors(tmp_path):
    with pytest.raises(EngineError, match="unreadable"):
        load_registry(tmp_path / "missing.ini")
    bad = write(tmp_path, "bad.ini", "[x]\nkind = external\n")  # no command
    with pytest.raises(EngineError, match="placeholder"):
        load_registry(bad)
    empty = write(tmp_path, "empty.ini", "")
    with pytest.raises(EngineError, match="no engines"):
        load_registry(empty)


def test_engine_spec_validation():
    with pytest.raises(ValueError):
        EngineSpec("x", "weird")
    with pytest.raises(ValueError):
        EngineSpec("x", "external", command="no placeholder")


# --- run_engine -----------------------------------------------------------------


def test_builtin_oracle_single_fact(tmp_path):
    instance = write(tmp_path, "a.gasp", "a.\n")
    out = run_engine(builtin_oracle_spec(), instance)
    assert out.status == SOLVED
    assert out.answer == ANSWER_FOUND
    assert out.cpu_seconds < 1.0


def test_builtin_oracle_inconsistent(tmp_path):
    instance = write(tmp_path, "i.gasp", "a | b.  :- a.  :- b.\n")
    out = run_engine(builtin_oracle_spec(), instance)
    assert out.status == SOLVED
    assert out.answer == INCONSISTENT


def test_tiny_cpu_limit_forces_timeout(tmp_path):
    instance = write(tmp_path, "x.gasp", "a :- not b.  b :- not a.\n")
    out = run_engine(builtin_oracle_spec(), instance, Limits(cpu_seconds=0.001))
    assert out.status == TIMEOUT


def test_busy_loop_engine_hits_cpu_cap(tmp_path):
    instance = write(tmp_path, "x.gasp", "a.\n")
    spec = fake_engine(f"{PY} -c 'pass' {{instance}}")
    spec = EngineSpec(
        "spin",
        "external",
        command=f'{PY} -u -c "while True: pass" {{instance}}',
    )
    out = run_engine(spec, instance, Limits(cpu_seconds=1.0))
    assert out.status == TIMEOUT
    assert out.cpu_seconds >= 0.9


def test_failing_engine_is_error(tmp_path):
    instance = write(tmp_path, "x.gasp", "a.\n")
    out = run_engine(fake_engine('sh -c "exit 7" -- {instance}'), instance)
    assert out.status == ERROR


def test_memory_hog_is_memout(tmp_path):
    instance = write(tmp_path, "x.gasp", "a.\n")
    hog = (
        "import sys\n"
        "chunks = []\n"
        "try:\n"
        "    while True: chunks.append(bytearray(16 * 1024 * 1024))\n"
        "except MemoryError:\n"
        "    sys.exit(9)\n"
    )
    script = write(tmp_path, "hog.py", hog)
    out = run_engine(
        fake_engine(f"{PY} {script} {{instance}}"),
        instance,
        Limits(cpu_seconds=60.0, memory_bytes=768 * 2**20),
    )
    assert out.status == "memout"


def test_answer_parsing_prefixes(tmp_path):
    instance = write(tmp_path, "x.gasp", "a.\n")
    yes = fake_engine('sh -c "echo ANSWER" -- {instance}')
    assert run_engine(yes, instance).answer == ANSWER_FOUND
    no = fake_engine('sh -c "echo INCONSISTENT" -- {instance}')
    assert run_engine(no, instance).answer == INCONSISTENT
    custom = fake_engine(
        'sh -c "echo SAT" -- {instance}', answer_prefix="SAT"
    )
    assert run_engine(custom, instance).answer == ANSWER_FOUND
    silent = fake_engine('sh -c "true" -- {instance}')
    assert run_engine(silent, instance).status == ERROR


def test_missing_instance_raises(tmp_path):
    with pytest.raises(EngineError, match="not readable"):
        run_engine(builtin_oracle_spec(), tmp_path / "nope.gasp")


def test_oracle_refuses_oversized_instance(tmp_path):
    rules = "\n".join(f"p{i}." for i in range(30))
    instance = write(tmp_path, "big.gasp", rules + "\n")
    out = run_engine(builtin_oracle_spec(), instance)
    assert out.status == ERROR  # atom cap exceeded is an engine error


# --- solve ------------------------------------------------------------------------


def fv(*leading):
    values = list(leading) + [0.0] * (FEATURE_COUNT - len(leading))
    return FeatureVector(VERSION, tuple(float(v) for v in values))


def two_engine_model(label_a="oracle", label_b="other"):
    # feature 0 is n_rules: one-rule programs sit near label_a's pattern
    d = LabeledDataset((fv(1.0), fv(50.0)), (label_a, label_b), VERSION)
    return train("nn", d, k=1)


def oracle_pool(*names, flags=None):
    flags = flags or {}
    return EnginePool(tuple(EngineEntry(n, flags.get(n, True)) for n in names))


def test_solve_with_oracle_pool(tmp_path):
    instance = write(tmp_path, "x.gasp", "a.\n")
    model = two_engine_model()
    engines = {"oracle": builtin_oracle_spec(), "other": builtin_oracle_spec("other")}
    result = solve(instance, model, oracle_pool("oracle", "other"), engines)
    assert result.chosen == "oracle"
    assert result.outcome.status == SOLVED
    assert result.outcome.answer == ANSWER_FOUND
    assert result.total_accounted_seconds >= (
        result.feature_seconds + result.classify_seconds
    )
    # deterministic: same model, same instance, same choice and verdict
    again = solve(instance, model, oracle_pool("oracle", "other"), engines)
    assert (again.chosen, again.outcome.status, again.outcome.answer) == (
        result.chosen,
        result.outcome.status,
        result.outcome.answer,
    )


def test_solve_feature_budget_exhaustion(tmp_path):
    instance = write(tmp_path, "x.gasp", "a.\n")
    model = two_engine_model()
    engines = {"oracle": builtin_oracle_spec(), "other": builtin_oracle_spec("other")}
    result = solve(
        instance,
        model,
        oracle_pool("oracle", "other"),
        engines,
        Limits(cpu_seconds=1e-9),
    )
    assert result.chosen is None
    assert result.outcome.status == TIMEOUT


def test_solve_disjunctive_gating(tmp_path):
    instance = write(tmp_path, "d.gasp", "a | b.\n")
    model = two_engine_model()
    engines = {"oracle": builtin_oracle_spec(), "other": builtin_oracle_spec("other")}
    pool = oracle_pool("oracle", "other", flags={"oracle": False, "other": False})
    with pytest.raises(NoCapableEngineError):
        solve(instance, model, pool, engines)
    # with a capable engine the disjunctive instance is routed to it
    pool = oracle_pool("oracle", "other", flags={"oracle": False, "other": True})
    result = solve(instance, model, pool, engines)
    assert result.chosen == "other"
    assert result.outcome.status == SOLVED


def test_solve_fallback_on_error(tmp_path):
    instance = write(tmp_path, "x.gasp", "a.\n")
    model = two_engine_model(label_a="broken", label_b="oracle")
    engines = {
        "broken": fake_engine('sh -c "exit 3" -- {instance}'),
        "oracle": builtin_oracle_spec(),
    }
    pool = oracle_pool("broken", "oracle")
    no_fallback = solve(instance, model, pool, engines)
    assert no_fallback.chosen == "broken"
    assert no_fallback.outcome.status == ERROR
    with_fallback = solve(instance, model, pool, engines, fallback=True)
    assert with_fallback.chosen == "oracle"
    assert with_fallback.outcome.status == SOLVED
    assert [name for name, _ in with_fallback.attempts] == ["broken", "oracle"]


def test_solve_parse_error_propagates(tmp_path):
    from measp.program import ParseError

    instance = write(tmp_path, "bad.gasp", "a :- X.\n")
    model = two_engine_model()
    engines = {"oracle": builtin_oracle_spec(), "other": builtin_oracle_spec("other")}
    with pytest.raises(ParseError):
        solve(instance, model, oracle_pool("oracle", "other"), engines)


# --- bench -----------------------------------------------------------------------


def registry_file(tmp_path, extra=""):
    return write(
        tmp_path,
        "engines.ini",
        "[oracle]\nkind = builtin\nhandles_disjunctive = yes\n" + extra,
    )


def test_instance_family_convention(tmp_path):
    assert instance_family(Path("facty__0001.gasp")) == "facty"
    assert instance_family(Path("sub/inst.gasp")) == "sub"
    assert instance_family(Path("inst.gasp")) == "default"


def test_discover_instances_classifies(tmp_path):
    write(tmp_path, "plain__a.gasp", "a :- b.  b.\n")
    write(tmp_path, "disj__b.gasp", "a | b.\n")
    found = discover_instances(tmp_path)
    by_name = {name: info for name, _, info in found}
    assert by_name["plain__a.gasp"].complexity == "NP"
    assert by_name["disj__b.gasp"].complexity == "BeyondNP"


def test_bench_tiny_grid(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for i, text in enumerate(["a.", "b :- not c.", "d. e :- d."]):
        write(corpus, f"fam__{i}.gasp", text + "\n")
    plan = BenchPlan(
        registry_path=str(registry_file(tmp_path)),
        instances_dir=str(corpus),
        out_csv=str(tmp_path / "perf.csv"),
        limits=Limits(cpu_seconds=30.0),
    )
    matrix = bench(plan)
    assert matrix.solvers == ("oracle",)
    assert matrix.solved_count("oracle") == 3
    rows = (tmp_path / "perf.csv").read_text().splitlines()
    assert len(rows) == 4  # header + 3 cells


def test_bench_resume_skips_existing(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for i in range(3):
        write(corpus, f"fam__{i}.gasp", "a.\n")
    log = tmp_path / "calls.log"
    reg = write(
        tmp_path,
        "engines.ini",
        "[fake]\nkind = external\n"
        f'command = sh -c "echo run >> {log}; echo ANSWER" -- {{instance}}\n',
    )
    out_csv = tmp_path / "perf.csv"
    plan = BenchPlan(str(reg), str(corpus), str(out_csv), limits=Limits(30.0))
    bench(plan)
    assert log.read_text().count("run") == 3

    rows = out_csv.read_text().splitlines()
    out_csv.write_text("\n".join(rows[:2] + rows[3:]) + "\n")  # drop one cell
    matrix = bench(plan)
    assert log.read_text().count("run") == 4  # only the missing cell re-ran
    assert matrix.solved_count("fake") == 3


def test_bench_check_oracle_catches_liar(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    write(corpus, "fam__0.gasp", "a | b.  :- a.  :- b.\n")  # inconsistent
    reg = write(
        tmp_path,
        "engines.ini",
        '[liar]\nkind = external\ncommand = sh -c "echo ANSWER" -- {instance}\n',
    )
    plan = BenchPlan(
        str(reg), str(corpus), str(tmp_path / "perf.csv"),
        limits=Limits(30.0), check_oracle=True,
    )
    with pytest.raises(SanityCheckError):
        bench(plan)


def test_bench_unreadable_registry_aborts(tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    write(corpus, "a.gasp", "a.\n")
    plan = BenchPlan(
        str(tmp_path / "missing.ini"), str(corpus), str(tmp_path / "perf.csv")
    )
    with pytest.raises(EngineError):
        bench(plan)


def test_bench_deterministic_modulo_timing(tmp_path):
    corpus = tmp_path / "corpus"
    write_instances(corpus, "facty", 3, seed=11)
    reg = registry_file(tmp_path)

    def rows_without_time(path):
        with open(path, newline="") as fh:
            return [row[:5] for row in csv.reader(fh)]

    plan1 = BenchPlan(str(reg), str(corpus), str(tmp_path / "p1.csv"), limits=Limits(30.0))
    plan2 = BenchPlan(str(reg), str(corpus), str(tmp_path / "p2.csv"), limits=Limits(30.0))
    bench(plan1)
    bench(plan2)
    assert rows_without_time(tmp_path / "p1.csv") == rows_without_time(tmp_path / "p2.csv")
