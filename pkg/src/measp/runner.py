"""Uniform engine execution under CPU and memory limits.

External engines are opaque commands with an `{instance}` placeholder; the
built-in oracle runs as a subprocess of this interpreter (`python -m measp
oracle ...`) so both kinds get the same hard rlimit caps and the same
stdout answer conventions: a line starting with the engine's answer prefix
(default `ANSWER`) means an answer set was found, the inconsistent prefix
(default `INCONSISTENT`) means provably no answer set.

`solve` is the per-instance multi-engine path: parse, extract features,
classify, then run the predicted engine on the remaining CPU budget.
`bench` executes the full engine x instance grid with a bounded worker
pool, skipping cells already present in the output CSV.
"""

from __future__ import annotations

import csv
import io
import math
import os
import resource
import shlex
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from configparser import ConfigParser, Error as ConfigParserError
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .features import FeatureManifest, extract_features
from .learn import InductiveModel, best_label, predict_scores
from .program import GroundProgram, parse_ground_program
from .selection import (
    ANSWER_FOUND,
    BEYOND_NP,
    ERROR,
    INCONSISTENT,
    MEMOUT,
    NP,
    PERF_CSV_HEADER,
    SOLVED,
    TIMEOUT,
    EnginePool,
    InstanceInfo,
    PerformanceMatrix,
    RunOutcome,
)

DEFAULT_CPU_SECONDS = 600.0
DEFAULT_MEMORY_BYTES = 2 * 2**30

EXIT_ANSWER = 10
EXIT_INCONSISTENT = 20
EXIT_UNKNOWN = 0
EXIT_USAGE = 1


class EngineError(Exception):
    pass


class NoCapableEngineError(EngineError):
    """The instance is disjunctive but no candidate engine handles that."""


class SanityCheckError(EngineError):
    """An engine's answer classification contradicts the oracle."""


@dataclass(frozen=True)
class Limits:
    cpu_seconds: float = DEFAULT_CPU_SECONDS
    memory_bytes: int = DEFAULT_MEMORY_BYTES

    def __post_init__(self):
        if self.cpu_seconds <= 0 or self.memory_bytes <= 0:
            raise ValueError("limits must be positive")


@dataclass(frozen=True)
class EngineSpec:
    name: str
    kind: str  # "external" | "builtin-oracle"
    command: str | None = None
    handles_disjunctive: bool = False
    answer_prefix: str = "ANSWER"
    inconsistent_prefix: str = "INCONSISTENT"

    def __post_init__(self):
        if self.kind not in ("external", "builtin-oracle"):
            raise ValueError(f"unknown engine kind {self.kind!r}")
        if self.kind == "external":
            if not self.command or "{instance}" not in self.command:
                raise ValueError(
                    f"external engine {self.name!r} needs a command with an "
                    "{instance} placeholder"
                )


def builtin_oracle_spec(name: str = "oracle") -> EngineSpec:
    return EngineSpec(name=name, kind="builtin-oracle", handles_disjunctive=True)


def load_registry(path) -> dict[str, EngineSpec]:
    """Engine registry: one INI section per engine (see docs/formats.md)."""
    parser = ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, ConfigParserError) as e:
        raise EngineError(f"unreadable engine registry {path}: {e}") from None
    registry: dict[str, EngineSpec] = {}
    for section in parser.sections():
        opts = parser[section]
        kind = opts.get("kind", "external").strip()
        if kind == "builtin":
            kind = "builtin-oracle"
        try:
            registry[section] = EngineSpec(
                name=section,
                kind=kind,
                command=opts.get("command"),
                handles_disjunctive=opts.getboolean("handles_disjunctive", False),
                answer_prefix=opts.get("answer_prefix", "ANSWER"),
                inconsistent_prefix=opts.get("inconsistent_prefix", "INCONSISTENT"),
            )
        except ValueError as e:
            raise EngineError(f"bad engine registry entry [{section}]: {e}") from None
    if not registry:
        raise EngineError(f"engine registry {path} defines no engines")
    return registry


def registry_pool(registry: Mapping[str, EngineSpec]) -> EnginePool:
    from .selection import EngineEntry

    return EnginePool(
        tuple(
            EngineEntry(s.name, s.handles_disjunctive) for s in registry.values()
        )
    )


def scratch_dir() -> str | None:
    return os.environ.get("MEASP_TMPDIR") or None


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _argv(spec: EngineSpec, instance_path: Path) -> list[str]:
    if spec.kind == "builtin-oracle":
        return [sys.executable, "-m", "measp", "oracle", str(instance_path)]
    return [
        tok.replace("{instance}", str(instance_path))
        for tok in shlex.split(spec.command or "")
    ]


def _classify_output(spec: EngineSpec, text: str) -> str | None:
    for line in text.splitlines():
        if line.startswith(spec.answer_prefix):
            return ANSWER_FOUND
        if line.startswith(spec.inconsistent_prefix):
            return INCONSISTENT
    return None


def run_engine(
    spec: EngineSpec, instance_path, limits: Limits = Limits()
) -> RunOutcome:
    """Run one engine on one instance under hard CPU and memory caps.

    CPU time is the child's user+system time from wait4; wall-clock is
    recorded but never enforced.  A run counts as solved only when the
    child exits on its own, its stdout classifies as an answer, and the
    consumed CPU stays within the limit.  Memouts are detected best-effort
    from the peak RSS approaching the address-space cap.
    """
    path = Path(instance_path)
    if not path.is_file() or not os.access(path, os.R_OK):
        raise EngineError(f"instance not readable: {path}")
    argv = _argv(spec, path)
    # rlimits have one-second granularity; the hard cap gets one extra
    # second so the classification below sees the consumed CPU
    cpu_cap = max(1, math.ceil(limits.cpu_seconds))
    mem_cap = int(limits.memory_bytes)

    def _set_limits():
        resource.setrlimit(resource.RLIMIT_CPU, (cpu_cap, cpu_cap + 1))
        resource.setrlimit(resource.RLIMIT_AS, (mem_cap, mem_cap))
        resource.setrlimit(resource.RLIMIT_CORE, (0, 0))

    started = time.monotonic()
    with tempfile.TemporaryFile(dir=scratch_dir()) as out_file:
        try:
            proc = subprocess.Popen(
                argv,
                stdout=out_file,
                stderr=subprocess.DEVNULL,
                preexec_fn=_set_limits,
                start_new_session=True,
            )
        except OSError as e:
            raise EngineError(f"cannot launch engine {spec.name!r}: {e}") from None
        _, status, usage = os.wait4(proc.pid, 0)
        proc.returncode = os.waitstatus_to_exitcode(status)  # already reaped
        wall = time.monotonic() - started
        cpu = usage.ru_utime + usage.ru_stime
        out_file.seek(0)
        text = out_file.read().decode("utf-8", errors="replace")

    answer = _classify_output(spec, text)
    exited_normally = proc.returncode >= 0
    if exited_normally and answer is not None and cpu <= limits.cpu_seconds:
        return RunOutcome(SOLVED, cpu_seconds=cpu, answer=answer, wall_seconds=wall)
    if cpu >= min(limits.cpu_seconds, float(cpu_cap)) - 0.05:
        return RunOutcome(TIMEOUT, cpu_seconds=cpu, wall_seconds=wall)
    maxrss_bytes = usage.ru_maxrss * 1024  # Linux reports kilobytes
    if maxrss_bytes >= 0.9 * mem_cap:
        return RunOutcome(MEMOUT, cpu_seconds=cpu, wall_seconds=wall)
    return RunOutcome(ERROR, cpu_seconds=cpu, wall_seconds=wall)


# --- per-instance multi-engine solving ----------------------------------------


@dataclass(frozen=True)
class SolveResult:
    instance: str
    chosen: str | None
    outcome: RunOutcome
    feature_seconds: float
    classify_seconds: float
    attempts: tuple[tuple[str, RunOutcome], ...] = ()

    @property
    def total_accounted_seconds(self) -> float:
        spent = sum(out.cpu_seconds or 0.0 for _, out in self.attempts)
        return self.feature_seconds + self.classify_seconds + spent


def _candidate_entries(
    pool: EnginePool, model: InductiveModel, disjunctive: bool
) -> list:
    candidates = [e for e in pool.engines if e.name in model.labels]
    if disjunctive:
        candidates = [e for e in candidates if e.handles_disjunctive]
        if not candidates:
            raise NoCapableEngineError(
                "instance has a disjunctive rule but no capable engine is "
                "available in the pool"
            )
    if not candidates:
        raise EngineError("no pool engine matches the model's labels")
    return candidates


def solve(
    instance_path,
    model: InductiveModel,
    pool: EnginePool,
    engines: Mapping[str, EngineSpec],
    limits: Limits = Limits(),
    fallback: bool = False,
    manifest: FeatureManifest | None = None,
) -> SolveResult:
    """Parse, extract features, classify, then run the predicted engine.

    Feature and classification time count against the CPU budget; the
    chosen engine gets what remains.  With `fallback` enabled, an engine
    error (not a timeout) moves on to the remaining pool engines in pool
    order, which encodes descending historical solved counts.
    """
    path = Path(instance_path)
    missing = [e.name for e in pool.engines if e.name not in engines]
    if missing:
        raise EngineError(f"pool engines without registry entries: {missing}")

    # perf_counter: the in-process phases are CPU bound and the wall clock
    # has far finer granularity than the per-process CPU clock, so budget
    # accounting stays conservative and deterministic
    t0 = time.perf_counter()
    with open(path, "r", encoding="utf-8") as fh:
        program = parse_ground_program(fh)
    vector = extract_features(program, manifest)
    feature_seconds = time.perf_counter() - t0

    t1 = time.perf_counter()
    candidates = _candidate_entries(pool, model, program.has_disjunctive_rule)
    scores = predict_scores(model, vector)
    chosen = best_label({e.name: scores.get(e.name, float("-inf")) for e in candidates})
    classify_seconds = time.perf_counter() - t1

    budget = limits.cpu_seconds - feature_seconds - classify_seconds
    if budget <= 0:
        return SolveResult(
            instance=str(path),
            chosen=None,
            outcome=RunOutcome(TIMEOUT, cpu_seconds=0.0),
            feature_seconds=feature_seconds,
            classify_seconds=classify_seconds,
        )

    order = [chosen]
    if fallback:
        order += [e.name for e in candidates if e.name != chosen]
    attempts: list[tuple[str, RunOutcome]] = []
    outcome = RunOutcome(ERROR, cpu_seconds=0.0)
    engine_name = chosen
    for engine_name in order:
        outcome = run_engine(engines[engine_name], path, Limits(budget, limits.memory_bytes))
        attempts.append((engine_name, outcome))
        budget -= outcome.cpu_seconds or 0.0
        if outcome.status != ERROR or not fallback or budget <= 0:
            break
    return SolveResult(
        instance=str(path),
        chosen=engine_name,
        outcome=outcome,
        feature_seconds=feature_seconds,
        classify_seconds=classify_seconds,
        attempts=tuple(attempts),
    )


# --- benchmark grid -------------------------------------------------------------


@dataclass(frozen=True)
class BenchPlan:
    registry_path: str
    instances_dir: str
    out_csv: str
    limits: Limits = Limits()
    workers: int = 1
    seed: int = 0
    engines: tuple[str, ...] = ()  # empty: every registry engine
    check_oracle: bool = False
    oracle_max_atoms: int = 24

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def instance_family(rel_path: Path) -> str:
    stem = rel_path.stem
    if "__" in stem:
        return stem.split("__", 1)[0]
    if rel_path.parent != Path("."):
        return rel_path.parent.name
    return "default"


def discover_instances(instances_dir) -> list[tuple[str, Path, InstanceInfo]]:
    """All .gasp files under the directory, classified NP/BeyondNP."""
    root = Path(instances_dir)
    if not root.is_dir():
        raise EngineError(f"instance directory not found: {root}")
    found = []
    for path in sorted(root.rglob("*.gasp")):
        rel = path.relative_to(root)
        with open(path, "r", encoding="utf-8") as fh:
            program = parse_ground_program(fh)
        comp = BEYOND_NP if program.has_disjunctive_rule else NP
        info = InstanceInfo(rel.as_posix(), instance_family(rel), comp)
        found.append((rel.as_posix(), path, info))
    return found


def _read_existing_cells(path: Path):
    """Lenient reader for resumable bench output (possibly partial grids)."""
    cells: dict[tuple[str, str], RunOutcome] = {}
    if not path.is_file():
        return cells
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != PERF_CSV_HEADER:
            raise EngineError(f"existing output {path} has an unexpected header")
        for row in reader:
            if not row:
                continue
            solver, name, _family, _comp, status, cpu = row
            cells[(solver, name)] = RunOutcome(status, float(cpu) if cpu else None)
    return cells


def _oracle_verdict(path: Path, max_atoms: int) -> str | None:
    from .semantics import OracleScaleError, has_answer_set

    with open(path, "r", encoding="utf-8") as fh:
        program = parse_ground_program(fh)
    if program.n_atoms > max_atoms:
        return None
    return ANSWER_FOUND if has_answer_set(program) else INCONSISTENT


def bench(plan: BenchPlan) -> PerformanceMatrix:
    """Execute the solver x instance grid and persist the performance CSV.

    Cells already present in the output file are not re-run; the final CSV
    always contains the complete grid, written atomically.
    """
    registry = load_registry(plan.registry_path)
    engine_names = sorted(plan.engines or registry)
    unknown = [e for e in engine_names if e not in registry]
    if unknown:
        raise EngineError(f"engines not in registry: {unknown}")
    instances = discover_instances(plan.instances_dir)
    infos = [info for _, _, info in instances]
    paths = {name: path for name, path, _ in instances}

    existing = _read_existing_cells(Path(plan.out_csv))
    todo = [
        (engine, name)
        for engine in engine_names
        for name, _, _ in instances
        if (engine, name) not in existing
    ]

    def execute(task: tuple[str, str]) -> tuple[tuple[str, str], RunOutcome]:
        engine, name = task
        outcome = run_engine(registry[engine], paths[name], plan.limits)
        return task, outcome

    cells = dict(existing)
    # drop stale cells for engines/instances outside this plan
    wanted = {(e, i.name) for e in engine_names for i in infos}
    cells = {k: v for k, v in cells.items() if k in wanted}
    if todo:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            for task, outcome in pool.map(execute, todo):
                cells[task] = outcome

    if plan.check_oracle:
        mismatches = []
        verdicts = {
            name: _oracle_verdict(path, plan.oracle_max_atoms)
            for name, path, _ in instances
        }
        for (engine, name), outcome in cells.items():
            expected = verdicts.get(name)
            if outcome.solved and expected and outcome.answer and outcome.answer != expected:
                mismatches.append((engine, name, outcome.answer, expected))
        if mismatches:
            raise SanityCheckError(
                f"engine answers contradict the oracle: {mismatches[:5]}"
            )

    matrix = PerformanceMatrix(engine_names, infos, cells)
    buf = io.StringIO()
    matrix.write_csv(buf)
    atomic_write_text(plan.out_csv, buf.getvalue())
    return matrix
