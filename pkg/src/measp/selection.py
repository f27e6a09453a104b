"""Engine-pool selection over recorded solver performance.

A PerformanceMatrix holds one RunOutcome per solver/instance cell and
round-trips through the documented CSV schema

    solver,instance,family,class,status,cpu_seconds

with status in {solved, timeout, memout, error} and class in {NP, BeyondNP}.
Pool policies: keep solvers with enough uniquely solved instances, drop
dominated solvers, or grow a pool greedily while every member stays
distinguishable.  `sota` is the per-instance best-performer oracle and the
upper bound for any selector built on the same pool.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence, TextIO

SOLVED = "solved"
TIMEOUT = "timeout"
MEMOUT = "memout"
ERROR = "error"
STATUSES = (SOLVED, TIMEOUT, MEMOUT, ERROR)

ANSWER_FOUND = "answer-set-found"
INCONSISTENT = "inconsistent"

NP = "NP"
BEYOND_NP = "BeyondNP"

PERF_CSV_HEADER = ("solver", "instance", "family", "class", "status", "cpu_seconds")


class SelectionError(Exception):
    pass


@dataclass(frozen=True)
class RunOutcome:
    """Result of one solver run; cpu_seconds is meaningful when solved."""

    status: str
    cpu_seconds: float | None = None
    answer: str | None = None
    wall_seconds: float | None = None

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if self.status == SOLVED:
            if self.cpu_seconds is None or self.cpu_seconds < 0:
                raise ValueError("solved outcomes need cpu_seconds >= 0")
        if self.answer not in (None, ANSWER_FOUND, INCONSISTENT):
            raise ValueError(f"unknown answer tag {self.answer!r}")

    @property
    def solved(self) -> bool:
        return self.status == SOLVED


@dataclass(frozen=True)
class InstanceInfo:
    name: str
    family: str = "default"
    complexity: str = NP

    def __post_init__(self):
        if not self.name or not self.family:
            raise ValueError("instance name and family must be non-empty")
        if self.complexity not in (NP, BEYOND_NP):
            raise ValueError(f"unknown complexity class {self.complexity!r}")


class PerformanceMatrix:
    """solver x instance grid of RunOutcomes; every cell must be present."""

    def __init__(
        self,
        solvers: Sequence[str],
        instances: Sequence[InstanceInfo],
        cells: Mapping[tuple[str, str], RunOutcome],
    ):
        self.solvers = tuple(solvers)
        self.instances = tuple(instances)
        if len(set(self.solvers)) != len(self.solvers):
            raise ValueError("duplicate solver names")
        names = [i.name for i in self.instances]
        if len(set(names)) != len(names):
            raise ValueError("duplicate instance names")
        self.cells = dict(cells)
        expected = {(s, i.name) for s in self.solvers for i in self.instances}
        if set(self.cells) != expected:
            missing = sorted(expected - set(self.cells))[:3]
            extra = sorted(set(self.cells) - expected)[:3]
            raise ValueError(f"cell grid mismatch (missing={missing}, extra={extra})")
        self._by_name = {i.name: i for i in self.instances}

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PerformanceMatrix)
            and self.solvers == other.solvers
            and self.instances == other.instances
            and self.cells == other.cells
        )

    @property
    def instance_names(self) -> tuple[str, ...]:
        return tuple(i.name for i in self.instances)

    def instance(self, name: str) -> InstanceInfo:
        return self._by_name[name]

    def outcome(self, solver: str, instance: str) -> RunOutcome:
        return self.cells[(solver, instance)]

    def solved_set(self, solver: str) -> frozenset[str]:
        return frozenset(
            i.name for i in self.instances if self.cells[(solver, i.name)].solved
        )

    def solved_count(self, solver: str) -> int:
        return len(self.solved_set(solver))

    def total_solved_time(self, solver: str) -> float:
        return sum(
            self.cells[(solver, i.name)].cpu_seconds or 0.0
            for i in self.instances
            if self.cells[(solver, i.name)].solved
        )

    def restrict_solvers(self, names: Iterable[str]) -> "PerformanceMatrix":
        keep = [s for s in self.solvers if s in set(names)]
        cells = {
            (s, i.name): self.cells[(s, i.name)] for s in keep for i in self.instances
        }
        return PerformanceMatrix(keep, self.instances, cells)

    def restrict_instances(
        self, keep: Callable[[InstanceInfo], bool]
    ) -> "PerformanceMatrix":
        kept = [i for i in self.instances if keep(i)]
        cells = {
            (s, i.name): self.cells[(s, i.name)] for s in self.solvers for i in kept
        }
        return PerformanceMatrix(self.solvers, kept, cells)

    def has_beyond_np(self) -> bool:
        return any(i.complexity == BEYOND_NP for i in self.instances)

    # --- CSV schema ---------------------------------------------------------

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PERF_CSV_HEADER)
        for solver in self.solvers:
            for info in self.instances:
                out = self.cells[(solver, info.name)]
                w.writerow(
                    [
                        solver,
                        info.name,
                        info.family,
                        info.complexity,
                        out.status,
                        "" if out.cpu_seconds is None else repr(out.cpu_seconds),
                    ]
                )

    @classmethod
    def read_csv(cls, fh: TextIO) -> "PerformanceMatrix":
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != PERF_CSV_HEADER:
            raise ValueError(
                f"bad performance CSV header {header!r}, expected {PERF_CSV_HEADER!r}"
            )
        solvers: dict[str, None] = {}
        instances: dict[str, InstanceInfo] = {}
        cells: dict[tuple[str, str], RunOutcome] = {}
        for row in reader:
            if not row:
                continue
            solver, name, family, comp, status, cpu = row
            solvers.setdefault(solver)
            info = InstanceInfo(name, family, comp)
            if name in instances and instances[name] != info:
                raise ValueError(f"conflicting tags for instance {name!r}")
            instances.setdefault(name, info)
            outcome = RunOutcome(status, float(cpu) if cpu else None)
            if (solver, name) in cells:
                raise ValueError(f"duplicate cell for ({solver}, {name})")
            cells[(solver, name)] = outcome
        return cls(tuple(solvers), tuple(instances.values()), cells)


@dataclass(frozen=True)
class EngineEntry:
    name: str
    handles_disjunctive: bool = False


@dataclass(frozen=True)
class EnginePool:
    """Ordered engines with capability flags; order encodes preference."""

    engines: tuple[EngineEntry, ...]

    def __post_init__(self):
        if not self.engines:
            raise ValueError("engine pool must be non-empty")
        names = [e.name for e in self.engines]
        if len(set(names)) != len(names):
            raise ValueError("duplicate engine names in pool")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.engines)

    def entry(self, name: str) -> EngineEntry:
        for e in self.engines:
            if e.name == name:
                return e
        raise KeyError(name)


def _assemble_pool(
    ordered_names: Sequence[str],
    capabilities: Mapping[str, bool] | None,
    m: PerformanceMatrix | None,
) -> EnginePool:
    caps = capabilities or {}
    pool = EnginePool(
        tuple(EngineEntry(n, bool(caps.get(n, False))) for n in ordered_names)
    )
    if m is not None and m.has_beyond_np() and not any(
        e.handles_disjunctive for e in pool.engines
    ):
        warnings.warn(
            "matrix contains BeyondNP instances but no selected engine is "
            "flagged disjunctive-capable",
            stacklevel=3,
        )
    return pool


def unique_counts(m: PerformanceMatrix) -> dict[str, int]:
    """Instances solved by exactly one solver, per solver."""
    counts = {s: 0 for s in m.solvers}
    for info in m.instances:
        winners = [s for s in m.solvers if m.cells[(s, info.name)].solved]
        if len(winners) == 1:
            counts[winners[0]] += 1
    return counts


def select_by_uniqueness(
    m: PerformanceMatrix,
    threshold: int = 5,
    capabilities: Mapping[str, bool] | None = None,
) -> EnginePool:
    """Solvers with >= threshold uniquely solved instances, best solver first."""
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    uniques = unique_counts(m)
    chosen = [s for s in m.solvers if uniques[s] >= threshold]
    if not chosen:
        raise SelectionError(
            f"no solver reaches {threshold} uniquely solved instances; "
            "consider the extended policy (remove_dominated + greedy_pool)"
        )
    chosen.sort(key=lambda s: (-m.solved_count(s), s))
    return _assemble_pool(chosen, capabilities, m)


def remove_dominated(m: PerformanceMatrix) -> frozenset[str]:
    """Solvers whose solved set is not a subset of another solver's.

    Exact ties on solved sets keep the solver with the smaller total CPU
    time over its solved instances, then the lexicographically smaller name.
    """
    solved = {s: m.solved_set(s) for s in m.solvers}
    key = {s: (m.total_solved_time(s), s) for s in m.solvers}
    survivors = set()
    for s in m.solvers:
        dominated = any(
            solved[s] <= solved[t]
            and (solved[s] != solved[t] or key[t] < key[s])
            for t in m.solvers
            if t != s
        )
        if not dominated:
            survivors.add(s)
    return frozenset(survivors)


def _unique_within(m: PerformanceMatrix, engines: Sequence[str]) -> dict[str, int]:
    counts = {e: 0 for e in engines}
    for info in m.instances:
        winners = [e for e in engines if m.cells[(e, info.name)].solved]
        if len(winners) == 1:
            counts[winners[0]] += 1
    return counts


def greedy_pool(
    m: PerformanceMatrix,
    distinguishability: int = 1,
    capabilities: Mapping[str, bool] | None = None,
) -> EnginePool:
    """Grow a pool from the empty set, most efficient candidate first.

    Candidates (after dominance pruning) are tried in order of solved count
    desc, total CPU time asc, name asc; a candidate joins if it strictly
    increases the pool's uniquely solved count while every member keeps at
    least `distinguishability` uniquely solved instances.
    """
    if distinguishability < 1:
        raise ValueError("distinguishability must be >= 1")
    survivors = remove_dominated(m)
    candidates = sorted(
        survivors, key=lambda s: (-m.solved_count(s), m.total_solved_time(s), s)
    )
    pool: list[str] = []
    current_unique_total = 0
    for e in candidates:
        trial = pool + [e]
        uniques = _unique_within(m, trial)
        if sum(uniques.values()) <= current_unique_total:
            continue
        if min(uniques.values()) < distinguishability:
            continue
        pool = trial
        current_unique_total = sum(uniques.values())
    if not pool:
        raise SelectionError("greedy pool construction selected no engine")
    return _assemble_pool(pool, capabilities, m)


POOL_CSV_HEADER = ("engine", "handles_disjunctive")


def write_pool_csv(pool: EnginePool, fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(POOL_CSV_HEADER)
    for e in pool.engines:
        w.writerow([e.name, "true" if e.handles_disjunctive else "false"])


def read_pool_csv(fh: TextIO) -> EnginePool:
    reader = csv.reader(fh)
    header = tuple(next(reader, ()))
    if header != POOL_CSV_HEADER:
        raise ValueError(f"bad pool CSV header {header!r}, expected {POOL_CSV_HEADER!r}")
    entries = [
        EngineEntry(name, flag.strip().lower() == "true")
        for name, flag in (row for row in reader if row)
    ]
    return EnginePool(tuple(entries))


@dataclass(frozen=True)
class SotaResult:
    """Per-instance best outcome over a pool, plus aggregates."""

    best: dict[str, tuple[str, RunOutcome] | None]
    solved: int
    total_time: float


def sota(m: PerformanceMatrix, pool: EnginePool | Sequence[str]) -> SotaResult:
    names = pool.names if isinstance(pool, EnginePool) else tuple(pool)
    unknown = set(names) - set(m.solvers)
    if unknown:
        raise ValueError(f"pool engines missing from matrix: {sorted(unknown)}")
    best: dict[str, tuple[str, RunOutcome] | None] = {}
    solved = 0
    total_time = 0.0
    for info in m.instances:
        runs = [
            (m.cells[(s, info.name)].cpu_seconds, s, m.cells[(s, info.name)])
            for s in names
            if m.cells[(s, info.name)].solved
        ]
        if runs:
            cpu, s, out = min(runs, key=lambda t: (t[0], t[1]))
            best[info.name] = (s, out)
            solved += 1
            total_time += cpu or 0.0
        else:
            best[info.name] = None
    return SotaResult(best=best, solved=solved, total_time=total_time)
