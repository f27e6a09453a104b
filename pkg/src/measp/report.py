"""Result summaries: solved/time tables, cactus series, engine call counts.

All outputs are plain CSV data files meant for any plotting tool; nothing
is rendered in-process.  The summary table reproduces the aggregates of
whatever performance CSV it is fed, per solver and per complexity class,
with a `sota` row for the per-instance best performer over the pool.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, TextIO

from .selection import (
    BEYOND_NP,
    NP,
    EnginePool,
    PerformanceMatrix,
    RunOutcome,
    SotaResult,
    sota,
)

SUMMARY_CSV_HEADER = ("solver", "class", "solved", "time")
CACTUS_CSV_HEADER = ("solver", "cpu_seconds", "solved")
CALLS_CSV_HEADER = ("engine", "calls")
SOLVE_CSV_HEADER = (
    "instance",
    "engine",
    "status",
    "answer",
    "cpu_seconds",
    "feature_seconds",
    "classify_seconds",
)
NO_ENGINE = "(none)"
SOTA = "sota"


def _classes(m: PerformanceMatrix) -> list[str]:
    present = {i.complexity for i in m.instances}
    return [c for c in (NP, BEYOND_NP) if c in present]


def summary_rows(
    m: PerformanceMatrix, pool: EnginePool | Sequence[str] | None = None
) -> list[dict]:
    """Per-solver and per-class solved counts and summed times, plus sota.

    Times sum the cpu_seconds of solved runs only, matching the solved
    column's population.
    """
    pool_names = (
        pool.names if isinstance(pool, EnginePool) else tuple(pool or m.solvers)
    )
    classes = _classes(m)
    rows: list[dict] = []

    def add_rows(solver: str, per_instance: Mapping[str, RunOutcome | None]):
        for cls in classes + ["all"]:
            solved = 0
            time = 0.0
            for info in m.instances:
                if cls != "all" and info.complexity != cls:
                    continue
                out = per_instance.get(info.name)
                if out is not None and out.solved:
                    solved += 1
                    time += out.cpu_seconds or 0.0
            rows.append({"solver": solver, "class": cls, "solved": solved, "time": time})

    for solver in m.solvers:
        add_rows(solver, {i.name: m.outcome(solver, i.name) for i in m.instances})
    best = sota(m, pool_names)
    add_rows(SOTA, {k: (v[1] if v else None) for k, v in best.best.items()})
    return rows


def write_summary_csv(rows: Iterable[Mapping], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SUMMARY_CSV_HEADER)
    for r in rows:
        w.writerow([r["solver"], r["class"], r["solved"], repr(float(r["time"]))])


def format_summary_table(rows: Sequence[Mapping]) -> str:
    lines = [f"{'solver':<20} {'class':<9} {'solved':>7} {'time':>12}"]
    for r in rows:
        lines.append(
            f"{r['solver']:<20} {r['class']:<9} {r['solved']:>7} {r['time']:>12.2f}"
        )
    return "\n".join(lines)


# --- cactus data ---------------------------------------------------------------


@dataclass(frozen=True)
class CactusSeries:
    """Cumulative (cpu time, instances solved within it) pairs, sorted."""

    solver: str
    points: tuple[tuple[float, int], ...]

    def __post_init__(self):
        times = [t for t, _ in self.points]
        counts = [c for _, c in self.points]
        if times != sorted(times) or counts != sorted(counts):
            raise ValueError("cactus series must be nondecreasing")

    def solved_within(self, budget: float) -> int:
        best = 0
        for t, c in self.points:
            if t <= budget:
                best = c
            else:
                break
        return best


def _series_from_times(solver: str, times: list[float]) -> CactusSeries:
    pts = [(t, i + 1) for i, t in enumerate(sorted(times))]
    return CactusSeries(solver, tuple(pts))


def cactus_series(
    m: PerformanceMatrix,
    pool: EnginePool | Sequence[str] | None = None,
    include_sota: bool = True,
) -> list[CactusSeries]:
    pool_names = (
        pool.names if isinstance(pool, EnginePool) else tuple(pool or m.solvers)
    )
    series = []
    for solver in m.solvers:
        times = [
            m.outcome(solver, i.name).cpu_seconds or 0.0
            for i in m.instances
            if m.outcome(solver, i.name).solved
        ]
        series.append(_series_from_times(solver, times))
    if include_sota:
        best: SotaResult = sota(m, pool_names)
        times = [v[1].cpu_seconds or 0.0 for v in best.best.values() if v is not None]
        series.append(_series_from_times(SOTA, times))
    return series


def write_cactus_csv(series: Iterable[CactusSeries], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CACTUS_CSV_HEADER)
    for s in series:
        for t, c in s.points:
            w.writerow([s.solver, repr(float(t)), c])


# --- multi-engine solve results ---------------------------------------------------


def write_solve_results(rows: Iterable[Mapping], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SOLVE_CSV_HEADER)
    for r in rows:
        w.writerow([r.get(k, "") for k in SOLVE_CSV_HEADER])


def read_solve_results(fh: TextIO) -> list[dict]:
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != SOLVE_CSV_HEADER:
        raise ValueError(
            f"bad solve-results header {reader.fieldnames!r}, expected {SOLVE_CSV_HEADER!r}"
        )
    return [dict(row) for row in reader]


def call_counts(results: Iterable[Mapping]) -> dict[str, int]:
    """Engine invocation histogram; unassigned runs count under (none)."""
    counts: Counter[str] = Counter()
    for r in results:
        counts[r.get("engine") or NO_ENGINE] += 1
    return dict(counts)


def write_call_counts(counts: Mapping[str, int], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CALLS_CSV_HEADER)
    for engine in sorted(counts):
        w.writerow([engine, counts[engine]])
