"""Command-line entry point.

Subcommands: features, bench, select-engines, train, cv, solve, report,
pca, gen, oracle.  File formats (performance CSV, features CSV, pool CSV,
engine registry, model files, manifest) are documented in docs/formats.md.
A config file may provide defaults for any flag (`--config`); explicit
flags win.  Heavy imports happen inside the handlers so the built-in
oracle subprocess starts fast.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

EXIT_ANSWER = 10
EXIT_INCONSISTENT = 20
EXIT_UNKNOWN = 0
EXIT_USAGE = 1
EXIT_FAILURE = 3

FACTS_SPECIALTY_MIN = 0.5  # facts / rules
CONSTRAINTS_SPECIALTY_MIN = 0.15  # constraints / rules


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    if value.lower() in ("true", "yes", "on"):
        return True
    if value.lower() in ("false", "no", "off"):
        return False
    return value


def _load_config(path: str) -> dict:
    from configparser import ConfigParser

    parser = ConfigParser()
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    out = {}
    for section in parser.sections():
        if section != "defaults":
            continue
        for key, value in parser[section].items():
            out[key.replace("-", "_")] = _coerce(value)
    return out


def _prune_cf(text: str):
    return None if text.lower() in ("none", "off") else float(text)


def _walk_parsers(parser):
    yield parser
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for child in dict.fromkeys(action.choices.values()):
                yield from _walk_parsers(child)


def build_parser() -> _Parser:
    p = _Parser(prog="measp", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="INI file with a [defaults] section")
    sub = p.add_subparsers(dest="command", required=True)

    def common_limits(sp):
        sp.add_argument("--cpu-limit", type=float, default=600.0, metavar="S")
        sp.add_argument(
            "--mem-limit", type=int, default=2 * 2**30, metavar="BYTES"
        )

    sp = sub.add_parser("features", help="extract feature CSV for a directory")
    sp.add_argument("--instances", required=True, metavar="DIR")
    sp.add_argument("--manifest", metavar="FILE")
    sp.add_argument("--out", required=True, metavar="CSV")
    sp.set_defaults(func=cmd_features)

    sp = sub.add_parser("bench", help="run the engine x instance grid")
    sp.add_argument("--engines", required=True, metavar="REGISTRY")
    sp.add_argument("--instances", required=True, metavar="DIR")
    sp.add_argument("--out", required=True, metavar="CSV")
    common_limits(sp)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--engine", action="append", default=[], metavar="NAME",
                    help="restrict to this engine (repeatable)")
    sp.add_argument("--check-oracle", action="store_true",
                    help="cross-check solved answers against the oracle")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("select-engines", help="build an engine pool from a matrix")
    sp.add_argument("--perf", required=True, metavar="CSV")
    sp.add_argument("--engines", metavar="REGISTRY",
                    help="optional registry supplying capability flags")
    sp.add_argument("--policy", choices=["uniqueness", "extended"],
                    default="uniqueness")
    sp.add_argument("--threshold", type=int, default=5)
    sp.add_argument("--distinguishability", type=int, default=1)
    sp.add_argument("--out", metavar="POOL_CSV")
    sp.set_defaults(func=cmd_select_engines)

    def train_like(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--features", required=True, metavar="CSV")
        sp.add_argument("--perf", required=True, metavar="CSV")
        sp.add_argument("--manifest", metavar="FILE")
        sp.add_argument("--pool", metavar="POOL_CSV",
                        help="restrict the matrix to these engines")
        sp.add_argument("--problems", metavar="FAM1,FAM2",
                        help="restrict to these instance families")
        sp.add_argument("--algorithm", choices=["nn", "tree", "mlr"], default="nn")
        sp.add_argument("--k", type=int, default=1)
        sp.add_argument("--min-leaf", type=int, default=2)
        sp.add_argument("--prune-cf", type=_prune_cf, default=0.25)
        sp.add_argument("--lam", type=float, default=1e-8)
        sp.add_argument("--epochs", type=int, default=500)
        sp.add_argument("--step", type=float, default=1.0)
        return sp

    sp = train_like("train", "train an engine-selection model")
    sp.add_argument("--out", required=True, metavar="MODEL")
    sp.set_defaults(func=cmd_train)

    sp = train_like("cv", "stratified repeated cross-validation")
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--repeats", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", metavar="REPORT_JSON")
    sp.set_defaults(func=cmd_cv)

    sp = sub.add_parser("solve", help="classify one instance and run that engine")
    sp.add_argument("instance", metavar="INSTANCE.gasp")
    sp.add_argument("--model", required=True, metavar="FILE")
    sp.add_argument("--engines", required=True, metavar="REGISTRY")
    sp.add_argument("--pool", metavar="POOL_CSV")
    sp.add_argument("--manifest", metavar="FILE")
    common_limits(sp)
    sp.add_argument("--fallback", action="store_true",
                    help="on engine error, try the remaining pool engines")
    sp.add_argument("--results-out", metavar="CSV",
                    help="append a solve-results row to this file")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("report", help="summary tables, cactus data, call counts")
    sp.add_argument("--perf", required=True, metavar="CSV")
    sp.add_argument("--pool", metavar="POOL_CSV")
    sp.add_argument("--solve-results", metavar="CSV")
    sp.add_argument("--out-dir", required=True, metavar="DIR")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("pca", help="2D projection of a features CSV")
    sp.add_argument("--features", required=True, metavar="CSV")
    sp.add_argument("--manifest", metavar="FILE")
    sp.add_argument("--out", required=True, metavar="CSV")
    sp.set_defaults(func=cmd_pca)

    sp = sub.add_parser("gen", help="synthetic instances and matrices")
    gen_sub = sp.add_subparsers(dest="gen_command", required=True)
    g = gen_sub.add_parser("instances", help="write a synthetic instance corpus")
    g.add_argument("--family", required=True,
                   choices=["random3", "pigeonhole", "facty", "constrainty"])
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, metavar="DIR")
    g.set_defaults(func=cmd_gen_instances)
    g = gen_sub.add_parser("matrix", help="write a synthetic performance CSV")
    g.add_argument("--shape", choices=["table2", "variants"], default="table2")
    g.add_argument("--out", required=True, metavar="CSV")
    g.set_defaults(func=cmd_gen_matrix)

    sp = sub.add_parser("oracle", help="built-in brute-force engine")
    sp.add_argument("instance", metavar="INSTANCE.gasp")
    sp.add_argument("--max-atoms", type=int, default=24)
    sp.add_argument("--specialty", choices=["facts", "constraints"],
                    help="refuse instances outside this speciality")
    sp.set_defaults(func=cmd_oracle)

    return p


# --- feature CSV helpers -------------------------------------------------------


def _manifest_from(args):
    from .features import default_manifest, load_manifest

    return load_manifest(args.manifest) if args.manifest else default_manifest()


def _write_features_csv(path, manifest, rows) -> None:
    from .runner import atomic_write_text

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("instance",) + manifest.names)
    for name, vector in rows:
        w.writerow([name] + [repr(v) for v in vector.values])
    atomic_write_text(path, buf.getvalue())


def read_features_csv(path, manifest) -> dict:
    from .features import FeatureVector

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != ("instance",) + manifest.names:
            raise ValueError(
                f"features CSV {path} does not match manifest {manifest.version!r}"
            )
        return {
            row[0]: FeatureVector(manifest.version, tuple(float(x) for x in row[1:]))
            for row in reader
            if row
        }


# --- handlers -------------------------------------------------------------------


def cmd_features(args) -> int:
    from .features import extract_features
    from .program import parse_ground_program
    from .runner import discover_instances

    manifest = _manifest_from(args)
    rows = []
    for name, path, _info in discover_instances(args.instances):
        with open(path, "r", encoding="utf-8") as fh:
            rows.append((name, extract_features(parse_ground_program(fh), manifest)))
    _write_features_csv(args.out, manifest, rows)
    print(f"wrote features for {len(rows)} instances to {args.out}")
    return 0


def cmd_bench(args) -> int:
    from .runner import BenchPlan, Limits, bench

    plan = BenchPlan(
        registry_path=args.engines,
        instances_dir=args.instances,
        out_csv=args.out,
        limits=Limits(args.cpu_limit, args.mem_limit),
        workers=args.workers,
        seed=args.seed,
        engines=tuple(args.engine),
        check_oracle=args.check_oracle,
    )
    matrix = bench(plan)
    solved = sum(matrix.solved_count(s) for s in matrix.solvers)
    print(
        f"bench: {len(matrix.solvers)} engines x {len(matrix.instances)} instances, "
        f"{solved} solved cells -> {args.out}"
    )
    return 0


def _load_pool(path):
    from .selection import read_pool_csv

    with open(path, "r", encoding="utf-8", newline="") as fh:
        return read_pool_csv(fh)


def cmd_select_engines(args) -> int:
    from .runner import atomic_write_text, load_registry
    from .selection import (
        PerformanceMatrix,
        greedy_pool,
        select_by_uniqueness,
        write_pool_csv,
    )

    with open(args.perf, "r", encoding="utf-8", newline="") as fh:
        matrix = PerformanceMatrix.read_csv(fh)
    capabilities = None
    if args.engines:
        registry = load_registry(args.engines)
        capabilities = {s.name: s.handles_disjunctive for s in registry.values()}
    if args.policy == "uniqueness":
        pool = select_by_uniqueness(matrix, args.threshold, capabilities)
    else:
        pool = greedy_pool(matrix, args.distinguishability, capabilities)
    for e in pool.engines:
        flag = " [disjunctive]" if e.handles_disjunctive else ""
        print(f"{e.name}{flag}")
    if args.out:
        buf = io.StringIO()
        write_pool_csv(pool, buf)
        atomic_write_text(args.out, buf.getvalue())
    return 0


def _training_inputs(args):
    from .selection import PerformanceMatrix

    manifest = _manifest_from(args)
    features = read_features_csv(args.features, manifest)
    with open(args.perf, "r", encoding="utf-8", newline="") as fh:
        matrix = PerformanceMatrix.read_csv(fh)
    if args.pool:
        matrix = matrix.restrict_solvers(_load_pool(args.pool).names)
    problems = args.problems.split(",") if args.problems else None
    return matrix, features, problems


def _algo_params(args) -> dict:
    if args.algorithm == "nn":
        return {"k": args.k}
    if args.algorithm == "tree":
        return {"min_leaf": args.min_leaf, "prune_cf": args.prune_cf}
    return {"lam": args.lam, "epochs": args.epochs, "step": args.step}


def cmd_train(args) -> int:
    from .learn import build_training_set, save_model, train
    from .runner import atomic_write_text

    matrix, features, problems = _training_inputs(args)
    dataset = build_training_set(matrix, features, problems)
    model = train(args.algorithm, dataset, **_algo_params(args))
    atomic_write_text(args.out, save_model(model).decode("utf-8"))
    print(
        f"trained {args.algorithm} on {len(dataset)} uniquely solved instances "
        f"({len(dataset.classes)} engines) -> {args.out}"
    )
    return 0


def cmd_cv(args) -> int:
    from .learn import build_training_set, cv_report_to_json, stratified_cv
    from .runner import atomic_write_text

    matrix, features, problems = _training_inputs(args)
    dataset = build_training_set(matrix, features, problems)
    report = stratified_cv(
        args.algorithm,
        dataset,
        folds=args.folds,
        repeats=args.repeats,
        seed=args.seed,
        **_algo_params(args),
    )
    print(
        f"cv {args.algorithm}: mean accuracy {report.mean_accuracy:.4f} "
        f"({report.repeats}x{report.folds_used} folds, seed {report.seed})"
    )
    if args.out:
        atomic_write_text(args.out, cv_report_to_json(report) + "\n")
    return 0


def cmd_solve(args) -> int:
    from .learn import load_model
    from .report import SOLVE_CSV_HEADER
    from .runner import Limits, load_registry, registry_pool, solve
    from .selection import ANSWER_FOUND, INCONSISTENT

    model = load_model(Path(args.model).read_bytes())
    registry = load_registry(args.engines)
    if args.pool:
        pool = _load_pool(args.pool)
    else:
        from .selection import EngineEntry, EnginePool

        entries = [
            EngineEntry(s.name, s.handles_disjunctive)
            for s in registry.values()
            if s.name in model.labels
        ]
        if not entries:
            print("solve: no registry engine matches the model labels", file=sys.stderr)
            return EXIT_USAGE
        pool = EnginePool(tuple(entries))
    manifest = _manifest_from(args) if args.manifest else None
    result = solve(
        args.instance,
        model,
        pool,
        registry,
        Limits(args.cpu_limit, args.mem_limit),
        fallback=args.fallback,
        manifest=manifest,
    )
    out = result.outcome
    print(
        f"{args.instance}: engine={result.chosen or '(none)'} status={out.status} "
        f"answer={out.answer or '-'} cpu={out.cpu_seconds or 0.0:.3f}s "
        f"feature={result.feature_seconds:.3f}s classify={result.classify_seconds:.3f}s"
    )
    if args.results_out:
        new = not Path(args.results_out).exists()
        with open(args.results_out, "a", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if new:
                w.writerow(SOLVE_CSV_HEADER)
            w.writerow(
                [
                    args.instance,
                    result.chosen or "",
                    out.status,
                    out.answer or "",
                    repr(out.cpu_seconds or 0.0),
                    repr(result.feature_seconds),
                    repr(result.classify_seconds),
                ]
            )
    if out.solved and out.answer == ANSWER_FOUND:
        return EXIT_ANSWER
    if out.solved and out.answer == INCONSISTENT:
        return EXIT_INCONSISTENT
    return EXIT_UNKNOWN


def cmd_report(args) -> int:
    from .report import (
        cactus_series,
        call_counts,
        format_summary_table,
        read_solve_results,
        summary_rows,
        write_cactus_csv,
        write_call_counts,
        write_summary_csv,
    )
    from .runner import atomic_write_text
    from .selection import PerformanceMatrix

    with open(args.perf, "r", encoding="utf-8", newline="") as fh:
        matrix = PerformanceMatrix.read_csv(fh)
    pool = _load_pool(args.pool) if args.pool else None
    rows = summary_rows(matrix, pool)
    series = cactus_series(matrix, pool)
    out_dir = Path(args.out_dir)

    buf = io.StringIO()
    write_summary_csv(rows, buf)
    atomic_write_text(out_dir / "summary.csv", buf.getvalue())
    buf = io.StringIO()
    write_cactus_csv(series, buf)
    atomic_write_text(out_dir / "cactus.csv", buf.getvalue())
    if args.solve_results:
        with open(args.solve_results, "r", encoding="utf-8", newline="") as fh:
            results = read_solve_results(fh)
        buf = io.StringIO()
        write_call_counts(call_counts(results), buf)
        atomic_write_text(out_dir / "calls.csv", buf.getvalue())
    print(format_summary_table(rows))
    print(f"report files in {out_dir}")
    return 0


def cmd_pca(args) -> int:
    from .pca import pca_project
    from .runner import atomic_write_text

    manifest = _manifest_from(args)
    features = read_features_csv(args.features, manifest)
    names = list(features)
    coords, (lam1, lam2) = pca_project([features[n] for n in names])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("instance", "pc1", "pc2"))
    for name, (a, b) in zip(names, coords):
        w.writerow([name, repr(float(a)), repr(float(b))])
    atomic_write_text(args.out, buf.getvalue())
    print(f"explained variance: {lam1!r} {lam2!r}")
    return 0


def cmd_gen_instances(args) -> int:
    from .gen import write_instances

    paths = write_instances(args.out, args.family, args.count, args.seed)
    print(f"wrote {len(paths)} {args.family} instances to {args.out}")
    return 0


def cmd_gen_matrix(args) -> int:
    from .gen import overlapping_variants_matrix, table2_matrix
    from .runner import atomic_write_text

    matrix = table2_matrix() if args.shape == "table2" else overlapping_variants_matrix()
    buf = io.StringIO()
    matrix.write_csv(buf)
    atomic_write_text(args.out, buf.getvalue())
    print(f"wrote {args.shape} matrix to {args.out}")
    return 0


def cmd_oracle(args) -> int:
    from .features import extract_base_quantities
    from .program import ParseError, parse_ground_program
    from .semantics import OracleScaleError, enumerate_answer_sets

    try:
        with open(args.instance, "r", encoding="utf-8") as fh:
            program = parse_ground_program(fh)
    except (OSError, ParseError) as e:
        print(f"oracle: {e}", file=sys.stderr)
        return EXIT_FAILURE
    if args.specialty:
        q = extract_base_quantities(program)
        share = (q.facts if args.specialty == "facts" else q.constraints) / max(q.rules, 1)
        minimum = (
            FACTS_SPECIALTY_MIN if args.specialty == "facts" else CONSTRAINTS_SPECIALTY_MIN
        )
        if share < minimum:
            print(
                f"oracle: refused off-speciality instance "
                f"({args.specialty} share {share:.2f} < {minimum})",
                file=sys.stderr,
            )
            return EXIT_FAILURE
    try:
        found = enumerate_answer_sets(program, max_atoms=args.max_atoms, limit=1)
    except OracleScaleError as e:
        print(f"oracle: {e}", file=sys.stderr)
        return EXIT_FAILURE
    if found:
        atoms = sorted(str(a) for a in found[0].atoms())
        print("ANSWER")
        print("{" + ", ".join(atoms) + "}")
        return EXIT_ANSWER
    print("INCONSISTENT")
    return EXIT_INCONSISTENT


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # apply config defaults before the real parse; flags still override
    config_path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
        elif token.startswith("--config="):
            config_path = token.split("=", 1)[1]
    if config_path:
        defaults = _load_config(config_path)
        for sub in _walk_parsers(parser):  # subparsers use fresh namespaces
            sub.set_defaults(**defaults)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return EXIT_FAILURE
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
