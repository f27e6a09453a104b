"""measp: pick the right answer-set engine per instance.

The package parses ground disjunctive logic programs, extracts cheap
syntactic features, learns per-instance engine-selection models, and runs
engines (external solvers or the built-in enumeration oracle) under CPU and
memory limits.  Heavy submodules are imported lazily; importing `measp`
itself stays cheap so the built-in oracle subprocess starts fast.
"""

__version__ = "0.1.0"

__all__ = [
    "program",
    "semantics",
    "features",
    "classifiers",
    "learn",
    "selection",
    "runner",
    "pca",
    "report",
    "gen",
]
