"""Cheap syntactic features of ground programs.

Extraction is manifest driven: a FeatureManifest names 52 features and
gives each one a small formula over base quantities counted in a single
pass over the rules.  The canonical manifest ships as a versioned data
file (data/cheap52-v1.manifest); models embed the manifest version so a
trained model can never silently consume vectors from a different
feature definition.

Degenerate ratios follow one convention throughout: x/0 is 0, so the empty
program maps to the all-zero vector and every value stays finite.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping, Sequence

from .program import GroundProgram, Rule

FEATURE_COUNT = 52
GUARD_EPSILON = 1e-9

BASE_QUANTITY_NAMES = (
    "rules",
    "atoms",
    "unary_rules",
    "binary_rules",
    "ternary_rules",
    "horn_rules",
    "facts",
    "disj_facts",
    "normal_rules",
    "constraints",
)


class ManifestError(ValueError):
    """Malformed manifest text or formula."""


@dataclass(frozen=True)
class BaseQuantities:
    """Counts produced by one pass over a program's rules.

    Rule arity (unary/binary/ternary) is the number of body literals, so
    facts are none of the three; horn means at most one head atom and no
    default negation in the body.
    """

    rules: int = 0
    atoms: int = 0
    unary_rules: int = 0
    binary_rules: int = 0
    ternary_rules: int = 0
    horn_rules: int = 0
    facts: int = 0
    disj_facts: int = 0
    normal_rules: int = 0
    constraints: int = 0

    def as_dict(self) -> dict[str, int]:
        return {name: getattr(self, name) for name in BASE_QUANTITY_NAMES}


def extract_base_quantities(source: GroundProgram | Iterable[Rule]) -> BaseQuantities:
    """Count base quantities in a single pass over the rule sequence."""
    rules = source.rules if isinstance(source, GroundProgram) else source
    n = unary = binary = ternary = horn = facts = disj = normal = constraints = 0
    seen_atoms: set = set()
    for r in rules:
        n += 1
        arity = len(r.body)
        if arity == 1:
            unary += 1
        elif arity == 2:
            binary += 1
        elif arity == 3:
            ternary += 1
        if r.is_horn:
            horn += 1
        if r.is_fact:
            facts += 1
        elif r.is_disjunctive_fact:
            disj += 1
        if r.is_normal:
            normal += 1
        elif r.is_constraint:
            constraints += 1
        seen_atoms.update(r.atoms())
    return BaseQuantities(
        rules=n,
        atoms=len(seen_atoms),
        unary_rules=unary,
        binary_rules=binary,
        ternary_rules=ternary,
        horn_rules=horn,
        facts=facts,
        disj_facts=disj,
        normal_rules=normal,
        constraints=constraints,
    )


# --- formula mini-language ---------------------------------------------------

_FORMULA_TOKEN_RE = re.compile(r"\s*([a-z_][a-z0-9_]*|[0-9]+(?:\.[0-9]+)?|[(),])")

_ARITY = {"div0": 2, "guard": 2, "mul": 2, "pow": 2, "log1p": 1}


def _tokenize_formula(text: str) -> list[str]:
    tokens, pos = [], 0
    while pos < len(text):
        m = _FORMULA_TOKEN_RE.match(text, pos)
        if m is None:
            raise ManifestError(f"bad formula near {text[pos:]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


def _parse_formula(tokens: list[str], pos: int = 0):
    if pos >= len(tokens):
        raise ManifestError("unexpected end of formula")
    tok = tokens[pos]
    if tok in _ARITY:
        if pos + 1 >= len(tokens) or tokens[pos + 1] != "(":
            raise ManifestError(f"{tok} needs parenthesised arguments")
        args, pos = [], pos + 2
        while True:
            node, pos = _parse_formula(tokens, pos)
            args.append(node)
            if pos >= len(tokens):
                raise ManifestError("unterminated argument list")
            if tokens[pos] == ")":
                pos += 1
                break
            if tokens[pos] != ",":
                raise ManifestError(f"expected ',' or ')', found {tokens[pos]!r}")
            pos += 1
        if len(args) != _ARITY[tok]:
            raise ManifestError(f"{tok} takes {_ARITY[tok]} arguments, got {len(args)}")
        return ("call", tok, tuple(args)), pos
    if re.fullmatch(r"[0-9]+(?:\.[0-9]+)?", tok):
        return ("num", float(tok)), pos + 1
    if tok in BASE_QUANTITY_NAMES:
        return ("base", tok), pos + 1
    raise ManifestError(f"unknown name in formula: {tok!r}")


@lru_cache(maxsize=512)
def _compile_formula(text: str):
    tokens = _tokenize_formula(text)
    node, pos = _parse_formula(tokens)
    if pos != len(tokens):
        raise ManifestError(f"trailing tokens in formula: {tokens[pos:]!r}")
    return node


def _eval_formula(node, env: Mapping[str, float]) -> float:
    kind = node[0]
    if kind == "base":
        return float(env[node[1]])
    if kind == "num":
        return node[1]
    _, fn, args = node
    vals = [_eval_formula(a, env) for a in args]
    if fn == "div0":
        return vals[0] / vals[1] if vals[1] != 0 else 0.0
    if fn == "guard":
        return vals[0] / (vals[1] + GUARD_EPSILON)
    if fn == "mul":
        return vals[0] * vals[1]
    if fn == "pow":
        return vals[0] ** vals[1]
    return math.log1p(vals[0])  # log1p


# --- manifest ----------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    formula: str


@dataclass(frozen=True)
class FeatureManifest:
    """Ordered, versioned definition of the 52 extracted features."""

    version: str
    entries: tuple[ManifestEntry, ...]

    def __post_init__(self):
        if not self.version:
            raise ManifestError("manifest needs a version id")
        if len(self.entries) != FEATURE_COUNT:
            raise ManifestError(
                f"manifest must define exactly {FEATURE_COUNT} features, "
                f"got {len(self.entries)}"
            )
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ManifestError("duplicate feature names in manifest")
        for e in self.entries:
            _compile_formula(e.formula)  # validate eagerly

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)


def parse_manifest(text: str) -> FeatureManifest:
    version = None
    entries: list[ManifestEntry] = []
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not value:
            raise ManifestError(f"line {line_no}: expected `key = value`")
        if key == "version":
            if version is not None:
                raise ManifestError(f"line {line_no}: duplicate version")
            version = value
        elif key.startswith("feature "):
            entries.append(ManifestEntry(key[len("feature "):].strip(), value))
        else:
            raise ManifestError(f"line {line_no}: unknown key {key!r}")
    if version is None:
        raise ManifestError("manifest has no version line")
    return FeatureManifest(version=version, entries=tuple(entries))


def format_manifest(m: FeatureManifest) -> str:
    lines = [f"version = {m.version}"]
    lines += [f"feature {e.name} = {e.formula}" for e in m.entries]
    return "\n".join(lines) + "\n"


def load_manifest(path) -> FeatureManifest:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_manifest(fh.read())


@lru_cache(maxsize=1)
def default_manifest() -> FeatureManifest:
    text = resources.files("measp").joinpath("data/cheap52-v1.manifest").read_text("utf-8")
    return parse_manifest(text)


# --- vectors -----------------------------------------------------------------


@dataclass(frozen=True)
class FeatureVector:
    manifest_version: str
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != FEATURE_COUNT:
            raise ValueError(f"expected {FEATURE_COUNT} values, got {len(self.values)}")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("feature values must be finite")


def extract_features(
    p: GroundProgram | Iterable[Rule], manifest: FeatureManifest | None = None
) -> FeatureVector:
    """One pass over the rules plus O(52) arithmetic."""
    manifest = manifest or default_manifest()
    env = extract_base_quantities(p).as_dict()
    values = tuple(
        float(_eval_formula(_compile_formula(e.formula), env)) for e in manifest.entries
    )
    return FeatureVector(manifest_version=manifest.version, values=values)


# --- five-number summaries ---------------------------------------------------


@dataclass(frozen=True)
class FiveNumberSummary:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.minimum, self.q1, self.median, self.q3, self.maximum)


def _quantile(sorted_xs: Sequence[float], p: float) -> float:
    # linear interpolation at index h = (n - 1) * p
    h = (len(sorted_xs) - 1) * p
    lo = math.floor(h)
    hi = min(lo + 1, len(sorted_xs) - 1)
    return sorted_xs[lo] + (h - lo) * (sorted_xs[hi] - sorted_xs[lo])


def five_number_summary(xs: Sequence[float]) -> FiveNumberSummary:
    if len(xs) == 0:
        raise ValueError("five_number_summary needs a non-empty sample")
    s = sorted(float(x) for x in xs)
    return FiveNumberSummary(
        minimum=s[0],
        q1=_quantile(s, 0.25),
        median=_quantile(s, 0.5),
        q3=_quantile(s, 0.75),
        maximum=s[-1],
    )


# --- dataset normalization ---------------------------------------------------


@dataclass(frozen=True)
class Scaler:
    """Per-feature z-score parameters (population standard deviation).

    Zero-variance features are flagged constant, store stddev 1, and are
    mapped to 0 on application so they cannot perturb distances.
    """

    manifest_version: str
    means: tuple[float, ...]
    stds: tuple[float, ...]
    constant: tuple[bool, ...]

    def __post_init__(self):
        if not all(s > 0 for s in self.stds):
            raise ValueError("stored stddev values must be positive")


def fit_scaler(dataset: Sequence[FeatureVector]) -> Scaler:
    if not dataset:
        raise ValueError("cannot fit a scaler on an empty dataset")
    versions = {v.manifest_version for v in dataset}
    if len(versions) != 1:
        raise ValueError(f"mixed manifest versions in dataset: {sorted(versions)}")
    import numpy as np

    x = np.asarray([v.values for v in dataset], dtype=float)
    means = x.mean(axis=0)
    stds = x.std(axis=0)  # population convention
    constant = stds == 0.0
    stds = np.where(constant, 1.0, stds)
    return Scaler(
        manifest_version=dataset[0].manifest_version,
        means=tuple(float(m) for m in means),
        stds=tuple(float(s) for s in stds),
        constant=tuple(bool(c) for c in constant),
    )


def apply_scaler(s: Scaler, v: FeatureVector) -> FeatureVector:
    if v.manifest_version != s.manifest_version:
        raise ValueError(
            f"manifest mismatch: scaler {s.manifest_version!r} vs vector "
            f"{v.manifest_version!r}"
        )
    scaled = tuple(
        0.0 if c else (x - m) / sd
        for x, m, sd, c in zip(v.values, s.means, s.stds, s.constant)
    )
    return FeatureVector(manifest_version=v.manifest_version, values=scaled)
