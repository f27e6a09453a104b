"""Training-set construction, model training, stratified cross-validation,
and model persistence.

The training set follows the uniquely-solved construction: one labelled
pattern per instance solved by exactly one pool engine, labelled with that
engine.  Models embed their scaler and the feature-manifest version, and
serialise to versioned JSON so a trained model round-trips exactly.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

from .classifiers import ALGORITHMS
from .features import FeatureVector, Scaler, apply_scaler, fit_scaler
from .selection import PerformanceMatrix

MODEL_FORMAT = "measp.model/1"


class DatasetError(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    """Feature vectors paired with engine labels, one manifest version."""

    patterns: tuple[FeatureVector, ...]
    labels: tuple[str, ...]
    manifest_version: str

    def __post_init__(self):
        if len(self.patterns) != len(self.labels):
            raise DatasetError("patterns and labels must have the same length")
        bad = {v.manifest_version for v in self.patterns} - {self.manifest_version}
        if bad:
            raise DatasetError(f"mixed manifest versions: {sorted(bad)}")

    def __len__(self) -> int:
        return len(self.patterns)

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.labels)))

    def subset(self, indices: Iterable[int]) -> "LabeledDataset":
        idx = list(indices)
        return LabeledDataset(
            tuple(self.patterns[i] for i in idx),
            tuple(self.labels[i] for i in idx),
            self.manifest_version,
        )


def build_training_set(
    matrix: PerformanceMatrix,
    features: Mapping[str, FeatureVector],
    problems: Iterable[str] | None = None,
) -> LabeledDataset:
    """Label every instance solved by exactly one matrix solver.

    `problems`, when given, first restricts the matrix to those instance
    families.  The matrix should already be restricted to the engine pool
    of interest.  Instances without a feature vector are skipped.
    """
    if problems is not None:
        wanted = set(problems)
        matrix = matrix.restrict_instances(lambda i: i.family in wanted)
    patterns: list[FeatureVector] = []
    labels: list[str] = []
    for info in matrix.instances:
        winners = [s for s in matrix.solvers if matrix.outcome(s, info.name).solved]
        if len(winners) == 1 and info.name in features:
            patterns.append(features[info.name])
            labels.append(winners[0])
    if not patterns:
        raise DatasetError("no uniquely solved instances")
    return LabeledDataset(
        tuple(patterns), tuple(labels), patterns[0].manifest_version
    )


@dataclass
class InductiveModel:
    """A trained classifier plus everything needed to apply it elsewhere."""

    algorithm: str
    params: dict[str, Any]
    labels: tuple[str, ...]
    scaler: Scaler
    manifest_version: str
    impl: Any = field(repr=False)


def train(algorithm: str, dataset: LabeledDataset, **params) -> InductiveModel:
    """Fit `algorithm` (nn, tree, or mlr) on the dataset.

    Features are z-scored with a scaler fitted here and embedded in the
    model.  Datasets with a single class are rejected except for nn, whose
    constant prediction is still well defined.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; known: {sorted(ALGORITHMS)}")
    if len(dataset) == 0:
        raise DatasetError("empty dataset")
    if len(dataset.classes) < 2 and algorithm != "nn":
        raise DatasetError("degenerate dataset: a single class label")
    scaler = fit_scaler(dataset.patterns)
    x = np.asarray([apply_scaler(scaler, v).values for v in dataset.patterns])
    impl = ALGORITHMS[algorithm](**params)
    impl.fit(x, list(dataset.labels))
    return InductiveModel(
        algorithm=algorithm,
        params=impl.params(),
        labels=dataset.classes,
        scaler=scaler,
        manifest_version=dataset.manifest_version,
        impl=impl,
    )


def predict_scores(model: InductiveModel, v: FeatureVector) -> dict[str, float]:
    if v.manifest_version != model.manifest_version:
        raise ValueError(
            f"manifest mismatch: model {model.manifest_version!r} vs vector "
            f"{v.manifest_version!r}"
        )
    scaled = np.asarray(apply_scaler(model.scaler, v).values)
    return model.impl.predict_scores(scaled)


def best_label(scores: Mapping[str, float]) -> str:
    """Highest score wins; exact ties go to the alphabetically first label."""
    return min(scores.items(), key=lambda kv: (-kv[1], kv[0]))[0]


def predict(model: InductiveModel, v: FeatureVector) -> str:
    return best_label(predict_scores(model, v))


# --- stratified repeated cross-validation ------------------------------------


@dataclass(frozen=True)
class CvReport:
    algorithm: str
    params: tuple[tuple[str, Any], ...]
    folds: int
    folds_used: int
    repeats: int
    seed: int
    accuracies: tuple[tuple[float, ...], ...]  # [repeat][fold]

    @property
    def mean_accuracy(self) -> float:
        flat = [a for rep in self.accuracies for a in rep]
        return sum(flat) / len(flat)


def _stratified_folds(
    labels: tuple[str, ...], folds: int, rng: random.Random
) -> list[list[int]]:
    by_class: dict[str, list[int]] = {}
    for i, label in enumerate(labels):
        by_class.setdefault(label, []).append(i)
    assignment: list[list[int]] = [[] for _ in range(folds)]
    for offset, label in enumerate(sorted(by_class)):
        idx = by_class[label]
        rng.shuffle(idx)
        for j, i in enumerate(idx):
            assignment[(j + offset) % folds].append(i)
    return assignment


def stratified_cv(
    algorithm: str,
    dataset: LabeledDataset,
    folds: int = 10,
    repeats: int = 10,
    seed: int = 0,
    **params,
) -> CvReport:
    """Stratified `repeats` x `folds` cross-validated 0/1 accuracy.

    Folds partition the patterns while preserving class proportions (per
    class, fold counts differ by at most one).  If the smallest class has
    fewer members than `folds`, the fold count is reduced to that size and
    recorded in the report.  The same seed always produces the same report.
    """
    if folds < 2 or repeats < 1:
        raise ValueError("need folds >= 2 and repeats >= 1")
    if len(dataset) < folds:
        raise DatasetError(f"dataset of {len(dataset)} patterns is smaller than {folds} folds")
    min_class = min(dataset.labels.count(c) for c in dataset.classes)
    folds_used = min(folds, min_class)
    if folds_used < 2:
        raise DatasetError("smallest class has fewer than 2 members; cannot stratify")
    accuracies: list[tuple[float, ...]] = []
    for rep in range(repeats):
        rng = random.Random(f"{seed}:{rep}")
        fold_sets = _stratified_folds(dataset.labels, folds_used, rng)
        rep_acc = []
        for fold in fold_sets:
            test = sorted(fold)
            train_idx = [i for i in range(len(dataset)) if i not in set(test)]
            model = train(algorithm, dataset.subset(train_idx), **params)
            correct = sum(
                1
                for i in test
                if predict(model, dataset.patterns[i]) == dataset.labels[i]
            )
            rep_acc.append(correct / len(test))
        accuracies.append(tuple(rep_acc))
    impl = ALGORITHMS[algorithm](**params)
    return CvReport(
        algorithm=algorithm,
        params=tuple(sorted(impl.params().items())),
        folds=folds,
        folds_used=folds_used,
        repeats=repeats,
        seed=seed,
        accuracies=tuple(accuracies),
    )


def cv_report_to_json(report: CvReport) -> str:
    payload = {
        "algorithm": report.algorithm,
        "params": dict(report.params),
        "folds": report.folds,
        "folds_used": report.folds_used,
        "repeats": report.repeats,
        "seed": report.seed,
        "accuracies": [list(rep) for rep in report.accuracies],
        "mean_accuracy": report.mean_accuracy,
    }
    return json.dumps(payload, indent=1, sort_keys=True)


# --- persistence --------------------------------------------------------------


def save_model(model: InductiveModel) -> bytes:
    payload = {
        "format": MODEL_FORMAT,
        "algorithm": model.algorithm,
        "params": model.params,
        "labels": list(model.labels),
        "manifest_version": model.manifest_version,
        "scaler": {
            "means": list(model.scaler.means),
            "stds": list(model.scaler.stds),
            "constant": list(model.scaler.constant),
        },
        "state": model.impl.to_state(),
    }
    return (json.dumps(payload, indent=1, sort_keys=True) + "\n").encode("utf-8")


def load_model(data: bytes | str) -> InductiveModel:
    try:
        payload = json.loads(data)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"not a model file: {e}") from None
    if not isinstance(payload, dict) or payload.get("format") != MODEL_FORMAT:
        raise ModelFormatError(
            f"unsupported model format {payload.get('format')!r}; expected {MODEL_FORMAT!r}"
        )
    algorithm = payload["algorithm"]
    if algorithm not in ALGORITHMS:
        raise ModelFormatError(f"unknown algorithm {algorithm!r} in model file")
    scaler = Scaler(
        manifest_version=payload["manifest_version"],
        means=tuple(payload["scaler"]["means"]),
        stds=tuple(payload["scaler"]["stds"]),
        constant=tuple(bool(c) for c in payload["scaler"]["constant"]),
    )
    impl = ALGORITHMS[algorithm].from_state(payload["params"], payload["state"])
    return InductiveModel(
        algorithm=algorithm,
        params=payload["params"],
        labels=tuple(payload["labels"]),
        scaler=scaler,
        manifest_version=payload["manifest_version"],
        impl=impl,
    )
