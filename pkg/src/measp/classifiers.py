"""Multinomial classifiers mapping feature vectors to engine labels.

Three built-in methods with deliberately different inductive biases:
nearest neighbour (`nn`), a C4.5-style decision tree with gain-ratio
splits and pessimistic error pruning (`tree`), and one-vs-rest
ridge-regularised logistic regression fitted by gradient descent with
backtracking line search (`mlr`).

All methods implement the same small interface -- fit(X, labels),
predict_scores(x), to_state()/from_state() -- and are looked up through
ALGORITHMS, so further methods can be plugged in without touching the
training or cross-validation code.  Everything is deterministic: scores
never depend on sample order, and label ties are broken alphabetically
by the caller.
"""

from __future__ import annotations

import math
from collections import Counter
from statistics import NormalDist

import numpy as np


class NearestNeighbor:
    """k-nearest neighbour by Euclidean distance on (pre-scaled) features."""

    tag = "nn"

    def __init__(self, k: int = 1):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.patterns: np.ndarray | None = None
        self.labels: list[str] = []
        self.classes: list[str] = []

    def params(self) -> dict:
        return {"k": self.k}

    def fit(self, x: np.ndarray, labels: list[str]) -> None:
        self.patterns = np.asarray(x, dtype=float)
        self.labels = list(labels)
        self.classes = sorted(set(labels))

    def predict_scores(self, x: np.ndarray) -> dict[str, float]:
        assert self.patterns is not None, "fit first"
        d = np.sqrt(((self.patterns - x) ** 2).sum(axis=1))
        # distance ties: label order, then pattern index, so sample order
        # never changes the vote
        order = sorted(range(len(d)), key=lambda i: (d[i], self.labels[i], i))
        k = min(self.k, len(order))
        votes = Counter(self.labels[i] for i in order[:k])
        return {c: votes.get(c, 0) / k for c in self.classes}

    def to_state(self) -> dict:
        assert self.patterns is not None
        return {"patterns": self.patterns.tolist(), "labels": self.labels}

    @classmethod
    def from_state(cls, params: dict, state: dict) -> "NearestNeighbor":
        clf = cls(**params)
        clf.fit(np.asarray(state["patterns"], dtype=float), list(state["labels"]))
        return clf


# --- decision tree ------------------------------------------------------------

_GAIN_EPS = 1e-12


def _entropy(counts: np.ndarray, total: float) -> float:
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def _wilson_upper(f: float, n: float, z: float) -> float:
    # upper confidence limit of a binomial error rate, as used by
    # pessimistic error pruning
    z2 = z * z
    centre = f + z2 / (2 * n)
    spread = z * math.sqrt(f * (1 - f) / n + z2 / (4 * n * n))
    return (centre + spread) / (1 + z2 / n)


class _Node:
    __slots__ = ("counts", "feature", "threshold", "left", "right")

    def __init__(self, counts: dict[str, int]):
        self.counts = counts
        self.feature: int | None = None
        self.threshold: float | None = None
        self.left: "_Node" | None = None
        self.right: "_Node" | None = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    @property
    def size(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> dict:
        d = {"counts": self.counts}
        if not self.is_leaf:
            d.update(
                feature=self.feature,
                threshold=self.threshold,
                left=self.left.to_dict(),
                right=self.right.to_dict(),
            )
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "_Node":
        node = cls({str(k): int(v) for k, v in d["counts"].items()})
        if "feature" in d:
            node.feature = int(d["feature"])
            node.threshold = float(d["threshold"])
            node.left = cls.from_dict(d["left"])
            node.right = cls.from_dict(d["right"])
        return node


class DecisionTree:
    """Binary-threshold tree grown by maximum information gain ratio.

    A split must leave at least `min_leaf` samples on each side; pruning
    (when `prune_cf` is not None) replaces a subtree by a leaf whenever
    the leaf's pessimistic error estimate does not exceed the subtree's.
    Candidate thresholds are midpoints between consecutive distinct
    feature values; ties on gain ratio keep the lowest feature index and
    threshold, so training is order independent.
    """

    tag = "tree"

    def __init__(self, min_leaf: int = 2, prune_cf: float | None = 0.25):
        if min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if prune_cf is not None and not 0 < prune_cf < 1:
            raise ValueError("prune_cf must lie in (0, 1) or be None")
        self.min_leaf = min_leaf
        self.prune_cf = prune_cf
        self.root: _Node | None = None
        self.classes: list[str] = []

    def params(self) -> dict:
        return {"min_leaf": self.min_leaf, "prune_cf": self.prune_cf}

    def fit(self, x: np.ndarray, labels: list[str]) -> None:
        x = np.asarray(x, dtype=float)
        self.classes = sorted(set(labels))
        codes = np.array([self.classes.index(l) for l in labels])
        onehot = np.eye(len(self.classes))[codes]
        self.root = self._grow(x, codes, onehot, np.arange(len(labels)))
        if self.prune_cf is not None:
            z = NormalDist().inv_cdf(1 - self.prune_cf)
            self._prune(self.root, z)

    def _counts_dict(self, codes: np.ndarray) -> dict[str, int]:
        c = Counter(codes.tolist())
        return {self.classes[k]: int(v) for k, v in sorted(c.items())}

    def _grow(self, x, codes, onehot, idx) -> _Node:
        node = _Node(self._counts_dict(codes[idx]))
        n = len(idx)
        if n < 2 * self.min_leaf or len(set(codes[idx].tolist())) == 1:
            return node
        best = None  # (ratio, feature, threshold)
        total_counts = onehot[idx].sum(axis=0)
        parent_h = _entropy(total_counts, n)
        for j in range(x.shape[1]):
            v = x[idx, j]
            order = np.argsort(v, kind="stable")
            sv = v[order]
            cum = np.cumsum(onehot[idx][order], axis=0)
            cuts = np.nonzero(sv[:-1] < sv[1:])[0]  # split after position i
            cuts = cuts[(cuts + 1 >= self.min_leaf) & (n - cuts - 1 >= self.min_leaf)]
            if len(cuts) == 0:
                continue
            nl = (cuts + 1).astype(float)
            nr = n - nl
            left = cum[cuts]
            right = total_counts - left
            with np.errstate(divide="ignore", invalid="ignore"):
                pl = left / nl[:, None]
                pr = right / nr[:, None]
                hl = -np.where(pl > 0, pl * np.log2(pl), 0.0).sum(axis=1)
                hr = -np.where(pr > 0, pr * np.log2(pr), 0.0).sum(axis=1)
            gain = parent_h - (nl / n) * hl - (nr / n) * hr
            fl, fr = nl / n, nr / n
            split_info = -(fl * np.log2(fl) + fr * np.log2(fr))
            ratio = np.where(gain > _GAIN_EPS, gain / split_info, -1.0)
            i = int(np.argmax(ratio))  # first max: lowest threshold wins ties
            if ratio[i] > _GAIN_EPS and (best is None or ratio[i] > best[0] + _GAIN_EPS):
                best = (float(ratio[i]), j, float((sv[cuts[i]] + sv[cuts[i] + 1]) / 2))
        if best is None:
            return node
        _, j, threshold = best
        node.feature = j
        node.threshold = threshold
        mask = x[idx, j] <= threshold
        node.left = self._grow(x, codes, onehot, idx[mask])
        node.right = self._grow(x, codes, onehot, idx[~mask])
        return node

    def _prune(self, node: _Node, z: float) -> float:
        n = node.size
        errors = n - max(node.counts.values())
        leaf_estimate = n * _wilson_upper(errors / n, n, z)
        if node.is_leaf:
            return leaf_estimate
        subtree_estimate = self._prune(node.left, z) + self._prune(node.right, z)
        if leaf_estimate <= subtree_estimate + 1e-9:
            node.feature = node.threshold = node.left = node.right = None
            return leaf_estimate
        return subtree_estimate

    def predict_scores(self, x: np.ndarray) -> dict[str, float]:
        assert self.root is not None, "fit first"
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        total = node.size
        return {c: node.counts.get(c, 0) / total for c in self.classes}

    def depth(self) -> int:
        def rec(n: _Node) -> int:
            return 0 if n.is_leaf else 1 + max(rec(n.left), rec(n.right))

        return rec(self.root) if self.root else 0

    def to_state(self) -> dict:
        assert self.root is not None
        return {"classes": self.classes, "root": self.root.to_dict()}

    @classmethod
    def from_state(cls, params: dict, state: dict) -> "DecisionTree":
        clf = cls(**params)
        clf.classes = list(state["classes"])
        clf.root = _Node.from_dict(state["root"])
        return clf


# --- logistic regression --------------------------------------------------------


def logistic_loss_and_grad(
    w: np.ndarray, x: np.ndarray, signs: np.ndarray, lam: float
) -> tuple[float, np.ndarray]:
    """Ridge-regularised logistic loss and its analytic gradient.

    loss(w) = sum_i log(1 + exp(-s_i * <w, x_i>)) + lam/2 * ||w||^2
    with s_i in {-1, +1}.
    """
    margins = signs * (x @ w)
    loss = float(np.logaddexp(0.0, -margins).sum() + 0.5 * lam * (w @ w))
    sig = np.exp(-np.logaddexp(0.0, margins))  # sigma(-margin), overflow-safe
    grad = -(x.T @ (signs * sig)) + lam * w
    return loss, grad


class LogisticRegression:
    """One-vs-rest logistic regression with a small ridge penalty.

    Full-batch gradient descent; the step comes from backtracking line
    search (halving from `step`), stopping when the gradient's max norm
    falls below `tol` or after `epochs` passes.  Weights start at zero,
    so training is deterministic.
    """

    tag = "mlr"

    def __init__(
        self,
        lam: float = 1e-8,
        epochs: int = 500,
        step: float = 1.0,
        tol: float = 1e-6,
    ):
        if lam < 0 or epochs < 1 or step <= 0 or tol <= 0:
            raise ValueError("bad hyperparameters")
        self.lam = lam
        self.epochs = epochs
        self.step = step
        self.tol = tol
        self.classes: list[str] = []
        self.weights: np.ndarray | None = None  # (n_classes, n_features + 1)

    def params(self) -> dict:
        return {
            "lam": self.lam,
            "epochs": self.epochs,
            "step": self.step,
            "tol": self.tol,
        }

    @staticmethod
    def _with_bias(x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.hstack([x, np.ones((x.shape[0], 1))])

    def _fit_binary(self, xb: np.ndarray, signs: np.ndarray) -> np.ndarray:
        w = np.zeros(xb.shape[1])
        loss, grad = logistic_loss_and_grad(w, xb, signs, self.lam)
        for _ in range(self.epochs):
            if float(np.abs(grad).max()) < self.tol:
                break
            step, g2 = self.step, float(grad @ grad)
            improved = False
            while step >= 1e-16:
                candidate = w - step * grad
                new_loss, new_grad = logistic_loss_and_grad(
                    candidate, xb, signs, self.lam
                )
                if new_loss <= loss - 1e-4 * step * g2:
                    w, loss, grad = candidate, new_loss, new_grad
                    improved = True
                    break
                step /= 2
            if not improved:
                break  # line search stalled: already at numerical optimum
        return w

    def fit(self, x: np.ndarray, labels: list[str]) -> None:
        self.classes = sorted(set(labels))
        xb = self._with_bias(x)
        rows = []
        for c in self.classes:
            signs = np.where(np.array(labels) == c, 1.0, -1.0)
            rows.append(self._fit_binary(xb, signs))
        self.weights = np.vstack(rows)

    def predict_scores(self, x: np.ndarray) -> dict[str, float]:
        assert self.weights is not None, "fit first"
        xb = self._with_bias(x)[0]
        z = self.weights @ xb
        scores = 1.0 / (1.0 + np.exp(-z))
        return {c: float(s) for c, s in zip(self.classes, scores)}

    def to_state(self) -> dict:
        assert self.weights is not None
        return {"classes": self.classes, "weights": self.weights.tolist()}

    @classmethod
    def from_state(cls, params: dict, state: dict) -> "LogisticRegression":
        clf = cls(**params)
        clf.classes = list(state["classes"])
        clf.weights = np.asarray(state["weights"], dtype=float)
        return clf


ALGORITHMS = {
    NearestNeighbor.tag: NearestNeighbor,
    DecisionTree.tag: DecisionTree,
    LogisticRegression.tag: LogisticRegression,
}
