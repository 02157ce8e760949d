"""Random-forest classifier grown from scratch.

Trees are fully grown on Gini impurity. At each node a fraction of the
features is drawn without replacement and every midpoint between
consecutive distinct sorted values is scored. Equal-impurity splits go to
the lowest feature index, then the lowest threshold; vote ties go to the
earliest label. Index tie-breaking piles split counts onto low-index
features in deep nodes, where many features separate a handful of samples
equally well; ``split_ties="draw"`` keeps the first-drawn candidate instead,
which spreads those counts at random.

If none of the drawn features can split an impure node, the remaining
features are tried in index order before the node is made a leaf.

Each tree owns a random stream spawned from ``rng_seed`` and its index, so
serial and parallel training build identical forests.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyData, FormatError, VersionError

MODEL_FORMAT = "tremorid-forest"
MODEL_VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 130
    attr_fraction: float = 0.8
    bootstrap: bool = True
    min_leaf: int = 1
    rng_seed: int = 0
    # "node": redraw candidate features at every split; "tree": once per tree.
    attr_sampling: str = "node"
    # Equal-impurity splits: "draw" keeps the candidate drawn first, "index"
    # the lowest feature index. Both then take the lowest threshold.
    split_ties: str = "index"

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not 0.0 < self.attr_fraction <= 1.0:
            raise ValueError("attr_fraction must lie in (0, 1]")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.attr_sampling not in ("node", "tree"):
            raise ValueError("attr_sampling must be 'node' or 'tree'")
        if self.split_ties not in ("draw", "index"):
            raise ValueError("split_ties must be 'draw' or 'index'")
        if not 0 <= self.rng_seed < 2 ** 64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")

    def n_candidates(self, n_features: int) -> int:
        return max(1, min(n_features, math.ceil(self.attr_fraction * n_features - 1e-12)))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(eq=False)
class Tree:
    """Flat array representation; leaves have ``feature == -1``.

    ``value`` holds the majority class index at every node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def split_counts(self) -> np.ndarray:
        f = self.feature[self.feature >= 0]
        return np.bincount(f, minlength=self.n_features)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.feature[node] >= 0
        while np.any(active):
            r = rows[active]
            nd = node[active]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict_index(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(np.asarray(X, dtype=np.float64))]


@dataclass(eq=False)
class Forest:
    trees: list[Tree]
    label_set: tuple
    config: ForestConfig
    feature_names: tuple

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def votes(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        counts = np.zeros((len(X), len(self.label_set)), dtype=np.int64)
        rows = np.arange(len(X))
        for tree in self.trees:
            np.add.at(counts, (rows, tree.predict_index(X)), 1)
        return counts

    def predict(self, X) -> list:
        idx = np.argmax(self.votes(X), axis=1)
        return [self.label_set[i] for i in idx]


# ------------------------------------------------------------------ training


def _best_split(X, y, idx, features, min_leaf):
    """Return (feature, threshold) of the best Gini split, or None.

    ``features`` is scanned in the given order; on equal impurity the earlier
    feature wins, then the lower threshold.
    """
    n = len(idx)
    if n < 2 * min_leaf:
        return None
    Xn = X[np.ix_(idx, features)]
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    ys = y[idx][order]

    # Maximising sum(cl^2)/nl + sum(cr^2)/nr minimises weighted Gini impurity.
    sq_left = np.zeros((n - 1, len(features)), dtype=np.int64)
    sq_right = np.zeros_like(sq_left)
    for c in np.unique(ys[:, 0]):
        cl = np.cumsum(ys == c, axis=0, dtype=np.int64)
        total = cl[-1]
        cl = cl[:-1]
        sq_left += cl * cl
        cr = total - cl
        sq_right += cr * cr
    n_left = np.arange(1, n)[:, None]
    score = sq_left / n_left + sq_right / (n - n_left)

    valid = xs[:-1] < xs[1:]
    if min_leaf > 1:
        pos = np.arange(1, n)
        valid &= ((pos >= min_leaf) & (n - pos >= min_leaf))[:, None]
    if not np.any(valid):
        return None
    score = np.where(valid, score, -np.inf)
    flat = int(np.argmax(score.T))
    j, i = divmod(flat, n - 1)
    lo, hi = xs[i, j], xs[i + 1, j]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return int(features[j]), float(thr)


def train_tree(X, y, config: ForestConfig, rng: np.random.Generator,
               n_classes: int | None = None) -> Tree:
    """Grow one tree on ``X`` (samples x features) and integer labels ``y``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyData("train_tree needs at least one sample")
    if len(y) != len(X):
        raise DimensionMismatch("X and y differ in length")
    n_classes = int(n_classes if n_classes is not None else y.max() + 1)
    n_features = X.shape[1]
    k = config.n_candidates(n_features)
    all_features = np.arange(n_features)

    tree_features = None
    if config.attr_sampling == "tree":
        tree_features = rng.choice(n_features, size=k, replace=False)

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(int(np.argmax(np.bincount(y[idx], minlength=n_classes))))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(X))), np.arange(len(X)))]
    while stack:
        node, idx = stack.pop()
        if np.all(y[idx] == y[idx[0]]):
            continue
        if tree_features is not None:
            cand = tree_features
        else:
            cand = rng.choice(n_features, size=k, replace=False)
        if config.split_ties == "index":
            cand = np.sort(cand)
        split = _best_split(X, y, idx, cand, config.min_leaf)
        if split is None and len(cand) < n_features:
            rest = np.setdiff1d(all_features, cand)
            split = _best_split(X, y, idx, rest, config.min_leaf)
        if split is None:
            continue
        f, thr = split
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # right pushed first so the left subtree is numbered first
        stack.append((right[node], ri))
        stack.append((left[node], li))

    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value, dtype=np.int64),
        n_features=n_features,
    )


def _fit_one(args):
    X, y, config, seed_seq, n_classes = args
    rng = np.random.default_rng(seed_seq)
    if config.bootstrap:
        rows = rng.integers(0, len(X), size=len(X))
        X, y = X[rows], y[rows]
    return train_tree(X, y, config, rng, n_classes=n_classes)


def train_forest(X, labels: Sequence, config: ForestConfig | None = None,
                 feature_names: Sequence[str] | None = None, jobs: int = 1) -> Forest:
    """Train ``config.n_trees`` trees, optionally across ``jobs`` processes.

    ``labels`` may be any sortable values; the sorted distinct labels become
    the forest's ``label_set`` and fix the vote tie-break order.
    """
    config = config or ForestConfig()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) < 2:
        raise EmptyData("train_forest needs at least two samples")
    labels = list(labels)
    if len(labels) != len(X):
        raise DimensionMismatch("X and labels differ in length")
    label_set = tuple(sorted(set(labels)))
    index = {lab: i for i, lab in enumerate(label_set)}
    y = np.array([index[lab] for lab in labels], dtype=np.int64)
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(X.shape[1]))
    elif len(feature_names) != X.shape[1]:
        raise DimensionMismatch("feature_names length differs from X columns")

    seeds = np.random.SeedSequence(config.rng_seed).spawn(config.n_trees)
    tasks = [(X, y, config, s, len(label_set)) for s in seeds]
    if jobs > 1 and config.n_trees > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            trees = list(ex.map(_fit_one, tasks))
    else:
        trees = [_fit_one(t) for t in tasks]
    return Forest(trees, label_set, config, tuple(feature_names))


# ----------------------------------------------------------------- inference


def predict(forest: Forest, fv) -> tuple[object, dict]:
    """Majority vote for one vector; returns ``(label, {label: votes})``."""
    values = getattr(fv, "values", fv)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or len(values) != forest.n_features:
        raise DimensionMismatch(f"expected {forest.n_features} features, got shape {values.shape}")
    counts = forest.votes(values)[0]
    label = forest.label_set[int(np.argmax(counts))]
    return label, dict(zip(forest.label_set, counts.tolist()))


def feature_importance(forest: Forest) -> list[tuple[str, int]]:
    """Split counts per feature, descending; ties keep feature order."""
    counts = np.zeros(forest.n_features, dtype=np.int64)
    for tree in forest.trees:
        counts += tree.split_counts()
    order = sorted(range(len(counts)), key=lambda i: (-counts[i], i))
    return [(forest.feature_names[i], int(counts[i])) for i in order]


# --------------------------------------------------------------- persistence


def _native(v):
    return v.item() if isinstance(v, np.generic) else v


def dumps_model(forest: Forest) -> str:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": forest.config.to_dict(),
        "labels": [_native(v) for v in forest.label_set],
        "feature_names": list(forest.feature_names),
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": t.value.tolist(),
            }
            for t in forest.trees
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def loads_model(text: str) -> Forest:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"model is not valid JSON: {exc.msg} at char {exc.pos}") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise FormatError("not a tremorid forest model")
    if doc.get("version") != MODEL_VERSION:
        raise VersionError(f"unsupported model version {doc.get('version')!r}; "
                           f"this build reads version {MODEL_VERSION}")
    try:
        config = ForestConfig(**doc["config"])
        labels = tuple(doc["labels"])
        names = tuple(doc["feature_names"])
        trees = []
        for t in doc["trees"]:
            tree = Tree(
                feature=np.array(t["feature"], dtype=np.int64),
                threshold=np.array(t["threshold"], dtype=np.float64),
                left=np.array(t["left"], dtype=np.int64),
                right=np.array(t["right"], dtype=np.int64),
                value=np.array(t["value"], dtype=np.int64),
                n_features=len(names),
            )
            _validate_tree(tree, len(labels))
            trees.append(tree)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed model: {exc}") from None
    if not trees:
        raise FormatError("model contains no trees")
    return Forest(trees, labels, config, names)


def _validate_tree(tree: Tree, n_labels: int) -> None:
    n = tree.n_nodes
    arrays = (tree.threshold, tree.left, tree.right, tree.value)
    if n == 0 or any(len(a) != n for a in arrays):
        raise FormatError("tree arrays have inconsistent lengths")
    internal = tree.feature >= 0
    if np.any(tree.feature >= tree.n_features) or np.any(tree.feature < -1):
        raise FormatError("split feature index out of range")
    parents = np.flatnonzero(internal)
    for kids in (tree.left[internal], tree.right[internal]):
        # children always follow their parent, which also rules out cycles
        if np.any(kids <= parents) or np.any(kids >= n):
            raise FormatError("child index out of range")
    if np.any(tree.value < 0) or np.any(tree.value >= n_labels):
        raise FormatError("leaf label out of range")


def save_model(forest: Forest, path) -> None:
    Path(path).write_text(dumps_model(forest), encoding="utf-8")


def load_model(path) -> Forest:
    return loads_model(Path(path).read_text(encoding="utf-8"))
