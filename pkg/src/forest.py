"""Random forest for regression (MSE splits) and classification (Gini splits).

Trees are stored as flat node arrays: `feature` is -1 on leaves, `left` and
`right` index children, `value` holds the leaf mean (regression) or the leaf
class fractions over `RandomForest.classes` (classification).
"""

from dataclasses import asdict, dataclass
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from errors import PreconditionError
from utils import logger, progress_enabled
from utils.rng import child_rng

Task = Literal["regression", "classification"]


@dataclass(frozen=True)
class ForestConfig:
    task: Task = "regression"
    n_trees: int = 100
    max_depth: Optional[int] = 5
    min_samples_split: int = 2

    @classmethod
    def regression(cls) -> "ForestConfig":
        return cls(task="regression", n_trees=100, max_depth=5)

    @classmethod
    def classification(cls) -> "ForestConfig":
        return cls(task="classification", n_trees=50, max_depth=None)

    @property
    def criterion(self) -> str:
        return "mse" if self.task == "regression" else "gini"

    def candidate_count(self, n_features: int) -> int:
        if self.task == "classification":
            return max(1, int(np.sqrt(n_features)))
        return max(1, int(np.ceil(n_features / 3)))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DecisionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """leaf index reached by every row of X"""
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            cur = node[rows]
            go_left = X[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


@dataclass(frozen=True)
class RandomForest:
    task: Task
    trees: Tuple[DecisionTree, ...]
    n_features: int
    importances: np.ndarray
    seed: int
    classes: Optional[np.ndarray] = None

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features:
            raise PreconditionError(f"expected {self.n_features} features, got {X.shape[1]}")
        total = sum(tree.predict(X) for tree in self.trees)
        if self.task == "regression":
            out = total[:, 0] / len(self.trees)
        else:
            # argmax keeps the first maximum; classes are sorted ascending
            out = self.classes[np.argmax(total, axis=1)]
        return out[0] if single else out


def _impurity(stats: np.ndarray, counts: np.ndarray, task: Task) -> np.ndarray:
    """
    node impurity from cumulative statistics; for regression `stats` holds
    (sum y, sum y^2), for classification the per-class counts
    """
    with np.errstate(invalid="ignore", divide="ignore"):
        if task == "regression":
            mean = stats[..., 0] / counts
            return np.maximum(stats[..., 1] / counts - mean * mean, 0.0)
        p = stats / counts[..., None]
        return 1.0 - np.sum(p * p, axis=-1)


def _node_stats(y: np.ndarray, task: Task) -> np.ndarray:
    if task == "regression":
        return np.column_stack([y[:, 0], y[:, 0] ** 2])
    return y


class _TreeBuilder:
    def __init__(self, X: np.ndarray, y: np.ndarray, cfg: ForestConfig, rng: np.random.Generator):
        self.X, self.y, self.cfg, self.rng = X, y, cfg, rng
        self.stats = _node_stats(y, cfg.task)
        self.n_candidates = cfg.candidate_count(X.shape[1])
        self.importance = np.zeros(X.shape[1])
        self.nodes: List[List] = []

    def _leaf_value(self, idx: np.ndarray) -> np.ndarray:
        return self.y[idx].mean(axis=0)

    def _best_split(self, idx: np.ndarray, parent: float) -> Optional[Tuple[int, float, float, np.ndarray]]:
        n = len(idx)
        best: Optional[Tuple[int, float, float, np.ndarray]] = None
        features = self.rng.choice(self.X.shape[1], self.n_candidates, replace=False)
        for f in features:
            xs = self.X[idx, f]
            order = np.argsort(xs, kind="stable")
            xs_sorted = xs[order]
            cuts = np.flatnonzero(xs_sorted[1:] > xs_sorted[:-1])
            if len(cuts) == 0:
                continue
            cum = np.cumsum(self.stats[idx][order], axis=0)
            left_n = (cuts + 1).astype(float)
            left = cum[cuts]
            right = cum[-1] - left
            right_n = n - left_n
            child = (
                left_n * _impurity(left, left_n, self.cfg.task)
                + right_n * _impurity(right, right_n, self.cfg.task)
            ) / n
            k = int(np.argmin(child))
            decrease = parent - float(child[k])
            if best is None or decrease > best[2]:
                lo, hi = xs_sorted[cuts[k]], xs_sorted[cuts[k] + 1]
                threshold = 0.5 * (lo + hi)
                if threshold >= hi:
                    threshold = lo
                best = (int(f), float(threshold), decrease, order[: cuts[k] + 1])
        return best

    def build(self) -> DecisionTree:
        n_root = len(self.y)
        stack = [(np.arange(n_root), 0, -1, False)]
        while stack:
            idx, depth, parent_id, is_left = stack.pop()
            node_id = len(self.nodes)
            self.nodes.append([-1, 0.0, -1, -1, self._leaf_value(idx)])
            if parent_id >= 0:
                self.nodes[parent_id][2 if is_left else 3] = node_id

            stats = self.stats[idx].sum(axis=0)
            impurity = float(_impurity(stats, np.asarray(float(len(idx))), self.cfg.task))
            if (
                impurity <= 1e-15
                or len(idx) < self.cfg.min_samples_split
                or (self.cfg.max_depth is not None and depth >= self.cfg.max_depth)
            ):
                continue
            split = self._best_split(idx, impurity)
            if split is None:
                continue

            feature, threshold, decrease, left_pos = split
            self.importance[feature] += max(decrease, 0.0) * len(idx) / n_root
            self.nodes[node_id][0], self.nodes[node_id][1] = feature, threshold
            mask = np.zeros(len(idx), dtype=bool)
            mask[left_pos] = True
            # right pushed first so the left subtree gets the lower node ids
            stack.append((idx[~mask], depth + 1, node_id, False))
            stack.append((idx[mask], depth + 1, node_id, True))

        return DecisionTree(
            feature=np.array([nd[0] for nd in self.nodes], dtype=np.int64),
            threshold=np.array([nd[1] for nd in self.nodes], dtype=float),
            left=np.array([nd[2] for nd in self.nodes], dtype=np.int64),
            right=np.array([nd[3] for nd in self.nodes], dtype=np.int64),
            value=np.array([nd[4] for nd in self.nodes], dtype=float),
        )


def fit(X: np.ndarray, y: Sequence, cfg: ForestConfig = ForestConfig(), seed: int = 0, progress: bool = True) -> RandomForest:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise PreconditionError(f"feature matrix {X.shape} does not match {len(y)} targets")
    if len(X) < 2:
        raise PreconditionError(f"a forest needs at least 2 samples, got {len(X)}")
    if not np.all(np.isfinite(X)):
        raise PreconditionError("feature matrix contains non-finite values")
    if cfg.n_trees < 1:
        raise PreconditionError("a forest needs at least one tree")

    classes = None
    if cfg.task == "classification":
        classes, codes = np.unique(y.astype(np.int64), return_inverse=True)
        targets = np.eye(len(classes))[codes]
    else:
        targets = y.astype(float).reshape(-1, 1)

    trees, importance = [], np.zeros(X.shape[1])
    for i in tqdm(range(cfg.n_trees), desc=f"{cfg.task} forest", disable=not (progress and progress_enabled()), leave=False):
        rng = child_rng(seed, i)
        boot = rng.integers(0, len(X), len(X))
        builder = _TreeBuilder(X[boot], targets[boot], cfg, rng)
        trees.append(builder.build())
        importance += builder.importance

    total = importance.sum()
    if total > 0:
        importance = importance / total
    logger.debug(f"fit {cfg.task} forest: {cfg.n_trees} trees, {sum(t.node_count for t in trees)} nodes")
    return RandomForest(
        task=cfg.task,
        trees=tuple(trees),
        n_features=X.shape[1],
        importances=importance,
        seed=seed,
        classes=classes,
    )


def predict(f: RandomForest, x: np.ndarray):
    return f.predict(x)


def feature_importances(f: RandomForest) -> np.ndarray:
    return f.importances.copy()
