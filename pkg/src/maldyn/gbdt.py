"""Gradient-boosted regression trees for binary classification.

Trees are grown greedily on the logistic loss with second-order (Newton)
leaf weights. Two differently-tuned ensembles are blended into a
:class:`DualModel` for detection.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyData, ModelFormatError, SingleClass

GBDT_MAGIC = "MALDYN-GBDT-v1"
DUAL_MAGIC = "MALDYN-DUAL-v1"
PROBA_EPS = 1e-15


@dataclass(frozen=True)
class GbdtParams:
    n_trees: int = 100
    max_depth: int = 6
    learning_rate: float = 0.1
    min_leaf: int = 1
    subsample: float = 1.0
    colsample: float = 1.0
    seed: int = 0
    reg_lambda: float = 0.0

    def __post_init__(self):
        if self.n_trees < 0:
            raise ValueError("n_trees must be >= 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if not 0 < self.subsample <= 1 or not 0 < self.colsample <= 1:
            raise ValueError("subsample and colsample must lie in (0, 1]")
        if self.reg_lambda < 0:
            raise ValueError("reg_lambda must be >= 0")


# depth-wise, conservative
PROFILE_A = GbdtParams(n_trees=100, max_depth=6, learning_rate=0.1)
# shallower, faster, bagged
PROFILE_B = GbdtParams(n_trees=60, max_depth=4, learning_rate=0.2, subsample=0.8, colsample=0.8, seed=1)


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss(y: np.ndarray, raw: np.ndarray) -> float:
    # log(1 + e^{-z}) for y=1, log(1 + e^{z}) for y=0
    signed = np.where(y == 1, -raw, raw)
    return float(np.mean(np.logaddexp(0.0, signed)))


@dataclass
class Tree:
    """Flat node arrays; ``feature[i] == -1`` marks a leaf.

    ``value`` holds the learning-rate-scaled Newton weight for every node,
    internal ones included, which :func:`explain` uses for path attribution.
    """

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)
    gain: list[float] = field(default_factory=list)
    cover: list[int] = field(default_factory=list)

    def _add(self, value, cover) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        self.gain.append(0.0)
        self.cover.append(int(cover))
        return len(self.feature) - 1

    def depth(self, node: int = 0) -> int:
        if self.feature[node] < 0:
            return 0
        return 1 + max(self.depth(self.left[node]), self.depth(self.right[node]))

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        feat = np.asarray(self.feature)
        thr = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        node = np.zeros(X.shape[0], dtype=int)
        while True:
            f = feat[node]
            rows = np.flatnonzero(f >= 0)
            if rows.size == 0:
                return node
            cur = node[rows]
            go_left = X[rows, f[rows]] < thr[cur]
            node[rows] = np.where(go_left, left[cur], right[cur])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.value)[self.apply(X)]

    def path(self, row: np.ndarray) -> list[int]:
        node, out = 0, [0]
        while self.feature[node] >= 0:
            f = self.feature[node]
            node = self.left[node] if row[f] < self.threshold[node] else self.right[node]
            out.append(node)
        return out

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(**{k: list(d[k]) for k in ("feature", "threshold", "left", "right", "value", "gain", "cover")})


def _best_split(Xn: np.ndarray, g: np.ndarray, h: np.ndarray, cols: np.ndarray, min_leaf: int, lam: float):
    """Exhaustive split search over ``cols``.

    Returns ``(gain, feature, threshold)`` or None. Ties resolve to the lower
    feature index, then the lower threshold.
    """
    n = Xn.shape[0]
    if n < 2 * min_leaf:
        return None
    G, H = g.sum(), h.sum()
    parent = G * G / (H + lam)
    sub = Xn[:, cols]
    order = np.argsort(sub, axis=0, kind="stable")
    xs = np.take_along_axis(sub, order, axis=0)
    GL = np.cumsum(g[order], axis=0)[:-1]
    HL = np.cumsum(h[order], axis=0)[:-1]
    GR, HR = G - GL, H - HL
    gain = GL * GL / np.maximum(HL + lam, 1e-300) + GR * GR / np.maximum(HR + lam, 1e-300) - parent
    valid = xs[1:] > xs[:-1]
    left_n = np.arange(1, n)[:, None]
    valid &= (left_n >= min_leaf) & (n - left_n >= min_leaf)
    gain = np.where(valid, gain, -np.inf)

    best = None
    for c in range(len(cols)):
        i = int(np.argmax(gain[:, c]))
        gv = gain[i, c]
        if not np.isfinite(gv):
            continue
        if best is None or gv > best[0]:
            lo, hi = xs[i, c], xs[i + 1, c]
            thr = lo + (hi - lo) / 2
            if not lo < thr <= hi:
                thr = hi
            best = (float(gv), int(cols[c]), float(thr))
    return best


def _build_tree(X, g, h, rows, cols, params: GbdtParams) -> Tree:
    tree = Tree()
    lam, lr = params.reg_lambda, params.learning_rate

    def weight(idx):
        return -lr * g[idx].sum() / max(h[idx].sum() + lam, 1e-300)

    root = tree._add(weight(rows), len(rows))
    stack = [(root, rows, 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= params.max_depth:
            continue
        found = _best_split(X[idx], g[idx], h[idx], cols, params.min_leaf, lam)
        if found is None or found[0] <= 1e-12:
            continue
        gain, f, thr = found
        mask = X[idx, f] < thr
        li, ri = idx[mask], idx[~mask]
        tree.feature[node] = f
        tree.threshold[node] = thr
        tree.gain[node] = gain
        tree.left[node] = tree._add(weight(li), len(li))
        tree.right[node] = tree._add(weight(ri), len(ri))
        # right pushed first so the left subtree is expanded first
        stack.append((tree.right[node], ri, depth + 1))
        stack.append((tree.left[node], li, depth + 1))
    return tree


@dataclass
class GbdtModel:
    trees: list[Tree]
    base_score: float
    params: GbdtParams
    feature_names: list[str]
    train_loss: list[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def _matrix(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def raw_score(self, X) -> np.ndarray:
        X = self._matrix(X)
        out = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            out += t.predict(X)
        return out

    def predict_proba(self, X) -> np.ndarray:
        return np.clip(sigmoid(self.raw_score(X)), PROBA_EPS, 1 - PROBA_EPS)

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= threshold).astype(int)

    def to_dict(self) -> dict:
        return {
            "format": GBDT_MAGIC,
            "base_score": self.base_score,
            "params": asdict(self.params),
            "feature_names": list(self.feature_names),
            "train_loss": list(self.train_loss),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GbdtModel":
        if d.get("format") != GBDT_MAGIC:
            raise ModelFormatError(f"expected {GBDT_MAGIC}, found {d.get('format')!r}")
        return cls(
            [Tree.from_dict(t) for t in d["trees"]],
            float(d["base_score"]),
            GbdtParams(**d["params"]),
            list(d["feature_names"]),
            list(d.get("train_loss", [])),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def _check_training_data(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyData("training matrix is empty")
    if X.shape[0] < 2:
        raise EmptyData("need at least 2 training rows")
    if y.shape != (X.shape[0],):
        raise ValueError("labels must have one entry per row")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    if len(np.unique(y)) < 2:
        raise SingleClass("training labels contain a single class")
    return X, y.astype(float)


def train(X, y, params: GbdtParams = PROFILE_A, feature_names: Sequence[str] | None = None) -> GbdtModel:
    X, y = _check_training_data(X, y)
    n, m = X.shape
    names = list(feature_names) if feature_names is not None else [f"f{j}" for j in range(m)]
    if len(names) != m:
        raise ValueError("feature_names length does not match column count")
    rng = np.random.default_rng(params.seed)
    prior = y.mean()
    base = math.log(prior / (1 - prior))
    raw = np.full(n, base)
    trees: list[Tree] = []
    losses = [logistic_loss(y, raw)]
    n_rows = max(1, int(round(params.subsample * n)))
    n_cols = max(1, int(round(params.colsample * m)))
    for _ in range(params.n_trees):
        p = sigmoid(raw)
        g = p - y
        h = p * (1 - p)
        rows = np.sort(rng.choice(n, n_rows, replace=False)) if n_rows < n else np.arange(n)
        cols = np.sort(rng.choice(m, n_cols, replace=False)) if n_cols < m else np.arange(m)
        tree = _build_tree(X, g, h, rows, cols, params)
        trees.append(tree)
        raw = raw + tree.predict(X)
        losses.append(logistic_loss(y, raw))
    return GbdtModel(trees, base, params, names, losses)


def predict_proba(model, row) -> float:
    """Probability of the positive (malware) class for a single row."""
    return float(model.predict_proba(np.asarray(row, dtype=float).reshape(1, -1))[0])


@dataclass
class DualModel:
    model_a: GbdtModel
    model_b: GbdtModel
    blend: float = 0.5

    def __post_init__(self):
        if not 0 <= self.blend <= 1:
            raise ValueError("blend must lie in [0, 1]")
        if self.model_a.feature_names != self.model_b.feature_names:
            raise ValueError("dual members must share a feature table")

    @property
    def feature_names(self) -> list[str]:
        return self.model_a.feature_names

    def predict_proba(self, X) -> np.ndarray:
        pa = self.model_a.predict_proba(X)
        if self.blend == 1:
            return pa
        pb = self.model_b.predict_proba(X)
        if self.blend == 0:
            return pb
        return self.blend * pa + (1 - self.blend) * pb

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= threshold).astype(int)

    def to_dict(self) -> dict:
        return {
            "format": DUAL_MAGIC,
            "blend": self.blend,
            "model_a": self.model_a.to_dict(),
            "model_b": self.model_b.to_dict(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


def train_dual(X, y, params_a: GbdtParams = PROFILE_A, params_b: GbdtParams = PROFILE_B,
               blend: float = 0.5, feature_names=None) -> DualModel:
    return DualModel(train(X, y, params_a, feature_names), train(X, y, params_b, feature_names), blend)


def loads(text: str):
    """Load a GBDT or dual model from its JSON text."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    fmt = d.get("format")
    if fmt == GBDT_MAGIC:
        return GbdtModel.from_dict(d)
    if fmt == DUAL_MAGIC:
        return DualModel(GbdtModel.from_dict(d["model_a"]), GbdtModel.from_dict(d["model_b"]), float(d["blend"]))
    raise ModelFormatError(f"unsupported model format {fmt!r}")


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    recall: float
    precision: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    undefined: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return asdict(self) | {"undefined": list(self.undefined)}


def metrics_from_confusion(tp: int, fp: int, fn: int, tn: int) -> Metrics:
    undefined = []

    def ratio(num, den, name):
        if den == 0:
            undefined.append(name)
            return 0.0
        return num / den

    total = tp + fp + fn + tn
    acc = ratio(tp + tn, total, "accuracy")
    rec = ratio(tp, tp + fn, "recall")
    prec = ratio(tp, tp + fp, "precision")
    f1 = ratio(2 * prec * rec, prec + rec, "f1")
    return Metrics(acc, rec, prec, f1, tp, fp, fn, tn, tuple(undefined))


def evaluate(model, X, y, threshold: float = 0.5) -> Metrics:
    """Binary metrics with malware (label 1) as the positive class."""
    y = np.asarray(y).astype(int)
    pred = model.predict(X, threshold)
    tp = int(np.sum((pred == 1) & (y == 1)))
    fp = int(np.sum((pred == 1) & (y == 0)))
    fn = int(np.sum((pred == 0) & (y == 1)))
    tn = int(np.sum((pred == 0) & (y == 0)))
    return metrics_from_confusion(tp, fp, fn, tn)


def feature_importance(model) -> dict[str, float]:
    """Share of total split gain per feature; shares sum to 1."""
    members = [model.model_a, model.model_b] if isinstance(model, DualModel) else [model]
    weights = [model.blend, 1 - model.blend] if isinstance(model, DualModel) else [1.0]
    totals: dict[str, float] = {}
    for m, w in zip(members, weights):
        for t in m.trees:
            for f, gain in zip(t.feature, t.gain):
                if f >= 0 and gain > 0:
                    name = m.feature_names[f]
                    totals[name] = totals.get(name, 0.0) + w * gain
    s = sum(totals.values())
    if s <= 0:
        return {}
    return {k: v / s for k, v in sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))}


@dataclass(frozen=True)
class Explanation:
    bias: float
    contributions: list[tuple[str, float]]
    raw_score: float

    @property
    def probability(self) -> float:
        return float(sigmoid(np.array([self.raw_score]))[0])


def explain(model: GbdtModel, row) -> Explanation:
    """Decompose the raw score of ``row`` along each tree's decision path.

    Every split charges the change in node value to its feature; ``bias``
    collects the base score and the root values, so
    ``bias + sum(contributions) == raw score``.
    """
    row = np.asarray(row, dtype=float).ravel()
    bias = model.base_score
    contrib: dict[str, float] = {}
    for t in model.trees:
        path = t.path(row)
        bias += t.value[path[0]]
        for parent, child in zip(path, path[1:]):
            name = model.feature_names[t.feature[parent]]
            contrib[name] = contrib.get(name, 0.0) + t.value[child] - t.value[parent]
    raw = float(model.raw_score(row)[0])
    items = sorted(contrib.items(), key=lambda kv: (-abs(kv[1]), kv[0]))
    return Explanation(bias, items, raw)
