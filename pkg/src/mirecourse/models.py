"""Linear models, two-layer ReLU networks and weighted tree ensembles."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

log = logging.getLogger(__name__)


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LinearModel:
    coef: np.ndarray
    intercept: float = 0.0

    def __post_init__(self):
        coef = np.array(self.coef, dtype=float).ravel()
        if not np.all(np.isfinite(coef)) or not math.isfinite(self.intercept):
            raise ValueError("linear model weights must be finite")
        if not np.any(coef != 0):
            raise ValueError("linear model needs a nonzero coefficient")
        coef.setflags(write=False)
        object.__setattr__(self, "coef", coef)
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def n_features(self):
        return len(self.coef)

    def decision(self, X):
        return X @ self.coef + self.intercept


@dataclass(frozen=True)
class ReluNetwork:
    """``sum_t out_weights[t] * relu(weights[t] @ x + biases[t]) + out_bias``."""

    weights: np.ndarray  # (T, D)
    biases: np.ndarray  # (T,)
    out_weights: np.ndarray  # (T,)
    out_bias: float = 0.0

    def __post_init__(self):
        W = np.atleast_2d(np.array(self.weights, dtype=float))
        b = np.array(self.biases, dtype=float).ravel()
        th = np.array(self.out_weights, dtype=float).ravel()
        if W.shape[0] < 1 or b.shape != (W.shape[0],) or th.shape != (W.shape[0],):
            raise ValueError("inconsistent ReLU network shapes")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b)) and np.all(np.isfinite(th))):
            raise ValueError("network weights must be finite")
        for a in (W, b, th):
            a.setflags(write=False)
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "biases", b)
        object.__setattr__(self, "out_weights", th)
        object.__setattr__(self, "out_bias", float(self.out_bias))

    @property
    def n_features(self):
        return self.weights.shape[1]

    @property
    def n_hidden(self):
        return self.weights.shape[0]

    def decision(self, X):
        H = np.maximum(X @ self.weights.T + self.biases, 0.0)
        return H @ self.out_weights + self.out_bias


@dataclass(frozen=True)
class Leaf:
    """Axis-aligned box ``prod_d [lower[d], upper[d])`` with a leaf value."""

    lower: np.ndarray
    upper: np.ndarray
    value: float

    def contains(self, X):
        X = np.atleast_2d(X)
        return np.all((X >= self.lower) & (X < self.upper), axis=1)


@dataclass(frozen=True)
class Tree:
    leaves: tuple
    # internal representation for fast lookup: (feature, threshold, left, right)
    # with negative child ids encoding leaves as ~index
    nodes: tuple = ()

    def __post_init__(self):
        if not self.leaves:
            raise ValueError("a tree needs at least one leaf")
        object.__setattr__(self, "values", np.array([leaf.value for leaf in self.leaves]))
        if self.nodes:
            arr = np.array([(f, thr, a, b) for f, thr, a, b in self.nodes], dtype=float)
            object.__setattr__(self, "_feat", arr[:, 0].astype(int))
            object.__setattr__(self, "_thr", arr[:, 1])
            object.__setattr__(self, "_left", arr[:, 2].astype(int))
            object.__setattr__(self, "_right", arr[:, 3].astype(int))

    def leaf_index(self, X):
        X = np.atleast_2d(X)
        if not self.nodes:
            member = np.stack([leaf.contains(X) for leaf in self.leaves], axis=1)
            return np.argmax(member, axis=1)
        k = np.zeros(len(X), dtype=int)
        rows = np.arange(len(X))
        active = k >= 0
        while active.any():
            r, node = rows[active], k[active]
            go_left = X[r, self._feat[node]] < self._thr[node]
            k[active] = np.where(go_left, self._left[node], self._right[node])
            active = k >= 0
        return ~k


@dataclass(frozen=True)
class TreeEnsemble:
    trees: tuple
    tree_weights: np.ndarray
    n_features: int

    def __post_init__(self):
        w = np.array(self.tree_weights, dtype=float).ravel()
        if len(w) != len(self.trees) or not self.trees:
            raise ValueError("one weight per tree required")
        w.setflags(write=False)
        object.__setattr__(self, "tree_weights", w)
        object.__setattr__(self, "trees", tuple(self.trees))

    def decision(self, X):
        X = np.atleast_2d(X)
        total = np.zeros(len(X))
        for w, tree in zip(self.tree_weights, self.trees):
            total += w * tree.values[tree.leaf_index(X)]
        return total


Classifier = Union[LinearModel, ReluNetwork, TreeEnsemble]


def decision_function(clf: Classifier, x):
    """Score of one vector (returns float) or a batch of row vectors (array)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != clf.n_features:
        raise ValueError(f"expected {clf.n_features} features, got {X.shape[1]}")
    out = clf.decision(X)
    return float(out[0]) if single else out


def predict(clf: Classifier, x):
    """Labels in {-1, +1}; a score of exactly 0 counts as +1."""
    s = decision_function(clf, x)
    if np.ndim(s) == 0:
        return 1 if s >= 0 else -1
    return np.where(s >= 0, 1, -1)


# ---------------------------------------------------------------------------
# training

def _standardize(X):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return (X - mu) / sd, mu, sd


def train_logistic(X, y, l2=1e-3, tol=1e-6, max_iter=20000):
    """Gradient descent on the L2-regularised logistic loss (standardised inputs)."""
    Z, mu, sd = _standardize(np.asarray(X, dtype=float))
    n, D = Z.shape
    A = np.hstack([Z, np.ones((n, 1))])
    # step 1/L with L the Lipschitz constant of the gradient
    L = 0.25 * np.linalg.eigvalsh(A.T @ A / n).max() + l2
    w = np.zeros(D + 1)
    best, best_norm = w.copy(), math.inf
    for it in range(max_iter):
        m = y * (A @ w)
        g = -(A.T @ (y * _sigmoid(-m))) / n
        g[:D] += l2 * w[:D]
        gn = np.linalg.norm(g)
        if gn < best_norm:
            best, best_norm = w.copy(), gn
        if gn < tol:
            break
        w -= g / L
    else:
        log.warning("logistic regression stopped at iteration cap (grad norm %.2e)", best_norm)
    coef = best[:D] / sd
    return LinearModel(coef, float(best[D] - coef @ mu))


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def train_relu_net(X, y, hidden=30, epochs=200, batch=32, lr=0.05, l2=1e-4, seed=0):
    """Mini-batch SGD on the logistic loss of a one-hidden-layer ReLU network."""
    rng = np.random.default_rng(seed)
    Z, mu, sd = _standardize(np.asarray(X, dtype=float))
    n, D = Z.shape
    W = rng.normal(0, math.sqrt(2.0 / D), size=(hidden, D))
    b = np.zeros(hidden)
    th = rng.normal(0, math.sqrt(1.0 / hidden), size=hidden)
    c = 0.0
    for _ in range(epochs):
        perm = rng.permutation(n)
        for s in range(0, n, batch):
            idx = perm[s:s + batch]
            Zb, yb = Z[idx], y[idx]
            pre = Zb @ W.T + b
            Hb = np.maximum(pre, 0.0)
            out = Hb @ th + c
            # d loss / d out for log(1 + exp(-y out))
            g = -yb * _sigmoid(-yb * out) / len(idx)
            g_th = Hb.T @ g + l2 * th
            g_c = g.sum()
            g_pre = np.outer(g, th) * (pre > 0)
            g_W = g_pre.T @ Zb + l2 * W
            g_b = g_pre.sum(axis=0)
            W -= lr * g_W
            b -= lr * g_b
            th -= lr * g_th
            c -= lr * g_c
    # fold standardisation into the first layer
    W_raw = W / sd
    b_raw = b - W_raw @ mu
    return ReluNetwork(W_raw, b_raw, th, c)


def _gini(pos, tot):
    p = pos / tot
    return 1.0 - p * p - (1 - p) * (1 - p)


def _best_split(X, y, features):
    best = None
    n = len(y)
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs, ys = X[order, f], (y[order] > 0).astype(float)
        cpos = np.cumsum(ys)
        cnt = np.arange(1, n + 1)
        valid = np.flatnonzero(xs[:-1] < xs[1:])
        if len(valid) == 0:
            continue
        lp, lc = cpos[valid], cnt[valid]
        rp, rc = cpos[-1] - lp, n - lc
        imp = (lc * _gini(lp, lc) + rc * _gini(rp, rc)) / n
        k = int(np.argmin(imp))
        if best is None or imp[k] < best[0] - 1e-15:
            i = valid[k]
            best = (imp[k], f, 0.5 * (xs[i] + xs[i + 1]))
    return best


def train_tree(X, y, max_depth, D, rng=None, max_features=None, min_leaf=1):
    """CART with Gini impurity; returns a Tree with leaf boxes and a lookup table."""
    leaves, nodes = [], []

    def grow(idx, depth, lo, hi):
        ys = y[idx]
        value = 1.0 if (ys > 0).sum() * 2 >= len(ys) else -1.0
        split = None
        if depth < max_depth and len(idx) >= 2 * min_leaf and len(np.unique(ys)) > 1:
            feats = np.arange(D)
            if max_features is not None and max_features < D:
                feats = np.sort(rng.choice(D, size=max_features, replace=False))
            split = _best_split(X[idx], ys, feats)
        if split is None:
            leaves.append(Leaf(lo.copy(), hi.copy(), value))
            return ~(len(leaves) - 1)
        _, f, thr = split
        k = len(nodes)
        nodes.append(None)
        mask = X[idx, f] < thr
        hl, lr_ = hi.copy(), lo.copy()
        hl[f], lr_[f] = thr, thr
        left = grow(idx[mask], depth + 1, lo, hl)
        right = grow(idx[~mask], depth + 1, lr_, hi)
        nodes[k] = (int(f), float(thr), left, right)
        return k

    root = grow(np.arange(len(y)), 0, np.full(D, -np.inf), np.full(D, np.inf))
    if root < 0:
        return Tree(tuple(leaves), ())
    return Tree(tuple(leaves), tuple(nodes))


def train_forest(X, y, n_trees=50, max_depth=4, max_features="sqrt", seed=0):
    X = np.asarray(X, dtype=float)
    n, D = X.shape
    rng = np.random.default_rng(seed)
    if max_features == "sqrt":
        max_features = max(1, int(round(math.sqrt(D))))
    trees = []
    for _ in range(n_trees):
        boot = rng.integers(0, n, size=n)
        trees.append(train_tree(X[boot], y[boot], max_depth, D, rng, max_features))
    return TreeEnsemble(tuple(trees), np.full(n_trees, 1.0 / n_trees), D)


def train(kind: str, dataset, seed=0, **hyper) -> Classifier:
    """Train ``logistic``, ``relu_net`` or ``forest`` on a Dataset."""
    X, y = dataset.rows, dataset.labels
    if len(y) == 0 or len(np.unique(y)) < 2:
        raise ValueError("training data must contain both classes")
    if kind == "logistic":
        return train_logistic(X, y, **hyper)
    if kind == "relu_net":
        return train_relu_net(X, y, seed=seed, **hyper)
    if kind == "forest":
        return train_forest(X, y, seed=seed, **hyper)
    raise ValueError(f"unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# serialization

def _num(v):
    return repr(float(v))


def _vec(a):
    return [_num(v) for v in np.ravel(a)]


def _parse_num(s, where):
    if not isinstance(s, (str, int, float)) or isinstance(s, bool):
        raise ModelFormatError(f"{where}: expected a number")
    try:
        return float(s)
    except ValueError:
        raise ModelFormatError(f"{where}: malformed number {s!r}") from None


def _parse_vec(seq, where):
    if not isinstance(seq, list):
        raise ModelFormatError(f"{where}: expected a list")
    return np.array([_parse_num(s, where) for s in seq], dtype=float)


def model_to_dict(clf: Classifier, features=None) -> dict:
    if isinstance(clf, LinearModel):
        doc = {"kind": "linear", "weights": {"coef": _vec(clf.coef), "intercept": _num(clf.intercept)}}
    elif isinstance(clf, ReluNetwork):
        doc = {"kind": "relu_net", "weights": {
            "hidden": [_vec(row) for row in clf.weights],
            "hidden_bias": _vec(clf.biases),
            "output": _vec(clf.out_weights),
            "output_bias": _num(clf.out_bias),
        }}
    elif isinstance(clf, TreeEnsemble):
        doc = {"kind": "tree_ensemble", "n_features": clf.n_features, "trees": [
            {
                "weight": _num(w),
                "leaves": [{"lower": _vec(l.lower), "upper": _vec(l.upper), "value": _num(l.value)}
                           for l in t.leaves],
                "nodes": [[f, _num(thr), left, right] for f, thr, left, right in t.nodes],
            }
            for w, t in zip(clf.tree_weights, clf.trees)
        ]}
    else:
        raise TypeError(f"cannot serialise {type(clf).__name__}")
    if features is not None:
        doc["features"] = list(features)
    return doc


def model_from_dict(doc) -> Classifier:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ModelFormatError("model document needs a 'kind' field")
    kind = doc["kind"]
    try:
        if kind == "linear":
            w = doc["weights"]
            return LinearModel(_parse_vec(w["coef"], "coef"), _parse_num(w["intercept"], "intercept"))
        if kind == "relu_net":
            w = doc["weights"]
            hidden = np.array([_parse_vec(r, "hidden") for r in w["hidden"]])
            return ReluNetwork(hidden, _parse_vec(w["hidden_bias"], "hidden_bias"),
                               _parse_vec(w["output"], "output"), _parse_num(w["output_bias"], "output_bias"))
        if kind == "tree_ensemble":
            D = int(doc["n_features"])
            trees, weights = [], []
            for t in doc["trees"]:
                leaves = tuple(Leaf(_parse_vec(l["lower"], "lower"), _parse_vec(l["upper"], "upper"),
                                    _parse_num(l["value"], "value")) for l in t["leaves"])
                nodes = tuple((int(f), _parse_num(thr, "threshold"), int(a), int(b))
                              for f, thr, a, b in t.get("nodes", []))
                trees.append(Tree(leaves, nodes))
                weights.append(_parse_num(t["weight"], "weight"))
            return TreeEnsemble(tuple(trees), np.array(weights), D)
    except (KeyError, TypeError, IndexError) as exc:
        raise ModelFormatError(f"malformed {kind} model: {exc}") from exc
    raise ModelFormatError(f"unknown model kind {kind!r}")


def save_model(clf: Classifier, path, features=None, extra=None):
    doc = model_to_dict(clf, features)
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_document(path) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: {exc}") from exc


def load_model(path) -> Classifier:
    return model_from_dict(load_document(path))
