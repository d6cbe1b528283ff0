"""From-scratch regression forest.

CART regression trees grown by exact variance-reduction splitting:
candidate thresholds are the midpoints between consecutive distinct
sorted feature values within the node, the best split maximizes the
sum-of-squares improvement, and ties break to the lowest feature index
then the smallest threshold. Feature orders are sorted once per tree
and maintained through stable partitions, so node work is linear.

The growth and prediction loops are compiled with numba for speed; all
randomness (bootstrap rows, per-node feature subsets) comes from the
package's counter-based streams, so fits are bit-reproducible and
independent of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .rng import GAMMA, MIX_A, MIX_B, RngStream, derive_stream

_U64 = np.uint64
_GAMMA_U = np.uint64(GAMMA)
_MIX_A_U = np.uint64(MIX_A)
_MIX_B_U = np.uint64(MIX_B)
_ONE_U = np.uint64(1)


@njit(cache=True)
def _nb_mix64(z):
    z = (z ^ (z >> _U64(30))) * _MIX_A_U
    z = (z ^ (z >> _U64(27))) * _MIX_B_U
    return z ^ (z >> _U64(31))


@njit(cache=True)
def _nb_draw(key, counter):
    """Draw ``counter`` of the stream with ``key``; matches Sampler.raw."""
    return _nb_mix64(key + (counter + _ONE_U) * _GAMMA_U)


@njit(cache=True)
def _grow_tree(X, y, boot, max_depth, min_leaf, mtry, key):
    """Grow one tree on the bootstrap sample ``X[boot], y[boot]``.

    Returns (feature, threshold, left, right, value, n_nodes); leaves
    have left = right = -1. ``max_depth`` < 0 means unlimited. ``key``
    seeds the per-node feature subsampling when mtry < p.
    """
    n = boot.shape[0]
    p = X.shape[1]

    Xb = np.empty((n, p))
    yb = np.empty(n)
    for i in range(n):
        bi = boot[i]
        for j in range(p):
            Xb[i, j] = X[bi, j]
        yb[i] = y[bi]

    # Per-feature id orderings, maintained through stable partitions.
    order = np.empty((p, n), dtype=np.int64)
    col = np.empty(n)
    for f in range(p):
        for i in range(n):
            col[i] = Xb[i, f]
        order[f] = np.argsort(col)

    cap = 2 * n
    feat = np.full(cap, -1, dtype=np.int64)
    thr = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    val = np.zeros(cap)

    stack_lo = np.empty(cap, dtype=np.int64)
    stack_hi = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    stack_node = np.empty(cap, dtype=np.int64)
    scratch = np.empty(n, dtype=np.int64)
    goes_left = np.empty(n, dtype=np.bool_)
    pool = np.empty(p, dtype=np.int64)

    counter = _U64(0)
    n_nodes = 1
    sp = 0
    stack_lo[0], stack_hi[0], stack_depth[0], stack_node[0] = 0, n, 0, 0
    sp = 1

    while sp > 0:
        sp -= 1
        lo, hi = stack_lo[sp], stack_hi[sp]
        depth, node = stack_depth[sp], stack_node[sp]
        n_node = hi - lo

        row0 = order[0]
        total = 0.0
        y_min = yb[row0[lo]]
        y_max = y_min
        for i in range(lo, hi):
            v = yb[row0[i]]
            total += v
            if v < y_min:
                y_min = v
            if v > y_max:
                y_max = v
        val[node] = total / n_node

        if y_min == y_max:
            val[node] = y_min
            continue
        if n_node < 2 * min_leaf:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue

        # Feature candidates, ascending for deterministic tie-breaking.
        if mtry >= p:
            n_feats = p
            for j in range(p):
                pool[j] = j
        else:
            for j in range(p):
                pool[j] = j
            for j in range(mtry):
                r = _nb_draw(key, counter)
                counter += _ONE_U
                k = j + int(r % _U64(p - j))
                pool[j], pool[k] = pool[k], pool[j]
            n_feats = mtry
            # insertion sort of the chosen prefix
            for a in range(1, n_feats):
                v = pool[a]
                b = a - 1
                while b >= 0 and pool[b] > v:
                    pool[b + 1] = pool[b]
                    b -= 1
                pool[b + 1] = v

        base_obj = total * total / n_node
        best_obj = base_obj
        best_f = -1
        best_thr = 0.0
        for fi in range(n_feats):
            f = pool[fi]
            row = order[f]
            s_left = 0.0
            for i in range(lo, hi - 1):
                rid = row[i]
                s_left += yb[rid]
                n_left = i - lo + 1
                v = Xb[rid, f]
                v_next = Xb[row[i + 1], f]
                if v == v_next:
                    continue
                n_right = n_node - n_left
                if n_left < min_leaf or n_right < min_leaf:
                    continue
                s_right = total - s_left
                obj = s_left * s_left / n_left + s_right * s_right / n_right
                if obj > best_obj:
                    best_obj = obj
                    best_f = f
                    best_thr = 0.5 * (v + v_next)

        if best_f < 0:
            continue

        for i in range(lo, hi):
            rid = row0[i]
            goes_left[rid] = Xb[rid, best_f] <= best_thr
        n_left = 0
        for f in range(p):
            row = order[f]
            k1 = lo
            nr = 0
            for i in range(lo, hi):
                rid = row[i]
                if goes_left[rid]:
                    row[k1] = rid
                    k1 += 1
                else:
                    scratch[nr] = rid
                    nr += 1
            for i in range(nr):
                row[k1 + i] = scratch[i]
            n_left = k1 - lo

        feat[node] = best_f
        thr[node] = best_thr
        lchild = n_nodes
        rchild = n_nodes + 1
        n_nodes += 2
        left[node] = lchild
        right[node] = rchild
        stack_lo[sp], stack_hi[sp] = lo, lo + n_left
        stack_depth[sp], stack_node[sp] = depth + 1, lchild
        sp += 1
        stack_lo[sp], stack_hi[sp] = lo + n_left, hi
        stack_depth[sp], stack_node[sp] = depth + 1, rchild
        sp += 1

    return feat[:n_nodes], thr[:n_nodes], left[:n_nodes], right[:n_nodes], val[:n_nodes]


@njit(cache=True)
def _predict_rows(feat, thr, left, right, val, roots, X):
    n_rows = X.shape[0]
    n_trees = roots.shape[0]
    out = np.zeros(n_rows)
    for t in range(n_trees):
        root = roots[t]
        for r in range(n_rows):
            node = root
            while left[node] >= 0:
                if X[r, feat[node]] <= thr[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[r] += val[node]
    return out / n_trees


@dataclass(frozen=True)
class ForestParams:
    """Forest hyperparameters plus the stream that drives fitting."""

    seed: RngStream
    n_trees: int = 200
    max_depth: Optional[int] = None
    min_samples_leaf: int = 5
    feature_fraction: float = 1.0
    bootstrap: bool = True

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be positive, got {self.n_trees}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError(f"max_depth must be positive, got {self.max_depth}")
        if self.min_samples_leaf < 1:
            raise ValueError(
                f"min_samples_leaf must be positive, got {self.min_samples_leaf}"
            )
        if not 0.0 < self.feature_fraction <= 1.0:
            raise ValueError(
                f"feature_fraction must lie in (0,1], got {self.feature_fraction}"
            )


@dataclass(frozen=True)
class RegressionForest:
    """Fitted forest, flattened into parallel node arrays."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray
    feature_count: int
    y_min: float
    y_max: float

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        if X.shape[1] != self.feature_count:
            raise ValueError(
                f"expected {self.feature_count} features, got {X.shape[1]}"
            )
        return _predict_rows(
            self.feature, self.threshold, self.left, self.right,
            self.value, self.roots, X,
        )

    def predict_one(self, x) -> float:
        return float(self.predict(np.asarray(x, dtype=np.float64).reshape(1, -1))[0])


def fit_regression_forest(
    features: np.ndarray, targets: np.ndarray, params: ForestParams
) -> RegressionForest:
    """Fit ``params.n_trees`` CART trees on (features, targets).

    Tree j draws its bootstrap rows from child stream (j, 0) and its
    per-node feature subsets from the key of child stream (j, 1), so
    any subset of trees can be refit independently with identical
    results.
    """
    X = np.ascontiguousarray(np.asarray(features, dtype=np.float64))
    y = np.ascontiguousarray(np.asarray(targets, dtype=np.float64))
    if X.ndim != 2:
        raise ValueError(f"features must be 2-dimensional, got shape {X.shape}")
    n, p = X.shape
    if y.shape != (n,):
        raise ValueError(f"targets shape {y.shape} does not match {n} rows")
    if n < 1:
        raise ValueError("training set is empty")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("training data contains non-finite values")

    mtry = int(np.ceil(params.feature_fraction * p))
    mtry = min(max(mtry, 1), p)
    max_depth = -1 if params.max_depth is None else params.max_depth

    feats, thrs, lefts, rights, vals, roots = [], [], [], [], [], []
    offset = 0
    for j in range(params.n_trees):
        tree_stream = derive_stream(params.seed, j)
        if params.bootstrap:
            boot = derive_stream(tree_stream, 0).sampler().integers(n, n)
        else:
            boot = np.arange(n, dtype=np.int64)
        key = _U64(derive_stream(tree_stream, 1).key())
        f, t, l, r, v = _grow_tree(
            X, y, boot, max_depth, params.min_samples_leaf, mtry, key
        )
        shift = (l >= 0).astype(np.int64) * offset
        feats.append(f)
        thrs.append(t)
        lefts.append(l + shift)
        rights.append(r + (r >= 0).astype(np.int64) * offset)
        vals.append(v)
        roots.append(offset)
        offset += f.shape[0]

    return RegressionForest(
        feature=np.concatenate(feats),
        threshold=np.concatenate(thrs),
        left=np.concatenate(lefts),
        right=np.concatenate(rights),
        value=np.concatenate(vals),
        roots=np.array(roots, dtype=np.int64),
        feature_count=p,
        y_min=float(y.min()),
        y_max=float(y.max()),
    )


def predict_forest(forest: RegressionForest, x) -> float:
    """Prediction for a single feature vector."""
    return forest.predict_one(x)


def dump_forest(forest: RegressionForest, path) -> None:
    """Write the forest as flat text, one node per line.

    Columns: tree_id node_id kind feature threshold_or_value left right
    (children -1 for leaves, node ids local to the tree). Debugging
    format only; not stability-guaranteed.
    """
    with open(path, "w") as fh:
        fh.write(f"# forest feature_count={forest.feature_count} "
                 f"trees={len(forest.roots)} "
                 f"y_min={forest.y_min:.17g} y_max={forest.y_max:.17g}\n")
        bounds = list(forest.roots) + [forest.feature.shape[0]]
        for t in range(len(forest.roots)):
            base = bounds[t]
            for node in range(base, bounds[t + 1]):
                local = node - base
                if forest.left[node] < 0:
                    fh.write(
                        f"{t} {local} leaf -1 {forest.value[node]:.17g} -1 -1\n"
                    )
                else:
                    fh.write(
                        f"{t} {local} split {forest.feature[node]} "
                        f"{forest.threshold[node]:.17g} "
                        f"{forest.left[node] - base} {forest.right[node] - base}\n"
                    )


def load_forest(path) -> RegressionForest:
    with open(path) as fh:
        header = fh.readline().split()
        meta = dict(kv.split("=") for kv in header[2:])
        feature_count = int(meta["feature_count"])
        y_min, y_max = float(meta["y_min"]), float(meta["y_max"])
        rows = [line.split() for line in fh if line.strip()]

    n = len(rows)
    feature = np.full(n, -1, dtype=np.int64)
    threshold = np.zeros(n)
    left = np.full(n, -1, dtype=np.int64)
    right = np.full(n, -1, dtype=np.int64)
    value = np.zeros(n)
    roots = []
    tree_base = {}
    for i, row in enumerate(rows):
        t, local, kind = int(row[0]), int(row[1]), row[2]
        if local == 0:
            tree_base[t] = i
            roots.append(i)
        base = tree_base[t]
        if kind == "leaf":
            value[i] = float(row[4])
        else:
            feature[i] = int(row[3])
            threshold[i] = float(row[4])
            left[i] = base + int(row[5])
            right[i] = base + int(row[6])
    return RegressionForest(
        feature=feature,
        threshold=threshold,
        left=left,
        right=right,
        value=value,
        roots=np.array(roots, dtype=np.int64),
        feature_count=feature_count,
        y_min=y_min,
        y_max=y_max,
    )
