"""CART-style trees, one per target attribute.

Each tree predicts its target from all other attributes. Leaves serve as
contexts; every leaf also records the node whose likelihood model scores it
(the lowest-impurity node on its root path).
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from admercs.data import Dataset

logger = logging.getLogger(__name__)

# Numeric slack when comparing impurity sums computed along different paths.
_EPS = 1e-12


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 10
    min_samples_leaf_frac: float = 0.02
    min_impurity_decrease: float = 0.001

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if not 0.0 < self.min_samples_leaf_frac <= 0.5:
            raise ValueError(f"min_samples_leaf_frac must be in (0, 0.5], got {self.min_samples_leaf_frac}")
        if self.min_impurity_decrease < 0:
            raise ValueError(f"min_impurity_decrease must be >= 0, got {self.min_impurity_decrease}")

    def min_samples_leaf(self, n: int) -> int:
        # round() first so that e.g. 0.05 * 1000 does not ceil to 51
        return max(1, math.ceil(round(self.min_samples_leaf_frac * n, 9)))


@dataclass(frozen=True)
class Split:
    """Numeric splits send ``x <= threshold`` left; nominal ones send ``x == category`` left."""

    attribute: int
    threshold: float | None = None
    category: int | None = None

    @property
    def is_nominal(self) -> bool:
        return self.category is not None

    def goes_left(self, values: np.ndarray) -> np.ndarray:
        if self.category is not None:
            return values == self.category
        return values <= self.threshold


@dataclass
class TreeNode:
    node_id: int
    depth: int
    impurity: float
    members: np.ndarray
    parent: int | None = None
    split: Split | None = None
    left: int | None = None
    right: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.split is None


@dataclass
class Tree:
    target: int
    nodes: list[TreeNode]
    leaves: list[int] = field(default_factory=list)
    scoring_node: list[int] = field(default_factory=list)

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def leaf_id(self, node_id: int) -> int:
        return self._leaf_index[node_id]

    def __post_init__(self) -> None:
        if not self.leaves:
            self.leaves = [n.node_id for n in self.nodes if n.is_leaf]
        self._leaf_index = {nid: i for i, nid in enumerate(self.leaves)}

    def path(self, node_id: int) -> list[int]:
        """Node ids from the root down to ``node_id`` inclusive."""
        out = []
        cur: int | None = node_id
        while cur is not None:
            out.append(cur)
            cur = self.nodes[cur].parent
        return out[::-1]

    def split_attributes(self) -> set[int]:
        return {n.split.attribute for n in self.nodes if n.split is not None}

    def structure(self) -> list[tuple]:
        """Hashable summary used for structural equality checks."""
        return [
            (n.node_id, n.depth, n.parent, n.left, n.right, n.split, round(n.impurity, 15), tuple(n.members.tolist()))
            for n in self.nodes
        ]


def impurity(y: np.ndarray, nominal: bool) -> float:
    """Gini for nominal targets, population variance for numeric ones."""
    if y.size == 0:
        return 0.0
    if nominal:
        _, counts = np.unique(y, return_counts=True)
        if counts.size == 1:
            return 0.0
        p = counts / y.size
        return float(1.0 - np.sum(p * p))
    if y.max() == y.min():
        return 0.0
    return float(np.var(y))


@dataclass
class _Candidate:
    decrease: float
    split: Split


def _best_numeric(x: np.ndarray, y: np.ndarray, attrs: np.ndarray, nominal_target: bool,
                  n_classes: int, parent_imp: float, min_leaf: int) -> list[_Candidate | None]:
    """Best threshold per numeric attribute, all attributes at once.

    ``x`` is the m x A block of candidate columns for the node's members.
    """
    m = x.shape[0]
    order = np.argsort(x, axis=0, kind="stable")
    xs = np.take_along_axis(x, order, axis=0)
    pos = np.arange(min_leaf - 1, m - min_leaf)  # last row index of the left part
    if pos.size == 0:
        return [None] * len(attrs)
    n_left = (pos + 1).astype(np.float64)[:, None]
    n_right = m - n_left
    if nominal_target:
        onehot = np.zeros((m, n_classes))
        onehot[np.arange(m), y.astype(np.intp)] = 1.0
        cum = np.cumsum(onehot[order], axis=0)  # m x A x K
        total = cum[-1]
        cl = cum[pos]
        cr = total[None] - cl
        child = 1.0 - (np.sum(cl * cl, axis=2) / n_left + np.sum(cr * cr, axis=2) / n_right) / m
    else:
        yc = y - y.mean()
        ys = yc[order]
        s1 = np.cumsum(ys, axis=0)
        s2 = np.cumsum(ys * ys, axis=0)
        t1, t2 = s1[-1], s2[-1]
        l1, l2 = s1[pos], s2[pos]
        r1, r2 = t1 - l1, t2 - l2
        child = ((l2 - l1 * l1 / n_left) + (r2 - r1 * r1 / n_right)) / m
    decrease = parent_imp - child
    valid = xs[pos] < xs[pos + 1]
    decrease = np.where(valid, decrease, -np.inf)
    best = np.argmax(decrease, axis=0)  # first max: lowest threshold
    out: list[_Candidate | None] = []
    for k, a in enumerate(attrs):
        dec = decrease[best[k], k]
        if not np.isfinite(dec):
            out.append(None)
            continue
        i = pos[best[k]]
        lo, hi = xs[i, k], xs[i + 1, k]
        thr = 0.5 * (lo + hi)
        if not lo <= thr < hi:
            thr = lo
        out.append(_Candidate(float(dec), Split(int(a), threshold=float(thr))))
    return out


def _best_nominal(col: np.ndarray, y: np.ndarray, attr: int, nominal_target: bool, n_classes: int,
                  parent_imp: float, min_leaf: int) -> _Candidate | None:
    """Best one-category-versus-rest split of a nominal attribute."""
    m = col.size
    codes = col.astype(np.intp)
    n_cat = int(codes.max()) + 1
    n_in = np.bincount(codes, minlength=n_cat).astype(np.float64)
    n_out = m - n_in
    ok = (n_in >= min_leaf) & (n_out >= min_leaf)
    if not ok.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        if nominal_target:
            table = np.zeros((n_cat, n_classes))
            np.add.at(table, (codes, y.astype(np.intp)), 1.0)
            rest = table.sum(axis=0)[None] - table
            child = 1.0 - (np.sum(table**2, axis=1) / n_in + np.sum(rest**2, axis=1) / n_out) / m
        else:
            yc = y - y.mean()
            s1 = np.bincount(codes, weights=yc, minlength=n_cat)
            s2 = np.bincount(codes, weights=yc * yc, minlength=n_cat)
            r1, r2 = yc.sum() - s1, (yc * yc).sum() - s2
            child = ((s2 - s1 * s1 / n_in) + (r2 - r1 * r1 / n_out)) / m
    decrease = np.where(ok, parent_imp - child, -np.inf)
    c = int(np.argmax(decrease))
    return _Candidate(float(decrease[c]), Split(attr, category=c))


def find_best_split(X: np.ndarray, y: np.ndarray, candidates: np.ndarray, nominal_cols: np.ndarray,
                    nominal_target: bool, n_classes: int, min_leaf: int) -> _Candidate | None:
    """Exhaustive best split of the rows of ``X``/``y`` over ``candidates``.

    Ties go to the lowest attribute index, then the lowest threshold or
    category index.
    """
    parent_imp = impurity(y, nominal_target)
    if X.shape[0] < 2 * min_leaf:
        return None
    num = candidates[~nominal_cols[candidates]]
    found: dict[int, _Candidate | None] = {}
    if num.size:
        for a, cand in zip(num, _best_numeric(X[:, num], y, num, nominal_target, n_classes, parent_imp, min_leaf)):
            found[int(a)] = cand
    for a in candidates[nominal_cols[candidates]]:
        found[int(a)] = _best_nominal(X[:, a], y, int(a), nominal_target, n_classes, parent_imp, min_leaf)
    best: _Candidate | None = None
    for a in sorted(found):
        cand = found[a]
        if cand is not None and (best is None or cand.decrease > best.decrease):
            best = cand
    return best


def learn_tree(d: Dataset, target: int, params: TreeParams = TreeParams(), seed: int | None = None) -> Tree:
    """Greedy top-down induction of the tree predicting attribute ``target``.

    Induction is exhaustive and deterministic; ``seed`` is accepted so that
    callers can thread one seed through every stage.
    """
    if not 0 <= target < d.n_attributes:
        raise IndexError(f"target {target} out of range for {d.n_attributes} attributes")
    X = d.values
    y_all = X[:, target]
    nominal_cols = d.nominal_mask
    nominal_target = bool(nominal_cols[target])
    n_classes = len(d.attributes[target].categories) if nominal_target else 0
    candidates = np.array([a for a in range(d.n_attributes) if a != target], dtype=np.intp)
    min_leaf = params.min_samples_leaf(d.n_instances)

    nodes: list[TreeNode] = []

    def grow(members: np.ndarray, depth: int, parent: int | None) -> int:
        y = y_all[members]
        node = TreeNode(len(nodes), depth, impurity(y, nominal_target), members, parent)
        nodes.append(node)
        if depth >= params.max_depth or node.impurity == 0.0:
            return node.node_id
        best = find_best_split(X[members], y, candidates, nominal_cols, nominal_target, n_classes, min_leaf)
        # the threshold applies to the decrease weighted by the node's share of the data
        weight = members.size / d.n_instances
        if best is None or best.decrease <= 0.0 or weight * best.decrease < params.min_impurity_decrease:
            return node.node_id
        go_left = best.split.goes_left(X[members, best.split.attribute])
        node.split = best.split
        node.left = grow(members[go_left], depth + 1, node.node_id)
        node.right = grow(members[~go_left], depth + 1, node.node_id)
        return node.node_id

    grow(np.arange(d.n_instances), 0, None)
    tree = Tree(target, nodes)
    return assign_scoring_nodes(tree)


def assign_scoring_nodes(tree: Tree) -> Tree:
    """Point each leaf at its lowest-impurity ancestor-or-self (deepest on ties)."""
    scoring = []
    for leaf in tree.leaves:
        best = None
        for nid in tree.path(leaf):
            if best is None or tree.nodes[nid].impurity <= tree.nodes[best].impurity:
                best = nid
        scoring.append(best)
    tree.scoring_node = scoring
    return tree


def apply(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Leaf id reached by every row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    out = np.empty(X.shape[0], dtype=np.intp)
    stack = [(0, np.arange(X.shape[0]))]
    while stack:
        nid, rows = stack.pop()
        node = tree.nodes[nid]
        if node.is_leaf:
            out[rows] = tree.leaf_id(nid)
            continue
        left = node.split.goes_left(X[rows, node.split.attribute])
        stack.append((node.left, rows[left]))
        stack.append((node.right, rows[~left]))
    return out


def route(tree: Tree, x: np.ndarray) -> int:
    """Leaf id for a single instance; unseen categories take the right branch."""
    nid = 0
    x = np.asarray(x, dtype=np.float64)
    while not tree.nodes[nid].is_leaf:
        node = tree.nodes[nid]
        nid = node.left if node.split.goes_left(x[node.split.attribute]) else node.right
    return tree.leaf_id(nid)


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("ADMERCS_THREADS")
        threads = int(env) if env else 1
    return max(1, threads)


def learn_ensemble(d: Dataset, params: TreeParams = TreeParams(), seed: int | None = None,
                   threads: int | None = None) -> list[Tree]:
    """One tree per attribute, tree ``j`` predicting attribute ``j``."""
    threads = resolve_threads(threads)
    targets = range(d.n_attributes)
    if threads == 1:
        trees = [learn_tree(d, t, params, seed) for t in targets]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(lambda t: learn_tree(d, t, params, seed), targets))
    logger.debug("learned %d trees, %d leaves total", len(trees), sum(t.n_leaves for t in trees))
    return trees
