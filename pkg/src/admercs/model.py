"""The fitted detector: tree ensemble + per-node likelihoods + context scores."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from admercs.data import AttributeMeta, DataError, Dataset
from admercs.density import LikelihoodModel, fit_model
from admercs.scoring import ContextIndex, ScoreState, ScoringParams, context_evidence, noisy_or, run_iterations
from admercs.trees import Tree, TreeParams, apply, learn_ensemble, resolve_threads

logger = logging.getLogger(__name__)


@dataclass
class ADMercs:
    """Unsupervised anomaly detector.

    ``fit`` learns one tree per attribute, fits a likelihood model at every
    scoring node and runs the delta/lambda iterations on the training set.
    Higher scores mean more anomalous.

    Example:
        >>> model = ADMercs().fit(dataset)          # doctest: +SKIP
        >>> model.delta_[:5]                        # doctest: +SKIP
    """

    tree_params: TreeParams = field(default_factory=TreeParams)
    scoring: ScoringParams = field(default_factory=ScoringParams)
    seed: int | None = None
    threads: int | None = None

    attributes: tuple[AttributeMeta, ...] = ()
    trees: list[Tree] = field(default_factory=list)
    # likelihoods[t][node_id] for every scoring node of tree t
    likelihoods: list[dict[int, LikelihoodModel]] = field(default_factory=list)
    lam_: np.ndarray | None = None
    delta_: np.ndarray | None = None
    n_iter_: int = 0

    # ----------------------------------------------------------------- fit
    def fit(self, d: Dataset) -> "ADMercs":
        self.attributes = d.attributes
        self.trees = learn_ensemble(d, self.tree_params, self.seed, resolve_threads(self.threads))
        self.likelihoods = [self._fit_likelihoods(d, t) for t in self.trees]
        state = self.score_state(d)
        self.lam_, self.delta_, self.n_iter_ = state.lam, state.delta, state.iterations
        logger.info("fitted %d trees, %d contexts, %d iterations",
                    len(self.trees), state.lam.size, state.iterations)
        return self

    def _fit_likelihoods(self, d: Dataset, tree: Tree) -> dict[int, LikelihoodModel]:
        meta = d.attributes[tree.target]
        y = d.column(tree.target)
        value_range = float(y.max() - y.min())
        n_cat = len(meta.categories) if meta.is_nominal else None
        out: dict[int, LikelihoodModel] = {}
        for nid in sorted(set(tree.scoring_node)):
            members = tree.nodes[nid].members
            out[nid] = fit_model(y[members], meta.is_nominal, self.scoring.rho, n_cat, value_range)
        return out

    # ------------------------------------------------------------- scoring
    @property
    def n_contexts(self) -> int:
        return sum(t.n_leaves for t in self.trees)

    @property
    def context_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum([t.n_leaves for t in self.trees])[:-1]]).astype(np.intp)

    def _check(self, X: np.ndarray) -> np.ndarray:
        if not self.trees:
            raise RuntimeError("model is not fitted")
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != len(self.attributes):
            raise DataError(f"expected {len(self.attributes)} attributes, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise DataError("instances contain non-finite cells")
        for a in self.attributes:
            if a.is_nominal and np.any(X[:, a.index] != np.round(X[:, a.index])):
                raise DataError(f"attribute {a.name!r} is nominal but got a non-integer code")
        return X

    def leaf_matrix(self, X: np.ndarray) -> np.ndarray:
        """N x M leaf id of each row in each tree."""
        X = self._check(X)
        return np.column_stack([apply(t, X) for t in self.trees])

    def omega_matrix(self, X: np.ndarray, leaves: np.ndarray | None = None) -> np.ndarray:
        """N x M squashed likelihood of each row's target value in each tree."""
        X = self._check(X)
        if leaves is None:
            leaves = self.leaf_matrix(X)
        out = np.ones(leaves.shape, dtype=np.float64)
        for t, tree in enumerate(self.trees):
            scoring = np.asarray(tree.scoring_node)[leaves[:, t]]
            for nid in np.unique(scoring):
                rows = np.nonzero(scoring == nid)[0]
                out[rows, t] = self.likelihoods[t][int(nid)].omega(X[rows, tree.target])
        return out

    def context_index(self, X: np.ndarray) -> ContextIndex:
        leaves = self.leaf_matrix(X)
        return ContextIndex.from_leaves(leaves, self.omega_matrix(X, leaves), [t.n_leaves for t in self.trees])

    def score_state(self, d: Dataset | np.ndarray, params: ScoringParams | None = None) -> ScoreState:
        """Run the delta/lambda iterations on a dataset (training-mode scoring)."""
        X = d.values if isinstance(d, Dataset) else d
        return run_iterations(self.context_index(X), params or self.scoring)

    def score(self, d: Dataset | np.ndarray) -> np.ndarray:
        return self.score_state(d).delta

    def evidence(self, X: np.ndarray) -> np.ndarray:
        """N x M per-tree evidence using the frozen context scores."""
        leaves = self.leaf_matrix(X)
        lam = self.lam_[leaves + self.context_offsets[None, :]]
        return context_evidence(lam, self.omega_matrix(X, leaves))

    def score_new(self, X: np.ndarray) -> np.ndarray:
        """Scores for unseen rows, with the training context scores frozen."""
        return noisy_or(self.evidence(X), self.scoring.gamma_delta, axis=1)

    def score_new_instance(self, x: np.ndarray) -> float:
        return float(self.score_new(np.atleast_2d(x))[0])

    def with_scoring(self, **changes) -> "ADMercs":
        """Shallow copy with different scoring parameters (trees are shared)."""
        return replace(self, scoring=replace(self.scoring, **changes))
