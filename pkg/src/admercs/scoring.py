"""Noisy-OR aggregation and the interleaved instance/context score updates.

Every training instance sits in exactly one leaf (context) per tree. The
per-context evidence ``v = lam + (1 - lam) * (1 - omega)`` feeds a noisy-OR
for the instance score ``delta``; context scores ``lam`` are a noisy-AND
over the member instances' ``delta``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

_CLAMP = 1e-300
DEFAULT_TOL = 1e-6


def _log_survival(ps: np.ndarray, gamma: float) -> np.ndarray:
    """``ln(1 - gamma * p)`` clamped to ``[ln 1e-300, 0]``."""
    q = np.clip(1.0 - gamma * np.asarray(ps, dtype=np.float64), _CLAMP, 1.0)
    return np.log(q)


def noisy_or(ps, gamma: float = 1.0, axis: int | None = None) -> np.ndarray | float:
    """``1 - prod(1 - gamma * p)``, accumulated in log space.

    An empty input gives 0. With ``axis`` set, reduces along that axis.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    logs = _log_survival(ps, gamma)
    if axis is None:
        return float(-np.expm1(logs.sum())) + 0.0
    return -np.expm1(logs.sum(axis=axis)) + 0.0  # + 0.0 turns -0.0 into 0.0


def context_evidence(lam, omega):
    """Evidence that an instance is anomalous given one of its contexts."""
    lam = np.asarray(lam, dtype=np.float64)
    return lam + (1.0 - lam) * (1.0 - np.asarray(omega, dtype=np.float64))


@dataclass(frozen=True)
class ScoringParams:
    gamma_delta: float = 0.2
    gamma_lambda: float = 0.5
    n_iterations: int = 10
    rho: float = 0.7
    tol: float = DEFAULT_TOL

    def __post_init__(self) -> None:
        for name in ("gamma_delta", "gamma_lambda", "rho"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {value}")
        if self.n_iterations < 1:
            raise ValueError(f"n_iterations must be >= 1, got {self.n_iterations}")


@dataclass(frozen=True)
class ContextIndex:
    """Flat view of all (tree, leaf) contexts and the training ``omega`` values.

    Attributes:
        contexts: ``(tree id, leaf id)`` per global context id.
        membership: N x M global context id of each instance in each tree.
        omega: N x M likelihood of each instance in its context of each tree.
    """

    contexts: tuple[tuple[int, int], ...]
    membership: np.ndarray
    omega: np.ndarray

    def __post_init__(self) -> None:
        if self.membership.shape != self.omega.shape:
            raise ValueError("membership and omega must have the same shape")
        if self.omega.size and (self.omega.min() < 0.0 or self.omega.max() > 1.0):
            raise ValueError("omega entries must lie in [0, 1]")

    @property
    def n_contexts(self) -> int:
        return len(self.contexts)

    @property
    def n_instances(self) -> int:
        return self.membership.shape[0]

    def members(self, context: int) -> np.ndarray:
        return np.nonzero((self.membership == context).any(axis=1))[0]

    @classmethod
    def from_leaves(cls, leaf_ids: np.ndarray, omega: np.ndarray, n_leaves: list[int]) -> "ContextIndex":
        """Build from per-tree leaf ids (N x M) and the leaf count of every tree."""
        offsets = np.concatenate([[0], np.cumsum(n_leaves)[:-1]]).astype(np.intp)
        contexts = tuple((t, l) for t, n in enumerate(n_leaves) for l in range(n))
        return cls(contexts, np.asarray(leaf_ids, dtype=np.intp) + offsets[None, :],
                   np.asarray(omega, dtype=np.float64))


@dataclass(frozen=True)
class ScoreState:
    delta: np.ndarray
    lam: np.ndarray
    iterations: int = 0


def update_delta(lam: np.ndarray, index: ContextIndex, gamma_delta: float) -> np.ndarray:
    v = context_evidence(lam[index.membership], index.omega)
    return noisy_or(v, gamma_delta, axis=1)


def update_lambda(delta: np.ndarray, index: ContextIndex, gamma_lambda: float) -> np.ndarray:
    """``1 - noisy_or({1 - delta_i}; gamma)`` over each context's members.

    Computed directly as ``exp(sum ln(1 - gamma (1 - delta_i)))`` so that
    the gamma = 1 case is the plain product of the member deltas.
    """
    logs = _log_survival(1.0 - delta, gamma_lambda)
    per_ctx = np.bincount(index.membership.ravel(),
                          weights=np.repeat(logs, index.membership.shape[1]),
                          minlength=index.n_contexts)
    return np.exp(per_ctx)


def run_iterations(index: ContextIndex, params: ScoringParams, lam0: np.ndarray | None = None) -> ScoreState:
    """Alternate delta and lambda updates, starting from all-normal contexts.

    Stops after ``params.n_iterations`` rounds or as soon as neither vector
    moves by more than ``params.tol``.
    """
    lam = np.zeros(index.n_contexts) if lam0 is None else np.asarray(lam0, dtype=np.float64).copy()
    delta = np.zeros(index.n_instances)
    it = 0
    for it in range(1, params.n_iterations + 1):
        new_delta = update_delta(lam, index, params.gamma_delta)
        new_lam = update_lambda(new_delta, index, params.gamma_lambda)
        moved = max(np.max(np.abs(new_delta - delta), initial=0.0), np.max(np.abs(new_lam - lam), initial=0.0))
        delta, lam = new_delta, new_lam
        if it > 1 and moved < params.tol:
            break
    logger.debug("score iterations: %d", it)
    return ScoreState(delta, lam, it)
