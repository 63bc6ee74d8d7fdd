"""Human-readable explanations of instance scores and anomalous contexts.

An instance scores high because, in some tree, either its target value is
unlikely given the context (a *deviation*), or the context itself is
anomalous (high lambda). Both cases are described by the root-to-node path
of conditions in that tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from admercs.data import AttributeMeta
from admercs.density import HistModel, KdeModel, LikelihoodModel
from admercs.scoring import context_evidence
from admercs.trees import Tree

DEVIATION = "deviation"
ANOMALOUS_CONTEXT = "anomalous_context"
DEFAULT_LAMBDA_THRESHOLD = 0.5
TYPICAL_GRID = 512
_REFINE_TOL = 1e-6


@dataclass(frozen=True)
class Condition:
    attribute: str
    relation: str  # one of <=, >, =, !=
    value: float | str

    def __post_init__(self) -> None:
        if self.relation not in ("<=", ">", "=", "!="):
            raise ValueError(f"unknown relation {self.relation!r}")

    @property
    def is_numeric(self) -> bool:
        return self.relation in ("<=", ">")

    def holds(self, value: float | str) -> bool:
        if self.relation == "<=":
            return float(value) <= float(self.value)
        if self.relation == ">":
            return float(value) > float(self.value)
        if self.relation == "=":
            return value == self.value
        return value != self.value

    def render(self) -> str:
        value = f"{self.value:.4g}" if isinstance(self.value, float) else self.value
        return f"{self.attribute} {self.relation} {value}"


@dataclass(frozen=True)
class Typical:
    """Values whose squashed likelihood is 1: intervals or categories."""

    intervals: tuple[tuple[float, float], ...] = ()
    categories: tuple[str, ...] = ()

    def contains(self, value: float | str) -> bool:
        if self.categories:
            return value in self.categories
        return any(lo <= float(value) <= hi for lo, hi in self.intervals)

    def render(self) -> str:
        if self.categories:
            return " or ".join(self.categories)
        parts = [f"[{lo:.4g}, {hi:.4g}]" for lo, hi in self.intervals]
        return " or ".join(parts) if parts else "nothing"


@dataclass(frozen=True)
class Explanation:
    """Why one tree considers an instance anomalous.

    ``conditions`` describe the scoring node for a deviation and the leaf
    (the context) for an anomalous context. ``strength`` is the evidence
    ``v`` that the tree contributes to the instance score.
    """

    tree: int
    target: str
    kind: str
    strength: float
    conditions: tuple[Condition, ...]
    node_id: int
    observed: float | str | None = None
    omega: float | None = None
    typical: Typical | None = None
    lam: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError(f"strength must be in [0, 1], got {self.strength}")
        if self.kind == DEVIATION and not (self.omega is not None and self.omega < 1.0):
            raise ValueError("a deviation needs omega < 1")

    def to_dict(self) -> dict:
        out = {
            "tree": self.tree, "target": self.target, "kind": self.kind, "strength": self.strength,
            "node_id": self.node_id,
            "conditions": [{"attribute": c.attribute, "relation": c.relation, "value": c.value}
                           for c in self.conditions],
        }
        if self.kind == DEVIATION:
            out.update(observed=self.observed, omega=self.omega,
                       typical={"intervals": [list(iv) for iv in self.typical.intervals],
                                "categories": list(self.typical.categories)})
        else:
            out["lambda"] = self.lam
        return out


@dataclass(frozen=True)
class AnomalousContext:
    tree: int
    leaf: int
    target: str
    conditions: tuple[Condition, ...]
    members: np.ndarray = field(repr=False)
    lam: float = 0.0

    def to_dict(self) -> dict:
        return {"tree": self.tree, "leaf": self.leaf, "target": self.target, "lambda": self.lam,
                "conditions": merge_conditions(self.conditions), "members": self.members.tolist()}


def describe_node(tree: Tree, node_id: int, attributes: Sequence[AttributeMeta]) -> list[Condition]:
    """One condition per edge on the path from the root to ``node_id``."""
    out = []
    path = tree.path(node_id)
    for parent_id, child_id in zip(path, path[1:]):
        parent = tree.nodes[parent_id]
        split, meta = parent.split, attributes[parent.split.attribute]
        left = child_id == parent.left
        if split.is_nominal:
            out.append(Condition(meta.name, "=" if left else "!=", meta.categories[split.category]))
        else:
            out.append(Condition(meta.name, "<=" if left else ">", float(split.threshold)))
    return out


def merge_conditions(conditions: Sequence[Condition]) -> list[str]:
    """Render conditions with numeric bounds on one attribute merged into an interval."""
    bounds: dict[str, list[float]] = {}
    order: list[str] = []
    rendered: list[str] = []
    for c in conditions:
        if not c.is_numeric:
            rendered.append(c.render())
            continue
        if c.attribute not in bounds:
            bounds[c.attribute] = [-np.inf, np.inf]
            order.append(c.attribute)
            rendered.append(c.attribute)  # placeholder, filled below
        lo_hi = bounds[c.attribute]
        if c.relation == "<=":
            lo_hi[1] = min(lo_hi[1], float(c.value))
        else:
            lo_hi[0] = max(lo_hi[0], float(c.value))
    out = []
    for item in rendered:
        if item not in bounds:
            out.append(item)
            continue
        lo, hi = bounds[item]
        if np.isfinite(lo) and np.isfinite(hi):
            out.append(f"{lo:.4g} < {item} <= {hi:.4g}")
        elif np.isfinite(hi):
            out.append(f"{item} <= {hi:.4g}")
        else:
            out.append(f"{item} > {lo:.4g}")
    return out


def _refine(model: KdeModel, inside: float, outside: float, tol: float) -> float:
    """Bisection for the boundary of ``kappa >= tau`` between two grid points."""
    while abs(outside - inside) > tol:
        mid = 0.5 * (inside + outside)
        if model.kappa(mid)[0] >= model.tau:
            inside = mid
        else:
            outside = mid
    return inside


def typical_values(model: LikelihoodModel, meta: AttributeMeta | None = None) -> Typical:
    """Describe ``{v : omega(v) = 1}`` under one scoring node's model.

    Numeric models are scanned on a 512-point grid over the sample range
    widened by three bandwidths, plus the samples themselves; interval ends
    are refined by bisection.
    """
    if isinstance(model, HistModel):
        probs = model.counts / model.total
        codes = np.nonzero((probs >= model.tau) & (model.counts > 0))[0]
        names = [meta.categories[c] if meta is not None else str(c) for c in codes]
        return Typical(categories=tuple(names))
    lo = float(model.samples[0]) - 3.0 * model.bandwidth
    hi = float(model.samples[-1]) + 3.0 * model.bandwidth
    if model.tau <= 0.0:
        return Typical(intervals=((-np.inf, np.inf),))
    # the samples join the grid so that spikes narrower than a grid step are seen
    grid = np.union1d(np.linspace(lo, hi, TYPICAL_GRID), model.samples)
    inside = model.kappa(grid) >= model.tau
    tol = _REFINE_TOL * (hi - lo)
    intervals = []
    i = 0
    while i < grid.size:
        if not inside[i]:
            i += 1
            continue
        j = i
        while j + 1 < grid.size and inside[j + 1]:
            j += 1
        start = _refine(model, grid[i], grid[i - 1], tol) if i > 0 else grid[i]
        end = _refine(model, grid[j], grid[j + 1], tol) if j + 1 < grid.size else grid[j]
        intervals.append((float(start), float(end)))
        i = j + 1
    return Typical(intervals=tuple(intervals))


def _observed(meta: AttributeMeta, value: float) -> float | str:
    return meta.categories[int(value)] if meta.is_nominal else float(value)


def explain_instance(model, x: np.ndarray, top_k: int | None = None,
                     lambda_threshold: float = DEFAULT_LAMBDA_THRESHOLD) -> list[Explanation]:
    """Per-tree reasons behind the score of ``x``, strongest first.

    A tree whose context has ``lambda >= lambda_threshold`` yields an
    anomalous-context explanation; otherwise a tree where ``omega < 1``
    yields a deviation. Context scores are the ones frozen at fit time.
    """
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    leaves = model.leaf_matrix(x)[0]
    omegas = model.omega_matrix(x, leaves[None, :])[0]
    lams = model.lam_[leaves + model.context_offsets]
    strengths = context_evidence(lams, omegas)
    out: list[Explanation] = []
    for t, tree in enumerate(model.trees):
        meta = model.attributes[tree.target]
        leaf_node = tree.leaves[leaves[t]]
        if lams[t] >= lambda_threshold:
            out.append(Explanation(
                tree=t, target=meta.name, kind=ANOMALOUS_CONTEXT, strength=float(strengths[t]),
                conditions=tuple(describe_node(tree, leaf_node, model.attributes)), node_id=leaf_node,
                lam=float(lams[t]),
            ))
        elif omegas[t] < 1.0:
            nid = tree.scoring_node[leaves[t]]
            out.append(Explanation(
                tree=t, target=meta.name, kind=DEVIATION, strength=float(strengths[t]),
                conditions=tuple(describe_node(tree, nid, model.attributes)), node_id=nid,
                observed=_observed(meta, x[0, tree.target]), omega=float(omegas[t]),
                typical=typical_values(model.likelihoods[t][nid], meta), lam=float(lams[t]),
            ))
    out.sort(key=lambda e: (-e.strength, e.tree))
    return out[:top_k] if top_k is not None else out


def list_anomalous_contexts(model, lambda_threshold: float = DEFAULT_LAMBDA_THRESHOLD) -> list[AnomalousContext]:
    """Training contexts with ``lambda >= lambda_threshold``, highest lambda first."""
    out = []
    offsets = model.context_offsets
    for t, tree in enumerate(model.trees):
        for leaf, nid in enumerate(tree.leaves):
            lam = float(model.lam_[offsets[t] + leaf])
            if lam >= lambda_threshold:
                out.append(AnomalousContext(
                    tree=t, leaf=leaf, target=model.attributes[tree.target].name,
                    conditions=tuple(describe_node(tree, nid, model.attributes)),
                    members=np.asarray(tree.nodes[nid].members), lam=lam,
                ))
    out.sort(key=lambda c: (-c.lam, c.tree, c.leaf))
    return out


def render(e: Explanation) -> str:
    """One sentence in the style "instances that ... typically ... but this instance ..."."""
    where = " and ".join(merge_conditions(e.conditions)) or "(all instances)"
    if e.kind == ANOMALOUS_CONTEXT:
        return (f"[{e.strength:.3f}] instances that {where} form an anomalous group "
                f"(lambda = {e.lam:.3f}) and this instance is one of them")
    observed = f"{e.observed:.4g}" if isinstance(e.observed, float) else e.observed
    return (f"[{e.strength:.3f}] instances that {where} typically have {e.target} in "
            f"{e.typical.render()}, but this instance has {e.target} = {observed}")


def render_context(c: AnomalousContext) -> str:
    where = " and ".join(merge_conditions(c.conditions)) or "(all instances)"
    return f"[lambda {c.lam:.3f}] tree {c.target}: {c.members.size} instances that {where}"
