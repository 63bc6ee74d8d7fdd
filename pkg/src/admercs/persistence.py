"""Versioned JSON model files.

Floats are written with ``repr`` precision by the json module, so a saved
model reloads bit-for-bit. Only leaf member lists are stored; internal
node members are rebuilt as the union of their children.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from admercs.data import AttributeMeta, Kind
from admercs.density import HistModel, KdeModel, LikelihoodModel
from admercs.model import ADMercs
from admercs.scoring import ScoringParams
from admercs.trees import Split, Tree, TreeNode, TreeParams

FORMAT_NAME = "admercs-model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """The file is not a model file this version can read."""


def _split_to_dict(s: Split | None) -> dict | None:
    if s is None:
        return None
    if s.is_nominal:
        return {"attribute": s.attribute, "category": s.category}
    return {"attribute": s.attribute, "threshold": s.threshold}


def _tree_to_dict(t: Tree) -> dict:
    nodes = []
    for n in t.nodes:
        nodes.append({
            "id": n.node_id, "depth": n.depth, "impurity": n.impurity, "parent": n.parent,
            "split": _split_to_dict(n.split), "left": n.left, "right": n.right,
            "members": n.members.tolist() if n.is_leaf else None,
        })
    return {"target": t.target, "leaves": list(t.leaves), "scoring_node": [int(s) for s in t.scoring_node],
            "nodes": nodes}


def _tree_from_dict(obj: dict) -> Tree:
    nodes = []
    for raw in obj["nodes"]:
        s = raw["split"]
        split = None if s is None else Split(s["attribute"], s.get("threshold"), s.get("category"))
        members = np.asarray(raw["members"] if raw["members"] is not None else [], dtype=np.intp)
        nodes.append(TreeNode(raw["id"], raw["depth"], raw["impurity"], members, raw["parent"],
                              split, raw["left"], raw["right"]))
    # children always carry larger ids than their parent
    for n in reversed(nodes):
        if not n.is_leaf:
            n.members = np.sort(np.concatenate([nodes[n.left].members, nodes[n.right].members]))
    return Tree(obj["target"], nodes, list(obj["leaves"]), list(obj["scoring_node"]))


def _likelihood_to_dict(m: LikelihoodModel) -> dict:
    if isinstance(m, KdeModel):
        return {"kind": "kde", "samples": m.samples.tolist(), "bandwidth": m.bandwidth, "tau": m.tau, "rho": m.rho}
    return {"kind": "hist", "counts": m.counts.tolist(), "total": m.total, "tau": m.tau, "rho": m.rho}


def _likelihood_from_dict(obj: dict) -> LikelihoodModel:
    if obj["kind"] == "kde":
        samples = np.asarray(obj["samples"], dtype=np.float64)
        samples.setflags(write=False)
        return KdeModel(samples, obj["bandwidth"], obj["tau"], obj["rho"])
    if obj["kind"] == "hist":
        return HistModel(np.asarray(obj["counts"], dtype=np.int64), obj["total"], obj["tau"], obj["rho"])
    raise ModelFormatError(f"unknown likelihood kind {obj['kind']!r}")


def model_to_dict(model: ADMercs) -> dict:
    if not model.trees:
        raise ValueError("cannot save an unfitted model")
    tp, sp = model.tree_params, model.scoring
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "attributes": [{"name": a.name, "kind": a.kind.value, "categories": list(a.categories)}
                       for a in model.attributes],
        "tree_params": {"max_depth": tp.max_depth, "min_samples_leaf_frac": tp.min_samples_leaf_frac,
                        "min_impurity_decrease": tp.min_impurity_decrease},
        "scoring": {"gamma_delta": sp.gamma_delta, "gamma_lambda": sp.gamma_lambda,
                    "n_iterations": sp.n_iterations, "rho": sp.rho, "tol": sp.tol},
        "seed": model.seed,
        "n_iter": model.n_iter_,
        "trees": [_tree_to_dict(t) for t in model.trees],
        "likelihoods": [[{"node": nid, **_likelihood_to_dict(m)} for nid, m in sorted(lk.items())]
                        for lk in model.likelihoods],
        "lambda": model.lam_.tolist(),
        "delta": model.delta_.tolist(),
    }


def model_from_dict(obj: dict) -> ADMercs:
    if not isinstance(obj, dict) or obj.get("format") != FORMAT_NAME:
        raise ModelFormatError("not an admercs model file")
    if obj.get("version") != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model file version {obj.get('version')!r}; this build reads version {FORMAT_VERSION}")
    attrs = tuple(AttributeMeta(a["name"], Kind(a["kind"]), i, tuple(a["categories"]))
                  for i, a in enumerate(obj["attributes"]))
    model = ADMercs(TreeParams(**obj["tree_params"]), ScoringParams(**obj["scoring"]), seed=obj["seed"])
    model.attributes = attrs
    model.trees = [_tree_from_dict(t) for t in obj["trees"]]
    model.likelihoods = [{m["node"]: _likelihood_from_dict(m) for m in lk} for lk in obj["likelihoods"]]
    model.lam_ = np.asarray(obj["lambda"], dtype=np.float64)
    model.delta_ = np.asarray(obj["delta"], dtype=np.float64)
    model.n_iter_ = obj["n_iter"]
    if model.lam_.size != model.n_contexts:
        raise ModelFormatError(f"{model.lam_.size} context scores for {model.n_contexts} contexts")
    return model


def dumps(model: ADMercs) -> str:
    return json.dumps(model_to_dict(model), separators=(",", ":"), sort_keys=True) + "\n"


def loads(text: str) -> ADMercs:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    try:
        return model_from_dict(obj)
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"malformed model file: {type(exc).__name__}: {exc}") from None


def save_model(model: ADMercs, path: str | Path) -> None:
    Path(path).write_text(dumps(model), encoding="utf-8")


def load_model(path: str | Path) -> ADMercs:
    return loads(Path(path).read_text(encoding="utf-8"))
