from dataclasses import replace

import numpy as np
import pytest

from admercs.bench import generate
from admercs.data import AttributeMeta, Kind
from admercs.density import fit_model
from admercs.explain import (
    ANOMALOUS_CONTEXT,
    DEVIATION,
    Condition,
    describe_node,
    explain_instance,
    list_anomalous_contexts,
    merge_conditions,
    render,
    typical_values,
)
from admercs.model import ADMercs
from admercs.scoring import ScoringParams
from admercs.trees import TreeParams, learn_tree

from conftest import mixed_dataset
from test_density import bimodal_sample


@pytest.fixture(scope="module")
def synth_model():
    b = generate("synth-i", seed=11, index=5, n_instances=500)
    model = ADMercs(TreeParams(10, 0.02, 0.001), ScoringParams(0.9, 0.5, 10, 0.9)).fit(b.dataset)
    return model, b.dataset


def zoo_like():
    """``teeth`` is fully determined by ``eggs`` except for row 0."""
    eggs = ["yes"] * 50 + ["no"] * 50
    teeth = ["no"] * 50 + ["yes"] * 50
    teeth[0] = "yes"
    return mixed_dataset({"eggs": eggs, "feathers": ["f" if e == "yes" else "n" for e in eggs], "teeth": teeth})


class TestDescribeNode:
    def test_root_is_empty(self, synth_model):
        model, _ = synth_model
        assert describe_node(model.trees[0], 0, model.attributes) == []

    def test_edges_map_to_conditions(self):
        x = [0.1, 0.2, 0.8, 0.9] * 10
        c = ["a" if (i // 4) % 2 == 0 else "b" for i in range(40)]
        y = [10.0 * (v > 0.5) + 3.0 * (k == "a") for v, k in zip(x, c)]
        d = mixed_dataset({"x": x, "c": c, "y": y})
        tree = learn_tree(d, 2, TreeParams(min_samples_leaf_frac=0.05, min_impurity_decrease=0.0))
        left = tree.nodes[tree.root.left]
        assert tree.root.split.attribute == 0
        assert left.split.attribute == 1
        conds = describe_node(tree, left.left, d.attributes)
        assert conds == [Condition("x", "<=", 0.5), Condition("c", "=", "a")]
        assert describe_node(tree, left.right, d.attributes)[-1] == Condition("c", "!=", "a")

    def test_one_condition_per_edge(self, synth_model):
        model, _ = synth_model
        for tree in model.trees:
            for leaf in tree.leaves:
                assert len(describe_node(tree, leaf, model.attributes)) == tree.nodes[leaf].depth

    def test_relation_validated(self):
        with pytest.raises(ValueError):
            Condition("x", "<", 1.0)


class TestMerge:
    def test_numeric_bounds_merge(self):
        conds = [Condition("x", ">", 0.2), Condition("c", "=", "a"), Condition("x", "<=", 0.7),
                 Condition("x", "<=", 0.5)]
        assert merge_conditions(conds) == ["0.2 < x <= 0.5", "c = a"]

    def test_one_sided(self):
        assert merge_conditions([Condition("y", ">", 1.0)]) == ["y > 1"]


class TestTypicalValues:
    def test_hist(self):
        meta = AttributeMeta("c", Kind.NOMINAL, 0, ("a", "b"))
        m = fit_model(np.array([0.0] * 9 + [1.0]), True, 0.7, n_categories=2)
        assert typical_values(m, meta).categories == ("a",)

    def test_spike(self):
        m = fit_model(np.array([1.5]), False, 0.9, value_range=1.0)
        (iv,) = typical_values(m).intervals
        assert iv[0] <= 1.5 <= iv[1]
        assert iv[1] - iv[0] < 1e-7

    def test_bimodal_two_intervals(self):
        # wide enough jitter that each group of three values merges into one mode
        m = fit_model(bimodal_sample(jitter=0.05), False, 0.7)
        t = typical_values(m)
        assert len(t.intervals) == 2
        assert not t.contains(2.5)
        assert t.contains(1.5) and t.contains(3.5)
        # grid-scan oracle: the boundaries sit where kappa crosses tau
        fine = np.linspace(0.5, 4.5, 200_001)
        inside = m.kappa(fine) >= m.tau
        edges = fine[np.nonzero(np.diff(inside.astype(int)))[0]]
        found = np.array([e for iv in t.intervals for e in iv])
        np.testing.assert_allclose(found, edges, atol=1e-4)

    def test_zero_tau_everything_typical(self):
        from admercs.density import KdeModel

        t = typical_values(KdeModel(np.array([0.0, 1.0]), 0.1, 0.0, 0.9))
        assert t.contains(1e9)


class TestExplainInstance:
    def test_quiet_instance_has_no_explanations(self, synth_model):
        model, d = synth_model
        quiet = replace(model, lam_=np.zeros_like(model.lam_))
        omegas = model.omega_matrix(d.values)
        i = int(np.nonzero((omegas == 1.0).all(axis=1))[0][0])
        assert explain_instance(quiet, d.values[i]) == []

    def test_anomalous_context_ranks_first(self, synth_model):
        model, d = synth_model
        leaves = model.leaf_matrix(d.values[:1])[0]
        lam = np.zeros_like(model.lam_)
        lam[model.context_offsets[2] + leaves[2]] = 0.9
        exps = explain_instance(replace(model, lam_=lam), d.values[0])
        assert exps[0].kind == ANOMALOUS_CONTEXT
        assert exps[0].tree == 2 and exps[0].lam == 0.9
        assert exps[0].strength >= 0.9

    def test_functional_dependency_violation(self):
        d = zoo_like()
        model = ADMercs().fit(d)
        exps = explain_instance(model, d.values[0])
        top = exps[0]
        assert top.kind == DEVIATION
        assert top.target == "teeth"
        assert [c.attribute for c in top.conditions] == ["eggs"]
        assert top.observed == "yes" and top.typical.categories == ("no",)
        assert "typically have teeth in no, but this instance has teeth = yes" in render(top)

    def test_top_k_and_order(self, synth_model):
        model, d = synth_model
        i = int(np.argmax(model.delta_))
        exps = explain_instance(model, d.values[i], top_k=2)
        assert len(exps) <= 2
        assert all(a.strength >= b.strength for a, b in zip(exps, exps[1:]))


class TestConsistency:
    def test_deviation_paths_route_to_scoring_node(self, synth_model):
        model, d = synth_model
        for i in np.argsort(-model.delta_)[:40]:
            x = d.values[i]
            leaves = model.leaf_matrix(x[None])[0]
            for e in explain_instance(model, x, lambda_threshold=1.1):
                assert e.kind == DEVIATION
                tree = model.trees[e.tree]
                assert e.node_id in tree.path(tree.leaves[leaves[e.tree]])
                assert all(c.holds(x[model.attributes.index(next(a for a in model.attributes
                                                                    if a.name == c.attribute))])
                           for c in e.conditions)
                assert model.likelihoods[e.tree][e.node_id].omega(x[tree.target])[0] < 1.0
                assert e.omega < 1.0 and not e.typical.contains(e.observed)

    def test_strength_matches_evidence(self, synth_model):
        model, d = synth_model
        ev = model.evidence(d.values)
        omegas = model.omega_matrix(d.values)
        lam = model.lam_[model.leaf_matrix(d.values) + model.context_offsets]
        for i in np.argsort(-model.delta_)[:40]:
            exps = explain_instance(model, d.values[i])
            explained = (omegas[i] < 1.0) | (lam[i] >= 0.5)
            for e in exps:
                assert e.strength == pytest.approx(ev[i, e.tree])
            if explained.any():
                assert max(e.strength for e in exps) == pytest.approx(ev[i, explained].max())
            assert all(e.strength <= ev[i].max() + 1e-15 for e in exps)


class TestAnomalousContexts:
    def test_sorted_and_filtered(self, synth_model):
        model, _ = synth_model
        contexts = list_anomalous_contexts(model, 0.1)
        lams = [c.lam for c in contexts]
        assert lams == sorted(lams, reverse=True)
        assert all(l >= 0.1 for l in lams)
        assert len(contexts) == int(np.sum(model.lam_ >= 0.1))
        for c in contexts:
            assert c.members.size == model.trees[c.tree].nodes[model.trees[c.tree].leaves[c.leaf]].members.size
