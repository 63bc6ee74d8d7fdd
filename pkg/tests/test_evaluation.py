import itertools
import json
import warnings

import numpy as np
import pytest

from admercs.evaluation import (
    TiedScoresWarning,
    auc_roc,
    average_precision,
    evaluate,
    params_hash,
    run_experiment,
)

from oracles import all_binary_labelings, ap_staircase, auc_pairs


class TestExamples:
    def test_positive_at_rank_two(self):
        assert average_precision([0.9, 0.8, 0.2, 0.1], [0, 1, 0, 0]) == pytest.approx(0.5)

    def test_auc_half(self):
        # positives {0.9, 0.3} against the negative 0.5: one win, one loss
        assert auc_roc([0.9, 0.3, 0.5], [1, 1, 0]) == pytest.approx(0.5)

    def test_perfect_and_reversed(self):
        s = [0.9, 0.8, 0.2, 0.1]
        assert auc_roc(s, [1, 1, 0, 0]) == 1.0
        assert auc_roc(s, [0, 0, 1, 1]) == 0.0
        assert average_precision(s, [1, 1, 0, 0]) == 1.0

    def test_all_tied_auc(self):
        assert auc_roc([0.3] * 5, [1, 0, 0, 1, 0]) == pytest.approx(0.5)


class TestExhaustiveOracles:
    @pytest.mark.parametrize("n", range(2, 9))
    def test_every_labeling_distinct_scores(self, n, rng):
        scores = rng.permutation(n) / n
        for labels in all_binary_labelings(n):
            assert auc_roc(scores, labels) == pytest.approx(auc_pairs(scores, labels), abs=1e-12)
            assert average_precision(scores, labels) == pytest.approx(ap_staircase(scores, labels), abs=1e-12)

    @pytest.mark.parametrize("n", [10, 12])
    def test_tied_scores_against_oracles(self, n):
        r = np.random.default_rng(n)
        for _ in range(200):
            scores = r.integers(0, 4, n) / 4.0
            labels = r.integers(0, 2, n)
            if labels.all() or not labels.any():
                continue
            assert auc_roc(scores, labels) == pytest.approx(auc_pairs(scores, labels), abs=1e-12)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", TiedScoresWarning)
                ap = average_precision(scores, labels)
            assert ap == pytest.approx(ap_staircase(list(scores), list(labels)), abs=1e-12)

    def test_all_permutations_of_six(self):
        labels = [1, 0, 1, 0, 0, 1]
        for perm in itertools.permutations(range(6)):
            scores = np.array(perm, dtype=float)
            assert auc_roc(scores, labels) == pytest.approx(auc_pairs(scores, labels), abs=1e-12)
            assert average_precision(scores, labels) == pytest.approx(ap_staircase(scores, labels), abs=1e-12)


class TestProperties:
    def test_monotone_transform_invariance(self, rng):
        s = rng.normal(size=200)
        y = rng.uniform(size=200) < 0.1
        y[:2] = [True, False]
        for f in (np.exp, lambda v: 3 * v + 1, np.arctan):
            assert auc_roc(f(s), y) == pytest.approx(auc_roc(s, y), abs=1e-12)
            assert average_precision(f(s), y) == pytest.approx(average_precision(s, y), abs=1e-12)

    def test_random_scores_ap_near_contamination(self):
        r = np.random.default_rng(0)
        c = 0.1
        aps = []
        for _ in range(200):
            y = np.zeros(1000, bool)
            y[: int(c * 1000)] = True
            aps.append(average_precision(r.uniform(size=1000), y))
        assert abs(np.mean(aps) - c) <= 0.02

    def test_ties_across_classes_warn(self):
        with pytest.warns(TiedScoresWarning):
            average_precision([0.5, 0.5, 0.1], [1, 0, 0])

    def test_ties_within_class_are_quiet(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            average_precision([0.5, 0.5, 0.1], [1, 1, 0])

    @pytest.mark.parametrize("labels", [[1, 1, 1], [0, 0, 0]])
    def test_single_class_rejected(self, labels):
        with pytest.raises(ValueError, match="both"):
            auc_roc([0.1, 0.2, 0.3], labels)
        with pytest.raises(ValueError):
            average_precision([0.1, 0.2, 0.3], labels)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            auc_roc([0.1, 0.2], [1, 0, 0])
        with pytest.raises(ValueError):
            auc_roc([np.nan, 0.2], [1, 0])

    def test_evaluate_counts(self):
        r = evaluate([0.9, 0.1, 0.2], [1, 0, 0])
        assert (r.auc, r.ap, r.n_pos, r.n_neg) == (1.0, 1.0, 1, 2)


class TestRunExperiment:
    def suite(self, tmp_path):
        for name in ("a.csv", "b.csv", "c.csv"):
            (tmp_path / name).write_text("x\n1\n")
        return tmp_path

    def test_collects_rows_and_aggregate(self, tmp_path):
        def fit_score(path):
            return np.array([0.9, 0.1, 0.5]), np.array([1, 0, 0])

        out = tmp_path / "report.json"
        report = run_experiment(self.suite(tmp_path), fit_score, {"rho": 0.9}, out)
        assert [r["dataset"] for r in report["datasets"]] == ["a.csv", "b.csv", "c.csv"]
        agg = report["aggregate"]
        assert agg["auc"] == 1.0 and agg["n_failed"] == 0 and agg["n_datasets"] == 3
        assert all(r["params_hash"] == params_hash({"rho": 0.9}) for r in report["datasets"])
        assert json.loads(out.read_text())["aggregate"] == agg

    def test_failure_is_recorded_and_suite_continues(self, tmp_path):
        def fit_score(path):
            if path.name == "b.csv":
                raise RuntimeError("boom")
            return np.array([0.9, 0.1]), np.array([1, 0])

        report = run_experiment(self.suite(tmp_path), fit_score, {})
        rows = {r["dataset"]: r for r in report["datasets"]}
        assert rows["b.csv"]["error"] == "RuntimeError: boom" and rows["b.csv"]["auc"] is None
        assert report["aggregate"]["n_failed"] == 1
        assert report["aggregate"]["auc"] == 1.0

    def test_empty_suite(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            run_experiment(tmp_path, lambda p: None, {})

    def test_params_hash_stable(self):
        assert params_hash({"a": 1, "b": 2}) == params_hash({"b": 2, "a": 1})
        assert params_hash({"a": 1}) != params_hash({"a": 2})
