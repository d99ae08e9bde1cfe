import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_dataset
from stayforge.data import FeatureKind
from stayforge.errors import InsufficientDimensionsError, UndefinedAUCError
from stayforge.metrics import (
    confusion,
    equal_frequency_bins,
    evaluate_scores,
    f1_from_pr,
    mutual_information,
    pca_project,
    roc_auc,
    roc_curve,
    scalar_metrics,
    top_k_features,
)


def mann_whitney(scores, truth):
    pos = [s for s, t in zip(scores, truth) if t == 1]
    neg = [s for s, t in zip(scores, truth) if t == 0]
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


class TestScalar:
    def test_confusion(self):
        assert confusion([1, 1, 0, 0, 1], [1, 0, 1, 0, 1]) == (2, 1, 1, 1)

    def test_scalar_values(self):
        p, r, f1, acc = scalar_metrics(2, 1, 1, 1)
        assert (p, r, acc) == (2 / 3, 2 / 3, 0.6)
        assert f1 == pytest.approx(2 / 3, abs=1e-15)

    def test_zero_denominators(self):
        assert scalar_metrics(0, 0, 20, 80) == (0.0, 0.0, 0.0, 0.8)
        assert f1_from_pr(0.0, 0.0) == 0.0

    def test_published_precision_recall(self):
        assert f1_from_pr(0.8664, 0.8495) == pytest.approx(0.8579, abs=5e-4)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion([1, 0], [1])


class TestROC:
    def test_hand_example_with_tie(self):
        scores, truth = [0.9, 0.8, 0.8, 0.3], [1, 0, 1, 0]
        fpr, tpr, thr = roc_curve(scores, truth)
        np.testing.assert_array_equal(fpr, [0, 0, 0.5, 1])
        np.testing.assert_array_equal(tpr, [0, 0.5, 1, 1])
        np.testing.assert_array_equal(thr, [np.inf, 0.9, 0.8, 0.3])
        assert roc_auc(scores, truth)[1] == 0.875

    def test_perfect_and_inverted(self):
        assert roc_auc([0.1, 0.9], [0, 1])[1] == 1.0
        assert roc_auc([0.9, 0.1], [0, 1])[1] == 0.0

    def test_all_tied(self):
        assert roc_auc([0.5] * 4, [0, 1, 0, 1])[1] == 0.5

    def test_single_class(self):
        with pytest.raises(UndefinedAUCError):
            roc_auc([0.1, 0.2], [1, 1])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), min_size=2, max_size=60))
    def test_matches_mann_whitney(self, pairs):
        scores = [s / 5 for s, _ in pairs]
        truth = [int(t) for _, t in pairs]
        if len(set(truth)) < 2:
            return
        assert abs(roc_auc(scores, truth)[1] - mann_whitney(scores, truth)) <= 1e-12

    def test_evaluate_threshold_inclusive(self):
        report = evaluate_scores([0.5, 0.4, 0.7], [1, 0, 0])
        assert (report.tp, report.fp, report.fn, report.tn) == (1, 1, 0, 1)
        assert "roc" not in report.to_dict()


class TestMutualInformation:
    def test_identical_balanced(self):
        y = np.array([0, 1] * 50)
        assert mutual_information(y, y) == pytest.approx(math.log(2), abs=1e-12)

    def test_independent_exact_zero(self):
        assert mutual_information([0, 0, 1, 1], [0, 1, 0, 1]) == 0.0

    def test_hand_table(self):
        expected = 0.5 * math.log(4 / 3) + 0.25 * math.log(2 / 3) + 0.25 * math.log(2)
        assert mutual_information([0, 0, 0, 1], [0, 0, 1, 1]) == pytest.approx(expected, abs=1e-14)

    def test_constant_label(self):
        assert mutual_information([1, 2, 3], [1, 1, 1]) == 0.0

    def test_equal_frequency_bins(self):
        bins = equal_frequency_bins(np.arange(100.0))
        assert np.bincount(bins).tolist() == [10] * 10

    def test_continuous_invariant_to_monotone_transform(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=300)
        y = (x + rng.normal(size=300) > 0).astype(int)
        a = mutual_information(x, y, continuous=True)
        b = mutual_information(np.exp(x), y, continuous=True)
        assert a == pytest.approx(b, abs=1e-12) and a > 0.05

    def test_top_k_ties_by_name(self):
        y = np.array([0, 1, 0, 1])
        ds = make_dataset(
            np.column_stack([[0, 0, 0, 0], y, y]),
            y,
            kinds=[FeatureKind.CATEGORICAL] * 3,
            names=["zeta", "beta", "alpha"],
        )
        assert [n for n, _ in top_k_features(ds, 3)] == ["alpha", "beta", "zeta"]
        with pytest.raises(ValueError):
            top_k_features(ds, 4)


class TestPCA:
    def test_line(self):
        res = pca_project([[0, 0], [1, 2], [2, 4]])
        np.testing.assert_allclose(res.components[0], np.array([1, 2]) / math.sqrt(5), atol=1e-12)
        np.testing.assert_allclose(res.explained_variance_ratio, [1, 0], atol=1e-12)
        np.testing.assert_allclose(res.coordinates[:, 0], [-math.sqrt(5), 0, math.sqrt(5)], atol=1e-12)

    def test_sign_convention(self):
        a = pca_project([[0, 0], [-1, -2], [-2, -4.5]])
        assert a.components[0][np.argmax(np.abs(a.components[0]))] > 0

    def test_too_few_dims(self):
        with pytest.raises(InsufficientDimensionsError):
            pca_project([[1], [2], [3]])
