import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from sklearn.base import clone

from stratified_transfer.classify import (
    ClassifierModel,
    KNNClassifier,
    NearestCentroidClassifier,
    TreeClassifier,
    VotingForestClassifier,
    default_base_classifiers,
    fit,
    majority_vote,
    predict,
    split_by_vote,
)
from stratified_transfer.datasets import LabeledDataset, UnlabeledDataset
from stratified_transfer.exceptions import EmptyInput, InvalidInput


def brute_vote(column):
    t = len(column)
    for label in set(column):
        if 2 * list(column).count(label) > t:
            return label
    return -1


def blobs(seed=0, n=100):
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], n)
    return np.vstack([rng.normal(0, 1, (n, 2)), rng.normal(6, 1, (n, 2))]), y


class TestFitPredict:
    def test_1nn_nearest_point(self):
        data = LabeledDataset([[0, 0], [1, 1]], [0, 1])
        assert predict(fit(ClassifierModel("knn", k=1), data), [[0.1, 0]])[0] == 0

    def test_centroid_singletons_equal_1nn(self, rng):
        data = LabeledDataset([[0, 0], [3, 1]], [4, 2])
        Q = rng.normal(size=(50, 2)) * 3
        a = predict(fit(ClassifierModel("nearest_centroid"), data), Q)
        b = predict(fit(ClassifierModel("knn", k=1), data), Q)
        np.testing.assert_array_equal(a, b)

    def test_forest_training_accuracy(self):
        X, y = blobs()
        clf = fit(ClassifierModel("random_forest", n_trees=30, seed=0), LabeledDataset(X, y))
        assert np.mean(clf.predict(X) == y) >= 0.95

    def test_knn_k_too_large(self):
        with pytest.raises(InvalidInput):
            KNNClassifier(3).fit([[0.0], [1.0]], [0, 1])

    def test_knn_equal_distance_tie(self):
        # query sits halfway: one neighbour of each class, lowest label wins
        clf = KNNClassifier(2).fit([[0.0], [2.0]], [1, 0])
        assert clf.predict([[1.0]])[0] == 0

    def test_knn_neighbour_ordering_tie(self):
        # three points at distance 1; k=1 must pick the lowest label
        clf = KNNClassifier(1).fit([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]], [2, 1, 3])
        assert clf.predict([[0.0, 0.0]])[0] == 1

    def test_knn_chunking(self, rng):
        X, y = blobs(1, 30)
        Q = rng.normal(3, 3, size=(57, 2))
        np.testing.assert_array_equal(KNNClassifier(3, chunk_size=5).fit(X, y).predict(Q),
                                      KNNClassifier(3).fit(X, y).predict(Q))

    @pytest.mark.parametrize("model", [KNNClassifier(1), NearestCentroidClassifier(),
                                       TreeClassifier(), VotingForestClassifier(3)])
    def test_empty_query_and_dim_check(self, model):
        X, y = blobs(0, 5)
        clf = clone(model).fit(X, y)
        assert clf.predict(np.empty((0, 2))).shape == (0,)
        with pytest.raises(InvalidInput):
            clf.predict(np.ones((2, 3)))

    def test_labels_keep_original_values(self):
        X, y = blobs(0, 10)
        clf = NearestCentroidClassifier().fit(X, y * 5 + 3)
        assert set(clf.predict(X)) <= {3, 8}

    def test_forest_vote_tie_goes_low(self):
        X, y = blobs(2, 20)
        clf = VotingForestClassifier(2, random_state=3).fit(X, y)
        votes = clf.tree_votes(X)
        split = votes[0] != votes[1]
        if split.any():
            assert np.all(clf.predict(X[split]) == 0)
        counts = np.stack([(votes == c).sum(0) for c in range(2)], 1)
        np.testing.assert_array_equal(clf.predict(X), clf.classes_[np.argmax(counts, 1)])

    def test_one_tree_forest_is_its_tree(self, rng):
        X, y = blobs(3, 40)
        clf = VotingForestClassifier(1, max_depth=None, random_state=5).fit(X, y)
        Q = rng.normal(3, 3, (100, 2))
        tree = clf.forest_.estimators_[0]
        np.testing.assert_array_equal(clf.predict(Q), clf.classes_[tree.predict(Q).astype(int)])

    def test_deterministic_given_seed(self, rng):
        X, y = blobs(4, 30)
        Q = rng.normal(3, 3, (40, 2))
        a = VotingForestClassifier(5, random_state=9).fit(X, y).predict(Q)
        b = VotingForestClassifier(5, random_state=9).fit(X, y).predict(Q)
        np.testing.assert_array_equal(a, b)

    def test_model_validation(self):
        for bad in (dict(kind="svm"), dict(k=0), dict(n_trees=0)):
            with pytest.raises(InvalidInput):
                ClassifierModel(**bad)

    def test_with_seed_keeps_explicit(self):
        assert ClassifierModel(seed=4).with_seed(9).seed == 4
        assert ClassifierModel().with_seed(9).seed == 9

    def test_default_trio(self):
        kinds = [m.kind for m in default_base_classifiers()]
        assert kinds == ["knn", "nearest_centroid", "random_forest"]
        assert default_base_classifiers()[0].k == 3
        assert default_base_classifiers()[2].n_trees == 30


class TestMajorityVote:
    @pytest.mark.parametrize("column, expected", [
        ([0, 0, 1], 0), ([0, 1], -1), ([2, 2, 2], 2), ([0, 1, 2], -1), ([1, 0, 1, 1], 1),
    ])
    def test_examples(self, column, expected):
        assert majority_vote(np.array(column)[:, None])[0] == expected

    def test_truth_table(self):
        patterns = np.array(list(itertools.product(range(3), repeat=3))).T
        out = majority_vote(patterns)
        assert out.tolist() == [brute_vote(col) for col in patterns.T]

    def test_unanimous_gives_no_residuals(self):
        split = split_by_vote(np.zeros((4, 2)), majority_vote([[1, 0, 2, 1]] * 3))
        assert split.res_idx.size == 0

    def test_empty(self):
        with pytest.raises(EmptyInput):
            majority_vote(np.empty((0, 3)))

    votes = arrays(np.int64, st.tuples(st.integers(1, 6), st.integers(1, 10)),
                   elements=st.integers(0, 3))

    @settings(max_examples=100)
    @given(votes, st.randoms(use_true_random=False))
    def test_invariants(self, P, r):
        out = majority_vote(P)
        perm = list(range(P.shape[0]))
        r.shuffle(perm)
        np.testing.assert_array_equal(majority_vote(P[perm]), out)
        np.testing.assert_array_equal(majority_vote(np.vstack([P, P])), out)
        np.testing.assert_array_equal(majority_vote(P[:1]), P[0])
        assert out.tolist() == [brute_vote(col) for col in P.T]


class TestSplit:
    def test_example(self):
        s = split_by_vote(UnlabeledDataset(np.zeros((3, 1))), [4, -1, 2])
        assert s.can_idx.tolist() == [0, 2] and s.res_idx.tolist() == [1]
        assert s.y_can.tolist() == [4, 2]

    def test_all_residual(self):
        assert split_by_vote(np.zeros((2, 1)), [-1, -1]).empty

    def test_length_mismatch(self):
        with pytest.raises(InvalidInput):
            split_by_vote(np.zeros((2, 1)), [0])

    @settings(max_examples=100)
    @given(st.lists(st.integers(-1, 3), min_size=1, max_size=30))
    def test_partition(self, votes):
        s = split_by_vote(np.zeros((len(votes), 1)), votes)
        both = np.concatenate([s.can_idx, s.res_idx])
        assert sorted(both.tolist()) == list(range(len(votes)))
        assert s.n == len(votes)
        assert np.all(np.diff(s.can_idx) > 0) and np.all(np.diff(s.res_idx) > 0)
        assert np.all(s.y_can >= 0)
